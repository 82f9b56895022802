"""Checkpoint container.

Layout::

    b"KNCK"                      magic
    u32 little-endian            header length in bytes
    header                       UTF-8 JSON, keys sorted
    tensor payload               little-endian float64, concatenated

Header keys: ``version`` (1), ``cell``, ``config`` (ModelConfig fields), ``seed``,
``metadata`` (free-form training info) and ``tensors``, a list of
``{"name", "shape", "offset"}`` with ``offset`` counted in float64 elements from
the start of the payload. Tensor names are ``final/<param>`` for the last-epoch
weights and ``best/<param>`` for the best-validation-epoch weights.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .model import ModelConfig, parameter_shapes

MAGIC = b"KNCK"
VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict
    best_params: dict = None
    seed: int = 0
    metadata: dict = field(default_factory=dict)
    version: int = VERSION

    @property
    def cell(self) -> str:
        return self.config.cell

    def weights(self, which: str = "best") -> dict:
        if which == "best" and self.best_params is not None:
            return self.best_params
        return self.params


def _check(cfg: ModelConfig, params: dict, label: str):
    shapes = parameter_shapes(cfg)
    if set(params) != set(shapes):
        raise CheckpointError(f"{label} tensors do not match the {cfg.cell} configuration")
    for name, shape in shapes.items():
        if tuple(np.shape(params[name])) != shape:
            raise CheckpointError(f"{label}/{name}: shape {np.shape(params[name])} != {shape}")


def to_bytes(ckpt: Checkpoint) -> bytes:
    _check(ckpt.config, ckpt.params, "final")
    groups = [("final", ckpt.params)]
    if ckpt.best_params is not None:
        _check(ckpt.config, ckpt.best_params, "best")
        groups.append(("best", ckpt.best_params))
    entries, chunks, offset = [], [], 0
    for prefix, params in groups:
        for name in parameter_shapes(ckpt.config):
            arr = np.ascontiguousarray(params[name], dtype="<f8")
            entries.append({"name": f"{prefix}/{name}", "shape": list(arr.shape), "offset": offset})
            chunks.append(arr.tobytes())
            offset += arr.size
    header = {
        "version": ckpt.version,
        "cell": ckpt.config.cell,
        "config": ckpt.config.to_dict(),
        "seed": ckpt.seed,
        "metadata": ckpt.metadata,
        "tensors": entries,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<I", len(head)) + head + b"".join(chunks)


def from_bytes(data: bytes) -> Checkpoint:
    if data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file")
    (n,) = struct.unpack_from("<I", data, 4)
    header = json.loads(data[8 : 8 + n].decode("utf-8"))
    if header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
    cfg = ModelConfig.from_dict(header["config"])
    payload = np.frombuffer(data, dtype="<f8", offset=8 + n)
    groups = {"final": {}, "best": {}}
    for t in header["tensors"]:
        prefix, name = t["name"].split("/", 1)
        size = int(np.prod(t["shape"]))
        groups[prefix][name] = payload[t["offset"] : t["offset"] + size].reshape(t["shape"]).astype(np.float64)
    best = groups["best"] or None
    ckpt = Checkpoint(cfg, groups["final"], best, header["seed"], header["metadata"], header["version"])
    _check(cfg, ckpt.params, "final")
    if best is not None:
        _check(cfg, best, "best")
    return ckpt


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
