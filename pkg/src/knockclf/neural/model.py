"""Conv1d -> Conv1d -> AvgPool -> per-frame Linear -> RNN/LSTM -> Dropout -> output head."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import ShapeError
from . import ops
from .recurrent import lstm_forward, rnn_forward
from .tensor import Tensor, parameter

CELLS = ("rnn", "lstm")


@dataclass(frozen=True)
class ModelConfig:
    cell: str = "rnn"
    in_channels: int = 128
    conv1_channels: int = 32
    conv2_channels: int = 64
    kernel_size: int = 3
    pool_kernel: int = 1
    frame_units: int = 64
    hidden_units: int = 64
    num_layers: int = 1
    dropout_p: float = 0.5
    classes: int = 3
    batch_size: int = 128
    epochs: int = 60
    learning_rate: float = 0.001
    optimizer: str = "adam"

    def __post_init__(self):
        if self.cell not in CELLS:
            raise ValueError(f"cell must be one of {CELLS}, got {self.cell!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and f.name != "dropout_p" and not v > 0:
                raise ValueError(f"{f.name} must be positive")

    @property
    def padding(self) -> int:
        return (self.kernel_size - 1) // 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def parameter_shapes(cfg: ModelConfig) -> dict:
    """Name -> shape for every trainable tensor, in a fixed order."""
    k = cfg.kernel_size
    gates = 4 if cfg.cell == "lstm" else 1
    shapes = {
        "conv1.weight": (cfg.conv1_channels, cfg.in_channels, k),
        "conv1.bias": (cfg.conv1_channels,),
        "conv2.weight": (cfg.conv2_channels, cfg.conv1_channels, k),
        "conv2.bias": (cfg.conv2_channels,),
        "frame.weight": (cfg.frame_units, cfg.conv2_channels),
        "frame.bias": (cfg.frame_units,),
    }
    for layer in range(cfg.num_layers):
        n_in = cfg.frame_units if layer == 0 else cfg.hidden_units
        p = f"{cfg.cell}{layer}"
        shapes[f"{p}.weight_ih"] = (gates * cfg.hidden_units, n_in)
        shapes[f"{p}.weight_hh"] = (gates * cfg.hidden_units, cfg.hidden_units)
        shapes[f"{p}.bias_ih"] = (gates * cfg.hidden_units,)
        shapes[f"{p}.bias_hh"] = (gates * cfg.hidden_units,)
    shapes["out.weight"] = (cfg.classes, cfg.hidden_units)
    shapes["out.bias"] = (cfg.classes,)
    return shapes


def parameter_count(cfg: ModelConfig) -> int:
    return int(sum(np.prod(s) for s in parameter_shapes(cfg).values()))


def _fan_in(name: str, shape: tuple, cfg: ModelConfig) -> int:
    if name.startswith("conv"):
        return shape[1] * shape[2]
    if ".weight_hh" in name or ".bias_" in name:
        return cfg.hidden_units
    return shape[1]


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero."""
    params = {}
    for name, shape in parameter_shapes(cfg).items():
        if "bias" in name:
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(_fan_in(name, shape, cfg))
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


class Model:
    """Holds named parameter tensors and runs the forward pass."""

    def __init__(self, cfg: ModelConfig, params: dict):
        expected = parameter_shapes(cfg)
        if set(params) != set(expected):
            raise ShapeError(f"parameter names {sorted(params)} do not match {cfg.cell} config")
        for name, shape in expected.items():
            if np.shape(params[name]) != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {np.shape(params[name])}")
        self.cfg = cfg
        self.params = {name: parameter(np.array(params[name], dtype=np.float64), name) for name in expected}

    @classmethod
    def initialize(cls, cfg: ModelConfig, rng: np.random.Generator) -> "Model":
        return cls(cfg, init_params(cfg, rng))

    def state(self) -> dict:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_state(self, state: dict):
        for name, t in self.params.items():
            t.data = np.array(state[name], dtype=np.float64)

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def __call__(self, batch, training: bool = False, rng: np.random.Generator = None) -> Tensor:
        return model_forward(self, batch, training, rng)


def model_forward(model: Model, batch, training: bool = False, rng: np.random.Generator = None) -> Tensor:
    """Logits ``(B, classes)`` for a batch of feature tensors ``(B, in_channels, T)``."""
    cfg, p = model.cfg, model.params
    x = batch if isinstance(batch, Tensor) else Tensor(batch)
    if x.ndim != 3 or x.shape[1] != cfg.in_channels:
        raise ShapeError(f"expected a (B, {cfg.in_channels}, T) batch, got {x.shape}")

    h = ops.relu(ops.conv1d(x, p["conv1.weight"], p["conv1.bias"], cfg.padding))
    h = ops.relu(ops.conv1d(h, p["conv2.weight"], p["conv2.bias"], cfg.padding))
    h = ops.avg_pool1d(h, cfg.pool_kernel)
    seq = ops.relu(ops.linear(h.transpose(0, 2, 1), p["frame.weight"], p["frame.bias"]))
    recur = lstm_forward if cfg.cell == "lstm" else rnn_forward
    for layer in range(cfg.num_layers):
        pre = f"{cfg.cell}{layer}"
        seq = recur(seq, p[f"{pre}.weight_ih"], p[f"{pre}.weight_hh"], p[f"{pre}.bias_ih"], p[f"{pre}.bias_hh"])
    last = seq[:, -1, :]
    last = ops.dropout(last, cfg.dropout_p, rng, training)
    return ops.linear(last, p["out.weight"], p["out.bias"])
