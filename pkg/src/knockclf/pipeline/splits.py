"""Stratified hold-out and k-fold partitions of a manifest."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..audio import Manifest
from ..errors import StratificationError


@dataclass(frozen=True)
class SplitConfig:
    test_fraction: float = 0.10
    stratified: bool = True
    k_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.k_folds < 2:
            raise ValueError("k_folds must be at least 2")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


def split_indices(labels, test_fraction: float, seed: int, stratified: bool = True):
    """Return sorted ``(train_idx, test_idx)``; per class ``round(test_fraction * count)`` go to test."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    if not stratified:
        perm = rng.permutation(len(labels))
        n_test = _round_half_up(test_fraction * len(labels))
        return np.sort(perm[n_test:]), np.sort(perm[:n_test])
    test = []
    for c in range(3):
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            raise StratificationError(f"class {c} has no clips")
        idx = rng.permutation(idx)
        test.append(idx[: _round_half_up(test_fraction * idx.size)])
    test = np.sort(np.concatenate(test))
    train = np.setdiff1d(np.arange(len(labels)), test)
    return train, test


def split_train_test(manifest: Manifest, cfg: SplitConfig = SplitConfig()):
    train, test = split_indices(manifest.labels, cfg.test_fraction, cfg.seed, cfg.stratified)
    return manifest.subset(train), manifest.subset(test)


def kfold_indices(labels, k: int, seed: int):
    """Stratified folds as a list of ``(train_idx, val_idx)``.

    Clips are grouped by class (shuffled within class) and dealt to folds
    round-robin, so per-class and total fold sizes each differ by at most one.
    """
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=3)
    present = counts[counts > 0]
    if k < 2:
        raise ValueError("k must be at least 2")
    if present.size == 0 or k > present.min():
        raise ValueError(f"k={k} exceeds the smallest class count {present.min() if present.size else 0}")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in range(3)])
    fold_of = np.empty(len(labels), dtype=np.int64)
    fold_of[order] = np.arange(len(order)) % k
    folds = []
    for j in range(k):
        folds.append((np.flatnonzero(fold_of != j), np.flatnonzero(fold_of == j)))
    return folds


def kfold_split(manifest: Manifest, cfg: SplitConfig = SplitConfig()):
    return [(manifest.subset(tr), manifest.subset(va)) for tr, va in kfold_indices(manifest.labels, cfg.k_folds, cfg.seed)]
