"""Mini-batch training with per-epoch validation, prediction and the linear baseline."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import CheckpointError, ShapeError
from ..neural import ops
from ..neural.checkpoint import Checkpoint
from ..neural.model import Model, ModelConfig
from ..neural.optim import Adam, make_optimizer
from ..neural.tensor import Tensor, parameter

log = logging.getLogger(__name__)

EVAL_CHUNK = 512


@dataclass
class TrainLog:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)

    def record(self, train_loss: float, val_loss: float):
        self.train_loss.append(float(train_loss))
        self.val_loss.append(float(val_loss))

    def __len__(self):
        return len(self.train_loss)

    @property
    def best_epoch(self) -> int:
        """1-based epoch with the lowest validation loss (first one on ties)."""
        losses = self.val_loss if not np.all(np.isnan(self.val_loss)) else self.train_loss
        return int(np.nanargmin(losses)) + 1

    @property
    def best_validation_loss(self) -> float:
        return float(np.nanmin(self.val_loss)) if len(self) and not np.all(np.isnan(self.val_loss)) else float("nan")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss"])
            for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss), start=1):
                w.writerow([i, repr(tr), repr(va)])

    @classmethod
    def read_csv(cls, path) -> "TrainLog":
        out = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                out.record(float(row["train_loss"]), float(row["val_loss"]))
        return out


def streams(seed: int):
    """Independent generators for weight init, batch order and dropout."""
    init, order, drop = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init), np.random.default_rng(order), np.random.default_rng(drop)


def _batch(X, idx) -> np.ndarray:
    return np.asarray(X[idx], dtype=np.float64)


def logits_for(model: Model, X) -> np.ndarray:
    out = []
    for start in range(0, len(X), EVAL_CHUNK):
        out.append(model(_batch(X, slice(start, start + EVAL_CHUNK))).data)
    return np.concatenate(out) if out else np.empty((0, model.cfg.classes))


def mean_loss(model: Model, X, y) -> float:
    if len(X) == 0:
        return float("nan")
    z = logits_for(model, X)
    logp = ops.log_softmax(z)
    return float(-logp[np.arange(len(y)), y].mean())


def fit(X, y, X_val, y_val, cfg: ModelConfig, seed: int, progress=None):
    """Train a fresh model; returns ``(Checkpoint, TrainLog)``.

    The checkpoint holds the last-epoch weights and the weights from the epoch
    with the lowest validation loss.
    """
    y = np.asarray(y, dtype=np.int64)
    y_val = np.asarray(y_val, dtype=np.int64)
    n = len(X)
    if n == 0:
        raise ValueError("training set is empty")
    if X.shape[1] != cfg.in_channels:
        raise ShapeError(f"features have {X.shape[1]} channels, model expects {cfg.in_channels}")
    init_rng, order_rng, drop_rng = streams(seed)
    model = Model.initialize(cfg, init_rng)
    opt = make_optimizer(cfg.optimizer, model.params, cfg.learning_rate)
    history = TrainLog()
    best_state, best_loss = None, np.inf

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        perm = order_rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = np.sort(perm[start : start + cfg.batch_size])
            model.zero_grad()
            loss = ops.softmax_cross_entropy(model(_batch(X, idx), True, drop_rng), y[idx])
            loss.backward()
            opt.step()
            total += float(loss.data) * len(idx)
        val = mean_loss(model, X_val, y_val)
        history.record(total / n, val)
        score = val if len(X_val) else total / n
        if score < best_loss:
            best_loss, best_state = score, model.state()
        log.info("epoch %d/%d train %.4f val %.4f (%.1fs)", epoch, cfg.epochs, total / n, val, time.perf_counter() - t0)
        if progress is not None:
            progress(epoch, history)

    meta = {
        "epochs_run": len(history),
        "final_train_loss": history.train_loss[-1],
        "final_val_loss": history.val_loss[-1],
        "best_epoch": history.best_epoch,
        "best_val_loss": history.best_validation_loss,
        "n_train": int(n),
        "n_val": int(len(X_val)),
    }
    meta = {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in meta.items()}
    return Checkpoint(cfg, model.state(), best_state, seed, meta), history


def model_from_checkpoint(ckpt: Checkpoint, which: str = "best") -> Model:
    try:
        return Model(ckpt.config, ckpt.weights(which))
    except ShapeError as exc:
        raise CheckpointError(str(exc)) from exc


def predict_features(ckpt: Checkpoint, X, which: str = "best") -> np.ndarray:
    """Arg-max class per clip (dropout off). Ties go to the lowest class index."""
    if len(X) and X.shape[1] != ckpt.config.in_channels:
        raise CheckpointError(f"checkpoint expects {ckpt.config.in_channels} feature channels, got {X.shape[1]}")
    return argmax_labels(logits_for(model_from_checkpoint(ckpt, which), X))


def argmax_labels(logits) -> np.ndarray:
    return np.argmax(np.asarray(logits), axis=1)


# ---------------------------------------------------------------------------
# Linear baseline


def baseline_linear(X, y, X_test, y_test, seed: int = 0, epochs: int = 20, lr: float = 0.001, batch_size: int = 128):
    """Flattened features -> one linear layer -> 3 logits. Returns ``(train_acc, test_acc)`` in percent."""
    y = np.asarray(y, dtype=np.int64)
    y_test = np.asarray(y_test, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("training set is empty")
    d = int(np.prod(X.shape[1:]))
    init_rng, order_rng, _ = streams(seed)
    bound = 1.0 / np.sqrt(d)
    params = {
        "weight": parameter(init_rng.uniform(-bound, bound, size=(3, d)), "weight"),
        "bias": parameter(np.zeros(3), "bias"),
    }
    opt = Adam(params, lr)
    flat = lambda A, idx: np.asarray(A[idx], dtype=np.float64).reshape(-1, d)  # noqa: E731

    for _ in range(epochs):
        perm = order_rng.permutation(len(X))
        for start in range(0, len(X), batch_size):
            idx = np.sort(perm[start : start + batch_size])
            for p in params.values():
                p.grad = None
            z = ops.linear(Tensor(flat(X, idx)), params["weight"], params["bias"])
            ops.softmax_cross_entropy(z, y[idx]).backward()
            opt.step()

    def accuracy(A, labels):
        if len(A) == 0:
            return float("nan")
        hits = 0
        for start in range(0, len(A), EVAL_CHUNK):
            sl = slice(start, start + EVAL_CHUNK)
            z = flat(A, sl) @ params["weight"].data.T + params["bias"].data
            hits += int(np.sum(np.argmax(z, axis=1) == labels[sl]))
        return 100.0 * hits / len(A)

    return accuracy(X, y), accuracy(X_test, y_test)
