"""Adam and plain SGD over dicts of named parameter tensors."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> dict:
    """Bias-corrected Adam update; returns new arrays and advances ``state`` in place."""
    state.step += 1
    t = state.step
    out = {}
    for name, w in params.items():
        g = grads.get(name)
        if g is None:
            out[name] = w
            continue
        if np.shape(g) != np.shape(w):
            raise ShapeError(f"{name}: gradient shape {np.shape(g)} != parameter shape {np.shape(w)}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(w)
            v = np.zeros_like(w)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        out[name] = w - lr * m_hat / (np.sqrt(v_hat) + eps)
    return out


class Adam:
    def __init__(self, params: dict, lr: float = 0.001):
        self.params = params
        self.lr = lr
        self.state = AdamState()

    def step(self):
        data = {n: t.data for n, t in self.params.items()}
        grads = {n: t.grad for n, t in self.params.items() if t.grad is not None}
        for name, w in adam_step(data, grads, self.state, self.lr).items():
            self.params[name].data = w


class SGD:
    def __init__(self, params: dict, lr: float = 0.01):
        self.params = params
        self.lr = lr

    def step(self):
        for t in self.params.values():
            if t.grad is not None:
                t.data = t.data - self.lr * t.grad


def make_optimizer(kind: str, params: dict, lr: float):
    if kind == "adam":
        return Adam(params, lr)
    if kind == "sgd":
        return SGD(params, lr)
    raise ValueError(f"unknown optimizer {kind!r}")
