"""Differentiable layers as functions of Tensors. Inputs are batched as ``(B, C, L)`` or ``(B, F)``."""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, as_tensor


def conv1d(x: Tensor, weight: Tensor, bias: Tensor = None, pad: int = 0) -> Tensor:
    """Cross-correlation over the last axis with zero padding.

    ``x`` is ``(C_in, L)`` or ``(B, C_in, L)``; ``weight`` is ``(C_out, C_in, K)``.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    unbatched = x.ndim == 2
    xd = x.data[None] if unbatched else x.data
    if xd.ndim != 3 or weight.ndim != 3:
        raise ShapeError(f"conv1d expects (B, C, L) input and (C_out, C_in, K) weights, got {x.shape}, {weight.shape}")
    B, C, L = xd.shape
    C_out, C_w, K = weight.shape
    if C != C_w:
        raise ShapeError(f"input has {C} channels, weights expect {C_w}")
    if bias is not None and as_tensor(bias).shape != (C_out,):
        raise ShapeError(f"bias must have shape ({C_out},)")
    L_out = L + 2 * pad - K + 1
    if L_out < 1:
        raise ShapeError("kernel longer than padded input")

    xp = np.pad(xd, ((0, 0), (0, 0), (pad, pad)))
    idx = np.arange(L_out)[:, None] + np.arange(K)[None, :]
    cols = xp[:, :, idx].transpose(0, 2, 1, 3).reshape(B * L_out, C * K)
    wmat = weight.data.reshape(C_out, C * K)
    out = (cols @ wmat.T).reshape(B, L_out, C_out).transpose(0, 2, 1)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[None, :, None]
        parents.append(bias)
    if unbatched:
        out = out[0]

    def backward(g):
        g = g[None] if unbatched else g
        g2 = g.transpose(0, 2, 1).reshape(B * L_out, C_out)
        gw = (g2.T @ cols).reshape(C_out, C, K)
        gcols = (g2 @ wmat).reshape(B, L_out, C, K)
        gxp = np.zeros_like(xp)
        for k in range(K):
            gxp[:, :, k : k + L_out] += gcols[:, :, :, k].transpose(0, 2, 1)
        gx = gxp[:, :, pad : pad + L] if pad else gxp
        if unbatched:
            gx = gx[0]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    return Tensor(np.ascontiguousarray(out), parents=parents, backward=backward)


def avg_pool1d(x: Tensor, kernel: int = 1) -> Tensor:
    """Average over non-overlapping windows of the last axis; a trailing partial window is dropped.

    ``kernel=1`` is the identity.
    """
    if kernel < 1:
        raise ValueError("kernel must be at least 1")
    x = as_tensor(x)
    if kernel == 1:
        return Tensor(x.data, parents=(x,), backward=lambda g: (g,))
    L = x.shape[-1]
    n = L // kernel
    lead = x.shape[:-1]
    out = x.data[..., : n * kernel].reshape(*lead, n, kernel).mean(axis=-1)

    def backward(g):
        gx = np.zeros(x.shape)
        gx[..., : n * kernel] = np.repeat(g / kernel, kernel, axis=-1)
        return (gx,)

    return Tensor(out, parents=(x,), backward=backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor = None) -> Tensor:
    """Affine map over the last axis; ``weight`` is ``(out, in)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    out = x.data @ weight.data.T
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f"bias must have shape ({weight.shape[0]},)")
        out = out + bias.data
        parents.append(bias)

    def backward(g):
        gx = g @ weight.data
        gw = g.reshape(-1, g.shape[-1]).T @ x.data.reshape(-1, x.shape[-1])
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.reshape(-1, g.shape[-1]).sum(axis=0))
        return grads

    return Tensor(out, parents=parents, backward=backward)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor(np.where(mask, x.data, 0.0), parents=(x,), backward=lambda g: (g * mask,))


def dropout(x: Tensor, p: float, rng: np.random.Generator = None, training: bool = True) -> Tensor:
    """Inverted dropout: surviving units are scaled by ``1 / (1 - p)``; identity at inference."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    x = as_tensor(x)
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs a random generator")
    scale = (rng.random(x.shape) >= p) / (1.0 - p)
    return Tensor(x.data * scale, parents=(x,), backward=lambda g: (g * scale,))


def log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"logits {logits.shape} and labels {labels.shape} disagree")
    n_classes = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    B = logits.shape[0]
    logp = log_softmax(logits.data)
    rows = np.arange(B)
    loss = -logp[rows, labels].mean()

    def backward(g):
        d = np.exp(logp)
        d[rows, labels] -= 1.0
        return (g * d / B,)

    return Tensor(loss, parents=(logits,), backward=backward)
