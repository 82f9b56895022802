"""Elman RNN and LSTM layers with full backpropagation through time.

Each layer is one graph node: the forward loop stores per-step activations and
the backward closure replays them in reverse, which keeps a 64-step sequence
cheap compared with recording every step as its own node.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, as_tensor, sigmoid


def _prepare(seq, w_ih, w_hh, gates):
    seq = as_tensor(seq)
    unbatched = seq.ndim == 2
    x = seq.data[None] if unbatched else seq.data
    if x.ndim != 3:
        raise ShapeError(f"sequence must be (T, F) or (B, T, F), got {seq.shape}")
    H = w_hh.shape[1]
    if w_ih.shape != (gates * H, x.shape[2]) or w_hh.shape != (gates * H, H):
        raise ShapeError(
            f"weights {w_ih.shape}, {w_hh.shape} do not fit input features {x.shape[2]} and hidden size {H}"
        )
    return seq, x, unbatched, H


def _initial(state, B, H):
    if state is None:
        return None, np.zeros((B, H))
    state = as_tensor(state)
    data = state.data
    if data.ndim == 1:
        data = np.broadcast_to(data, (B, H))
    if data.shape != (B, H):
        raise ShapeError(f"initial state must be ({B}, {H}) or ({H},), got {state.shape}")
    return state, data


def _state_grad(g, state):
    return g.sum(axis=0) if state.ndim == 1 else g


def rnn_forward(seq, w_ih, w_hh, b_ih, b_hh, h0=None) -> Tensor:
    """``h_t = tanh(W_ih x_t + b_ih + W_hh h_{t-1} + b_hh)``; returns all hidden states ``(B, T, H)``."""
    w_ih, w_hh, b_ih, b_hh = map(as_tensor, (w_ih, w_hh, b_ih, b_hh))
    seq, x, unbatched, H = _prepare(seq, w_ih, w_hh, 1)
    B, T, F = x.shape
    h0_t, h_prev = _initial(h0, B, H)

    xs = x @ w_ih.data.T + b_ih.data + b_hh.data
    hs = np.empty((B, T + 1, H))
    hs[:, 0] = h_prev
    whh_t = w_hh.data.T
    for t in range(T):
        hs[:, t + 1] = np.tanh(xs[:, t] + hs[:, t] @ whh_t)
    out = hs[:, 1:]

    def backward(g):
        g = g[None] if unbatched else g
        da_all = np.empty((B, T, H))
        dh = np.zeros((B, H))
        w = w_hh.data
        for t in range(T - 1, -1, -1):
            dh = dh + g[:, t]
            h = hs[:, t + 1]
            da = dh * (1.0 - h * h)
            da_all[:, t] = da
            dh = da @ w
        prev = hs[:, :-1].reshape(B * T, H)
        flat = da_all.reshape(B * T, H)
        dw_hh = flat.T @ prev
        dw_ih = flat.T @ x.reshape(B * T, F)
        db = flat.sum(axis=0)
        dx = da_all @ w_ih.data
        grads = [dx[0] if unbatched else dx, dw_ih, dw_hh, db, db]
        if h0_t is not None:
            grads.append(_state_grad(dh, h0_t))
        return grads

    parents = [seq, w_ih, w_hh, b_ih, b_hh] + ([h0_t] if h0_t is not None else [])
    return Tensor(out[0] if unbatched else out, parents=parents, backward=backward)


def lstm_forward(seq, w_ih, w_hh, b_ih, b_hh, h0=None, c0=None) -> Tensor:
    """Standard LSTM; gate blocks are stacked as input, forget, candidate, output.

    Returns all hidden states ``(B, T, H)``.
    """
    w_ih, w_hh, b_ih, b_hh = map(as_tensor, (w_ih, w_hh, b_ih, b_hh))
    seq, x, unbatched, H = _prepare(seq, w_ih, w_hh, 4)
    B, T, F = x.shape
    h0_t, h_prev = _initial(h0, B, H)
    c0_t, c_prev = _initial(c0, B, H)

    xs = x @ w_ih.data.T + b_ih.data + b_hh.data
    hs = np.empty((B, T + 1, H))
    cs = np.empty((B, T + 1, H))
    hs[:, 0], cs[:, 0] = h_prev, c_prev
    gates = np.empty((B, T, 4, H))
    tanh_c = np.empty((B, T, H))
    whh_t = w_hh.data.T
    for t in range(T):
        a = (xs[:, t] + hs[:, t] @ whh_t).reshape(B, 4, H)
        i = sigmoid(a[:, 0])
        f = sigmoid(a[:, 1])
        g = np.tanh(a[:, 2])
        o = sigmoid(a[:, 3])
        c = f * cs[:, t] + i * g
        tc = np.tanh(c)
        gates[:, t, 0], gates[:, t, 1], gates[:, t, 2], gates[:, t, 3] = i, f, g, o
        cs[:, t + 1] = c
        tanh_c[:, t] = tc
        hs[:, t + 1] = o * tc
    out = hs[:, 1:]

    def backward(grad):
        grad = grad[None] if unbatched else grad
        da_all = np.empty((B, T, 4, H))
        dh = np.zeros((B, H))
        dc = np.zeros((B, H))
        w = w_hh.data
        for t in range(T - 1, -1, -1):
            dh = dh + grad[:, t]
            i, f, g, o = gates[:, t, 0], gates[:, t, 1], gates[:, t, 2], gates[:, t, 3]
            tc = tanh_c[:, t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * cs[:, t]
            dg = dc * i
            da = da_all[:, t]
            da[:, 0] = di * i * (1.0 - i)
            da[:, 1] = df * f * (1.0 - f)
            da[:, 2] = dg * (1.0 - g * g)
            da[:, 3] = do * o * (1.0 - o)
            dc = dc * f
            dh = da.reshape(B, 4 * H) @ w
        flat = da_all.reshape(B * T, 4 * H)
        dw_hh = flat.T @ hs[:, :-1].reshape(B * T, H)
        dw_ih = flat.T @ x.reshape(B * T, F)
        db = flat.sum(axis=0)
        dx = da_all.reshape(B, T, 4 * H) @ w_ih.data
        grads = [dx[0] if unbatched else dx, dw_ih, dw_hh, db, db]
        if h0_t is not None:
            grads.append(_state_grad(dh, h0_t))
        if c0_t is not None:
            grads.append(_state_grad(dc, c0_t))
        return grads

    parents = [seq, w_ih, w_hh, b_ih, b_hh]
    parents += [s for s in (h0_t, c0_t) if s is not None]
    return Tensor(out[0] if unbatched else out, parents=parents, backward=backward)
