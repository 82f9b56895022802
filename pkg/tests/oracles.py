"""Slow, independent reference computations used to check the fast paths."""
import numpy as np


def naive_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ np.asarray(x, dtype=np.complex128)


def naive_dct2_ortho(v):
    n = len(v)
    out = np.empty(n)
    for k in range(n):
        s = 0.0
        for i in range(n):
            s += v[i] * np.cos(np.pi * k * (2 * i + 1) / (2 * n))
        scale = np.sqrt(1.0 / n) if k == 0 else np.sqrt(2.0 / n)
        out[k] = scale * s
    return out


def direct_iir(b, a, x):
    """y[n] = (sum b[k] x[n-k] - sum_{k>=1} a[k] y[n-k]) / a[0], zero initial state."""
    y = np.zeros(len(x))
    for n in range(len(x)):
        acc = 0.0
        for k in range(len(b)):
            if n - k >= 0:
                acc += b[k] * x[n - k]
        for k in range(1, len(a)):
            if n - k >= 0:
                acc -= a[k] * y[n - k]
        y[n] = acc / a[0]
    return y


def numeric_grad(f, arr, h=1e-4):
    """Central differences of scalar ``f()`` with respect to ``arr`` (perturbed in place)."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = arr[i]
        arr[i] = orig + h
        up = f()
        arr[i] = orig - h
        down = f()
        arr[i] = orig
        g[i] = (up - down) / (2 * h)
    return g


def rel_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


def damped_tone(freqs, sr=22050, n=5512, decay=20.0, amps=None):
    """Noise-free sum of damped sinusoids, peak-normalized."""
    t = np.arange(n) / sr
    amps = amps or [1.0] * len(freqs)
    x = sum(a * np.exp(-decay * t) * np.sin(2 * np.pi * f * t + 0.3) for f, a in zip(freqs, amps))
    return x / np.max(np.abs(x))


def dominant_hz(samples, sr):
    spec = np.abs(np.fft.rfft(samples))
    return np.fft.rfftfreq(len(samples), 1.0 / sr)[np.argmax(spec)]


def tally(pairs, n=3):
    m = [[0] * n for _ in range(n)]
    for t, p in pairs:
        m[t][p] += 1
    return np.array(m)


def grad_errors(build, arrays, seed=0):
    """Relative error between backprop and central differences for each input.

    ``build(tensors)`` returns a Tensor; it is reduced against fixed random
    weights so every output element carries gradient.
    """
    from knockclf.neural import Tensor

    rng = np.random.default_rng([seed, 99])
    probe = None

    def scalar():
        nonlocal probe
        out = build([Tensor(a) for a in arrays]).data
        if probe is None:
            probe = rng.standard_normal(out.shape)
        return float(np.sum(out * probe))

    scalar()
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    out = build(leaves)
    (out * Tensor(probe)).sum().backward()
    errors = []
    for leaf, arr in zip(leaves, arrays):
        numeric = numeric_grad(scalar, arr)
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(arr)
        errors.append(rel_error(analytic, numeric))
    return errors


def hand_metrics(m):
    """Per-class (precision, recall, f1) in percent and accuracy, straight from the textbook formulas."""
    n = len(m)
    total = sum(sum(r) for r in m)
    rows = []
    for c in range(n):
        tp = m[c][c]
        fp = sum(m[r][c] for r in range(n)) - tp
        fn = sum(m[c]) - tp
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        rows.append((100 * p, 100 * r, 100 * f))
    acc = 100 * sum(m[i][i] for i in range(n)) / total
    return acc, rows
