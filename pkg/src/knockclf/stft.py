"""Centered complex STFT and its least-squares inverse (weighted overlap-add)."""
import numpy as np


def hann(n: int) -> np.ndarray:
    """Periodic Hann window; sums to a constant at 50% and 75% overlap."""
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def stft(x: np.ndarray, n_fft: int = 1024, hop: int = 256) -> np.ndarray:
    """Return an ``(n_fft // 2 + 1, frames)`` complex matrix. Frames are centred on ``t * hop``."""
    pad = n_fft // 2
    xp = np.pad(np.asarray(x, dtype=np.float64), (pad, pad))
    n_frames = 1 + (len(xp) - n_fft) // hop
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = xp[idx] * hann(n_fft)
    return np.fft.rfft(frames, axis=1).T


def istft(spec: np.ndarray, hop: int = 256, length: int = None) -> np.ndarray:
    n_fft = 2 * (spec.shape[0] - 1)
    n_frames = spec.shape[1]
    w = hann(n_fft)
    frames = np.fft.irfft(spec.T, n=n_fft, axis=1) * w
    total = n_fft + hop * (n_frames - 1)
    y = np.zeros(total)
    norm = np.zeros(total)
    for t in range(n_frames):
        y[t * hop : t * hop + n_fft] += frames[t]
        norm[t * hop : t * hop + n_fft] += w * w
    nz = norm > 1e-10
    y[nz] /= norm[nz]
    pad = n_fft // 2
    y = y[pad:]
    if length is None:
        length = total - 2 * pad
    if len(y) < length:
        y = np.pad(y, (0, length - len(y)))
    return y[:length]
