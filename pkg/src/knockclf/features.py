"""Framing, power spectrogram, mel filterbank energies and MFCC feature tensors."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .audio import Manifest, Signal
from .stft import hann

MAGIC = b"KNF1"


@dataclass(frozen=True)
class StftConfig:
    frame_len: int = 1024
    hop: int = 512

    def __post_init__(self):
        if not 0 < self.hop <= self.frame_len:
            raise ValueError("need 0 < hop <= frame_len")

    @property
    def n_bins(self) -> int:
        return self.frame_len // 2 + 1


@dataclass(frozen=True)
class MfccConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    n_mels: int = 128
    n_coeffs: int = 128
    fmin: float = 0.0
    fmax: float = None  # None means Nyquist
    log_floor: float = 1e-10
    n_frames: int = 64

    def __post_init__(self):
        if not 0 < self.n_coeffs <= self.n_mels:
            raise ValueError("need 0 < n_coeffs <= n_mels")
        if self.fmax is not None and self.fmin >= self.fmax:
            raise ValueError("need fmin < fmax")
        if self.n_frames < 1:
            raise ValueError("n_frames must be positive")

    def upper(self, fs: float) -> float:
        nyq = fs / 2.0
        fmax = nyq if self.fmax is None else self.fmax
        if fmax > nyq:
            raise ValueError(f"fmax {fmax} exceeds Nyquist {nyq}")
        return fmax


def frame_signal(x: Signal, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Hann-windowed frames, shape ``(n_frames, frame_len)``; short inputs are zero-padded to one frame."""
    s = x.samples
    if len(s) < cfg.frame_len:
        s = np.pad(s, (0, cfg.frame_len - len(s)))
    n_frames = 1 + (len(s) - cfg.frame_len) // cfg.hop
    idx = np.arange(cfg.frame_len)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    return s[idx] * hann(cfg.frame_len)


def power_spectrogram(x: Signal, cfg: StftConfig = StftConfig()) -> np.ndarray:
    return np.abs(np.fft.rfft(frame_signal(x, cfg), axis=1)) ** 2


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: MfccConfig, fs: float) -> np.ndarray:
    """Triangular filters, unit peak, centres equally spaced in mel. Shape ``(n_mels, n_bins)``."""
    return _filterbank(cfg.n_mels, cfg.stft.frame_len, float(cfg.fmin), float(cfg.upper(fs)), float(fs)).copy()


@lru_cache(maxsize=16)
def _filterbank(n_mels, frame_len, fmin, fmax, fs):
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    bins = np.fft.rfftfreq(frame_len, d=1.0 / fs)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins[None, :] - lo) / (mid - lo)
    falling = (hi - bins[None, :]) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


def filter_centers(cfg: MfccConfig, fs: float) -> np.ndarray:
    return mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.upper(fs)), cfg.n_mels + 2))[1:-1]


def mfe(x: Signal, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Log mel energies, shape ``(frames, n_mels)``."""
    fb = _filterbank(cfg.n_mels, cfg.stft.frame_len, float(cfg.fmin), float(cfg.upper(x.sample_rate)), float(x.sample_rate))
    return np.log(power_spectrogram(x, cfg.stft) @ fb.T + cfg.log_floor)


@lru_cache(maxsize=8)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix ``D`` with ``coeffs = D @ v``."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    d = np.cos(np.pi * k * (2 * i + 1) / (2 * n)) * np.sqrt(2.0 / n)
    d[0] /= np.sqrt(2.0)
    d.setflags(write=False)
    return d


def mfcc(x: Signal, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Cepstral coefficients, shape ``(frames, n_coeffs)``."""
    d = dct_matrix(cfg.n_mels)[: cfg.n_coeffs]
    return mfe(x, cfg) @ d.T


def featurize(x: Signal, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Network input of shape ``(n_coeffs, n_frames)``, standardized per tensor."""
    c = mfcc(x, cfg).T
    t = cfg.n_frames
    out = np.zeros((cfg.n_coeffs, t))
    n = min(t, c.shape[1])
    out[:, :n] = c[:, :n]
    return (out - out.mean()) / (out.std() + 1e-8)


def time_series_feature(x: Signal, length: int) -> np.ndarray:
    if length <= 0:
        raise ValueError("length must be positive")
    out = np.zeros(length)
    n = min(length, len(x))
    out[:n] = x.samples[:n]
    return out


def featurize_manifest(manifest: Manifest, cfg: MfccConfig = MfccConfig()):
    """Featurize every entry; returns ``(X, y)`` with ``X`` shaped ``(N, n_coeffs, n_frames)``."""
    X = np.empty((len(manifest), cfg.n_coeffs, cfg.n_frames))
    for i, e in enumerate(manifest):
        X[i] = featurize(manifest.load(e).signal, cfg)
    return X, manifest.labels


# ---------------------------------------------------------------------------
# KNF1 record file


def write_features(path, X, y) -> None:
    """Records: label (u8), rows and cols (two little-endian i32), row-major little-endian f32 data."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for tensor, label in zip(X, y):
            tensor = np.asarray(tensor)
            rows, cols = tensor.shape
            fh.write(struct.pack("<Bii", int(label), rows, cols))
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def read_features(path):
    data = open(path, "rb").read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a KNF1 feature file")
    pos = 4
    tensors, labels = [], []
    while pos < len(data):
        label, rows, cols = struct.unpack_from("<Bii", data, pos)
        pos += 9
        n = rows * cols
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=pos).reshape(rows, cols)
        pos += 4 * n
        tensors.append(arr.astype(np.float64))
        labels.append(label)
    if not tensors:
        return np.empty((0, 0, 0)), np.empty(0, dtype=np.int64)
    return np.stack(tensors), np.array(labels, dtype=np.int64)
