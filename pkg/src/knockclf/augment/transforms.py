"""Audio deformations and the procedural time-varying low-pass."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import lfilter, resample

from ..audio import LabeledClip, Provenance, Signal
from ..stft import hann, istft, stft
from .butterworth import butter_lowpass, butter_lowpass_filter

N_FFT = 1024
HOP = 256
HPSS_KERNEL = 17
VIBRATO_RATE_HZ = 5.0
VIBRATO_DEPTH_S = 0.002


@dataclass(frozen=True)
class AugmentParams:
    stretch_factor: float
    shift_samples: int
    pitch_semitones: int
    compression_factor: float
    noise_factor: float
    shift_fraction: float
    filter_factor: int

    RANGES = {
        "stretch_factor": (0.8, 1.2),
        "shift_samples": (-1000, 1000),
        "pitch_semitones": (-3, 3),
        "compression_factor": (0.1, 0.5),
        "noise_factor": (0.0, 0.05),
        "shift_fraction": (-0.1, 0.1),
        "filter_factor": (10, 90),
    }

    def __post_init__(self):
        for f in fields(self):
            lo, hi = self.RANGES[f.name]
            v = getattr(self, f.name)
            if not lo <= v <= hi:
                raise ValueError(f"{f.name}={v} outside [{lo}, {hi}]")

    @classmethod
    def draw(cls, rng: np.random.Generator) -> "AugmentParams":
        r = cls.RANGES
        return cls(
            stretch_factor=float(rng.uniform(*r["stretch_factor"])),
            shift_samples=int(rng.integers(r["shift_samples"][0], r["shift_samples"][1] + 1)),
            pitch_semitones=int(rng.integers(r["pitch_semitones"][0], r["pitch_semitones"][1] + 1)),
            compression_factor=float(rng.uniform(*r["compression_factor"])),
            noise_factor=float(rng.uniform(*r["noise_factor"])),
            shift_fraction=float(rng.uniform(*r["shift_fraction"])),
            filter_factor=int(rng.integers(r["filter_factor"][0], r["filter_factor"][1] + 1)),
        )


@dataclass(frozen=True)
class ProceduralConfig:
    filter_order: int = 6
    window_size: int = 1024
    overlap: float = 0.5
    cutoff_range: tuple = (0.10, 0.90)

    def __post_init__(self):
        if not 0.0 < self.overlap < 1.0:
            raise ValueError("overlap must lie in (0, 1)")
        if self.window_size < 2:
            raise ValueError("window_size must be at least 2")
        if self.filter_order < 1:
            raise ValueError("filter_order must be at least 1")
        lo, hi = self.cutoff_range
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError("cutoff_range must satisfy 0 < lo <= hi < 1")

    @property
    def hop(self) -> int:
        return max(1, int(round(self.window_size * (1.0 - self.overlap))))


# ---------------------------------------------------------------------------
# Time/pitch


def phase_vocoder(spec: np.ndarray, rate: float, hop: int = HOP) -> np.ndarray:
    """Resample STFT columns at ``rate`` with phase accumulation."""
    n_bins, n_frames = spec.shape
    steps = np.arange(0, n_frames, rate)
    expected = np.linspace(0, np.pi * hop, n_bins)
    padded = np.concatenate([spec, np.zeros((n_bins, 2), dtype=spec.dtype)], axis=1)
    phase = np.angle(spec[:, 0])
    out = np.empty((n_bins, len(steps)), dtype=np.complex128)
    for i, step in enumerate(steps):
        t = int(step)
        cols = padded[:, t : t + 2]
        alpha = step - t
        mag = (1.0 - alpha) * np.abs(cols[:, 0]) + alpha * np.abs(cols[:, 1])
        out[:, i] = mag * np.exp(1j * phase)
        dphi = np.angle(cols[:, 1]) - np.angle(cols[:, 0]) - expected
        dphi -= 2 * np.pi * np.round(dphi / (2 * np.pi))
        phase = phase + expected + dphi
    return out


def time_stretch(x: Signal, factor: float) -> Signal:
    """Pitch-preserving stretch; ``factor > 1`` shortens the clip to ``len / factor``."""
    if not factor > 0:
        raise ValueError(f"stretch factor must be positive, got {factor}")
    length = max(1, int(round(len(x) / factor)))
    spec = stft(x.samples, N_FFT, HOP)
    y = istft(phase_vocoder(spec, factor, HOP), HOP, length)
    return x.with_samples(y)


def pitch_shift(x: Signal, semitones: int) -> Signal:
    if not -12 <= semitones <= 12:
        raise ValueError(f"pitch shift must be within +/-12 semitones, got {semitones}")
    if semitones == 0:
        return x
    ratio = 2.0 ** (semitones / 12.0)
    stretched = time_stretch(x, 1.0 / ratio)
    return x.with_samples(resample(stretched.samples, len(x)))


# ---------------------------------------------------------------------------
# Amplitude and position


def add_noise(x: Signal, factor: float, rng: np.random.Generator) -> Signal:
    if factor < 0:
        raise ValueError(f"noise factor must be non-negative, got {factor}")
    if factor == 0:
        return x
    g = rng.standard_normal(len(x))
    return x.with_samples(x.samples + factor * x.peak * g)


def shift_samples(x: Signal, n: int) -> Signal:
    """Zero-filled shift; positive ``n`` delays."""
    n = int(n)
    if abs(n) >= len(x):
        raise ValueError(f"shift of {n} samples needs |n| < {len(x)}")
    if n == 0:
        return x
    y = np.zeros(len(x))
    if n > 0:
        y[n:] = x.samples[:-n]
    else:
        y[:n] = x.samples[-n:]
    return x.with_samples(y)


def shift_fraction(x: Signal, f: float) -> Signal:
    if abs(f) >= 1:
        raise ValueError(f"shift fraction must satisfy |f| < 1, got {f}")
    return shift_samples(x, int(round(f * len(x))))


def compress(x: Signal, c: float) -> Signal:
    """Power-law magnitude compression renormalised to the input peak."""
    if not 0.0 <= c < 1.0:
        raise ValueError(f"compression factor must lie in [0, 1), got {c}")
    if c == 0 or x.peak == 0:
        return x
    y = np.sign(x.samples) * np.abs(x.samples) ** (1.0 - c)
    return x.with_samples(y * (x.peak / np.max(np.abs(y))))


# ---------------------------------------------------------------------------
# Filters


def static_lowpass(x: Signal, filter_factor: int) -> Signal:
    if not 10 <= filter_factor <= 90:
        raise ValueError(f"filter factor must be a percentage in [10, 90], got {filter_factor}")
    nyq = 0.5 * x.sample_rate
    return butter_lowpass_filter(x, butter_lowpass(filter_factor / 100.0 * nyq, x.sample_rate, order=5))


def hpss_masks(spec: np.ndarray, kernel: int = HPSS_KERNEL):
    mag = np.abs(spec)
    harm = median_filter(mag, size=(1, kernel), mode="reflect")
    perc = median_filter(mag, size=(kernel, 1), mode="reflect")
    h2, p2 = harm**2, perc**2
    total = h2 + p2
    safe = np.where(total > 0, total, 1.0)
    m_h = np.where(total > 0, h2 / safe, 0.5)
    return m_h, 1.0 - m_h


def hpss(x: Signal, kernel: int = HPSS_KERNEL):
    """Median-filter harmonic/percussive split with soft masks; returns ``(harmonic, percussive)``."""
    if len(x) < N_FFT:
        raise ValueError(f"HPSS needs at least {N_FFT} samples, got {len(x)}")
    spec = stft(x.samples, N_FFT, HOP)
    m_h, m_p = hpss_masks(spec, kernel)
    n = len(x)
    return (
        x.with_samples(istft(spec * m_h, HOP, n)),
        x.with_samples(istft(spec * m_p, HOP, n)),
    )


def vibrato(x: Signal, rate_hz: float = VIBRATO_RATE_HZ, depth_s: float = VIBRATO_DEPTH_S) -> Signal:
    """Sinusoidally modulated delay line with linear interpolation."""
    depth = depth_s * x.sample_rate
    if len(x) <= depth:
        raise ValueError(f"vibrato depth of {depth:.1f} samples needs a longer clip")
    if depth == 0:
        return x
    n = np.arange(len(x))
    delay = depth * (1.0 + np.sin(2 * np.pi * rate_hz * n / x.sample_rate)) / 2.0
    return x.with_samples(np.interp(n - delay, n, x.samples, left=0.0, right=0.0))


def overlap_add(x: np.ndarray, cfg: ProceduralConfig, segment_fn=None) -> np.ndarray:
    """Split into Hann-windowed segments, optionally process each, and resynthesize.

    The output is divided by the summed window envelope, so with ``segment_fn=None``
    the input comes back unchanged.
    """
    w_len, hop = cfg.window_size, cfg.hop
    n = len(x)
    front = w_len - hop
    n_seg = int(np.ceil((front + n) / hop))
    total = (n_seg - 1) * hop + w_len
    xp = np.zeros(total)
    xp[front : front + n] = x
    w = hann(w_len)
    y = np.zeros(total)
    env = np.zeros(total)
    for k in range(n_seg):
        seg = xp[k * hop : k * hop + w_len]
        if segment_fn is not None:
            seg = segment_fn(seg)
        y[k * hop : k * hop + w_len] += seg * w
        env[k * hop : k * hop + w_len] += w
    y = y[front : front + n]
    env = env[front : front + n]
    nz = env > 1e-8
    y[nz] /= env[nz]
    return y


def time_varying_lowpass(x: Signal, cfg: ProceduralConfig, rng: np.random.Generator) -> Signal:
    """Per-segment Butterworth low-pass with a freshly drawn cutoff, resynthesized by overlap-add."""
    if len(x) < cfg.window_size:
        raise ValueError(f"need at least {cfg.window_size} samples, got {len(x)}")
    nyq = 0.5 * x.sample_rate
    lo, hi = cfg.cutoff_range

    def segment(seg):
        cutoff = rng.uniform(lo, hi) * nyq
        filt = butter_lowpass(cutoff, x.sample_rate, cfg.filter_order)
        return lfilter(filt.b, filt.a, seg)

    return x.with_samples(overlap_add(x.samples, cfg, segment))


# ---------------------------------------------------------------------------
# Composition

TRANSFORMS = (
    "stretch",
    "pitch",
    "compression",
    "noise",
    "shift_samples",
    "shift_fraction",
    "lowpass",
    "hpss",
    "vibrato",
)


def apply_transforms(x: Signal, names, params: AugmentParams, rng: np.random.Generator) -> Signal:
    """Apply the named transforms in canonical order, whatever order ``names`` lists them in."""
    chosen = set(names)
    unknown = chosen - set(TRANSFORMS)
    if unknown:
        raise ValueError(f"unknown transforms: {sorted(unknown)}")
    for name in TRANSFORMS:
        if name not in chosen:
            continue
        if name == "stretch":
            x = time_stretch(x, params.stretch_factor)
        elif name == "pitch":
            x = pitch_shift(x, params.pitch_semitones)
        elif name == "compression":
            x = compress(x, params.compression_factor)
        elif name == "noise":
            x = add_noise(x, params.noise_factor, rng)
        elif name == "shift_samples":
            x = shift_samples(x, params.shift_samples)
        elif name == "shift_fraction":
            x = shift_fraction(x, params.shift_fraction)
        elif name == "lowpass":
            x = static_lowpass(x, params.filter_factor)
        elif name == "hpss":
            harmonic, percussive = hpss(x)
            x = harmonic if rng.random() < 0.5 else percussive
        elif name == "vibrato":
            x = vibrato(x)
    return x


def _limit_peak(x: Signal) -> Signal:
    peak = x.peak
    return x.with_samples(x.samples / peak) if peak > 1.0 else x


def augment_clip(clip: LabeledClip, rng: np.random.Generator) -> LabeledClip:
    """Deform ``clip`` with 1 to 4 randomly chosen transforms."""
    params = AugmentParams.draw(rng)
    k = int(rng.integers(1, 5))
    picked = [TRANSFORMS[i] for i in rng.choice(len(TRANSFORMS), size=k, replace=False)]
    y = _limit_peak(apply_transforms(clip.signal, picked, params, rng))
    return LabeledClip(y, clip.label, Provenance.AUGMENTED, clip.source_id)


def procedural_clip(clip: LabeledClip, rng: np.random.Generator, cfg: ProceduralConfig = ProceduralConfig()) -> LabeledClip:
    y = _limit_peak(time_varying_lowpass(clip.signal, cfg, rng))
    return LabeledClip(y, clip.label, Provenance.AUGMENTED, clip.source_id)
