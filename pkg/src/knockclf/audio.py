"""Signal container, WAV I/O, signal combining and the synthetic knock generator."""
from __future__ import annotations

import csv
import enum
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptySignalError,
    RateMismatchError,
    UnsupportedCodecError,
    WavFormatError,
)

SYNTH_RATE = 22_050
SYNTH_DURATION = 0.25

LABEL_NAMES = ("premature", "mature", "overmature")

_PCM = 1
_IEEE_FLOAT = 3
_EXTENSIBLE = 0xFFFE


class Provenance(str, enum.Enum):
    ORIGINAL = "original"
    AUGMENTED = "augmented"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True, eq=False)
class Signal:
    """Mono float64 samples in [-1, 1] at a positive integer sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.ascontiguousarray(self.samples, dtype=np.float64).reshape(-1)
        if x.size == 0:
            raise EmptySignalError("signal has no samples")
        if not np.all(np.isfinite(x)):
            raise ValueError("signal contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def with_samples(self, samples: np.ndarray) -> "Signal":
        return Signal(samples, self.sample_rate)


@dataclass(frozen=True)
class LabeledClip:
    signal: Signal
    label: int
    provenance: Provenance = Provenance.ORIGINAL
    source_id: str = ""

    def __post_init__(self):
        if self.label not in (0, 1, 2):
            raise ValueError(f"label must be 0, 1 or 2, got {self.label!r}")
        object.__setattr__(self, "provenance", Provenance(self.provenance))


# ---------------------------------------------------------------------------
# WAV I/O


def read_wav(path) -> Signal:
    """Read a PCM16 or float32 RIFF/WAVE file; stereo is averaged to mono."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(f"{path}: truncated {cid!r} chunk")
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)

    if fmt is None or len(fmt) < 16:
        raise WavFormatError(f"{path}: missing or short fmt chunk")
    if payload is None:
        raise WavFormatError(f"{path}: missing data chunk")

    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if tag == _EXTENSIBLE:
        if len(fmt) < 26:
            raise WavFormatError(f"{path}: short WAVE_FORMAT_EXTENSIBLE header")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if channels < 1 or rate < 1:
        raise WavFormatError(f"{path}: bad channel count or sample rate")

    if tag == _PCM and bits == 16:
        samples = np.frombuffer(payload, dtype="<i2", count=len(payload) // 2)
        samples = samples.astype(np.float64) / 32768.0
    elif tag == _IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(payload, dtype="<f4", count=len(payload) // 4)
        samples = samples.astype(np.float64)
    else:
        raise UnsupportedCodecError(f"{path}: format tag {tag} with {bits} bits")

    frames = samples.size // channels
    if frames == 0:
        raise EmptySignalError(f"{path}: no audio frames")
    samples = samples[: frames * channels].reshape(frames, channels).mean(axis=1)
    return Signal(samples, rate)


def write_wav(signal: Signal, path) -> None:
    """Write ``signal`` as 16-bit PCM mono, clamping to [-1, 1] first."""
    x = np.clip(signal.samples, -1.0, 1.0)
    q = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    pcm = q.tobytes()
    rate = signal.sample_rate
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, _PCM, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(pcm))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(pcm)


# ---------------------------------------------------------------------------
# Combining


def _check_combinable(signals: Sequence[Signal]) -> int:
    if not signals:
        raise ValueError("need at least one signal to combine")
    rates = {s.sample_rate for s in signals}
    if len(rates) != 1:
        raise RateMismatchError(f"mixed sample rates: {sorted(rates)}")
    return rates.pop()


def combine_sum(signals: Sequence[Signal]) -> Signal:
    """Tail zero-pad to the longest input, add, and peak-normalize if the sum clips."""
    rate = _check_combinable(signals)
    n = max(len(s) for s in signals)
    stacked = np.zeros((len(signals), n))
    for row, s in zip(stacked, signals):
        row[: len(s)] = s.samples
    # Sorting each column fixes the accumulation order, so any permutation of
    # the inputs gives bit-identical output.
    out = np.sort(stacked, axis=0).sum(axis=0)
    peak = np.max(np.abs(out))
    if peak > 1.0:
        out /= peak
    return Signal(out, rate)


def combine_extend(signals: Sequence[Signal]) -> Signal:
    rate = _check_combinable(signals)
    return Signal(np.concatenate([s.samples for s in signals]), rate)


# ---------------------------------------------------------------------------
# Synthetic knocks

# Per class: dominant band (Hz), overtone ratio centres, decay range (1/s).
# Bands are disjoint; decay ranges overlap so pitch-shifted clips stay ambiguous.
_KNOCK_CLASSES = {
    0: dict(band=(1600.0, 2000.0), ratios=(1.5, 2.4), decay=(26.0, 40.0)),
    1: dict(band=(1000.0, 1400.0), ratios=(1.9, 3.0), decay=(20.0, 34.0)),
    2: dict(band=(500.0, 900.0), ratios=(2.3, 3.6), decay=(15.0, 28.0)),
}
_RATIO_JITTER = 0.15
_NOISE_DB = -30.0


def synth_knock(label: int, rng: np.random.Generator, sample_rate: int = SYNTH_RATE) -> Signal:
    """One 0.25 s tapped-fruit knock: three damped sinusoids plus -30 dB noise."""
    if label not in _KNOCK_CLASSES:
        raise ValueError(f"label must be 0, 1 or 2, got {label!r}")
    spec = _KNOCK_CLASSES[label]
    n = int(round(SYNTH_DURATION * sample_rate))
    t = np.arange(n) / sample_rate

    f0 = rng.uniform(*spec["band"])
    freqs = [f0] + [f0 * (r + rng.uniform(-_RATIO_JITTER, _RATIO_JITTER)) for r in spec["ratios"]]
    amps = [1.0, rng.uniform(0.15, 0.45), rng.uniform(0.1, 0.3)]
    decays = rng.uniform(*spec["decay"], size=3)
    phases = rng.uniform(0.0, 2 * np.pi, size=3)

    nyq = sample_rate / 2
    x = np.zeros(n)
    for f, a, d, ph in zip(freqs, amps, decays, phases):
        if f < nyq:
            x += a * np.exp(-d * t) * np.sin(2 * np.pi * f * t + ph)
    peak = np.max(np.abs(x))
    x += rng.standard_normal(n) * peak * 10 ** (_NOISE_DB / 20)
    x /= np.max(np.abs(x))
    return Signal(x, sample_rate)


def dominant_frequency(signal: Signal) -> float:
    spectrum = np.abs(np.fft.rfft(signal.samples))
    freqs = np.fft.rfftfreq(len(signal), d=1.0 / signal.sample_rate)
    return float(freqs[np.argmax(spectrum)])


# ---------------------------------------------------------------------------
# Manifest

MANIFEST_FIELDS = ("path", "label", "provenance", "source_id")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    provenance: Provenance
    source_id: str


@dataclass
class Manifest:
    """Ordered list of labelled WAV files. Relative paths resolve against ``root``."""

    entries: list = field(default_factory=list)
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.path in seen:
                raise ValueError(f"duplicate manifest path: {e.path}")
            seen.add(e.path)
        self.root = Path(self.root)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def counts(self) -> list:
        c = [0, 0, 0]
        for e in self.entries:
            c[e.label] += 1
        return c

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.entries], dtype=np.int64)

    def subset(self, indices: Iterable[int]) -> "Manifest":
        return Manifest([self.entries[i] for i in indices], self.root)

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    def load(self, entry: ManifestEntry) -> LabeledClip:
        return LabeledClip(read_wav(self.resolve(entry)), entry.label, entry.provenance, entry.source_id)

    def rebased(self, new_root) -> "Manifest":
        """Same entries with paths rewritten relative to ``new_root``."""
        new_root = Path(new_root)
        out = []
        for e in self.entries:
            p = os.path.relpath(Path(os.path.abspath(self.resolve(e))), os.path.abspath(new_root))
            out.append(ManifestEntry(Path(p).as_posix(), e.label, e.provenance, e.source_id))
        return Manifest(out, new_root)

    @classmethod
    def read(cls, path) -> "Manifest":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"manifest not found: {path}")
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != MANIFEST_FIELDS:
                raise ValueError(f"{path}: manifest header must be {','.join(MANIFEST_FIELDS)}")
            entries = [
                ManifestEntry(row["path"], int(row["label"]), Provenance(row["provenance"]), row["source_id"])
                for row in reader
            ]
        return cls(entries, path.parent)

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(MANIFEST_FIELDS)
            for e in self.entries:
                w.writerow([e.path, e.label, e.provenance.value, e.source_id])


def synth_dataset(counts, out_dir, seed: int) -> Manifest:
    """Write ``counts[label]`` synthetic knocks per class into ``out_dir`` and return their manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for label, n in enumerate(counts):
        for i in range(int(n)):
            sid = f"{LABEL_NAMES[label]}_{i:04d}"
            sig = synth_knock(label, np.random.default_rng([seed, label, i]))
            write_wav(sig, out_dir / f"{sid}.wav")
            entries.append(ManifestEntry(f"{sid}.wav", label, Provenance.SYNTHETIC, sid))
    return Manifest(entries, out_dir)
