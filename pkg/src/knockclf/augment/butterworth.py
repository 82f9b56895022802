"""Digital Butterworth low-pass design by bilinear transform with frequency prewarping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from ..audio import Signal
from ..errors import RateMismatchError

MAX_ORDER = 10


@dataclass(frozen=True, eq=False)
class ButterworthFilter:
    order: int
    cutoff_hz: float
    sample_rate: float
    b: np.ndarray
    a: np.ndarray
    poles: np.ndarray
    gain: float

    def response(self, freqs_hz) -> np.ndarray:
        """H(e^{jw}) from the factored form (zeros at z = -1).

        High orders at low cutoffs make the polynomial coefficients ill-conditioned,
        so the factored form is the accurate route.
        """
        z = np.exp(1j * 2 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.sample_rate)
        z = z[..., None]
        return self.gain * np.prod((z + 1.0) / (z - self.poles), axis=-1)

    def response_from_coefficients(self, freqs_hz) -> np.ndarray:
        zi = np.exp(-1j * 2 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.sample_rate)
        # polyval wants highest power first; b, a are in powers of z^-1.
        return np.polyval(self.b[::-1], zi) / np.polyval(self.a[::-1], zi)

    def magnitude(self, freqs_hz) -> np.ndarray:
        return np.abs(self.response(freqs_hz))


def butter_lowpass(cutoff: float, fs: float, order: int = 5) -> ButterworthFilter:
    nyq = 0.5 * fs
    normal_cutoff = cutoff / nyq
    if not 0.0 < normal_cutoff < 1.0:
        raise ValueError(f"cutoff {cutoff} Hz must lie strictly between 0 and Nyquist ({nyq} Hz)")
    if not (isinstance(order, (int, np.integer)) and 1 <= order <= MAX_ORDER):
        raise ValueError(f"order must be an integer in [1, {MAX_ORDER}], got {order!r}")

    # Analog prototype poles on the left half of the unit circle, scaled to the prewarped edge.
    k = np.arange(order)
    proto = np.exp(1j * np.pi * (2 * k + order + 1) / (2 * order))
    warped = 2.0 * fs * np.tan(np.pi * cutoff / fs)
    s_poles = warped * proto

    z_poles = (2.0 * fs + s_poles) / (2.0 * fs - s_poles)
    gain = float(np.real(np.prod(1.0 - z_poles))) / 2.0**order
    a = np.real(np.poly(z_poles))
    b = gain * np.real(np.poly(-np.ones(order)))
    return ButterworthFilter(order, float(cutoff), float(fs), b, a, z_poles, gain)


def butter_lowpass_filter(x: Signal, filt: ButterworthFilter) -> Signal:
    """Causal IIR filtering from rest."""
    if filt.sample_rate != x.sample_rate:
        raise RateMismatchError(f"filter designed for {filt.sample_rate} Hz, signal is {x.sample_rate} Hz")
    return x.with_samples(lfilter(filt.b, filt.a, x.samples))
