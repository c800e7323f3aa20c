"""Periodogram PSD, representative frequency and band-limited SNR."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, PipelineError

MAX_RESOLUTION_HZ = 0.01
# bin centres closer than this to a band edge count as on the edge
_EDGE_TOL = 1e-9


@dataclass
class Psd:
    freqs: np.ndarray
    power: np.ndarray

    @property
    def resolution(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def band_power(self, lo: float, hi: float) -> float:
        sel = (self.freqs >= lo - _EDGE_TOL) & (self.freqs <= hi + _EDGE_TOL)
        return float(self.power[sel].sum())


def psd(x, fps: float) -> Psd:
    """One-sided Hann-windowed periodogram, zero-padded to <= 0.01 Hz bins.

    Power is normalised by the window energy, so ``power.sum()`` equals the
    window-weighted mean square ``sum(w**2 x**2) / sum(w**2)`` of the
    mean-removed input, which for stationary input estimates its variance.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 8:
        raise InputError(f"PSD needs at least 8 samples, got {x.size}")
    if not np.isfinite(x).all():
        raise InputError("PSD input has non-finite values")
    n = x.size
    nfft = max(n, math.ceil(fps / MAX_RESOLUTION_HZ))
    nfft = 1 << (nfft - 1).bit_length()
    w = np.hanning(n + 2)[1:-1]  # Hann taper without its two zero end samples
    # exact zero for constant input; x - x.mean() can leave rounding residue
    centred = np.zeros_like(x) if np.ptp(x) == 0 else x - x.mean()
    xw = centred * w
    spec = np.abs(np.fft.rfft(xw, nfft)) ** 2 / (nfft * np.sum(w * w))
    spec[1:] *= 2.0
    if nfft % 2 == 0:
        spec[-1] /= 2.0
    freqs = np.fft.rfftfreq(nfft, d=1.0 / fps)
    return Psd(freqs, spec)


def representative_frequency(p: Psd) -> float:
    """Frequency of the strongest bin; ties resolve to the lower frequency."""
    if not np.any(p.power > 0):
        raise PipelineError("no dominant component: PSD is all zero")
    return float(p.freqs[int(np.argmax(p.power))])


def band_snr(p: Psd, band=(0.1, 0.4), total=(0.0, 4.0)) -> tuple[float, float]:
    """Power in ``band`` over power in ``total`` (closed bin intervals).

    Returns ``(ratio, dB)``. The upper edge of ``total`` is clamped to the
    Nyquist frequency of the PSD.
    """
    lo, hi = band
    t_lo, t_hi = total[0], min(total[1], float(p.freqs[-1]))
    if not (t_lo <= lo <= hi <= t_hi + _EDGE_TOL):
        raise InputError(f"band {band} must lie inside total range ({t_lo}, {t_hi})")
    denom = p.band_power(t_lo, t_hi)
    if not denom > 0:
        raise PipelineError("zero total power in SNR denominator")
    ratio = p.band_power(lo, hi) / denom
    return ratio, to_db(ratio)


def to_db(ratio: float) -> float:
    return 10.0 * math.log10(ratio) if ratio > 0 else -math.inf
