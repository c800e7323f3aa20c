"""Per-cell sliding-window respiratory frequency estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .emd import EmdConfig, ImfSet, decompose
from .errors import InputError, PipelineError
from .model import ChannelTrace
from .spectral import Psd, band_snr, psd, representative_frequency

PLAUSIBLE_HZ = (0.05, 0.6)
# normalised autocorrelation a periodic mode must reach at its first lobe
MIN_ACF_PEAK = 0.4
# tolerance on the seconds-based window count (float step arithmetic)
_COUNT_TOL = 1e-9


@dataclass(frozen=True)
class WindowSpec:
    length_s: float = 30.0
    step_s: float = 1.0

    def __post_init__(self):
        if not self.length_s > 0:
            raise InputError("window length must be positive")
        if not 0 < self.step_s <= self.length_s:
            raise InputError("window step must lie in (0, window length]")

    def count(self, duration_s: float) -> int:
        if duration_s + _COUNT_TOL < self.length_s:
            return 0
        return math.floor((duration_s - self.length_s) / self.step_s + _COUNT_TOL) + 1

    def bounds(self, index: int) -> tuple[float, float]:
        start = index * self.step_s
        return start, start + self.length_s


@dataclass(frozen=True)
class RateConfig:
    """Everything the per-window estimator needs besides the traces."""

    window: WindowSpec = WindowSpec()
    band: tuple = (0.1, 0.4)
    total: tuple = (0.0, 4.0)
    work_rate_hz: float = 8.0
    emd: EmdConfig = EmdConfig()
    min_acf_peak: float = MIN_ACF_PEAK

    def __post_init__(self):
        lo, hi = self.band
        if not 0 <= lo < hi:
            raise InputError(f"bad respiratory band {self.band}")
        if not self.work_rate_hz > 0:
            raise InputError("working rate must be positive")
        if hi > self.work_rate_hz / 2:
            raise InputError(f"band upper edge {hi} Hz is above the working-rate Nyquist")
        if not -1 <= self.min_acf_peak <= 1:
            raise InputError("minimum autocorrelation peak must lie in [-1, 1]")


@dataclass(frozen=True)
class CellEstimate:
    roi_id: str
    channel: str
    window_index: int
    f_hz: float
    snr: float
    valid: bool
    reason: str = ""


def decimate(x: np.ndarray, fps: float, work_rate: float) -> tuple[np.ndarray, float]:
    """Resample a low-passed trace to ``work_rate``.

    Integer ratios keep every k-th sample; other ratios interpolate linearly
    onto the working-rate grid. Rates at or below ``work_rate`` pass through.
    """
    if fps <= work_rate:
        return x, fps
    ratio = fps / work_rate
    if abs(ratio - round(ratio)) < 1e-9:
        return x[:: int(round(ratio))], work_rate
    n_out = math.ceil(x.size * work_rate / fps)
    t_out = np.arange(n_out) / work_rate
    t_in = np.arange(x.size) / fps
    return np.interp(t_out, t_in, x), work_rate


def select_respiratory_imf(imfs: ImfSet, fps: float, band=(0.1, 0.4), total=(0.0, 4.0)):
    """Pick the in-band IMF with the largest in-band power fraction.

    An IMF qualifies when its representative frequency lies in the closed
    ``band``. Returns ``(index, psd)`` or ``None``; ties go to the lower index.
    """
    lo, hi = band
    best = None
    for i, imf in enumerate(imfs.imfs):
        p = psd(imf, fps)
        if not np.any(p.power > 0):
            continue
        f = representative_frequency(p)
        if not lo - 1e-9 <= f <= hi + 1e-9:
            continue
        frac, _ = band_snr(p, band, total)
        if best is None or frac > best[0]:
            best = (frac, i, p)
    if best is None:
        return None
    return best[1], best[2]


def unbiased_acf(x: np.ndarray) -> np.ndarray:
    """Unbiased sample autocorrelation of the mean-removed input, normalised to r[0] = 1."""
    x = x - x.mean()
    n = x.size
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    r = np.fft.irfft(spec * np.conj(spec), nfft)[:n]
    r /= np.arange(n, 0, -1)
    if r[0] <= 0:
        raise PipelineError("zero-variance signal has no autocorrelation")
    return r / r[0]


def autocorr_peak(x, fps: float, plausible=PLAUSIBLE_HZ) -> tuple[float, float]:
    """Dominant frequency and normalised height of the first autocorrelation lobe.

    The peak is the maximum of the first positive lobe that follows the first
    zero crossing, refined with a three-point parabola. Returns
    ``(f_hz, height)`` where ``height`` is the unrefined ``r[k] / r[0]``.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 4 or not np.isfinite(x).all():
        raise InputError("autocorrelation needs at least 4 finite samples")
    r = unbiased_acf(x)
    # only lags with at least half the samples overlapping are trusted
    r = r[: x.size // 2 + 1]
    neg = np.flatnonzero(r <= 0)
    if neg.size == 0:
        raise PipelineError("no zero crossing in autocorrelation")
    z = neg[0]
    pos = np.flatnonzero(r[z:] > 0)
    if pos.size == 0:
        raise PipelineError("no autocorrelation peak after the first zero crossing")
    lobe_start = z + pos[0]
    after = np.flatnonzero(r[lobe_start:] <= 0)
    lobe_end = lobe_start + after[0] if after.size else r.size
    k = lobe_start + int(np.argmax(r[lobe_start:lobe_end]))
    if k == r.size - 1:
        raise PipelineError("autocorrelation peak lies at the largest trusted lag")
    a, b, c = r[k - 1], r[k], r[k + 1]
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom < 0 else 0.0
    f = fps / (k + shift)
    if not plausible[0] < f < plausible[1]:
        raise PipelineError(f"autocorrelation frequency {f:.3f} Hz outside plausible range")
    return float(f), float(b)


def autocorr_frequency(x, fps: float, plausible=PLAUSIBLE_HZ) -> float:
    """Dominant frequency from the first autocorrelation lobe after the first zero crossing."""
    return autocorr_peak(x, fps, plausible)[0]


def estimate_window(x: np.ndarray, fps: float, cfg: RateConfig) -> tuple[float, float, bool, str]:
    """``(f_hz, snr, valid, reason)`` for one window at the working rate."""
    try:
        imfs = decompose(x, fps, cfg.emd)
    except InputError as exc:
        return math.nan, math.nan, False, str(exc)
    chosen = select_respiratory_imf(imfs, fps, cfg.band, cfg.total)
    if chosen is None:
        return math.nan, math.nan, False, "no IMF in band"
    idx, p = chosen
    snr, _ = band_snr(p, cfg.band, cfg.total)
    try:
        f, height = autocorr_peak(imfs.imfs[idx], fps)
    except PipelineError as exc:
        return math.nan, snr, False, str(exc)
    if height < cfg.min_acf_peak:
        return f, snr, False, f"weak periodicity: autocorrelation peak {height:.2f}"
    return f, snr, True, ""


def estimate_windows(traces, cfg: RateConfig | None = None) -> list[CellEstimate]:
    """Sliding-window estimates for every trace of one cell.

    ``traces`` are already low-pass filtered; each is decimated to the
    working rate once and then cut into windows.
    """
    cfg = cfg or RateConfig()
    if isinstance(traces, ChannelTrace):
        traces = [traces]
    out = []
    for tr in traces:
        n_win = cfg.window.count(tr.duration_s)
        if n_win < 1:
            raise InputError(
                f"insufficient duration: trace {tr.roi_id}/{tr.channel} lasts {tr.duration_s:.2f} s, "
                f"window needs {cfg.window.length_s} s"
            )
        x, rate = decimate(tr.samples, tr.fps, cfg.work_rate_hz)
        length = int(round(cfg.window.length_s * rate))
        for i in range(n_win):
            start = int(round(i * cfg.window.step_s * rate))
            seg = x[start:start + length]
            if seg.size < length:
                # float rounding at the very end of the trace
                seg = x[-length:]
            f, snr, valid, reason = estimate_window(seg, rate, cfg)
            out.append(CellEstimate(tr.roi_id, tr.channel, i, f, snr, valid, reason))
    return out


__all__ = [
    "CellEstimate", "Psd", "RateConfig", "WindowSpec", "autocorr_frequency", "autocorr_peak", "decimate",
    "estimate_window", "estimate_windows", "select_respiratory_imf", "unbiased_acf",
]
