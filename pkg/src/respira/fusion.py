"""SNR-weighted median fusion of per-cell frequency estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError, PipelineError
from .rate import CellEstimate

# cumulative weights are compared against 1/2 with this slack, absorbing the
# rounding left over from normalising the weights
HALF_TOL = 1e-12


@dataclass
class WindowEstimate:
    window_index: int
    region: str
    channel: str
    fused_f: float | None
    contributors: list = field(default_factory=list)  # (f_k, w_k, roi_id)
    n_valid: int = 0
    n_cells: int = 0
    t_start: float = math.nan
    t_end: float = math.nan

    @property
    def missing(self) -> bool:
        return self.fused_f is None

    @property
    def fused_bpm(self) -> float | None:
        return None if self.fused_f is None else 60.0 * self.fused_f


def weights(snrs: Sequence[float]) -> np.ndarray:
    s = np.asarray(snrs, dtype=float)
    if s.size == 0:
        raise InputError("no SNR values")
    if np.any(s < 0) or not np.isfinite(s).all():
        raise InputError("SNR values must be finite and non-negative")
    total = s.sum()
    if total <= 0:
        raise PipelineError("all-zero SNR list: weights undefined")
    return s / total


def weighted_median(fs: Sequence[float], ws: Sequence[float]) -> float:
    """Element at which neither side carries more than half of the weight.

    Pairs are sorted by frequency (stable), and the first position ``i``
    with ``sum(w[:i]) <= 0.5`` and ``sum(w[i+1:]) <= 0.5`` wins, so an exact
    split returns the lower of the two admissible values.
    """
    f = np.asarray(fs, dtype=float)
    w = np.asarray(ws, dtype=float)
    if f.size != w.size:
        raise InputError(f"length mismatch: {f.size} frequencies vs {w.size} weights")
    if f.size == 0:
        raise InputError("weighted median of an empty list")
    order = np.argsort(f, kind="stable")
    f, w = f[order], w[order]
    before = np.concatenate([[0.0], np.cumsum(w)[:-1]])
    after = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
    ok = (before <= 0.5 + HALF_TOL) & (after <= 0.5 + HALF_TOL)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        raise InputError("weights are not normalised: no element splits the weight in half")
    return float(f[hits[0]])


def fuse_window(estimates: Sequence[CellEstimate], region: str = "", channel: str = "",
                window_index: int | None = None) -> WindowEstimate:
    """Weighted median over the valid cells of one window / region / channel group."""
    if window_index is None:
        window_index = estimates[0].window_index if estimates else -1
    valid = [e for e in estimates if e.valid]
    est = WindowEstimate(window_index, region, channel, None, n_valid=len(valid), n_cells=len(estimates))
    if not valid:
        return est
    try:
        w = weights([e.snr for e in valid])
    except PipelineError:
        return est
    fs = [e.f_hz for e in valid]
    est.fused_f = weighted_median(fs, w)
    est.contributors = [(e.f_hz, float(wk), e.roi_id) for e, wk in zip(valid, w)]
    return est
