"""Empirical mode decomposition by cubic-spline envelope sifting.

The decomposition follows the standard sifting loop:

1. locate local maxima and minima (plateaus resolve to their midpoint),
2. extend both extrema sets past the window edges by mirroring,
3. fit cubic-spline upper and lower envelopes and subtract their mean,
4. repeat until the Cauchy-type SD between successive sifts drops below
   ``sd_threshold`` with the extrema / zero-crossing counts within one of
   each other (or ``max_sift_iters`` is hit), then peel the IMF off and
   continue on the remainder.

Decomposition ends when the remainder has no maximum or no minimum left
(monotonic or fewer than two extrema), when ``max_imfs`` IMFs were
extracted, or when the remainder is down to float rounding noise.
The residual is always ``input - sum(imfs)``, so reconstruction is exact up
to float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import splev, splrep

from .errors import InputError

MIN_WINDOW = 8


@dataclass
class EmdConfig:
    sd_threshold: float = 0.2
    max_sift_iters: int = 10
    max_imfs: int = 12
    mirror_extrema: int = 2
    # remainders below this fraction of the input energy are rounding dust
    energy_floor: float = 1e-12

    def __post_init__(self):
        if not self.sd_threshold > 0:
            raise InputError("EMD SD threshold must be positive")
        if self.max_sift_iters < 1 or self.max_imfs < 0 or self.mirror_extrema < 1:
            raise InputError("EMD iteration limits must be positive")


@dataclass
class ImfSet:
    imfs: np.ndarray  # shape (n_imfs, n)
    residual: np.ndarray

    @property
    def input_len(self) -> int:
        return self.residual.size

    def __len__(self):
        return self.imfs.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.imfs.sum(axis=0) + self.residual


def find_extrema(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of interior local maxima and minima; a flat run reports its midpoint."""
    d = np.diff(x)
    nz = np.flatnonzero(d)
    if nz.size < 2:
        empty = np.empty(0, dtype=int)
        return empty, empty
    s = d[nz] > 0
    k = np.flatnonzero(s[:-1] != s[1:])
    # a turning run spans samples nz[k] + 1 .. nz[k + 1]
    pos = (nz[k] + 1 + nz[k + 1]) // 2
    rising = s[k]
    return pos[rising], pos[~rising]


def count_zero_crossings(x: np.ndarray) -> int:
    s = np.sign(x)
    s = s[s != 0]
    return int(np.count_nonzero(s[:-1] != s[1:]))


def is_imf(x: np.ndarray) -> bool:
    """Extrema and zero-crossing counts differ by at most one."""
    imax, imin = find_extrema(x)
    return abs(imax.size + imin.size - count_zero_crossings(x)) <= 1


def _left_mirror(x, imax, imin, nbsym):
    """Mirror up to ``nbsym`` extrema of each kind to the left of sample 0.

    The symmetry axis is the first extremum, unless
    the edge sample overshoots the first opposite extremum, in which case the
    edge itself acts as an extremum and becomes the axis.
    """
    if imax[0] < imin[0]:
        if x[0] > x[imin[0]]:
            axis, lmax, lmin = imax[0], imax[1:nbsym + 1], imin[:nbsym]
        else:
            axis, lmax, lmin = 0, imax[:nbsym], np.r_[0, imin[:nbsym - 1]]
    else:
        if x[0] < x[imax[0]]:
            axis, lmax, lmin = imin[0], imax[:nbsym], imin[1:nbsym + 1]
        else:
            axis, lmax, lmin = 0, np.r_[0, imax[:nbsym - 1]], imin[:nbsym]
    if lmax.size == 0:
        lmax = imax[:nbsym]
    if lmin.size == 0:
        lmin = imin[:nbsym]
    tmax, tmin = 2 * axis - lmax, 2 * axis - lmin
    if axis != 0 and (tmax.max() >= 0 or tmin.max() >= 0):
        # mirrored points land inside the window: fall back to the edge as axis
        lmax, lmin = imax[:nbsym], imin[:nbsym]
        tmax, tmin = -lmax, -lmin
    return tmax, x[lmax], tmin, x[lmin]


def _envelope_knots(x, imax, imin, nbsym):
    n = x.size
    ltmax, lvmax, ltmin, lvmin = _left_mirror(x, imax, imin, nbsym)
    xr = x[::-1]
    rtmax, rvmax, rtmin, rvmin = _left_mirror(xr, (n - 1 - imax)[::-1], (n - 1 - imin)[::-1], nbsym)
    tmax = np.concatenate([ltmax, imax, (n - 1) - rtmax])
    vmax = np.concatenate([lvmax, x[imax], rvmax])
    tmin = np.concatenate([ltmin, imin, (n - 1) - rtmin])
    vmin = np.concatenate([lvmin, x[imin], rvmin])
    return _sorted_unique(tmax, vmax), _sorted_unique(tmin, vmin)


def _sorted_unique(t, v):
    t, idx = np.unique(t, return_index=True)
    return t, v[idx]


def _spline(t, v, n):
    grid = np.arange(n)
    if t.size == 1:
        return np.full(n, v[0], dtype=float)
    if t.size < 4:
        # a cubic needs four knots; fall back to the interpolating polynomial
        return np.polyval(np.polyfit(t, v, t.size - 1), grid)
    # FITPACK interpolating cubic (s=0) has not-a-knot end conditions
    return splev(grid, splrep(t, v, k=3, s=0))


def mean_envelope(x: np.ndarray, nbsym: int = 2) -> np.ndarray | None:
    """Mean of the upper and lower spline envelopes, or None without both extrema kinds."""
    imax, imin = find_extrema(x)
    if imax.size == 0 or imin.size == 0:
        return None
    (tmax, vmax), (tmin, vmin) = _envelope_knots(x, imax, imin, nbsym)
    n = x.size
    return 0.5 * (_spline(tmax, vmax, n) + _spline(tmin, vmin, n))


def sift(x: np.ndarray, cfg: EmdConfig) -> np.ndarray:
    """Extract one IMF candidate from ``x``.

    Sifting stops once the Cauchy SD ``sum(m**2) / sum(h**2)`` falls below
    the threshold and the candidate already satisfies the IMF extrema /
    zero-crossing condition, or after ``max_sift_iters`` passes.
    """
    h = x
    for _ in range(cfg.max_sift_iters):
        m = mean_envelope(h, cfg.mirror_extrema)
        if m is None:
            break
        energy = np.dot(h, h)
        h = h - m
        if energy == 0 or (np.dot(m, m) / energy < cfg.sd_threshold and is_imf(h)):
            break
    return h


def decompose(window, fps: float | None = None, cfg: EmdConfig | None = None) -> ImfSet:
    """Split ``window`` into intrinsic mode functions plus a residual trend.

    ``fps`` is accepted for interface symmetry with the spectral helpers; the
    sifting itself works on sample indices.
    """
    cfg = cfg or EmdConfig()
    x = np.asarray(window, dtype=float)
    if x.ndim != 1 or x.size < MIN_WINDOW:
        raise InputError(f"EMD window too short: need >= {MIN_WINDOW} samples, got {x.size}")
    if not np.isfinite(x).all():
        raise InputError("EMD input has non-finite values")

    imfs = []
    residual = x.copy()
    floor = cfg.energy_floor * np.dot(x - x.mean(), x - x.mean())
    while len(imfs) < cfg.max_imfs:
        imax, imin = find_extrema(residual)
        if imax.size == 0 or imin.size == 0:
            break
        centred = residual - residual.mean()
        if imfs and np.dot(centred, centred) <= floor:
            break
        imf = sift(residual, cfg)
        imfs.append(imf)
        residual = residual - imf
    stack = np.array(imfs) if imfs else np.empty((0, x.size))
    return ImfSet(stack, residual)


def orthogonality_index(imfs: ImfSet, x: np.ndarray) -> float:
    """|sum over i != j of imf_i * imf_j| relative to the input energy."""
    c = imfs.imfs
    if c.shape[0] < 2:
        return 0.0
    gram = c @ c.T
    cross = gram.sum() - np.trace(gram)
    return float(abs(cross) / np.dot(x, x))
