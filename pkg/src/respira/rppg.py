"""rPPG trace per face cell: NLMS cancellation of the red-channel reference from green."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .model import RPPG, ChannelTrace

# regulariser in units of one unit-variance sample: bounds the step when the reference goes quiet
_EPS = 1.0


@dataclass
class LmsConfig:
    filter_length: int = 32
    step_size: float = 0.04
    leakage: float = 0.0

    def __post_init__(self):
        if self.filter_length < 1:
            raise InputError("LMS filter length must be >= 1")
        if not 0 < self.step_size < 2:
            raise InputError("normalised LMS step size must lie in (0, 2)")
        if not 0 <= self.leakage < 1:
            raise InputError("LMS leakage must lie in [0, 1)")


def nlms(desired: np.ndarray, reference: np.ndarray, cfg: LmsConfig) -> np.ndarray:
    """Error signal of a normalised LMS filter predicting ``desired`` from ``reference``.

    The tap vector holds the current and ``filter_length - 1`` past
    reference samples (zeros before the start).
    """
    L = cfg.filter_length
    mu = cfg.step_size
    keep = 1.0 - mu * cfg.leakage
    n = desired.size
    padded = np.concatenate([np.zeros(L - 1), reference])
    w = np.zeros(L)
    err = np.empty(n)
    for t in range(n):
        u = padded[t:t + L][::-1]
        e = desired[t] - w @ u
        err[t] = e
        w = keep * w + (mu * e / (_EPS + u @ u)) * u
    return err


def extract_rppg(green: ChannelTrace, red: ChannelTrace, cfg: LmsConfig | None = None) -> ChannelTrace:
    """Green minus its NLMS prediction from red, in green's deviation scale.

    Both inputs are mean-removed and scaled to unit variance before
    adaptation; the error signal is scaled back by green's standard
    deviation.
    """
    cfg = cfg or LmsConfig()
    if len(green) != len(red):
        raise InputError(f"length mismatch: green {len(green)} vs red {len(red)}")
    if green.fps != red.fps:
        raise InputError(f"fps mismatch: green {green.fps} vs red {red.fps}")
    if green.roi_id != red.roi_id:
        raise InputError(f"roi mismatch: {green.roi_id} vs {red.roi_id}")
    g = green.samples - green.samples.mean()
    r = red.samples - red.samples.mean()
    g_std, r_std = g.std(), r.std()
    if r_std == 0:
        raise InputError("degenerate reference: red channel has zero variance")
    if g_std == 0:
        raise InputError("degenerate input: green channel has zero variance")
    err = nlms(g / g_std, r / r_std, cfg)
    return ChannelTrace(err * g_std, green.fps, green.roi_id, RPPG)
