"""Synthetic breathing data with known ground truth.

Chest cells carry a breathing-driven brightness oscillation, face cells the
same oscillation scaled by a head-coupling factor, and the face green
channel additionally a pulse wave whose rate is modulated by respiration
(RSA). A slow illumination drift is shared by every channel and region.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InputError
from .model import CHANNELS, ChannelTrace, FrameSequence, GroundTruthSchedule, Label, RegionMask, Stage

DEFAULT_STAGES = ((0.0, 60.0, 10.0), (60.0, 120.0, 12.0), (120.0, 180.0, 15.0), (180.0, 240.0, 18.0))

# frames are rendered in blocks to bound the size of the dither buffer
_RENDER_BLOCK = 2048


@dataclass
class SynthScenario:
    stages: list = field(default_factory=lambda: [list(s) for s in DEFAULT_STAGES])
    fps: float = 120.0
    width: int = 30
    height: int = 40
    face_rect: list = field(default_factory=lambda: [0, 0, 20, 20])  # x, y, w, h
    chest_rect: list = field(default_factory=lambda: [0, 20, 20, 20])
    dc: list = field(default_factory=lambda: [150.0, 110.0, 90.0])  # R, G, B base level
    background: float = 30.0
    motion_amp: float = 4.0
    head_coupling: float = 0.1
    pulse_hz: float = 1.2
    pulse_amp: float = 0.1
    rsa_depth: float = 0.05
    illum_drift: list = field(default_factory=lambda: [2.0, 90.0])  # amplitude, timescale in s
    noise_sigma: float = 0.05
    bit_depth: int = 8
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.fps > 0:
            raise InputError("scenario fps must be positive")
        if self.bit_depth not in (8, 16):
            raise InputError(f"unsupported bit depth {self.bit_depth}")
        if len(self.dc) != 3:
            raise InputError("dc must list three channel levels (R, G, B)")
        if len(self.illum_drift) != 2 or self.illum_drift[1] <= 0:
            raise InputError("illum_drift must be [amplitude, timescale_s > 0]")
        amps = (self.motion_amp, self.head_coupling, self.pulse_amp, self.noise_sigma, self.illum_drift[0])
        if min(amps) < 0:
            raise InputError("scenario amplitudes must be non-negative")
        if not 0 <= self.rsa_depth < 1:
            raise InputError("rsa_depth must lie in [0, 1)")
        for name in ("face_rect", "chest_rect"):
            x, y, w, h = getattr(self, name)
            if w < 1 or h < 1 or x < 0 or y < 0 or x + w > self.width or y + h > self.height:
                raise InputError(f"{name} {getattr(self, name)} is not inside {self.width}x{self.height}")
        fx, fy, fw, fh = self.face_rect
        cx, cy, cw, ch = self.chest_rect
        if fx < cx + cw and cx < fx + fw and fy < cy + ch and cy < fy + fh:
            raise InputError("face_rect and chest_rect overlap")
        self.schedule  # validates the stages

    @property
    def schedule(self) -> GroundTruthSchedule:
        return GroundTruthSchedule([Stage(*map(float, s)) for s in self.stages])

    @property
    def n_samples(self) -> int:
        return int(round(self.schedule.duration_s * self.fps))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthScenario":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise InputError(f"unknown scenario key(s): {', '.join(unknown)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad scenario value: {exc}") from exc


def load_scenario(path) -> SynthScenario:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"scenario file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"malformed scenario file {path}: {exc}") from exc
    return SynthScenario.from_dict(data)


def write_scenario(s: SynthScenario, path) -> None:
    with open(path, "wb") as fh:
        tomli_w.dump(s.to_dict(), fh)


def _phase(freq_hz: np.ndarray, fps: float) -> np.ndarray:
    """2 pi times the running integral of ``freq_hz``, starting at zero."""
    return 2 * np.pi * np.concatenate([[0.0], np.cumsum(freq_hz[:-1])]) / fps


def _components(s: SynthScenario):
    t = np.arange(s.n_samples) / s.fps
    resp_phase = _phase(s.schedule.frequency_hz(t), s.fps)
    breathing = np.sin(resp_phase)
    pulse_freq = s.pulse_hz * (1 + s.rsa_depth * breathing)
    pulse = np.sin(_phase(pulse_freq, s.fps))
    amp, timescale = s.illum_drift
    drift = amp * np.sin(2 * np.pi * t / timescale)
    return breathing, pulse, drift


def _region_values(s: SynthScenario):
    """Noise-free and noisy per-(region, channel) intensity series."""
    breathing, pulse, drift = _components(s)
    rng = np.random.default_rng(s.seed)
    out = {}
    for region, coupling in (("chest", 1.0), ("face", s.head_coupling)):
        for k, ch in enumerate(CHANNELS):
            v = s.dc[k] + coupling * s.motion_amp * breathing + drift
            if region == "face" and ch == "G":
                v = v + s.pulse_amp * pulse
            out[(region, ch)] = v + s.noise_sigma * rng.standard_normal(v.size)
    return out, drift, rng


def synth_traces(s: SynthScenario):
    """Region-level traces keyed by ``(region, channel)`` plus the schedule."""
    values, _, _ = _region_values(s)
    traces = {key: ChannelTrace(v, s.fps, key[0], key[1]) for key, v in values.items()}
    return traces, s.schedule


def scenario_mask(s: SynthScenario) -> RegionMask:
    labels = np.full((s.height, s.width), int(Label.BACKGROUND), dtype=np.uint8)
    for rect, label in ((s.face_rect, Label.FACE), (s.chest_rect, Label.CHEST)):
        x, y, w, h = rect
        labels[y:y + h, x:x + w] = int(label)
    return RegionMask(labels)


def synth_frames(s: SynthScenario):
    """Render the scenario as frames with unbiased stochastic rounding.

    Each pixel is ``floor(v + u)`` with ``u ~ U[0, 1)``, so the region mean
    is an unbiased estimate of the trace value ``v`` with per-pixel variance
    at most 1/4.
    """
    values, drift, rng = _region_values(s)
    maxval = (1 << s.bit_depth) - 1
    background = s.background + drift
    for key, v in list(values.items()) + [(("background", "-"), background)]:
        lo, hi = float(v.min()), float(v.max())
        if lo < 0 or hi > maxval:
            raise InputError(
                f"intensity overflow in {key[0]}/{key[1]}: range [{lo:.1f}, {hi:.1f}] exceeds "
                f"[0, {maxval}] at {s.bit_depth} bit; reduce dc or amplitudes"
            )

    mask = scenario_mask(s)
    n = s.n_samples
    dtype = np.uint8 if s.bit_depth == 8 else np.uint16
    frames = np.empty((n, 3, s.height, s.width), dtype=dtype)
    region_of = {"face": mask.labels == Label.FACE, "chest": mask.labels == Label.CHEST}
    for start in range(0, n, _RENDER_BLOCK):
        stop = min(n, start + _RENDER_BLOCK)
        field_ = np.empty((stop - start, 3, s.height, s.width))
        field_[:] = background[start:stop, None, None, None]
        for region, sel in region_of.items():
            for k, ch in enumerate(CHANNELS):
                field_[:, k][:, sel] = values[(region, ch)][start:stop, None]
        field_ += rng.random(field_.shape)
        frames[start:stop] = np.floor(field_).astype(dtype)
    seq = FrameSequence(frames=frames, fps=s.fps, bit_depth=s.bit_depth)
    return seq, mask, s.schedule
