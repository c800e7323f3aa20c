"""Core data model: frames, masks, schedules and per-cell channel traces."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError

CHANNELS = ("R", "G", "B")
RPPG = "rPPG"


class Label(enum.IntEnum):
    BACKGROUND = 0
    FACE = 1
    CHEST = 2

    @property
    def region(self) -> str:
        return self.name.lower()


@dataclass
class FrameSequence:
    """Time-ordered RGB frames.

    ``frames`` has shape ``(n_frames, 3, height, width)`` (planar RGB, one
    unsigned integer plane per channel) so that it maps one-to-one onto the
    ``rawseq`` payload.
    """

    frames: np.ndarray
    fps: float
    bit_depth: int = 8

    def __post_init__(self):
        f = self.frames
        if f.ndim != 4 or f.shape[1] != 3:
            raise InputError(f"frames must have shape (n, 3, h, w), got {f.shape}")
        if f.shape[0] < 1:
            raise InputError("frame sequence is empty")
        if not self.fps > 0:
            raise InputError(f"fps must be positive, got {self.fps}")
        if self.bit_depth not in (8, 16):
            raise InputError(f"unsupported bit depth {self.bit_depth}")

    @property
    def width(self) -> int:
        return self.frames.shape[3]

    @property
    def height(self) -> int:
        return self.frames.shape[2]

    def __len__(self):
        return self.frames.shape[0]


@dataclass
class RegionMask:
    """Per-pixel region labels, shape ``(height, width)`` of :class:`Label` codes."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 2:
            raise InputError("mask must be two-dimensional")
        if not np.isin(self.labels, [int(v) for v in Label]).all():
            raise InputError("mask contains unknown label codes")

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class Stage:
    start_s: float
    end_s: float
    freq_bpm: float

    @property
    def freq_hz(self) -> float:
        return self.freq_bpm / 60.0


@dataclass
class GroundTruthSchedule:
    """Ordered, non-overlapping stages of constant breathing frequency."""

    stages: list[Stage]

    def __post_init__(self):
        self.stages = [s if isinstance(s, Stage) else Stage(*map(float, s)) for s in self.stages]
        if not self.stages:
            raise InputError("schedule has no stages")
        prev_end = -np.inf
        for s in self.stages:
            if not s.end_s > s.start_s:
                raise InputError(f"stage {s} has non-positive duration")
            if not s.freq_bpm > 0:
                raise InputError(f"stage {s} has non-positive frequency")
            if s.start_s < prev_end:
                raise InputError(f"stage overlap at t={s.start_s} s")
            prev_end = s.end_s

    @property
    def duration_s(self) -> float:
        return self.stages[-1].end_s

    def frequency_hz(self, t: np.ndarray) -> np.ndarray:
        """Scheduled frequency at times ``t``; gaps and times past the end hold the last stage."""
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.stages[0].freq_hz)
        for s in self.stages:
            out[t >= s.start_s] = s.freq_hz
        return out

    def stage_containing(self, start_s: float, end_s: float) -> Stage | None:
        for s in self.stages:
            if s.start_s <= start_s and end_s <= s.end_s:
                return s
        return None


@dataclass
class ChannelTrace:
    """One averaged intensity time series for a (sub-ROI, channel) pair."""

    samples: np.ndarray
    fps: float
    roi_id: str
    channel: str

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise InputError(f"trace {self.roi_id}/{self.channel} is empty")
        if not self.fps > 0:
            raise InputError(f"fps must be positive, got {self.fps}")
        if not np.isfinite(self.samples).all():
            raise InputError(f"trace {self.roi_id}/{self.channel} has non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.fps


@dataclass(frozen=True)
class Cell:
    roi_id: str
    x0: int
    y0: int
    label: Label

    @property
    def region(self) -> str:
        return self.label.region


@dataclass
class SubRoiGrid:
    edge_px: int
    cells: list[Cell] = field(default_factory=list)

    @property
    def n_roi(self) -> int:
        return len(self.cells)


def cell_id(label: Label, x0: int, y0: int) -> str:
    return f"{label.region}_{x0}_{y0}"


def parse_cell_id(roi_id: str) -> tuple[str, int | None, int | None]:
    """Split ``region_x0_y0``; a bare region name has no offset; anything else is ``unknown``."""
    if roi_id in ("face", "chest"):
        return roi_id, None, None
    parts = roi_id.split("_")
    if len(parts) == 3 and parts[0] in ("face", "chest"):
        try:
            return parts[0], int(parts[1]), int(parts[2])
        except ValueError:
            pass
    return "unknown", None, None


def as_stages(rows: Sequence[Sequence[float]]) -> GroundTruthSchedule:
    return GroundTruthSchedule([Stage(*map(float, r)) for r in rows])
