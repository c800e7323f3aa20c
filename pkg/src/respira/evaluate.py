"""Scoring against the ground-truth schedule and CSV exports of the results."""

from __future__ import annotations

import csv
import logging
import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .fusion import WindowEstimate
from .model import GroundTruthSchedule
from .rate import CellEstimate
from .spectral import to_db

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ErrorRow:
    window_index: int
    region: str
    channel: str
    error_bpm: float  # nan when the window had no fused estimate


@dataclass
class ErrorSeries:
    scored: list = field(default_factory=list)
    excluded: list = field(default_factory=list)  # window indices straddling a stage boundary

    @property
    def n_boundary(self) -> int:
        return len(self.excluded)

    def group(self, region: str, channel: str) -> np.ndarray:
        return np.array([r.error_bpm for r in self.scored if r.region == region and r.channel == channel])

    def groups(self) -> list[tuple[str, str]]:
        seen = {}
        for r in self.scored:
            seen.setdefault((r.region, r.channel), None)
        return list(seen)


@dataclass(frozen=True)
class Summary:
    n: int
    n_missing: int
    median: float
    iqr: float
    min: float
    max: float


def error_series(windows: Sequence[WindowEstimate], truth: GroundTruthSchedule) -> ErrorSeries:
    """Fused-minus-true rate in bpm for every window that lies inside one stage.

    A window is assigned to the stage holding its centre; if the window
    also reaches past that stage's edges it straddles a frequency change
    and is excluded (and counted) instead.
    """
    if not windows:
        raise InputError("no window estimates to score")
    out = ErrorSeries()
    excluded = set()
    for w in windows:
        stage = truth.stage_containing(w.t_start, w.t_end)
        if stage is None:
            excluded.add(w.window_index)
            continue
        err = math.nan if w.fused_f is None else 60.0 * w.fused_f - stage.freq_bpm
        out.scored.append(ErrorRow(w.window_index, w.region, w.channel, err))
    out.excluded = sorted(excluded)
    return out


def lower_median(values: Sequence[float]) -> float:
    return float(statistics.median_low(values))


def summarize(errors: Iterable[float]) -> Summary:
    """Order statistics of an error sample; NaNs (missing windows) are counted, not used."""
    arr = np.asarray(list(errors), dtype=float)
    finite = arr[np.isfinite(arr)]
    n_missing = int(arr.size - finite.size)
    if finite.size == 0:
        raise InputError("no errors to summarise")
    vals = sorted(finite.tolist())
    if len(vals) > 1:
        q1, _, q3 = statistics.quantiles(vals, n=4, method="inclusive")
        iqr = q3 - q1
    else:
        iqr = 0.0
    return Summary(len(vals), n_missing, lower_median(vals), iqr, vals[0], vals[-1])


def summarize_groups(series: ErrorSeries) -> dict[tuple[str, str], Summary]:
    out = {}
    for key in series.groups():
        errs = series.group(*key)
        if np.isfinite(errs).any():
            out[key] = summarize(errs)
    return out


@dataclass(frozen=True)
class SnrMapRow:
    roi_id: str
    region: str
    channel: str
    x0: int | None
    y0: int | None
    median_snr_db: float
    n_valid: int


def snr_map(estimates: Sequence[CellEstimate], cells) -> list[SnrMapRow]:
    """Median SNR (dB) over the valid windows of every (cell, channel)."""
    if not estimates:
        log.warning("no cell estimates: SNR map is empty")
        return []
    info = {c.roi_id: c for c in cells}
    per = {}
    for e in estimates:
        per.setdefault((e.roi_id, e.channel), []).append(e)
    rows = []
    for (roi_id, channel), ests in per.items():
        snrs = [e.snr for e in ests if e.valid]
        c = info.get(roi_id)
        med = to_db(lower_median(snrs)) if snrs else math.nan
        rows.append(SnrMapRow(roi_id, c.region if c else "unknown", channel,
                              c.x0 if c else None, c.y0 if c else None, med, len(snrs)))
    return rows


# --------------------------------------------------------------------------
# CSV writers
# --------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return format(v, ".10g")
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_estimates(windows: Sequence[WindowEstimate], path) -> None:
    _write_csv(
        path,
        ["window_index", "t_start_s", "t_end_s", "region", "channel", "fused_hz", "fused_bpm",
         "n_valid", "n_cells"],
        ([w.window_index, w.t_start, w.t_end, w.region, w.channel, w.fused_f, w.fused_bpm,
          w.n_valid, w.n_cells] for w in windows),
    )


def write_cell_estimates(estimates: Sequence[CellEstimate], path) -> None:
    _write_csv(
        path,
        ["window_index", "roi_id", "channel", "f_hz", "snr", "snr_db", "valid", "reason"],
        ([e.window_index, e.roi_id, e.channel, e.f_hz, e.snr,
          to_db(e.snr) if e.snr == e.snr and e.snr > 0 else None, int(e.valid), e.reason]
         for e in sorted(estimates, key=lambda e: (e.window_index, e.roi_id, e.channel))),
    )


def write_errors(series: ErrorSeries, path) -> None:
    _write_csv(path, ["window_index", "region", "channel", "error_bpm"],
               ([r.window_index, r.region, r.channel, r.error_bpm] for r in series.scored))


def write_summary(series: ErrorSeries, path) -> None:
    rows = []
    for (region, channel), s in summarize_groups(series).items():
        rows.append([region, channel, s.n, s.n_missing, s.median, s.iqr, s.min, s.max, series.n_boundary])
    _write_csv(path, ["region", "channel", "n", "n_missing", "median_bpm", "iqr_bpm", "min_bpm",
                      "max_bpm", "n_boundary_excluded"], rows)


def write_snr_map(rows: Sequence[SnrMapRow], path) -> None:
    _write_csv(path, ["roi_id", "region", "channel", "x0", "y0", "median_snr_db", "n_valid"],
               ([r.roi_id, r.region, r.channel, r.x0, r.y0, r.median_snr_db, r.n_valid] for r in rows))
