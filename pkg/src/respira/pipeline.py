"""End-to-end orchestration: cells -> filtered traces -> window estimates -> fused rates."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import InputError
from .fusion import WindowEstimate, fuse_window
from .model import RPPG, ChannelTrace, FrameSequence, RegionMask, parse_cell_id
from .preprocess import average_channels, build_grid, lowpass
from .rate import CellEstimate, RateConfig, estimate_windows
from .rppg import LmsConfig, extract_rppg

log = logging.getLogger(__name__)

CHANNEL_ORDER = ("R", "G", "B", RPPG)
REGION_ORDER = ("chest", "face", "unknown")


@dataclass(frozen=True)
class PipelineConfig:
    edge_px: int = 10
    cell_purity: float = 1.0
    f_cut: float = 4.0
    lms: LmsConfig = LmsConfig()
    rate: RateConfig = RateConfig()
    threads: int = 1


@dataclass
class CellInput:
    roi_id: str
    region: str
    x0: int | None
    y0: int | None
    traces: dict  # channel -> ChannelTrace


@dataclass
class AnalysisResult:
    cells: list
    cell_estimates: list
    windows: list = field(default_factory=list)
    config: PipelineConfig = PipelineConfig()


def cells_from_frames(frames: FrameSequence, mask: RegionMask, cfg: PipelineConfig) -> list[CellInput]:
    if (mask.width, mask.height) != (frames.width, frames.height):
        raise InputError(
            f"mask is {mask.width}x{mask.height} but frames are {frames.width}x{frames.height}"
        )
    grid = build_grid(mask, cfg.edge_px, cfg.cell_purity)
    traces = average_channels(frames, grid)
    by_id = {}
    for tr in traces:
        by_id.setdefault(tr.roi_id, {})[tr.channel] = tr
    return [CellInput(c.roi_id, c.region, c.x0, c.y0, by_id[c.roi_id]) for c in grid.cells]


def cells_from_traces(rows) -> list[CellInput]:
    """Group ``(roi_id, channel, trace)`` rows from :func:`respira.ingest.load_traces` by cell."""
    cells: dict[str, CellInput] = {}
    for roi_id, channel, tr in rows:
        if roi_id not in cells:
            region, x0, y0 = parse_cell_id(roi_id)
            cells[roi_id] = CellInput(roi_id, region, x0, y0, {})
        cells[roi_id].traces[channel] = tr
    lengths = {len(tr) for c in cells.values() for tr in c.traces.values()}
    if len(lengths) > 1:
        raise InputError("traces in one file must all have the same length")
    return list(cells.values())


def filtered_traces(cell: CellInput, cfg: PipelineConfig) -> list[ChannelTrace]:
    """Low-pass every channel; face cells gain an rPPG trace from filtered G and R."""
    out = {ch: lowpass(tr, cfg.f_cut) for ch, tr in cell.traces.items() if ch != RPPG}
    if RPPG in cell.traces:
        out[RPPG] = cell.traces[RPPG]
    elif cell.region == "face" and "G" in out and "R" in out:
        out[RPPG] = extract_rppg(out["G"], out["R"], cfg.lms)
    return [out[ch] for ch in CHANNEL_ORDER if ch in out] + [
        tr for ch, tr in out.items() if ch not in CHANNEL_ORDER
    ]


def process_cell(cell: CellInput, cfg: PipelineConfig) -> list[CellEstimate]:
    return estimate_windows(filtered_traces(cell, cfg), cfg.rate)


def _process_cell_task(args):
    return process_cell(*args)


def fuse_all(cells: list[CellInput], estimates: list[CellEstimate], cfg: PipelineConfig) -> list[WindowEstimate]:
    region_of = {c.roi_id: c.region for c in cells}
    groups: dict[tuple, list[CellEstimate]] = {}
    for e in estimates:
        groups.setdefault((e.window_index, region_of[e.roi_id], e.channel), []).append(e)

    def order(key):
        w, region, ch = key
        r = REGION_ORDER.index(region) if region in REGION_ORDER else len(REGION_ORDER)
        c = CHANNEL_ORDER.index(ch) if ch in CHANNEL_ORDER else len(CHANNEL_ORDER)
        return w, r, region, c, ch

    windows = []
    for key in sorted(groups, key=order):
        w, region, ch = key
        est = fuse_window(sorted(groups[key], key=lambda e: e.roi_id), region, ch, w)
        est.t_start, est.t_end = cfg.rate.window.bounds(w)
        windows.append(est)
    return windows


def analyze_cells(cells: list[CellInput], cfg: PipelineConfig | None = None) -> AnalysisResult:
    cfg = cfg or PipelineConfig()
    if not cells:
        raise InputError("no cells to analyse")
    tasks = [(c, cfg) for c in cells]
    if cfg.threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            per_cell = list(pool.map(_process_cell_task, tasks))
    else:
        per_cell = [process_cell(c, cfg) for c in cells]
    estimates = [e for chunk in per_cell for e in chunk]
    windows = fuse_all(cells, estimates, cfg)
    n_missing = sum(w.missing for w in windows)
    log.info("%d cells, %d cell estimates, %d fused windows (%d missing)",
             len(cells), len(estimates), len(windows), n_missing)
    return AnalysisResult(cells, estimates, windows, cfg)


def analyze_frames(frames: FrameSequence, mask: RegionMask, cfg: PipelineConfig | None = None) -> AnalysisResult:
    cfg = cfg or PipelineConfig()
    return analyze_cells(cells_from_frames(frames, mask, cfg), cfg)
