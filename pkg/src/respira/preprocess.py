"""Sub-ROI grid construction, per-cell channel averaging and FIR low-pass filtering."""

from __future__ import annotations

import functools
import math

import numpy as np

from .errors import InputError
from .ingest import export_traces  # noqa: F401  (re-exported writer for filtered traces)
from .model import CHANNELS, Cell, ChannelTrace, FrameSequence, Label, RegionMask, SubRoiGrid, cell_id

MAX_FIR_ORDER = 8192


def build_grid(mask: RegionMask, edge_px: int = 10, purity: float = 1.0) -> SubRoiGrid:
    """Tile the mask with square cells and keep those dominated by one region.

    A cell is kept when at least ``purity`` of its pixels carry the same
    non-background label; partial cells at the right and bottom border are
    discarded.
    """
    if edge_px < 1:
        raise InputError(f"edge_px must be >= 1, got {edge_px}")
    if not 0 < purity <= 1:
        raise InputError(f"cell purity must be in (0, 1], got {purity}")
    labels = mask.labels
    ny, nx = labels.shape[0] // edge_px, labels.shape[1] // edge_px
    area = edge_px * edge_px
    # small tolerance so that purity=0.5 on a 10x10 cell accepts exactly 50 pixels
    need = math.ceil(purity * area - 1e-9)
    cells = []
    for iy in range(ny):
        for ix in range(nx):
            y0, x0 = iy * edge_px, ix * edge_px
            block = labels[y0:y0 + edge_px, x0:x0 + edge_px]
            for label in (Label.FACE, Label.CHEST):
                if np.count_nonzero(block == label) >= need:
                    cells.append(Cell(cell_id(label, x0, y0), x0, y0, label))
                    break
    if not cells:
        raise InputError("no valid cells: mask has no sub-ROI inside a face or chest region")
    return SubRoiGrid(edge_px=edge_px, cells=cells)


def average_channels(frames: FrameSequence, grid: SubRoiGrid) -> list[ChannelTrace]:
    """Mean R, G and B intensity of every grid cell over time (3 traces per cell)."""
    e = grid.edge_px
    for c in grid.cells:
        if c.x0 < 0 or c.y0 < 0 or c.x0 + e > frames.width or c.y0 + e > frames.height:
            raise InputError(
                f"geometry mismatch: cell {c.roi_id} outside {frames.width}x{frames.height} frames"
            )
    out = []
    data = frames.frames
    for c in grid.cells:
        block = data[:, :, c.y0:c.y0 + e, c.x0:c.x0 + e]
        means = block.reshape(block.shape[0], 3, -1).mean(axis=2, dtype=np.float64)
        for k, ch in enumerate(CHANNELS):
            out.append(ChannelTrace(means[:, k].copy(), frames.fps, c.roi_id, ch))
    return out


def _response(h: np.ndarray, fps: float, nfft: int = 1 << 16):
    freqs = np.fft.rfftfreq(nfft, d=1.0 / fps)
    return freqs, np.abs(np.fft.rfft(h, nfft))


def meets_lowpass_spec(h: np.ndarray, fps: float, f_cut: float) -> bool:
    """Passband gain within 1 +/- 0.01 below 0.8 f_cut; >= 40 dB attenuation above 1.25 f_cut."""
    freqs, mag = _response(h, fps)
    passband = mag[freqs <= 0.8 * f_cut]
    stopband = mag[freqs >= 1.25 * f_cut]
    if np.any(np.abs(passband - 1.0) > 0.01):
        return False
    return stopband.size == 0 or bool(np.all(stopband <= 0.01))


def windowed_sinc(order: int, fps: float, f_cut: float) -> np.ndarray:
    """Hamming-windowed sinc low-pass with ``order + 1`` taps and unit DC gain."""
    n = np.arange(order + 1) - order / 2
    h = 2 * f_cut / fps * np.sinc(2 * f_cut / fps * n) * np.hamming(order + 1)
    return h / h.sum()


@functools.lru_cache(maxsize=32)
def design_lowpass(fps: float, f_cut: float) -> np.ndarray:
    """Smallest even-order windowed-sinc design meeting the low-pass tolerances."""
    if not 0 < f_cut < fps / 2:
        raise InputError(f"f_cut must lie in (0, fps/2) = (0, {fps / 2}), got {f_cut}")
    # Hamming transition width is about 3.3 fps / taps; start a little below that
    order = int(3.0 * fps / (0.45 * f_cut))
    order = max(2, order - order % 2)
    while not meets_lowpass_spec(windowed_sinc(order, fps, f_cut), fps, f_cut):
        order += 2
        if order > MAX_FIR_ORDER:
            raise InputError(f"no FIR order <= {MAX_FIR_ORDER} meets the low-pass tolerances at fps={fps}")
    # walk down in case the initial guess overshot
    while order > 2 and meets_lowpass_spec(windowed_sinc(order - 2, fps, f_cut), fps, f_cut):
        order -= 2
    h = windowed_sinc(order, fps, f_cut)
    h.setflags(write=False)
    return h


def lowpass(trace: ChannelTrace, f_cut: float = 4.0) -> ChannelTrace:
    """Zero-delay FIR low-pass with mirror extension at both ends."""
    h = design_lowpass(float(trace.fps), float(f_cut))
    order = h.size - 1
    x = trace.samples
    if x.size < order:
        raise InputError(
            f"trace {trace.roi_id}/{trace.channel} has {x.size} samples, shorter than filter order {order}"
        )
    half = order // 2
    padded = np.pad(x, half, mode="reflect")
    y = np.convolve(padded, h, mode="valid")
    return ChannelTrace(y, trace.fps, trace.roi_id, trace.channel)
