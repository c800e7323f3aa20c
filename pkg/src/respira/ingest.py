"""Readers and writers for frame sequences, masks, traces and schedules.

File formats
------------
``rawseq``
    A directory holding ``header.json`` (``width``, ``height``, ``fps``,
    ``bit_depth``, ``frame_count``, ``layout="planar-rgb"``) and
    ``frames.bin``: frames concatenated, each frame being the R, G and B
    planes in row-major order. 16-bit samples are little-endian.
mask
    Binary PGM (P5), maxval 255; 0 = background, 128 = face, 255 = chest.
trace CSV
    ``# fps=<float>`` header line, then ``roi_id,channel,t_index,value``
    rows sorted by (roi_id, channel, t_index).
schedule CSV
    ``start_s,end_s,freq_bpm`` rows, optionally preceded by that header.
"""

from __future__ import annotations

import csv
import json
import os
import re
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InputError
from .model import ChannelTrace, FrameSequence, GroundTruthSchedule, Label, RegionMask, Stage

FRAME_FORMATS = ("rawseq",)

MASK_ENCODING = {0: Label.BACKGROUND, 128: Label.FACE, 255: Label.CHEST}
_MASK_DECODE = np.full(256, 255, dtype=np.uint8)
for _value, _label in MASK_ENCODING.items():
    _MASK_DECODE[_value] = int(_label)
_MASK_ENCODE = np.array([0, 128, 255], dtype=np.uint8)

# enough digits for a float64 round trip
TRACE_FLOAT_FMT = "{:.17g}"


def _dtype(bit_depth: int) -> np.dtype:
    if bit_depth == 8:
        return np.dtype(np.uint8)
    if bit_depth == 16:
        return np.dtype("<u2")
    raise InputError(f"unsupported bit depth {bit_depth}")


# --------------------------------------------------------------------------
# frames
# --------------------------------------------------------------------------


def load_frames(path, format: str = "rawseq") -> FrameSequence:
    if format not in FRAME_FORMATS:
        raise InputError(f"unsupported frame format {format!r}")
    path = Path(path)
    header_path = path / "header.json"
    payload_path = path / "frames.bin"
    if not header_path.is_file() or not payload_path.is_file():
        raise InputError(f"missing rawseq files in {path}")
    try:
        header = json.loads(header_path.read_text())
        width = int(header["width"])
        height = int(header["height"])
        fps = float(header["fps"])
        bit_depth = int(header["bit_depth"])
        frame_count = int(header["frame_count"])
        layout = header.get("layout", "planar-rgb")
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"malformed header {header_path}: {exc}") from exc
    if layout != "planar-rgb":
        raise InputError(f"malformed header: unsupported layout {layout!r}")
    if width < 1 or height < 1 or frame_count < 1:
        raise InputError("malformed header: non-positive geometry or frame count")
    dtype = _dtype(bit_depth)

    frame_bytes = 3 * width * height * dtype.itemsize
    size = payload_path.stat().st_size
    if size < frame_bytes * frame_count:
        raise InputError(
            f"truncated frame data: {size} bytes for {frame_count} frames of {frame_bytes} bytes"
        )
    if size > frame_bytes * frame_count:
        raise InputError(
            f"inconsistent frame dimensions: {size} bytes is more than {frame_count} frames"
        )
    data = np.fromfile(payload_path, dtype=dtype)
    frames = data.reshape(frame_count, 3, height, width)
    return FrameSequence(frames=frames, fps=fps, bit_depth=bit_depth)


def write_frames(seq: FrameSequence, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    dtype = _dtype(seq.bit_depth)
    header = {
        "width": seq.width,
        "height": seq.height,
        "fps": seq.fps,
        "bit_depth": seq.bit_depth,
        "frame_count": len(seq),
        "layout": "planar-rgb",
    }
    (path / "header.json").write_text(json.dumps(header, indent=2) + "\n")
    np.ascontiguousarray(seq.frames, dtype=dtype).tofile(path / "frames.bin")


# --------------------------------------------------------------------------
# masks
# --------------------------------------------------------------------------

_PGM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def load_mask(path) -> RegionMask:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"mask file not found: {path}")
    raw = path.read_bytes()
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PGM_TOKEN.match(raw, pos)
        if m is None:
            raise InputError(f"malformed PGM header in {path}")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise InputError(f"not a binary PGM (P5): {path}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise InputError(f"malformed PGM header in {path}") from exc
    if maxval != 255:
        raise InputError(f"mask maxval must be 255, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    body = raw[pos:pos + width * height]
    if len(body) != width * height:
        raise InputError(f"truncated PGM data in {path}")
    values = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
    labels = _MASK_DECODE[values]
    if (labels == 255).any():
        bad = sorted(set(np.unique(values)) - set(MASK_ENCODING))
        raise InputError(f"unknown label value(s) {bad} in mask {path}")
    return RegionMask(labels)


def write_mask(mask: RegionMask, path) -> None:
    values = _MASK_ENCODE[mask.labels]
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + values.tobytes())


# --------------------------------------------------------------------------
# traces
# --------------------------------------------------------------------------


def load_traces(path) -> list[tuple[str, str, ChannelTrace]]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"trace file not found: {path}")
    with open(path, newline="") as fh:
        first = fh.readline()
        m = re.match(r"#\s*fps\s*=\s*(\S+)", first)
        if m is None:
            raise InputError(f"missing '# fps=<float>' header in {path}")
        try:
            fps = float(m.group(1))
        except ValueError as exc:
            raise InputError(f"bad fps header in {path}") from exc

        groups: dict[tuple[str, str], list[tuple[int, float]]] = {}
        for lineno, row in enumerate(csv.reader(fh), start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if row[0] == "roi_id":
                continue
            if len(row) != 4:
                raise InputError(f"ragged row at line {lineno}: expected 4 fields, got {len(row)}")
            roi_id, channel, t_index, value = row
            try:
                t = int(t_index)
                v = float(value)
            except ValueError as exc:
                raise InputError(f"non-numeric sample at line {lineno}") from exc
            groups.setdefault((roi_id, channel), []).append((t, v))

    if not groups:
        raise InputError(f"no traces in {path}")
    out = []
    for (roi_id, channel), rows in groups.items():
        idx = [t for t, _ in rows]
        if idx != list(range(len(idx))):
            raise InputError(f"trace {roi_id}/{channel}: t_index must run 0..n-1 in order")
        samples = np.array([v for _, v in rows])
        out.append((roi_id, channel, ChannelTrace(samples, fps, roi_id, channel)))
    return out


def export_traces(traces: Iterable[ChannelTrace], path) -> None:
    traces = sorted(traces, key=lambda tr: (tr.roi_id, tr.channel))
    if not traces:
        raise InputError("no traces to export")
    fps = traces[0].fps
    if any(tr.fps != fps for tr in traces):
        raise InputError("all exported traces must share one sampling rate")
    with open(path, "w", newline="") as fh:
        fh.write(f"# fps={fps!r}\n")
        fh.write("roi_id,channel,t_index,value\n")
        for tr in traces:
            prefix = f"{tr.roi_id},{tr.channel},"
            fh.writelines(
                f"{prefix}{i},{TRACE_FLOAT_FMT.format(v)}\n" for i, v in enumerate(tr.samples)
            )


# --------------------------------------------------------------------------
# schedules
# --------------------------------------------------------------------------


def load_schedule(path) -> GroundTruthSchedule:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"schedule file not found: {path}")
    stages = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#") or row[0].strip() == "start_s":
                continue
            if len(row) != 3:
                raise InputError(f"schedule line {lineno}: expected 3 fields")
            try:
                stages.append(Stage(*(float(v) for v in row)))
            except ValueError as exc:
                raise InputError(f"schedule line {lineno}: non-numeric value") from exc
    stages.sort(key=lambda s: s.start_s)
    return GroundTruthSchedule(stages)


def write_schedule(schedule: GroundTruthSchedule, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("start_s,end_s,freq_bpm\n")
        for s in schedule.stages:
            fh.write(f"{s.start_s!r},{s.end_s!r},{s.freq_bpm!r}\n")


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
