import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from respira.errors import InputError
from respira.ingest import (export_traces, load_frames, load_mask, load_schedule, load_traces, write_frames,
                            write_mask, write_schedule)
from respira.model import ChannelTrace, FrameSequence, GroundTruthSchedule, Label, RegionMask
from respira.preprocess import build_grid
from respira.synth import SynthScenario, synth_frames


def _frames(n=4, h=8, w=8, bit_depth=8, seed=0):
    rng = np.random.default_rng(seed)
    hi = 256 if bit_depth == 8 else 65536
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    return FrameSequence(rng.integers(0, hi, (n, 3, h, w)).astype(dtype), 120.0, bit_depth)


def test_load_small_rawseq(tmp_path):
    seq = _frames()
    write_frames(seq, tmp_path / "f")
    back = load_frames(tmp_path / "f")
    assert len(back) == 4 and back.fps == 120
    np.testing.assert_array_equal(back.frames, seq.frames)


def test_sixteen_bit_is_little_endian(tmp_path):
    seq = _frames(n=2, bit_depth=16)
    write_frames(seq, tmp_path / "f")
    raw = np.fromfile(tmp_path / "f" / "frames.bin", dtype="<u2")
    np.testing.assert_array_equal(raw, seq.frames.ravel())
    np.testing.assert_array_equal(load_frames(tmp_path / "f").frames, seq.frames)


def test_truncated_frames(tmp_path):
    write_frames(_frames(), tmp_path / "f")
    payload = tmp_path / "f" / "frames.bin"
    data = payload.read_bytes()
    payload.write_bytes(data[: 2 * 3 * 64 + 10])  # frame 3 is cut short
    with pytest.raises(InputError, match="truncated frame data"):
        load_frames(tmp_path / "f")


def test_excess_frame_data(tmp_path):
    write_frames(_frames(), tmp_path / "f")
    with open(tmp_path / "f" / "frames.bin", "ab") as fh:
        fh.write(b"\0" * 7)
    with pytest.raises(InputError, match="inconsistent frame dimensions"):
        load_frames(tmp_path / "f")


def test_malformed_header(tmp_path):
    write_frames(_frames(), tmp_path / "f")
    (tmp_path / "f" / "header.json").write_text(json.dumps({"width": 8}))
    with pytest.raises(InputError, match="malformed header"):
        load_frames(tmp_path / "f")


def test_missing_rawseq(tmp_path):
    with pytest.raises(InputError, match="missing rawseq"):
        load_frames(tmp_path)


def test_frame_order_preserved(tmp_path):
    frames = np.zeros((5, 3, 2, 2), dtype=np.uint8)
    frames[:, 0, 0, 0] = [4, 0, 3, 1, 2]
    write_frames(FrameSequence(frames, 30.0), tmp_path / "f")
    assert load_frames(tmp_path / "f").frames[:, 0, 0, 0].tolist() == [4, 0, 3, 1, 2]


def test_synth_round_trip(tmp_path, small_scenario):
    seq, mask, _ = synth_frames(small_scenario)
    write_frames(seq, tmp_path / "f")
    write_mask(mask, tmp_path / "m.pgm")
    np.testing.assert_array_equal(load_frames(tmp_path / "f").frames, seq.frames)
    np.testing.assert_array_equal(load_mask(tmp_path / "m.pgm").labels, mask.labels)


def test_mask_encoding(tmp_path):
    values = np.array([[0, 128, 255]], dtype=np.uint8)
    (tmp_path / "m.pgm").write_bytes(b"P5\n# comment\n3 1\n255\n" + values.tobytes())
    labels = load_mask(tmp_path / "m.pgm").labels
    assert labels.tolist() == [[Label.BACKGROUND, Label.FACE, Label.CHEST]]


def test_mask_unknown_value(tmp_path):
    (tmp_path / "m.pgm").write_bytes(b"P5\n2 1\n255\n" + bytes([0, 7]))
    with pytest.raises(InputError, match="unknown label"):
        load_mask(tmp_path / "m.pgm")


def test_all_background_mask_fails_downstream(tmp_path):
    (tmp_path / "m.pgm").write_bytes(b"P5\n20 20\n255\n" + bytes(400))
    mask = load_mask(tmp_path / "m.pgm")
    with pytest.raises(InputError, match="no valid cells"):
        build_grid(mask)


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.sampled_from([0, 1, 2])))
def test_mask_round_trip_property(tmp_path_factory, labels):
    path = tmp_path_factory.mktemp("m") / "m.pgm"
    write_mask(RegionMask(labels), path)
    np.testing.assert_array_equal(load_mask(path).labels, labels)


def test_two_traces(tmp_path):
    rows = ["# fps=30.0", "roi_id,channel,t_index,value"]
    rows += [f"face_0_0,{ch},{i},{i * 0.5}" for ch in "GR" for i in range(10)]
    (tmp_path / "t.csv").write_text("\n".join(rows) + "\n")
    out = load_traces(tmp_path / "t.csv")
    assert [(r, c, len(t)) for r, c, t in out] == [("face_0_0", "G", 10), ("face_0_0", "R", 10)]
    assert out[0][2].fps == 30.0


def test_no_traces(tmp_path):
    (tmp_path / "t.csv").write_text("# fps=30\nroi_id,channel,t_index,value\n")
    with pytest.raises(InputError, match="no traces"):
        load_traces(tmp_path / "t.csv")


@pytest.mark.parametrize("body, msg", [
    ("a,R,0\n", "ragged row"),
    ("a,R,0,x\n", "non-numeric"),
    ("a,R,1,2.0\n", "t_index"),
])
def test_bad_trace_rows(tmp_path, body, msg):
    (tmp_path / "t.csv").write_text("# fps=30\n" + body)
    with pytest.raises(InputError, match=msg):
        load_traces(tmp_path / "t.csv")


def test_missing_fps_header(tmp_path):
    (tmp_path / "t.csv").write_text("a,R,0,1.0\n")
    with pytest.raises(InputError, match="fps"):
        load_traces(tmp_path / "t.csv")


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-1e12, 1e12, allow_nan=False)))
def test_trace_round_trip_is_exact(tmp_path_factory, samples):
    path = tmp_path_factory.mktemp("t") / "t.csv"
    traces = [ChannelTrace(samples, 29.97, "chest_0_10", "B"), ChannelTrace(samples[::-1], 29.97, "chest_0_10", "A")]
    export_traces(traces, path)
    back = load_traces(path)
    assert [c for _, c, _ in back] == ["A", "B"]
    np.testing.assert_array_equal(back[1][2].samples, samples)
    assert back[0][2].fps == 29.97


def test_schedule_round_trip(tmp_path):
    s = GroundTruthSchedule([(0, 60, 10), (60, 120, 12.5)])
    write_schedule(s, tmp_path / "s.csv")
    assert load_schedule(tmp_path / "s.csv").stages == s.stages


def test_schedule_overlap_file(tmp_path):
    (tmp_path / "s.csv").write_text("0,60,10\n50,120,12\n")
    with pytest.raises(InputError, match="overlap"):
        load_schedule(tmp_path / "s.csv")
