import numpy as np
import pytest

from respira.errors import InputError
from respira.model import ChannelTrace, RegionMask
from respira.pipeline import (PipelineConfig, analyze_cells, analyze_frames, cells_from_frames, cells_from_traces,
                              filtered_traces)
from respira.synth import synth_frames


@pytest.fixture(scope="module")
def small_run(request):
    from respira.synth import SynthScenario
    s = SynthScenario(stages=[[0.0, 40.0, 12.0], [40.0, 80.0, 15.0]], width=20, height=10,
                      face_rect=[0, 0, 10, 10], chest_rect=[10, 0, 10, 10], seed=3)
    frames, mask, schedule = synth_frames(s)
    return frames, mask, schedule, analyze_frames(frames, mask)


def test_rppg_only_for_face(small_run):
    frames, mask, _, _ = small_run
    cells = cells_from_frames(frames, mask, PipelineConfig())
    channels = {c.region: [tr.channel for tr in filtered_traces(c, PipelineConfig())] for c in cells}
    assert channels == {"face": ["R", "G", "B", "rPPG"], "chest": ["R", "G", "B"]}


def test_window_groups(small_run):
    *_, result = small_run
    keys = {(w.region, w.channel) for w in result.windows}
    assert keys == {("chest", c) for c in "RGB"} | {("face", c) for c in ("R", "G", "B", "rPPG")}
    assert len(result.windows) == 7 * 51
    assert result.windows[0].t_start == 0.0 and result.windows[0].t_end == 30.0


def test_recovers_rates(small_run):
    # a single cell per region: an occasional weakly periodic window may go missing
    _, _, schedule, result = small_run
    scored = [(w, schedule.stage_containing(w.t_start, w.t_end)) for w in result.windows if w.channel != "rPPG"]
    scored = [(w, s) for w, s in scored if s is not None]
    assert sum(w.missing for w, _ in scored) <= 0.05 * len(scored)
    assert all(abs(w.fused_bpm - s.freq_bpm) <= 0.5 for w, s in scored if not w.missing)


def test_mask_frame_size_mismatch(small_run):
    frames, *_ = small_run
    with pytest.raises(InputError, match="mask is"):
        cells_from_frames(frames, RegionMask(np.ones((10, 30))), PipelineConfig())


def test_traces_path_matches_frames_path(small_run):
    frames, mask, _, result = small_run
    cfg = PipelineConfig()
    rows = [(tr.roi_id, ch, tr) for c in cells_from_frames(frames, mask, cfg) for ch, tr in c.traces.items()]
    again = analyze_cells(cells_from_traces(rows), cfg)
    assert again.cell_estimates == result.cell_estimates


def test_unknown_roi_ids_are_grouped():
    x = np.sin(2 * np.pi * 0.25 * np.arange(8 * 40) / 8.0)
    rows = [(roi, "R", ChannelTrace(x, 8.0, roi, "R")) for roi in ("left", "right")]
    cells = cells_from_traces(rows)
    assert [c.region for c in cells] == ["unknown", "unknown"]
    result = analyze_cells(cells, PipelineConfig(f_cut=3.0))
    assert {w.region for w in result.windows} == {"unknown"}


def test_ragged_trace_lengths():
    rows = [("a", "R", ChannelTrace(np.zeros(10), 8.0, "a", "R")), ("b", "R", ChannelTrace(np.zeros(11), 8.0, "b", "R"))]
    with pytest.raises(InputError):
        cells_from_traces(rows)


def test_threads_do_not_change_results(small_run):
    frames, mask, _, result = small_run
    threaded = analyze_frames(frames, mask, PipelineConfig(threads=2))
    assert threaded.cell_estimates == result.cell_estimates
    assert [(w.window_index, w.region, w.channel, w.fused_f) for w in threaded.windows] == \
        [(w.window_index, w.region, w.channel, w.fused_f) for w in result.windows]
