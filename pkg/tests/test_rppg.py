import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from respira.acceptance import drift_scenario, pulse_and_drift_gain
from respira.errors import InputError
from respira.model import ChannelTrace
from respira.preprocess import lowpass
from respira.rppg import LmsConfig, extract_rppg


def _trace(x, ch, roi="face_0_0", fps=120.0):
    return ChannelTrace(np.asarray(x, dtype=float), fps, roi, ch)


def _residual_ratio(x, cfg=None):
    out = extract_rppg(_trace(x, "G"), _trace(x, "R"), cfg).samples
    half = x.size // 2
    return np.sqrt(np.mean(out[half:] ** 2)) / x.std()


@pytest.mark.parametrize("seed", range(4))
def test_identical_inputs_cancel(seed):
    # 120 s of camera-like, band-limited intensity noise
    rng = np.random.default_rng(seed)
    x = lowpass(_trace(100 + 20 * rng.normal(size=14400), "G")).samples
    assert _residual_ratio(x) < 0.05


@pytest.mark.parametrize("shape", ["walk", "sine"])
def test_identical_smooth_inputs_cancel(rng, shape):
    t = np.arange(14400) / 120.0
    x = np.cumsum(rng.normal(size=t.size)) if shape == "walk" else 3 * np.sin(2 * np.pi * 0.3 * t)
    assert _residual_ratio(x) < 0.05


def test_identical_white_noise_cancels_with_larger_step(rng):
    assert _residual_ratio(rng.normal(size=7200), LmsConfig(step_size=0.1)) < 0.05


def test_pulse_kept_drift_removed():
    t, pulse, drift = drift_scenario()
    out = extract_rppg(_trace(120 + pulse + drift, "G"), _trace(150 + drift, "R"))
    assert out.channel == "rPPG" and len(out) == t.size
    amp, gain = pulse_and_drift_gain(out.samples, t, drift)
    assert amp / 0.5 >= 0.8
    assert gain <= 0.1


def test_degenerate_reference():
    with pytest.raises(InputError, match="degenerate reference"):
        extract_rppg(_trace(np.arange(100.0), "G"), _trace(np.full(100, 3.0), "R"))


@pytest.mark.parametrize("kwargs", [
    dict(red=_trace(np.arange(99.0), "R")),
    dict(red=_trace(np.arange(100.0), "R", fps=60.0)),
    dict(red=_trace(np.arange(100.0), "R", roi="face_10_0")),
])
def test_mismatched_inputs(kwargs):
    with pytest.raises(InputError):
        extract_rppg(_trace(np.sin(np.arange(100.0)), "G"), kwargs["red"])


@pytest.mark.parametrize("cfg", [dict(filter_length=0), dict(step_size=0), dict(step_size=2.5), dict(leakage=1)])
def test_bad_config(cfg):
    with pytest.raises(InputError):
        LmsConfig(**cfg)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_scale_equivariance(seed, c):
    rng = np.random.default_rng(seed)
    g, r = rng.normal(size=(2, 300))
    cfg = LmsConfig(filter_length=8, step_size=0.5)
    base = extract_rppg(_trace(g, "G"), _trace(r, "R"), cfg).samples
    scaled = extract_rppg(_trace(c * g, "G"), _trace(c * r, "R"), cfg).samples
    np.testing.assert_allclose(scaled, c * base, rtol=1e-9, atol=1e-9 * c)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0), st.sampled_from([1, 4, 32]))
def test_bounded_output(seed, mu, taps):
    rng = np.random.default_rng(seed)
    # heavy-tailed and spiky inputs
    g = rng.standard_cauchy(400)
    r = rng.standard_cauchy(400) * rng.integers(0, 2, 400)
    r[0] = 1.0
    out = extract_rppg(_trace(g, "G"), _trace(r, "R"), LmsConfig(taps, mu)).samples
    assert np.isfinite(out).all()
    assert np.max(np.abs(out)) <= 10 * np.max(np.abs(g - g.mean()))
