"""Acceptance scenario suite, shared by ``respira selftest`` and the test-suite.

Every criterion is a function ``ctx -> (passed, detail)``. Criteria that
need the full 240 s default scenario share one cached analysis run.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.signal import freqz

from .emd import decompose
from .evaluate import error_series, lower_median
from .fusion import weighted_median, weights
from .model import ChannelTrace
from .pipeline import PipelineConfig, analyze_frames
from .preprocess import design_lowpass
from .rate import autocorr_frequency
from .errors import PipelineError
from .rppg import extract_rppg
from .spectral import Psd, band_snr, psd, representative_frequency, to_db
from .synth import SynthScenario, synth_frames

RUNTIME_BUDGET_S = 60.0


@dataclass
class Context:
    config: PipelineConfig = field(default_factory=PipelineConfig)
    scenario: SynthScenario = field(default_factory=SynthScenario)
    _run: tuple | None = None

    def default_run(self):
        """(result, schedule, seconds) for the default scenario, computed once."""
        if self._run is None:
            t0 = time.perf_counter()
            frames, mask, schedule = synth_frames(self.scenario)
            result = analyze_frames(frames, mask, self.config)
            self._run = (result, schedule, time.perf_counter() - t0)
        return self._run


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    check: Callable
    quick: bool = True


def _fraction_within(errors: np.ndarray, tol: float) -> float:
    # missing windows (nan) count as misses
    return float(np.mean(np.abs(np.nan_to_num(errors, nan=np.inf)) <= tol)) if errors.size else 0.0


def _pooled(series, region, channels):
    return np.concatenate([series.group(region, ch) for ch in channels])


def chest_recovery(ctx: Context):
    result, schedule, seconds = ctx.default_run()
    errs = _pooled(error_series(result.windows, schedule), "chest", "RGB")
    frac = _fraction_within(errs, 0.2)
    ok = frac >= 0.95 and seconds <= RUNTIME_BUDGET_S
    return ok, f"{frac:.1%} of {errs.size} chest windows within 0.2 bpm (need 95%); run took {seconds:.1f} s (limit {RUNTIME_BUDGET_S:.0f} s)"


def face_recovery(ctx: Context):
    result, schedule, _ = ctx.default_run()
    errs = _pooled(error_series(result.windows, schedule), "face", "RGB")
    frac = _fraction_within(errs, 0.5)
    return frac >= 0.80, f"{frac:.1%} of {errs.size} face RGB windows within 0.5 bpm (need 80%)"


def snr_ordering(ctx: Context):
    result, _, _ = ctx.default_run()
    region_of = {c.roi_id: c.region for c in result.cells}

    def median_db(region, channels):
        vals = [e.snr for e in result.cell_estimates
                if e.valid and region_of[e.roi_id] == region and e.channel in channels]
        return to_db(lower_median(vals)) if vals else -math.inf

    chest = median_db("chest", ("R", "G", "B"))
    face = median_db("face", ("R", "G", "B"))
    rppg = median_db("face", ("rPPG",))
    return chest > face > rppg, f"median SNR chest {chest:.3f} dB > face raw {face:.3f} dB > face rPPG {rppg:.3f} dB"


def emd_completeness(ctx: Context):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(64, 400))
        t = np.arange(n) / 8.0
        x = rng.normal(0, 0.3, n)
        for _ in range(int(rng.integers(1, 4))):
            x += rng.uniform(0.2, 3) * np.sin(2 * np.pi * rng.uniform(0.05, 3.5) * t + rng.uniform(0, 2 * np.pi))
        x += rng.uniform(-5, 5)
        r = decompose(x, 8.0, ctx.config.rate.emd)
        worst = max(worst, np.linalg.norm(r.reconstruct() - x) / np.linalg.norm(x))
    return worst <= 1e-9, f"worst relative L2 reconstruction error {worst:.2e} over 200 windows (limit 1e-9)"


def emd_two_tone(ctx: Context):
    fs = 8.0
    t = np.arange(240) / fs
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        x = np.sin(2 * np.pi * 0.25 * t + rng.uniform(0, 2 * np.pi)) + np.sin(2 * np.pi * 1.2 * t + rng.uniform(0, 2 * np.pi))
        imfs = decompose(x, fs, ctx.config.rate.emd).imfs
        if len(imfs) < 2:
            continue
        energy = np.einsum("ij,ij->i", imfs, imfs)
        top = np.sort(np.argsort(energy)[-2:])
        f_hi, f_lo = (representative_frequency(psd(imfs[i], fs)) for i in top)
        hits += abs(f_hi - 1.2) <= 0.03 and abs(f_lo - 0.25) <= 0.03
    return hits >= 95, f"{hits}/100 seeds separate 1.2 Hz then 0.25 Hz within 0.03 Hz (need 95)"


def brute_weighted_median(fs, ws):
    pairs = sorted(zip(fs, ws), key=lambda p: p[0])
    for i, (f, _) in enumerate(pairs):
        before = math.fsum(w for _, w in pairs[:i])
        after = math.fsum(w for _, w in pairs[i + 1:])
        if before <= 0.5 + 1e-12 and after <= 0.5 + 1e-12:
            return f
    raise AssertionError("no weighted median")


def weighted_median_oracle(ctx: Context):
    rng = np.random.default_rng(6)
    agree = 0
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        # coarse grids make ties in both frequencies and weights likely
        fs = rng.integers(6, 30, n) / 60.0
        raw = rng.integers(0, 5, n).astype(float)
        if raw.sum() == 0:
            raw[0] = 1.0
        ws = raw / raw.sum()
        agree += weighted_median(fs, ws) == brute_weighted_median(fs, ws)
    return agree == 1000, f"{agree}/1000 instances agree with the brute-force scan"


def snr_weight_algebra(ctx: Context):
    freqs = np.arange(0, 4.01, 0.05)
    power = np.zeros_like(freqs)
    power[np.isclose(freqs, 0.25)] = 1.0
    power[np.isclose(freqs, 1.0)] = 1.0
    ratio, _ = band_snr(Psd(freqs, power))
    w = weights([0.3, 0.1])
    ok = abs(ratio - 0.5) <= 1e-12 and np.all(np.abs(w - [0.75, 0.25]) <= 1e-12)
    return ok, f"SNR ratio {ratio!r}; weights {w.tolist()}"


def filter_spec(ctx: Context):
    fps = 120.0
    h = design_lowpass(fps, ctx.config.f_cut)
    f, resp = freqz(h, worN=1 << 15, fs=fps)
    mag = np.abs(resp)
    ripple = float(np.max(np.abs(mag[f <= 3.2] - 1)))
    stop_db = float(20 * np.log10(np.max(mag[f >= 5.0])))
    ok = ripple <= 0.01 and stop_db <= -40
    return ok, f"order {h.size - 1}: passband deviation {ripple:.4f} (<= 0.01), worst stopband {stop_db:.1f} dB (<= -40)"


def autocorr_accuracy(ctx: Context):
    fs = 8.0
    t = np.arange(int(30 * fs)) / fs
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        x = np.sin(2 * np.pi * 0.25 * t + rng.uniform(0, 2 * np.pi))
        # 0 dB: noise power equals the sinusoid power of 1/2
        x = x + rng.normal(0, math.sqrt(0.5), t.size)
        try:
            hits += abs(autocorr_frequency(x, fs) - 0.25) <= 0.02
        except PipelineError:
            pass
    return hits >= 95, f"{hits}/100 estimates within 0.02 Hz of 0.25 Hz (need 95)"


def drift_scenario(fps=120.0, seconds=60.0):
    t = np.arange(int(seconds * fps)) / fps
    pulse = 0.5 * np.sin(2 * np.pi * 1.2 * t)
    drift = 3.0 * np.sin(2 * np.pi * t / 40) + 1.5 * np.sin(2 * np.pi * t / 13 + 1.0) + 0.02 * t
    return t, pulse, drift


def pulse_and_drift_gain(out, t, drift):
    """Least-squares amplitude of the 1.2 Hz pulse and gain of the drift over the second half."""
    half = t.size // 2
    basis = np.column_stack([np.sin(2 * np.pi * 1.2 * t), np.cos(2 * np.pi * 1.2 * t), drift, np.ones_like(t)])[half:]
    coef, *_ = np.linalg.lstsq(basis, out[half:], rcond=None)
    return float(np.hypot(coef[0], coef[1])), float(abs(coef[2]))


def nlms_drift(ctx: Context):
    fps = 120.0
    t, pulse, drift = drift_scenario(fps)
    g = ChannelTrace(120.0 + pulse + drift, fps, "face_0_0", "G")
    r = ChannelTrace(150.0 + drift, fps, "face_0_0", "R")
    out = extract_rppg(g, r, ctx.config.lms).samples
    pulse_amp, drift_gain = pulse_and_drift_gain(out, t, drift)
    retained = pulse_amp / 0.5
    ok = retained >= 0.8 and drift_gain <= 0.1
    return ok, f"pulse retained {retained:.1%} (>= 80%), drift gain {drift_gain:.4f} (<= 0.10)"


def determinism(ctx: Context):
    from .cli import main
    from .ingest import write_frames, write_mask, write_schedule

    s = SynthScenario(stages=[[0.0, 40.0, 12.0]], width=20, height=20, face_rect=[0, 0, 10, 20],
                      chest_rect=[10, 0, 10, 20], seed=11)
    frames, mask, schedule = synth_frames(s)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        write_frames(frames, tmp / "frames")
        write_mask(mask, tmp / "mask.pgm")
        write_schedule(schedule, tmp / "schedule.csv")
        outs = []
        for threads in (1, 2):
            out = tmp / f"out{threads}"
            code = main(["analyze", "--frames", str(tmp / "frames"), "--mask", str(tmp / "mask.pgm"),
                         "--schedule", str(tmp / "schedule.csv"), "--out", str(out),
                         "--threads", str(threads), *config_args(ctx.config)])
            if code != 0:
                return False, f"analyze exited with {code} at --threads {threads}"
            outs.append(out)
        names = sorted(p.name for p in outs[0].glob("*.csv"))
        match, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], names, shallow=False)
        ok = bool(names) and not mismatch and not errors
        return ok, f"{len(match)}/{len(names)} CSV files byte-identical across --threads 1 and 2"


def config_args(cfg: PipelineConfig) -> list[str]:
    """CLI flags reproducing ``cfg``."""
    r = cfg.rate
    return [
        "--edge-px", str(cfg.edge_px), "--cell-purity", repr(cfg.cell_purity), "--f-cut", repr(cfg.f_cut),
        "--lms-taps", str(cfg.lms.filter_length), "--lms-mu", repr(cfg.lms.step_size),
        "--emd-sd", repr(r.emd.sd_threshold), "--emd-max-imfs", str(r.emd.max_imfs),
        "--emd-max-sift", str(r.emd.max_sift_iters), "--work-rate-hz", repr(r.work_rate_hz),
        "--window-s", repr(r.window.length_s), "--step-s", repr(r.window.step_s),
        "--band-lo", repr(r.band[0]), "--band-hi", repr(r.band[1]), "--min-acf-peak", repr(r.min_acf_peak),
    ]


CRITERIA = [
    Criterion(1, "end-to-end chest recovery", chest_recovery, quick=False),
    Criterion(2, "end-to-end face recovery", face_recovery, quick=False),
    Criterion(3, "SNR ordering chest > face > rPPG", snr_ordering, quick=False),
    Criterion(4, "EMD completeness", emd_completeness),
    Criterion(5, "EMD two-tone separation", emd_two_tone),
    Criterion(6, "weighted median oracle equivalence", weighted_median_oracle),
    Criterion(7, "SNR ratio and weight algebra", snr_weight_algebra),
    Criterion(8, "FIR low-pass response", filter_spec),
    Criterion(9, "autocorrelation accuracy", autocorr_accuracy),
    Criterion(10, "NLMS drift suppression", nlms_drift),
    Criterion(11, "determinism across --threads", determinism),
]


def run_criterion(c: Criterion, ctx: Context) -> tuple[bool, str]:
    try:
        return c.check(ctx)
    except Exception as exc:  # a crash is a failed criterion, reported by name
        return False, f"error: {type(exc).__name__}: {exc}"


def run_suite(ctx: Context | None = None, quick: bool = False, echo=print) -> list[tuple[Criterion, bool, str]]:
    ctx = ctx or Context()
    results = []
    for c in CRITERIA:
        if quick and not c.quick:
            continue
        ok, detail = run_criterion(c, ctx)
        results.append((c, ok, detail))
        if echo:
            echo(f"[{'PASS' if ok else 'FAIL'}] {c.number:>2} {c.name}: {detail}")
    return results
