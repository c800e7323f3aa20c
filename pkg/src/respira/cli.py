"""``respira`` command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import InputError, PipelineError
from .emd import EmdConfig
from .evaluate import (error_series, snr_map, write_cell_estimates, write_errors, write_estimates,
                       write_snr_map, write_summary)
from .ingest import (ensure_dir, export_traces, load_frames, load_mask, load_schedule, load_traces,
                     write_frames, write_mask, write_schedule)
from .pipeline import PipelineConfig, analyze_cells, cells_from_frames, cells_from_traces, filtered_traces
from .rate import RateConfig, WindowSpec
from .rppg import LmsConfig
from .synth import SynthScenario, load_scenario, synth_frames, write_scenario

log = logging.getLogger("respira")

EXIT_OK, EXIT_INPUT, EXIT_PIPELINE = 0, 2, 3


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--edge-px", type=int, default=10, help="sub-ROI cell edge in pixels (default 10)")
    g.add_argument("--cell-purity", type=float, default=1.0,
                   help="minimum fraction of a cell's pixels carrying its region label (default 1.0)")
    g.add_argument("--f-cut", type=float, default=4.0, help="low-pass cutoff in Hz (default 4)")
    g.add_argument("--lms-taps", type=int, default=32, help="NLMS filter length (default 32)")
    g.add_argument("--lms-mu", type=float, default=0.04, help="NLMS normalised step size (default 0.04)")
    g.add_argument("--emd-sd", type=float, default=0.2, help="sifting SD threshold (default 0.2)")
    g.add_argument("--emd-max-imfs", type=int, default=12, help="maximum IMFs per window (default 12)")
    g.add_argument("--emd-max-sift", type=int, default=10, help="maximum sifting passes per IMF (default 10)")
    g.add_argument("--work-rate-hz", type=float, default=8.0, help="decimated working rate (default 8)")
    g.add_argument("--window-s", type=float, default=30.0, help="window length in s (default 30)")
    g.add_argument("--step-s", type=float, default=1.0, help="window step in s (default 1)")
    g.add_argument("--band-lo", type=float, default=0.1, help="respiratory band lower edge in Hz (default 0.1)")
    g.add_argument("--band-hi", type=float, default=0.4, help="respiratory band upper edge in Hz (default 0.4)")
    g.add_argument("--min-acf-peak", type=float, default=0.4,
                   help="autocorrelation lobe height a window needs to count as periodic (default 0.4)")
    g.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")


def config_from_args(args) -> PipelineConfig:
    if args.threads < 1:
        raise InputError("--threads must be >= 1")
    if args.edge_px < 1:
        raise InputError("--edge-px must be >= 1")
    if not 0 < args.cell_purity <= 1:
        raise InputError("--cell-purity must lie in (0, 1]")
    rate = RateConfig(
        window=WindowSpec(args.window_s, args.step_s),
        band=(args.band_lo, args.band_hi),
        work_rate_hz=args.work_rate_hz,
        min_acf_peak=args.min_acf_peak,
        emd=EmdConfig(sd_threshold=args.emd_sd, max_sift_iters=args.emd_max_sift, max_imfs=args.emd_max_imfs),
    )
    return PipelineConfig(
        edge_px=args.edge_px,
        cell_purity=args.cell_purity,
        f_cut=args.f_cut,
        lms=LmsConfig(filter_length=args.lms_taps, step_size=args.lms_mu),
        rate=rate,
        threads=args.threads,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="respira", description="Camera-based respiratory rate estimation.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more log output")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="estimate respiratory rate from frames or traces")
    a.add_argument("--frames", type=Path, help="rawseq frame directory")
    a.add_argument("--mask", type=Path, help="region mask (PGM) for --frames")
    a.add_argument("--traces", type=Path, help="trace CSV, used instead of --frames/--mask")
    a.add_argument("--schedule", type=Path, help="ground-truth schedule CSV; enables scoring outputs")
    a.add_argument("--out", type=Path, required=True, help="output directory")
    a.add_argument("--export-traces", action="store_true",
                   help="also write the filtered (and rPPG) traces as traces.csv")
    _add_pipeline_flags(a)

    s = sub.add_parser("synth", help="write a synthetic dataset with known ground truth")
    s.add_argument("--scenario", type=Path, help="scenario TOML (default: built-in scenario)")
    s.add_argument("--out", type=Path, required=True, help="output directory")
    s.add_argument("--traces", action="store_true", help="also write region-level traces.csv")

    t = sub.add_parser("selftest", help="run the acceptance scenario suite")
    t.add_argument("--quick", action="store_true", help="skip the full end-to-end scenario")
    _add_pipeline_flags(t)
    return parser


def _load_cells(args, cfg):
    if args.traces is not None:
        if args.frames is not None or args.mask is not None:
            raise InputError("use either --traces or --frames/--mask, not both")
        return cells_from_traces(load_traces(args.traces))
    if args.frames is None:
        raise InputError("one of --frames or --traces is required")
    if args.mask is None:
        raise InputError("--frames needs --mask")
    return cells_from_frames(load_frames(args.frames), load_mask(args.mask), cfg)


def cmd_analyze(args) -> int:
    cfg = config_from_args(args)
    schedule = load_schedule(args.schedule) if args.schedule is not None else None
    cells = _load_cells(args, cfg)
    result = analyze_cells(cells, cfg)
    if all(w.missing for w in result.windows):
        raise PipelineError("every window is invalid: no fused estimate could be made")

    out = ensure_dir(args.out)
    write_estimates(result.windows, out / "estimates.csv")
    write_cell_estimates(result.cell_estimates, out / "cell_estimates.csv")
    write_snr_map(snr_map(result.cell_estimates, result.cells), out / "snr_map.csv")
    if args.export_traces:
        export_traces([tr for c in cells for tr in filtered_traces(c, cfg)], out / "traces.csv")
    if schedule is not None:
        series = error_series(result.windows, schedule)
        write_errors(series, out / "errors.csv")
        write_summary(series, out / "summary.csv")
    log.info("wrote results to %s", out)
    return EXIT_OK


def cmd_synth(args) -> int:
    scenario = load_scenario(args.scenario) if args.scenario is not None else SynthScenario()
    frames, mask, schedule = synth_frames(scenario)
    out = ensure_dir(args.out)
    write_frames(frames, out / "frames")
    write_mask(mask, out / "mask.pgm")
    write_schedule(schedule, out / "schedule.csv")
    write_scenario(scenario, out / "scenario.toml")
    if args.traces:
        from .synth import synth_traces

        traces, _ = synth_traces(scenario)
        export_traces(traces.values(), out / "traces.csv")
    log.info("wrote %d frames to %s", len(frames), out)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .acceptance import Context, run_suite

    ctx = Context(config=config_from_args(args))
    results = run_suite(ctx, quick=args.quick)
    failed = [c for c, ok, _ in results if not ok]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_OK if not failed else EXIT_PIPELINE


COMMANDS = {"analyze": cmd_analyze, "synth": cmd_synth, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"respira: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineError as exc:
        print(f"respira: pipeline failure: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
