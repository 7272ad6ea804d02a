"""Command-line front end: synth, run, report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .cohort import CohortError, save_cohort, validate_cohort
from .kvconfig import ConfigError, parse_kv, write_kv
from .pipeline import PipelineStageError, RunConfig, emit_report, rerender_report, run_pipeline
from .synth import SynthError, config_from_kv, config_to_kv, generate_cohort, write_ground_truth


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohortsweep",
        description="Control-referenced PCA manifold classification with component sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a seeded synthetic cohort")
    p_synth.add_argument("--config", required=True, help="synth config file (key = value)")
    p_synth.add_argument("--out", required=True, help="output directory for the cohort CSVs")
    p_synth.add_argument("--seed", type=int, default=None, help="override the config seed")

    p_run = sub.add_parser("run", help="run the full analysis pipeline")
    p_run.add_argument("--config", required=True, help="run config file (key = value)")
    p_run.add_argument("--out", required=True, help="output directory for run artifacts")
    p_run.add_argument("--tuner", choices=["bayes", "grid"], default=None)
    p_run.add_argument("--mode", choices=["paper-faithful", "nested"], default=None)
    p_run.add_argument("--seed", type=int, default=None, help="override fold and tune seeds")
    p_run.add_argument("--raw-age", action="store_true", help="append raw-scale age instead of z-scored age")

    p_report = sub.add_parser("report", help="re-render tables and charts from emitted artifacts")
    p_report.add_argument("--artifacts", required=True, help="directory produced by 'run'")
    return parser


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = config_from_kv(parse_kv(args.config))
    if args.seed is not None:
        cfg.seed = args.seed
    dataset, truth = generate_cohort(cfg)
    out = Path(args.out)
    written = save_cohort(dataset, out)
    write_ground_truth(truth, out / "ground_truth.csv")
    write_kv(config_to_kv(cfg), out / "synth_manifest.txt", header="synth manifest")
    report = validate_cohort(dataset)
    for line in report.lines():
        print(line)
    for name in sorted(written):
        print(f"wrote {written[name]}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    cfg = RunConfig.from_kv(parse_kv(config_path), config_path.resolve().parent)
    if args.tuner is not None:
        cfg.tuner = args.tuner
    if args.mode is not None:
        cfg.mode = args.mode
    if args.seed is not None:
        cfg.fold_seed = args.seed
        cfg.tune_seed = args.seed
    if args.raw_age:
        cfg.raw_age = True
    artifacts = run_pipeline(cfg)
    for line in artifacts.validation.lines():
        print(line)
    for note in artifacts.notes:
        print(f"note: {note}")
    written = emit_report(artifacts, args.out)
    for name, op in sorted(artifacts.operating_points.items()):
        print(f"{name}: C0={op.c0} recall={op.point.recall_mean:.3f} accuracy={op.point.acc_mean:.3f}")
    if artifacts.combined_point is not None:
        op = artifacts.combined_point
        print(f"combined: C0={op.c0} recall={op.point.recall_mean:.3f} accuracy={op.point.acc_mean:.3f}")
    print(f"artifacts in {Path(args.out).resolve()}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    written = rerender_report(args.artifacts)
    for name in sorted(written):
        print(f"wrote {written[name]}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_report(args)
    except PipelineStageError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, CohortError, SynthError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
