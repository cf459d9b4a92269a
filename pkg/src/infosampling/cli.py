"""Command-line entry point: ``infosampling {run,report,synth,validate}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentSpec, defaults_reference, load_config, parse_config
from .experiment import build_environment, compare_report, format_report, run_experiment
from .field import FieldError, write_raster
from .mission import STRATEGIES

__all__ = ["main", "build_parser"]

log = logging.getLogger("infosampling")


def _spec(args) -> ExperimentSpec:
    spec = load_config(args.config) if args.config else parse_config({})
    return spec.select(getattr(args, "strategy", None), getattr(args, "seed", None))


def _thresholds(args, spec: ExperimentSpec):
    thresholds = tuple(args.threshold) if args.threshold else spec.thresholds
    relative = spec.threshold_relative and not args.absolute
    return thresholds, relative


def _print_report(out: Path, thresholds, relative, strategies=None) -> None:
    name = "aggregate_relative.csv" if relative else "aggregate.csv"
    report = compare_report(out / name, thresholds, strategies)
    unit = "fraction of field variance" if relative else "absolute MSE"
    print(f"steps to reach MSE threshold ({unit}):")
    print(format_report(report, thresholds))


def cmd_run(args) -> int:
    spec = _spec(args)
    out = Path(args.output or spec.output_dir or "results")
    n = len(spec.strategies) * len(spec.seeds)
    log.info("running %d missions into %s", n, out)
    result = run_experiment(spec, out)
    print(f"wrote {len(result.files)} files to {out}")
    _print_report(out, spec.thresholds, spec.threshold_relative)
    return 0


def cmd_report(args) -> int:
    spec = load_config(args.config) if args.config else parse_config({})
    out = Path(args.output or spec.output_dir or "results")
    thresholds, relative = _thresholds(args, spec)
    strategies = [args.strategy] if args.strategy else None
    _print_report(out, thresholds, relative, strategies)
    return 0


def cmd_synth(args) -> int:
    spec = load_config(args.config) if args.config else parse_config({})
    if spec.field.raster is not None:
        raise ConfigError("field.raster", "synth needs a synthetic field section")
    seed = 0 if args.seed is None else args.seed
    env = build_environment(spec.field, seed)
    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(env.frames):
        suffix = f"_frame{k}" if len(env.frames) > 1 else ""
        path = out / f"field_seed{seed}{suffix}.txt"
        write_raster(path, frame.values, frame.mask)
        print(path)
    return 0


def cmd_validate(args) -> int:
    if args.print_defaults:
        sys.stdout.write(defaults_reference())
        return 0
    if not args.config:
        raise ConfigError("--config", "required unless --print-defaults is given")
    spec = load_config(args.config)
    if spec.field.raster is not None:
        build_environment(spec.field, spec.seeds[0])
    print(
        f"ok: {len(spec.strategies)} strategies x {len(spec.seeds)} seeds, "
        f"budget {max(m.budget for m in spec.missions.values())}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="infosampling",
        description="Sparse-GP field mapping with informative and baseline planners.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, strategy=True):
        sp.add_argument("--config", type=Path, help="TOML experiment file")
        sp.add_argument("--output", type=Path, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, help="run this seed only")
        if strategy:
            sp.add_argument("--strategy", choices=STRATEGIES, help="run this strategy only")

    run = sub.add_parser("run", help="run missions and write CSVs and rasters")
    common(run)
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="steps-to-threshold table from a finished run")
    common(rep, seed=False)
    rep.add_argument("--threshold", type=float, action="append", help="repeatable")
    rep.add_argument(
        "--absolute", action="store_true", help="thresholds are plain MSE values"
    )
    rep.set_defaults(func=cmd_report)

    syn = sub.add_parser("synth", help="write a synthetic field raster")
    common(syn, strategy=False)
    syn.set_defaults(func=cmd_synth)

    val = sub.add_parser("validate", help="check a config file")
    common(val, seed=False, strategy=False)
    val.add_argument(
        "--print-defaults", action="store_true", help="print every key with its default"
    )
    val.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FieldError, KeyError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
