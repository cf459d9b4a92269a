"""Strategy x seed batteries: run missions, write CSVs and rasters, summarize.

Output layout for a run into ``out/``::

    out/<strategy>_seed<k>_trace.csv      one row per sampling operation
    out/<strategy>_seed<k>_mse.csv        step, mse, mean_var per checkpoint
    out/<strategy>_seed<k>_mean.txt       final predicted map (raster)
    out/<strategy>_seed<k>_variance.txt   final latent-variance map (raster)
    out/aggregate.csv                     median mse per step, one column per strategy
    out/aggregate_relative.csv            same, for mse / current-frame variance

All numbers are written with shortest round-trip formatting and no
timestamps, so identical specs give byte-identical files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import ExperimentSpec, FieldSpec
from .field import (
    DynamicField,
    GridField,
    format_float,
    load_field,
    synth_dynamic_field,
    write_raster,
)
from .mission import MissionTrace, run_mission
from .sogp import sogp_predict

__all__ = [
    "ExperimentResult",
    "build_environment",
    "run_experiment",
    "read_table",
    "steps_to_threshold",
    "compare_report",
    "format_report",
    "TRACE_COLUMNS",
]

TRACE_COLUMNS = (
    "step",
    "row",
    "col",
    "value",
    "rho",
    "action",
    "bv_size",
    "log_sigma_n2",
    "log_sigma_f2",
    "log_length_row",
    "log_length_col",
)


@dataclass
class ExperimentResult:
    output_dir: Path
    files: list[Path]
    traces: dict[tuple[str, int], MissionTrace]
    variances: dict[int, list[float]]  # seed -> variance of each frame


def build_environment(spec: FieldSpec, seed: int) -> DynamicField:
    """Ground truth for one seed: a raster (static) or a synthetic field."""
    if spec.raster is not None:
        return DynamicField.static(load_field(spec.raster, spec.cell_size))
    return synth_dynamic_field(
        spec.seed if spec.seed is not None else seed,
        spec.width,
        spec.height,
        n_frames=spec.frames,
        frame_length=spec.frame_length,
        bump_count=spec.bump_count,
        amplitude_range=spec.amplitude_range,
        length_scale_range=spec.length_scale_range,
        drift=spec.drift,
        amplitude_jitter=spec.amplitude_jitter,
        cell_size=spec.cell_size,
    )


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format_float(v)


def _trace_rows(trace: MissionTrace):
    for pt, action, rho, hp, size in zip(
        trace.samples, trace.actions, trace.rho_history, trace.hp_history, trace.bv_sizes
    ):
        r, c = (int(v) for v in pt.location)
        yield [_fmt(v) for v in (pt.step, r, c, pt.value, rho, action, size, *hp.vector)]


def _final_maps(trace: MissionTrace, geom: GridField):
    rows, cols = np.mgrid[0 : geom.height, 0 : geom.width]
    cells = np.column_stack([rows.ravel(), cols.ravel()]).astype(float)
    mean, var = sogp_predict(trace.final_bv, cells)
    return mean.reshape(geom.shape), var.reshape(geom.shape)


def _median_table(curves: dict[str, list[np.ndarray]], steps: np.ndarray):
    cols = {name: np.median(np.vstack(c), axis=0) for name, c in curves.items()}
    return [
        [str(int(s))] + [format_float(cols[name][i]) for name in curves]
        for i, s in enumerate(steps)
    ]


def run_experiment(spec: ExperimentSpec, output_dir: str | Path | None = None):
    """Run every (strategy, seed) mission of ``spec`` and write the results."""
    out = Path(output_dir or spec.output_dir or "results")
    out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    traces: dict[tuple[str, int], MissionTrace] = {}
    envs = {seed: build_environment(spec.field, seed) for seed in spec.seeds}
    variances = {s: [f.variance() for f in env.frames] for s, env in envs.items()}
    curves: dict[str, list[np.ndarray]] = {name: [] for name in spec.strategies}
    rel_curves: dict[str, list[np.ndarray]] = {name: [] for name in spec.strategies}
    steps = None

    for name, template in spec.missions.items():
        for seed in spec.seeds:
            env = envs[seed]
            noise = template.noise_sd
            if spec.noise_relative:
                noise *= env.frames[0].value_range()
            config = replace(template, seed=seed, noise_sd=noise)
            trace = run_mission(config, env)
            traces[name, seed] = trace
            stem = out / f"{name}_seed{seed}"

            path = Path(f"{stem}_trace.csv")
            _write_csv(path, TRACE_COLUMNS, _trace_rows(trace))
            files.append(path)

            s, mse, var = trace.metric_arrays()
            path = Path(f"{stem}_mse.csv")
            _write_csv(
                path,
                ("step", "mse", "mean_var"),
                ([_fmt(a), _fmt(b), _fmt(c)] for a, b, c in zip(s, mse, var)),
            )
            files.append(path)
            if steps is None:
                steps = s
            elif not np.array_equal(steps, s):
                raise RuntimeError("missions disagree on checkpoint steps")
            curves[name].append(mse)
            frame_var = np.array([env.frame_at(int(t)).variance() for t in s])
            rel_curves[name].append(mse / frame_var)

            mean_map, var_map = _final_maps(trace, env.geometry)
            for kind, grid in (("mean", mean_map), ("variance", var_map)):
                path = Path(f"{stem}_{kind}.txt")
                write_raster(path, grid, env.geometry.mask)
                files.append(path)

    header = ("step", *spec.strategies)
    for fname, table in (("aggregate.csv", curves), ("aggregate_relative.csv", rel_curves)):
        path = out / fname
        _write_csv(path, header, _median_table(table, steps))
        files.append(path)
    return ExperimentResult(out, files, traces, variances)


def read_table(path: str | Path) -> dict[str, np.ndarray]:
    """Numeric CSV with a header row, as a column-name -> array mapping."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body], dtype=float)
    data = data.reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def steps_to_threshold(steps, mse, threshold: float) -> float:
    """First checkpoint step with ``mse <= threshold``; ``inf`` if never."""
    steps = np.asarray(steps)
    hit = np.flatnonzero(np.asarray(mse) <= threshold)
    return float(steps[hit[0]]) if hit.size else math.inf


def compare_report(aggregate, thresholds, strategies=None) -> dict[str, list[float]]:
    """Steps-to-threshold per strategy for each threshold.

    ``aggregate`` is a path to an aggregate CSV or a table from
    :func:`read_table`. ``strategies`` defaults to every non-step column;
    naming a strategy that has no column raises ``KeyError``.
    """
    table = read_table(aggregate) if isinstance(aggregate, (str, Path)) else aggregate
    if "step" not in table:
        raise KeyError("aggregate has no 'step' column")
    names = [c for c in table if c != "step"] if strategies is None else list(strategies)
    missing = [n for n in names if n not in table]
    if missing:
        raise KeyError(f"aggregate has no column for strategy {missing[0]!r}")
    return {
        n: [steps_to_threshold(table["step"], table[n], t) for t in thresholds]
        for n in names
    }


def format_report(report: dict[str, list[float]], thresholds) -> str:
    """Plain-text table; unreached thresholds print as the infinity sign."""
    head = ["strategy"] + [f"mse<={format_float(t)}" for t in thresholds]
    rows = [
        [name] + ["∞" if math.isinf(v) else str(int(v)) for v in vals]
        for name, vals in report.items()
    ]
    widths = [max(len(r[i]) for r in [head, *rows]) for i in range(len(head))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip()
        for r in [head, *rows]
    )
