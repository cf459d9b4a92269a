"""Experiment configuration: TOML file -> validated :class:`ExperimentSpec`.

The file has one table per concern (``experiment``, ``field``, ``mission``,
``sogp``, ``kernel``, ``optimizer``, ``report``) plus optional
``overrides.<strategy>`` tables that replace mission keys for one strategy.
Kernel hyperparameters are written in natural units (variances and
length-scales, not their logs). Every key is optional; :func:`defaults_reference`
renders the complete default file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .kernel import HyperParams
from .mission import STRATEGIES, MissionConfig, OptimizerSettings
from .sogp import SogpConfig

__all__ = [
    "ConfigError",
    "FieldSpec",
    "ExperimentSpec",
    "parse_config",
    "load_config",
    "defaults_reference",
]


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# -- value checkers: (path, raw) -> normalized value --------------------------


def _int(lo=None):
    def check(path, v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(path, f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            raise ConfigError(path, f"must be >= {lo}")
        return v

    return check


def _float(lo=None, strict=False, optional=False):
    def check(path, v):
        if optional and v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(path, f"expected a number, got {v!r}")
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(path, "must be finite")
        if lo is not None and (v <= lo if strict else v < lo):
            raise ConfigError(path, f"must be {'>' if strict else '>='} {lo}")
        return v

    return check


def _bool(path, v):
    if not isinstance(v, bool):
        raise ConfigError(path, f"expected true or false, got {v!r}")
    return v


def _choice(*options):
    def check(path, v):
        if v not in options:
            raise ConfigError(path, f"must be one of {list(options)}, got {v!r}")
        return v

    return check


def _optional_str(path, v):
    if v is not None and not isinstance(v, str):
        raise ConfigError(path, f"expected a string, got {v!r}")
    return v


def _optional_int(lo):
    inner = _int(lo)
    return lambda path, v: None if v is None else inner(path, v)


def _list(item, length=None, min_len=1):
    def check(path, v):
        if not isinstance(v, list):
            raise ConfigError(path, f"expected a list, got {v!r}")
        if length is not None and len(v) != length:
            raise ConfigError(path, f"expected {length} entries, got {len(v)}")
        if len(v) < min_len:
            raise ConfigError(path, f"needs at least {min_len} entries")
        return tuple(item(f"{path}[{i}]", x) for i, x in enumerate(v))

    return check


def _range_pair(path, v):
    lo, hi = _list(_float(), length=2)(path, v)
    if not lo <= hi:
        raise ConfigError(path, "lower bound exceeds upper bound")
    return (lo, hi)


def _strategies(path, v):
    names = _list(_choice(*STRATEGIES))(path, v)
    if len(set(names)) != len(names):
        raise ConfigError(path, "duplicate strategy")
    return names


# section -> key -> (checker, default, description); None means "unset"
_SCHEMA: dict[str, dict[str, tuple[Callable, Any, str]]] = {
    "experiment": {
        "strategies": (_strategies, list(STRATEGIES), "planners to compare"),
        "seeds": (_list(_int(0)), [0, 1, 2, 3, 4], "mission and field seeds"),
        "output_dir": (_optional_str, None, "result directory (--output wins)"),
        "checkpoint_interval": (_int(1), 25, "sampling steps between metrics"),
    },
    "field": {
        "raster": (_optional_str, None, "raster file; unset means synthetic"),
        "cell_size": (_float(0.0, strict=True), 1.0, "cell edge length"),
        "width": (_int(2), 48, "synthetic grid width"),
        "height": (_int(2), 48, "synthetic grid height"),
        "bump_count": (_int(1), 6, "Gaussian bumps per synthetic field"),
        "amplitude_range": (_range_pair, [-3.0, 3.0], "bump amplitude bounds"),
        "length_scale_range": (_range_pair, [5.0, 12.0], "bump width bounds"),
        "seed": (_optional_int(0), None, "field seed; unset uses the mission seed"),
        "frames": (_int(1), 1, "frames of a synthetic dynamic field"),
        "frame_length": (_int(1), 200, "sampling steps per frame"),
        "drift": (_float(0.0), 4.0, "bump drift per frame, cells"),
        "amplitude_jitter": (_float(0.0), 0.3, "relative amplitude change per frame"),
    },
    "mission": {
        "budget": (_int(1), 600, "sampling operations per mission"),
        "batch_n": (_int(1), 4, "waypoints per plan"),
        "rho0": (_float(0.0), 0.6, "re-estimation threshold; > 1 disables"),
        "noise_sd": (_float(0.0), 0.01, "measurement noise standard deviation"),
        "noise_relative": (_bool, True, "noise_sd is a fraction of the field range"),
        "start": (_list(_int(0), length=2), [0, 0], "start cell [row, col]"),
        "planning_stride": (_int(1), 4, "planning grid spacing, cells"),
        "lawnmower_spacing": (_optional_int(1), None, "unset fits the budget"),
        "lawnmower_orientation": (
            _choice("horizontal", "vertical"),
            "horizontal",
            "direction of lawnmower legs",
        ),
    },
    "sogp": {
        "capacity": (_int(1), 100, "maximum basis-vector count"),
        "novelty_threshold": (
            _float(0.0, optional=True),
            None,
            "unset means 1e-4 * sigma_f2",
        ),
        "noise_var": (
            _float(0.0, strict=True, optional=True),
            None,
            "unset means sigma_n2",
        ),
    },
    "kernel": {
        "sigma_n2": (_float(0.0, strict=True), math.exp(-2.0), "noise variance"),
        "sigma_f2": (_float(0.0, strict=True), math.exp(2.0), "signal variance"),
        "lengths": (
            _list(_float(0.0, strict=True), length=2),
            [math.e, math.e],
            "length-scale per axis [row, col]",
        ),
    },
    "optimizer": {
        "learning_rate": (_float(0.0, strict=True), 0.05, "initial ascent step"),
        "max_iters": (_int(1), 100, "iteration cap per re-estimation"),
        "tol": (_float(0.0, strict=True), 1e-5, "gradient and improvement tolerance"),
        "min_log_sigma_n2": (_float(), -6.0, "floor on the re-estimated log noise variance"),
    },
    "report": {
        "thresholds": (
            _list(_float(0.0, strict=True)),
            [0.1],
            "MSE thresholds for steps-to-threshold",
        ),
        "relative": (_bool, True, "thresholds are fractions of the field variance"),
    },
}

# noise scaling is experiment-wide, so it cannot vary per strategy
_OVERRIDABLE = {k: v for k, v in _SCHEMA["mission"].items() if k != "noise_relative"}


@dataclass(frozen=True)
class FieldSpec:
    raster: str | None = None
    cell_size: float = 1.0
    width: int = 48
    height: int = 48
    bump_count: int = 6
    amplitude_range: tuple[float, float] = (-3.0, 3.0)
    length_scale_range: tuple[float, float] = (5.0, 12.0)
    seed: int | None = None
    frames: int = 1
    frame_length: int = 200
    drift: float = 4.0
    amplitude_jitter: float = 0.3


@dataclass(frozen=True)
class ExperimentSpec:
    """A strategy x seed battery.

    ``missions`` maps each strategy to its template config; the mission seed
    is filled in per run. With ``noise_relative`` the template ``noise_sd``
    is a fraction of each field's value range; with ``threshold_relative``
    the report thresholds are fractions of the field variance.
    """

    missions: dict[str, MissionConfig]
    seeds: tuple[int, ...]
    field: FieldSpec = field(default_factory=FieldSpec)
    output_dir: str | None = None
    checkpoint_interval: int = 25
    noise_relative: bool = True
    thresholds: tuple[float, ...] = (0.1,)
    threshold_relative: bool = True

    def __post_init__(self):
        if not self.missions:
            raise ConfigError("experiment.strategies", "needs at least one strategy")
        if not self.seeds:
            raise ConfigError("experiment.seeds", "needs at least one seed")

    @property
    def strategies(self) -> tuple[str, ...]:
        return tuple(self.missions)

    def select(self, strategy: str | None = None, seed: int | None = None):
        """Copy restricted to one strategy and/or replaced by one seed."""
        missions = self.missions
        if strategy is not None:
            if strategy not in missions:
                raise ConfigError(
                    "experiment.strategies", f"{strategy!r} is not configured"
                )
            missions = {strategy: missions[strategy]}
        seeds = self.seeds if seed is None else (int(seed),)
        return ExperimentSpec(
            missions,
            seeds,
            self.field,
            self.output_dir,
            self.checkpoint_interval,
            self.noise_relative,
            self.thresholds,
            self.threshold_relative,
        )


def _section(raw: dict, name: str, schema: dict, prefix: str | None = None) -> dict:
    prefix = prefix or name
    table = raw.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError(prefix, "expected a table")
    unknown = sorted(set(table) - set(schema))
    if unknown:
        raise ConfigError(f"{prefix}.{unknown[0]}", "unknown key")
    out = {}
    for key, (check, default, _) in schema.items():
        value = table.get(key, default)
        out[key] = None if value is None else check(f"{prefix}.{key}", value)
    return out


def _mission_for(strategy, m, sogp, optimizer, checkpoint_interval):
    try:
        return MissionConfig(
            strategy=strategy,
            budget=m["budget"],
            batch_n=m["batch_n"],
            rho0=m["rho0"],
            sogp=sogp,
            optimizer=optimizer,
            noise_sd=m["noise_sd"],
            start=m["start"],
            planning_stride=m["planning_stride"],
            lawnmower_spacing=m["lawnmower_spacing"],
            lawnmower_orientation=m["lawnmower_orientation"],
            checkpoint_interval=checkpoint_interval,
        )
    except ValueError as exc:
        raise ConfigError(f"mission ({strategy})", str(exc)) from exc


def parse_config(raw: dict) -> ExperimentSpec:
    """Validate a decoded TOML document."""
    unknown = sorted(set(raw) - set(_SCHEMA) - {"overrides"})
    if unknown:
        raise ConfigError(unknown[0], "unknown section")
    sec = {name: _section(raw, name, schema) for name, schema in _SCHEMA.items()}
    exp, k = sec["experiment"], sec["kernel"]

    try:
        hp = HyperParams.from_natural(k["sigma_n2"], k["sigma_f2"], k["lengths"])
    except ValueError as exc:
        raise ConfigError("kernel", str(exc)) from exc
    s = sec["sogp"]
    sogp = SogpConfig(hp, s["capacity"], s["novelty_threshold"], s["noise_var"])
    optimizer = OptimizerSettings(**sec["optimizer"])

    overrides = raw.get("overrides", {})
    if not isinstance(overrides, dict):
        raise ConfigError("overrides", "expected a table")
    for name in overrides:
        if name not in exp["strategies"]:
            raise ConfigError(f"overrides.{name}", "strategy is not in experiment.strategies")

    missions = {}
    for strategy in exp["strategies"]:
        m = dict(sec["mission"])
        if strategy in overrides:
            given = overrides[strategy]
            if not isinstance(given, dict):
                raise ConfigError(f"overrides.{strategy}", "expected a table")
            o = _section(overrides, strategy, _OVERRIDABLE, f"overrides.{strategy}")
            m.update({key: o[key] for key in given})
        missions[strategy] = _mission_for(
            strategy, m, sogp, optimizer, exp["checkpoint_interval"]
        )

    f = sec["field"]
    field_spec = FieldSpec(**f)
    return ExperimentSpec(
        missions=missions,
        seeds=exp["seeds"],
        field=field_spec,
        output_dir=exp["output_dir"],
        checkpoint_interval=exp["checkpoint_interval"],
        noise_relative=sec["mission"]["noise_relative"],
        thresholds=sec["report"]["thresholds"],
        threshold_relative=sec["report"]["relative"],
    )


def load_config(path: str | Path) -> ExperimentSpec:
    """Read and validate a TOML experiment file."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"not valid TOML ({exc})") from exc
    spec = parse_config(raw)
    f = spec.field
    if f.raster is not None and not Path(f.raster).is_absolute():
        # raster paths are relative to the config file
        f = FieldSpec(**{**f.__dict__, "raster": str(path.parent / f.raster)})
        spec = ExperimentSpec(**{**spec.__dict__, "field": f})
    return spec


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def defaults_reference() -> str:
    """Every key with its default and meaning, as a loadable TOML document."""
    lines = []
    for name, schema in _SCHEMA.items():
        lines.append(f"[{name}]")
        for key, (_, default, doc) in schema.items():
            prefix = "# " if default is None else ""
            shown = "<unset>" if default is None else _toml_value(default)
            lines.append(f"{prefix}{key} = {shown}  # {doc}")
        lines.append("")
    lines.append("# [overrides.<strategy>] accepts any [mission] key for one strategy.")
    return "\n".join(lines) + "\n"
