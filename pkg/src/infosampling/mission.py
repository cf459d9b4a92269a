"""Online sampling missions: traverse, learn, re-estimate, re-plan.

A mission alternates between planning a batch of waypoints and driving
through them cell by cell. Every traversed sampleable cell yields one
measurement that is streamed into the sparse GP. When the share of basis
vectors replaced since the last plan exceeds ``rho0``, the kernel
hyperparameters are re-fitted on the basis set and a new plan is made.
The replacement count restarts at every plan and every re-estimation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import LawnmowerSpec, lawnmower_path, random_waypoints
from .dense_gp import fit, loo_log_likelihood, optimize_hyperparams
from .field import DynamicField, GridField, SamplePoint, sample
from .kernel import HyperParams
from .planner import (
    DpTable,
    WaypointPlan,
    build_planning_grid,
    order_waypoints,
    plan_waypoints,
)
from .sogp import (
    BasisVectorSet,
    SogpConfig,
    bv_training_view,
    sogp_init,
    sogp_predict,
    sogp_process,
    sogp_rebuild,
)

__all__ = [
    "STRATEGIES",
    "OptimizerSettings",
    "MissionConfig",
    "MissionTrace",
    "traverse",
    "run_mission",
    "checkpoint_metrics",
    "lawnmower_spacing_for_budget",
]

logger = logging.getLogger(__name__)

STRATEGIES = ("informative", "lawnmower", "random")

# hand-set starting kernel
DEFAULT_HP = HyperParams(-2.0, 2.0, (1.0, 1.0))
_LOG_BOUNDS = (-12.0, 12.0)


@dataclass(frozen=True)
class OptimizerSettings:
    learning_rate: float = 0.05
    max_iters: int = 100
    tol: float = 1e-5
    # below about exp(-6) the streaming covariance update loses definiteness
    min_log_sigma_n2: float = -6.0


@dataclass(frozen=True)
class MissionConfig:
    """Everything a single mission needs.

    ``rho0`` above 1 disables re-estimation. ``lawnmower_spacing`` of None
    picks the tightest spacing whose full sweep fits in ``budget``.
    """

    strategy: str = "informative"
    budget: int = 600
    batch_n: int = 4
    rho0: float = 0.6
    sogp: SogpConfig = field(default_factory=lambda: SogpConfig(DEFAULT_HP))
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    noise_sd: float = 0.0
    seed: int = 0
    start: tuple[int, int] = (0, 0)
    planning_stride: int = 4
    lawnmower_spacing: int | None = None
    lawnmower_orientation: str = "horizontal"
    checkpoint_interval: int = 25

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.batch_n < 1:
            raise ValueError("batch_n must be >= 1")
        if self.rho0 < 0:
            raise ValueError("rho0 must be >= 0")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.checkpoint_interval < 1:
            raise ValueError("checkpoint_interval must be >= 1")
        object.__setattr__(self, "start", tuple(int(v) for v in self.start))

    def with_(self, **changes) -> "MissionConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class PlanRecord:
    step: int
    plan: WaypointPlan
    table: DpTable | None = field(default=None, repr=False)


@dataclass(frozen=True)
class Reestimation:
    step: int
    old_hp: HyperParams
    new_hp: HyperParams
    objective_before: float
    objective_after: float
    status: str
    n_points: int


@dataclass
class MissionTrace:
    samples: list[SamplePoint] = field(default_factory=list)
    actions: list[str] = field(default_factory=list)
    rho_history: list[float] = field(default_factory=list)
    hp_history: list[HyperParams] = field(default_factory=list)
    bv_sizes: list[int] = field(default_factory=list)
    plans: list[PlanRecord] = field(default_factory=list)
    reestimations: list[Reestimation] = field(default_factory=list)
    metrics: list[tuple[int, float, float]] = field(default_factory=list)
    final_bv: BasisVectorSet | None = None

    def metric_arrays(self):
        m = np.array(self.metrics, dtype=float).reshape(-1, 3)
        return m[:, 0].astype(int), m[:, 1], m[:, 2]


def traverse(start, end) -> list[tuple[int, int]]:
    """Cells on the straight segment from ``start`` to ``end``.

    The start cell is excluded and the end cell included; consecutive cells
    are 8-neighbours. Steps along the dominant axis one cell at a time and
    rounds the other coordinate (half away from zero offsets toward start).
    """
    r0, c0 = (int(v) for v in start)
    r1, c1 = (int(v) for v in end)
    dr, dc = r1 - r0, c1 - c0
    n = max(abs(dr), abs(dc))
    if n == 0:
        return []
    t = np.arange(1, n + 1) / n
    rows = r0 + np.floor(dr * t + 0.5).astype(int)
    cols = c0 + np.floor(dc * t + 0.5).astype(int)
    return list(zip(rows.tolist(), cols.tolist()))


def checkpoint_metrics(bv: BasisVectorSet, truth: GridField, step: int | None = None):
    """MSE of the predicted mean and mean latent variance over sampleable cells."""
    cells = truth.sampleable_cells()
    mean, var = sogp_predict(bv, cells.astype(float))
    err = mean - truth.values[cells[:, 0], cells[:, 1]]
    return float(np.mean(err**2)), float(np.mean(var))


def _path_samples(field: GridField, start, waypoints) -> int:
    pos, count = tuple(start), 0
    for wp in waypoints:
        for cell in traverse(pos, wp):
            count += bool(field.mask[cell])
        pos = tuple(wp)
    return count


def lawnmower_spacing_for_budget(
    field: GridField, budget: int, start=(0, 0), orientation="horizontal"
) -> int:
    """Smallest spacing whose full sweep (from ``start``) fits within ``budget``."""
    across = field.height if orientation == "horizontal" else field.width
    for spacing in range(1, across + 1):
        spec = LawnmowerSpec.whole_grid(field, spacing, orientation)
        if _path_samples(field, start, lawnmower_path(spec, field)) <= budget:
            return spacing
    return across


class _Informative:
    def __init__(self, config: MissionConfig, field: GridField):
        self.config = config
        self.grid = build_planning_grid(field, config.planning_stride)

    def plan(self, bv, pos, rng):
        n = min(self.config.batch_n, len(self.grid))
        selected, table = plan_waypoints(bv, self.grid, n)
        points = [p for p in selected if p != pos]
        mi = float(np.max(table.values[n - 1]))
        if not points:
            return None, table
        return order_waypoints(pos, points, mi), table

    def reached(self, wp):
        pass


class _Random:
    def __init__(self, config: MissionConfig, field: GridField):
        self.config = config
        self.field = field

    def plan(self, bv, pos, rng):
        available = int(self.field.mask.sum()) - int(self.field.mask[pos])
        n = min(self.config.batch_n, available)
        if n < 1:
            return None, None
        points = random_waypoints(self.field, n, rng, exclude=[pos])
        return order_waypoints(pos, points), None

    def reached(self, wp):
        pass


class _Lawnmower:
    """Walks one fixed sweep; a re-plan resumes at the next unreached waypoint."""

    def __init__(self, config: MissionConfig, field: GridField):
        spacing = config.lawnmower_spacing or lawnmower_spacing_for_budget(
            field, config.budget, config.start, config.lawnmower_orientation
        )
        spec = LawnmowerSpec.whole_grid(field, spacing, config.lawnmower_orientation)
        self.path = lawnmower_path(spec, field)
        self.spacing = spacing
        self.next = 0

    def plan(self, bv, pos, rng):
        if self.next >= len(self.path):
            # sweep finished: run it again in reverse
            self.path = self.path[::-1]
            self.next = 0
        rest = self.path[self.next :]
        return WaypointPlan([pos] + rest), None

    def reached(self, wp):
        self.next += 1


_PLANNERS = {"informative": _Informative, "random": _Random, "lawnmower": _Lawnmower}


def _reestimate(bv: BasisVectorSet, config: MissionConfig, step: int):
    X, y = bv_training_view(bv)
    old = bv.hp
    before = loo_log_likelihood(fit(X, y, old))
    opt = config.optimizer
    lo = np.full(old.vector.size, _LOG_BOUNDS[0])
    lo[0] = opt.min_log_sigma_n2
    hi = np.full(old.vector.size, _LOG_BOUNDS[1])
    res = optimize_hyperparams(
        X,
        y,
        old,
        learning_rate=opt.learning_rate,
        max_iters=opt.max_iters,
        tol=opt.tol,
        bounds=(lo, hi),
    )
    new_bv = sogp_rebuild(X, y, bv.config.with_hp(res.hp))
    event = Reestimation(step, old, res.hp, before, res.objective, res.status, len(y))
    logger.debug("step %d: re-estimated %s -> %s", step, old, res.hp)
    return new_bv, event


def run_mission(config: MissionConfig, env: DynamicField | GridField) -> MissionTrace:
    """Run one sampling mission and return its full trace."""
    if isinstance(env, GridField):
        env = DynamicField.static(env)
    geom = env.geometry
    if not geom.is_sampleable(config.start):
        raise ValueError(f"start {config.start} is not a sampleable cell")
    rng = np.random.default_rng(config.seed)
    planner = _PLANNERS[config.strategy](config, geom)
    capacity = config.sogp.capacity
    bv = sogp_init(config.sogp)
    trace = MissionTrace()
    trace.metrics.append((0, *checkpoint_metrics(bv, env.frame_at(0))))

    pos = config.start
    step = 0
    idle_rounds = 0
    while step < config.budget:
        replaced = 0
        plan, table = planner.plan(bv, pos, rng)
        if plan is None:
            raise RuntimeError(f"{config.strategy} planner produced no waypoints")
        trace.plans.append(PlanRecord(step, plan, table))
        step_at_plan = step
        interrupted = False
        for wp in plan.waypoints[1:]:
            for cell in traverse(pos, wp):
                pos = cell
                if not geom.mask[cell]:
                    continue
                pt = sample(env, cell, step, config.noise_sd, rng)
                bv, rec = sogp_process(bv, pt)
                step += 1
                if rec.replaced:
                    replaced += 1
                rho = min(replaced / capacity, 1.0)
                trace.samples.append(pt)
                trace.actions.append(rec.action)
                trace.rho_history.append(rho)
                trace.hp_history.append(bv.hp)
                trace.bv_sizes.append(bv.size)
                if rho > config.rho0:
                    bv, event = _reestimate(bv, config, step)
                    trace.reestimations.append(event)
                    replaced = 0
                    interrupted = True
                if step % config.checkpoint_interval == 0 or step == config.budget:
                    trace.metrics.append(
                        (step, *checkpoint_metrics(bv, env.frame_at(step)))
                    )
                if interrupted or step >= config.budget:
                    break
            if interrupted or step >= config.budget:
                break
            pos = tuple(wp)
            planner.reached(wp)
        idle_rounds = idle_rounds + 1 if step == step_at_plan else 0
        if idle_rounds > 3:
            raise RuntimeError("mission is not making progress")
    trace.final_bv = bv
    return trace
