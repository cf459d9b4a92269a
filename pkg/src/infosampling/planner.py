"""Mutual-information waypoint selection and open-path ordering.

The planner scores batches of grid cells by the information their
measurements carry about the rest of the planning grid, using the SOGP
posterior as the joint Gaussian. Selection is a stage-wise dynamic program:
the value of a state at stage ``i`` is the best accumulated information of a
chain of ``i`` distinct cells ending at that state, where each new cell is
scored conditionally on the chain that precedes it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .field import GridField
from .kernel import kernel_matrix
from .sogp import BasisVectorSet

__all__ = [
    "PlanningError",
    "PlanningGrid",
    "DpTable",
    "WaypointPlan",
    "build_planning_grid",
    "gaussian_entropy",
    "posterior_cov",
    "mutual_information",
    "conditional_mutual_information",
    "plan_waypoints",
    "order_waypoints",
    "path_length",
]

DET_FLOOR = 1e-12
TIE_TOL = 1e-9
_JITTER_TRIES = 6
_LOG_2PIE = math.log(2 * math.pi * math.e)


class PlanningError(ValueError):
    pass


@dataclass(frozen=True)
class PlanningGrid:
    candidates: np.ndarray
    source_dims: tuple[int, int]
    stride: int

    def __len__(self):
        return len(self.candidates)


@dataclass
class DpTable:
    """Stage values ``V_i(x)`` and predecessor indices (-1 where undefined).

    ``chains[i][x]`` is the tuple of candidate indices that realizes
    ``values[i, x]``, ending at ``x``.
    """

    values: np.ndarray
    back_refs: np.ndarray
    chains: list[dict[int, tuple[int, ...]]] = field(repr=False)

    @property
    def stages(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class WaypointPlan:
    waypoints: list[tuple[int, int]]
    planned_mi: float = float("nan")

    @property
    def length(self) -> float:
        return path_length(self.waypoints)


def build_planning_grid(
    field: GridField, stride: int, offset: int | None = None
) -> PlanningGrid:
    """Every ``stride``-th sampleable cell along both axes.

    The lattice starts at ``offset`` (default ``stride // 2``, which centres
    the candidates inside their ``stride x stride`` blocks).
    """
    if stride < 1:
        raise PlanningError("stride must be >= 1")
    if offset is None:
        offset = stride // 2
    rows = np.arange(min(offset, field.height - 1), field.height, stride)
    cols = np.arange(min(offset, field.width - 1), field.width, stride)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    cells = np.column_stack([rr.ravel(), cc.ravel()])
    cells = cells[field.mask[cells[:, 0], cells[:, 1]]]
    if len(cells) == 0:
        raise PlanningError("planning grid has zero sampleable candidates")
    return PlanningGrid(cells, field.shape, stride)


def gaussian_entropy(cov) -> float:
    """Differential entropy of a Gaussian, with the determinant floored."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    k = cov.shape[0]
    if cov.shape != (k, k) or k == 0:
        raise ValueError("covariance must be a non-empty square matrix")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10 * scale):
        raise ValueError("covariance is not symmetric")
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        logdet = -np.inf
    return 0.5 * (k * _LOG_2PIE + max(logdet, math.log(DET_FLOOR)))


def _locations(P, dim):
    P = np.asarray(P, dtype=float)
    return P.reshape(-1, dim)


def _joint_cov(bv: BasisVectorSet, X) -> np.ndarray:
    """SOGP posterior covariance over ``X`` with diagonal jitter."""
    hp = bv.hp
    S = kernel_matrix(X, X, hp)
    if bv.size:
        k = kernel_matrix(X, bv.points, hp)
        S += k @ bv.C @ k.T
    S = 0.5 * (S + S.T)
    S[np.diag_indices_from(S)] += hp.jitter
    return S


def posterior_cov(bv: BasisVectorSet, A, B=None) -> np.ndarray:
    """Posterior covariance of ``A`` given noise-free observations at ``B``."""
    dim = bv.hp.dim
    A = _locations(A, dim)
    if len(A) == 0:
        raise ValueError("A must be non-empty")
    B = np.zeros((0, dim)) if B is None else _locations(B, dim)
    S = _joint_cov(bv, np.vstack([A, B]))
    a = len(A)
    S_aa = S[:a, :a]
    if len(B) == 0:
        return S_aa
    S_ab = S[:a, a:]
    try:
        cho = linalg.cho_factor(S[a:, a:], lower=True)
    except linalg.LinAlgError as exc:
        raise PlanningError("conditioning block is singular") from exc
    out = S_aa - S_ab @ linalg.cho_solve(cho, S_ab.T)
    return 0.5 * (out + out.T)


def conditional_mutual_information(bv: BasisVectorSet, A, B, C=None) -> float:
    """I(Z_A; Z_B | Z_C) = H(A | C) - H(A | B, C), clamped at zero."""
    dim = bv.hp.dim
    C = np.zeros((0, dim)) if C is None else _locations(C, dim)
    BC = np.vstack([_locations(B, dim), C])
    h_a = gaussian_entropy(posterior_cov(bv, A, C if len(C) else None))
    h_ab = gaussian_entropy(posterior_cov(bv, A, BC))
    return max(h_a - h_ab, 0.0)


def mutual_information(bv: BasisVectorSet, A, B) -> float:
    """I(Z_A; Z_B) = H(A) - H(A | B), clamped at zero."""
    return conditional_mutual_information(bv, A, B)


def _factor_with_jitter(S: np.ndarray, jitter: float, tries: int = _JITTER_TRIES):
    """Cholesky of ``S``, adding diagonal jitter in decades until it succeeds.

    Rounding in the SOGP posterior can leave a tiny negative eigenvalue;
    the returned ``S`` includes whatever extra jitter was needed.
    """
    extra = 0.0
    for _ in range(tries + 1):
        try:
            S_try = S + extra * np.eye(len(S)) if extra else S
            return S_try, linalg.cho_factor(S_try, lower=True)
        except linalg.LinAlgError:
            extra = jitter * 10.0 if extra == 0.0 else extra * 10.0
    raise PlanningError("planning covariance is singular")


def _argmax_first(values: np.ndarray, tol: float = TIE_TOL) -> int:
    """Lowest index whose value is within ``tol`` of the maximum."""
    best = np.max(values)
    return int(np.flatnonzero(values >= best - tol * max(1.0, abs(best)))[0])


def _half_log_ratio(num, den):
    num = np.maximum(num, DET_FLOOR)
    den = np.maximum(den, DET_FLOOR)
    return np.maximum(0.5 * (np.log(num) - np.log(den)), 0.0)


def plan_waypoints(bv: BasisVectorSet, grid: PlanningGrid, n: int):
    """Select ``n`` candidate cells by the chain-conditioned MI recursion.

    Returns the selected candidate locations (in stage order) and the
    :class:`DpTable`. Stage 1 scores ``I(x; X \\ x)``; stage ``i`` extends the
    chain ending at each predecessor with the candidate maximizing
    ``I(x; X \\ (chain + x) | chain)``. Because the conditioning set of the
    second entropy is always ``X \\ x``, that term is shared by every chain
    and computed once from the joint precision matrix.
    """
    N = len(grid)
    if not 1 <= n <= N:
        raise PlanningError(f"cannot select {n} waypoints from {N} candidates")
    X = grid.candidates.astype(float)
    S, cho = _factor_with_jitter(_joint_cov(bv, X), bv.hp.jitter)
    precision_diag = np.diag(linalg.cho_solve(cho, np.eye(N)))
    resid = 1.0 / precision_diag  # var(x | X \ x)
    prior = np.diag(S).copy()

    values = np.full((n, N), -np.inf)
    back = np.full((n, N), -1, dtype=int)
    values[0] = _half_log_ratio(prior, resid)
    chains: list[dict[int, tuple[int, ...]]] = [{x: (x,) for x in range(N)}]

    for i in range(1, n):
        stage: dict[int, tuple[int, ...]] = {}
        for p in range(N):
            v_prev = values[i - 1, p]
            if not np.isfinite(v_prev):
                continue
            chain = chains[i - 1][p]
            c = list(chain)
            S_xc = S[:, c]
            cc = linalg.cho_factor(S[np.ix_(c, c)], lower=True)
            cond = prior - np.einsum("ij,ji->i", S_xc, linalg.cho_solve(cc, S_xc.T))
            gain = _half_log_ratio(cond, resid)
            cand = v_prev + gain
            cand[c] = -np.inf
            cur = values[i]
            unset = ~np.isfinite(cur)
            margin = TIE_TOL * np.maximum(1.0, np.abs(np.where(unset, 0.0, cur)))
            # earlier predecessors keep ties
            better = np.isfinite(cand) & (unset | (cand > cur + margin))
            for x in np.flatnonzero(better):
                values[i, x] = cand[x]
                back[i, x] = p
                stage[int(x)] = chain + (int(x),)
        chains.append(stage)

    best = _argmax_first(values[n - 1])
    selected = chains[n - 1][best]
    table = DpTable(values, back, chains)
    return [tuple(int(v) for v in grid.candidates[j]) for j in selected], table


def path_length(points) -> float:
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(P) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(P, axis=0), axis=1)))


def _nearest_neighbor(D: np.ndarray) -> list[int]:
    n = len(D)
    order = [0]
    left = set(range(1, n))
    while left:
        last = order[-1]
        nxt = min(left, key=lambda j: (D[last, j], j))
        order.append(nxt)
        left.remove(nxt)
    return order


def _two_opt(order: list[int], D: np.ndarray) -> list[int]:
    """Segment reversal on an open path whose first node is pinned."""
    order = list(order)
    n = len(order)
    improved = True
    while improved:
        improved = False
        for i in range(1, n - 1):
            for j in range(i + 1, n):
                a, b = order[i - 1], order[i]
                c = order[j]
                d = order[j + 1] if j + 1 < n else None
                before = D[a, b] + (D[c, d] if d is not None else 0.0)
                after = D[a, c] + (D[b, d] if d is not None else 0.0)
                if after < before - 1e-12:
                    order[i : j + 1] = order[i : j + 1][::-1]
                    improved = True
    return order


def order_waypoints(start, points, planned_mi: float = float("nan")) -> WaypointPlan:
    """Short open path from ``start`` through every point (no return leg).

    Nearest-neighbour construction followed by 2-opt, also 2-opt from the
    given order; the shorter result is kept.
    """
    start = tuple(start)
    pts = [tuple(p) for p in points]
    if not pts:
        raise PlanningError("nothing to order")
    nodes = np.array([start] + pts, dtype=float)
    D = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=-1)
    best = None
    for init in (_nearest_neighbor(D), list(range(len(nodes)))):
        order = _two_opt(init, D)
        length = sum(D[a, b] for a, b in itertools.pairwise(order))
        if best is None or length < best[0] - 1e-12:
            best = (length, order)
    order = best[1]
    return WaypointPlan([start] + [pts[k - 1] for k in order[1:]], planned_mi)
