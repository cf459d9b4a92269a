"""Sparse online Gaussian process with a capacity-bounded basis-vector set.

Samples are absorbed one at a time by a Gaussian-likelihood Bayesian update.
A sample whose feature is (nearly) spanned by the current basis vectors is
projected onto them instead of being stored; when storage exceeds the
capacity, the element whose removal perturbs the posterior mean least is
deleted.

All geometry (``Q``, novelty, projections, prediction vectors) uses the
noise-free kernel. The Gram matrix is carried as a Cholesky factor that is
extended on additions and rotated on deletions; ``Q`` is derived from it. Observation noise enters only through the likelihood
variance ``noise_var``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from scipy import linalg

from .field import SamplePoint
from .kernel import HyperParams, kernel_matrix

__all__ = [
    "SogpConfig",
    "BasisVectorSet",
    "SogpUpdateRecord",
    "SogpError",
    "sogp_init",
    "sogp_predict",
    "sogp_process",
    "bv_training_view",
    "sogp_rebuild",
    "sogp_stream",
    "prune_scores",
    "remove_element",
    "grow_inverse_gram",
    "shrink_inverse_gram",
    "check_consistency",
]

ADDED = "added"
PROJECTED = "projected"
ADDED_THEN_PRUNED = "added_then_pruned"

_GAMMA_BREAKDOWN = 1e-6
# novelty threshold relative to sigma_f^2 when none is configured
DEFAULT_RELATIVE_OMEGA = 1e-4


class SogpError(FloatingPointError):
    """Numerical breakdown inside the online update."""


@dataclass(frozen=True)
class SogpConfig:
    """Settings of the sparse online GP.

    ``novelty_threshold`` defaults to ``1e-4 * sigma_f^2`` and ``noise_var``
    to the kernel's ``sigma_n^2`` when left as None.
    """

    hp: HyperParams
    capacity: int = 100
    novelty_threshold: float | None = None
    noise_var: float | None = None
    debug: bool = False

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.novelty_threshold is not None and self.novelty_threshold < 0:
            raise ValueError("novelty threshold must be >= 0")
        if self.noise_var is not None and not self.noise_var > 0:
            raise ValueError("noise variance must be > 0")

    @property
    def omega(self) -> float:
        if self.novelty_threshold is None:
            return DEFAULT_RELATIVE_OMEGA * self.hp.sigma_f2
        return self.novelty_threshold

    @property
    def sigma0_sq(self) -> float:
        return self.hp.sigma_n2 if self.noise_var is None else self.noise_var

    def with_hp(self, hp: HyperParams) -> "SogpConfig":
        return replace(self, hp=hp)


@dataclass(frozen=True)
class BasisVectorSet:
    """Posterior state: basis inputs, their raw targets, ``alpha`` and ``C``.

    ``L`` is the lower Cholesky factor of the noise-free Gram matrix over
    ``points`` and ``Q`` its inverse. Instances are treated as immutable;
    :func:`sogp_process` returns a new one.
    """

    config: SogpConfig
    points: np.ndarray
    targets: np.ndarray
    alpha: np.ndarray
    C: np.ndarray
    L: np.ndarray
    Q: np.ndarray

    @property
    def size(self) -> int:
        return len(self.alpha)

    @property
    def hp(self) -> HyperParams:
        return self.config.hp

    def __len__(self):
        return self.size


@dataclass(frozen=True)
class SogpUpdateRecord:
    q: float
    r: float
    s: np.ndarray
    e_hat: np.ndarray
    gamma: float
    action: str
    pruned_score: float | None = None
    pruned_index: int | None = None
    scores: np.ndarray | None = field(default=None, repr=False)

    @property
    def replaced(self) -> bool:
        return self.action == ADDED_THEN_PRUNED


def sogp_init(config: SogpConfig) -> BasisVectorSet:
    d = config.hp.dim
    return BasisVectorSet(
        config,
        np.zeros((0, d)),
        np.zeros(0),
        np.zeros(0),
        np.zeros((0, 0)),
        np.zeros((0, 0)),
        np.zeros((0, 0)),
    )


def sogp_predict(bv: BasisVectorSet, X_star, include_noise: bool = False):
    """Posterior mean and latent variance (plus ``noise_var`` on request)."""
    hp = bv.hp
    X_star = np.asarray(X_star, dtype=float).reshape(-1, hp.dim)
    prior = np.full(len(X_star), hp.sigma_f2)
    if bv.size == 0:
        mean = np.zeros(len(X_star))
        var = prior
    else:
        k = kernel_matrix(X_star, bv.points, hp)
        mean = k @ bv.alpha
        var = prior + np.einsum("ij,jk,ik->i", k, bv.C, k)
        var = np.maximum(var, 0.0)
    if include_noise:
        var = var + bv.config.sigma0_sq
    return mean, var


def _chol_update(L: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Lower factor of ``L L^T + x x^T`` by a sweep of plane rotations."""
    L = L.copy()
    x = x.copy()
    n = len(x)
    for k in range(n):
        r = math.hypot(L[k, k], x[k])
        c = r / L[k, k]
        s = x[k] / L[k, k]
        L[k, k] = r
        if k + 1 < n:
            L[k + 1 :, k] = (L[k + 1 :, k] + s * x[k + 1 :]) / c
            x[k + 1 :] = c * x[k + 1 :] - s * L[k + 1 :, k]
    return L


def _chol_delete(L: np.ndarray, j: int) -> np.ndarray:
    """Cholesky factor of the Gram matrix with row and column ``j`` removed."""
    n = len(L)
    keep = np.arange(n) != j
    out = L[np.ix_(keep, keep)].copy()
    if j < n - 1:
        out[j:, j:] = _chol_update(out[j:, j:], L[j + 1 :, j])
    return out


def _inverse_from_chol(L: np.ndarray) -> np.ndarray:
    if len(L) == 0:
        return np.zeros((0, 0))
    L_inv = linalg.solve_triangular(L, np.eye(len(L)), lower=True)
    Q = L_inv.T @ L_inv
    return 0.5 * (Q + Q.T)


def grow_inverse_gram(Q: np.ndarray, e_hat: np.ndarray, gamma: float) -> np.ndarray:
    """Inverse Gram matrix after appending a point with projection ``e_hat``.

    ``[[Q + e e^T / g, -e / g], [-e^T / g, 1 / g]]``. Exact in real
    arithmetic; :func:`sogp_process` derives ``Q`` from a Cholesky factor
    instead because repeated application loses accuracy on ill-conditioned
    Gram matrices.
    """
    t = len(e_hat)
    out = np.empty((t + 1, t + 1))
    out[:t, :t] = Q + np.outer(e_hat, e_hat) / gamma
    out[:t, t] = out[t, :t] = -e_hat / gamma
    out[t, t] = 1.0 / gamma
    return out


def shrink_inverse_gram(Q: np.ndarray, j: int) -> np.ndarray:
    """Inverse Gram matrix after deleting element ``j``: Q' - Q^j Q^jT / q^j."""
    keep = np.arange(len(Q)) != j
    Qj = Q[keep, j]
    return Q[np.ix_(keep, keep)] - np.outer(Qj, Qj) / Q[j, j]


def _prune(parts, j):
    """Remove basis element ``j`` and re-update alpha and C."""
    points, targets, alpha, C, L, Q = parts
    keep = np.arange(len(alpha)) != j
    q_j = Q[j, j]
    c_j = C[j, j]
    Qj = Q[keep, j]
    Cj = C[keep, j]
    alpha_new = alpha[keep] - alpha[j] * Qj / q_j
    C_new = (
        C[np.ix_(keep, keep)]
        + c_j * np.outer(Qj, Qj) / q_j**2
        - (np.outer(Qj, Cj) + np.outer(Cj, Qj)) / q_j
    )
    L_new = _chol_delete(L, j)
    return (
        points[keep],
        targets[keep],
        alpha_new,
        0.5 * (C_new + C_new.T),
        L_new,
        _inverse_from_chol(L_new),
    )


def prune_scores(bv: BasisVectorSet) -> np.ndarray:
    """Per-element score |alpha_i| / Q_ii; low means cheap to remove."""
    return np.abs(bv.alpha) / np.diag(bv.Q)


def remove_element(bv: BasisVectorSet, j: int) -> BasisVectorSet:
    parts = _prune((bv.points, bv.targets, bv.alpha, bv.C, bv.L, bv.Q), j)
    return BasisVectorSet(bv.config, *parts)


def sogp_process(
    bv: BasisVectorSet, sample: SamplePoint | tuple, config: SogpConfig | None = None
):
    """Absorb one sample; returns the new state and an update record.

    ``sample`` is a :class:`SamplePoint` or a ``(location, value)`` pair.
    """
    config = bv.config if config is None else config
    if isinstance(sample, SamplePoint):
        x, y = sample.location, sample.value
    else:
        x, y = sample
    hp = config.hp
    x = np.asarray(x, dtype=float).reshape(1, hp.dim)
    if not np.all(np.isfinite(x)):
        raise ValueError("sample location must be finite")
    y = float(y)
    t = bv.size
    kxx = hp.sigma_f2

    l_vec = np.zeros(0)
    if t:
        k = kernel_matrix(bv.points, x, hp)[:, 0]
        Ck = bv.C @ k
        mean = float(bv.alpha @ k)
        var = kxx + float(k @ Ck)
        same = np.flatnonzero(np.all(bv.points == x, axis=1))
        if same.size:
            # exactly representable: projection is the unit vector
            e_hat = np.zeros(t)
            e_hat[same[0]] = 1.0
            gamma = 0.0
        else:
            l_vec = linalg.solve_triangular(bv.L, k, lower=True)
            e_hat = linalg.solve_triangular(bv.L.T, l_vec, lower=False)
            gamma = kxx - float(l_vec @ l_vec)
    else:
        Ck = e_hat = np.zeros(0)
        mean, var, gamma = 0.0, kxx, kxx

    if gamma < -_GAMMA_BREAKDOWN * max(1.0, kxx):
        raise SogpError(f"negative novelty {gamma:.3e}; Gram factor is inconsistent")
    gamma = max(gamma, 0.0)
    if var < -_GAMMA_BREAKDOWN * max(1.0, kxx):
        raise SogpError(
            f"negative posterior variance {var:.3e}; noise variance too small for a stable update"
        )

    denom = max(var, 0.0) + config.sigma0_sq
    q = (y - mean) / denom
    r = -1.0 / denom

    if t and gamma <= config.omega:
        s = Ck + e_hat
        alpha = bv.alpha + q * s
        C = bv.C + r * np.outer(s, s)
        C = 0.5 * (C + C.T)
        new = BasisVectorSet(config, bv.points, bv.targets, alpha, C, bv.L, bv.Q)
        return new, SogpUpdateRecord(q, r, s, e_hat, gamma, PROJECTED)

    s = np.append(Ck, 1.0)
    alpha = np.append(bv.alpha, 0.0) + q * s
    C = np.zeros((t + 1, t + 1))
    C[:t, :t] = bv.C
    C += r * np.outer(s, s)
    L = np.zeros((t + 1, t + 1))
    L[:t, :t] = bv.L
    L[t, :t] = l_vec
    L[t, t] = math.sqrt(gamma)
    Q = _inverse_from_chol(L)
    points = np.vstack([bv.points, x])
    targets = np.append(bv.targets, y)
    parts = (points, targets, alpha, 0.5 * (C + C.T), L, Q)

    if t + 1 <= config.capacity:
        new = BasisVectorSet(config, *parts)
        record = SogpUpdateRecord(q, r, s, e_hat, gamma, ADDED)
    else:
        scores = np.abs(alpha) / np.diag(Q)
        j = int(np.argmin(scores))  # first minimum: oldest element wins ties
        new = BasisVectorSet(config, *_prune(parts, j))
        record = SogpUpdateRecord(
            q, r, s, e_hat, gamma, ADDED_THEN_PRUNED, float(scores[j]), j, scores
        )
    if config.debug:
        check_consistency(new)
    return new, record


def bv_training_view(bv: BasisVectorSet):
    """Copies of the basis inputs and their stored raw targets."""
    return bv.points.copy(), bv.targets.copy()


def sogp_rebuild(points, targets, config: SogpConfig) -> BasisVectorSet:
    """Fresh state from streaming ``(point, target)`` pairs under ``config``."""
    points = np.asarray(points, dtype=float).reshape(-1, config.hp.dim)
    targets = np.asarray(targets, dtype=float).ravel()
    if len(points) != len(targets):
        raise ValueError(f"{len(points)} points but {len(targets)} targets")
    bv = sogp_init(config)
    for x, y in zip(points, targets):
        bv, _ = sogp_process(bv, (x, y), config)
    return bv


def sogp_stream(bv: BasisVectorSet, pairs: Iterable) -> tuple[BasisVectorSet, list]:
    records = []
    for pair in pairs:
        bv, rec = sogp_process(bv, pair)
        records.append(rec)
    return bv, records


def check_consistency(bv: BasisVectorSet, atol: float = 1e-6) -> None:
    """Raise :class:`SogpError` if the Gram factor or its inverse drifted.

    Checks ``L L^T`` against the kernel matrix (scaled by the signal
    variance) and ``Q`` against the inverse rebuilt from ``L``.
    """
    if bv.size == 0:
        return
    K = kernel_matrix(bv.points, bv.points, bv.hp)
    err = np.max(np.abs(bv.L @ bv.L.T - K)) / bv.hp.sigma_f2
    if err > atol:
        raise SogpError(f"Cholesky factor deviates from the Gram matrix by {err:.3e}")
    Q_ref = _inverse_from_chol(bv.L)
    q_err = np.max(np.abs(bv.Q - Q_ref)) / max(1.0, np.max(np.abs(Q_ref)))
    if q_err > atol:
        raise SogpError(f"Q deviates from the inverse Gram matrix by {q_err:.3e}")
