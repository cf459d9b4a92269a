"""Exact GP regression and leave-one-out hyperparameter estimation.

The LOO predictive moments come from the inverse of the full training
covariance (inversion by partitioning), so one factorization serves all
``n`` held-out cases.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .kernel import HyperParams, kernel_matrix, kernel_matrix_grad

__all__ = [
    "DenseGpModel",
    "LooWorkspace",
    "HyperOptResult",
    "FactorizationError",
    "fit",
    "predict",
    "loo_stats",
    "loo_log_likelihood",
    "loo_gradient",
    "optimize_hyperparams",
]

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2 * math.pi)
_NEG_VAR_CLAMP = 1e-9


class FactorizationError(np.linalg.LinAlgError):
    """Training covariance is not positive definite even after jitter."""


@dataclass(frozen=True)
class DenseGpModel:
    X: np.ndarray
    y: np.ndarray
    hp: HyperParams
    K_inv: np.ndarray
    alpha: np.ndarray

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class LooWorkspace:
    loo_means: np.ndarray
    loo_vars: np.ndarray
    Z: list[np.ndarray] = field(default_factory=list)


def _training_cov(X, hp):
    K = kernel_matrix(X, X, hp, include_noise=True)
    K[np.diag_indices_from(K)] += hp.jitter
    return K


def fit(X, y, hp: HyperParams) -> DenseGpModel:
    """Factorize the noisy training covariance and solve for the weights."""
    X = np.asarray(X, dtype=float).reshape(-1, hp.dim)
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y):
        raise ValueError(f"{len(X)} inputs but {len(y)} targets")
    if len(y) == 0:
        return DenseGpModel(X, y, hp, np.zeros((0, 0)), np.zeros(0))
    K = _training_cov(X, hp)
    try:
        cho = linalg.cho_factor(K, lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError(
            "training covariance not positive definite (duplicate inputs?)"
        ) from exc
    K_inv = linalg.cho_solve(cho, np.eye(len(y)))
    K_inv = 0.5 * (K_inv + K_inv.T)
    alpha = linalg.cho_solve(cho, y)
    return DenseGpModel(X, y, hp, K_inv, alpha)


def predict(model: DenseGpModel, X_star):
    """Posterior mean and (noise-free) covariance at ``X_star``."""
    hp = model.hp
    X_star = np.asarray(X_star, dtype=float).reshape(-1, hp.dim)
    K_ss = kernel_matrix(X_star, X_star, hp)
    if model.n == 0:
        return np.zeros(len(X_star)), K_ss
    K_sx = kernel_matrix(X_star, model.X, hp)
    mean = K_sx @ model.alpha
    cov = K_ss - K_sx @ model.K_inv @ K_sx.T
    cov = 0.5 * (cov + cov.T)
    diag = np.diag(cov).copy()
    if np.any(diag < -_NEG_VAR_CLAMP * max(1.0, hp.sigma_f2)):
        raise FloatingPointError(f"negative predictive variance {diag.min():.3e}")
    cov[np.diag_indices_from(cov)] = np.maximum(diag, 0.0)
    return mean, cov


def loo_stats(model: DenseGpModel, with_gradients: bool = False) -> LooWorkspace:
    """Leave-one-out means and variances for every training case at once."""
    if model.n < 2:
        raise ValueError("leave-one-out needs at least two training points")
    d = np.diag(model.K_inv)
    if np.any(d <= 0):
        raise FloatingPointError("non-positive diagonal in inverse covariance")
    means = model.y - model.alpha / d
    variances = 1.0 / d
    Z = []
    if with_gradients:
        for j in range(model.hp.n_params):
            dK = kernel_matrix_grad(model.X, model.hp, j)
            if j == 1:
                # the jitter scales with sigma_f^2
                dK[np.diag_indices_from(dK)] += model.hp.jitter
            Z.append(model.K_inv @ dK)
    return LooWorkspace(means, variances, Z)


def _loo_from_stats(y, ws: LooWorkspace) -> float:
    v = ws.loo_vars
    r = y - ws.loo_means
    return float(np.sum(-0.5 * np.log(v) - r**2 / (2 * v) - 0.5 * _LOG_2PI))


def loo_log_likelihood(model: DenseGpModel) -> float:
    """Sum over training cases of the held-out Gaussian log predictive density."""
    return _loo_from_stats(model.y, loo_stats(model))


def loo_gradient(model: DenseGpModel) -> np.ndarray:
    """Gradient of :func:`loo_log_likelihood` w.r.t. the log hyperparameters."""
    ws = loo_stats(model, with_gradients=True)
    alpha = model.alpha
    d = np.diag(model.K_inv)
    grad = np.empty(len(ws.Z))
    for j, Zj in enumerate(ws.Z):
        Z_alpha = Zj @ alpha
        # diag(Zj @ K_inv) without forming the product
        ZK_diag = np.einsum("ij,ji->i", Zj, model.K_inv)
        grad[j] = np.sum(
            (alpha * Z_alpha - 0.5 * (1 + alpha**2 / d) * ZK_diag) / d
        )
    return grad


@dataclass
class HyperOptResult:
    """Outcome of :func:`optimize_hyperparams`.

    ``history`` holds the objective after every accepted step, starting with
    the value at ``hp0``. ``status`` is one of ``"gradient"``,
    ``"objective"``, ``"max_iters"``, ``"step"`` or ``"factorization_failure"``.
    """

    hp: HyperParams
    objective: float
    history: list[float]
    n_iter: int
    status: str

    @property
    def converged(self) -> bool:
        return self.status in ("gradient", "objective")


def _objective(X, y, theta):
    model = fit(X, y, HyperParams.from_vector(theta))
    return loo_log_likelihood(model), model


def optimize_hyperparams(
    X,
    y,
    hp0: HyperParams,
    learning_rate: float = 0.05,
    max_iters: int = 100,
    tol: float = 1e-5,
    max_step: float = 1.0,
    bounds: tuple = (-12.0, 12.0),
    max_halvings: int = 30,
    ftol: float | None = None,
) -> HyperOptResult:
    """Maximize the LOO log-likelihood by gradient ascent in log space.

    Each step proposes ``theta + lr * grad``; a proposal that does not
    increase the objective (or fails to factorize) is retried with the rate
    halved, and an accepted step grows the rate by 1.5x. Proposals are
    clipped to a per-step length of ``max_step`` and to ``bounds``, a
    ``(lower, upper)`` pair of scalars or of per-parameter arrays.

    Stops when the gradient norm drops below ``tol`` or an accepted step
    improves the objective by less than ``ftol`` (default ``tol``).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < 2:
        raise ValueError("hyperparameter estimation needs at least two points")
    ftol = tol if ftol is None else ftol
    theta = hp0.vector
    f, model = _objective(X, y, theta)
    history = [f]
    lr = learning_rate
    status = "max_iters"
    it = 0
    for it in range(1, max_iters + 1):
        grad = loo_gradient(model)
        if np.linalg.norm(grad) < tol:
            status = "gradient"
            break
        accepted = False
        failed = False
        for _ in range(max_halvings):
            step = lr * grad
            norm = np.linalg.norm(step)
            if norm > max_step:
                step *= max_step / norm
            proposal = np.clip(theta + step, *bounds)
            try:
                f_new, model_new = _objective(X, y, proposal)
            except (FactorizationError, FloatingPointError):
                failed = True
                lr *= 0.5
                continue
            if np.isfinite(f_new) and f_new > f:
                accepted = True
                break
            lr *= 0.5
        if not accepted:
            status = "factorization_failure" if failed else "step"
            if failed:
                warnings.warn(
                    "hyperparameter search stopped on a factorization failure; "
                    "returning the best iterate",
                    RuntimeWarning,
                    stacklevel=2,
                )
            break
        improvement = f_new - f
        theta, f, model = proposal, f_new, model_new
        history.append(f)
        lr *= 1.5
        if improvement < ftol:
            status = "objective"
            break
    logger.debug("LOO optimization: %d iterations, status %s, L=%.6g", it, status, f)
    return HyperOptResult(HyperParams.from_vector(theta), f, history, it, status)
