"""Squared-exponential ARD covariance and its log-hyperparameter derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HyperParams",
    "JITTER",
    "kernel_eval",
    "kernel_matrix",
    "kernel_matrix_grad",
]

# relative to sigma_f^2, added to diagonals before any factorization
JITTER = 1e-8


@dataclass(frozen=True)
class HyperParams:
    """Kernel hyperparameters stored in log space.

    The flat vector form used by the optimizer is
    ``[log sigma_n^2, log sigma_f^2, log l_1, ..., log l_d]``.
    """

    log_sigma_n2: float
    log_sigma_f2: float
    log_lengths: tuple[float, ...]

    def __post_init__(self):
        lengths = tuple(float(v) for v in np.atleast_1d(self.log_lengths))
        object.__setattr__(self, "log_sigma_n2", float(self.log_sigma_n2))
        object.__setattr__(self, "log_sigma_f2", float(self.log_sigma_f2))
        object.__setattr__(self, "log_lengths", lengths)
        if not np.all(np.isfinite(self.vector)):
            raise ValueError(f"non-finite hyperparameters: {self.vector}")

    @classmethod
    def from_natural(cls, sigma_n2: float, sigma_f2: float, lengths) -> "HyperParams":
        return cls(
            np.log(sigma_n2), np.log(sigma_f2), tuple(np.log(np.atleast_1d(lengths)))
        )

    @classmethod
    def from_vector(cls, theta) -> "HyperParams":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[0], theta[1], tuple(theta[2:]))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.log_sigma_n2, self.log_sigma_f2, *self.log_lengths])

    @property
    def sigma_n2(self) -> float:
        return float(np.exp(self.log_sigma_n2))

    @property
    def sigma_f2(self) -> float:
        return float(np.exp(self.log_sigma_f2))

    @property
    def lengths(self) -> np.ndarray:
        return np.exp(np.array(self.log_lengths))

    @property
    def dim(self) -> int:
        return len(self.log_lengths)

    @property
    def n_params(self) -> int:
        return 2 + self.dim

    @property
    def jitter(self) -> float:
        return JITTER * self.sigma_f2

    def to_natural(self) -> dict:
        return {
            "sigma_n2": self.sigma_n2,
            "sigma_f2": self.sigma_f2,
            "lengths": [float(v) for v in self.lengths],
        }


def _as_points(A, dim: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1) if A.size else A.reshape(0, dim)
    if A.shape[1] != dim:
        raise ValueError(
            f"points have dimension {A.shape[1]}, hyperparameters expect {dim}"
        )
    return A


def _scaled_sqdist(A, B, lengths):
    diff = (A[:, None, :] - B[None, :, :]) / lengths
    return np.einsum("ijk,ijk->ij", diff, diff)


def _same_point(A, B):
    return np.all(A[:, None, :] == B[None, :, :], axis=-1)


def kernel_eval(x, x_prime, hp: HyperParams, include_noise: bool = False) -> float:
    """k(x, x') = sf2 * exp(-0.5 (x - x')^T M (x - x')) [+ sn2 if x == x']."""
    return float(kernel_matrix([x], [x_prime], hp, include_noise)[0, 0])


def kernel_matrix(A, B, hp: HyperParams, include_noise: bool = False) -> np.ndarray:
    """Covariance matrix between point lists ``A`` and ``B``.

    The noise term follows a Kronecker delta on exact coordinate equality,
    so it also lands on off-diagonal entries when ``A`` repeats a point.
    """
    A = _as_points(A, hp.dim)
    B = _as_points(B, hp.dim)
    K = hp.sigma_f2 * np.exp(-0.5 * _scaled_sqdist(A, B, hp.lengths))
    if include_noise:
        K = K + hp.sigma_n2 * _same_point(A, B)
    return K


def kernel_matrix_grad(A, hp: HyperParams, j: int) -> np.ndarray:
    """Entry-wise derivative of the noisy ``K(A, A)`` w.r.t. log-parameter ``j``.

    Index 0 is log sigma_n^2, 1 is log sigma_f^2, and ``2 + d`` is the log
    length-scale of input dimension ``d``.
    """
    A = _as_points(A, hp.dim)
    if not 0 <= j < hp.n_params:
        raise IndexError(f"hyperparameter index {j} out of range")
    if j == 0:
        return hp.sigma_n2 * _same_point(A, A).astype(float)
    K = kernel_matrix(A, A, hp)
    if j == 1:
        return K
    d = j - 2
    delta = A[:, None, d] - A[None, :, d]
    return K * delta**2 / hp.lengths[d] ** 2
