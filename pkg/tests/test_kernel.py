import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from oracles import central_difference, random_hp, random_points, se_kernel

from infosampling.kernel import (
    HyperParams,
    kernel_eval,
    kernel_matrix,
    kernel_matrix_grad,
)


def test_noise_only_on_identical_points(hp):
    assert kernel_eval((1, 2), (1, 2), hp, include_noise=True) == pytest.approx(
        math.exp(2) + math.exp(-2)
    )
    assert kernel_eval((1, 2), (1, 2), hp) == pytest.approx(math.exp(2))


def test_reference_value(hp):
    # exp(2) * exp(-1/2) for an offset of one length-scale along one axis
    v = kernel_eval((0.0, 0.0), (math.e, 0.0), hp, include_noise=True)
    assert v == pytest.approx(4.4817, abs=1e-4)
    assert v == pytest.approx(math.exp(1.5), rel=1e-12)


def test_decays_monotonically_with_distance(hp):
    d = np.linspace(0.1, 30, 50)
    vals = [kernel_eval((0, 0), (x, 0), hp) for x in d]
    assert np.all(np.diff(vals) < 0)
    assert vals[-1] < 1e-12


def test_matrix_equals_elementwise(rng):
    hp = random_hp(rng)
    A = rng.normal(size=(5, 2))
    K = kernel_matrix(A, A, hp)
    loop = np.array([[kernel_eval(a, b, hp) for b in A] for a in A])
    np.testing.assert_allclose(K, loop, rtol=1e-14)
    np.testing.assert_allclose(K, se_kernel(A, A, hp.log_sigma_f2, hp.log_lengths), rtol=1e-12)


def test_noisy_matrix_diagonal(rng, hp):
    A = random_points(rng, 6)
    K = kernel_matrix(A, A, hp, include_noise=True)
    np.testing.assert_allclose(np.diag(K), hp.sigma_f2 + hp.sigma_n2)
    np.testing.assert_array_equal(K, K.T)


def test_noise_follows_coordinates_not_indices(hp):
    A = np.array([[0.0, 0.0], [1.0, 1.0]])
    B = np.array([[1.0, 1.0], [0.0, 0.0]])
    K = kernel_matrix(A, B, hp, include_noise=True)
    assert K[0, 1] == pytest.approx(hp.sigma_f2 + hp.sigma_n2)
    assert K[0, 0] < hp.sigma_f2


def test_far_apart_blocks_vanish(hp):
    A = np.zeros((3, 2))
    A[:, 0] = [0, 1, 2]
    K = kernel_matrix(A, A + 500.0, hp)
    assert np.abs(K).max() < 1e-300


def test_dimension_mismatch(hp):
    with pytest.raises(ValueError):
        kernel_matrix(np.zeros((2, 3)), np.zeros((2, 3)), hp)
    with pytest.raises(ValueError):
        kernel_eval((0, 0, 0), (0, 0, 0), hp)


def test_jittered_gram_is_positive_definite(rng, hp):
    A = random_points(rng, 30, scale=10.0, min_dist=0.5)
    K = kernel_matrix(A, A, hp)
    K[np.diag_indices_from(K)] += hp.jitter
    np.linalg.cholesky(K)


@given(
    arrays(np.float64, (2,), elements=st.floats(-50, 50)),
    arrays(np.float64, (2,), elements=st.floats(-50, 50)),
    arrays(np.float64, (2,), elements=st.floats(-50, 50)),
)
def test_translation_invariance(x, y, shift):
    hp = HyperParams(-2.0, 1.0, (0.5, 1.5))
    assert kernel_eval(x, y, hp) == pytest.approx(
        kernel_eval(x + shift, y + shift, hp), rel=1e-9, abs=1e-300
    )


def test_grad_special_cases(rng, hp):
    A = random_points(rng, 4)
    np.testing.assert_array_equal(kernel_matrix_grad(A, hp, 0) - np.diag(np.diag(kernel_matrix_grad(A, hp, 0))), 0)
    np.testing.assert_allclose(kernel_matrix_grad(A, hp, 1), kernel_matrix(A, A, hp))
    with pytest.raises(IndexError):
        kernel_matrix_grad(A, hp, 4)


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(4)
    for _ in range(10):
        A = rng.normal(size=(4, 2)) * 2
        hp = random_hp(rng)
        for j in range(4):

            def f(theta):
                return kernel_matrix(A, A, HyperParams.from_vector(theta), include_noise=True)

            h = 1e-6
            e = np.zeros(4)
            e[j] = h
            fd = (f(hp.vector + e) - f(hp.vector - e)) / (2 * h)
            assert np.max(np.abs(kernel_matrix_grad(A, hp, j) - fd)) < 1e-6


def test_log_space_chain_rule(rng):
    # d/dlog(theta) = theta * d/dtheta, checked for the length-scales
    A = random_points(rng, 4)
    hp = random_hp(rng)
    for d in range(2):
        lengths = hp.lengths.copy()

        def natural(l):
            ls = lengths.copy()
            ls[d] = l
            return kernel_matrix(A, A, HyperParams.from_natural(hp.sigma_n2, hp.sigma_f2, ls))

        h = 1e-6 * lengths[d]
        dnat = (natural(lengths[d] + h) - natural(lengths[d] - h)) / (2 * h)
        np.testing.assert_allclose(
            kernel_matrix_grad(A, hp, 2 + d), lengths[d] * dnat, atol=1e-7
        )


def test_hyperparams_round_trips():
    hp = HyperParams.from_natural(0.1, 3.0, (2.0, 5.0))
    np.testing.assert_allclose(hp.lengths, [2.0, 5.0])
    assert HyperParams.from_vector(hp.vector) == hp
    assert hp.to_natural()["sigma_f2"] == pytest.approx(3.0)
    with pytest.raises(ValueError):
        HyperParams(float("nan"), 0.0, (0.0, 0.0))


def test_central_difference_oracle_sanity():
    g = central_difference(lambda t: float(np.sum(t**3)), np.array([1.0, 2.0]))
    np.testing.assert_allclose(g, [3.0, 12.0], rtol=1e-8)
