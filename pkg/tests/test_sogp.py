import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import gp_posterior, inverse_gram_grow, random_hp, random_points

from infosampling.dense_gp import fit, predict
from infosampling.kernel import HyperParams, kernel_matrix
from infosampling.sogp import (
    ADDED,
    ADDED_THEN_PRUNED,
    PROJECTED,
    SogpConfig,
    SogpError,
    bv_training_view,
    check_consistency,
    grow_inverse_gram,
    prune_scores,
    remove_element,
    shrink_inverse_gram,
    sogp_init,
    sogp_predict,
    sogp_process,
    sogp_rebuild,
    sogp_stream,
)


def _stream(config, X, y):
    bv = sogp_init(config)
    records = []
    for x, v in zip(X, y):
        bv, rec = sogp_process(bv, (x, v))
        records.append(rec)
    return bv, records


def test_init_is_empty_and_deterministic(hp):
    a, b = sogp_init(SogpConfig(hp)), sogp_init(SogpConfig(hp))
    assert a.size == 0
    for name in ("points", "alpha", "C", "Q", "L"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_prior_prediction(hp):
    bv = sogp_init(SogpConfig(hp))
    mean, var = sogp_predict(bv, [[0.0, 0.0], [3.0, 1.0]])
    np.testing.assert_array_equal(mean, 0.0)
    np.testing.assert_allclose(var, hp.sigma_f2)
    _, noisy = sogp_predict(bv, [[0.0, 0.0]], include_noise=True)
    assert noisy[0] == pytest.approx(hp.sigma_f2 + hp.sigma_n2)


def test_config_defaults_and_validation(hp):
    cfg = SogpConfig(hp)
    assert cfg.sigma0_sq == pytest.approx(hp.sigma_n2)
    assert cfg.omega == pytest.approx(1e-4 * hp.sigma_f2)
    with pytest.raises(ValueError):
        SogpConfig(hp, capacity=0)
    with pytest.raises(ValueError):
        SogpConfig(hp, novelty_threshold=-1.0)
    with pytest.raises(ValueError):
        SogpConfig(hp, noise_var=0.0)


def test_first_sample_is_added_with_full_novelty(hp):
    bv, rec = sogp_process(sogp_init(SogpConfig(hp)), ((1.0, 1.0), 2.0))
    assert rec.action == ADDED
    assert rec.gamma == pytest.approx(hp.sigma_f2)
    assert rec.r < 0
    assert bv.size == 1


def test_resubmitted_point_is_projected(hp):
    bv, _ = _stream(SogpConfig(hp), [(0.0, 0.0), (3.0, 0.0)], [1.0, 2.0])
    bv2, rec = sogp_process(bv, ((3.0, 0.0), 2.5))
    assert rec.action == PROJECTED
    assert rec.gamma == 0.0
    assert bv2.size == 2
    np.testing.assert_array_equal(bv2.points, bv.points)


def test_capacity_two_prunes_on_third(hp):
    bv, recs = _stream(SogpConfig(hp, capacity=2), [(0, 0), (20, 0), (0, 20)], [1.0, -1.0, 0.5])
    assert [r.action for r in recs] == [ADDED, ADDED, ADDED_THEN_PRUNED]
    assert bv.size == 2
    assert recs[-1].replaced


def test_equivalence_with_dense_gp(rng):
    hp = random_hp(rng)
    X = random_points(rng, 20, scale=6.0, min_dist=0.5)
    y = rng.normal(size=20)
    bv, recs = _stream(SogpConfig(hp, capacity=32, novelty_threshold=1e-12), X, y)
    assert all(r.action == ADDED for r in recs)
    g = np.linspace(0, 6, 20)
    Xs = np.array([(a, b) for a in g for b in g])
    mean, var = sogp_predict(bv, Xs)
    m_ref, c_ref = predict(fit(X, y, hp), Xs)
    assert np.sqrt(np.mean((mean - m_ref) ** 2)) < 1e-6
    assert np.sqrt(np.mean((var - np.diag(c_ref)) ** 2)) < 1e-6


def test_equivalence_with_explicit_inverse_oracle(rng):
    hp = random_hp(rng)
    X = random_points(rng, 8)
    y = rng.normal(size=8)
    bv, _ = _stream(SogpConfig(hp, capacity=8, novelty_threshold=1e-12), X, y)
    Xs = rng.uniform(0, 4, (10, 2))
    m_ref, c_ref = gp_posterior(X, y, hp, Xs)
    mean, var = sogp_predict(bv, Xs)
    np.testing.assert_allclose(mean, m_ref, atol=1e-6)
    np.testing.assert_allclose(var, np.diag(c_ref), atol=1e-6)


def test_inverse_gram_invariants_on_well_conditioned_stream(rng):
    hp = HyperParams(-2.0, 0.5, (0.0, 0.0))
    X = random_points(rng, 60, scale=12.0, min_dist=0.8)
    y = rng.normal(size=60)
    bv = sogp_init(SogpConfig(hp, capacity=15))
    pruned = 0
    for x, v in zip(X, y):
        bv, rec = sogp_process(bv, (x, v))
        pruned += rec.action == ADDED_THEN_PRUNED
        K = kernel_matrix(bv.points, bv.points, hp)
        assert np.abs(bv.Q @ K - np.eye(bv.size)).max() < 1e-6
        assert np.abs(bv.L @ bv.L.T - K).max() < 1e-10
        np.testing.assert_array_equal(bv.C, bv.C.T)
        assert np.linalg.eigvalsh(bv.C).max() < 1e-6
        assert rec.gamma >= 0
    assert pruned > 10


def test_debug_mode_checks_every_update(rng):
    hp = HyperParams(-2.0, 2.0, (1.0, 1.0))
    cells = np.array([(r, c) for r in range(12) for c in range(12)], dtype=float)
    rng.shuffle(cells)
    bv = sogp_init(SogpConfig(hp, capacity=25, debug=True))
    for x in cells:
        bv, _ = sogp_process(bv, (x, float(np.sin(x[0] / 3) + np.cos(x[1] / 4))))
    assert bv.size == 25


def test_corrupted_factor_is_detected(rng, hp):
    X = random_points(rng, 6)
    bv, _ = _stream(SogpConfig(hp), X, rng.normal(size=6))
    bad = dataclasses.replace(bv, L=0.5 * bv.L)
    with pytest.raises(SogpError):
        check_consistency(bad)
    with pytest.raises(SogpError, match="negative novelty"):
        sogp_process(bad, (X[0] + 0.01, 0.0))


@settings(max_examples=25, deadline=None)
@given(
    st.integers(1, 6),
    st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), min_size=1, max_size=40),
)
def test_size_never_exceeds_capacity(m, cells):
    hp = HyperParams(-2.0, 1.0, (0.5, 0.5))
    bv = sogp_init(SogpConfig(hp, capacity=m))
    for k, c in enumerate(cells):
        bv, rec = sogp_process(bv, (c, float(k % 3)))
        assert bv.size <= m
        assert rec.gamma >= 0
        assert len(bv.alpha) == bv.size == bv.C.shape[0] == bv.Q.shape[0]


def test_gamma_zero_only_at_bv_points(hp):
    bv, _ = _stream(SogpConfig(hp), [(0, 0), (5, 5)], [1.0, 2.0])
    _, rec = sogp_process(bv, ((0.0, 0.0), 0.0))
    assert rec.gamma == 0.0
    _, rec = sogp_process(bv, ((0.0, 1.5), 0.0))
    assert rec.gamma > 0


def test_prune_score_removal_is_least_disruptive(rng):
    hp = HyperParams(-2.0, 1.0, (0.5, 0.5))
    X = random_points(rng, 12, scale=8.0, min_dist=0.7)
    bv, _ = _stream(SogpConfig(hp, capacity=12), X, rng.normal(size=12))
    grid = rng.uniform(0, 8, (200, 2))
    base, _ = sogp_predict(bv, grid)
    eps = prune_scores(bv)
    lo, hi = int(np.argmin(eps)), int(np.argmax(eps))
    change = [
        np.sqrt(np.mean((sogp_predict(remove_element(bv, j), grid)[0] - base) ** 2))
        for j in (lo, hi)
    ]
    assert change[0] <= change[1]


def test_prune_tie_goes_to_oldest(hp):
    # symmetric layout with identical targets gives equal scores
    bv, recs = _stream(SogpConfig(hp, capacity=2), [(0, 0), (50, 0), (100, 0)], [1.0, 1.0, 1.0])
    assert recs[-1].pruned_index == 0
    np.testing.assert_array_equal(bv.points, [[50.0, 0.0], [100.0, 0.0]])


def test_growth_formula_matches_factor(rng):
    hp = random_hp(rng)
    X = random_points(rng, 7)
    bv, _ = _stream(SogpConfig(hp, capacity=10, novelty_threshold=1e-12), X[:6], np.zeros(6))
    bv2, rec = sogp_process(bv, (X[6], 0.0))
    np.testing.assert_allclose(grow_inverse_gram(bv.Q, rec.e_hat, rec.gamma), bv2.Q, atol=1e-8)
    np.testing.assert_allclose(inverse_gram_grow(bv.Q, rec.e_hat, rec.gamma), bv2.Q, atol=1e-8)


def test_shrink_formula_matches_reduced_inverse(rng):
    hp = random_hp(rng)
    X = random_points(rng, 6)
    bv, _ = _stream(SogpConfig(hp, novelty_threshold=1e-12), X, np.zeros(6))
    for j in range(6):
        keep = np.arange(6) != j
        K = kernel_matrix(X[keep], X[keep], hp)
        np.testing.assert_allclose(shrink_inverse_gram(bv.Q, j) @ K, np.eye(5), atol=1e-8)
        small = remove_element(bv, j)
        np.testing.assert_allclose(small.L @ small.L.T, K, atol=1e-12)


def test_training_view_order_and_copy(hp):
    pts = [(0, 0), (9, 0), (0, 9)]
    bv, _ = _stream(SogpConfig(hp), pts, [1.0, 2.0, 3.0])
    X, y = bv_training_view(bv)
    np.testing.assert_array_equal(X, pts)
    np.testing.assert_array_equal(y, [1.0, 2.0, 3.0])
    X[0, 0] = 99.0
    assert bv.points[0, 0] == 0.0


def test_training_view_after_prune(hp):
    bv, recs = _stream(SogpConfig(hp, capacity=2), [(0, 0), (20, 0), (0, 20)], [1.0, 5.0, -3.0])
    X, _ = bv_training_view(bv)
    gone = recs[-1].pruned_index
    removed = [(0, 0), (20, 0), (0, 20)][gone]
    assert tuple(removed) not in {tuple(p) for p in X}


def test_rebuild_replays_exactly(rng):
    hp = random_hp(rng)
    X = random_points(rng, 10)
    y = rng.normal(size=10)
    cfg = SogpConfig(hp, novelty_threshold=1e-12)
    bv, _ = _stream(cfg, X, y)
    rebuilt = sogp_rebuild(*bv_training_view(bv), cfg)
    np.testing.assert_allclose(sogp_predict(rebuilt, X)[0], sogp_predict(bv, X)[0], atol=1e-6)
    assert sogp_rebuild(np.zeros((0, 2)), [], cfg).size == 0


def test_rebuild_with_longer_lengths_is_smoother():
    hp = HyperParams(-2.0, 1.0, (0.3, 0.3))
    X = np.array([(r, c) for r in range(0, 12, 3) for c in range(0, 12, 3)], dtype=float)
    y = np.sin(X[:, 0] / 4)
    between = X[:-1] + 1.5
    short = sogp_rebuild(X, y, SogpConfig(hp))
    long = sogp_rebuild(X, y, SogpConfig(HyperParams(-2.0, 1.0, tuple(hp.vector[2:] + np.log(2)))))
    assert np.mean(sogp_predict(long, between)[1]) < np.mean(sogp_predict(short, between)[1])


def test_stream_helper_matches_loop(rng, hp):
    X = random_points(rng, 5)
    pairs = list(zip(X, rng.normal(size=5)))
    bv_a, recs = sogp_stream(sogp_init(SogpConfig(hp)), pairs)
    bv_b, _ = _stream(SogpConfig(hp), X, [p[1] for p in pairs])
    np.testing.assert_array_equal(bv_a.alpha, bv_b.alpha)
    assert len(recs) == 5


def test_far_from_basis_reverts_to_prior(hp):
    bv, _ = _stream(SogpConfig(hp), [(0, 0), (1, 1)], [3.0, 2.0])
    mean, var = sogp_predict(bv, [[500.0, 500.0]])
    assert abs(mean[0]) < 1e-12
    assert var[0] == pytest.approx(hp.sigma_f2)


def test_nonfinite_location_rejected(hp):
    with pytest.raises(ValueError):
        sogp_process(sogp_init(SogpConfig(hp)), ((np.nan, 0.0), 1.0))
