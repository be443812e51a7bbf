import math

import numpy as np
import pytest

from conftest import random_spd
from fairmoo.fair_moo import (
    FairWeights,
    IndefiniteGramError,
    ObjectiveBundle,
    ObjectiveError,
    SolverConfig,
    StrategyError,
    WeightStrategy,
    aggregate_direction,
    baseline_weights,
    delay_diagnostics,
    gram,
    mpd_weights_closed,
    mpd_weights_oracle,
    pareto_stationarity,
    residual,
    update_step,
)
from fairmoo.numerics import mat_frac_power

EXACT = SolverConfig(eps_reg=0.0)


def bundle_of(G, losses=None):
    G = np.asarray(G, dtype=float)
    return ObjectiveBundle(np.ones(G.shape[0]) if losses is None else losses, G)


# ---- bundle and gram


def test_bundle_validation():
    with pytest.raises(ObjectiveError) as info:
        ObjectiveBundle(np.array([1.0, -1.0]), np.zeros((2, 3)))
    assert info.value.index == 1
    with pytest.raises(ObjectiveError):
        ObjectiveBundle(np.array([1.0]), np.array([[np.nan]]))
    with pytest.raises(ValueError):
        ObjectiveBundle(np.array([1.0, 2.0]), np.zeros((3, 3)))


def test_gram_examples(rng):
    assert np.array_equal(gram(np.eye(3)), np.eye(3))
    K = gram(np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 2.0]]))
    assert K.tolist() == [[1, 0, 1], [0, 4, 4], [1, 4, 5]]
    for _ in range(50):
        K = gram(rng.standard_normal((3, 20)))
        assert np.array_equal(K, K.T)
        ev = np.linalg.eigvalsh(K)
        assert ev[0] >= -1e-9 * ev[-1]


# ---- closed form and oracle


def test_closed_form_examples():
    assert np.allclose(mpd_weights_closed(np.eye(3), EXACT).w, 1.0, rtol=1e-14)
    w = mpd_weights_closed(np.diag([1.0, 8.0, 64.0]), EXACT)
    assert np.allclose(w.w, [1.0, 0.25, 1 / 16], rtol=1e-13)
    assert w.residual <= 1e-12 and not w.floor_applied


def test_oracle_examples():
    w = mpd_weights_oracle(np.diag([1.0, 8.0, 64.0]), EXACT)
    assert np.allclose(w.w, [1.0, 0.25, 1 / 16], atol=1e-6)
    w = mpd_weights_oracle(np.eye(3), EXACT)
    assert np.allclose(w.w, 1.0) and w.residual <= 1e-10


def test_oracle_never_worse_than_closed_form(rng):
    for _ in range(100):
        K = random_spd(rng, 3)
        c = mpd_weights_closed(K)
        o = mpd_weights_oracle(K)
        assert o.residual <= c.residual + 1e-8
        assert o.residual <= residual(K, np.ones(3)) + 1e-8
        assert np.all(o.w > 0)


def test_indefinite_gram_rejected():
    with pytest.raises(IndefiniteGramError):
        mpd_weights_closed(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_floor_flag_fires_on_negative_closed_form():
    # strongly correlated gradients push one closed-form weight below zero
    G = np.array([[1.0, 0.0], [1.0, 0.05], [0.0, 1.0]])
    w = mpd_weights_closed(gram(G))
    raw = mat_frac_power(gram(G), -2 / 3, 1e-10) @ np.ones(3)
    assert (raw < 1e-8).any() == w.floor_applied
    assert np.all(w.w >= 1e-8)


def test_scale_behaviour(rng):
    checked = 0
    for _ in range(100):
        K = random_spd(rng, 3)
        c = float(rng.uniform(0.1, 10))
        a = mpd_weights_closed(K, EXACT)
        if a.floor_applied:  # clamped entries sit at the floor and do not scale
            continue
        b = mpd_weights_closed(c * K, EXACT).w
        assert np.allclose(b, c ** (-2 / 3) * a.w, rtol=1e-12, atol=0)
        checked += 1
    assert checked >= 20


def test_permutation_equivariance(rng):
    for _ in range(50):
        bundle = bundle_of(rng.standard_normal((3, 12)))
        order = rng.permutation(3)
        w = mpd_weights_closed(gram(bundle)).w
        wp = mpd_weights_closed(gram(bundle.permuted(order))).w
        assert np.allclose(wp, w[order], rtol=1e-12, atol=0)
        d = aggregate_direction(bundle, w)
        dp = aggregate_direction(bundle.permuted(order), wp)
        assert np.allclose(dp, d, rtol=0, atol=1e-12 * np.abs(d).max())


def test_diagonal_gram_descends_every_objective(rng):
    for _ in range(50):
        Q, _ = np.linalg.qr(rng.standard_normal((8, 3)))
        G = (Q * rng.uniform(0.1, 10, 3)).T  # orthogonal rows
        bundle = bundle_of(G)
        K = gram(bundle)
        d = aggregate_direction(bundle, mpd_weights_closed(K))
        assert np.all(G @ d > 0)
        assert np.allclose(G @ d, np.diag(K) ** (1 / 3), rtol=1e-6)


def test_single_objective_reduction(rng):
    g = rng.standard_normal((1, 6))
    theta = rng.standard_normal(6)
    w = mpd_weights_closed(gram(g), EXACT)
    d = aggregate_direction(bundle_of(g), w)
    step = update_step(theta, d, 0.1)
    expected = theta - 0.1 * float(g[0] @ g[0]) ** (-2 / 3) * g[0]
    assert np.allclose(step, expected, rtol=1e-14, atol=1e-15)


def test_general_lambda_scaling():
    cfg = SolverConfig(eps_reg=0.0, lagrange_lambda=2.0)
    w = mpd_weights_closed(np.diag([1.0, 8.0]), cfg)
    assert w.residual <= 1e-12


# ---- aggregation and update


def test_aggregate_examples(rng):
    G = rng.standard_normal((3, 5))
    b = bundle_of(G)
    assert np.array_equal(aggregate_direction(b, np.array([1.0, 0.0, 0.0])), G[0])
    g = rng.standard_normal(4)
    b = bundle_of(np.stack([g, -g, np.zeros(4)]))
    assert np.array_equal(aggregate_direction(b, np.ones(3)), np.zeros(4))
    with pytest.raises(ValueError):
        aggregate_direction(b, np.ones(2))


def test_update_step_examples():
    assert update_step(np.array([1.0, 1.0]), np.array([1.0, -1.0]), 0.5).tolist() == [0.5, 1.5]
    theta = np.array([2.0, 3.0])
    assert np.array_equal(update_step(theta, np.zeros(2), 0.1), theta)
    with pytest.raises(ValueError):
        update_step(theta, np.zeros(2), 0.0)


# ---- baselines


def test_baseline_examples(rng):
    assert baseline_weights("si", [np.array([2.0, 4.0, 8.0])]).w.tolist() == [0.5, 0.25, 0.125]
    hist = [np.array([2.0, 4.0, 6.0]), np.array([1.0, 2.0, 3.0])]
    assert np.allclose(baseline_weights("dwa", hist).w, 1.0, rtol=1e-15)
    for _ in range(20):
        w = baseline_weights("rlw", [np.ones(3)], rng=rng).w
        assert np.all(w > 0) and math.isclose(w.sum(), 1.0, rel_tol=1e-15)
    assert baseline_weights("ls", [np.ones(3)]).w.tolist() == [1.0, 1.0, 1.0]
    assert baseline_weights("global-only", [np.ones(3)]).w.tolist() == [1.0, 0.0, 0.0]


def test_baseline_errors():
    with pytest.raises(StrategyError):
        baseline_weights("si", [np.array([1.0, 0.0, 1.0])])
    with pytest.raises(StrategyError):
        baseline_weights("dwa", [np.ones(3), np.array([1.0, 0.0, 1.0])])
    with pytest.raises(StrategyError):
        baseline_weights("nash", [np.ones(3)])
    with pytest.raises(StrategyError):
        WeightStrategy("pcgrad")


def test_uw_weights_follow_log_variance_gradient():
    ws = WeightStrategy("uw", uw_lr=0.1)
    b = bundle_of(np.eye(3), losses=np.array([4.0, 1.0, 0.25]))
    first = ws(b).w
    assert np.allclose(first, 0.5)
    second = ws(b).w
    # s_i -= lr·(½ − ½·e^{-s_i}·l_i): σ² tracks the loss, so large losses get small weights
    assert second[0] < second[1] < second[2]
    assert np.all(second > 0)


def test_dwa_strategy_uses_history():
    ws = WeightStrategy("dwa")
    G = np.eye(3)
    assert np.allclose(ws(bundle_of(G, np.array([1.0, 1.0, 1.0]))).w, 1.0)
    assert np.allclose(ws(bundle_of(G, np.array([1.0, 1.0, 1.0]))).w, 1.0)
    # weights at step t use the losses of steps t-1 and t-2
    assert np.allclose(ws(bundle_of(G, np.array([2.0, 1.0, 1.0]))).w, 1.0)
    w = ws(bundle_of(G, np.array([2.0, 1.0, 1.0]))).w
    assert w[0] > w[1] and math.isclose(w.sum(), 3.0, rel_tol=1e-14)


# ---- Pareto meter and delay diagnostics


def grid_stationarity(G, step=1e-3):
    n = int(round(1 / step))
    a = np.arange(n + 1) * step
    A, B = np.meshgrid(a, a, indexing="ij")
    keep = A + B <= 1 + 1e-12
    lam = np.stack([A[keep], B[keep], np.clip(1 - A[keep] - B[keep], 0, None)], axis=1)
    return float(np.min(np.linalg.norm(lam @ G, axis=1)))


def test_stationarity_examples(rng):
    g = rng.standard_normal(5)
    assert pareto_stationarity(g[None]) == pytest.approx(np.linalg.norm(g), rel=1e-15)
    assert pareto_stationarity(np.stack([g, -g])) <= 1e-12
    with pytest.raises(ValueError):
        pareto_stationarity(np.ones((9, 2)))


def test_stationarity_matches_grid(rng):
    for _ in range(10):
        G = rng.standard_normal((3, 4))
        meter = pareto_stationarity(G)
        grid = grid_stationarity(G)
        assert meter <= grid + 1e-9
        assert abs(meter - grid) <= 1e-3


def test_delay_examples(rng):
    g = rng.standard_normal(4)
    diag = delay_diagnostics(g[None], g)
    assert diag.proj[0] == pytest.approx(np.linalg.norm(g), rel=1e-14)
    assert diag.potential_delay[0] == pytest.approx(1 / np.linalg.norm(g), rel=1e-14)
    G = np.array([[1.0, 0.0], [0.0, 1.0]])
    diag = delay_diagnostics(G, np.array([1.0, 0.0]))
    assert diag.undefined.tolist() == [False, True]
    assert math.isnan(diag.F) and diag.bound_holds is None
    with pytest.raises(ValueError):
        delay_diagnostics(G, np.zeros(2))


def test_delay_invariants(rng):
    for _ in range(200):
        G = rng.standard_normal((3, 6))
        d = aggregate_direction(bundle_of(G), mpd_weights_oracle(gram(G)).w)
        diag = delay_diagnostics(G, d)
        ok = ~diag.undefined
        assert np.allclose(diag.potential_delay[ok] * diag.proj[ok], 1.0, rtol=1e-14)


def test_potential_delay_is_norm_times_surrogate(rng):
    # F(d) = ‖d‖·F′(d) exactly, so F ≤ M·F′ holds iff ‖d‖ ≤ M
    G = rng.uniform(0.5, 1.5, (3, 4))
    d = np.ones(4)
    diag = delay_diagnostics(G, d)
    assert diag.F == pytest.approx(np.linalg.norm(d) * diag.F_prime, rel=1e-14)
    big = d * 10 * diag.M
    diag = delay_diagnostics(G, big)
    assert diag.bound_holds is False
