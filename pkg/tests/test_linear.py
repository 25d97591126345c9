import numpy as np
import pytest

from driftbandit.design import RadiusParams, linear_radius
from driftbandit.envs import constant_path, gen_arms, instant_regret, make_rng, sample_reward
from driftbandit.linear import (
    DiscountedLinUcb,
    EmptyArmSet,
    default_restart_period,
    optimal_gamma_linear,
)
from driftbandit.numerics import quad_norm_many

PARAMS = RadiusParams(S=1.0, L=1.0, R=1.0, delta=0.05, d=2)


def test_select_cold_start_tie_breaks_to_first():
    learner = DiscountedLinUcb(2, PARAMS, gamma=0.9, lam=1.0)
    arms = np.array([[1.0, 0.0], [0.0, 1.0], [np.sqrt(0.5), np.sqrt(0.5)]])
    assert learner.select(arms) == 0


def test_select_cold_start_prefers_longer_arm():
    learner = DiscountedLinUcb(2, PARAMS, gamma=0.9, lam=1.0)
    arms = np.array([[0.5, 0.0], [0.0, 1.0]])
    assert learner.select(arms) == 1


def test_select_identical_arms_returns_first():
    learner = DiscountedLinUcb(2, PARAMS, gamma=1.0, lam=1.0)
    arms = np.array([[0.3, 0.4], [0.3, 0.4]])
    assert learner.select(arms) == 0


def test_select_one_dimensional_hand_case():
    params = RadiusParams(S=1.0, L=1.0, R=1.0, delta=0.05, d=1)
    learner = DiscountedLinUcb(1, params, gamma=1.0, lam=1.0)
    learner.step(np.array([1.0]), 1.0)
    assert np.allclose(learner.theta_hat, [0.5])
    assert np.allclose(learner.design.V, [[2.0]])
    assert learner.select(np.array([[1.0], [-1.0]])) == 0


def test_empty_arm_set():
    learner = DiscountedLinUcb(2, PARAMS, gamma=0.9)
    with pytest.raises(EmptyArmSet):
        learner.select(np.empty((0, 2)))


def test_argmax_invariant_under_common_scaling():
    rng = make_rng(3, 0)
    learner = DiscountedLinUcb(2, PARAMS, gamma=0.8, lam=2.0)
    arms = gen_arms(20, 2, 1.0, rng).arms
    for _ in range(30):
        idx = learner.select(arms)
        scores = arms @ learner.theta_hat + learner.beta * quad_norm_many(learner.design.V, arms)
        assert idx == int(np.argmax(scores)) == int(np.argmax(7.5 * scores))
        learner.step(arms[idx], float(rng.standard_normal()))


def test_static_equals_weighted_gamma_one():
    arms = gen_arms(10, 2, 1.0, make_rng(4, 2)).arms
    theta = np.array([0.9, -0.2])
    actions = []
    for _ in range(2):
        rng = make_rng(17, 0)
        learner = DiscountedLinUcb(2, PARAMS, gamma=1.0, lam=2.0)
        seq = []
        for t in range(40):
            idx = learner.select(arms)
            r = sample_reward("gaussian_linear", arms[idx], theta, rng)
            learner.step(arms[idx], r)
            seq.append(idx)
        actions.append(seq)
    assert actions[0] == actions[1]


def test_restart_every_round_never_learns():
    learner = DiscountedLinUcb(2, PARAMS, gamma=1.0, lam=1.0, restart_period=1)
    rng = make_rng(5, 0)
    arms = gen_arms(5, 2, 1.0, make_rng(5, 2)).arms
    for _ in range(10):
        idx = learner.select(arms)
        assert np.allclose(learner.theta_hat, 0.0)
        learner.step(arms[idx], float(rng.standard_normal()))


def test_restart_boundary_resets_design():
    learner = DiscountedLinUcb(2, PARAMS, gamma=1.0, lam=1.5, restart_period=3)
    rng = make_rng(6, 0)
    for t in range(1, 8):
        learner.step(rng.standard_normal(2) * 0.5, 0.0)
        if t % 3 == 0:
            assert learner.design.t == 0
            assert np.allclose(learner.design.V, 1.5 * np.eye(2))
        else:
            assert learner.design.t == t % 3


def test_beta_refreshed_after_step():
    learner = DiscountedLinUcb(2, PARAMS, gamma=0.9, lam=2.0)
    assert learner.beta == pytest.approx(linear_radius(PARAMS, 2.0, 0.0))
    learner.step(np.array([1.0, 0.0]), 1.0)
    assert learner.beta == pytest.approx(linear_radius(PARAMS, 2.0, 1.0))
    assert np.allclose(learner.theta_hat, learner.design.ridge_estimate())


def test_optimal_gamma_cases():
    assert optimal_gamma_linear(2, 100, 0.0) == pytest.approx(1 - 1 / 100)
    got = optimal_gamma_linear(2, 6000, 2 * np.pi)
    assert got == pytest.approx(0.9771177191784057, abs=1e-12)
    assert optimal_gamma_linear(3, 50, 3 * 50.0) == pytest.approx(1 / 50)  # floor clamp


def test_default_restart_period_formula():
    assert default_restart_period(2, 6000, 2 * np.pi) == int(
        np.ceil(2**0.25 * np.sqrt(6000 / (1 + 2 * np.pi)))
    )


def test_stationary_static_regret_sublinear():
    # gamma = 1 on a constant path: regret(T)/regret(T/2) < 1.9 averaged over trials
    T, trials = 2000, 20
    arms = gen_arms(25, 2, 1.0, make_rng(30, 2)).arms
    path = constant_path(T, np.array([0.8, -0.6]))
    ratios = []
    for trial in range(trials):
        rng = make_rng(31 + trial, 0)
        learner = DiscountedLinUcb(2, PARAMS, gamma=1.0, lam=2.0)
        cum = np.zeros(T)
        total = 0.0
        for t in range(1, T + 1):
            theta = path.theta(t)
            idx = learner.select(arms)
            r = sample_reward("gaussian_linear", arms[idx], theta, rng)
            learner.step(arms[idx], r)
            total += instant_regret(arms, theta, idx)
            cum[t - 1] = total
        ratios.append(cum[-1] / max(cum[T // 2 - 1], 1e-12))
    assert np.mean(ratios) < 1.9
