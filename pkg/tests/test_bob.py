import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftbandit.bob import (
    BobConfig,
    Exp3Ix,
    candidate_gammas,
    default_learning_rate,
    episode_reward_cap,
    run_meta_bandit,
)
from driftbandit.envs import make_rng


def test_candidate_formula_d4():
    cfg = candidate_gammas(4, 1000)
    assert cfg.candidates[0] == pytest.approx(0.5)  # 1 - 4^(-1/2) * 2^0
    assert cfg.episode_len == math.ceil(4 * math.sqrt(1000))


def test_candidate_count_benchmark_scale():
    cfg = candidate_gammas(2, 6000)
    assert cfg.n_candidates == 14  # ceil(log2(6000/sqrt(2))) + 1
    assert cfg.candidates[0] == pytest.approx(1 - 1 / math.sqrt(2))
    assert np.all(cfg.candidates > 0) and np.all(cfg.candidates < 1)
    assert cfg.candidates.max() >= 1 - 1 / 6000 - 1e-12


def test_candidate_degenerate_d1_clamped():
    cfg = candidate_gammas(1, 50)
    assert cfg.candidates[0] == pytest.approx(1 / 50)  # formula gives 0, floor applies


def test_candidates_monotone():
    cfg = candidate_gammas(3, 2000)
    assert np.all(np.diff(cfg.candidates) >= -1e-12)


def test_exp3ix_initial_uniform():
    meta = Exp3Ix(5, eta=0.1, gamma_ix=0.05)
    assert np.allclose(meta.probabilities(), 0.2)
    assert meta.probabilities().sum() == pytest.approx(1.0, abs=1e-12)


def test_exp3ix_zero_loss_keeps_uniform():
    meta = Exp3Ix(4, eta=0.2, gamma_ix=0.1)
    meta.update(2, 0.0)
    assert np.allclose(meta.probabilities(), 0.25)


def test_exp3ix_two_candidate_separation():
    # deterministic losses: candidate 0 always 0, candidate 1 always 1
    episodes = 200
    meta = Exp3Ix(2, eta=default_learning_rate(2, episodes), gamma_ix=default_learning_rate(2, episodes) / 2)
    rng = make_rng(1, 1)
    for _ in range(episodes):
        idx = meta.sample(rng)
        meta.update(idx, float(idx))
    assert meta.probabilities()[0] > 0.95


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=1, max_value=10),
    st.lists(st.tuples(st.integers(min_value=0, max_value=9), st.floats(0, 1)), max_size=40),
)
def test_exp3ix_probabilities_stay_valid(n, updates):
    meta = Exp3Ix(n, eta=0.3, gamma_ix=0.15)
    for idx, loss in updates:
        meta.update(idx % n, loss)
        p = meta.probabilities()
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(p > 0)


class _CountingEnv:
    """Deterministic environment double: reward 1 each round, regret t mod 3."""

    def __init__(self):
        self.rounds = 0
        self.fresh_learners = 0

    def make_learner(self, gamma):
        self.fresh_learners += 1
        return {"gamma": gamma, "age": 0}

    def select_and_observe(self, learner, t):
        self.rounds += 1
        learner["age"] += 1
        return 1.0, float(t % 3)


def test_meta_bandit_episode_accounting():
    cfg = candidate_gammas(2, 101)  # episode length 29 does not divide 101
    env = _CountingEnv()
    inst, clips = run_meta_bandit(
        cfg, env.make_learner, env.select_and_observe, make_rng(3, 1), L=1.0, S=1.0, R=1.0
    )
    assert env.rounds == 101
    assert inst.shape == (101,)
    assert np.array_equal(inst, np.array([t % 3 for t in range(1, 102)], dtype=float))
    assert env.fresh_learners == math.ceil(101 / cfg.episode_len)
    assert clips == 0


def test_meta_bandit_single_episode_equals_base():
    # episode length >= T: one fresh learner with the first sampled discount
    cfg = BobConfig(T=40, d=2, episode_len=64, candidates=np.array([0.3, 0.9]), n_candidates=2)
    env = _CountingEnv()
    inst, _ = run_meta_bandit(
        cfg, env.make_learner, env.select_and_observe, make_rng(4, 1), L=1.0, S=1.0, R=1.0
    )
    assert env.fresh_learners == 1
    assert env.rounds == 40
    # the same meta rng sample determines the lone candidate deterministically
    probe = Exp3Ix(2, eta=default_learning_rate(2, 1), gamma_ix=default_learning_rate(2, 1) / 2)
    assert probe.sample(make_rng(4, 1)) in (0, 1)


def test_single_candidate_equals_restarted_base_learner():
    # N = 1: the meta layer degenerates to restarting the base learner every episode
    import numpy as np

    from driftbandit.design import RadiusParams
    from driftbandit.envs import constant_path, gen_arms, instant_regret, sample_reward
    from driftbandit.linear import DiscountedLinUcb

    T, dlt, gamma = 50, 12, 0.8
    cfg = BobConfig(T=T, d=2, episode_len=dlt, candidates=np.array([gamma]), n_candidates=1)
    arms = gen_arms(6, 2, 1.0, make_rng(8, 2)).arms
    path = constant_path(T, np.array([0.7, -0.3]))
    params = RadiusParams(S=1.0, L=1.0, R=1.0, delta=0.05, d=2)

    def run_via_meta():
        env_rng = make_rng(9, 0)

        def make_learner(g):
            return DiscountedLinUcb(2, params, g, lam=2.0)

        def step(learner, t):
            theta = path.theta(t)
            idx = learner.select(arms)
            r = sample_reward("gaussian_linear", arms[idx], theta, env_rng)
            learner.step(arms[idx], r)
            return r, instant_regret(arms, theta, idx)

        inst, _ = run_meta_bandit(cfg, make_learner, step, make_rng(10, 1), 1.0, 1.0, 1.0)
        return inst

    def run_restarted():
        env_rng = make_rng(9, 0)
        inst = np.zeros(T)
        learner = None
        for t in range(1, T + 1):
            if (t - 1) % dlt == 0:
                learner = DiscountedLinUcb(2, params, gamma, lam=2.0)
            theta = path.theta(t)
            idx = learner.select(arms)
            r = sample_reward("gaussian_linear", arms[idx], theta, env_rng)
            learner.step(arms[idx], r)
            inst[t - 1] = instant_regret(arms, theta, idx)
        return inst

    assert np.array_equal(run_via_meta(), run_restarted())


def test_meta_bandit_counts_clip_events():
    cfg = BobConfig(T=10, d=2, episode_len=5, candidates=np.array([0.5]), n_candidates=1)

    def make_learner(gamma):
        return None

    def select_and_observe(learner, t):
        return -1.0, 0.0  # negative cumulative reward forces a clip every episode

    inst, clips = run_meta_bandit(
        cfg, make_learner, select_and_observe, make_rng(5, 1), L=1.0, S=1.0, R=1.0
    )
    assert clips == 2


def test_episode_reward_cap_formula():
    got = episode_reward_cap(6000, 170, 1.0, 1.0, 1.0)
    assert got == pytest.approx(170 + 2 * math.sqrt(170 * math.log(6000 / math.sqrt(170))))
