"""Online tuning of the discount factor when the drift budget is unknown.

The horizon is split into fixed-length episodes; each episode runs a fresh
base learner with a discount drawn by an Exp3-IX meta-bandit over a geometric
candidate grid. Episode feedback is the raw cumulative reward, clipped to a
high-probability range and rescaled to [0, 1] before the exponential-weights
update (clip events are counted and reported).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linear import clamp_gamma


@dataclass
class BobConfig:
    T: int
    d: int
    episode_len: int
    candidates: np.ndarray
    n_candidates: int


def candidate_gammas(d: int, T: int) -> BobConfig:
    """Geometric discount grid 1 - d^(-1/2) * 2^(1-i), i = 1..N.

    N = ceil(log2(T/sqrt(d))) + 1 and the episode length is ceil(d*sqrt(T)).
    Candidates are clamped into [1/T, 1 - 1/T]; in particular the d = 1
    degenerate first candidate (gamma = 0) lands on the 1/T floor.
    """
    if not (T >= d >= 1):
        raise ValueError("need T >= d >= 1")
    n = math.ceil(math.log2(T / math.sqrt(d))) + 1
    gammas = np.array(
        [clamp_gamma(1.0 - d**-0.5 * 2.0 ** (1 - i), T) for i in range(1, n + 1)]
    )
    return BobConfig(T, d, math.ceil(d * math.sqrt(T)), gammas, n)


def episode_reward_cap(T: int, episode_len: int, L: float, S: float, R: float) -> float:
    """High-probability bound on |cumulative episode reward|: L*S*D + 2R*sqrt(D*ln(T/sqrt(D)))."""
    return L * S * episode_len + 2.0 * R * math.sqrt(
        episode_len * math.log(T / math.sqrt(episode_len))
    )


class Exp3Ix:
    """Exponential weights over losses with implicit-exploration bias."""

    def __init__(self, n: int, eta: float, gamma_ix: float):
        if n < 1 or eta <= 0 or gamma_ix <= 0:
            raise ValueError("need n >= 1 and positive eta, gamma_ix")
        self.n = n
        self.eta = eta
        self.gamma_ix = gamma_ix
        self.cum_loss = np.zeros(n)

    def probabilities(self) -> np.ndarray:
        logw = -self.eta * self.cum_loss
        logw -= logw.max()
        w = np.exp(logw)
        return w / w.sum()

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n, p=self.probabilities()))

    def update(self, index: int, loss: float) -> None:
        """Biased importance-weighted loss update; loss must be in [0, 1]."""
        p = self.probabilities()[index]
        self.cum_loss[index] += loss / (p + self.gamma_ix)


def default_learning_rate(n_candidates: int, n_episodes: int) -> float:
    # log(max(n, 2)) keeps the rate positive in the trivial one-candidate case
    return math.sqrt(2.0 * math.log(max(n_candidates, 2)) / (n_candidates * n_episodes))


def run_meta_bandit(
    config: BobConfig,
    make_learner: Callable[[float], object],
    select_and_observe: Callable[[object, int], tuple[float, float]],
    meta_rng: np.random.Generator,
    L: float,
    S: float,
    R: float,
) -> tuple[np.ndarray, int]:
    """Full meta-tuned run over T rounds.

    `select_and_observe(learner, t)` plays one round (the learner selects, the
    environment responds, the learner absorbs) and returns (reward,
    instantaneous regret). Returns the per-round regret trace and the number
    of episode rewards that fell outside the clip range.
    """
    T, dlt = config.T, config.episode_len
    n_episodes = math.ceil(T / dlt)
    eta = default_learning_rate(config.n_candidates, n_episodes)
    meta = Exp3Ix(config.n_candidates, eta, eta / 2.0)
    cap = episode_reward_cap(T, dlt, L, S, R)
    inst = np.zeros(T)
    clip_events = 0
    t = 0
    for _ep in range(n_episodes):
        idx = meta.sample(meta_rng)
        learner = make_learner(float(config.candidates[idx]))
        ep_reward = 0.0
        for _ in range(min(dlt, T - t)):
            t += 1
            reward, regret = select_and_observe(learner, t)
            ep_reward += reward
            inst[t - 1] = regret
        if ep_reward < 0.0 or ep_reward > cap:
            clip_events += 1
        meta.update(idx, 1.0 - min(max(ep_reward, 0.0), cap) / cap)
    return inst, clip_events
