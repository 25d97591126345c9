"""Discounted UCB for drifting linear rewards, with static and restart baselines.

One learner class covers three variants: geometric discounting (gamma < 1),
the static undiscounted learner (gamma = 1), and periodic restarts (gamma = 1
plus a hard reset of the design every restart_period rounds). Selection is the
usual optimistic index <x, theta_hat> + beta * ||x||_{V^{-1}} with the radius
computed from the tracked discounted weight sum; ties break to the lowest arm
index so runs are reproducible.
"""

from __future__ import annotations

import math

import numpy as np

from .design import DiscountedDesign, RadiusParams, linear_radius
from .numerics import quad_norm_many


class EmptyArmSet(Exception):
    """select() was called with no arms."""


def clamp_gamma(gamma: float, T: int) -> float:
    """Clamp a discount into [1/T, 1 - 1/T] so log(1/gamma) stays finite."""
    return min(max(gamma, 1.0 / T), 1.0 - 1.0 / T)


def optimal_gamma_linear(d: int, T: int, path_len: float) -> float:
    """Theory-optimal discount 1 - max(1/T, sqrt(P_T/(dT))), clamped."""
    if T < 1 or path_len < 0:
        raise ValueError("need T >= 1 and path_len >= 0")
    return clamp_gamma(1.0 - max(1.0 / T, math.sqrt(path_len / (d * T))), T)


def default_restart_period(d: int, T: int, path_len: float) -> int:
    """Restart period d^(1/4) * sqrt(T / (1 + P_T)), rounded up."""
    return max(1, math.ceil(d**0.25 * math.sqrt(T / (1.0 + path_len))))


class DiscountedLinUcb:
    """Optimistic linear learner on a discounted ridge design."""

    def __init__(
        self,
        d: int,
        params: RadiusParams,
        gamma: float,
        lam: float | None = None,
        restart_period: int | None = None,
    ):
        self.d = d
        self.params = params
        self.gamma = gamma
        self.lam = float(d) if lam is None else lam
        self.restart_period = restart_period
        if restart_period is not None and restart_period < 1:
            raise ValueError("restart_period must be >= 1")
        self.design = DiscountedDesign(d, gamma, self.lam)
        self._refresh()

    def _refresh(self) -> None:
        self.theta_hat = self.design.ridge_estimate()
        self.beta = linear_radius(self.params, self.lam, self.design.weight_sum)

    def select(self, arms: np.ndarray) -> int:
        """Index of the UCB-maximizing arm (lowest index on ties)."""
        arms = np.asarray(arms, dtype=float)
        if arms.ndim != 2 or arms.shape[0] == 0:
            raise EmptyArmSet("no arms to select from")
        scores = arms @ self.theta_hat + self.beta * quad_norm_many(self.design.V, arms)
        return int(np.argmax(scores))

    def step(self, x: np.ndarray, r: float) -> None:
        """Absorb the observed (arm, reward) pair and refresh the caches."""
        self.design.update(x, r)
        if self.restart_period is not None and self.design.t >= self.restart_period:
            self.design = DiscountedDesign(self.d, self.gamma, self.lam)
        self._refresh()
