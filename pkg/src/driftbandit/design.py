"""Discounted data memory: recursive covariance, weighted ridge, confidence radii.

The learner keeps a single covariance matrix V (no second, differently-weighted
copy) and a moment vector b, both updated by the geometric-discount recursion

    V <- gamma * V + x x^T + (1 - gamma) * lambda * I,    b <- gamma * b + r * x.

After t updates this equals lambda*I + sum_s gamma^(t-s) x_s x_s^T exactly,
so the weighted ridge estimate is a single SPD solve. gamma = 1 is admitted and
recovers the plain undiscounted design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import DimensionMismatch, spd_solve


@dataclass
class RadiusParams:
    """Problem constants feeding the confidence radii.

    S bounds the parameter norm, L the arm norm, R the sub-Gaussian noise
    scale, delta the confidence level, d the dimension.
    """

    S: float
    L: float
    R: float
    delta: float
    d: int

    def __post_init__(self) -> None:
        if min(self.S, self.L, self.R) < 0 or not (0 < self.delta < 1) or self.d < 1:
            raise ValueError(f"invalid radius parameters: {self}")


@dataclass
class DiscountedDesign:
    """Geometrically discounted second-moment matrix and moment vector.

    weight_sum tracks W_t = sum_{s<=t} gamma^(t-s) recursively (W <- gamma*W + 1);
    it equals (1 - gamma^t)/(1 - gamma) for gamma < 1 and t for gamma = 1.
    """

    dim: int
    gamma: float
    lam: float
    V: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)
    t: int = field(init=False, default=0)
    weight_sum: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        self.V = self.lam * np.eye(self.dim)
        self.b = np.zeros(self.dim)

    def update(self, x: np.ndarray, r: float) -> None:
        """Absorb one observation (x, r)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"expected shape ({self.dim},), got {x.shape}")
        g = self.gamma
        self.V *= g
        self.V += np.outer(x, x)
        self.V[np.diag_indices(self.dim)] += (1.0 - g) * self.lam
        self.b *= g
        self.b += r * x
        self.t += 1
        self.weight_sum = g * self.weight_sum + 1.0

    def update_block(self, xs: np.ndarray) -> None:
        """Absorb one multi-vector observation: V <- gamma*V + sum_i x_i x_i^T + (1-gamma)*lam*I.

        Counts as a single round for t and weight_sum (used by the multinomial
        transition design, where one visit contributes several feature vectors).
        """
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise DimensionMismatch(f"expected (*, {self.dim}), got {xs.shape}")
        g = self.gamma
        self.V *= g
        self.V += xs.T @ xs
        self.V[np.diag_indices(self.dim)] += (1.0 - g) * self.lam
        self.b *= g
        self.t += 1
        self.weight_sum = g * self.weight_sum + 1.0

    def ridge_estimate(self) -> np.ndarray:
        """Closed-form weighted ridge solution V^{-1} b (zero vector before data)."""
        if self.t == 0:
            return np.zeros(self.dim)
        return spd_solve(self.V, self.b)

    def copy(self) -> "DiscountedDesign":
        fresh = DiscountedDesign(self.dim, self.gamma, self.lam)
        fresh.V = self.V.copy()
        fresh.b = self.b.copy()
        fresh.t = self.t
        fresh.weight_sum = self.weight_sum
        return fresh


def linear_radius(params: RadiusParams, lam: float, weight_sum: float) -> float:
    """Confidence radius for the discounted ridge estimator.

    sqrt(lam)*S + R*sqrt(2*log(1/delta) + d*log(1 + L^2*W/(lam*d))); monotone
    nondecreasing in the tracked weight sum W.
    """
    log_term = 2.0 * math.log(1.0 / params.delta) + params.d * math.log(
        1.0 + params.L**2 * weight_sum / (lam * params.d)
    )
    return math.sqrt(lam) * params.S + params.R * math.sqrt(log_term)


def weighted_potential_bound(
    T: int, gamma: float, lam: float, L: float, d: int, weight_sum: float
) -> float:
    """Upper bound on sum_t ||x_t||^2 in the inverse running-design norm.

    2*max(1, L^2/lam)*d*(T*log(1/gamma) + log(1 + L^2*W_T/(d*lam))); the T*log(1/gamma)
    term vanishes in the undiscounted limit gamma = 1.
    """
    return (
        2.0
        * max(1.0, L**2 / lam)
        * d
        * (T * math.log(1.0 / gamma) + math.log(1.0 + L**2 * weight_sum / (d * lam)))
    )
