"""Synthetic drifting environments and the dynamic-regret oracle.

Ground truth is a time-varying parameter sequence theta_t with a computable
path length; rewards are Gaussian-linear or Bernoulli-logistic. Pseudo-regret
is always measured against the per-round best arm under the true parameters,
so it is noiseless and nonnegative by construction.

RNG policy: all randomness flows through numpy's counter-based Philox
generator, keyed by (seed, stream). Streams keep environment noise, learner
randomness and arm-set generation independent; per-trial seeds are
base_seed + trial_index. This is fixed so traces are reproducible across
platforms and safe to parallelize across trials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

ENV_STREAM = 0
LEARNER_STREAM = 1
ARMS_STREAM = 2


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, stream)."""
    key = np.array([seed % 2**64, stream % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class ParameterPath:
    """Materialized sequence of true parameters theta_1..theta_T."""

    kind: str
    d: int
    T: int
    thetas: np.ndarray  # (T, d)

    def theta(self, t: int) -> np.ndarray:
        """True parameter at round t (1-indexed)."""
        return self.thetas[t - 1]


def rotating_theta(t: int, T: int, S: float, d: int = 2) -> np.ndarray:
    """Parameter at round t of the uniformly rotating path.

    Starts at S*e_1 and completes one full counterclockwise revolution over T
    rounds (round T+1 would close the loop). For d > 2 the rotation lives in
    the first two coordinates.
    """
    if d < 2:
        raise ValueError("rotating path needs d >= 2")
    angle = 2.0 * np.pi * (t - 1) / T
    theta = np.zeros(d)
    theta[0] = S * np.cos(angle)
    theta[1] = S * np.sin(angle)
    return theta


def rotating_path(T: int, S: float, d: int = 2) -> ParameterPath:
    ts = np.arange(1, T + 1)
    angles = 2.0 * np.pi * (ts - 1) / T
    thetas = np.zeros((T, d))
    thetas[:, 0] = S * np.cos(angles)
    thetas[:, 1] = S * np.sin(angles)
    return ParameterPath("rotating", d, T, thetas)


def constant_path(T: int, theta: np.ndarray) -> ParameterPath:
    theta = np.asarray(theta, dtype=float)
    return ParameterPath("constant", theta.shape[0], T, np.tile(theta, (T, 1)))


def piecewise_path(T: int, d: int, S: float, n_changes: int, seed: int) -> ParameterPath:
    """Piecewise-constant path with n_changes abrupt jumps.

    Change points are uniformly spaced; segment values are drawn uniformly on
    the radius-S sphere from a dedicated seeded stream.
    """
    rng = make_rng(seed, ARMS_STREAM + 1)
    n_segments = n_changes + 1
    values = rng.standard_normal((n_segments, d))
    values *= S / np.linalg.norm(values, axis=1, keepdims=True)
    bounds = np.linspace(0, T, n_segments + 1).astype(int)
    thetas = np.empty((T, d))
    for i in range(n_segments):
        thetas[bounds[i] : bounds[i + 1]] = values[i]
    return ParameterPath("piecewise", d, T, thetas)


def path_length(path: ParameterPath) -> float:
    """Total variation sum ||theta_{t-1} - theta_t||_2 over t = 2..T."""
    diffs = np.diff(path.thetas, axis=0)
    return float(np.linalg.norm(diffs, axis=1).sum())


@dataclass
class ArmSet:
    arms: np.ndarray  # (n, d)
    L: float

    def __len__(self) -> int:
        return self.arms.shape[0]


def gen_arms(n: int, d: int, L: float, rng: np.random.Generator) -> ArmSet:
    """n standard-normal directions rescaled to exact norm L."""
    if n < 1:
        raise ValueError("need at least one arm")
    raw = rng.standard_normal((n, d))
    raw *= L / np.linalg.norm(raw, axis=1, keepdims=True)
    return ArmSet(raw, L)


def sample_reward(
    kind: str,
    x: np.ndarray,
    theta: np.ndarray,
    rng: np.random.Generator,
    R: float = 1.0,
) -> float:
    """Draw one reward for arm x under the true parameter.

    gaussian_linear: x^T theta + N(0, R^2); bernoulli_logistic: Bernoulli of
    the sigmoid of x^T theta.
    """
    z = float(x @ theta)
    if kind == "gaussian_linear":
        return z + R * rng.standard_normal()
    if kind == "bernoulli_logistic":
        return float(rng.random() < expit(z))
    raise ValueError(f"unknown reward kind {kind!r}")


def instant_regret(
    arms: np.ndarray, theta: np.ndarray, chosen: int, kind: str = "gaussian_linear"
) -> float:
    """Per-round pseudo-regret of the chosen arm against the best arm.

    The logistic case compares expected rewards through the sigmoid; since the
    link is increasing, the best arm is the same dot-product maximizer.
    """
    scores = arms @ theta
    best = float(scores.max())
    got = float(scores[chosen])
    if kind == "bernoulli_logistic":
        return float(expit(best) - expit(got))
    return best - got
