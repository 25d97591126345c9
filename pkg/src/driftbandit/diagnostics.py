"""Test-only oracles and property suites that need the hidden true path.

Nothing here is available to a real learner: the drift-error bounds take the
full parameter path, and the check suites replay randomized histories against
closed-form bounds. The harness CLI exposes them via `driftbandit selftest`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design import DiscountedDesign, RadiusParams, linear_radius, weighted_potential_bound
from .envs import ENV_STREAM, gen_arms, make_rng, rotating_path, sample_reward
from .glm import LinkModel, scb_radius
from .numerics import DimensionMismatch, logdet, quad_norm, quad_norm_many


def _bias_weights(gamma: float, n: int) -> np.ndarray:
    """sqrt of the partial weight sums sum_{s<=p} gamma^(n-s), p = 1..n."""
    ages = np.arange(n - 1, -1, -1, dtype=float)
    return np.sqrt(np.cumsum(gamma**ages))


def drift_error_bound(
    path: np.ndarray, design: DiscountedDesign, x: np.ndarray, params: RadiusParams
) -> float:
    """Full high-probability bound on |x^T (theta_hat - theta_t)| given the true path.

    `path` holds the true parameters for every absorbed round plus the current
    one (length design.t + 1). On a constant path the drift term is exactly
    zero and the bound reduces to radius * ||x|| in the inverse design norm.
    """
    path = np.asarray(path, dtype=float)
    n = design.t
    if path.shape[0] != n + 1:
        raise DimensionMismatch(f"need {n + 1} path points, got {path.shape[0]}")
    bias = 0.0
    if n:
        jumps = np.linalg.norm(np.diff(path, axis=0), axis=1)
        bias = params.L**2 * math.sqrt(params.d / design.lam) * float(
            _bias_weights(design.gamma, n) @ jumps
        )
    radius = linear_radius(params, design.lam, design.weight_sum)
    return bias + radius * quad_norm(design.V, x)


def scb_drift_error_bound(
    path: np.ndarray,
    design: DiscountedDesign,
    x: np.ndarray,
    link: LinkModel,
    delta: float,
) -> float:
    """Self-concordant analog: bound on |mu(x^T theta_tilde) - mu(x^T theta_t)|."""
    path = np.asarray(path, dtype=float)
    n = design.t
    if path.shape[0] != n + 1:
        raise DimensionMismatch(f"need {n + 1} path points, got {path.shape[0]}")
    d = design.dim
    bias = 0.0
    if n:
        jumps = np.linalg.norm(np.diff(path, axis=0), axis=1)
        c_p = link.k_mu * link.L**2 * math.sqrt(d / design.lam) * _bias_weights(design.gamma, n)
        bias = float(c_p @ jumps) / math.sqrt(link.c_mu)
    radius = scb_radius(link, design.lam, design.weight_sum, delta, d)
    scale = math.sqrt(4.0 + 8.0 * link.S) * link.k_mu / math.sqrt(link.c_mu)
    return scale * (bias + radius * quad_norm(design.V, x))


def design_logdet_bound(design: DiscountedDesign, L: float) -> tuple[float, float]:
    """(logdet V, d*log(lam + L^2*W/d)): the first never exceeds the second."""
    cap = design.dim * math.log(design.lam + L**2 * design.weight_sum / design.dim)
    return logdet(design.V), cap


# -- randomized check suites -------------------------------------------------

_DIMS = (1, 2, 5)
_GAMMAS = (0.5, 0.9, 0.99, 1.0)


@dataclass
class SuiteReport:
    name: str
    cases: int
    violations: int
    worst_margin: float = field(default=float("inf"))  # min(bound - value) seen

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _random_case(rng: np.random.Generator, max_T: int = 200) -> tuple[int, float, float, int]:
    d = int(rng.choice(_DIMS))
    gamma = float(rng.choice(_GAMMAS))
    lam = float(rng.choice([0.5, 1.0, 2.0]))
    T = int(rng.integers(5, max_T + 1))
    return d, gamma, lam, T


def check_potential_bound(n_sequences: int = 200, seed: int = 1) -> SuiteReport:
    """Sum of squared inverse-design norms stays under the closed-form cap."""
    rng = make_rng(seed, 0)
    report = SuiteReport("potential-bound", n_sequences, 0)
    L = 1.0
    for _ in range(n_sequences):
        d, gamma, lam, T = _random_case(rng)
        design = DiscountedDesign(d, gamma, lam)
        total = 0.0
        for _t in range(T):
            x = rng.standard_normal(d)
            nrm = np.linalg.norm(x)
            if nrm > L:
                x = x * (L / nrm)
            total += quad_norm(design.V, x) ** 2
            design.update(x, 0.0)
        bound = weighted_potential_bound(T, gamma, lam, L, d, design.weight_sum)
        margin = bound - total
        report.worst_margin = min(report.worst_margin, margin)
        if margin < -1e-9:
            report.violations += 1
    return report


def check_partial_trace_bound(n_sequences: int = 200, seed: int = 2) -> SuiteReport:
    """For undiscounted designs, every prefix of squared norms is at most d."""
    rng = make_rng(seed, 0)
    report = SuiteReport("partial-trace", n_sequences, 0)
    for _ in range(n_sequences):
        d, _gamma, lam, T = _random_case(rng, max_T=60)
        A = rng.standard_normal((T, d))
        U = lam * np.eye(d) + A.T @ A
        sq = quad_norm_many(U, A) ** 2
        prefix = np.cumsum(sq)
        margin = float(d + 1e-9 - prefix.max())
        report.worst_margin = min(report.worst_margin, margin)
        if prefix.max() > d + 1e-9:
            report.violations += 1
    return report


def check_logdet_bound(n_sequences: int = 200, seed: int = 3) -> SuiteReport:
    """logdet of the running design never exceeds the trace-based cap."""
    rng = make_rng(seed, 0)
    report = SuiteReport("logdet-bound", n_sequences, 0)
    L = 1.0
    for _ in range(n_sequences):
        d, gamma, lam, T = _random_case(rng)
        design = DiscountedDesign(d, gamma, lam)
        ok = True
        worst = float("inf")
        for _t in range(T):
            x = rng.standard_normal(d)
            nrm = np.linalg.norm(x)
            if nrm > L:
                x = x * (L / nrm)
            design.update(x, 0.0)
            value, cap = design_logdet_bound(design, L)
            worst = min(worst, cap - value)
            if value > cap + 1e-9:
                ok = False
        report.worst_margin = min(report.worst_margin, worst)
        if not ok:
            report.violations += 1
    return report


def linear_coverage_rate(
    n_runs: int = 500,
    T: int = 300,
    n_checkpoints: int = 20,
    delta: float = 0.05,
    gamma: float = 0.95,
    seed: int = 4,
) -> float:
    """Fraction of drifting-linear runs where the drift-error bound never fails.

    Each run draws arms uniformly at random from a fixed set, tracks the
    discounted design along a rotating true path, and at each checkpoint
    checks |x^T (theta_hat - theta_t)| <= drift_error_bound for every arm.
    """
    d, S, L, R = 2, 1.0, 1.0, 1.0
    lam = float(d)
    params = RadiusParams(S=S, L=L, R=R, delta=delta, d=d)
    path = rotating_path(T, S, d)
    arms = gen_arms(30, d, L, make_rng(seed, 7)).arms
    checkpoints = set(np.linspace(T // 10, T, n_checkpoints).astype(int).tolist())
    hits = 0
    for run in range(n_runs):
        rng = make_rng(seed + 1 + run, ENV_STREAM)
        design = DiscountedDesign(d, gamma, lam)
        ok = True
        for t in range(1, T + 1):
            theta_t = path.theta(t)
            if t in checkpoints:
                theta_hat = design.ridge_estimate()
                err = np.abs(arms @ (theta_hat - theta_t))
                radius = linear_radius(params, lam, design.weight_sum)
                norms = quad_norm_many(design.V, arms)
                n = design.t
                bias = 0.0
                if n:
                    jumps = np.linalg.norm(np.diff(path.thetas[: n + 1], axis=0), axis=1)
                    bias = L**2 * math.sqrt(d / lam) * float(_bias_weights(gamma, n) @ jumps)
                if np.any(err > bias + radius * norms + 1e-12):
                    ok = False
            x = arms[rng.integers(0, arms.shape[0])]
            r = sample_reward("gaussian_linear", x, theta_t, rng, R)
            design.update(x, r)
        hits += ok
    return hits / n_runs


def scb_coverage_rate(
    n_runs: int = 500,
    T: int = 120,
    n_checkpoints: int = 10,
    delta: float = 0.05,
    seed: int = 5,
) -> float:
    """Coverage of the self-concordant drift-error bound on drifting logistic data."""
    from .glm import SelfConcordantUcb

    d, S, L = 2, 1.0, 1.0
    link = LinkModel.logistic(S, L, m=1.0)
    path = rotating_path(T, S, d)
    arms = gen_arms(20, d, L, make_rng(seed, 7)).arms
    gamma = 0.97
    lam = d * math.log(T) / link.c_mu
    checkpoints = set(np.linspace(T // 5, T, n_checkpoints).astype(int).tolist())
    hits = 0
    for run in range(n_runs):
        rng = make_rng(seed + 1 + run, ENV_STREAM)
        learner = SelfConcordantUcb(link, d, gamma, R=0.5, delta=delta, lam=lam)
        ok = True
        for t in range(1, T + 1):
            theta_t = path.theta(t)
            if t in checkpoints:
                lhs = np.abs(
                    np.asarray(link.mu(arms @ learner.theta_tilde))
                    - np.asarray(link.mu(arms @ theta_t))
                )
                for i in range(arms.shape[0]):
                    rhs = scb_drift_error_bound(
                        path.thetas[: learner.design.t + 1], learner.design, arms[i], link, delta
                    )
                    if lhs[i] > rhs + 1e-12:
                        ok = False
                        break
            x = arms[rng.integers(0, arms.shape[0])]
            r = sample_reward("bernoulli_logistic", x, theta_t, rng)
            learner.step(x, r)
        hits += ok
    return hits / n_runs


def run_selftest(verbose: bool = True) -> bool:
    """Run the bound suites at full scale; prints one line per suite."""
    suites = [
        check_potential_bound(200),
        check_partial_trace_bound(200),
        check_logdet_bound(200),
    ]
    ok = all(s.passed for s in suites)
    lines = [
        f"{s.name}: {'PASS' if s.passed else 'FAIL'} "
        f"({s.cases} cases, {s.violations} violations, worst margin {s.worst_margin:.3e})"
        for s in suites
    ]
    rate = linear_coverage_rate(500)
    cov_ok = rate >= 0.93
    ok = ok and cov_ok
    lines.append(f"linear-coverage: {'PASS' if cov_ok else 'FAIL'} (rate {rate:.3f}, need >= 0.93)")
    if verbose:
        for line in lines:
            print(line)
    return ok
