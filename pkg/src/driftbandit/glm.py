"""Discounted UCB learners for generalized linear and self-concordant rewards.

Unlike the linear learner, the maximum-(quasi-)likelihood estimate is
nonlinear in the parameter, so the raw (arm, reward) history must be stored
and re-solved each round; discount weights are applied by age at solve time.
The score equation is strongly convex thanks to the lambda*c_mu ridge term, so
a damped Newton iteration finds the unique root. Infeasible estimates are
pulled back into the parameter ball by minimizing a score-space distance: in
the inverse-design norm for the plain GLM learner, and in the inverse local
curvature norm for the self-concordant learner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import expit

from .design import DiscountedDesign
from .linear import EmptyArmSet, clamp_gamma
from .numerics import cholesky_lower, quad_norm_many, spd_solve


class NoConvergence(Exception):
    """An iterative solver hit its iteration cap; the trial should abort."""


class UnsupportedLink(Exception):
    """Link kind outside {identity, logistic}."""


class EmptyConfidenceSet(Exception):
    """No discretized parameter satisfied the confidence-set inequality."""


def compute_c_mu(kind: str, S: float, L: float) -> float:
    """Infimum of the link derivative over feasible dot products.

    The logistic derivative is symmetric and decreasing in |z|, so the infimum
    over the ball sits at |z| = L*S.
    """
    if kind == "identity":
        return 1.0
    if kind == "logistic":
        p = expit(L * S)
        return float(p * (1.0 - p))
    raise UnsupportedLink(f"unknown link kind {kind!r}")


@dataclass
class LinkModel:
    """Inverse link and the constants that quantify its nonlinearity."""

    kind: str
    S: float
    L: float
    m: float  # reward upper bound (self-concordant radius only)
    k_mu: float
    c_mu: float

    @classmethod
    def identity(cls, S: float, L: float = 1.0, m: float = 1.0) -> "LinkModel":
        return cls("identity", S, L, m, k_mu=1.0, c_mu=1.0)

    @classmethod
    def logistic(cls, S: float, L: float = 1.0, m: float = 1.0) -> "LinkModel":
        return cls("logistic", S, L, m, k_mu=0.25, c_mu=compute_c_mu("logistic", S, L))

    def mu(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.asarray(z, dtype=float)
        return expit(z)

    def mu_prime(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.ones_like(np.asarray(z, dtype=float))
        p = expit(z)
        return p * (1.0 - p)


def glm_radius(link: LinkModel, R: float, delta: float, d: int, lam: float, weight_sum: float) -> float:
    """Confidence radius for the GLM score estimator (the linear radius with S -> c_mu*S)."""
    log_term = 2.0 * math.log(1.0 / delta) + d * math.log(
        1.0 + link.L**2 * weight_sum / (lam * d)
    )
    return math.sqrt(lam) * link.c_mu * link.S + R * math.sqrt(log_term)


def scb_radius(link: LinkModel, lam: float, weight_sum: float, delta: float, d: int) -> float:
    """Curvature-norm confidence radius for the self-concordant learner."""
    lc = lam * link.c_mu
    m = link.m
    root = math.sqrt(lc)
    return (
        root / (2.0 * m)
        + (2.0 * m / root) * (math.log(1.0 / delta) + d * math.log(2.0))
        + (d * m / root) * math.log(1.0 + link.L**2 * link.k_mu * weight_sum / (lc * d))
        + root * link.S
    )


def piecewise_rho(link: LinkModel, lam: float, gamma: float, D: float, delta: float, d: int) -> float:
    """Confidence-set radius for the piecewise-stationary parameter search.

    Combines two geometric drift-leakage terms gamma^D/(1-gamma) with the
    self-concordant concentration radius over the last D rounds. Requires
    gamma < 1 (D is the stationarity look-back in rounds).
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError("piecewise search requires gamma in (0, 1)")
    lc = lam * link.c_mu
    root = math.sqrt(lc)
    m = link.m
    leak = gamma**D / (1.0 - gamma)
    beta_breve = (
        (d * m / root)
        * math.log(1.0 + link.L**2 * link.k_mu * (1.0 - gamma ** (2.0 * D)) / (lc * d * (1.0 - gamma)))
        + root / (2.0 * m)
        + (2.0 * m / root) * math.log(1.0 / delta)
        + (2.0 * m / root) * d * math.log(2.0)
        + root * link.S
    )
    return (2.0 * link.L**2 * link.S * link.k_mu / root) * leak + (link.L * m / root) * leak + beta_breve


def optimal_gamma_glm(d: int, T: int, path_len: float, link: LinkModel) -> float:
    """1 - max(1/T, sqrt(k_mu*c_mu*P_T/(dT))), clamped."""
    return clamp_gamma(
        1.0 - max(1.0 / T, math.sqrt(link.k_mu * link.c_mu * path_len / (d * T))), T
    )


def optimal_gamma_self_concordant(d: int, T: int, path_len: float, link: LinkModel) -> float:
    """1 - max(1/T, sqrt(k_mu*P_T/(dT))), clamped."""
    return clamp_gamma(1.0 - max(1.0 / T, math.sqrt(link.k_mu * path_len / (d * T))), T)


def optimal_gamma_piecewise(d: int, T: int, n_changes: float) -> float:
    """1 - max(1/T, (Gamma_T/(dT))^(2/3)), clamped."""
    return clamp_gamma(1.0 - max(1.0 / T, (n_changes / (d * T)) ** (2.0 / 3.0)), T)


class _History:
    """Append-only (arm, reward) log with geometrically aged weights."""

    def __init__(self, d: int, capacity: int = 256):
        self._X = np.empty((capacity, d))
        self._r = np.empty(capacity)
        self._w = np.empty(capacity)
        self.n = 0

    def append(self, x: np.ndarray, r: float, gamma: float) -> None:
        if self.n == self._r.shape[0]:
            self._X = np.concatenate([self._X, np.empty_like(self._X)])
            self._r = np.concatenate([self._r, np.empty_like(self._r)])
            self._w = np.concatenate([self._w, np.empty_like(self._w)])
        self._w[: self.n] *= gamma
        self._X[self.n] = x
        self._r[self.n] = r
        self._w[self.n] = 1.0
        self.n += 1

    @property
    def X(self) -> np.ndarray:
        return self._X[: self.n]

    @property
    def r(self) -> np.ndarray:
        return self._r[: self.n]

    @property
    def w(self) -> np.ndarray:
        return self._w[: self.n]


def _project_ball(theta: np.ndarray, S: float) -> np.ndarray:
    nrm = float(np.linalg.norm(theta))
    if nrm <= S:
        return theta
    return theta * (S / nrm)


class DiscountedGlmUcb:
    """Optimistic GLM learner on discounted data (bonus scale 2*k_mu/c_mu)."""

    MAX_NEWTON = 100
    MAX_PGD = 500
    PGD_TOL = 1e-7

    def __init__(
        self,
        link: LinkModel,
        d: int,
        gamma: float,
        R: float,
        delta: float,
        lam: float | None = None,
    ):
        self.link = link
        self.d = d
        self.gamma = gamma
        self.R = R
        self.delta = delta
        self.lam = d / link.c_mu**2 if lam is None else lam
        self.design = DiscountedDesign(d, gamma, self.lam)
        self.history = _History(d)
        self.theta_hat = np.zeros(d)
        self.theta_tilde = np.zeros(d)
        self.last_residual = 0.0
        self._refresh()

    # -- estimation ---------------------------------------------------------

    def score(self, theta: np.ndarray) -> np.ndarray:
        """lam*c_mu*theta + sum_s w_s * mu(x_s^T theta) * x_s over stored history."""
        theta = np.asarray(theta, dtype=float)
        out = self.lam * self.link.c_mu * theta
        if self.history.n:
            z = self.history.X @ theta
            out = out + (self.history.w * self.link.mu(z)) @ self.history.X
        return out

    def _solve_tol(self) -> float:
        return min(1e-10 * (1.0 + self.design.weight_sum), 1e-9)

    def solve_score_equation(self) -> np.ndarray:
        """Root of the regularized score equation via damped Newton (warm started)."""
        X, r, w = self.history.X, self.history.r, self.history.w
        lc = self.lam * self.link.c_mu
        tol = self._solve_tol()

        def residual(theta: np.ndarray) -> np.ndarray:
            return lc * theta + (w * (self.link.mu(X @ theta) - r)) @ X

        theta = self.theta_hat.copy()
        if self.history.n == 0:
            self.last_residual = 0.0
            return np.zeros(self.d)
        grad = residual(theta)
        resid = float(np.max(np.abs(grad)))
        for _ in range(self.MAX_NEWTON):
            if resid <= tol:
                self.last_residual = resid
                return theta
            hess = lc * np.eye(self.d) + (X.T * (w * self.link.mu_prime(X @ theta))) @ X
            step = spd_solve(hess, grad)
            # damped Newton: halve until the residual norm actually shrinks
            alpha = 1.0
            while alpha > 2**-40:
                cand = theta - alpha * step
                cand_grad = residual(cand)
                cand_resid = float(np.max(np.abs(cand_grad)))
                if cand_resid <= (1.0 - 0.5 * alpha) * resid + 1e-15:
                    theta, grad, resid = cand, cand_grad, cand_resid
                    break
                alpha *= 0.5
            else:
                break  # no representable progress left
        if resid <= tol:
            self.last_residual = resid
            return theta
        raise NoConvergence(f"Newton stalled at residual {resid:.3e} (tol {tol:.3e})")

    def curvature_matrix(self, theta: np.ndarray) -> np.ndarray:
        """lam*c_mu*I + sum_s w_s * mu'(x_s^T theta) * x_s x_s^T."""
        theta = np.asarray(theta, dtype=float)
        out = self.lam * self.link.c_mu * np.eye(self.d)
        if self.history.n:
            X, w = self.history.X, self.history.w
            out = out + (X.T * (w * self.link.mu_prime(X @ theta))) @ X
        return out

    # -- projection ---------------------------------------------------------

    def _projection_norm_matrix(self, theta: np.ndarray) -> np.ndarray:
        del theta  # fixed inverse-design norm for the plain GLM learner
        return self.design.V

    def _pgd(self, start: np.ndarray, target: np.ndarray, norm_matrix: np.ndarray) -> np.ndarray:
        """Projected gradient descent for ||score(theta) - target||^2 in the inverse norm.

        Backtracking enforces the usual majorization decrease; successful steps
        feed a Barzilai-Borwein guess for the next one. Stationarity is the
        unit-step gradient mapping ||theta - P(theta - grad)||, which vanishes
        at any ball-constrained stationary point.
        """
        lo = cholesky_lower(norm_matrix)

        def value_grad(theta: np.ndarray) -> tuple[float, np.ndarray]:
            resid = self.score(theta) - target
            y = cho_solve((lo, True), resid)
            grad = 2.0 * self.curvature_matrix(theta) @ y
            return float(resid @ y), grad

        theta = start.copy()
        val, grad = value_grad(theta)
        eta0 = 1.0 / (2.0 * float(np.max(np.abs(np.diag(norm_matrix)))) + 1.0)
        eta = eta0
        recent = [val]  # non-monotone (GLL) reference window for spectral steps
        for _ in range(self.MAX_PGD):
            mapped = _project_ball(theta - grad, self.link.S)
            if float(np.linalg.norm(theta - mapped)) <= self.PGD_TOL:
                return theta
            moved = False
            while eta > 2**-60:
                cand = _project_ball(theta - eta * grad, self.link.S)
                diff = cand - theta
                cand_val, cand_grad = value_grad(cand)
                if cand_val <= max(recent) + 1e-4 * float(grad @ diff) + 1e-15:
                    grad_diff = cand_grad - grad
                    curv = float(diff @ grad_diff)
                    sq = float(diff @ diff)
                    bb = sq / curv if curv > 0 else eta * 2.0
                    # keep the spectral step in a sane band so float noise in the
                    # curvature estimate cannot freeze progress
                    eta = min(1e8, max(bb, 1e-3 * eta0))
                    theta, val, grad = cand, cand_val, cand_grad
                    recent.append(val)
                    if len(recent) > 10:
                        recent.pop(0)
                    moved = True
                    break
                eta *= 0.5
            if not moved:
                # no further float-representable progress; treat as stationary
                return theta
        raise NoConvergence("projected gradient descent did not reach stationarity")

    def project(self, theta_hat: np.ndarray) -> np.ndarray:
        """Pull an infeasible estimate back into the ball (identity when feasible)."""
        if float(np.linalg.norm(theta_hat)) <= self.link.S:
            return theta_hat
        target = self.score(theta_hat)
        start = _project_ball(theta_hat, self.link.S)
        return self._pgd(start, target, self._projection_norm_matrix(start))

    # -- selection ----------------------------------------------------------

    def bonus_scale(self) -> float:
        return 2.0 * self.link.k_mu / self.link.c_mu

    def radius(self) -> float:
        return glm_radius(
            self.link, self.R, self.delta, self.d, self.lam, self.design.weight_sum
        )

    def select(self, arms: np.ndarray) -> int:
        arms = np.asarray(arms, dtype=float)
        if arms.ndim != 2 or arms.shape[0] == 0:
            raise EmptyArmSet("no arms to select from")
        scores = self.link.mu(arms @ self.theta_tilde) + self.bonus_scale() * self.beta * quad_norm_many(self.design.V, arms)
        return int(np.argmax(scores))

    def _refresh(self) -> None:
        self.theta_hat = self.solve_score_equation()
        self.theta_tilde = self.project(self.theta_hat)
        self.beta = self.radius()

    def step(self, x: np.ndarray, r: float) -> None:
        self.design.update(x, r)
        self.history.append(np.asarray(x, dtype=float), r, self.gamma)
        self._refresh()


class SelfConcordantUcb(DiscountedGlmUcb):
    """GLM learner with curvature-aware projection and radius.

    The projection norm depends on the candidate parameter itself, which makes
    the exact problem nonconvex; we alternate between freezing the curvature
    matrix at the current iterate and minimizing in that fixed norm.
    """

    OUTER_PROJECTIONS = 5

    def __init__(
        self,
        link: LinkModel,
        d: int,
        gamma: float,
        R: float,
        delta: float,
        lam: float | None = None,
        horizon: int | None = None,
    ):
        if lam is None:
            if horizon is None:
                raise ValueError("pass lam explicitly or a horizon for the d*log(T)/c_mu default")
            lam = d * math.log(horizon) / link.c_mu
        super().__init__(link, d, gamma, R, delta, lam)

    def bonus_scale(self) -> float:
        return 2.0 * math.sqrt(1.0 + 2.0 * self.link.S) * self.link.k_mu / math.sqrt(self.link.c_mu)

    def radius(self) -> float:
        return scb_radius(self.link, self.lam, self.design.weight_sum, self.delta, self.d)

    def project(self, theta_hat: np.ndarray) -> np.ndarray:
        if float(np.linalg.norm(theta_hat)) <= self.link.S:
            return theta_hat
        target = self.score(theta_hat)
        theta = _project_ball(theta_hat, self.link.S)
        for _ in range(self.OUTER_PROJECTIONS):
            frozen = self.curvature_matrix(theta)
            new_theta = self._pgd(theta, target, frozen)
            if float(np.linalg.norm(new_theta - theta)) <= 1e-9:
                return new_theta
            theta = new_theta
        return theta


class PiecewiseSelfConcordantUcb:
    """Parameter-based optimistic search for piecewise-stationary rewards (d = 2).

    Maximizes mu(x^T theta) jointly over arms and a polar grid of the
    parameter ball filtered by the confidence-set inequality
    ||g(theta) - g(theta_hat)|| in the inverse local-curvature norm <= rho.
    Monotonicity of the link reduces the inner maximization to a linear one.
    """

    def __init__(
        self,
        link: LinkModel,
        d: int,
        gamma: float,
        horizon: int,
        delta: float,
        lam: float | None = None,
        n_radii: int = 64,
        n_angles: int = 256,
    ):
        if d != 2:
            raise ValueError("piecewise parameter search supports d = 2 only")
        if not (0.0 < gamma < 1.0):
            raise ValueError("piecewise search requires gamma in (0, 1)")
        self.link = link
        self.d = d
        self.gamma = gamma
        self.delta = delta
        self.lam = d * math.log(horizon) / link.c_mu if lam is None else lam
        self.lookback = math.log(horizon) / math.log(1.0 / gamma)
        self.rho = piecewise_rho(link, self.lam, gamma, self.lookback, delta, d)
        self.design = DiscountedDesign(d, gamma, self.lam)
        self.history = _History(d)
        self.theta_hat = np.zeros(d)
        self.last_witness = np.zeros(d)
        radii = np.linspace(link.S / n_radii, link.S, n_radii)
        angles = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
        rr, aa = np.meshgrid(radii, angles, indexing="ij")
        self.grid = np.column_stack([(rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel()])
        self._solver = DiscountedGlmUcb(link, d, gamma, R=0.5, delta=delta, lam=self.lam)

    def confidence_distances(self) -> np.ndarray:
        """||g(theta) - g(theta_hat)||^2 in the theta-local inverse curvature norm, per grid point.

        Evaluated in grid chunks: the (history x grid) intermediate would
        otherwise grow to hundreds of MB at long horizons.
        """
        lc = self.lam * self.link.c_mu
        target = self._solver.score(self.theta_hat)
        n_grid = self.grid.shape[0]
        out = np.empty(n_grid)
        chunk = max(1, min(n_grid, 2**22 // max(1, self.history.n)))
        if self.history.n:
            X, w = self.history.X, self.history.w
            prods = np.column_stack([X[:, 0] ** 2, X[:, 0] * X[:, 1], X[:, 1] ** 2])
        for lo in range(0, n_grid, chunk):
            th = self.grid[lo : lo + chunk].T  # (2, c)
            if self.history.n:
                z = X @ th  # (n, c)
                g = lc * th + X.T @ (w[:, None] * self.link.mu(z))
                quad = prods.T @ (w[:, None] * self.link.mu_prime(z))  # (3, c)
                h11 = lc + quad[0]
                h12 = quad[1]
                h22 = lc + quad[2]
            else:
                g = lc * th
                h11 = np.full(th.shape[1], lc)
                h12 = np.zeros(th.shape[1])
                h22 = np.full(th.shape[1], lc)
            d1 = g[0] - target[0]
            d2 = g[1] - target[1]
            det = h11 * h22 - h12 * h12
            out[lo : lo + chunk] = (d1 * d1 * h22 - 2.0 * d1 * d2 * h12 + d2 * d2 * h11) / det
        return out

    def select(self, arms: np.ndarray) -> tuple[int, np.ndarray]:
        arms = np.asarray(arms, dtype=float)
        if arms.ndim != 2 or arms.shape[0] == 0:
            raise EmptyArmSet("no arms to select from")
        cap = self.rho**2 if self.rho >= 0 else -np.inf
        feasible = self.confidence_distances() <= cap
        if not feasible.any():
            raise EmptyConfidenceSet(
                "no grid point satisfies the confidence inequality; widen the grid"
            )
        lin = arms @ self.grid[feasible].T  # (n_arms, n_feasible)
        per_arm_best = lin.argmax(axis=1)
        per_arm_val = lin[np.arange(arms.shape[0]), per_arm_best]
        arm = int(np.argmax(per_arm_val))
        witness = self.grid[feasible][per_arm_best[arm]]
        self.last_witness = witness
        return arm, witness

    def witness_in_confidence_set(self, theta: np.ndarray) -> bool:
        """Exactly the feasibility check used by select, for one parameter."""
        cap = self.rho**2 if self.rho >= 0 else -np.inf
        idx = np.where(np.all(self.grid == np.asarray(theta), axis=1))[0]
        if idx.size:
            return bool(self.confidence_distances()[idx[0]] <= cap)
        saved = self.grid
        try:
            self.grid = np.asarray(theta, dtype=float)[None, :]
            return bool(self.confidence_distances()[0] <= cap)
        finally:
            self.grid = saved

    def step(self, x: np.ndarray, r: float) -> None:
        self.design.update(x, r)
        self.history.append(np.asarray(x, dtype=float), r, self.gamma)
        self._solver.design = self.design
        self._solver.history = self.history
        self._solver.theta_hat = self.theta_hat
        self.theta_hat = self._solver.solve_score_equation()
