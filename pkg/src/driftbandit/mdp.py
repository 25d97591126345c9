"""Episodic non-stationary mixture MDPs and their discounted optimistic learners.

Two transition models share one chassis: linear mixtures (transition rows are
convex combinations of known base kernels) and multinomial-logit mixtures
(softmax over reachable-state features). Instances are synthetic desk-scale
problems whose per-episode parameters drift along smooth loops with a
controllable total path length; rewards are deterministic linear functions of
known features, so the reward radius carries no noise term.

Planning is optimistic value iteration clipped to [0, H]; regret is measured
per episode against an exact dynamic-programming oracle on the true
time-varying model. Episode flow is: plan from data through episode k-1, roll
the greedy policy out, then absorb the transcript (the estimators are defined
on strictly-past data).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design import DiscountedDesign
from .envs import make_rng
from .numerics import quad_norm_many, spd_solve

MAX_SIZES = {"num_states": 10, "num_actions": 4, "H": 8, "d": 6}


class InvalidSizes(Exception):
    """Requested instance dimensions outside the supported desk scale."""


class NoConvergence(Exception):
    """Multinomial likelihood solver hit its iteration cap."""


@dataclass
class MixtureMdp:
    kind: str  # "linear_mixture" | "mnl"
    num_states: int
    num_actions: int
    H: int
    K: int
    d: int
    phi: np.ndarray  # (S, A, d) reward features
    psi: np.ndarray  # (S, A, S, d) transition features, indexed [s, a, s']
    theta: np.ndarray  # (K, H, d) reward parameters
    w: np.ndarray  # (K, H, d) transition parameters
    S_theta: float
    S_w: float
    L_phi: float
    L_psi: float
    init_state: int = 0
    reachable: Optional[np.ndarray] = None  # (S, A, U) state indices, MNL only
    kappa: float = 1.0
    U: int = 0

    def reward_matrix(self, k: int, h: int) -> np.ndarray:
        """(S, A) true expected rewards at episode k, stage h (1-indexed)."""
        return self.phi @ self.theta[k - 1, h - 1]

    def transition_matrix(self, k: int, h: int) -> np.ndarray:
        """(S, A, S) true transition probabilities at episode k, stage h."""
        if self.kind == "linear_mixture":
            return self.psi @ self.w[k - 1, h - 1]
        probs = np.zeros((self.num_states, self.num_actions, self.num_states))
        logits = np.einsum("saud,d->sau", self.reachable_features(), self.w[k - 1, h - 1])
        reach_probs = _softmax(logits)
        s_idx = np.arange(self.num_states)[:, None, None]
        a_idx = np.arange(self.num_actions)[None, :, None]
        probs[s_idx, a_idx, self.reachable] = reach_probs
        return probs

    def reachable_features(self) -> np.ndarray:
        """(S, A, U, d) transition features gathered over each reachable set."""
        s_idx = np.arange(self.num_states)[:, None, None]
        a_idx = np.arange(self.num_actions)[None, :, None]
        return self.psi[s_idx, a_idx, self.reachable]


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def mnl_probs(feats: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Softmax transition distribution over one reachable set."""
    feats = np.asarray(feats, dtype=float)
    if feats.shape[0] == 0:
        raise ValueError("reachable set must be nonempty")
    return _softmax(feats @ np.asarray(w, dtype=float))


def _two_orthonormal(rng: np.random.Generator, d: int, sum_zero: bool) -> tuple[np.ndarray, np.ndarray]:
    """Two orthonormal drift directions, optionally inside the sum-zero subspace."""

    def draw() -> np.ndarray:
        v = rng.standard_normal(d)
        if sum_zero:
            v -= v.mean()
        return v

    a = draw()
    a /= np.linalg.norm(a)
    b = draw()
    b -= (b @ a) * a
    nrm = np.linalg.norm(b)
    if nrm < 1e-9:  # extremely unlikely; fall back to a lone direction
        return a, np.zeros(d)
    return a, b / nrm


def _loop_path(
    K: int, H: int, center: np.ndarray, amp: float, dirs: tuple[np.ndarray, np.ndarray], loops: float
) -> np.ndarray:
    """(K, H, d) smooth looping path around `center` with per-stage phase offsets."""
    d = center.shape[0]
    out = np.empty((K, H, d))
    ks = np.arange(K) / max(K - 1, 1)
    for h in range(H):
        phase = 2.0 * np.pi * loops * ks + 2.0 * np.pi * h / (H + 1)
        osc = np.outer(np.cos(phase), dirs[0]) + np.outer(np.sin(phase), dirs[1])
        out[:, h, :] = center + amp * osc
    return out


def build_instance(
    kind: str,
    seed: int,
    num_states: int = 5,
    num_actions: int = 3,
    H: int = 5,
    d: int = 4,
    K: int = 400,
    drift: float = 0.0,
    loops: float = 1.5,
    reachable_size: int = 2,
    mnl_feature_norm: float = 0.05,
    reward_sharpness: float = 8.0,
    action_mix: float = 0.0,
    rich_stages: int = 2,
) -> MixtureMdp:
    """Valid synthetic instance with drift-controllable parameter paths.

    drift = 0 freezes both parameter paths (total path length exactly zero);
    drift in (0, 1] scales the loop amplitudes, staying inside the simplex /
    parameter balls by construction.

    Action signal lives in the rewards of the last `rich_stages` stages
    (reward_sharpness pushes reward features toward simplex vertices; earlier
    stages get rank-one reward parameters, so their rewards are action-free).
    action_mix sets how much the transition side depends on the action rather
    than only on the state. The defaults keep the desk problem learnable at a
    few hundred episodes despite the conservative theory bonuses: optimism
    saturates early-stage values at H, and concentrating the decision signal
    where the value-aggregated bonuses are smallest keeps that saturation
    harmless.
    """
    sizes = {"num_states": num_states, "num_actions": num_actions, "H": H, "d": d}
    for name, cap in MAX_SIZES.items():
        if sizes[name] > cap:
            raise InvalidSizes(f"{name} exceeds the supported maximum {cap}")
    if min(num_states, num_actions, H, d, K) < 1 or not (0.0 <= drift <= 1.0):
        raise InvalidSizes("sizes must be positive and drift within [0, 1]")
    if not (0.0 <= action_mix <= 1.0):
        raise InvalidSizes("action_mix must lie in [0, 1]")
    rng = make_rng(seed, 3)
    S, A = num_states, num_actions

    phi = np.exp(reward_sharpness * rng.random((S, A, d)))
    phi /= phi.sum(axis=2, keepdims=True)  # near-vertex simplex rows: ||phi||_1 = 1

    # Blend the reward-parameter center toward the action-neutral point 0.5*ones
    # as drift grows: at full drift the time-averaged parameter carries almost
    # no action signal, so action rankings genuinely reverse along the loop and
    # forgetting has something to buy.
    # Reward-parameter path. At drift = 0 the center is a generic spread point
    # (action gaps come from the feature geometry alone). As drift grows the
    # center blends toward the action-neutral point 0.5*ones and the loop
    # rotates in two sum-zero coordinate-pair directions: every dimension
    # keeps oscillating (no starved feature directions), rankings between
    # vertex-like feature rows reverse along the loop, and the time-averaged
    # parameter carries no action signal for an undiscounted learner to hide
    # behind.
    c_random = 0.15 + 0.7 * rng.random(d)
    c_theta = (1.0 - drift) * c_random + drift * 0.5
    if d >= 2:
        u = np.zeros(d)
        u[0], u[1] = 1.0, -1.0
        u /= math.sqrt(2.0)
        v = np.zeros(d)
        if d >= 4:
            v[2], v[3] = 1.0, -1.0
            v /= math.sqrt(2.0)
        theta_dirs = (u, v)
        per_dim = 1.0 / math.sqrt(2.0)  # max |oscillation| per coordinate
    else:
        theta_dirs = (np.ones(1), np.zeros(1))
        per_dim = 1.0
    slack = min(c_theta.min(), 1.0 - c_theta.max())
    amp_theta = drift * 0.9 * slack / per_dim
    theta = _loop_path(K, H, c_theta, amp_theta, theta_dirs, loops)
    # early stages: rank-one parameter -> rewards there are action-independent
    # (phi rows are simplex, so phi^T (m * ones) = m for every state-action pair)
    for h in range(max(0, H - rich_stages)):
        theta[:, h, :] = theta[:, h, :].mean(axis=1, keepdims=True)

    if kind == "linear_mixture":
        state_base = rng.random((S, 1, S, d)) + 0.1
        pair_base = rng.random((S, A, S, d)) + 0.1
        base = (1.0 - action_mix) * state_base + action_mix * pair_base
        base /= base.sum(axis=2, keepdims=True)  # each base kernel is a row-stochastic family
        psi = base
        c_w = np.full(d, 1.0 / d)
        w_dirs = _two_orthonormal(rng, d, sum_zero=True)
        amp_w = drift * 0.9 / (d * math.sqrt(2.0))
        w = _loop_path(K, H, c_w, amp_w, w_dirs, loops)
        if w.min() < 0:
            raise InvalidSizes("mixture weights left the simplex; reduce drift")
        mdp = MixtureMdp(
            kind, S, A, H, K, d, phi, psi, theta, w,
            S_theta=float(np.linalg.norm(theta, axis=2).max()),
            S_w=float(np.linalg.norm(w, axis=2).max()),
            L_phi=1.0,
            L_psi=math.sqrt(d),
        )
    elif kind == "mnl":
        U = min(reachable_size, S)
        reachable = np.empty((S, A, U), dtype=int)
        for s in range(S):
            reach_s = rng.choice(S, size=U, replace=False)  # shared across actions
            for a in range(A):
                reachable[s, a] = reach_s
        psi = np.zeros((S, A, S, d))
        state_feats = rng.standard_normal((S, 1, U, d))
        pair_feats = rng.standard_normal((S, A, U, d))
        feats = (1.0 - action_mix) * state_feats + action_mix * pair_feats
        feats *= mnl_feature_norm / np.linalg.norm(feats, axis=3, keepdims=True)
        s_idx = np.arange(S)[:, None, None]
        a_idx = np.arange(A)[None, :, None]
        psi[s_idx, a_idx, reachable] = feats
        S_w_cap = 1.0
        raw = rng.standard_normal(d)
        c_w = raw / np.linalg.norm(raw) * 0.4 * S_w_cap
        w_dirs = _two_orthonormal(rng, d, sum_zero=False)
        amp_w = drift * 0.9 * (S_w_cap - np.linalg.norm(c_w)) / math.sqrt(2.0)
        w = _loop_path(K, H, c_w, amp_w, w_dirs, loops)
        z_max = mnl_feature_norm * S_w_cap
        p_min = 1.0 / (1.0 + (U - 1) * math.exp(2.0 * z_max))
        mdp = MixtureMdp(
            kind, S, A, H, K, d, phi, psi, theta, w,
            S_theta=float(np.linalg.norm(theta, axis=2).max()),
            S_w=S_w_cap,
            L_phi=1.0,
            L_psi=mnl_feature_norm,
            reachable=reachable,
            kappa=p_min**2,
            U=U,
        )
    else:
        raise InvalidSizes(f"unknown kind {kind!r}")
    return mdp


def total_path_length(mdp: MixtureMdp) -> float:
    """Combined reward + transition parameter variation across episodes."""
    dt = np.linalg.norm(np.diff(mdp.theta, axis=0), axis=2).sum()
    dw = np.linalg.norm(np.diff(mdp.w, axis=0), axis=2).sum()
    return float(dt + dw)


def estimate_kappa(mdp: MixtureMdp, n_samples: int = 200, seed: int = 0) -> float:
    """Monte-Carlo lower estimate of the pairwise-probability-product floor."""
    if mdp.kind != "mnl":
        raise ValueError("kappa is defined for the MNL transition model")
    rng = make_rng(seed, 4)
    feats = mdp.reachable_features()
    worst = 1.0
    for _ in range(n_samples):
        raw = rng.standard_normal(mdp.d)
        w = raw / np.linalg.norm(raw) * mdp.S_w * rng.random() ** (1.0 / mdp.d)
        probs = _softmax(np.einsum("saud,d->sau", feats, w))
        worst = min(worst, float((probs.min(axis=2) ** 2).min()))
    return worst


# -- exact dynamic programming on the true model ------------------------------


def solve_optimal(mdp: MixtureMdp, k: int) -> tuple[float, np.ndarray]:
    """Optimal value at the initial state and the greedy optimal policy (H, S)."""
    V = np.zeros(mdp.num_states)
    policy = np.zeros((mdp.H, mdp.num_states), dtype=int)
    for h in range(mdp.H, 0, -1):
        q = mdp.reward_matrix(k, h) + mdp.transition_matrix(k, h) @ V
        policy[h - 1] = q.argmax(axis=1)
        V = q.max(axis=1)
    return float(V[mdp.init_state]), policy


def evaluate_policy(mdp: MixtureMdp, k: int, policy: np.ndarray) -> float:
    """Exact value of a deterministic policy at the initial state."""
    V = np.zeros(mdp.num_states)
    s_idx = np.arange(mdp.num_states)
    for h in range(mdp.H, 0, -1):
        acts = policy[h - 1]
        r = mdp.reward_matrix(k, h)[s_idx, acts]
        P = mdp.transition_matrix(k, h)[s_idx, acts]
        V = r + P @ V
    return float(V[mdp.init_state])


def rollout(
    mdp: MixtureMdp, k: int, policy: np.ndarray, rng: np.random.Generator
) -> list[tuple[int, int, float, int]]:
    """Sample one episode under a deterministic policy; returns (s, a, r, s') per stage."""
    s = mdp.init_state
    traj = []
    for h in range(1, mdp.H + 1):
        a = int(policy[h - 1, s])
        r = float(mdp.reward_matrix(k, h)[s, a])
        probs = mdp.transition_matrix(k, h)[s, a]
        s_next = int(rng.choice(mdp.num_states, p=probs))
        traj.append((s, a, r, s_next))
        s = s_next
    return traj


# -- confidence radii ---------------------------------------------------------


def transition_radius(
    weight_sum: float, lam_w: float, H: int, L_psi: float, d: int, delta: float, S_w: float
) -> float:
    """Radius for the value-aggregated linear transition estimator."""
    return H * math.sqrt(
        0.5 * math.log(1.0 / delta)
        + (d / 4.0) * math.log(1.0 + H**2 * L_psi**2 * weight_sum / (lam_w * d))
    ) + math.sqrt(lam_w) * S_w


def mnl_transition_radius(
    weight_sum: float,
    lam_w: float,
    U: int,
    L_psi: float,
    d: int,
    delta: float,
    S_w: float,
    kappa: float,
) -> float:
    """Radius for the discounted multinomial-logit transition estimator."""
    return math.sqrt(
        0.5 * math.log(1.0 / delta)
        + (d / 4.0) * math.log(1.0 + U * L_psi**2 * weight_sum / (lam_w * d))
    ) + math.sqrt(lam_w) * kappa * S_w


# -- learners -----------------------------------------------------------------


@dataclass
class Plan:
    Q: np.ndarray  # (H, S, A)
    V: np.ndarray  # (H + 1, S)
    policy: np.ndarray  # (H, S)
    psi_agg: Optional[list] = None  # per-stage (S, A, d) aggregated features


class DiscountedUcrl:
    """Optimistic value iteration for drifting linear mixture transitions."""

    def __init__(
        self,
        mdp: MixtureMdp,
        gamma: float,
        lam_theta: float | None = None,
        lam_w: float | None = None,
        delta: float | None = None,
    ):
        self.mdp = mdp
        self.gamma = gamma
        self.d = mdp.d
        self.lam_theta = float(mdp.d) if lam_theta is None else lam_theta
        self.lam_w = float(mdp.H**2 * mdp.d) if lam_w is None else lam_w
        self.delta = 1.0 / (4.0 * mdp.H * mdp.K) if delta is None else delta
        self.reward_designs = [DiscountedDesign(mdp.d, gamma, self.lam_theta) for _ in range(mdp.H)]
        self.trans_designs = [DiscountedDesign(mdp.d, gamma, self.lam_w) for _ in range(mdp.H)]
        self.beta_theta = math.sqrt(self.lam_theta) * mdp.S_theta
        self._phi_flat = mdp.phi.reshape(-1, mdp.d)
        self.q_min = math.inf
        self.q_max = -math.inf

    def _transition_radius(self, h: int) -> float:
        return transition_radius(
            self.trans_designs[h].weight_sum,
            self.lam_w, self.mdp.H, self.mdp.L_psi, self.mdp.d, self.delta, self.mdp.S_w,
        )

    def plan(self) -> Plan:
        mdp = self.mdp
        S, A, H = mdp.num_states, mdp.num_actions, mdp.H
        V = np.zeros((H + 1, S))
        Q = np.zeros((H, S, A))
        policy = np.zeros((H, S), dtype=int)
        psi_aggs: list = [None] * H
        for h in range(H - 1, -1, -1):
            psi_agg = np.einsum("sapd,p->sad", mdp.psi, V[h + 1])
            psi_aggs[h] = psi_agg
            theta_hat = self.reward_designs[h].ridge_estimate()
            w_hat = self.trans_designs[h].ridge_estimate()
            beta_w = self._transition_radius(h)
            r_part = self._phi_flat @ theta_hat + self.beta_theta * quad_norm_many(
                self.reward_designs[h].V, self._phi_flat
            )
            psi_flat = psi_agg.reshape(-1, mdp.d)
            p_part = psi_flat @ w_hat + beta_w * quad_norm_many(self.trans_designs[h].V, psi_flat)
            Q[h] = np.clip((r_part + p_part).reshape(S, A), 0.0, float(H))
            policy[h] = Q[h].argmax(axis=1)
            V[h] = Q[h].max(axis=1)
        self.q_min = min(self.q_min, float(Q.min()))
        self.q_max = max(self.q_max, float(Q.max()))
        return Plan(Q, V, policy, psi_aggs)

    def update(self, traj: list[tuple[int, int, float, int]], plan: Plan) -> None:
        """Absorb one episode transcript, using this episode's value tables."""
        for h, (s, a, r, s_next) in enumerate(traj):
            self.reward_designs[h].update(self.mdp.phi[s, a], r)
            self.trans_designs[h].update(plan.psi_agg[h][s, a], float(plan.V[h + 1][s_next]))


class _MnlRecords:
    """Per-stage multinomial transcripts with geometrically aged weights."""

    def __init__(self, U: int, d: int, capacity: int = 128):
        self.feats = np.empty((capacity, U, d))
        self.outcome = np.empty(capacity, dtype=int)
        self.w = np.empty(capacity)
        self.n = 0

    def append(self, feats: np.ndarray, outcome: int, gamma: float) -> None:
        if self.n == self.w.shape[0]:
            self.feats = np.concatenate([self.feats, np.empty_like(self.feats)])
            self.outcome = np.concatenate([self.outcome, np.empty_like(self.outcome)])
            self.w = np.concatenate([self.w, np.empty_like(self.w)])
        self.w[: self.n] *= gamma
        self.feats[self.n] = feats
        self.outcome[self.n] = outcome
        self.w[self.n] = 1.0
        self.n += 1


class MnlDiscountedUcrl:
    """Optimistic value iteration for drifting multinomial-logit transitions."""

    MAX_NEWTON = 100
    MAX_PGD = 500

    def __init__(
        self,
        mdp: MixtureMdp,
        gamma: float,
        lam_theta: float | None = None,
        lam_w: float | None = None,
        delta: float | None = None,
    ):
        if mdp.kind != "mnl":
            raise ValueError("MnlDiscountedUcrl needs an MNL instance")
        self.mdp = mdp
        self.gamma = gamma
        self.d = mdp.d
        self.lam_theta = float(mdp.d) if lam_theta is None else lam_theta
        self.lam_w = float(mdp.d) if lam_w is None else lam_w
        self.delta = 1.0 / (4.0 * mdp.H * mdp.K) if delta is None else delta
        self.kappa = mdp.kappa
        self.reward_designs = [DiscountedDesign(mdp.d, gamma, self.lam_theta) for _ in range(mdp.H)]
        self.trans_designs = [DiscountedDesign(mdp.d, gamma, self.lam_w) for _ in range(mdp.H)]
        self.records = [_MnlRecords(mdp.U, mdp.d) for _ in range(mdp.H)]
        self.w_hat = [np.zeros(mdp.d) for _ in range(mdp.H)]
        self.beta_theta = math.sqrt(self.lam_theta) * mdp.S_theta
        self._phi_flat = mdp.phi.reshape(-1, mdp.d)
        self._reach_feats = mdp.reachable_features()  # (S, A, U, d)
        self.q_min = math.inf
        self.q_max = -math.inf
        self.last_residual = 0.0

    # estimation ------------------------------------------------------------

    def _solve_tol(self, h: int) -> float:
        return min(1e-10 * (1.0 + self.trans_designs[h].weight_sum), 1e-9)

    def solve_mle(self, h: int) -> np.ndarray:
        """Weighted multinomial-logit score-equation root via damped Newton."""
        rec = self.records[h]
        lam_kappa = self.lam_w * self.kappa
        if rec.n == 0:
            self.last_residual = 0.0
            return np.zeros(self.d)
        F = rec.feats[: rec.n]
        y = rec.outcome[: rec.n]
        alpha = rec.w[: rec.n]
        onehot = np.zeros((rec.n, F.shape[1]))
        onehot[np.arange(rec.n), y] = 1.0
        tol = self._solve_tol(h)

        def residual(w: np.ndarray) -> np.ndarray:
            P = _softmax(F @ w)
            return lam_kappa * w + np.einsum("n,nu,nud->d", alpha, P - onehot, F)

        w = self.w_hat[h].copy()
        grad = residual(w)
        resid = float(np.max(np.abs(grad)))
        for _ in range(self.MAX_NEWTON):
            if resid <= tol:
                self.last_residual = resid
                return w
            P = _softmax(F @ w)
            mean_f = np.einsum("nu,nud->nd", P, F)
            hess = lam_kappa * np.eye(self.d)
            hess += np.einsum("n,nu,nud,nue->de", alpha, P, F, F)
            hess -= np.einsum("n,nd,ne->de", alpha, mean_f, mean_f)
            step = spd_solve(hess, grad)
            a = 1.0
            while a > 2**-40:
                cand = w - a * step
                cand_grad = residual(cand)
                cand_resid = float(np.max(np.abs(cand_grad)))
                if cand_resid <= (1.0 - 0.5 * a) * resid + 1e-15:
                    w, grad, resid = cand, cand_grad, cand_resid
                    break
                a *= 0.5
            else:
                break
        if resid <= tol:
            self.last_residual = resid
            return w
        raise NoConvergence(f"MNL Newton stalled at residual {resid:.3e}")

    def score(self, h: int, w: np.ndarray) -> np.ndarray:
        """lam_w*kappa*w + sum_j alpha_j sum_u p_ju psi_ju over stage-h records."""
        rec = self.records[h]
        out = self.lam_w * self.kappa * np.asarray(w, dtype=float)
        if rec.n:
            F = rec.feats[: rec.n]
            alpha = rec.w[: rec.n]
            P = _softmax(F @ w)
            out = out + np.einsum("n,nu,nud->d", alpha, P, F)
        return out

    def _score_jacobian(self, h: int, w: np.ndarray) -> np.ndarray:
        rec = self.records[h]
        out = self.lam_w * self.kappa * np.eye(self.d)
        if rec.n:
            F = rec.feats[: rec.n]
            alpha = rec.w[: rec.n]
            P = _softmax(F @ w)
            mean_f = np.einsum("nu,nud->nd", P, F)
            out = out + np.einsum("n,nu,nud,nue->de", alpha, P, F, F)
            out = out - np.einsum("n,nd,ne->de", alpha, mean_f, mean_f)
        return out

    def project(self, h: int, w_hat: np.ndarray) -> np.ndarray:
        """Ball projection minimizing the score gap in the inverse design norm."""
        S_w = self.mdp.S_w
        nrm = float(np.linalg.norm(w_hat))
        if nrm <= S_w:
            return w_hat
        target = self.score(h, w_hat)
        M = self.trans_designs[h].V
        w = w_hat * (S_w / nrm)

        def value_grad(wv: np.ndarray) -> tuple[float, np.ndarray]:
            resid = self.score(h, wv) - target
            y = spd_solve(M, resid)
            return float(resid @ y), 2.0 * self._score_jacobian(h, wv) @ y

        def ball(v: np.ndarray) -> np.ndarray:
            nrm2 = float(np.linalg.norm(v))
            return v if nrm2 <= S_w else v * (S_w / nrm2)

        val, grad = value_grad(w)
        eta0 = 1.0 / (2.0 * float(np.max(np.abs(np.diag(M)))) + 1.0)
        eta = eta0
        recent = [val]  # non-monotone (GLL) reference window for spectral steps
        for _ in range(self.MAX_PGD):
            if float(np.linalg.norm(w - ball(w - grad))) <= 1e-7:
                return w
            moved = False
            while eta > 2**-60:
                cand = ball(w - eta * grad)
                diff = cand - w
                cand_val, cand_grad = value_grad(cand)
                if cand_val <= max(recent) + 1e-4 * float(grad @ diff) + 1e-15:
                    grad_diff = cand_grad - grad
                    curv = float(diff @ grad_diff)
                    sq = float(diff @ diff)
                    bb = sq / curv if curv > 0 else eta * 2.0
                    # clamp the spectral step so noisy curvature cannot freeze progress
                    eta = min(1e8, max(bb, 1e-3 * eta0))
                    w, val, grad = cand, cand_val, cand_grad
                    recent.append(val)
                    if len(recent) > 10:
                        recent.pop(0)
                    moved = True
                    break
                eta *= 0.5
            if not moved:
                return w
        raise NoConvergence("MNL projection did not reach stationarity")

    # planning ---------------------------------------------------------------

    def _transition_radius(self, h: int) -> float:
        return mnl_transition_radius(
            self.trans_designs[h].weight_sum,
            self.lam_w, self.mdp.U, self.mdp.L_psi, self.mdp.d, self.delta,
            self.mdp.S_w, self.kappa,
        )

    def plan(self) -> Plan:
        mdp = self.mdp
        S, A, H = mdp.num_states, mdp.num_actions, mdp.H
        V = np.zeros((H + 1, S))
        Q = np.zeros((H, S, A))
        policy = np.zeros((H, S), dtype=int)
        flat_feats = self._reach_feats.reshape(-1, mdp.d)
        for h in range(H - 1, -1, -1):
            w_hat = self.solve_mle(h)
            self.w_hat[h] = w_hat
            w_tilde = self.project(h, w_hat)
            theta_hat = self.reward_designs[h].ridge_estimate()
            beta_w = self._transition_radius(h)
            r_part = self._phi_flat @ theta_hat + self.beta_theta * quad_norm_many(
                self.reward_designs[h].V, self._phi_flat
            )
            probs = _softmax(np.einsum("saud,d->sau", self._reach_feats, w_tilde))
            pv = np.einsum("sau,sau->sa", probs, V[h + 1][mdp.reachable])
            norms = quad_norm_many(self.trans_designs[h].V, flat_feats).reshape(S, A, mdp.U)
            bonus = (H / self.kappa) * beta_w * norms.max(axis=2)
            Q[h] = np.clip(r_part.reshape(S, A) + pv + bonus, 0.0, float(H))
            policy[h] = Q[h].argmax(axis=1)
            V[h] = Q[h].max(axis=1)
        self.q_min = min(self.q_min, float(Q.min()))
        self.q_max = max(self.q_max, float(Q.max()))
        return Plan(Q, V, policy)

    def update(self, traj: list[tuple[int, int, float, int]], plan: Plan) -> None:
        del plan  # multinomial transcripts store raw outcomes, not value aggregates
        for h, (s, a, r, s_next) in enumerate(traj):
            self.reward_designs[h].update(self.mdp.phi[s, a], r)
            feats = self._reach_feats[s, a]
            outcome = int(np.where(self.mdp.reachable[s, a] == s_next)[0][0])
            self.records[h].append(feats, outcome, self.gamma)
            self.trans_designs[h].update_block(feats)


def optimal_gamma_mdp(K: int, H: int, total_path: float) -> float:
    """1 - max(1/K, sqrt(Delta/T)) with T = K*H, clamped into [1/K, 1 - 1/K]."""
    T = K * H
    g = 1.0 - max(1.0 / K, math.sqrt(total_path / T))
    return min(max(g, 1.0 / K), 1.0 - 1.0 / K)


def run_trial(mdp: MixtureMdp, learner, env_rng: np.random.Generator) -> np.ndarray:
    """Plan / roll out / absorb across all K episodes; per-episode exact regret."""
    regret = np.zeros(mdp.K)
    for k in range(1, mdp.K + 1):
        plan = learner.plan()
        traj = rollout(mdp, k, plan.policy, env_rng)
        learner.update(traj, plan)
        v_opt, _ = solve_optimal(mdp, k)
        v_pol = evaluate_policy(mdp, k, plan.policy)
        regret[k - 1] = v_opt - v_pol
    return regret
