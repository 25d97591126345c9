"""Experiment runner: configures instances, runs trial batches, writes traces.

Every trial is a pure function of (config, algorithm, trial index): arm sets
and parameter paths are rebuilt deterministically from the base seed inside
each worker, so trials can run sequentially or on a process pool with
byte-identical output. Traces go to a long-format CSV with the fixed header
`task,algorithm,trial,t,inst_regret,cum_regret`; aggregate statistics land in
a summary JSON next to it.
"""

from __future__ import annotations

import hashlib
import json
import math
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import bob as bob_mod
from . import mdp as mdp_mod
from .design import RadiusParams
from .envs import (
    ARMS_STREAM,
    ENV_STREAM,
    LEARNER_STREAM,
    gen_arms,
    instant_regret,
    make_rng,
    path_length,
    piecewise_path,
    rotating_path,
    sample_reward,
)
from .glm import (
    DiscountedGlmUcb,
    LinkModel,
    NoConvergence,
    PiecewiseSelfConcordantUcb,
    SelfConcordantUcb,
    optimal_gamma_glm,
    optimal_gamma_piecewise,
    optimal_gamma_self_concordant,
)
from .linear import DiscountedLinUcb, default_restart_period, optimal_gamma_linear

TASKS = ("lb", "glb", "scb", "scb_pw", "bob", "mdp_lm", "mdp_mnl")

DEFAULT_ALGORITHMS = {
    "lb": ["weighted", "static"],
    "glb": ["glb", "scb"],
    "scb": ["scb", "scb-static"],
    "scb_pw": ["scb-pw"],
    "bob": ["bob"],
    "mdp_lm": ["weighted", "static"],
    "mdp_mnl": ["weighted", "static"],
}

CSV_HEADER = "task,algorithm,trial,t,inst_regret,cum_regret"


class ConfigError(Exception):
    """Invalid experiment configuration (human-readable message)."""


@dataclass
class ExperimentConfig:
    task: str
    T: int = 6000
    d: int = 2
    n_arms: int = 50
    S: float = 1.0
    L: float = 1.0
    R: Optional[float] = None  # per-task default: 1.0 gaussian, 0.5 bernoulli
    gamma: object = "auto"
    trials: int = 20
    base_seed: int = 0
    algorithms: Optional[list[str]] = None
    out_dir: Optional[str] = None
    workers: int = 1
    delta: Optional[float] = None
    n_changes: int = 5  # piecewise task
    # episodic tasks
    K: int = 400
    H: int = 5
    num_states: int = 5
    num_actions: int = 3
    drift: float = 0.5
    loops: float = 1.5

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if min(self.T, self.d, self.n_arms, self.K, self.H) < 1:
            raise ConfigError("sizes must be positive")
        if self.gamma != "auto":
            try:
                g = float(self.gamma)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"gamma must be 'auto' or a number, got {self.gamma!r}") from exc
            if not (0.0 < g <= 1.0):
                raise ConfigError(f"gamma must lie in (0, 1], got {g}")
            self.gamma = g
        if self.algorithms is None:
            self.algorithms = list(DEFAULT_ALGORITHMS[self.task])
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def horizon(self) -> int:
        return self.K * self.H if self.task.startswith("mdp") else self.T

    def noise_scale(self) -> float:
        if self.R is not None:
            return self.R
        return 1.0 if self.task == "lb" else 0.5

    def confidence(self) -> float:
        if self.delta is not None:
            return self.delta
        if self.task.startswith("mdp"):
            return 1.0 / (4.0 * self.horizon)
        return 1.0 / (2.0 * self.T)

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "task" not in raw:
            raise ConfigError("config needs a 'task' field")
        return cls(**raw)


@dataclass
class RegretTrace:
    task: str
    algorithm: str
    trial: int
    inst: np.ndarray
    seed: int
    config_hash: str
    wall_clock: float
    clip_events: int = 0
    cum: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.cum = np.cumsum(self.inst)

    @property
    def final_regret(self) -> float:
        return float(self.cum[-1])


# -- environment construction (deterministic in the base seed) ----------------


def build_arms(config: ExperimentConfig) -> np.ndarray:
    return gen_arms(config.n_arms, config.d, config.L, make_rng(config.base_seed, ARMS_STREAM)).arms


def build_path(config: ExperimentConfig):
    if config.task == "scb_pw":
        return piecewise_path(config.T, config.d, config.S, config.n_changes, config.base_seed)
    return rotating_path(config.T, config.S, config.d)


def build_mdp(config: ExperimentConfig) -> mdp_mod.MixtureMdp:
    kind = "linear_mixture" if config.task == "mdp_lm" else "mnl"
    return mdp_mod.build_instance(
        kind,
        config.base_seed,
        num_states=config.num_states,
        num_actions=config.num_actions,
        H=config.H,
        d=config.d if config.task.startswith("mdp") else 4,
        K=config.K,
        drift=config.drift,
        loops=config.loops,
    )


def reward_kind(task: str) -> str:
    return "gaussian_linear" if task in ("lb", "bob") else "bernoulli_logistic"


def resolve_gamma(config: ExperimentConfig, algorithm: str, path_len: float) -> float:
    """Discount for one algorithm: explicit config value, else the theory-optimal one."""
    if algorithm in ("static", "glb-static", "scb-static"):
        return 1.0
    if config.gamma != "auto":
        return float(config.gamma)
    d, T = config.d, config.T
    link = LinkModel.logistic(config.S, config.L)
    if algorithm == "weighted":
        return optimal_gamma_linear(d, T, path_len)
    if algorithm == "restart":
        return 1.0
    if algorithm == "glb":
        return optimal_gamma_glm(d, T, path_len, link)
    if algorithm == "scb":
        return optimal_gamma_self_concordant(d, T, path_len, link)
    if algorithm == "scb-pw":
        return optimal_gamma_piecewise(d, T, config.n_changes)
    raise ConfigError(f"no discount rule for algorithm {algorithm!r}")


def _make_bandit_learner(config: ExperimentConfig, algorithm: str, gamma: float):
    d, T = config.d, config.T
    delta = config.confidence()
    R = config.noise_scale()
    if algorithm in ("weighted", "static", "restart"):
        params = RadiusParams(S=config.S, L=config.L, R=R, delta=delta, d=d)
        period = None
        if algorithm == "restart":
            period = default_restart_period(d, T, path_length(build_path(config)))
        return DiscountedLinUcb(d, params, gamma, lam=float(d), restart_period=period)
    link = LinkModel.logistic(config.S, config.L)
    if algorithm in ("glb", "glb-static"):
        return DiscountedGlmUcb(link, d, gamma, R=R, delta=delta, lam=d / link.c_mu**2)
    if algorithm in ("scb", "scb-static"):
        return SelfConcordantUcb(link, d, gamma, R=R, delta=delta, horizon=T)
    if algorithm == "scb-pw":
        return PiecewiseSelfConcordantUcb(link, d, gamma, horizon=T, delta=delta)
    raise ConfigError(f"unknown algorithm {algorithm!r} for task {config.task}")


# -- single-trial runners (top level so process pools can pickle them) --------


def run_one_trial(config: ExperimentConfig, algorithm: str, trial: int) -> RegretTrace:
    started = time.perf_counter()
    seed = config.base_seed + trial
    if config.task.startswith("mdp"):
        inst, clips = _run_mdp_trial(config, algorithm, seed)
    elif algorithm == "bob":
        inst, clips = _run_bob_trial(config, seed)
    elif algorithm.startswith("fixed:"):
        inst, clips = _run_fixed_candidate_trial(config, algorithm, seed), 0
    else:
        inst, clips = _run_bandit_trial(config, algorithm, seed), 0
    return RegretTrace(
        task=config.task,
        algorithm=algorithm,
        trial=trial,
        inst=inst,
        seed=seed,
        config_hash=config.config_hash(),
        wall_clock=time.perf_counter() - started,
        clip_events=clips,
    )


def _run_bandit_trial(config: ExperimentConfig, algorithm: str, seed: int) -> np.ndarray:
    arms = build_arms(config)
    path = build_path(config)
    kind = reward_kind(config.task)
    gamma = resolve_gamma(config, algorithm, path_length(path))
    learner = _make_bandit_learner(config, algorithm, gamma)
    env_rng = make_rng(seed, ENV_STREAM)
    R = config.noise_scale()
    inst = np.zeros(config.T)
    pw = algorithm == "scb-pw"
    for t in range(1, config.T + 1):
        theta_t = path.theta(t)
        if pw:
            idx, witness = learner.select(arms)
            if np.linalg.norm(witness) > config.S + 1e-9:
                raise AssertionError("confidence-set witness left the parameter ball")
        else:
            idx = learner.select(arms)
        x = arms[idx]
        r = sample_reward(kind, x, theta_t, env_rng, R)
        learner.step(x, r)
        inst[t - 1] = instant_regret(arms, theta_t, idx, kind)
    return inst


def _run_fixed_candidate_trial(config: ExperimentConfig, algorithm: str, seed: int) -> np.ndarray:
    """One discount-grid candidate run for the full horizon (no episode resets)."""
    index = int(algorithm.split(":", 1)[1])
    grid = bob_mod.candidate_gammas(config.d, config.T)
    if not (0 <= index < grid.n_candidates):
        raise ConfigError(f"candidate index {index} outside 0..{grid.n_candidates - 1}")
    arms = build_arms(config)
    path = build_path(config)
    params = RadiusParams(
        S=config.S, L=config.L, R=config.noise_scale(), delta=config.confidence(), d=config.d
    )
    learner = DiscountedLinUcb(config.d, params, float(grid.candidates[index]), lam=float(config.d))
    env_rng = make_rng(seed, ENV_STREAM)
    inst = np.zeros(config.T)
    for t in range(1, config.T + 1):
        theta_t = path.theta(t)
        idx = learner.select(arms)
        r = sample_reward("gaussian_linear", arms[idx], theta_t, env_rng, config.noise_scale())
        learner.step(arms[idx], r)
        inst[t - 1] = instant_regret(arms, theta_t, idx, "gaussian_linear")
    return inst


def _run_bob_trial(config: ExperimentConfig, seed: int) -> tuple[np.ndarray, int]:
    arms = build_arms(config)
    path = build_path(config)
    grid = bob_mod.candidate_gammas(config.d, config.T)
    R = config.noise_scale()
    params = RadiusParams(S=config.S, L=config.L, R=R, delta=config.confidence(), d=config.d)
    env_rng = make_rng(seed, ENV_STREAM)
    meta_rng = make_rng(seed, LEARNER_STREAM)

    def make_learner(gamma: float) -> DiscountedLinUcb:
        return DiscountedLinUcb(config.d, params, gamma, lam=float(config.d))

    def select_and_observe(learner: DiscountedLinUcb, t: int) -> tuple[float, float]:
        theta_t = path.theta(t)
        idx = learner.select(arms)
        r = sample_reward("gaussian_linear", arms[idx], theta_t, env_rng, R)
        learner.step(arms[idx], r)
        return r, instant_regret(arms, theta_t, idx, "gaussian_linear")

    return bob_mod.run_meta_bandit(
        grid, make_learner, select_and_observe, meta_rng, config.L, config.S, R
    )


def _run_mdp_trial(config: ExperimentConfig, algorithm: str, seed: int) -> tuple[np.ndarray, int]:
    mdp = build_mdp(config)
    if algorithm == "static":
        gamma = 1.0
    elif config.gamma != "auto":
        gamma = float(config.gamma)
    elif algorithm == "weighted":
        gamma = mdp_mod.optimal_gamma_mdp(config.K, config.H, mdp_mod.total_path_length(mdp))
    else:
        raise ConfigError(f"unknown algorithm {algorithm!r} for task {config.task}")
    delta = config.delta  # None -> learner default 1/(4T)
    if config.task == "mdp_lm":
        learner = mdp_mod.DiscountedUcrl(mdp, gamma, delta=delta)
    else:
        learner = mdp_mod.MnlDiscountedUcrl(mdp, gamma, delta=delta)
    env_rng = make_rng(seed, ENV_STREAM)
    inst = mdp_mod.run_trial(mdp, learner, env_rng)
    if not (learner.q_min >= 0.0 and learner.q_max <= mdp.H + 1e-12):
        raise AssertionError("optimistic values left the [0, H] clip range")
    return inst, 0


_SOLVER_FAILURES = (NoConvergence, mdp_mod.NoConvergence)


def _trial_star(payload: tuple):
    """Run one (config, algorithm, trial) job; solver failures become markers."""
    try:
        return run_one_trial(*payload)
    except _SOLVER_FAILURES:
        return ("solver-failure", payload[1], payload[2])


# -- experiment orchestration --------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: list[RegretTrace]
    failures: dict[str, int]
    summary: dict


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run trials for every configured algorithm; optionally write CSV + summary."""
    jobs = [(config, alg, trial) for alg in config.algorithms for trial in range(config.trials)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_trial_star, jobs))
    else:
        outcomes = [_trial_star(payload) for payload in jobs]
    traces: list[RegretTrace] = []
    failures: dict[str, int] = {alg: 0 for alg in config.algorithms}
    for outcome in outcomes:
        if isinstance(outcome, RegretTrace):
            traces.append(outcome)
        else:
            failures[outcome[1]] += 1
    traces.sort(key=lambda tr: (config.algorithms.index(tr.algorithm), tr.trial))
    summary = summarize(config, traces, failures)
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_traces_csv(out / "traces.csv", traces, config.horizon)
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return ExperimentResult(config, traces, failures, summary)


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10, check=False,
        )
        return out.stdout.strip() or "unknown"
    except OSError:
        return "unknown"


def summarize(config: ExperimentConfig, traces: list[RegretTrace], failures: dict) -> dict:
    per_alg: dict[str, dict] = {}
    for alg in config.algorithms:
        finals = [tr.final_regret for tr in traces if tr.algorithm == alg]
        clips = [tr.clip_events for tr in traces if tr.algorithm == alg]
        walls = [tr.wall_clock for tr in traces if tr.algorithm == alg]
        entry = {
            "n_trials": len(finals),
            "final_regret_mean": float(np.mean(finals)) if finals else None,
            "final_regret_sd": float(np.std(finals, ddof=1)) if len(finals) > 1 else 0.0,
            "solver_failures": failures.get(alg, 0),
            "mean_wall_clock_s": float(np.mean(walls)) if walls else None,
        }
        if alg == "bob":
            entry["clip_events_mean"] = float(np.mean(clips)) if clips else 0.0
        per_alg[alg] = entry
    info: dict = {
        "task": config.task,
        "config": asdict(config),
        "config_hash": config.config_hash(),
        "git_describe": git_describe(),
        "base_seed": config.base_seed,
        "trial_seeds": [config.base_seed + i for i in range(config.trials)],
        "algorithms": per_alg,
    }
    if config.task.startswith("mdp"):
        info["total_path_length"] = mdp_mod.total_path_length(build_mdp(config))
    else:
        info["path_length"] = path_length(build_path(config))
    return info


def _subsample_steps(T: int) -> int:
    return 1 if T <= 10_000 else math.ceil(T / 1000)


def write_traces_csv(path: str | Path, traces: list[RegretTrace], horizon: int) -> None:
    step = _subsample_steps(horizon)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for tr in traces:
            n = tr.inst.shape[0]
            ts = range(step, n + 1, step) if step > 1 else range(1, n + 1)
            rows = list(ts)
            if rows and rows[-1] != n:
                rows.append(n)
            for t in rows:
                fh.write(
                    f"{tr.task},{tr.algorithm},{tr.trial},{t},"
                    f"{float(tr.inst[t - 1])!r},{float(tr.cum[t - 1])!r}\n"
                )


# -- scaling sweep --------------------------------------------------------------


def fit_power_law(T_values, regrets) -> tuple[float, float]:
    """Least-squares slope and R^2 of log regret against log horizon."""
    x = np.log(np.asarray(T_values, dtype=float))
    y = np.log(np.asarray(regrets, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r2


def scaling_sweep(config: ExperimentConfig, T_list: list[int]) -> dict:
    """Rotating-path runs at each horizon with theory-optimal discount; log-log fit."""
    if len(T_list) < 3:
        raise ConfigError("scaling sweep needs at least 3 horizon values")
    means = []
    for T in T_list:
        cfg = ExperimentConfig(**{**asdict(config), "T": T, "algorithms": ["weighted"], "out_dir": None})
        result = run_experiment(cfg)
        means.append(result.summary["algorithms"]["weighted"]["final_regret_mean"])
    slope, r2 = fit_power_law(T_list, means)
    report = {
        "T_values": list(T_list),
        "mean_final_regret": means,
        "slope": slope,
        "r_squared": r2,
        "trials_per_T": config.trials,
        "base_seed": config.base_seed,
    }
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep_summary.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report
