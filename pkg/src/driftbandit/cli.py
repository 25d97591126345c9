"""Command-line entry point: run experiments, scaling sweeps, and the selftest suite."""

from __future__ import annotations

import argparse
import json
import sys

from .diagnostics import run_selftest
from .harness import ConfigError, ExperimentConfig, run_experiment, scaling_sweep


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--task", choices=("lb", "glb", "scb", "scb_pw", "bob", "mdp_lm", "mdp_mnl"))
    parser.add_argument("--T", dest="T", help="horizon (rounds); comma list for sweep")
    parser.add_argument("--gamma", help="'auto' or a discount in (0, 1]")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int, dest="base_seed")
    parser.add_argument("--out", dest="out_dir", help="output directory for traces.csv / summary.json")
    parser.add_argument("--algorithms", help="comma-separated algorithm names")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--S", type=float, dest="S")
    parser.add_argument("--d", type=int, dest="d")
    parser.add_argument("--n-arms", type=int, dest="n_arms")
    parser.add_argument("--drift", type=float)


def _merged_config(args: argparse.Namespace, multi_T: bool = False) -> tuple[ExperimentConfig, list[int]]:
    raw: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw.update(json.load(fh))
    for key in ("task", "gamma", "trials", "base_seed", "out_dir", "workers", "S", "d", "n_arms", "drift"):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    if args.algorithms is not None:
        raw["algorithms"] = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    T_list: list[int] = []
    if args.T is not None:
        parts = [int(p) for p in str(args.T).split(",") if p]
        if multi_T:
            T_list = parts
            raw["T"] = parts[0]
        else:
            if len(parts) != 1:
                raise ConfigError("run takes a single --T value")
            raw["T"] = parts[0]
    elif multi_T:
        raise ConfigError("sweep requires --T with a comma-separated horizon list")
    if raw.get("gamma") not in (None, "auto"):
        raw["gamma"] = float(raw["gamma"])
    return ExperimentConfig.from_dict(raw), T_list


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="driftbandit",
        description="Regret simulations for discounted non-stationary bandit and MDP strategies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment and write traces + summary")
    _add_override_flags(run_p)

    sweep_p = sub.add_parser("sweep", help="scaling sweep over several horizons")
    _add_override_flags(sweep_p)

    sub.add_parser("selftest", help="run the bound-oracle property suites")

    args = parser.parse_args(argv)
    try:
        if args.command == "selftest":
            return 0 if run_selftest(verbose=True) else 1
        if args.command == "run":
            config, _ = _merged_config(args)
            result = run_experiment(config)
            for alg, entry in result.summary["algorithms"].items():
                mean = entry["final_regret_mean"]
                sd = entry["final_regret_sd"]
                print(f"{config.task}/{alg}: final regret {mean:.2f} +- {sd:.2f} "
                      f"({entry['n_trials']} trials, {entry['solver_failures']} failures)")
            if config.out_dir:
                print(f"wrote {config.out_dir}/traces.csv and summary.json")
            return 0
        config, T_list = _merged_config(args, multi_T=True)
        report = scaling_sweep(config, T_list)
        for T, mean in zip(report["T_values"], report["mean_final_regret"]):
            print(f"T={T}: mean final regret {mean:.2f}")
        print(f"slope {report['slope']:.3f} (R^2 {report['r_squared']:.3f})")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
