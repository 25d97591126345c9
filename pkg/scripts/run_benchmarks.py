#!/usr/bin/env python3
"""Run the full synthetic benchmark batch and write traces + summaries.

Covers the headline comparisons: drifting linear rewards (weighted vs static
vs restart), logistic rewards at small and large parameter norm (plain GLM
bonus vs curvature-aware bonus), discount tuning without the drift budget
(meta-bandit vs every fixed candidate), the horizon scaling sweep, and both
episodic mixture-MDP variants. Expect roughly ten minutes on a laptop.

Usage: python scripts/run_benchmarks.py [--out results] [--trials 20]
"""

import argparse
from pathlib import Path

from driftbandit.bob import candidate_gammas
from driftbandit.harness import ExperimentConfig, run_experiment, scaling_sweep


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    out = Path(args.out)

    batches = {
        "lb": ExperimentConfig(
            task="lb", T=6000, d=2, n_arms=50, trials=args.trials, base_seed=args.seed,
            algorithms=["weighted", "static", "restart"], out_dir=str(out / "lb"),
        ),
        "glb_s1": ExperimentConfig(
            task="glb", T=6000, d=2, n_arms=50, S=1.0, trials=args.trials,
            base_seed=args.seed, algorithms=["glb", "scb", "glb-static"],
            out_dir=str(out / "glb_s1"),
        ),
        "glb_s5": ExperimentConfig(
            task="glb", T=6000, d=2, n_arms=50, S=5.0, trials=args.trials,
            base_seed=args.seed, algorithms=["glb", "scb"], out_dir=str(out / "glb_s5"),
        ),
        "scb_pw": ExperimentConfig(
            task="scb_pw", T=400, d=2, n_arms=20, n_changes=3, trials=5,
            base_seed=args.seed, out_dir=str(out / "scb_pw"),
        ),
        "mdp_lm": ExperimentConfig(
            task="mdp_lm", K=400, H=5, num_states=5, num_actions=3, d=4, drift=1.0,
            trials=args.trials, base_seed=1, out_dir=str(out / "mdp_lm"),
        ),
        "mdp_mnl": ExperimentConfig(
            task="mdp_mnl", K=400, H=5, num_states=5, num_actions=3, d=4, drift=1.0,
            trials=args.trials, base_seed=1, out_dir=str(out / "mdp_mnl"),
        ),
    }
    grid = candidate_gammas(2, 6000)
    batches["bob"] = ExperimentConfig(
        task="bob", T=6000, d=2, n_arms=50, trials=args.trials, base_seed=args.seed,
        algorithms=["bob"] + [f"fixed:{i}" for i in range(grid.n_candidates)],
        out_dir=str(out / "bob"),
    )

    for name, cfg in batches.items():
        result = run_experiment(cfg)
        line = ", ".join(
            f"{alg} {entry['final_regret_mean']:.1f}"
            for alg, entry in result.summary["algorithms"].items()
        )
        print(f"{name}: {line}")

    sweep_cfg = ExperimentConfig(
        task="lb", d=2, n_arms=50, trials=args.trials, base_seed=args.seed,
        out_dir=str(out / "sweep"),
    )
    report = scaling_sweep(sweep_cfg, [1000, 2000, 4000, 8000])
    print(f"sweep: slope {report['slope']:.3f} (R^2 {report['r_squared']:.3f})")


if __name__ == "__main__":
    main()
