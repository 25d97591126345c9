#!/usr/bin/env python3
"""Render regret curves from harness trace CSVs.

Reads one or more long-format trace files with the exact header
`task,algorithm,trial,t,inst_regret,cum_regret` and draws, per algorithm, the
mean cumulative regret across trials with an optional shaded band of one
standard deviation. Rows are consumed in file order: the tool never reorders
or resamples, so each curve has exactly as many points as there are distinct
t values for that algorithm.

Usage:
    plot_regret.py --in traces.csv --out fig.png [--title ...] [--band sd|none]
                   [--algorithms weighted,static]
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

EXPECTED_HEADER = ["task", "algorithm", "trial", "t", "inst_regret", "cum_regret"]


class SchemaError(Exception):
    """The input file does not match the harness trace schema."""


@dataclass
class PlotSpec:
    inputs: list[str]
    output: str
    title: Optional[str] = None
    band: str = "sd"
    algorithms: Optional[list[str]] = None

    def __post_init__(self) -> None:
        if self.band not in ("sd", "none"):
            raise ValueError(f"band must be 'sd' or 'none', got {self.band!r}")


@dataclass
class Curve:
    algorithm: str
    ts: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    n_trials: int


@dataclass
class _Group:
    ts: list = field(default_factory=list)  # first-appearance order
    by_t: dict = field(default_factory=dict)  # t -> list of cum_regret values


def read_rows(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise SchemaError(f"{path}: empty file") from exc
        if header != EXPECTED_HEADER:
            for got, want in zip(header, EXPECTED_HEADER):
                if got != want:
                    raise SchemaError(f"{path}: expected column {want!r}, found {got!r}")
            raise SchemaError(
                f"{path}: expected {len(EXPECTED_HEADER)} columns, found {len(header)}"
            )
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(EXPECTED_HEADER):
                raise SchemaError(f"{path}:{lineno}: expected 6 fields, found {len(raw)}")
            try:
                rows.append(
                    {
                        "algorithm": raw[1],
                        "trial": int(raw[2]),
                        "t": int(raw[3]),
                        "cum_regret": float(raw[5]),
                    }
                )
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return rows


def aggregate(rows: list[dict], algorithms: Optional[list[str]] = None) -> list[Curve]:
    """Mean and standard deviation of cumulative regret per (algorithm, t)."""
    groups: dict[str, _Group] = {}
    order: list[str] = []
    for row in rows:
        alg = row["algorithm"]
        if algorithms is not None and alg not in algorithms:
            continue
        if alg not in groups:
            groups[alg] = _Group()
            order.append(alg)
        group = groups[alg]
        if row["t"] not in group.by_t:
            group.by_t[row["t"]] = []
            group.ts.append(row["t"])
        group.by_t[row["t"]].append(row["cum_regret"])
    curves = []
    for alg in order:
        group = groups[alg]
        ts = np.array(group.ts)
        mean = np.array([np.mean(group.by_t[t]) for t in group.ts])
        sd = np.array([np.std(group.by_t[t], ddof=0) for t in group.ts])
        n_trials = max(len(v) for v in group.by_t.values())
        curves.append(Curve(alg, ts, mean, sd, n_trials))
    return curves


def render(spec: PlotSpec) -> list[Curve]:
    rows: list[dict] = []
    for path in spec.inputs:
        rows.extend(read_rows(path))
    curves = aggregate(rows, spec.algorithms)
    if not curves:
        raise SchemaError("no matching rows to plot")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for curve in curves:
        (line,) = ax.plot(curve.ts, curve.mean, label=curve.algorithm, linewidth=1.6)
        if spec.band == "sd" and curve.n_trials > 1:
            ax.fill_between(
                curve.ts,
                curve.mean - curve.sd,
                curve.mean + curve.sd,
                color=line.get_color(),
                alpha=0.2,
                linewidth=0,
            )
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative regret")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.output, dpi=150)
    plt.close(fig)
    return curves


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Plot regret curves from trace CSVs.")
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        help="trace CSV (repeatable)")
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument("--title")
    parser.add_argument("--band", choices=("sd", "none"), default="sd")
    parser.add_argument("--algorithms", help="comma-separated filter")
    args = parser.parse_args(argv)
    algorithms = None
    if args.algorithms:
        algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    spec = PlotSpec(args.inputs, args.out, args.title, args.band, algorithms)
    try:
        curves = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({len(curves)} curves)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
