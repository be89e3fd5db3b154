"""Aggregate the final trailing-window statistics of finished runs across seeds."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .metrics import read_metrics

REPORT_COLUMNS = ["env", "algo", "seeds", "success_mean", "success_sd", "mean_ep_reward"]


@dataclass
class ReportRow:
    env: str
    algo: str
    seeds: list[int]
    success_mean: float
    success_sd: float
    mean_ep_reward: float


@dataclass
class ComparisonReport:
    rows: list[ReportRow] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.env, r.algo, " ".join(map(str, r.seeds)),
                        repr(r.success_mean), repr(r.success_sd), repr(r.mean_ep_reward)])
        return buf.getvalue()

    def to_text(self) -> str:
        head = f"{'env':<16} {'algo':<6} {'seeds':>5} {'success':>9} {'sd':>7} {'reward':>9}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.env:<16} {r.algo:<6} {len(r.seeds):>5} {100 * r.success_mean:>8.2f}% "
                         f"{100 * r.success_sd:>6.2f}% {r.mean_ep_reward:>9.3f}")
        return "\n".join(lines)


def mean_sd(values: list[float]) -> tuple[float, float]:
    """Mean and population standard deviation."""
    n = len(values)
    mu = sum(values) / n
    return mu, math.sqrt(sum((v - mu) ** 2 for v in values) / n)


def final_stats(metrics_path: Path) -> tuple[float, float]:
    rows = read_metrics(metrics_path)
    if not rows:
        raise ValueError(f"{metrics_path} has no rows")
    return rows[-1].success_rate, rows[-1].mean_ep_reward


def build_report(root: str | Path, envs, algos, seeds) -> ComparisonReport:
    """One row per (env, algo); duplicate seeds count once, absent runs are listed."""
    report = ComparisonReport()
    unique_seeds = list(dict.fromkeys(int(s) for s in seeds))
    for env in envs:
        for algo in algos:
            found, succ, rew = [], [], []
            for seed in unique_seeds:
                path = Path(root) / env / algo / f"seed{seed}" / "metrics.csv"
                try:
                    s, r = final_stats(path)
                except (OSError, ValueError):
                    report.missing.append(str(path))
                    continue
                found.append(seed)
                succ.append(s)
                rew.append(r)
            if found:
                mu, sd = mean_sd(succ)
                report.rows.append(ReportRow(env, algo, found, mu, sd, sum(rew) / len(rew)))
    return report
