from __future__ import annotations

import csv
from pathlib import Path

from ..hppo import TrainStats

COLUMNS = [
    "iteration", "env_steps", "episodes", "success_rate_w100", "mean_ep_reward_w100",
    "loss_d", "loss_c", "loss_v", "entropy_d", "entropy_c",
]
_FIELDS = [
    "iteration", "env_steps", "episodes", "success_rate", "mean_ep_reward",
    "loss_d", "loss_c", "loss_v", "entropy_d", "entropy_c",
]
_INTS = {"iteration", "env_steps", "episodes"}


def _fmt(v) -> str:
    return str(v) if isinstance(v, int) else repr(float(v))


class MetricsWriter:
    """Append-only CSV; each row is flushed as soon as it is written."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._fh.write(",".join(COLUMNS) + "\n")
        self._fh.flush()

    def write(self, row: TrainStats) -> None:
        self._fh.write(",".join(_fmt(getattr(row, f)) for f in _FIELDS) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path: str | Path) -> list[TrainStats]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [
            TrainStats(**{f: (int(r[c]) if f in _INTS else float(r[c])) for f, c in zip(_FIELDS, COLUMNS)})
            for r in reader
        ]
