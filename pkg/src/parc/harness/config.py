"""Run configuration: one flat JSON document with dotted keys.

Top-level keys: ``env``, ``algo``, ``seeds``, ``out``, ``eval_episodes``,
``success_window``. Algorithm settings live under ``hppo.*`` and ``dqn.*``
(for example ``"hppo.lr_actor": 1e-4``); ``dqn.bins`` may override the
per-action discretization.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..action_space import PAPER_BINS
from ..dqn import DqnConfig
from ..envs import ENVS
from ..hppo import TrainConfig

ALGOS = ("hppo", "dqn")
DEFAULT_OUT = "runs"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    env: str
    algo: str = "hppo"
    seeds: list[int] = field(default_factory=lambda: [0])
    out: str = DEFAULT_OUT
    eval_episodes: int = 100
    success_window: int = 100
    hppo: dict[str, Any] = field(default_factory=dict)
    dqn: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.env not in ENVS:
            raise ConfigError(f"unknown env {self.env!r}; valid names: {', '.join(ENVS)}")
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; valid: {', '.join(ALGOS)}")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.success_window < 1:
            raise ConfigError("success_window must be >= 1")
        # build once so bad keys/values fail at parse time
        for seed in self.seeds:
            self.algo_config(seed)

    def algo_config(self, seed: int) -> TrainConfig | DqnConfig:
        cls = TrainConfig if self.algo == "hppo" else DqnConfig
        overrides = dict(self.hppo if self.algo == "hppo" else self.dqn)
        overrides.pop("bins", None)
        known = {f.name for f in dataclasses.fields(cls)}
        bad = sorted(set(overrides) - known)
        if bad:
            raise ConfigError(f"unknown {self.algo} settings: {', '.join(bad)}")
        try:
            return cls(**{**overrides, "seed": seed, "success_window": self.success_window})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid {self.algo} settings: {exc}") from exc

    @property
    def bins(self) -> dict[str, list[int]]:
        return self.dqn.get("bins", PAPER_BINS[self.env])

    def run_dir(self, seed: int) -> Path:
        return Path(self.out) / self.env / self.algo / f"seed{seed}"

    def to_flat(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "env": self.env, "algo": self.algo, "seeds": list(self.seeds), "out": self.out,
            "eval_episodes": self.eval_episodes, "success_window": self.success_window,
        }
        for prefix in ALGOS:
            for k, v in getattr(self, prefix).items():
                doc[f"{prefix}.{k}"] = v
        return doc

    def snapshot(self, seed: int) -> dict[str, Any]:
        """Fully resolved single-seed config, re-runnable as-is."""
        cfg = self.algo_config(seed)
        doc = {**self.to_flat(), "seeds": [seed]}
        for f in dataclasses.fields(cfg):
            if f.name in ("seed", "success_window"):
                continue
            v = getattr(cfg, f.name)
            doc[f"{self.algo}.{f.name}"] = list(v) if isinstance(v, tuple) else v
        if self.algo == "dqn":
            doc["dqn.bins"] = self.bins
        return doc


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def from_flat(doc: dict[str, Any]) -> RunConfig:
    top: dict[str, Any] = {}
    nested: dict[str, dict[str, Any]] = {a: {} for a in ALGOS}
    for key, value in doc.items():
        head, _, rest = key.partition(".")
        if rest:
            if head not in nested:
                raise ConfigError(f"unknown config section {head!r} in key {key!r}")
            nested[head][rest] = value
        else:
            top[key] = value
    fields = {f.name for f in dataclasses.fields(RunConfig)} - set(ALGOS)
    bad = sorted(set(top) - fields)
    if bad:
        raise ConfigError(f"unknown config keys: {', '.join(bad)}")
    if "env" not in top:
        raise ConfigError("config needs an 'env'")
    if "seeds" in top and not isinstance(top["seeds"], list):
        top["seeds"] = [top["seeds"]]
    try:
        return RunConfig(**top, **nested)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_flat(path: str | Path) -> dict[str, Any]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return doc


def output_root(flag: str | None, configured: str | None) -> str:
    """--out flag, then PARC_OUT, then the config file's ``out``, then ./runs."""
    return flag or os.environ.get("PARC_OUT") or configured or DEFAULT_OUT
