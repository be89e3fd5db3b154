"""``parc`` command line: train, eval, compare, plot.

Exit codes: 0 success, 1 runtime fault, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..dqn import train_dqn
from ..envs import ENVS, make_env
from ..hppo import RolloutError, TrainingError, train
from ..numerics import DomainError, Rng
from .config import ALGOS, ConfigError, RunConfig, from_flat, load_flat, output_root, parse_value
from .evaluate import SchemaMismatch, evaluate, load_actor, scripted_actor
from .metrics import MetricsWriter, read_metrics
from .plot import average_curves, render_svg
from .report import build_report

EXIT_OK, EXIT_FAULT, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"parc: {msg}", file=sys.stderr)


def build_run_config(args) -> RunConfig:
    doc = load_flat(args.config) if args.config else {}
    if args.env is not None:
        doc["env"] = args.env
    if args.algo is not None:
        doc["algo"] = args.algo
    if args.seed:
        doc["seeds"] = args.seed
    algo = doc.get("algo", "hppo")
    if args.iters is not None:
        doc[f"{algo}.max_iterations"] = args.iters
    if args.steps is not None:
        doc[f"{algo}.max_env_steps"] = args.steps
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        doc[key] = parse_value(value)
    doc["out"] = output_root(args.out, doc.get("out"))
    return from_flat(doc)


def cmd_train(args) -> int:
    cfg = build_run_config(args)
    for seed in cfg.seeds:
        run_dir = cfg.run_dir(seed)
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.json").write_text(json.dumps(cfg.snapshot(seed), indent=2, sort_keys=True) + "\n")
        algo_cfg = cfg.algo_config(seed)
        ckpt = run_dir / "checkpoint.json"
        with MetricsWriter(run_dir / "metrics.csv") as writer:
            def log(row, agent):
                writer.write(row)
            if cfg.algo == "hppo":
                result = train(cfg.env, algo_cfg, on_iteration=log, checkpoint_path=ckpt)
            else:
                result = train_dqn(cfg.env, cfg.bins, algo_cfg, on_iteration=log, checkpoint_path=ckpt)
        summary = f"{cfg.env} {cfg.algo} seed={seed} iterations={len(result.stats)}"
        if result.stats:
            last = result.stats[-1]
            summary += (f" env_steps={last.env_steps} success={last.success_rate:.3f}"
                        f" reward={last.mean_ep_reward:.3f}")
        print(f"{summary} cpu={result.elapsed:.1f}s -> {run_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.env not in ENVS:
        raise ConfigError(f"unknown env {args.env!r}; valid names: {', '.join(ENVS)}")
    if args.episodes < 1:
        raise ConfigError("--episodes must be >= 1")
    env = make_env(args.env)
    if args.policy == "scripted":
        act = scripted_actor()
    else:
        if not args.checkpoint:
            raise UsageError("--checkpoint is required unless --policy scripted")
        try:
            act = load_actor(args.checkpoint, env, args.env, Rng(args.seed, 1))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot use checkpoint {args.checkpoint}: {exc}") from exc
    env_rng = Rng(args.seed, 2)
    if args.trace:
        with open(args.trace, "w") as fh:
            rep = evaluate(env, act, args.episodes, env_rng, trace=fh)
    else:
        rep = evaluate(env, act, args.episodes, env_rng)
    print(json.dumps({"env": args.env, "seed": args.seed, **rep.to_json()}))
    return EXIT_OK


def cmd_compare(args) -> int:
    matrix = load_flat(args.matrix) if args.matrix else {}
    root = output_root(args.root, matrix.get("root"))
    envs = args.envs or matrix.get("envs") or list(ENVS)
    algos = args.algos or matrix.get("algos") or list(ALGOS)
    seeds = args.seeds or matrix.get("seeds")
    if not seeds:
        raise ConfigError("compare needs a seed list (--seeds or matrix 'seeds')")
    report = build_report(root, envs, algos, seeds)
    for path in report.missing:
        _err(f"warning: missing run {path}")
    if report.missing:
        _err(f"warning: partial report, {len(report.missing)} run(s) missing")
    print(report.to_text())
    csv_path = Path(args.csv) if args.csv else Path(root) / "report.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(report.to_csv())
    return EXIT_OK


def _default_label(path: Path) -> str:
    if path.parent.name.startswith("seed"):
        return path.parent.parent.name
    return path.stem


def cmd_plot(args) -> int:
    paths = [Path(p) for p in args.metrics]
    if args.label and len(args.label) != len(paths):
        raise UsageError("--label must be given once per metrics file")
    labels = args.label or [_default_label(p) for p in paths]
    groups: dict[str, list] = {}
    for label, path in zip(labels, paths):
        try:
            rows = read_metrics(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        if not rows:
            raise ConfigError(f"{path} has no rows")
        groups.setdefault(label, []).append(rows)
    svg = render_svg({k: average_curves(v) for k, v in groups.items()})
    Path(args.out).write_text(svg)
    print(args.out)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parc", description="Parameterized-action RL experiments")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one run per seed")
    t.add_argument("--config", help="flat dotted-key JSON config file")
    t.add_argument("--env")
    t.add_argument("--algo", choices=ALGOS)
    t.add_argument("--seed", type=int, nargs="+", action="extend", help="one or more seeds")
    t.add_argument("--iters", type=int, help="maximum iterations")
    t.add_argument("--steps", type=int, help="maximum environment steps")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (JSON value)")
    t.add_argument("--out", help="output root (default: $PARC_OUT, then config 'out', then ./runs)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint or the scripted controller")
    e.add_argument("--checkpoint")
    e.add_argument("--env", required=True)
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--trace", help="write a JSON-lines action trace here")
    e.add_argument("--policy", choices=("checkpoint", "scripted"), default="checkpoint")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="aggregate finished runs into a table and CSV")
    c.add_argument("--matrix", help="JSON with root, envs, algos, seeds")
    c.add_argument("--root")
    c.add_argument("--envs", nargs="+")
    c.add_argument("--algos", nargs="+")
    c.add_argument("--seeds", type=int, nargs="+")
    c.add_argument("--csv", help="report CSV path (default: <root>/report.csv)")
    c.set_defaults(func=cmd_compare)

    pl = sub.add_parser("plot", help="render training curves as SVG")
    pl.add_argument("metrics", nargs="+", help="metrics.csv files")
    pl.add_argument("--label", action="append", help="curve label per file (files sharing a label are averaged)")
    pl.add_argument("--out", default="curves.svg")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, SchemaMismatch) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (TrainingError, RolloutError, DomainError, OSError) as exc:
        _err(f"run failed: {exc}")
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
