"""Command line: ``intsac train|plot|compare|eval``.

Exit codes: 0 ok, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..distributions import RngStream
from .config import ConfigError, TrainConfig
from .curves import aggregate_and_plot, compare, compare_csv
from .train import NumericError, evaluate, make_agent, make_env, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _train(args) -> int:
    try:
        cfg = TrainConfig.from_file(args.config)
    except FileNotFoundError:
        print(f"config error: {args.config}: no such file", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, TypeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    seeds = [args.seed] if args.seed is not None else None
    try:
        dirs = run(cfg, seeds=seeds, out_dir=args.out)
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    for d in dirs:
        print(d)
    return EXIT_OK


def _plot(args) -> int:
    out = Path(args.out) if args.out else Path(args.runs[0]).parent / "curves"
    res = aggregate_and_plot(args.runs, out)
    print(res["csv"])
    print(res["svg"])
    return EXIT_OK


def _compare(args) -> int:
    try:
        scores, verdicts = compare(args.runs, frac=args.window)
    except ValueError as e:
        print(f"compare error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    text = compare_csv(scores, verdicts)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _eval(args) -> int:
    doc = json.loads(Path(args.checkpoint).read_text())
    meta = doc.get("meta", {})
    if "train_config" not in meta:
        print("config error: checkpoint carries no train_config", file=sys.stderr)
        return EXIT_CONFIG
    cfg = TrainConfig.from_dict(meta["train_config"])
    seed = int(meta.get("seed", 0)) if args.seed is None else args.seed
    env = make_env(cfg, seed)
    agent = make_agent(cfg, env, RngStream(seed).child(0))
    agent.load(args.checkpoint)
    ret = evaluate(agent, env, args.episodes, seed, deterministic=not args.stochastic)
    print(json.dumps({"checkpoint": str(args.checkpoint), "episodes": args.episodes, "mean_return": ret}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="intsac", description="SAC with integer actions: training and analysis")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train every seed of a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=None, help="run only this seed")
    t.add_argument("--out", default=None, help="override out_dir")
    t.set_defaults(fn=_train)

    pl = sub.add_parser("plot", help="mean +- std learning curves (CSV + SVG)")
    pl.add_argument("--runs", nargs="+", required=True)
    pl.add_argument("--out", default=None, help="output prefix (default <parent>/curves)")
    pl.set_defaults(fn=_plot)

    c = sub.add_parser("compare", help="final-window scores and dominance verdicts")
    c.add_argument("--runs", nargs="+", required=True)
    c.add_argument("--window", type=float, default=0.1, help="final fraction of eval points")
    c.add_argument("--out", default=None)
    c.set_defaults(fn=_compare)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--stochastic", action="store_true")
    e.set_defaults(fn=_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
