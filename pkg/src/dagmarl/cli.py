"""Command-line entry point: train, evaluate, verify-theorem, plot."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from .config import (ConfigError, ExperimentConfig, apply_overrides,
                     load_config)
from .logio import (IoError, SchemaMismatch, read_episode_csv,
                    write_episode_csv)
from .metrics import EmptySeries, min_max_normalize, moving_average
from .nn import CheckpointMismatch
from .plotting import histogram_chart, line_chart


def _config_dict(config: ExperimentConfig) -> dict:
    data = dataclasses.asdict(config)
    data["mode"] = config.mode.value
    data["ppo"]["hidden"] = list(config.ppo.hidden)
    data["env_options"] = {k: list(v) if isinstance(v, tuple) else v
                           for k, v in config.env_options.items()}
    return data


def _load(args) -> ExperimentConfig:
    config = (load_config(args.config) if args.config
              else ExperimentConfig())
    return apply_overrides(config, mode=getattr(args, "mode", None),
                           seed=getattr(args, "seed", None),
                           episodes=getattr(args, "episodes", None),
                           out=getattr(args, "out", None))


def _cmd_train(args) -> int:
    from .training import train

    config = _load(args)
    if not config.out_dir:
        raise ConfigError("train needs an output directory: "
                          "set [run] out or pass --out")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    started = time.monotonic()
    result = train(config)
    wall = time.monotonic() - started

    write_episode_csv(out / "episodes.csv", result.records)
    result.trainer.save_checkpoints(out / "checkpoints")
    meta = {"config": _config_dict(config), "wall_seconds": wall,
            "episodes_run": len(result.records)}
    with open(out / "run_meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    tail = [r.team_reward for r in result.records[-100:]]
    mean_tail = sum(tail) / len(tail) if tail else float("nan")
    print(f"trained {len(result.records)} episodes "
          f"({config.mode.value}/{config.env_name}, seed {config.seed}); "
          f"mean team reward over last {len(tail)}: {mean_tail:.3f}")
    print(f"wrote {out / 'episodes.csv'}")
    return 0


def _cmd_evaluate(args) -> int:
    from .evaluate import evaluate

    config = _load(args)
    episodes = args.episodes if args.episodes is not None else 1000
    result = evaluate(config, args.checkpoints, episodes=episodes,
                      seed=args.seed, bins=args.bins)
    out = Path(args.out) if args.out else Path(args.checkpoints)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "eval_summary.json", "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    lines = [f"{i},{r!r}" for i, r in enumerate(result.rewards)]
    (out / "eval_rewards.csv").write_text(
        "# dagmarl-log v1\nepisode,team_reward\n" + "\n".join(lines) + "\n")
    chart = histogram_chart(result.counts, result.edges,
                            x_label="episode team reward",
                            title=f"{config.mode.value}/{config.env_name} "
                                  f"({episodes} frozen episodes)")
    (out / "eval_histogram.svg").write_text(chart)

    s = result.summary
    print(f"evaluated {episodes} episodes: mean {s['mean']:.3f}, "
          f"median {s['median']:.3f}, std {s['std']:.3f}")
    print(f"wrote {out / 'eval_summary.json'}")
    return 0


def _cmd_verify(args) -> int:
    from .oracle import run_bound_campaign

    report = run_bound_campaign(trials=args.trials, seed=args.seed or 0,
                                gamma=args.gamma)
    payload = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    print(payload)
    if args.out:
        Path(args.out).write_text(payload + "\n")
    return 0 if report.violations == 0 else 1


def _cmd_plot(args) -> int:
    series = {}
    for path in args.csv:
        columns = read_episode_csv(path)
        if args.column not in columns:
            raise SchemaMismatch(
                f"{path}: no column {args.column!r}; "
                f"available: {sorted(columns)}")
        values = columns[args.column].astype(float)
        if args.window:
            values = moving_average(values, window=args.window)
        if args.normalize:
            values = min_max_normalize(values)
        name = Path(path).stem
        if name in series:
            name = f"{name}-{len(series)}"
        series[name] = values
    y_label = args.column + (" (normalized)" if args.normalize else "")
    chart = line_chart(series, y_label=y_label, title=args.title or "")
    Path(args.out).write_text(chart)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dagmarl",
        description="train and probe cooperating learners on DAG tasks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training experiment")
    p_train.add_argument("--config", help="experiment config file")
    p_train.add_argument("--mode", help="override the run mode")
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--episodes", type=int)
    p_train.add_argument("--out", help="output directory")
    p_train.set_defaults(handler=_cmd_train)

    p_eval = sub.add_parser("evaluate", help="run frozen policies")
    p_eval.add_argument("checkpoints", help="checkpoint directory")
    p_eval.add_argument("--config", help="experiment config file")
    p_eval.add_argument("--mode", help="override the run mode")
    p_eval.add_argument("--seed", type=int)
    p_eval.add_argument("--episodes", type=int)
    p_eval.add_argument("--out", help="output directory")
    p_eval.add_argument("--bins", type=int, default=30)
    p_eval.set_defaults(handler=_cmd_evaluate)

    p_verify = sub.add_parser(
        "verify-theorem",
        help="randomized audit of the synthetic-value upper bound")
    p_verify.add_argument("--trials", type=int, default=200)
    p_verify.add_argument("--seed", type=int)
    p_verify.add_argument("--gamma", type=float, default=0.9)
    p_verify.add_argument("--out", help="also write the JSON report here")
    p_verify.set_defaults(handler=_cmd_verify)

    p_plot = sub.add_parser("plot", help="chart columns from episode logs")
    p_plot.add_argument("csv", nargs="+", help="episode log files")
    p_plot.add_argument("--column", default="team_reward")
    p_plot.add_argument("--window", type=int,
                        help="moving-average window")
    p_plot.add_argument("--normalize", action="store_true",
                        help="min-max normalize after averaging")
    p_plot.add_argument("--title", help="chart title")
    p_plot.add_argument("--out", required=True, help="output SVG path")
    p_plot.set_defaults(handler=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.handler(args)
    except (ConfigError, IoError, SchemaMismatch, CheckpointMismatch,
            EmptySeries, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
