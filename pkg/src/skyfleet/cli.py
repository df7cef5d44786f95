"""Experiment harness CLI.

Subcommands: ``generate`` a world file, ``train`` (or roll the scripted
baseline), ``eval`` a frozen policy, ``serve`` the stdio protocol, and
``render`` a snapshot from a trace. Exit codes: 0 success, 1 runtime
error, 2 usage error. All randomness flows from the seed (flag,
SKYFLEET_SEED, or config file, in that order of precedence).
"""

import argparse
import json
import os
import sys
from pathlib import Path

from .baseline import run_baseline
from .config import ConfigError, ScenarioConfig, load_config
from .learn import ALGO_QLEARNING, ALGO_SARSA, QTable, evaluate, train
from .metrics import write_epoch_csv
from .presets import CASE_IDS, case_preset
from .render import render_snapshot, render_training_curves
from .scenario import generate_scenario, load_world, save_world
from .serve import serve_loop

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", type=int, choices=CASE_IDS, help="preset case id (1-9)")
    p.add_argument("--config", type=Path, help="path to a scenario config JSON")
    p.add_argument("--seed", type=int, default=None, help="run seed (default: $SKYFLEET_SEED or 0)")
    p.add_argument(
        "--users-variant",
        choices=("qlearning", "sarsa"),
        default="qlearning",
        help="which user count to use where a case lists two",
    )


def _resolve_config(parser: argparse.ArgumentParser, args) -> ScenarioConfig:
    if args.case is not None and args.config is not None:
        parser.error("--case and --config are mutually exclusive")
    if args.case is None and args.config is None:
        parser.error("one of --case or --config is required")
    env_seed = os.environ.get("SKYFLEET_SEED")
    seed = args.seed
    if seed is None and env_seed is not None:
        seed = int(env_seed)
    if args.case is not None:
        return case_preset(args.case, seed=0 if seed is None else seed, users_variant=args.users_variant)
    config = load_config(args.config)
    if seed is not None:
        config.seed = seed
    return config.validate()


def _case_label(args) -> str:
    return str(args.case) if args.case is not None else "custom"


def _print_final(reports) -> None:
    rep = reports[-1]
    print(
        f"final epoch {rep.epoch}: qoe1={rep.qoe1_pct:.2f}% "
        f"qoe2={rep.qoe2_iters:.2f}it qoe3={rep.qoe3_pct:.2f}% crashes={rep.crashes}"
    )


def _cmd_generate(parser, args) -> int:
    config = _resolve_config(parser, args)
    world, users = generate_scenario(config)
    save_world(args.out, config, world, users)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_train(parser, args) -> int:
    config = _resolve_config(parser, args)
    epochs = args.epochs if args.epochs is not None else config.rl.training_epochs
    if epochs <= 0:
        parser.error("--epochs must be positive")
    world, users = generate_scenario(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.algo == "baseline":
        result = run_baseline(world, users, config, epochs, trace=args.trace)
    else:
        result = train(world, users, config, args.algo, epochs, trace=args.trace)
        for i, table in enumerate(result.qtables):
            table.save(out_dir / f"qtable_agent{i}.json")
    write_epoch_csv(result.reports, out_dir / "metrics.csv", args.algo, _case_label(args), config.seed)
    with open(out_dir / "trace.jsonl", "w", encoding="utf-8") as fh:
        for record in result.trace:
            fh.write(json.dumps(record) + "\n")
    if not args.no_figures:
        render_training_curves(
            result.reports,
            out_dir / "training_curves.svg",
            title=f"{args.algo} case={_case_label(args)} seed={config.seed}",
        )
    _print_final(result.reports)
    return EXIT_OK


def _cmd_eval(parser, args) -> int:
    config, world, users = load_world(args.world)
    table_paths = sorted(Path(args.qtables).glob("qtable_agent*.json"))
    if not table_paths:
        raise FileNotFoundError(f"no qtable_agent*.json files in {args.qtables}")
    tables = [QTable.load(p) for p in table_paths]
    epsilon = 0.0 if args.greedy else args.epsilon
    result = evaluate(world, users, config, tables, epochs=args.epochs, epsilon=epsilon)
    write_epoch_csv(result.reports, args.out, "eval", "custom", config.seed)
    _print_final(result.reports)
    return EXIT_OK


def _cmd_serve(parser, args) -> int:
    config = _resolve_config(parser, args)
    return serve_loop(config, sys.stdin, sys.stdout)


def _cmd_render(parser, args) -> int:
    config, world, users = load_world(args.world)
    record = None
    with open(args.trace, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("iteration") == args.iter:
                record = rec
                break
    if record is None:
        raise LookupError(f"trace {args.trace} has no iteration {args.iter}")
    render_snapshot(config, world, users, record, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skyfleet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a world file from a config or case preset")
    _add_scenario_args(p)
    p.add_argument("--out", type=Path, required=True, help="output world JSON path")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train agents (or roll the baseline) and log metrics")
    _add_scenario_args(p)
    p.add_argument("--algo", choices=(ALGO_QLEARNING, ALGO_SARSA, "baseline"), required=True)
    p.add_argument("--epochs", type=int, default=None, help="epochs (default: config value)")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--trace", choices=("none", "last", "all"), default="last",
                   help="which epochs to write to trace.jsonl")
    p.add_argument("--no-figures", action="store_true", help="skip the training curve figures")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="run a frozen policy from saved qtables")
    p.add_argument("--world", type=Path, required=True)
    p.add_argument("--qtables", type=Path, required=True, help="directory of qtable_agent*.json")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--greedy", action="store_true", help="force epsilon 0")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--out", type=Path, required=True, help="output metrics CSV path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="line-JSON environment session on stdio")
    _add_scenario_args(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("render", help="render one traced iteration to SVG")
    p.add_argument("--world", type=Path, required=True)
    p.add_argument("--trace", type=Path, required=True)
    p.add_argument("--iter", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, LookupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
