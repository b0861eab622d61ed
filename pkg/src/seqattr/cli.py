"""Command-line entry point for the attribution benchmark.

Subcommands map one-to-one onto pipeline stages:

    seqattr gen-data  --config configs/default.yaml
    seqattr train     --config configs/default.yaml
    seqattr attribute --config configs/default.yaml --workers 8
    seqattr report    --config configs/default.yaml
    seqattr all       --config configs/default.yaml

Common flags: --seed-override N replaces all three seeds; --workers N bounds
the worker pool; repeatable --only method=NAME / model=NAME / task=NAME
filters restrict the grid (values may be comma-separated).
"""

from __future__ import annotations

import argparse
import sys

from .bench import load_config, run_all, stage_attribute, stage_gen_data, stage_report, stage_train
from .errors import ConfigError, SeqAttrError


def _parse_only(pairs):
    """--only filters -> (methods, models, tasks) sets or None."""
    allowed = {"method": None, "model": None, "task": None}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--only expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        if key not in allowed:
            raise ConfigError(f"--only key must be one of method/model/task, got {key!r}")
        values = {v.strip() for v in value.split(",") if v.strip()}
        if not values:
            raise ConfigError(f"--only {key}= has no values")
        allowed[key] = (allowed[key] or set()) | values
    return allowed["method"], allowed["model"], allowed["task"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqattr",
        description="Feature-attribution faithfulness benchmark for sequence classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("gen-data", "generate the synthetic task datasets"),
        ("train", "train every configured (model, task) pair"),
        ("attribute", "run every configured attribution method"),
        ("report", "compute faithfulness reports, win matrix, and plots"),
        ("all", "run the full pipeline end to end"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, metavar="PATH",
                       help="YAML config (omit for built-in defaults)")
        p.add_argument("--seed-override", type=int, default=None, metavar="N",
                       help="replace the data/train/bench seeds with N")
        p.add_argument("--workers", type=int, default=None, metavar="N",
                       help="worker pool size (overrides the config)")
        p.add_argument("--only", action="append", default=None, metavar="KEY=VALUE",
                       help="restrict to method=/model=/task= (repeatable, comma lists ok)")
        p.add_argument("--output-dir", default=None, metavar="DIR",
                       help="output directory (overrides the config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.seed_override is not None:
        overrides["seeds"] = {
            "data": args.seed_override,
            "train": args.seed_override,
            "bench": args.seed_override,
        }
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    try:
        cfg = load_config(args.config, overrides=overrides)
        methods, models, tasks = _parse_only(args.only)
        print(f"[config] hash {cfg.config_hash[:12]}… -> {cfg.output_dir}")
        if args.command == "gen-data":
            stage_gen_data(cfg, only_tasks=tasks)
        elif args.command == "train":
            stage_train(cfg, only_models=models, only_tasks=tasks)
        elif args.command == "attribute":
            stage_attribute(cfg, only_methods=methods, only_models=models, only_tasks=tasks)
        elif args.command == "report":
            stage_report(cfg, only_methods=methods, only_models=models, only_tasks=tasks)
        else:
            run_all(cfg, only_methods=methods, only_models=models, only_tasks=tasks)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (SeqAttrError, FileNotFoundError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
