"""Command-line interface for the cfair audit harness."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from .client import cache_gc
from .config import ExperimentConfig, load_config
from .dataset import load_movielens, split_chronological, split_stats, write_stats
from .errors import CFairError, ConfigurationError
from .evaluator import (
    FairnessAuditor,
    ReportFormat,
    RunArtifacts,
    emit_report,
    run_experiment,
    sweep_scope,
)
from .profiler import SCOPE_SWEEP
from .utils import write_json

logger = logging.getLogger("cfair")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _csv_list(value: str) -> List[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def _int_list(value: str) -> List[int]:
    try:
        return [int(part) for part in _csv_list(value)]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected integers, got {value!r}") from e


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="Path to a JSON config file")
    parser.add_argument(
        "--data-dir", type=Path, help="Directory with the ML-1M .dat files"
    )
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--seed", type=int, help="Random seed")
    parser.add_argument("--cohort-size", type=int, help="Number of audited users")


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--strategies",
        type=_csv_list,
        help="Comma-separated profile strategies (random,top_rated,recent)",
    )
    parser.add_argument("--k", type=int, help="Number of recommendations requested")
    parser.add_argument(
        "--backend", choices=["live", "mock"], help="Completion backend"
    )
    parser.add_argument("--bias", type=float, help="Mock stereotype bias strength")
    parser.add_argument("--threshold", type=float, help="Title resolver threshold")
    parser.add_argument(
        "--no-progress", action="store_true", help="Disable progress bars"
    )


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Map parsed flags onto ExperimentConfig fields; unset flags are None."""
    overrides: Dict[str, Any] = {
        "data_dir": getattr(args, "data_dir", None),
        "out_dir": getattr(args, "out", None),
        "seed": getattr(args, "seed", None),
        "cohort_size": getattr(args, "cohort_size", None),
        "strategies": getattr(args, "strategies", None),
        "scopes": getattr(args, "scopes", None),
        "k": getattr(args, "k", None),
        "backend": getattr(args, "backend", None),
        "resolver_threshold": getattr(args, "threshold", None),
    }
    bias = getattr(args, "bias", None)
    if bias is not None:
        overrides["bias"] = {"bias_strength": bias}
    return overrides


def _load(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(getattr(args, "config", None), _overrides(args))


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _load(args)
    data = load_movielens(config.data_dir)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data.skips.write(out_dir / "skipped.jsonl")
    summary = {
        "items": len(data.catalog),
        "ratings": len(data.ratings),
        "users": len(data.users),
        "skipped_lines": len(data.skips),
    }
    write_json(summary, out_dir / "ingest.json")
    print(
        f"{summary['items']} items, {summary['ratings']} ratings, "
        f"{summary['users']} users, {summary['skipped_lines']} lines skipped"
    )
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    config = _load(args)
    data = load_movielens(config.data_dir)
    split = split_chronological(data.ratings, config.split_fractions)
    rows = split_stats(data.catalog, data.ratings, split)
    _, text_path = write_stats(rows, config.out_dir)
    print(text_path.read_text(encoding="utf-8"), end="")
    return 0


def cmd_cohort(args: argparse.Namespace) -> int:
    config = _load(args)
    prepared = FairnessAuditor(config, show_progress=False).prepare()
    users = prepared.data.users_by_id
    document = {
        "seed": config.seed,
        "cohort_size": len(prepared.cohort),
        "report": prepared.cohort_report.to_dict(),
        "users": [
            {
                "user_id": uid,
                "gender": users[uid].gender.value,
                "age_bucket": users[uid].age_bucket.value,
            }
            for uid in prepared.cohort
        ],
    }
    path = write_json(document, Path(config.out_dir) / "cohort.json")
    print(f"Cohort of {len(prepared.cohort)} users written to {path}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args)
    artifacts = run_experiment(config, show_progress=not args.no_progress)
    print(f"Run written to {artifacts.run_dir}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load(args)
    if args.ns:
        ns = args.ns
    elif "scopes" in config.model_fields_set:
        ns = list(config.scopes)
    else:
        ns = list(SCOPE_SWEEP)
    result = sweep_scope(config, ns, show_progress=not args.no_progress)
    print(f"Sweep written to {result.sweep_dir}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    artifacts = RunArtifacts.load(args.run_dir)
    for path in emit_report(artifacts, ReportFormat(args.format)):
        print(path)
    return 0


def cmd_cache_gc(args: argparse.Namespace) -> int:
    if args.max_age_days < 0:
        raise ConfigurationError("--max-age-days must not be negative")
    cache_dir = args.cache_dir
    if cache_dir is None:
        cache_dir = _load(args).resolved_cache_dir
    removed = cache_gc(cache_dir, args.max_age_days * 86400.0)
    print(f"Removed {removed} cache entries from {cache_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfair", description="Consumer-fairness audit of LLM recommenders"
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings only")
    subparsers = parser.add_subparsers(dest="command", required=True)

    ingest = subparsers.add_parser("ingest", help="Parse the dataset and report skips")
    _add_config_flags(ingest)
    ingest.set_defaults(func=cmd_ingest)

    stats = subparsers.add_parser("stats", help="Dataset statistics per split")
    _add_config_flags(stats)
    stats.set_defaults(func=cmd_stats)

    cohort = subparsers.add_parser("cohort", help="Draw and save the audit cohort")
    _add_config_flags(cohort)
    cohort.add_argument("--scopes", type=_int_list, help="Profile sizes, e.g. 5,10,15")
    cohort.set_defaults(func=cmd_cohort)

    run = subparsers.add_parser("run", help="Run one audit")
    _add_config_flags(run)
    _add_experiment_flags(run)
    run.add_argument("--scopes", type=_int_list, help="Profile sizes, e.g. 10")
    run.set_defaults(func=cmd_run)

    sweep = subparsers.add_parser("sweep", help="Run the audit per profile size")
    _add_config_flags(sweep)
    _add_experiment_flags(sweep)
    sweep.add_argument(
        "--scopes",
        dest="ns",
        type=_int_list,
        help="Profile sizes; defaults to the config file's scopes, else 5,10,15",
    )
    sweep.set_defaults(func=cmd_sweep)

    report = subparsers.add_parser("report", help="Re-emit reports of a run")
    report.add_argument("run_dir", type=Path, help="Run directory")
    report.add_argument(
        "--format", choices=[f.value for f in ReportFormat], default="csv"
    )
    report.set_defaults(func=cmd_report)

    gc = subparsers.add_parser("cache-gc", help="Delete old cached responses")
    _add_config_flags(gc)
    gc.add_argument("--cache-dir", type=Path, help="Cache directory")
    gc.add_argument("--max-age-days", type=float, required=True)
    gc.set_defaults(func=cmd_cache_gc)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT)

    try:
        return args.func(args)
    except CFairError as e:
        logger.error("%s", e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
