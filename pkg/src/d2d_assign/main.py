"""Main entry point: load config, apply CLI overrides, run the experiment, write CSV."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Sequence

import structlog

from d2d_assign.config import ExperimentConfig, load_config, validate_config
from d2d_assign.errors import (
    AssignmentError,
    CapacityError,
    ConfigurationError,
    DomainError,
    UnsupportedError,
)
from d2d_assign.harness import (
    STATUS_NUMERIC_ERROR,
    run_experiment,
    summarize,
    utility_ratios,
    write_csv,
)

log = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_ALL_INFEASIBLE = 3
EXIT_CAPACITY = 4


# ---------------------------------------------------------------------------
# Logging setup
# ---------------------------------------------------------------------------

def _configure_logging(cfg: ExperimentConfig) -> None:
    """Initialise ``structlog`` based on config."""
    processors: list = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
    ]

    if cfg.logging.format == "json":
        processors.append(structlog.processors.JSONRenderer())
    else:
        processors.append(structlog.dev.ConsoleRenderer())

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.make_filtering_bound_logger(
            structlog.stdlib.NAME_TO_LEVEL.get(
                cfg.logging.level.lower(), 20,  # default INFO
            ),
        ),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(sys.stderr),
        cache_logger_on_first_use=True,
    )


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(item.strip().lower() for item in text.split(",") if item.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d2d-assign",
        description="Channel assignment experiments for D2D links underlaying a cell.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  d2d-assign --drops 100 --algorithms dp,cluster --csi full,s1,s2 --out results.csv
  d2d-assign --config config/config.yaml --objective access --seed 7
        """,
    )
    parser.add_argument("--config", default=None, help="YAML config file (default: config/config.yaml)")
    parser.add_argument("--drops", type=int, help="number of scenario drops")
    parser.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    parser.add_argument("--algorithms", type=_csv_list, help="comma list of dp,cluster,exhaustive,semi_orthogonal")
    parser.add_argument("--csi", type=_csv_list, help="comma list of full,s1,s2,s3,s4")
    parser.add_argument("--objective", choices=("ewsr", "wsr", "access"))
    parser.add_argument("--out", help="CSV output path")
    parser.add_argument("--d2d-links", type=int, help="number of D2D links")
    parser.add_argument("--bs-power-dbm", type=float, help="base-station transmit power")
    parser.add_argument("--workers", type=int, help="parallel drop workers")
    parser.add_argument("--runtime", action="store_true", help="record solver wall time per row")
    return parser


def apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    run_changes = {
        "drops": args.drops,
        "base_seed": args.seed,
        "algorithms": args.algorithms,
        "csi_scenarios": args.csi,
        "objective": args.objective,
        "output": args.out,
        "workers": args.workers,
        "record_runtime": True if args.runtime else None,
    }
    run_changes = {k: v for k, v in run_changes.items() if v is not None}
    cfg = replace(cfg, experiment=replace(cfg.experiment, **run_changes))
    if args.d2d_links is not None:
        cfg = replace(cfg, network=replace(cfg.network, d2d_links=args.d2d_links))
    if args.bs_power_dbm is not None:
        cfg = replace(cfg, radio=replace(cfg.radio, bs_power_dbm=args.bs_power_dbm))
    return cfg


def run_cli(argv: Sequence[str] | None = None) -> int:
    """Run one experiment from CLI arguments; returns the process exit code."""
    args = build_parser().parse_args(argv)
    # stderr with default settings until the config file has been read
    _configure_logging(ExperimentConfig())
    try:
        config = validate_config(apply_overrides(load_config(args.config), args))
    except ConfigurationError as exc:
        log.error("app.config_error", error=str(exc))
        return EXIT_CONFIG
    _configure_logging(config)

    try:
        rows = run_experiment(config)
    except (ConfigurationError, UnsupportedError) as exc:
        log.error("app.config_error", error=str(exc))
        return EXIT_CONFIG
    except CapacityError as exc:
        log.error("app.capacity_error", error=str(exc))
        return EXIT_CAPACITY
    except AssignmentError as exc:
        log.error("app.invalid_assignment", violations=exc.violations)
        return EXIT_FAILURE
    except DomainError as exc:
        log.error("app.domain_error", error=str(exc))
        return EXIT_FAILURE

    path = write_csv(rows, config.experiment.output)
    for summary in summarize(rows):
        log.info(
            "app.summary", **dict(summary.group), drops=summary.count,
            mean_utility=round(summary.mean_utility, 6), se=round(summary.se_utility, 6),
            d2d_uplink=summary.mean_d2d_uplink, d2d_downlink=summary.mean_d2d_downlink,
            feasible_rate=summary.feasible_rate, numeric_errors=summary.numeric_errors,
        )
    for (algorithm, csi), ratio in utility_ratios(rows).items():
        log.info("app.utility_ratio", algorithm=algorithm, csi=csi, reference="dp", mean_ratio=round(ratio, 6))
    failed = sum(r.status == STATUS_NUMERIC_ERROR for r in rows)
    if failed:
        log.warning("app.numeric_errors", rows=failed)
    log.info("app.csv_written", path=str(path), rows=len(rows))

    if not any(r.feasible for r in rows):
        log.error("app.all_drops_infeasible")
        return EXIT_ALL_INFEASIBLE
    return EXIT_OK


def main() -> None:
    """CLI entry point."""
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
