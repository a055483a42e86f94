"""Drop-based experiments: scenarios x algorithms x CSI settings -> CSV rows."""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from functools import partial
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import structlog

from d2d_assign.cluster_solver import solve_cluster, solve_semi_orthogonal
from d2d_assign.config import ExperimentConfig, validate_config
from d2d_assign.dp_solver import Assignment, solve_dp, solve_exhaustive, validate_assignment
from d2d_assign.errors import DomainError, InfeasibleError, NumericError
from d2d_assign.model import CsiScenario, Scenario, generate_scenario
from d2d_assign.stats import StatsControl
from d2d_assign.utility import ChannelEvaluator, UtilityKind

log = structlog.get_logger(__name__)

STATUS_OK = "ok"
STATUS_INFEASIBLE = "infeasible"
STATUS_NUMERIC_ERROR = "numeric_error"


@dataclass(frozen=True, slots=True)
class ResultRow:
    drop_id: int
    seed: int
    algorithm: str
    csi_scenario: str
    objective: str
    utility: float
    n_active_d2d: int
    n_d2d_uplink: int
    n_d2d_downlink: int
    feasible: bool
    runtime_ms: float
    access_rate: float
    status: str = STATUS_OK

    @property
    def sort_key(self) -> tuple[int, str, str]:
        return (self.drop_id, self.algorithm, self.csi_scenario)


CSV_COLUMNS = tuple(f.name for f in fields(ResultRow))


@dataclass(frozen=True, slots=True)
class SummaryRow:
    group: tuple[tuple[str, Any], ...]
    count: int
    mean_utility: float
    se_utility: float
    mean_active_d2d: float
    mean_d2d_uplink: float
    mean_d2d_downlink: float
    mean_access_rate: float
    feasible_rate: float
    numeric_errors: int = 0


# ---------------------------------------------------------------------------
# Solver registry
# ---------------------------------------------------------------------------

Solver = Callable[[ChannelEvaluator, ExperimentConfig], Assignment]

_SOLVERS: dict[str, Solver] = {}


def _register(name: str):
    """Decorator to register a solver under its CLI name."""
    def wrapper(fn: Solver) -> Solver:
        _SOLVERS[name] = fn
        return fn
    return wrapper


@_register("dp")
def _run_dp(ev: ChannelEvaluator, cfg: ExperimentConfig) -> Assignment:
    return solve_dp(ev.scenario, ev.csi, ev.kind, max_links=cfg.experiment.max_dp_links, evaluator=ev)


@_register("exhaustive")
def _run_exhaustive(ev: ChannelEvaluator, cfg: ExperimentConfig) -> Assignment:
    return solve_exhaustive(ev.scenario, ev.csi, ev.kind, evaluator=ev)


@_register("cluster")
def _run_cluster(ev: ChannelEvaluator, cfg: ExperimentConfig) -> Assignment:
    return solve_cluster(ev.scenario, ev.csi, ev.kind, evaluator=ev)


@_register("semi_orthogonal")
def _run_semi_orthogonal(ev: ChannelEvaluator, cfg: ExperimentConfig) -> Assignment:
    return solve_semi_orthogonal(ev.scenario, ev.csi, ev.kind, evaluator=ev)


# ---------------------------------------------------------------------------
# Drops
# ---------------------------------------------------------------------------

def derive_drop_seed(base_seed: int, drop_id: int) -> int:
    """Scenario seed of one drop: first word of ``SeedSequence([base_seed, drop_id])``.

    Depends on nothing else, so the algorithm list never shifts the drops.
    """
    state = np.random.SeedSequence([base_seed, drop_id]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _row(
    scenario: Scenario,
    drop_id: int,
    seed: int,
    algorithm: str,
    csi: CsiScenario,
    objective: str,
    assignment: Assignment | None,
    runtime_ms: float,
    status: str = STATUS_OK,
) -> ResultRow:
    if assignment is None:
        return ResultRow(
            drop_id, seed, algorithm, csi.value, objective, 0.0, 0, 0, 0, False, runtime_ms, 0.0, status,
        )
    up, down = assignment.d2d_counts(scenario)
    return ResultRow(
        drop_id=drop_id,
        seed=seed,
        algorithm=algorithm,
        csi_scenario=csi.value,
        objective=objective,
        utility=assignment.value,
        n_active_d2d=up + down,
        n_d2d_uplink=up,
        n_d2d_downlink=down,
        feasible=True,
        runtime_ms=runtime_ms,
        access_rate=len(assignment.active_links) / scenario.n_links,
    )


def run_drop(config: ExperimentConfig, drop_id: int) -> list[ResultRow]:
    """Every (algorithm, CSI) pair on one generated scenario."""
    run = config.experiment
    seed = derive_drop_seed(run.base_seed, drop_id)
    scenario = generate_scenario(config, seed)
    kind = UtilityKind.from_name(run.objective)
    ctrl = StatsControl.from_config(config.numerics)
    rows: list[ResultRow] = []

    for csi_name in run.csi_scenarios:
        csi = CsiScenario.from_name(csi_name)
        evaluator = ChannelEvaluator(scenario, csi, kind, ctrl)
        for algorithm in run.algorithms:
            solver = _SOLVERS[algorithm]
            started = time.perf_counter()
            status = STATUS_OK
            try:
                assignment = solver(evaluator, config)
            except InfeasibleError as exc:
                log.warning(
                    "harness.drop_infeasible", drop=drop_id, algorithm=algorithm,
                    csi=csi.value, reason=str(exc),
                )
                assignment, status = None, STATUS_INFEASIBLE
            except NumericError as exc:
                log.warning(
                    "harness.drop_numeric_error", drop=drop_id, algorithm=algorithm,
                    csi=csi.value, reason=str(exc), error=type(exc).__name__, estimate=exc.estimate,
                )
                assignment, status = None, STATUS_NUMERIC_ERROR
            elapsed = (time.perf_counter() - started) * 1e3 if run.record_runtime else 0.0
            if assignment is not None:
                validate_assignment(evaluator, assignment)
            rows.append(
                _row(scenario, drop_id, seed, algorithm, csi, run.objective, assignment, elapsed, status)
            )

    log.debug("harness.drop_done", drop=drop_id, seed=seed, rows=len(rows))
    return rows


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    validate_config(config)
    run = config.experiment
    drops = range(run.drops)
    log.info(
        "harness.experiment_start", drops=run.drops, algorithms=run.algorithms,
        csi=run.csi_scenarios, objective=run.objective, workers=run.workers,
    )
    if run.workers > 1:
        with ProcessPoolExecutor(max_workers=run.workers) as pool:
            batches = list(pool.map(partial(run_drop, config), drops))
    else:
        batches = [run_drop(config, d) for d in drops]

    rows = sorted((r for batch in batches for r in batch), key=lambda r: r.sort_key)
    log.info(
        "harness.experiment_done", rows=len(rows), feasible=sum(r.feasible for r in rows),
    )
    return rows


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def write_csv(rows: Iterable[ResultRow], path: str | Path) -> Path:
    """UTF-8, LF line endings, header first, floats at 9 significant digits."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format(v) for v in astuple(row)])
    return out


def summarize(
    rows: Sequence[ResultRow],
    group_by: Sequence[str] = ("algorithm", "csi_scenario"),
) -> list[SummaryRow]:
    """Mean and standard error of the utility per group, groups in sorted order.

    Rows whose solver failed numerically carry no utility and are left out
    of every mean; ``numeric_errors`` counts them. A group made only of
    such rows reports NaN means.
    """
    if not rows:
        raise DomainError("cannot summarize an empty result set")
    unknown = [g for g in group_by if g not in CSV_COLUMNS]
    if unknown:
        raise DomainError(f"unknown group_by fields: {unknown}")

    groups: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        groups.setdefault(tuple(getattr(row, g) for g in group_by), []).append(row)

    out = []
    for key in sorted(groups):
        members = [r for r in groups[key] if r.status != STATUS_NUMERIC_ERROR]
        failed = len(groups[key]) - len(members)
        n = len(members)
        if n == 0:
            nan = float("nan")
            out.append(SummaryRow(tuple(zip(group_by, key)), 0, nan, nan, nan, nan, nan, nan, nan, failed))
            continue
        utility = np.array([r.utility for r in members])
        se = float(utility.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        out.append(
            SummaryRow(
                group=tuple(zip(group_by, key)),
                count=n,
                mean_utility=float(utility.mean()),
                se_utility=se,
                mean_active_d2d=float(np.mean([r.n_active_d2d for r in members])),
                mean_d2d_uplink=float(np.mean([r.n_d2d_uplink for r in members])),
                mean_d2d_downlink=float(np.mean([r.n_d2d_downlink for r in members])),
                mean_access_rate=float(np.mean([r.access_rate for r in members])),
                feasible_rate=float(np.mean([r.feasible for r in members])),
                numeric_errors=failed,
            )
        )
    return out


def utility_ratios(
    rows: Sequence[ResultRow], reference: str = "dp",
) -> dict[tuple[str, str], float]:
    """Mean per-drop utility ratio of each algorithm to ``reference``, per CSI setting.

    Only drops where both rows are feasible and the reference utility is
    positive enter a ratio; pairs with no such drop are omitted.
    """
    ref = {
        (r.drop_id, r.csi_scenario): r.utility
        for r in rows
        if r.algorithm == reference and r.feasible and r.utility > 0
    }
    ratios: dict[tuple[str, str], list[float]] = {}
    for r in rows:
        base = ref.get((r.drop_id, r.csi_scenario))
        if r.algorithm == reference or base is None or not r.feasible:
            continue
        ratios.setdefault((r.algorithm, r.csi_scenario), []).append(r.utility / base)
    return {key: float(np.mean(values)) for key, values in sorted(ratios.items())}
