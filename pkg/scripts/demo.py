#!/usr/bin/env python3
"""Local demo: generates one drop and compares every solver under every
CSI scenario, printing a small table to the console.

Usage:
    python scripts/demo.py [seed]
"""

from __future__ import annotations

import sys
import time
from dataclasses import replace
from pathlib import Path

# -- path fixup so we can import from src/ without installing ------------
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from d2d_assign.cluster_solver import solve_cluster, solve_semi_orthogonal
from d2d_assign.config import ExperimentConfig, LoggingConfig, NetworkConfig
from d2d_assign.dp_solver import solve_dp, validate_assignment
from d2d_assign.errors import InfeasibleError
from d2d_assign.harness import derive_drop_seed
from d2d_assign.main import _configure_logging
from d2d_assign.model import CsiScenario, generate_scenario
from d2d_assign.stats import StatsControl
from d2d_assign.utility import ChannelEvaluator, UtilityKind

SOLVERS = {
    "dp": solve_dp,
    "cluster": solve_cluster,
    "semi_orth": solve_semi_orthogonal,
}


def main() -> None:
    base_seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
    config = replace(
        ExperimentConfig(),
        network=NetworkConfig(
            uplink_cellular_links=2, downlink_cellular_links=2, d2d_links=5,
            uplink_channels=2, downlink_channels=2,
        ),
        logging=LoggingConfig(level="warning"),
    )
    _configure_logging(config)

    seed = derive_drop_seed(base_seed, 0)
    scenario = generate_scenario(config, seed)
    ctrl = StatsControl.from_config(config.numerics)

    print("=" * 65)
    print("  D2D Channel Assignment: Local Demo")
    print("=" * 65)
    print(f"  [demo] seed={seed}  links={scenario.n_links}  channels={scenario.n_channels}\n")
    print(f"  {'CSI':<6s}  {'Solver':<10s}  {'EWSR':>10s}  {'D2D up':>7s}  {'D2D dn':>7s}  {'ms':>8s}")
    print(f"  {'─'*6}  {'─'*10}  {'─'*10}  {'─'*7}  {'─'*7}  {'─'*8}")

    for csi in CsiScenario:
        evaluator = ChannelEvaluator(scenario, csi, UtilityKind.EXPECTED_WEIGHTED_SUM_RATE, ctrl)
        for name, solver in SOLVERS.items():
            started = time.perf_counter()
            try:
                assignment = solver(scenario, csi, evaluator.kind, evaluator=evaluator)
            except InfeasibleError:
                print(f"  {csi.value:<6s}  {name:<10s}  {'infeasible':>10s}")
                continue
            elapsed = (time.perf_counter() - started) * 1e3
            validate_assignment(evaluator, assignment)
            up, down = assignment.d2d_counts(scenario)
            print(
                f"  {csi.value:<6s}  {name:<10s}  {assignment.value:>10.4f}"
                f"  {up:>7d}  {down:>7d}  {elapsed:>8.1f}"
            )

    evaluator = ChannelEvaluator(scenario, CsiScenario.FULL, UtilityKind.EXPECTED_WEIGHTED_SUM_RATE, ctrl)
    try:
        best = solve_dp(scenario, CsiScenario.FULL, evaluator.kind, evaluator=evaluator)
    except InfeasibleError:
        best = None
    if best is not None:
        print("\n  [demo] DP assignment under full CSI:")
        for channel in scenario.channels:
            members = ", ".join(
                f"{j}:{scenario.links[j].kind.value}" for j in best.members(channel.id)
            )
            print(f"    channel {channel.id} ({channel.band.value:<8s})  {members or '-'}")
    print("\n  [demo] Done.\n")


if __name__ == "__main__":
    main()
