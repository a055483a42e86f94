"""Long-running checks of the trends the solvers should reproduce at desk scale."""

from dataclasses import replace

import pytest
from scipy import stats

from d2d_assign.config import ExperimentConfig, NetworkConfig, RunConfig
from d2d_assign.harness import run_experiment, summarize

pytestmark = pytest.mark.slow


def _network(links: int, channels: int, d2d: int) -> NetworkConfig:
    return NetworkConfig(
        uplink_cellular_links=links, downlink_cellular_links=links, d2d_links=d2d,
        uplink_channels=channels, downlink_channels=channels,
    )


def _by(rows, field: str) -> dict:
    return {dict(s.group)[field]: s for s in summarize(rows, group_by=(field,))}


def test_d2d_prefers_uplink_and_less_so_with_weaker_bs():
    base = replace(
        ExperimentConfig(),
        experiment=RunConfig(drops=100, base_seed=11, algorithms=("cluster",), workers=4),
    )
    (strong,) = summarize(run_experiment(base))
    weak_cfg = replace(base, radio=replace(base.radio, bs_power_dbm=30.0))
    (weak,) = summarize(run_experiment(weak_cfg))

    assert strong.mean_d2d_uplink > strong.mean_d2d_downlink
    assert (weak.mean_d2d_uplink - weak.mean_d2d_downlink) < (strong.mean_d2d_uplink - strong.mean_d2d_downlink)


def test_multi_sharing_gain_grows_with_d2d_count():
    sizes = (2, 4, 6, 8)
    gaps = []
    for n_d2d in sizes:
        cfg = replace(
            ExperimentConfig(),
            network=_network(4, 4, n_d2d),
            experiment=RunConfig(
                drops=100, base_seed=5, algorithms=("cluster", "semi_orthogonal"), workers=4,
            ),
        )
        by_algorithm = _by(run_experiment(cfg), "algorithm")
        gaps.append(by_algorithm["cluster"].mean_utility - by_algorithm["semi_orthogonal"].mean_utility)

    assert all(g > 0 for g in gaps)
    assert stats.spearmanr(sizes, gaps)[0] > 0


def test_csi_ordering():
    cfg = replace(
        ExperimentConfig(),
        network=_network(2, 2, 4),
        experiment=RunConfig(
            drops=200, base_seed=2024, algorithms=("dp",),
            csi_scenarios=("full", "s1", "s2", "s3", "s4"), workers=4,
        ),
    )
    mean = {k: s.mean_utility for k, s in _by(run_experiment(cfg), "csi_scenario").items()}

    assert mean["full"] >= mean["s1"] >= mean["s2"]
    assert mean["full"] >= mean["s3"] >= mean["s4"]
    adjacent = [mean["full"] - mean["s1"], mean["s1"] - mean["s2"], mean["full"] - mean["s3"], mean["s3"] - mean["s4"]]
    assert abs(mean["s1"] - mean["s3"]) <= min(adjacent)

