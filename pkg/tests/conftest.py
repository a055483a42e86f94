"""Small hand-built scenarios shared by the test modules."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from d2d_assign.config import ExperimentConfig, NetworkConfig, RunConfig
from d2d_assign.model import Band, Channel, FadingSpec, Link, LinkKind, Scenario

_KINDS = {"u": LinkKind.UPLINK_CELLULAR, "d": LinkKind.DOWNLINK_CELLULAR, "x": LinkKind.D2D}
_BANDS = {"u": Band.UPLINK, "d": Band.DOWNLINK}


def build_scenario(
    kinds: str,
    bands: str,
    large,
    small=None,
    *,
    noise: float = 1.0,
    sinr_min: float = 1.0,
    succ_prob_min: float = 0.99,
    weights=None,
    interference_m: float = 1.0,
    signal_fading: FadingSpec | None = None,
) -> Scenario:
    """``kinds`` is one letter per link (u, d, x = D2D); ``bands`` one per channel."""
    n, m = len(kinds), len(bands)
    weights = weights or [1.0] * n
    links = tuple(
        Link(
            id=j,
            kind=_KINDS[k],
            tx_position=(0.0, 0.0),
            rx_position=(10.0, 0.0),
            tx_power_dbm=24.0,
            weight=weights[j],
            sinr_min=sinr_min,
            succ_prob_min=succ_prob_min,
        )
        for j, k in enumerate(kinds)
    )
    channels = tuple(Channel(i, _BANDS[b]) for i, b in enumerate(bands))
    large = np.asarray(large, dtype=float).reshape(n, n)
    if small is None:
        small = np.ones((m, n, n))
    small = np.broadcast_to(np.asarray(small, dtype=float), (m, n, n))
    return Scenario(
        links=links,
        channels=channels,
        large_scale=large,
        small_scale=small,
        interference_shape=np.full((n, n), interference_m),
        signal_fading=tuple([signal_fading or FadingSpec.rayleigh()] * n),
        noise_power=noise,
    )


def random_instance(
    rng: np.random.Generator, *, succ_prob_min: float = 0.9, interference_m: float = 1.0,
) -> Scenario:
    """Tiny random instance: 1-2 channels per band, <= 3 cellular and <= 4 D2D links.

    Links come in the order uplink, downlink, D2D, so the last one is always D2D.
    """
    m_up, m_down = rng.integers(1, 3, size=2)
    n_up = int(rng.integers(0, m_up + 1))
    n_down = int(rng.integers(0, min(m_down, 3 - n_up) + 1))
    n_d2d = int(rng.integers(1, 5))
    kinds = "u" * n_up + "d" * n_down + "x" * n_d2d
    n, m = len(kinds), int(m_up + m_down)
    large = rng.uniform(0.05, 3.0, size=(n, n))
    np.fill_diagonal(large, rng.uniform(8.0, 80.0, size=n))
    small = rng.exponential(1.0, size=(m, n, n)) + 1e-3
    return build_scenario(
        kinds, "u" * int(m_up) + "d" * int(m_down), large, small,
        succ_prob_min=succ_prob_min, interference_m=interference_m,
    )


def select_links(scenario: Scenario, order) -> Scenario:
    """Scenario whose link k is link ``order[k]`` of ``scenario``; drops unlisted links."""
    idx = np.asarray(order, dtype=int)
    return replace(
        scenario,
        links=tuple(replace(scenario.links[j], id=k) for k, j in enumerate(idx)),
        large_scale=scenario.large_scale[np.ix_(idx, idx)],
        small_scale=scenario.small_scale[:, idx][:, :, idx],
        interference_shape=scenario.interference_shape[np.ix_(idx, idx)],
        signal_fading=tuple(scenario.signal_fading[j] for j in idx),
    )


def scale_weights(scenario: Scenario, factor: float) -> Scenario:
    return replace(scenario, links=tuple(replace(link, weight=link.weight * factor) for link in scenario.links))


@pytest.fixture
def scenario_factory():
    return build_scenario


@pytest.fixture
def small_config() -> ExperimentConfig:
    """Generated-drop config small enough for the exact solvers."""
    cfg = ExperimentConfig()
    return replace(
        cfg,
        network=NetworkConfig(
            uplink_cellular_links=1,
            downlink_cellular_links=1,
            d2d_links=2,
            uplink_channels=1,
            downlink_channels=1,
        ),
        experiment=RunConfig(drops=2, base_seed=7, algorithms=("dp", "cluster"), csi_scenarios=("full",)),
    )
