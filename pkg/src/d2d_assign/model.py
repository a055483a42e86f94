"""Network scenarios: links, channels, gains and CSI visibility."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Literal

import numpy as np
import structlog
from numpy.random import Generator
from numpy.typing import NDArray
from scipy import stats as sps

from d2d_assign.config import ExperimentConfig, SignalFadingConfig, validate_config
from d2d_assign.errors import ConfigurationError, DomainError

log = structlog.get_logger(__name__)

Position = tuple[float, float]


# ---------------------------------------------------------------------------
# Links and channels
# ---------------------------------------------------------------------------

class LinkKind(Enum):
    UPLINK_CELLULAR = "uplink_cellular"
    DOWNLINK_CELLULAR = "downlink_cellular"
    D2D = "d2d"

    @property
    def is_cellular(self) -> bool:
        return self is not LinkKind.D2D


class Band(Enum):
    UPLINK = "uplink"
    DOWNLINK = "downlink"


@dataclass(frozen=True, slots=True)
class Link:
    id: int
    kind: LinkKind
    tx_position: Position
    rx_position: Position
    tx_power_dbm: float
    weight: float = 1.0
    sinr_min: float = 1.0  # linear
    succ_prob_min: float = 0.99

    def __post_init__(self) -> None:
        if not math.isfinite(self.tx_power_dbm):
            raise DomainError(f"link {self.id}: transmit power must be finite")
        if self.weight < 0:
            raise DomainError(f"link {self.id}: weight must be >= 0")
        if self.sinr_min <= 0:
            raise DomainError(f"link {self.id}: sinr_min must be > 0")
        if not 0.0 < self.succ_prob_min <= 1.0:
            raise DomainError(f"link {self.id}: succ_prob_min must lie in (0, 1]")

    @property
    def is_cellular(self) -> bool:
        return self.kind.is_cellular

    @property
    def band(self) -> Band | None:
        """Band a cellular link is confined to; ``None`` for D2D links."""
        if self.kind is LinkKind.UPLINK_CELLULAR:
            return Band.UPLINK
        if self.kind is LinkKind.DOWNLINK_CELLULAR:
            return Band.DOWNLINK
        return None


@dataclass(frozen=True, slots=True)
class Channel:
    id: int
    band: Band


@dataclass(frozen=True, slots=True)
class PathlossModel:
    constant: float
    exponent_coeff: float


CELLULAR_PATHLOSS = PathlossModel(constant=128.1, exponent_coeff=37.6)
D2D_PATHLOSS = PathlossModel(constant=148.0, exponent_coeff=40.0)


def pathloss_db(model: PathlossModel, distance: float) -> float:
    """Path loss in dB at ``distance`` kilometres."""
    if distance <= 0:
        raise DomainError("distance must be positive")
    return model.constant + model.exponent_coeff * math.log10(distance)


# ---------------------------------------------------------------------------
# Fading
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class FadingSpec:
    """Unit-mean small-scale power fading.

    ``shape`` is the Nakagami m for ``family="nakagami"`` and the linear
    K-factor for ``family="ricean"``.
    """

    family: Literal["nakagami", "ricean"] = "nakagami"
    shape: float = 1.0

    def __post_init__(self) -> None:
        if self.family == "nakagami" and self.shape < 0.5:
            raise DomainError("Nakagami shape must be >= 0.5")
        if self.family == "ricean" and self.shape < 0:
            raise DomainError("Ricean K-factor must be >= 0")
        if self.family not in ("nakagami", "ricean"):
            raise DomainError(f"unknown fading family {self.family!r}")

    @classmethod
    def rayleigh(cls) -> FadingSpec:
        return cls("nakagami", 1.0)

    @classmethod
    def nakagami(cls, m: float) -> FadingSpec:
        return cls("nakagami", m)

    @classmethod
    def ricean(cls, k_factor: float) -> FadingSpec:
        return cls("ricean", k_factor)

    @classmethod
    def from_config(cls, cfg: SignalFadingConfig) -> FadingSpec:
        if cfg.family == "ricean":
            return cls.ricean(10.0 ** (cfg.k_factor_db / 10.0))
        return cls.nakagami(cfg.m)

    @property
    def is_rayleigh(self) -> bool:
        return self.shape == (1.0 if self.family == "nakagami" else 0.0)

    def distribution(self):
        """Frozen ``scipy.stats`` law of the power gain."""
        if self.family == "nakagami" or self.shape == 0:
            m = self.shape if self.family == "nakagami" else 1.0
            return sps.gamma(a=m, scale=1.0 / m)
        k = self.shape
        return sps.ncx2(df=2, nc=2.0 * k, scale=1.0 / (2.0 * (k + 1.0)))

    def sample(self, rng: Generator, size: int | tuple[int, ...]) -> NDArray[np.float64]:
        if self.family == "nakagami":
            return rng.gamma(self.shape, 1.0 / self.shape, size=size)
        k = self.shape
        sigma = 1.0 / math.sqrt(2.0 * (k + 1.0))
        los = math.sqrt(k / (k + 1.0))
        re = los + sigma * rng.standard_normal(size=size)
        im = sigma * rng.standard_normal(size=size)
        return re * re + im * im


# ---------------------------------------------------------------------------
# CSI visibility
# ---------------------------------------------------------------------------

class InterferenceClass(Enum):
    DEVICE_TO_DEVICE = "device_to_device"
    BS_TO_D2D_RX = "bs_to_d2d_rx"
    D2D_TX_TO_BS = "d2d_tx_to_bs"
    CELLULAR_TO_CELLULAR = "cellular_to_cellular"


@dataclass(frozen=True, slots=True)
class CsiVisibility:
    knows_cellular_links: bool
    knows_d2d_links: bool
    knows_device_to_device_interference: bool
    knows_bs_to_d2drx_interference: bool
    knows_d2dtx_to_bs_interference: bool

    @property
    def is_full(self) -> bool:
        return all(getattr(self, f) for f in self.__dataclass_fields__)

    def knows_signal(self, kind: LinkKind) -> bool:
        return self.knows_cellular_links if kind.is_cellular else self.knows_d2d_links

    def knows_interference(self, cls: InterferenceClass) -> bool:
        if cls is InterferenceClass.DEVICE_TO_DEVICE:
            return self.knows_device_to_device_interference
        if cls is InterferenceClass.BS_TO_D2D_RX:
            return self.knows_bs_to_d2drx_interference
        if cls is InterferenceClass.D2D_TX_TO_BS:
            return self.knows_d2dtx_to_bs_interference
        return True  # never co-channel


class CsiScenario(Enum):
    FULL = "full"
    S1 = "s1"
    S2 = "s2"
    S3 = "s3"
    S4 = "s4"

    @classmethod
    def from_name(cls, name: str) -> CsiScenario:
        return cls(name.lower())

    @property
    def visibility(self) -> CsiVisibility:
        return _VISIBILITY[self]

    @property
    def is_full(self) -> bool:
        return self is CsiScenario.FULL


_VISIBILITY: dict[CsiScenario, CsiVisibility] = {
    CsiScenario.FULL: CsiVisibility(True, True, True, True, True),
    CsiScenario.S1: CsiVisibility(True, True, False, True, True),
    CsiScenario.S2: CsiVisibility(True, False, False, True, True),
    CsiScenario.S3: CsiVisibility(True, True, False, False, True),
    CsiScenario.S4: CsiVisibility(True, True, False, False, False),
}


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

def _frozen_array(values, ndim: int, name: str) -> NDArray[np.float64]:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise DomainError(f"{name} must have {ndim} dimensions, got {arr.ndim}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, slots=True, eq=False)
class Scenario:
    """One cell drop.

    ``large_scale[z, j]`` is λ_{z,j}: transmit power of link z times the path
    gain (path loss and shadowing) from z's transmitter to j's receiver, in
    mW. ``small_scale[i, z, j]`` is β_{i,z,j} on channel i.
    """

    links: tuple[Link, ...]
    channels: tuple[Channel, ...]
    large_scale: NDArray[np.float64]
    small_scale: NDArray[np.float64]
    interference_shape: NDArray[np.float64]
    signal_fading: tuple[FadingSpec, ...]
    noise_power: float
    bs_position: Position = (0.0, 0.0)
    rng_seed: int = 0

    def __post_init__(self) -> None:
        n, m = len(self.links), len(self.channels)
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "signal_fading", tuple(self.signal_fading))
        large = _frozen_array(self.large_scale, 2, "large_scale")
        small = _frozen_array(self.small_scale, 3, "small_scale")
        shape = _frozen_array(self.interference_shape, 2, "interference_shape")
        if large.shape != (n, n) or shape.shape != (n, n):
            raise DomainError("large_scale and interference_shape must be N x N")
        if small.shape != (m, n, n):
            raise DomainError("small_scale must be M x N x N")
        if len(self.signal_fading) != n:
            raise DomainError("one signal FadingSpec per link is required")
        if np.any(large <= 0) or np.any(small <= 0):
            raise DomainError("all gains must be positive")
        if np.any(shape < 0.5):
            raise DomainError("interference shapes must be >= 0.5")
        if self.noise_power <= 0:
            raise DomainError("noise power must be positive")
        for idx, link in enumerate(self.links):
            if link.id != idx:
                raise DomainError("link ids must equal their position")
        for idx, channel in enumerate(self.channels):
            if channel.id != idx:
                raise DomainError("channel ids must equal their position")
        bands = [c.band for c in self.channels]
        n_up = bands.count(Band.UPLINK)
        if any(b is not Band.UPLINK for b in bands[:n_up]):
            raise DomainError("uplink channels must precede downlink channels")
        object.__setattr__(self, "large_scale", large)
        object.__setattr__(self, "small_scale", small)
        object.__setattr__(self, "interference_shape", shape)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def link_ids(self, *kinds: LinkKind) -> tuple[int, ...]:
        return tuple(link.id for link in self.links if link.kind in kinds)

    def channel_ids(self, band: Band) -> tuple[int, ...]:
        return tuple(c.id for c in self.channels if c.band is band)

    def link_mask(self, *kinds: LinkKind) -> int:
        mask = 0
        for j in self.link_ids(*kinds):
            mask |= 1 << j
        return mask

    def band_allows(self, channel: int, link: int) -> bool:
        """True when ``link`` may use ``channel`` (D2D links may use any)."""
        band = self.links[link].band
        return band is None or band is self.channels[channel].band


# ---------------------------------------------------------------------------
# Interference visibility
# ---------------------------------------------------------------------------

def interference_class(scenario: Scenario, interferer: int, receiver: int) -> InterferenceClass:
    kz = scenario.links[interferer].kind
    kj = scenario.links[receiver].kind
    if kz.is_cellular and kj.is_cellular:
        return InterferenceClass.CELLULAR_TO_CELLULAR
    if kj is LinkKind.UPLINK_CELLULAR:
        return InterferenceClass.D2D_TX_TO_BS
    if kz is LinkKind.DOWNLINK_CELLULAR:
        return InterferenceClass.BS_TO_D2D_RX
    # D2D -> D2D, D2D -> downlink UE, and uplink UE -> D2D receiver
    return InterferenceClass.DEVICE_TO_DEVICE


def unknown_interferers(
    scenario: Scenario,
    csi: CsiScenario,
    channel: int,
    link: int,
    coexisting: Iterable[int],
) -> frozenset[int]:
    """Co-channel links whose small-scale gain into ``link`` is unknown."""
    if not 0 <= channel < scenario.n_channels:
        raise DomainError(f"channel {channel} out of range")
    vis = csi.visibility
    return frozenset(
        z for z in coexisting
        if z != link and not vis.knows_interference(interference_class(scenario, z, link))
    )


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _uniform_disc(rng: Generator, radius: float, size: int) -> NDArray[np.float64]:
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, size))
    phi = rng.uniform(0.0, 2.0 * np.pi, size)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def generate_scenario(config: ExperimentConfig, seed: int) -> Scenario:
    """Draw one drop; a pure function of ``(config, seed)``."""
    validate_config(config)
    net, radio, fading = config.network, config.radio, config.fading
    n_uc, n_dc, n_d = net.uplink_cellular_links, net.downlink_cellular_links, net.d2d_links
    m_u, m_d = net.uplink_channels, net.downlink_channels
    if n_uc > m_u or n_dc > m_d:
        raise ConfigurationError("cellular link counts exceed channel counts")

    rng = np.random.default_rng(seed)
    bs = np.zeros(2)
    ul_ue = _uniform_disc(rng, net.cell_radius_m, n_uc)
    dl_ue = _uniform_disc(rng, net.cell_radius_m, n_dc)
    centers = _uniform_disc(rng, net.cell_radius_m, n_d)
    d2d_tx = centers + _uniform_disc(rng, net.group_radius_m, n_d)
    d2d_rx = centers + _uniform_disc(rng, net.group_radius_m, n_d)

    sinr_min = 10.0 ** (config.qos.sinr_min_db / 10.0)
    psi = config.qos.succ_prob_min
    bs_channel_power = radio.bs_power_dbm - (10.0 * math.log10(m_d) if m_d > 0 else 0.0)

    specs: list[tuple[LinkKind, NDArray, NDArray, float, float]] = []
    specs += [(LinkKind.UPLINK_CELLULAR, p, bs, radio.ue_power_dbm, config.weights.cellular) for p in ul_ue]
    specs += [(LinkKind.DOWNLINK_CELLULAR, bs, p, bs_channel_power, config.weights.cellular) for p in dl_ue]
    specs += [(LinkKind.D2D, t, r, radio.d2d_power_dbm, config.weights.d2d) for t, r in zip(d2d_tx, d2d_rx)]

    links = tuple(
        Link(
            id=idx,
            kind=kind,
            tx_position=(float(tx[0]), float(tx[1])),
            rx_position=(float(rx[0]), float(rx[1])),
            tx_power_dbm=float(power),
            weight=float(weight),
            sinr_min=sinr_min,
            succ_prob_min=psi,
        )
        for idx, (kind, tx, rx, power, weight) in enumerate(specs)
    )
    channels = tuple(
        Channel(i, Band.UPLINK if i < m_u else Band.DOWNLINK) for i in range(m_u + m_d)
    )
    n, m = len(links), len(channels)

    tx = np.array([l.tx_position for l in links]).reshape(n, 2)
    rx = np.array([l.rx_position for l in links]).reshape(n, 2)
    dist_km = np.maximum(
        np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=-1), net.min_distance_m,
    ) / 1000.0
    tx_is_bs = np.array([l.kind is LinkKind.DOWNLINK_CELLULAR for l in links])
    rx_is_bs = np.array([l.kind is LinkKind.UPLINK_CELLULAR for l in links])
    via_bs = tx_is_bs[:, None] | rx_is_bs[None, :]
    cell, d2d = radio.cellular_pathloss, radio.d2d_pathloss
    loss_db = np.where(
        via_bs,
        cell.constant_db + cell.exponent_db * np.log10(dist_km),
        d2d.constant_db + d2d.exponent_db * np.log10(dist_km),
    )
    shadow_db = rng.normal(0.0, radio.shadowing_std_db, size=(n, n))
    power_dbm = np.array([l.tx_power_dbm for l in links])
    large = 10.0 ** ((power_dbm[:, None] - loss_db + shadow_db) / 10.0)

    m_int = fading.interference_m
    small = rng.gamma(m_int, 1.0 / m_int, size=(m, n, n))
    signal = tuple(
        FadingSpec.from_config(fading.cellular if l.is_cellular else fading.d2d) for l in links
    )
    for j, spec in enumerate(signal):
        small[:, j, j] = spec.sample(rng, m)
    # a zero draw has probability zero but would break the positivity contract
    small = np.maximum(small, np.finfo(float).tiny)

    scenario = Scenario(
        links=links,
        channels=channels,
        large_scale=large,
        small_scale=small,
        interference_shape=np.full((n, n), m_int),
        signal_fading=signal,
        noise_power=10.0 ** (radio.noise_dbm / 10.0),
        bs_position=(0.0, 0.0),
        rng_seed=int(seed),
    )
    log.debug("model.scenario_generated", seed=int(seed), links=n, channels=m)
    return scenario
