"""Configuration loading and validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from d2d_assign.errors import ConfigurationError

ALGORITHMS = ("dp", "cluster", "exhaustive", "semi_orthogonal")
CSI_SCENARIOS = ("full", "s1", "s2", "s3", "s4")
OBJECTIVES = ("ewsr", "wsr", "access")
FADING_FAMILIES = ("nakagami", "ricean")


@dataclass(frozen=True, slots=True)
class NetworkConfig:
    cell_radius_m: float = 500.0
    group_radius_m: float = 60.0
    uplink_cellular_links: int = 4
    downlink_cellular_links: int = 4
    d2d_links: int = 8
    uplink_channels: int = 4
    downlink_channels: int = 4
    min_distance_m: float = 1.0


@dataclass(frozen=True, slots=True)
class PathlossConfig:
    constant_db: float = 128.1
    exponent_db: float = 37.6


@dataclass(frozen=True, slots=True)
class RadioConfig:
    ue_power_dbm: float = 24.0
    d2d_power_dbm: float = 24.0
    bs_power_dbm: float = 46.0
    noise_dbm: float = -114.0
    shadowing_std_db: float = 8.0
    cellular_pathloss: PathlossConfig = field(default_factory=PathlossConfig)
    d2d_pathloss: PathlossConfig = field(
        default_factory=lambda: PathlossConfig(constant_db=148.0, exponent_db=40.0),
    )


@dataclass(frozen=True, slots=True)
class QosConfig:
    sinr_min_db: float = 0.0
    succ_prob_min: float = 0.99


@dataclass(frozen=True, slots=True)
class SignalFadingConfig:
    family: str = "nakagami"  # "nakagami" | "ricean"
    m: float = 1.0
    k_factor_db: float = 3.0


@dataclass(frozen=True, slots=True)
class FadingConfig:
    cellular: SignalFadingConfig = field(default_factory=SignalFadingConfig)
    d2d: SignalFadingConfig = field(default_factory=SignalFadingConfig)
    interference_m: float = 1.0


@dataclass(frozen=True, slots=True)
class WeightsConfig:
    cellular: float = 1.0
    d2d: float = 1.0


@dataclass(frozen=True, slots=True)
class RunConfig:
    drops: int = 100
    base_seed: int = 1
    algorithms: tuple[str, ...] = ("dp", "cluster")
    csi_scenarios: tuple[str, ...] = ("full",)
    objective: str = "ewsr"  # "ewsr" | "wsr" | "access"
    workers: int = 1
    max_dp_links: int = 20
    record_runtime: bool = False
    output: str = "results.csv"


@dataclass(frozen=True, slots=True)
class NumericsConfig:
    series_rel_tolerance: float = 1e-12
    series_max_terms: int = 2000
    quad_abs_tolerance: float = 0.0
    quad_rel_tolerance: float = 1e-10
    quad_max_subdivisions: int = 200


@dataclass(frozen=True, slots=True)
class LoggingConfig:
    level: str = "info"
    format: str = "console"  # "console" | "json"


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    qos: QosConfig = field(default_factory=QosConfig)
    fading: FadingConfig = field(default_factory=FadingConfig)
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    experiment: RunConfig = field(default_factory=RunConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)


def _build_dataclass(cls: type, raw: dict[str, Any] | None, **nested: type):
    """Construct a dataclass from a dict, ignoring unknown keys.

    ``nested`` maps field names to the dataclass their sub-mapping builds.
    """
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigurationError(f"section for {cls.__name__} must be a mapping")
    valid = {f.name for f in cls.__dataclass_fields__.values()}
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in valid:
            continue
        if key in nested:
            value = _build_dataclass(nested[key], value)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def load_config(path: str | None = None) -> ExperimentConfig:
    """Load config from YAML file.  Falls back to defaults."""
    if path is None:
        path = str(Path(__file__).resolve().parents[2] / "config" / "config.yaml")

    cfg_path = Path(path)
    if not cfg_path.exists():
        return ExperimentConfig()

    try:
        with open(cfg_path) as fh:
            raw: dict[str, Any] = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {cfg_path}: {exc}") from exc

    try:
        return ExperimentConfig(
            network=_build_dataclass(NetworkConfig, raw.get("network")),
            radio=_build_dataclass(
                RadioConfig, raw.get("radio"),
                cellular_pathloss=PathlossConfig, d2d_pathloss=PathlossConfig,
            ),
            qos=_build_dataclass(QosConfig, raw.get("qos")),
            fading=_build_dataclass(
                FadingConfig, raw.get("fading"),
                cellular=SignalFadingConfig, d2d=SignalFadingConfig,
            ),
            weights=_build_dataclass(WeightsConfig, raw.get("weights")),
            experiment=_build_dataclass(RunConfig, raw.get("experiment")),
            numerics=_build_dataclass(NumericsConfig, raw.get("numerics")),
            logging=_build_dataclass(LoggingConfig, raw.get("logging")),
        )
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Raise ``ConfigurationError`` listing every problem found in ``cfg``."""
    problems: list[str] = []
    net, run = cfg.network, cfg.experiment

    counts = {
        "uplink_cellular_links": net.uplink_cellular_links,
        "downlink_cellular_links": net.downlink_cellular_links,
        "d2d_links": net.d2d_links,
        "uplink_channels": net.uplink_channels,
        "downlink_channels": net.downlink_channels,
    }
    for name, value in counts.items():
        if not isinstance(value, int) or value < 0:
            problems.append(f"network.{name} must be a non-negative integer")
    if not problems:
        if net.uplink_channels + net.downlink_channels < 1:
            problems.append("at least one channel is required")
        if net.uplink_cellular_links > net.uplink_channels:
            problems.append("uplink_cellular_links exceeds uplink_channels")
        if net.downlink_cellular_links > net.downlink_channels:
            problems.append("downlink_cellular_links exceeds downlink_channels")
    if net.cell_radius_m <= 0 or net.group_radius_m <= 0:
        problems.append("cell and group radii must be positive")
    if net.min_distance_m <= 0:
        problems.append("network.min_distance_m must be positive")

    if cfg.radio.shadowing_std_db < 0:
        problems.append("radio.shadowing_std_db must be non-negative")
    for pl_name in ("cellular_pathloss", "d2d_pathloss"):
        if getattr(cfg.radio, pl_name).exponent_db <= 0:
            problems.append(f"radio.{pl_name}.exponent_db must be positive")

    if not 0.0 < cfg.qos.succ_prob_min <= 1.0:
        problems.append("qos.succ_prob_min must lie in (0, 1]")

    for name in ("cellular", "d2d"):
        spec: SignalFadingConfig = getattr(cfg.fading, name)
        if spec.family not in FADING_FAMILIES:
            problems.append(f"fading.{name}.family must be one of {FADING_FAMILIES}")
        elif spec.family == "nakagami" and spec.m < 0.5:
            problems.append(f"fading.{name}.m must be >= 0.5")
    if cfg.fading.interference_m < 0.5:
        problems.append("fading.interference_m must be >= 0.5")

    if cfg.weights.cellular < 0 or cfg.weights.d2d < 0:
        problems.append("weights must be non-negative")

    if run.drops < 1:
        problems.append("experiment.drops must be >= 1")
    if run.workers < 1:
        problems.append("experiment.workers must be >= 1")
    if not 0 <= run.base_seed < 2**64:
        problems.append("experiment.base_seed must be an unsigned 64-bit integer")
    if not run.algorithms:
        problems.append("experiment.algorithms is empty")
    for algorithm in run.algorithms:
        if algorithm not in ALGORITHMS:
            problems.append(f"unknown algorithm {algorithm!r}")
    if not run.csi_scenarios:
        problems.append("experiment.csi_scenarios is empty")
    for csi in run.csi_scenarios:
        if csi not in CSI_SCENARIOS:
            problems.append(f"unknown CSI scenario {csi!r}")
    if run.objective not in OBJECTIVES:
        problems.append(f"experiment.objective must be one of {OBJECTIVES}")
    elif run.objective == "access" and any(c != "full" for c in run.csi_scenarios):
        problems.append("the access objective is defined under full CSI only")

    if cfg.numerics.series_max_terms < 1 or cfg.numerics.series_rel_tolerance <= 0:
        problems.append("numerics series controls must be positive")
    if cfg.numerics.quad_abs_tolerance <= 0 and cfg.numerics.quad_rel_tolerance <= 0:
        problems.append("at least one quadrature tolerance must be positive")

    if problems:
        raise ConfigurationError("; ".join(problems))
    return cfg
