"""Per-channel utility and QoS feasibility of a set of co-channel links."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from d2d_assign.errors import DomainError, UnsupportedError
from d2d_assign.model import CsiScenario, Scenario, unknown_interferers
from d2d_assign.stats import InterferenceContext, Interferer, StatsControl, link_stats


class UtilityKind(Enum):
    EXPECTED_WEIGHTED_SUM_RATE = "ewsr"
    WEIGHTED_SUM_RATE_FULL_CSI = "wsr"
    ACCESS_RATE = "access"

    @classmethod
    def from_name(cls, name: str) -> UtilityKind:
        return cls(name.lower())


@dataclass(frozen=True, slots=True)
class LinkEvaluation:
    link: int
    success_prob: float
    expected_rate: float


@dataclass(frozen=True, slots=True)
class ChannelEvaluation:
    utility: float
    per_link: tuple[LinkEvaluation, ...]
    feasible: bool


EMPTY_EVALUATION = ChannelEvaluation(0.0, (), True)


def check_kind(csi: CsiScenario, kind: UtilityKind) -> None:
    if kind is UtilityKind.ACCESS_RATE and not csi.is_full:
        raise UnsupportedError(f"access rate is defined under full CSI only, got {csi.value}")


def _members_tuple(members: Iterable[int] | int) -> tuple[int, ...]:
    if isinstance(members, int):
        return tuple(j for j in range(members.bit_length()) if members >> j & 1)
    return tuple(sorted(set(members)))


def realized_sinr(scenario: Scenario, channel: int, link: int, members: Iterable[int]) -> float:
    """SINR of ``link`` on ``channel`` with every gain known."""
    lam = scenario.large_scale
    beta = scenario.small_scale[channel]
    interference = sum(lam[z, link] * beta[z, link] for z in members if z != link)
    return float(lam[link, link] * beta[link, link] / (scenario.noise_power + interference))


def link_context(
    scenario: Scenario,
    csi: CsiScenario,
    channel: int,
    link: int,
    members: Iterable[int],
) -> InterferenceContext:
    """Split co-channel interference into the known part (ν) and unknown interferers."""
    members = tuple(members)
    lam = scenario.large_scale
    beta = scenario.small_scale[channel]
    hidden = unknown_interferers(scenario, csi, channel, link, members)
    nu = scenario.noise_power + sum(
        lam[z, link] * beta[z, link] for z in members if z != link and z not in hidden
    )
    target = scenario.links[link]
    known = csi.visibility.knows_signal(target.kind)
    return InterferenceContext(
        nu=float(nu),
        signal_scale=float(lam[link, link]),
        signal_beta=float(beta[link, link]) if known else None,
        signal_fading=scenario.signal_fading[link],
        unknown_interferers=tuple(
            Interferer(float(lam[z, link]), float(scenario.interference_shape[z, link]))
            for z in sorted(hidden)
        ),
        sinr_min=target.sinr_min,
    )


def evaluate_channel(
    scenario: Scenario,
    csi: CsiScenario,
    channel: int,
    members: Iterable[int] | int,
    kind: UtilityKind,
    ctrl: StatsControl | None = None,
) -> ChannelEvaluation:
    """Utility of ``members`` sharing ``channel`` plus their QoS verdict.

    ``members`` may be an iterable of link ids or a bitmask over link ids.
    """
    check_kind(csi, kind)
    ids = _members_tuple(members)
    if not ids:
        return EMPTY_EVALUATION
    for j in ids:
        if not 0 <= j < scenario.n_links:
            raise DomainError(f"link {j} out of range")
        if not scenario.band_allows(channel, j):
            raise DomainError(f"link {j} may not use channel {channel}")

    per_link: list[LinkEvaluation] = []
    utility = 0.0
    admitted = 0
    for j in ids:
        target = scenario.links[j]
        stats = link_stats(link_context(scenario, csi, channel, j, ids), ctrl)
        per_link.append(LinkEvaluation(j, stats.success_prob, stats.expected_rate))
        if kind is UtilityKind.EXPECTED_WEIGHTED_SUM_RATE or not csi.is_full:
            utility += target.weight * stats.expected_rate
            continue
        sinr = realized_sinr(scenario, channel, j, ids)
        if kind is UtilityKind.ACCESS_RATE:
            admitted += sinr >= target.sinr_min
        else:
            utility += target.weight * math.log2(1.0 + sinr)
    if kind is UtilityKind.ACCESS_RATE:
        utility = admitted / scenario.n_links

    feasible = all(
        e.success_prob >= scenario.links[e.link].succ_prob_min for e in per_link
    )
    return ChannelEvaluation(utility, tuple(per_link), feasible)


def qos_feasible(
    scenario: Scenario,
    csi: CsiScenario,
    channel: int,
    members: Iterable[int] | int,
    ctrl: StatsControl | None = None,
) -> bool:
    return evaluate_channel(
        scenario, csi, channel, members, UtilityKind.EXPECTED_WEIGHTED_SUM_RATE, ctrl,
    ).feasible


class ChannelEvaluator:
    """Memoized ``evaluate_channel`` for one (scenario, CSI, utility) triple.

    Results are keyed by ``(channel, member bitmask)``; the solvers revisit
    the same subsets many times.
    """

    def __init__(
        self,
        scenario: Scenario,
        csi: CsiScenario,
        kind: UtilityKind,
        ctrl: StatsControl | None = None,
    ) -> None:
        check_kind(csi, kind)
        self.scenario = scenario
        self.csi = csi
        self.kind = kind
        self.ctrl = ctrl or StatsControl()
        self._cache: dict[tuple[int, int], ChannelEvaluation] = {}

    @property
    def evaluations(self) -> int:
        return len(self._cache)

    def evaluate(self, channel: int, mask: int) -> ChannelEvaluation:
        key = (channel, mask)
        hit = self._cache.get(key)
        if hit is None:
            hit = evaluate_channel(self.scenario, self.csi, channel, mask, self.kind, self.ctrl)
            self._cache[key] = hit
        return hit

    def utility(self, channel: int, mask: int) -> float:
        return self.evaluate(channel, mask).utility

    def feasible(self, channel: int, mask: int) -> bool:
        """QoS verdict; band violations count as infeasible."""
        for j in _members_tuple(mask):
            if not self.scenario.band_allows(channel, j):
                return False
        return self.evaluate(channel, mask).feasible

    def sinr(self, channel: int, link: int, mask: int) -> float:
        return realized_sinr(self.scenario, channel, link, _members_tuple(mask))


def resolve_evaluator(
    scenario: Scenario,
    csi: CsiScenario,
    kind: UtilityKind,
    ctrl: StatsControl | None = None,
    evaluator: ChannelEvaluator | None = None,
) -> ChannelEvaluator:
    """Reuse ``evaluator`` when it was built for this problem, else build one."""
    if evaluator is None:
        return ChannelEvaluator(scenario, csi, kind, ctrl)
    if evaluator.scenario is not scenario or evaluator.csi is not csi or evaluator.kind is not kind:
        raise DomainError("evaluator was built for a different problem")
    return evaluator
