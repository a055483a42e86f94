"""Optimal channel assignment by dynamic programming over link subsets.

Stage k covers channels 0..k-1; a state is the bitmask J of links still to be
placed on those channels. OPT[k][J] = max over admissible L ⊆ J on channel
k-1 of U(L) + OPT[k-1][J \\ L], evaluated for every J at once with numpy.
Links left in the state at stage 0 are inactive D2D links.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
import structlog
from numpy.typing import NDArray

from d2d_assign.errors import AssignmentError, CapacityError, DomainError, InfeasibleError
from d2d_assign.model import Band, CsiScenario, LinkKind, Scenario
from d2d_assign.stats import StatsControl
from d2d_assign.utility import ChannelEvaluator, UtilityKind, resolve_evaluator

log = structlog.get_logger(__name__)

INACTIVE = None

DEFAULT_MAX_DP_LINKS = 20
EXHAUSTIVE_LIMIT = 10_000_000


# ---------------------------------------------------------------------------
# Assignment
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Assignment:
    """``channel_of[j]`` is link j's channel or ``INACTIVE``."""

    channel_of: tuple[int | None, ...]
    value: float

    @classmethod
    def from_masks(cls, n_links: int, masks: Sequence[int], value: float) -> Assignment:
        channel_of: list[int | None] = [INACTIVE] * n_links
        for channel, mask in enumerate(masks):
            for j in _bits(mask):
                channel_of[j] = channel
        return cls(tuple(channel_of), float(value))

    def members(self, channel: int) -> tuple[int, ...]:
        return tuple(j for j, c in enumerate(self.channel_of) if c == channel)

    def mask(self, channel: int) -> int:
        out = 0
        for j in self.members(channel):
            out |= 1 << j
        return out

    @property
    def active_links(self) -> tuple[int, ...]:
        return tuple(j for j, c in enumerate(self.channel_of) if c is not INACTIVE)

    def d2d_counts(self, scenario: Scenario) -> tuple[int, int]:
        """Active D2D links on (uplink, downlink) channels."""
        up = down = 0
        for j in scenario.link_ids(LinkKind.D2D):
            c = self.channel_of[j]
            if c is INACTIVE:
                continue
            if scenario.channels[c].band is Band.UPLINK:
                up += 1
            else:
                down += 1
        return up, down


def _bits(mask: int) -> Iterator[int]:
    j = 0
    while mask:
        if mask & 1:
            yield j
        mask >>= 1
        j += 1


def _popcount(values: NDArray[np.int64], mask: int) -> NDArray[np.int64]:
    out = np.zeros_like(values)
    for j in _bits(mask):
        out += (values >> j) & 1
    return out


def _check_cellular_fits(scenario: Scenario) -> None:
    for kind, band in ((LinkKind.UPLINK_CELLULAR, Band.UPLINK), (LinkKind.DOWNLINK_CELLULAR, Band.DOWNLINK)):
        if len(scenario.link_ids(kind)) > len(scenario.channel_ids(band)):
            raise InfeasibleError(f"more {kind.value} links than {band.value} channels")


def validate_assignment(
    evaluator: ChannelEvaluator,
    assignment: Assignment,
    rel_tolerance: float = 1e-9,
) -> None:
    """Raise ``AssignmentError`` listing every violated sharing or QoS rule."""
    sc = evaluator.scenario
    problems: list[str] = []
    if len(assignment.channel_of) != sc.n_links:
        raise AssignmentError([f"expected {sc.n_links} entries, got {len(assignment.channel_of)}"])

    for j, c in enumerate(assignment.channel_of):
        link = sc.links[j]
        if c is INACTIVE:
            if link.is_cellular:
                problems.append(f"cellular link {j} has no channel")
            continue
        if not 0 <= c < sc.n_channels:
            problems.append(f"link {j} on unknown channel {c}")
        elif not sc.band_allows(c, j):
            problems.append(f"link {j} ({link.kind.value}) on {sc.channels[c].band.value} channel {c}")

    total = 0.0
    for c in range(sc.n_channels):
        members = assignment.members(c)
        cellular = [j for j in members if sc.links[j].is_cellular]
        if len(cellular) > 1:
            problems.append(f"channel {c} carries cellular links {cellular}")
        if any(not sc.band_allows(c, j) for j in members):
            continue
        ev = evaluator.evaluate(c, assignment.mask(c))
        if not ev.feasible:
            problems.append(f"QoS violated on channel {c} for links {list(members)}")
        total += ev.utility

    if not problems and not math.isclose(total, assignment.value, rel_tol=rel_tolerance, abs_tol=1e-12):
        problems.append(f"value {assignment.value!r} differs from channel utilities {total!r}")
    if problems:
        raise AssignmentError(problems)


# ---------------------------------------------------------------------------
# Admissible link sets
# ---------------------------------------------------------------------------

def _feasible_family(evaluator: ChannelEvaluator, channel: int, within: int | None = None) -> list[int]:
    """Masks of QoS-feasible link sets on ``channel``, ascending.

    Depth-first in increasing link order; a set that fails QoS is never
    extended since adding links only adds interference.
    """
    sc = evaluator.scenario
    pool = [
        j for j in range(sc.n_links)
        if (within is None or within >> j & 1) and sc.band_allows(channel, j)
    ]
    found = [0]

    def extend(mask: int, start: int, has_cellular: bool) -> None:
        for idx in range(start, len(pool)):
            j = pool[idx]
            cellular = sc.links[j].is_cellular
            if cellular and has_cellular:
                continue
            grown = mask | 1 << j
            if evaluator.feasible(channel, grown):
                found.append(grown)
                extend(grown, idx + 1, has_cellular or cellular)

    extend(0, 0, False)
    return sorted(found)


def _cellular_required(scenario: Scenario, channel: int, state: int) -> bool:
    """True when the state's same-band cellular links need this channel."""
    band = scenario.channels[channel].band
    kind = LinkKind.UPLINK_CELLULAR if band is Band.UPLINK else LinkKind.DOWNLINK_CELLULAR
    seen = sum(1 for c in scenario.channels[: channel + 1] if c.band is band)
    pending = sum(1 for j in scenario.link_ids(kind) if state >> j & 1)
    return seen <= pending


def feasible_link_sets(
    scenario: Scenario,
    csi: CsiScenario,
    channel: int,
    state: int | Sequence[int],
    kind: UtilityKind,
    *,
    ctrl: StatsControl | None = None,
    evaluator: ChannelEvaluator | None = None,
) -> Iterator[frozenset[int]]:
    """Every admissible L ⊆ ``state`` for ``channel``, smallest mask first."""
    if not 0 <= channel < scenario.n_channels:
        raise DomainError(f"channel {channel} out of range")
    if not isinstance(state, int):
        state = sum(1 << j for j in set(state))
    evaluator = resolve_evaluator(scenario, csi, kind, ctrl, evaluator)
    cellular = scenario.link_mask(LinkKind.UPLINK_CELLULAR, LinkKind.DOWNLINK_CELLULAR)
    required = _cellular_required(scenario, channel, state)
    for mask in _feasible_family(evaluator, channel, within=state):
        if required and not mask & cellular:
            continue
        yield frozenset(_bits(mask))


# ---------------------------------------------------------------------------
# Dynamic program
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True, eq=False)
class DpTable:
    """Chosen link set per stage and state; the last stage holds state S only.

    Values are not kept: stage k only needs stage k-1's values.
    """

    choices: tuple[NDArray[np.int64], ...]
    optimum: float
    reachable: bool

    def reconstruct(self, n_links: int) -> list[int]:
        """Link mask per channel, following the stored choices from state S."""
        masks = [0] * len(self.choices)
        state = (1 << n_links) - 1
        for channel in reversed(range(len(self.choices))):
            row = 0 if channel == len(self.choices) - 1 else state
            chosen = int(self.choices[channel][row])
            masks[channel] = chosen
            state ^= chosen
        return masks


def build_dp_table(evaluator: ChannelEvaluator, max_links: int = DEFAULT_MAX_DP_LINKS) -> DpTable:
    sc = evaluator.scenario
    n, m = sc.n_links, sc.n_channels
    if n > max_links:
        raise CapacityError(f"{n} links exceed the DP limit of {max_links}")
    _check_cellular_fits(sc)

    full = (1 << n) - 1
    states = np.arange(full + 1, dtype=np.int64)
    band_cellular = {
        Band.UPLINK: sc.link_mask(LinkKind.UPLINK_CELLULAR),
        Band.DOWNLINK: sc.link_mask(LinkKind.DOWNLINK_CELLULAR),
    }
    all_cellular = band_cellular[Band.UPLINK] | band_cellular[Band.DOWNLINK]
    pending = {band: _popcount(states, mask) for band, mask in band_cellular.items()}
    seen = {Band.UPLINK: 0, Band.DOWNLINK: 0}

    value = np.zeros(full + 1)
    reach = (states & all_cellular) == 0
    choices: list[NDArray[np.int64]] = []

    for channel in range(m):
        band = sc.channels[channel].band
        seen[band] += 1
        targets = states if channel < m - 1 else np.array([full], dtype=np.int64)
        required = pending[band][targets] >= seen[band]

        best = np.zeros(targets.size)
        best_reach = np.zeros(targets.size, dtype=bool)
        choice = np.zeros(targets.size, dtype=np.int64)
        family = _feasible_family(evaluator, channel)
        for mask in family:
            gain = evaluator.utility(channel, mask)
            rest = targets ^ mask
            ok = ((targets & mask) == mask) & reach[rest]
            if not mask & all_cellular:
                ok &= ~required
            candidate = value[rest] + gain
            better = ok & (~best_reach | (candidate > best))
            best = np.where(better, candidate, best)
            choice = np.where(better, mask, choice)
            best_reach |= better
        value, reach = best, best_reach
        choices.append(choice)
        log.debug(
            "dp.stage_done", channel=channel, family=len(family), reachable=int(reach.sum()),
        )

    if m == 0:
        return DpTable((), 0.0, bool(reach[full]))
    return DpTable(tuple(choices), float(value[0]), bool(reach[0]))


def solve_dp(
    scenario: Scenario,
    csi: CsiScenario,
    kind: UtilityKind,
    *,
    ctrl: StatsControl | None = None,
    max_links: int = DEFAULT_MAX_DP_LINKS,
    evaluator: ChannelEvaluator | None = None,
) -> Assignment:
    evaluator = resolve_evaluator(scenario, csi, kind, ctrl, evaluator)
    table = build_dp_table(evaluator, max_links)
    if not table.reachable:
        raise InfeasibleError("no channel assignment serves every cellular link with its QoS")
    assignment = Assignment.from_masks(scenario.n_links, table.reconstruct(scenario.n_links), table.optimum)
    log.debug(
        "dp.solved", value=assignment.value, active=len(assignment.active_links),
        evaluations=evaluator.evaluations,
    )
    return assignment


# ---------------------------------------------------------------------------
# Exhaustive search
# ---------------------------------------------------------------------------

def exhaustive_size(scenario: Scenario) -> int:
    n_up = len(scenario.link_ids(LinkKind.UPLINK_CELLULAR))
    n_down = len(scenario.link_ids(LinkKind.DOWNLINK_CELLULAR))
    m_up = len(scenario.channel_ids(Band.UPLINK))
    m_down = len(scenario.channel_ids(Band.DOWNLINK))
    n_d2d = len(scenario.link_ids(LinkKind.D2D))
    if n_up > m_up or n_down > m_down:
        return 0
    return math.perm(m_up, n_up) * math.perm(m_down, n_down) * (scenario.n_channels + 1) ** n_d2d


def solve_exhaustive(
    scenario: Scenario,
    csi: CsiScenario,
    kind: UtilityKind,
    *,
    ctrl: StatsControl | None = None,
    limit: int = EXHAUSTIVE_LIMIT,
    evaluator: ChannelEvaluator | None = None,
) -> Assignment:
    """Best assignment by enumerating every placement that respects the sharing rules."""
    evaluator = resolve_evaluator(scenario, csi, kind, ctrl, evaluator)
    _check_cellular_fits(scenario)
    size = exhaustive_size(scenario)
    if size > limit:
        raise CapacityError(f"{size} candidate assignments exceed the limit of {limit}")

    m = scenario.n_channels
    up_links = scenario.link_ids(LinkKind.UPLINK_CELLULAR)
    down_links = scenario.link_ids(LinkKind.DOWNLINK_CELLULAR)
    d2d_links = scenario.link_ids(LinkKind.D2D)
    best_masks: list[int] | None = None
    best_value = -math.inf

    for up in itertools.permutations(scenario.channel_ids(Band.UPLINK), len(up_links)):
        for down in itertools.permutations(scenario.channel_ids(Band.DOWNLINK), len(down_links)):
            base = [0] * m
            for j, c in zip(up_links + down_links, up + down):
                base[c] |= 1 << j
            for placement in itertools.product(range(m + 1), repeat=len(d2d_links)):
                masks = list(base)
                for j, c in zip(d2d_links, placement):
                    if c < m:
                        masks[c] |= 1 << j
                total = 0.0
                for c, mask in enumerate(masks):
                    ev = evaluator.evaluate(c, mask)
                    if not ev.feasible:
                        break
                    total += ev.utility
                else:
                    if total > best_value:
                        best_value, best_masks = total, masks

    if best_masks is None:
        raise InfeasibleError("no channel assignment serves every cellular link with its QoS")
    return Assignment.from_masks(scenario.n_links, best_masks, best_value)
