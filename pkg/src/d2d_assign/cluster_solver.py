"""Two-step sub-optimal assignment and the semi-orthogonal baseline.

Step one groups the links into one cluster per channel: cellular links are
placed by a matching, then D2D links join greedily by priority. Step two
scores every (cluster, channel) pair by admitting the cluster's D2D links in
queue order and keeping the best prefix, then matches clusters to channels.
Cluster g is scored on channel g while it is being built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import structlog

from d2d_assign.dp_solver import Assignment
from d2d_assign.errors import InfeasibleError, UnsupportedError
from d2d_assign.matching import FORBIDDEN, WeightMatrix, max_weight_matching
from d2d_assign.model import CsiScenario, LinkKind, Scenario
from d2d_assign.stats import StatsControl
from d2d_assign.utility import ChannelEvaluator, UtilityKind, resolve_evaluator

log = structlog.get_logger(__name__)

NEG_INFINITY = -math.inf


@dataclass(frozen=True, slots=True)
class Clustering:
    """``queues[g]`` lists cluster g's links in insertion order."""

    queues: tuple[tuple[int, ...], ...]

    @property
    def clusters(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(q) for q in self.queues)

    def mask(self, g: int) -> int:
        out = 0
        for j in self.queues[g]:
            out |= 1 << j
        return out

    def with_link(self, g: int, j: int) -> Clustering:
        queues = list(self.queues)
        queues[g] = queues[g] + (j,)
        return Clustering(tuple(queues))


@dataclass(frozen=True, slots=True)
class ChannelWeight:
    weight: float
    members: tuple[int, ...]


def _bit(j: int) -> int:
    return 1 << j


# ---------------------------------------------------------------------------
# Cellular placement
# ---------------------------------------------------------------------------

def _cellular_clustering(evaluator: ChannelEvaluator) -> Clustering:
    sc = evaluator.scenario
    m = sc.n_channels
    cellular = sc.link_ids(LinkKind.UPLINK_CELLULAR, LinkKind.DOWNLINK_CELLULAR)
    queues: list[tuple[int, ...]] = [()] * m
    if not cellular:
        return Clustering(tuple(queues))

    rows = []
    for j in cellular:
        weight = 1.0 if evaluator.kind is UtilityKind.ACCESS_RATE else sc.links[j].weight
        row = []
        for g in range(m):
            if evaluator.feasible(g, _bit(j)):
                row.append(weight * math.log2(1.0 + evaluator.sinr(g, j, _bit(j))))
            else:
                row.append(FORBIDDEN)
        rows.append(row)
    if len(cellular) > m:
        raise InfeasibleError(f"{len(cellular)} cellular links but only {m} channels")
    result = max_weight_matching(WeightMatrix.from_rows(rows), require_all_rows=True)
    if not result.complete:
        raise InfeasibleError("some cellular link cannot meet its QoS on any free channel")
    for row, g in result.pairs:
        queues[g] = (cellular[row],)
    log.debug("cluster.cellular_placed", pairs=result.pairs)
    return Clustering(tuple(queues))


def cluster_cellular(
    scenario: Scenario,
    csi: CsiScenario,
    kind: UtilityKind,
    *,
    ctrl: StatsControl | None = None,
    evaluator: ChannelEvaluator | None = None,
) -> Clustering:
    """One cellular link per cluster, placed by a max-weight matching on log-SNR."""
    return _cellular_clustering(resolve_evaluator(scenario, csi, kind, ctrl, evaluator))


# ---------------------------------------------------------------------------
# Priorities
# ---------------------------------------------------------------------------

def _join(evaluator: ChannelEvaluator, base: int, g: int, j: int) -> tuple[bool, float]:
    grown = base | _bit(j)
    gain = evaluator.utility(g, grown) - evaluator.utility(g, base)
    return evaluator.feasible(g, grown), gain


def _min_ratio(evaluator: ChannelEvaluator, g: int, members: int) -> float:
    sc = evaluator.scenario
    ratio = math.inf
    j, rest = 0, members
    while rest:
        if rest & 1:
            threshold = math.log2(1.0 + sc.links[j].sinr_min)
            ratio = min(ratio, math.log2(1.0 + evaluator.sinr(g, j, members)) / threshold)
        rest >>= 1
        j += 1
    return ratio


def priority_wsr(
    evaluator: ChannelEvaluator,
    g: int,
    j: int,
    clustering: Clustering,
    remaining: Iterable[int],
) -> float:
    """Utility gain of adding D2D link ``j`` to cluster ``g``.

    ``NEG_INFINITY`` when the union breaks QoS while some remaining link
    still fits somewhere.
    """
    feasible, gain = _join(evaluator, clustering.mask(g), g, j)
    if feasible:
        return gain
    m = len(clustering.queues)
    for k in remaining:
        for h in range(m):
            if evaluator.feasible(h, clustering.mask(h) | _bit(k)):
                return NEG_INFINITY
    return gain


def priority_access(evaluator: ChannelEvaluator, g: int, j: int, clustering: Clustering) -> float:
    """Headroom of cluster ``g`` with ``j`` added, discounted by j's alternatives."""
    if not evaluator.csi.is_full:
        raise UnsupportedError("access priority needs full CSI")
    m = len(clustering.queues)
    options = sum(
        1 for h in range(m) if evaluator.feasible(h, clustering.mask(h) | _bit(j))
    )
    return _min_ratio(evaluator, g, clustering.mask(g) | _bit(j)) * 2.0 ** -(options or m)


# ---------------------------------------------------------------------------
# Greedy clustering
# ---------------------------------------------------------------------------

def _greedy(evaluator: ChannelEvaluator) -> Clustering:
    clustering = _cellular_clustering(evaluator)
    sc = evaluator.scenario
    m = sc.n_channels
    access = evaluator.kind is UtilityKind.ACCESS_RATE
    if access and not evaluator.csi.is_full:
        raise UnsupportedError("access priority needs full CSI")
    remaining = list(sc.link_ids(LinkKind.D2D))

    # (g, j) -> (feasible, gain) or (feasible, min ratio) for access
    cache: dict[tuple[int, int], tuple[bool, float]] = {}

    def refresh(g: int) -> None:
        base = clustering.mask(g)
        for j in remaining:
            if access:
                grown = base | _bit(j)
                cache[g, j] = (evaluator.feasible(g, grown), _min_ratio(evaluator, g, grown))
            else:
                cache[g, j] = _join(evaluator, base, g, j)

    for g in range(m):
        refresh(g)

    while remaining:
        fits_somewhere = any(cache[g, j][0] for j in remaining for g in range(m))
        best: tuple[int, int] | None = None
        best_value = NEG_INFINITY
        for j in remaining:
            if access:
                options = sum(1 for g in range(m) if cache[g, j][0])
                discount = 2.0 ** -(options or m)
            for g in range(m):
                feasible, score = cache[g, j]
                if access:
                    value = score * discount
                elif feasible or not fits_somewhere:
                    value = score
                else:
                    value = NEG_INFINITY
                if best is None or value > best_value:
                    best, best_value = (g, j), value
        g_star, j_star = best
        clustering = clustering.with_link(g_star, j_star)
        remaining.remove(j_star)
        for g in range(m):
            cache.pop((g, j_star), None)
        refresh(g_star)
        log.debug("cluster.greedy_step", cluster=g_star, link=j_star, priority=best_value)
    return clustering


def greedy_cluster(
    scenario: Scenario,
    csi: CsiScenario,
    kind: UtilityKind,
    *,
    ctrl: StatsControl | None = None,
    evaluator: ChannelEvaluator | None = None,
) -> Clustering:
    """Every link in exactly one of M clusters, cellular links first in their queues.

    Ties go to the lowest link id, then the lowest cluster id.
    """
    return _greedy(resolve_evaluator(scenario, csi, kind, ctrl, evaluator))


# ---------------------------------------------------------------------------
# Cluster-to-channel assignment
# ---------------------------------------------------------------------------

def cluster_channel_weight(evaluator: ChannelEvaluator, channel: int, queue: Sequence[int]) -> ChannelWeight:
    """Best queue prefix of a cluster on ``channel``.

    The cluster's cellular link is always kept; D2D links are admitted in
    queue order whenever the grown set still meets QoS.
    """
    sc = evaluator.scenario
    seed = 0
    for j in queue:
        if sc.links[j].is_cellular:
            seed |= _bit(j)
    if not evaluator.feasible(channel, seed):
        return ChannelWeight(NEG_INFINITY, ())

    prefixes = [seed]
    current = seed
    for j in queue:
        if sc.links[j].is_cellular:
            continue
        grown = current | _bit(j)
        if evaluator.feasible(channel, grown):
            current = grown
            prefixes.append(current)

    best_mask, best_value = seed, evaluator.utility(channel, seed)
    for mask in prefixes[1:]:
        value = evaluator.utility(channel, mask)
        if value > best_value:
            best_mask, best_value = mask, value
    members = tuple(j for j in queue if best_mask >> j & 1)
    return ChannelWeight(best_value, members)


def solve_cluster(
    scenario: Scenario,
    csi: CsiScenario,
    kind: UtilityKind,
    *,
    ctrl: StatsControl | None = None,
    evaluator: ChannelEvaluator | None = None,
) -> Assignment:
    evaluator = resolve_evaluator(scenario, csi, kind, ctrl, evaluator)
    clustering = _greedy(evaluator)
    m = scenario.n_channels

    table = [
        [cluster_channel_weight(evaluator, i, clustering.queues[g]) for i in range(m)]
        for g in range(m)
    ]
    weights = WeightMatrix.from_rows(
        [[FORBIDDEN if cell.weight == NEG_INFINITY else cell.weight for cell in row] for row in table]
    )
    result = max_weight_matching(weights, require_all_rows=True)
    if not result.complete:
        raise InfeasibleError("clusters cannot be matched to channels within QoS")

    masks = [0] * m
    for g, i in result.pairs:
        for j in table[g][i].members:
            masks[i] |= _bit(j)
    value = sum(evaluator.utility(i, mask) for i, mask in enumerate(masks))
    log.debug("cluster.matched", pairs=result.pairs, value=value)
    return Assignment.from_masks(scenario.n_links, masks, value)


def solve_semi_orthogonal(
    scenario: Scenario,
    csi: CsiScenario,
    kind: UtilityKind,
    *,
    ctrl: StatsControl | None = None,
    evaluator: ChannelEvaluator | None = None,
) -> Assignment:
    """Cellular placement, then at most one D2D link per channel by matching."""
    evaluator = resolve_evaluator(scenario, csi, kind, ctrl, evaluator)
    clustering = _cellular_clustering(evaluator)
    m = scenario.n_channels
    masks = [clustering.mask(g) for g in range(m)]

    d2d = scenario.link_ids(LinkKind.D2D)
    if d2d:
        rows = []
        for j in d2d:
            row = []
            for g in range(m):
                feasible, gain = _join(evaluator, masks[g], g, j)
                row.append(gain if feasible else FORBIDDEN)
            rows.append(row)
        result = max_weight_matching(WeightMatrix.from_rows(rows), require_all_rows=False)
        for row_idx, g in result.pairs:
            masks[g] |= _bit(d2d[row_idx])

    value = sum(evaluator.utility(i, mask) for i, mask in enumerate(masks))
    return Assignment.from_masks(scenario.n_links, masks, value)
