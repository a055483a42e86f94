import numpy as np
import pytest
from conftest import build_scenario, random_instance, select_links

from d2d_assign.dp_solver import (
    INACTIVE,
    Assignment,
    build_dp_table,
    exhaustive_size,
    feasible_link_sets,
    solve_dp,
    solve_exhaustive,
    validate_assignment,
)
from d2d_assign.errors import AssignmentError, CapacityError, InfeasibleError
from d2d_assign.model import CsiScenario
from d2d_assign.utility import ChannelEvaluator, UtilityKind, evaluate_channel

EWSR = UtilityKind.EXPECTED_WEIGHTED_SUM_RATE
WSR = UtilityKind.WEIGHTED_SUM_RATE_FULL_CSI
FULL = CsiScenario.FULL


def weak_cross(n: int, diag, cross: float = 0.05) -> np.ndarray:
    large = np.full((n, n), cross)
    np.fill_diagonal(large, diag)
    return large


class TestFeasibleLinkSets:
    def test_empty_state(self, scenario_factory):
        sc = scenario_factory("ux", "ud", weak_cross(2, 10.0))
        assert list(feasible_link_sets(sc, FULL, 0, 0, EWSR)) == [frozenset()]

    def test_uplink_cellular_never_on_downlink(self, scenario_factory):
        sc = scenario_factory("ux", "ud", weak_cross(2, 10.0))
        assert list(feasible_link_sets(sc, FULL, 1, {0}, EWSR)) == [frozenset()]

    def test_last_uplink_channel_must_take_pending_cellular(self, scenario_factory):
        sc = scenario_factory("ux", "ud", weak_cross(2, 10.0))
        sets = list(feasible_link_sets(sc, FULL, 0, {0, 1}, EWSR))
        assert sets == [frozenset({0}), frozenset({0, 1})]

    def test_optional_when_channels_remain(self, scenario_factory):
        sc = scenario_factory("ux", "uu", weak_cross(2, 10.0))
        sets = list(feasible_link_sets(sc, FULL, 1, {0, 1}, EWSR))
        assert frozenset() in sets and frozenset({1}) in sets

    def test_infeasible_pairs_are_skipped(self, scenario_factory):
        large = np.array([[2.0, 5.0], [5.0, 2.0]])
        sc = scenario_factory("xx", "u", large)
        sets = set(feasible_link_sets(sc, FULL, 0, {0, 1}, EWSR))
        assert sets == {frozenset(), frozenset({0}), frozenset({1})}


class TestSolveDp:
    def test_single_cellular_link(self, scenario_factory):
        sc = scenario_factory("u", "u", [[4.0]])
        result = solve_dp(sc, FULL, WSR)
        assert result.channel_of == (0,)
        assert result.value == pytest.approx(evaluate_channel(sc, FULL, 0, [0], WSR).utility)

    def test_two_d2d_links_share_one_channel(self, scenario_factory):
        sc = scenario_factory("xx", "u", weak_cross(2, 20.0))
        result = solve_dp(sc, FULL, WSR)
        assert result.channel_of == (0, 0)
        assert result.value == pytest.approx(2 * np.log2(1 + 20.0 / 1.05))

    def test_d2d_left_inactive_when_it_breaks_cellular_qos(self, scenario_factory):
        large = np.array([[2.0, 5.0], [5.0, 20.0]])
        sc = scenario_factory("ux", "u", large)
        for solver in (solve_dp, solve_exhaustive):
            result = solver(sc, FULL, EWSR)
            assert result.channel_of == (0, INACTIVE)
            assert result.active_links == (0,)

    def test_infeasible_cellular(self, scenario_factory):
        sc = scenario_factory("u", "u", [[0.5]])
        with pytest.raises(InfeasibleError):
            solve_dp(sc, FULL, EWSR)
        with pytest.raises(InfeasibleError):
            solve_exhaustive(sc, FULL, EWSR)

    def test_too_many_cellular_links(self, scenario_factory):
        sc = scenario_factory("uu", "ud", weak_cross(2, 10.0))
        with pytest.raises(InfeasibleError):
            solve_dp(sc, FULL, EWSR)

    def test_capacity_guard(self, scenario_factory):
        sc = scenario_factory("uxx", "u", weak_cross(3, 10.0))
        with pytest.raises(CapacityError):
            solve_dp(sc, FULL, EWSR, max_links=2)
        with pytest.raises(CapacityError):
            solve_exhaustive(sc, FULL, EWSR, limit=1)

    def test_table_reconstruction_matches_value(self, scenario_factory):
        sc = scenario_factory("udxx", "ud", weak_cross(4, [10.0, 12.0, 30.0, 25.0]))
        ev = ChannelEvaluator(sc, CsiScenario.S1, EWSR)
        table = build_dp_table(ev)
        masks = table.reconstruct(sc.n_links)
        assert sum(ev.utility(c, mask) for c, mask in enumerate(masks)) == pytest.approx(table.optimum)

    def test_d2d_counts(self, scenario_factory):
        sc = scenario_factory("udxx", "ud", weak_cross(4, 10.0))
        assignment = Assignment((0, 1, 1, INACTIVE), 0.0)
        assert assignment.d2d_counts(sc) == (0, 1)
        assert assignment.mask(1) == 0b0110


@pytest.mark.parametrize(
    ("csi", "kind"),
    [(FULL, EWSR), (FULL, WSR), (CsiScenario.S2, EWSR), (CsiScenario.S4, EWSR)],
)
def test_dp_matches_exhaustive(csi, kind):
    rng = np.random.default_rng(31)
    solved = 0
    for _ in range(50):
        sc = random_instance(rng)
        ev = ChannelEvaluator(sc, csi, kind)
        try:
            expected = solve_exhaustive(sc, csi, kind, evaluator=ev)
        except InfeasibleError:
            with pytest.raises(InfeasibleError):
                solve_dp(sc, csi, kind, evaluator=ev)
            continue
        result = solve_dp(sc, csi, kind, evaluator=ev)
        assert result.value == pytest.approx(expected.value, rel=1e-9, abs=1e-12)
        validate_assignment(ev, result)
        solved += 1
    assert solved > 0


@pytest.mark.parametrize("csi", [FULL, CsiScenario.S1, CsiScenario.S4], ids=lambda c: c.value)
def test_dp_matches_exhaustive_under_nakagami_interference(csi):
    rng = np.random.default_rng(32)
    solved = 0
    for _ in range(25):
        sc = random_instance(rng, interference_m=2.0)
        ev = ChannelEvaluator(sc, csi, EWSR)
        try:
            expected = solve_exhaustive(sc, csi, EWSR, evaluator=ev)
        except InfeasibleError:
            continue
        result = solve_dp(sc, csi, EWSR, evaluator=ev)
        assert result.value == pytest.approx(expected.value, rel=1e-9, abs=1e-12)
        solved += 1
    assert solved > 0


@pytest.mark.parametrize("csi", [FULL, CsiScenario.S1, CsiScenario.S4], ids=lambda c: c.value)
def test_removing_d2d_link_never_raises_optimum(csi):
    rng = np.random.default_rng(33)
    compared = 0
    for _ in range(30):
        sc = random_instance(rng)
        if sc.n_links < 2:
            continue
        try:
            full = solve_dp(sc, csi, EWSR)
        except InfeasibleError:
            continue
        # the last link is always D2D
        reduced = solve_dp(select_links(sc, range(sc.n_links - 1)), csi, EWSR)
        assert reduced.value <= full.value + 1e-9
        compared += 1
    assert compared > 0


def test_dp_is_deterministic():
    rng = np.random.default_rng(34)
    for _ in range(10):
        sc = random_instance(rng)
        for csi in (FULL, CsiScenario.S4):
            try:
                first = solve_dp(sc, csi, EWSR)
            except InfeasibleError:
                continue
            second = solve_dp(sc, csi, EWSR, evaluator=ChannelEvaluator(sc, csi, EWSR))
            assert second.channel_of == first.channel_of
            assert second.value == first.value


class TestValidateAssignment:
    @pytest.fixture
    def evaluator(self, scenario_factory):
        sc = scenario_factory("ux", "ud", weak_cross(2, 10.0))
        return ChannelEvaluator(sc, FULL, EWSR)

    def test_accepts_solver_output(self, evaluator):
        validate_assignment(evaluator, solve_dp(evaluator.scenario, FULL, EWSR, evaluator=evaluator))

    def test_cellular_must_be_active(self, evaluator):
        with pytest.raises(AssignmentError) as info:
            validate_assignment(evaluator, Assignment((INACTIVE, 0), 0.0))
        assert any("cellular link 0" in v for v in info.value.violations)

    def test_band_rule(self, evaluator):
        with pytest.raises(AssignmentError):
            validate_assignment(evaluator, Assignment((1, INACTIVE), 0.0))

    def test_value_must_match(self, evaluator):
        good = solve_dp(evaluator.scenario, FULL, EWSR, evaluator=evaluator)
        with pytest.raises(AssignmentError):
            validate_assignment(evaluator, Assignment(good.channel_of, good.value + 1.0))


def test_exhaustive_size():
    sc = build_scenario("uxx", "ud", weak_cross(3, 10.0))
    assert exhaustive_size(sc) == 1 * 1 * 3**2
