import itertools

import numpy as np
import pytest

from tollmatch.schemas.driver import DriverSpec
from tollmatch.schemas.matching import (
    Assignment,
    AssignmentStatus,
    FrozenInstance,
    FrozenQuote,
    Matching,
    MatchedPair,
    MatchingMode,
)
from tollmatch.schemas.route import RouteSpec
from tollmatch.schemas.scenario import TollConfig
from tollmatch.services.matching_service import (
    AssignmentStateError,
    PermutationError,
    adversarial_pair_instance,
    assign_online,
    build_instance,
    complete_assignment,
    complete_instance,
    eligible_routes,
    enforce_penalty,
    greedy_cost_match,
    rank_routes_by_cost,
    rank_routes_by_utility,
    ranking_match,
    realized_utility,
    resolve_deadline,
    serial_assignment,
    trip_duration,
    upper_triangular_instance,
)
from tests.conftest import make_route

DRIVER = DriverSpec(id="d1", arrival_time=0, willingness_to_pay=5.0)


def _ids(routes):
    return [r.id for r in routes]


def _charged(route_id, charge):
    # k_f = 1 and two travellers: each pays toll / 2
    return make_route(route_id, threshold_capacity=1.0, slot_capacity=5, occupancy=2, toll=2 * charge)


class TestEligibility:
    def test_all_affordable(self):
        routes = [make_route("r1"), _charged("r2", 3.0)]
        assert _ids(eligible_routes(DRIVER, routes)) == ["r1", "r2"]

    def test_filters_by_willingness(self):
        d = DRIVER.model_copy(update={"willingness_to_pay": 1.0})
        assert _ids(eligible_routes(d, [make_route("r1"), _charged("r2", 3.0)])) == ["r1"]

    def test_nothing_affordable(self):
        d = DRIVER.model_copy(update={"willingness_to_pay": 0.0})
        assert eligible_routes(d, [_charged("r1", 0.5), _charged("r2", 3.0)]) == []

    def test_full_route_is_not_eligible(self):
        full = make_route("r1", slot_capacity=2, occupancy=1)
        full.state.pending = 1
        assert eligible_routes(DRIVER, [full]) == []


class TestRanking:
    def test_descending_utility(self):
        congested = make_route("r2", occupancy=200, toll=100.0)  # charge 0.5, E_t 34 -> U = -12
        assert _ids(rank_routes_by_utility(DRIVER, [congested, make_route("r1")])) == ["r1", "r2"]

    def test_ties_go_to_larger_residual(self):
        r1 = make_route("r1", occupancy=80)
        r2 = make_route("r2", occupancy=20)
        assert _ids(rank_routes_by_utility(DRIVER, [r1, r2])) == ["r2", "r1"]

    def test_full_tie_falls_back_to_id(self):
        assert _ids(rank_routes_by_utility(DRIVER, [make_route("rb"), make_route("ra")])) == ["ra", "rb"]

    def test_singleton(self):
        assert _ids(rank_routes_by_utility(DRIVER, [make_route("r1")])) == ["r1"]

    def test_cost_ranking_ascending(self):
        costly = make_route("r1", occupancy=200, toll=2.0)  # R = 48
        assert _ids(rank_routes_by_cost(DRIVER, [costly, make_route("r2")])) == ["r2", "r1"]


class TestAssignOnline:
    def test_utility_mode_takes_top_route(self):
        congested = make_route("r2", occupancy=200, toll=100.0)
        a = assign_online(DRIVER, [make_route("r1"), congested], MatchingMode.utility)
        assert a.route_id == "r1"
        assert a.status is AssignmentStatus.pending

    def test_cost_mode_takes_cheapest_route(self):
        costly = make_route("r1", occupancy=200, toll=2.0)
        a = assign_online(DRIVER, [costly, make_route("r2")], MatchingMode.cost)
        assert a.route_id == "r2"

    def test_no_eligible_route_leaves_driver_unmatched(self):
        d = DRIVER.model_copy(update={"willingness_to_pay": 0.0})
        assert assign_online(d, [_charged("r1", 1.0)]) is None

    def test_quote_frozen_at_issue(self):
        route = _charged("r1", 3.0)
        d = DriverSpec(id="d9", arrival_time=4, willingness_to_pay=5.0, deadline_window=2)
        a = assign_online(d, [route])
        route.state.current_toll = 100.0
        assert a.charge == pytest.approx(3.0)
        assert (a.issued_at, a.deadline) == (4, 6)

    def test_ranking_mode_needs_slot_ranks(self):
        with pytest.raises(ValueError):
            assign_online(DRIVER, [make_route("r1")], MatchingMode.ranking)

    def test_ranking_mode_follows_best_free_slot(self):
        a = assign_online(
            DRIVER, [make_route("r1"), make_route("r2")], MatchingMode.ranking, best_free_slot_rank={"r1": 3, "r2": 0}
        )
        assert a.route_id == "r2"


def _pending(issued_at=3, window=2):
    return Assignment(
        driver_id="d1",
        route_id="r1",
        issued_at=issued_at,
        deadline=issued_at + window,
        charge=0.5,
        travel_time=34.0,
        free_flow_time=10.0,
    )


class TestLifecycle:
    def test_accept_at_deadline(self):
        a = resolve_deadline(_pending(), 5)
        assert a.status is AssignmentStatus.accepted
        assert a.accepted_at == 5

    def test_late_acceptance_expires(self):
        a = resolve_deadline(_pending(), 6)
        assert a.status is AssignmentStatus.expired
        assert realized_utility(a) == 0.0

    def test_never_accepting_expires(self):
        assert resolve_deadline(_pending(), None).status is AssignmentStatus.expired

    def test_accepting_twice_rejected(self):
        a = resolve_deadline(_pending(), 4)
        with pytest.raises(AssignmentStateError):
            resolve_deadline(a, 4)

    def test_compliant_driver_pays_nothing(self):
        a = resolve_deadline(_pending(), 4)
        same, charged = enforce_penalty(a, "r1", 3.0, TollConfig(fixed_penalty=5.0))
        assert charged == 0.0
        assert same.status is AssignmentStatus.accepted
        assert complete_assignment(same).status is AssignmentStatus.completed

    @pytest.mark.parametrize("toll, fixed, expected", [(3.0, 5.0, 8.0), (0.0, 0.0, 0.0)])
    def test_deviating_driver_is_penalised(self, toll, fixed, expected):
        a = resolve_deadline(_pending(), 4)
        penalised, charged = enforce_penalty(a, "r2", toll, TollConfig(fixed_penalty=fixed))
        assert charged == expected
        assert penalised.status is AssignmentStatus.penalized
        assert realized_utility(penalised) == pytest.approx(-12.0)

    def test_penalty_needs_accepted_assignment(self):
        with pytest.raises(AssignmentStateError):
            enforce_penalty(_pending(), "r2", 1.0, TollConfig())

    def test_completion_needs_accepted_assignment(self):
        with pytest.raises(AssignmentStateError):
            complete_assignment(_pending())


class TestRankingMatch:
    def test_complete_instance_always_perfect(self):
        g = complete_instance(3)
        for perm in itertools.permutations(g.slot_ids()):
            assert ranking_match(g, perm).cardinality == 3

    def test_adversarial_pair_bad_order(self):
        m = ranking_match(adversarial_pair_instance(), ["s1", "s2"])
        assert m.cardinality == 1
        assert m.route_of("d1") == "s1"
        assert m.unmatched == ["d2"]

    def test_adversarial_pair_good_order(self):
        m = ranking_match(adversarial_pair_instance(), ["s2", "s1"])
        assert m.cardinality == 2
        assert (m.route_of("d1"), m.route_of("d2")) == ("s2", "s1")

    @pytest.mark.parametrize("perm", [["s1"], ["s1", "s1"], ["s1", "s3"], ["s1", "s2", "s3"]])
    def test_invalid_permutation_rejected(self, perm):
        with pytest.raises(PermutationError):
            ranking_match(adversarial_pair_instance(), perm)

    def test_deterministic_given_permutation(self):
        g = upper_triangular_instance(8, np.random.default_rng(3))
        perm = list(reversed(g.slot_ids()))
        assert ranking_match(g, perm) == ranking_match(g, perm)

    def test_greedy_by_cost_takes_cheapest_slot(self):
        g = upper_triangular_instance(4, np.random.default_rng(0))
        cheapest = min(g.slots, key=lambda s: (s.cost, s.id)).id
        assert greedy_cost_match(g).assignments[0].slot_id == cheapest


def _frozen():
    routes = [
        RouteSpec(id="r1", free_flow_time=10.0, threshold_capacity=1.0, slot_capacity=1),
        RouteSpec(id="r2", free_flow_time=12.0, threshold_capacity=1.0, slot_capacity=2),
    ]
    drivers = [
        DriverSpec(id="d1", arrival_time=0, willingness_to_pay=5.0),
        DriverSpec(id="d2", arrival_time=1, willingness_to_pay=5.0),
        DriverSpec(id="d3", arrival_time=2, willingness_to_pay=0.5),
    ]
    quotes = {
        d.id: {
            "r1": FrozenQuote(free_flow_time=10.0, travel_time=11.0, charge=1.0, toll=2.0),  # U = -1
            "r2": FrozenQuote(free_flow_time=12.0, travel_time=15.0, charge=2.0, toll=4.0),  # U = -6
        }
        for d in drivers
    }
    return FrozenInstance(drivers=drivers, routes=routes, quotes=quotes)


class TestSerialAssignment:
    def test_drivers_take_best_remaining_route(self):
        m = serial_assignment(_frozen())
        assert m.route_of("d1") == "r1"
        assert m.route_of("d2") == "r2"
        assert m.unmatched == ["d3"]

    def test_respects_capacity(self):
        frozen = _frozen()
        assert serial_assignment(frozen).check_capacity(frozen.capacities())

    def test_cost_mode(self):
        # route cost (E_t - E_f) * C_r: r1 -> 2, r2 -> 12
        assert serial_assignment(_frozen(), MatchingMode.cost).route_of("d1") == "r1"

    def test_cost_mode_prices_the_route_toll(self):
        routes = [
            RouteSpec(id="a", free_flow_time=10.0, threshold_capacity=1.0, slot_capacity=1),
            RouteSpec(id="b", free_flow_time=10.0, threshold_capacity=1.0, slot_capacity=1),
        ]
        # shares favour a (2 * 0.5 < 1 * 2); route costs favour b (2 * 4 > 1 * 2)
        quotes = {
            "d1": {
                "a": FrozenQuote(free_flow_time=10.0, travel_time=12.0, charge=0.5, toll=4.0),
                "b": FrozenQuote(free_flow_time=10.0, travel_time=11.0, charge=2.0, toll=2.0),
            }
        }
        frozen = FrozenInstance(
            drivers=[DriverSpec(id="d1", arrival_time=0, willingness_to_pay=5.0)], routes=routes, quotes=quotes
        )
        assert serial_assignment(frozen, MatchingMode.cost).route_of("d1") == "b"

    def test_instance_edges_follow_affordability(self):
        g = build_instance(_frozen())
        assert len(g.slots) == 3
        assert not [s for d, s in g.edges if d == "d3"]
        assert len(g.edges) == 6


def test_matching_lists_each_driver_once():
    pair = MatchedPair(driver_id="d1", route_id="r1")
    with pytest.raises(ValueError):
        Matching(assignments=[pair], unmatched=["d1"])


@pytest.mark.parametrize("e_t, expected", [(10.0, 10), (11.5, 12), (0.3, 1), (34.000000000001, 34)])
def test_trip_duration(e_t, expected):
    assert trip_duration(e_t) == expected
