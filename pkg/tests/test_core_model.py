import pytest
from hypothesis import given, strategies as st

from tollmatch.schemas.matching import Matching, MatchedPair
from tollmatch.schemas.route import RouteSpec
from tollmatch.services.core_model import (
    driver_utility,
    route_cost,
    total_route_cost,
    travel_time,
    welfare,
)
from tests.conftest import make_route

ROUTE = RouteSpec(id="r1", free_flow_time=10.0, threshold_capacity=100.0, slot_capacity=300)


@pytest.mark.parametrize("k_t, expected", [(0, 10.0), (100, 11.5), (200, 34.0)])
def test_travel_time_bpr(k_t, expected):
    assert travel_time(ROUTE, k_t) == pytest.approx(expected)


def test_travel_time_free_flow_is_exact():
    assert travel_time(ROUTE, 0) == ROUTE.free_flow_time


def test_travel_time_rejects_negative_occupancy():
    with pytest.raises(ValueError):
        travel_time(ROUTE, -1)


@given(st.floats(0, 1e4), st.floats(0, 1e4))
def test_travel_time_monotone(a, b):
    lo, hi = sorted((a, b))
    assert travel_time(ROUTE, hi) >= travel_time(ROUTE, lo)
    assert travel_time(ROUTE, lo) >= ROUTE.free_flow_time


@pytest.mark.parametrize(
    "e_t, e_f, c_r, expected",
    [(10.0, 10.0, 5.0, 0.0), (34.0, 10.0, 2.0, 48.0), (34.0, 10.0, 0.0, 0.0)],
)
def test_route_cost(e_t, e_f, c_r, expected):
    assert route_cost(e_t, e_f, c_r) == pytest.approx(expected)


def test_route_cost_rejects_time_below_free_flow():
    with pytest.raises(ValueError):
        route_cost(9.0, 10.0, 1.0)


@pytest.mark.parametrize(
    "e_f, e_t, c_d, expected",
    [(10.0, 10.0, 3.0, 0.0), (10.0, 34.0, 0.5, -12.0), (10.0, 34.0, 0.0, 0.0)],
)
def test_driver_utility(e_f, e_t, c_d, expected):
    assert driver_utility(e_f, e_t, c_d) == pytest.approx(expected)


def test_driver_utility_rejects_negative_charge():
    with pytest.raises(ValueError):
        driver_utility(10.0, 12.0, -1.0)


@given(st.floats(0, 50), st.floats(0, 100))
def test_utility_is_minus_delay_times_charge(delay, charge):
    assert driver_utility(10.0, 10.0 + delay, charge) == pytest.approx(-route_cost(10.0 + delay, 10.0, charge))


def _pair(driver_id, e_t, charge):
    return MatchedPair(driver_id=driver_id, route_id="r1", charge=charge, travel_time=e_t, free_flow_time=10.0)


def test_welfare_sums_utilities():
    assert welfare(Matching()) == 0.0
    assert welfare(Matching(assignments=[_pair("d1", 34.0, 0.5)])) == pytest.approx(-12.0)
    m = Matching(
        assignments=[_pair("d1", 34.0, 0.5), _pair("d2", 10.0, 4.0), _pair("d3", 16.0, 0.5)],
        unmatched=["d4"],
    )
    assert welfare(m) == pytest.approx(-15.0)


def test_welfare_is_additive_over_disjoint_drivers():
    first = Matching(assignments=[_pair("d1", 34.0, 0.5)])
    second = Matching(assignments=[_pair("d2", 16.0, 0.5)])
    both = Matching(assignments=first.assignments + second.assignments)
    assert welfare(both) == pytest.approx(welfare(first) + welfare(second))


def test_total_route_cost_over_live_routes():
    routes = [make_route("r1", occupancy=200, toll=2.0), make_route("r2", occupancy=0, toll=5.0)]
    assert total_route_cost(routes) == pytest.approx(48.0)
