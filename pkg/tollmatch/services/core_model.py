"""Closed-form route and driver quantities.

Travel time follows the BPR volume-delay form, route cost and driver utility
are the delay-weighted toll products, and welfare sums utilities over a
matching. All functions are pure.
"""

from typing import Iterable

from tollmatch.schemas.matching import Matching, MatchedPair
from tollmatch.schemas.route import Route, RouteSpec
from tollmatch.services.toll_engine import per_driver_charge

TOLERANCE = 1e-9


def travel_time(route: RouteSpec, k_t: float) -> float:
    """E_t = E_f * (1 + A * (k_t / k_f) ** B)."""
    if k_t < 0:
        raise ValueError(f"Occupancy must be non-negative, got {k_t}.")
    ratio = k_t / route.threshold_capacity
    return route.free_flow_time * (1.0 + route.congestion_a * ratio**route.congestion_b)


def route_cost(E_t: float, E_f: float, C_r: float) -> float:
    """R(E, C)_r = (E_t - E_f) * C_r."""
    if C_r < 0:
        raise ValueError(f"Route toll must be non-negative, got {C_r}.")
    if E_f < 0 or E_t < E_f - TOLERANCE:
        raise ValueError(f"Travel time {E_t} is below free-flow time {E_f}.")
    return max(E_t - E_f, 0.0) * C_r


def driver_utility(E_f: float, E_t: float, C_d: float) -> float:
    """U(E, C)_d = (E_f - E_t) * C_d, sign kept as written (nonpositive under delay)."""
    if C_d < 0:
        raise ValueError(f"Charge must be non-negative, got {C_d}.")
    return (E_f - E_t) * C_d


def pair_utility(pair: MatchedPair) -> float:
    return driver_utility(pair.free_flow_time, pair.travel_time, pair.charge)


def welfare(m: Matching) -> float:
    """W(mu): sum of utilities; unmatched drivers contribute 0."""
    return sum((pair_utility(a) for a in m.assignments), 0.0)


def current_travel_time(route: Route) -> float:
    return travel_time(route.spec, route.state.occupancy)


def current_charge(route: Route) -> float:
    return per_driver_charge(route.state.current_toll, route.state.occupancy, route.spec.threshold_capacity)


def current_route_cost(route: Route) -> float:
    return route_cost(current_travel_time(route), route.spec.free_flow_time, route.state.current_toll)


def projected_utility(route: Route) -> float:
    """Utility a driver would be quoted on this route right now (current k_t, no look-ahead)."""
    return driver_utility(route.spec.free_flow_time, current_travel_time(route), current_charge(route))


def total_route_cost(routes: Iterable[Route]) -> float:
    return sum((current_route_cost(r) for r in routes), 0.0)
