"""Online driver-route assignment.

Utility mode ranks routes by projected utility (best first), cost mode by
projected route cost (cheapest first). Both break ties by the larger residual
capacity k_f - k_t, then by route id. RANKING works on the bipartite
driver/slot graph under a fixed slot permutation.
"""

import functools
import logging
import math
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from tollmatch.schemas.driver import DriverSpec
from tollmatch.schemas.matching import (
    TRANSITIONS,
    Assignment,
    AssignmentStatus,
    BipartiteInstance,
    FrozenInstance,
    Matching,
    MatchedPair,
    MatchingMode,
    SlotVertex,
    pairs_to_matching,
)
from tollmatch.schemas.route import Route, RouteSpec
from tollmatch.schemas.scenario import TollConfig
from tollmatch.services import toll_engine
from tollmatch.services.core_model import (
    TOLERANCE,
    current_charge,
    current_route_cost,
    current_travel_time,
    driver_utility,
    projected_utility,
    route_cost,
)

logger = logging.getLogger(__name__)


class AssignmentStateError(Exception):
    """Raised on a lifecycle move the assignment status does not allow."""


class PermutationError(ValueError):
    """Raised when a slot ordering is not a bijection over the instance's slots."""


def _transition(a: Assignment, status: AssignmentStatus, **updates) -> Assignment:
    if status not in TRANSITIONS[a.status]:
        raise AssignmentStateError(f"Assignment of {a.driver_id} cannot move {a.status.value} -> {status.value}")
    return a.model_copy(update={"status": status, **updates})


def _ordered(items: Sequence, score: Callable, residual: Callable, ident: Callable, descending: bool) -> List:
    """Sort by score (tolerant comparison), then larger residual, then id."""

    def compare(a, b) -> int:
        sa, sb = score(a), score(b)
        if abs(sa - sb) > TOLERANCE:
            better = sa > sb if descending else sa < sb
            return -1 if better else 1
        ra, rb = residual(a), residual(b)
        if abs(ra - rb) > TOLERANCE:
            return -1 if ra > rb else 1
        return (ident(a) > ident(b)) - (ident(a) < ident(b))

    return sorted(items, key=functools.cmp_to_key(compare))


# --- Online, live routes ---------------------------------------------------


def eligible_routes(d: DriverSpec, routes: Sequence[Route]) -> List[Route]:
    """Routes the driver can afford (charge <= reported alpha) with a free slot."""
    return [r for r in routes if current_charge(r) <= d.reported + TOLERANCE and r.has_free_slot()]


def rank_routes_by_utility(d: DriverSpec, candidates: Sequence[Route]) -> List[Route]:
    ranked = _ordered(candidates, projected_utility, Route.residual, lambda r: r.id, descending=True)
    logger.debug(f"{d.id} utility ranking: {[r.id for r in ranked]}")
    return ranked


def rank_routes_by_cost(d: DriverSpec, candidates: Sequence[Route]) -> List[Route]:
    ranked = _ordered(candidates, current_route_cost, Route.residual, lambda r: r.id, descending=False)
    logger.debug(f"{d.id} cost ranking: {[r.id for r in ranked]}")
    return ranked


def rank_routes_by_slot_priority(
    d: DriverSpec, candidates: Sequence[Route], best_free_slot_rank: Mapping[str, int]
) -> List[Route]:
    """RANKING inside the simulator: a route is as good as its best free slot."""
    ranked = sorted(candidates, key=lambda r: (best_free_slot_rank[r.id], r.id))
    logger.debug(f"{d.id} slot ranking: {[r.id for r in ranked]}")
    return ranked


def assign_online(
    d: DriverSpec,
    routes: Sequence[Route],
    mode: MatchingMode = MatchingMode.utility,
    timestep: Optional[int] = None,
    best_free_slot_rank: Optional[Mapping[str, int]] = None,
) -> Optional[Assignment]:
    """Quote the top-ranked eligible route, or None when nothing is eligible."""
    candidates = eligible_routes(d, routes)
    if not candidates:
        logger.debug(f"{d.id} has no eligible route")
        return None
    if mode is MatchingMode.utility:
        ranked = rank_routes_by_utility(d, candidates)
    elif mode is MatchingMode.cost:
        ranked = rank_routes_by_cost(d, candidates)
    else:
        if best_free_slot_rank is None:
            raise ValueError("Ranking mode needs the best free slot rank per route.")
        ranked = rank_routes_by_slot_priority(d, candidates, best_free_slot_rank)
    top = ranked[0]
    issued_at = d.arrival_time if timestep is None else timestep
    return Assignment(
        driver_id=d.id,
        route_id=top.id,
        issued_at=issued_at,
        deadline=issued_at + d.deadline_window,
        charge=current_charge(top),
        travel_time=current_travel_time(top),
        free_flow_time=top.spec.free_flow_time,
    )


def resolve_deadline(a: Assignment, accepted_at: Optional[int]) -> Assignment:
    """Accept when accepted_at falls inside [issued_at, deadline]; expire otherwise."""
    if a.status is not AssignmentStatus.pending:
        raise AssignmentStateError(f"Assignment of {a.driver_id} is already {a.status.value}")
    if accepted_at is not None and a.issued_at <= accepted_at <= a.deadline:
        return _transition(a, AssignmentStatus.accepted, accepted_at=accepted_at)
    return _transition(a, AssignmentStatus.expired)


def realized_utility(a: Assignment) -> float:
    """Utility a driver ends up with; expired offers are worth 0."""
    if a.status in (AssignmentStatus.pending, AssignmentStatus.expired):
        return 0.0
    return driver_utility(a.free_flow_time, a.travel_time, a.charge)


def enforce_penalty(
    a: Assignment, actual_route: str, actual_toll: float, cfg: TollConfig
) -> Tuple[Assignment, float]:
    """Penalise a driver found on a route other than the assigned one."""
    if a.status is not AssignmentStatus.accepted:
        raise AssignmentStateError(f"Assignment of {a.driver_id} is {a.status.value}, not accepted")
    if actual_route == a.route_id:
        return a, 0.0
    charged = toll_engine.penalty(actual_toll, cfg)
    logger.info(f"{a.driver_id} drove {actual_route} instead of {a.route_id}: penalty {charged:.4f}")
    return _transition(a, AssignmentStatus.penalized), charged


def complete_assignment(a: Assignment) -> Assignment:
    return _transition(a, AssignmentStatus.completed)


# --- Bipartite instances -----------------------------------------------------


def expand_slots(routes: Sequence[RouteSpec], costs: Optional[Mapping[str, float]] = None) -> List[SlotVertex]:
    costs = costs or {}
    return [
        SlotVertex(id=slot_id, route_id=r.id, cost=costs.get(r.id, 0.0))
        for r in routes
        for slot_id in r.slot_ids()
    ]


def build_instance(frozen: FrozenInstance) -> BipartiteInstance:
    """Driver/slot graph of a frozen instance; an edge per affordable quote."""
    slots = expand_slots(frozen.routes)
    edges = [
        (d.id, s.id)
        for d in frozen.drivers
        for s in slots
        if frozen_eligible(frozen, d, s.route_id)
    ]
    return BipartiteInstance(drivers=[d.id for d in frozen.drivers], slots=slots, edges=edges)


def _unit_slots(n: int, rng: Optional[np.random.Generator] = None) -> List[SlotVertex]:
    costs = rng.uniform(0.0, 1.0, size=n) if rng is not None else np.zeros(n)
    return [SlotVertex(id=f"s{j:03d}", route_id=f"s{j:03d}", cost=float(costs[j])) for j in range(n)]


def complete_instance(n: int, rng: Optional[np.random.Generator] = None) -> BipartiteInstance:
    slots = _unit_slots(n, rng)
    drivers = [f"d{i:03d}" for i in range(n)]
    return BipartiteInstance(drivers=drivers, slots=slots, edges=[(d, s.id) for d in drivers for s in slots])


def upper_triangular_instance(n: int, rng: Optional[np.random.Generator] = None) -> BipartiteInstance:
    """Driver i (arrival order) sees slots i..n-1: the first arrivals have the most choice."""
    slots = _unit_slots(n, rng)
    drivers = [f"d{i:03d}" for i in range(n)]
    edges = [(drivers[i], slots[j].id) for i in range(n) for j in range(i, n)]
    return BipartiteInstance(drivers=drivers, slots=slots, edges=edges)


def random_instance(
    n_drivers: int, n_slots: int, density: float, rng: np.random.Generator
) -> BipartiteInstance:
    slots = _unit_slots(n_slots, rng)
    drivers = [f"d{i:03d}" for i in range(n_drivers)]
    mask = rng.random((n_drivers, n_slots)) < density
    edges = [(drivers[i], slots[j].id) for i in range(n_drivers) for j in range(n_slots) if mask[i, j]]
    return BipartiteInstance(drivers=drivers, slots=slots, edges=edges)


def adversarial_pair_instance() -> BipartiteInstance:
    """d1 sees both slots, d2 only s1: a bad slot order strands d2."""
    slots = [SlotVertex(id="s1", route_id="s1"), SlotVertex(id="s2", route_id="s2")]
    return BipartiteInstance(drivers=["d1", "d2"], slots=slots, edges=[("d1", "s1"), ("d1", "s2"), ("d2", "s1")])


def _validate_permutation(g: BipartiteInstance, permutation: Sequence[str]) -> Dict[str, int]:
    rank = {s: i for i, s in enumerate(permutation)}
    if len(rank) != len(permutation) or set(rank) != set(g.slot_ids()):
        raise PermutationError("Permutation must list every slot of the instance exactly once.")
    return rank


def ranking_match(g: BipartiteInstance, permutation: Sequence[str]) -> Matching:
    """Each arriving driver takes its highest-ranked free neighbour slot."""
    rank = _validate_permutation(g, permutation)
    taken: Dict[str, str] = {}
    pairs: List[Tuple[str, str]] = []
    for d, neighbours in g.adjacency().items():
        free = [s for s in neighbours if s not in taken]
        if not free:
            continue
        best = min(free, key=rank.__getitem__)
        taken[best] = d
        pairs.append((d, best))
    return pairs_to_matching(g, pairs)


def random_permutation(g: BipartiteInstance, rng: np.random.Generator) -> List[str]:
    slot_ids = g.slot_ids()
    return [slot_ids[i] for i in rng.permutation(len(slot_ids))]


def greedy_cost_match(g: BipartiteInstance) -> Matching:
    """Cost-ranked greedy: cheapest free neighbour slot, ties by slot id."""
    order = [s.id for s in sorted(g.slots, key=lambda s: (s.cost, s.id))]
    return ranking_match(g, order)


# --- Frozen instances --------------------------------------------------------


def frozen_eligible(frozen: FrozenInstance, d: DriverSpec, route_id: str) -> bool:
    quote = frozen.quotes.get(d.id, {}).get(route_id)
    return quote is not None and quote.charge <= d.reported + TOLERANCE


def frozen_utility(frozen: FrozenInstance, driver_id: str, route_id: str) -> float:
    q = frozen.quotes[driver_id][route_id]
    return driver_utility(q.free_flow_time, q.travel_time, q.charge)


def frozen_pair(frozen: FrozenInstance, driver_id: str, route_id: str) -> MatchedPair:
    q = frozen.quotes[driver_id][route_id]
    return MatchedPair(
        driver_id=driver_id,
        route_id=route_id,
        charge=q.charge,
        travel_time=q.travel_time,
        free_flow_time=q.free_flow_time,
    )


def serial_assignment(frozen: FrozenInstance, mode: MatchingMode = MatchingMode.utility) -> Matching:
    """Serial assignment on frozen quotes: drivers in arrival order take their top remaining route."""
    remaining = frozen.capacities()
    threshold = {r.id: r.threshold_capacity for r in frozen.routes}
    used = {r.id: 0 for r in frozen.routes}
    assignments: List[MatchedPair] = []
    unmatched: List[str] = []
    for d in frozen.drivers:
        candidates = [r for r in remaining if remaining[r] > 0 and frozen_eligible(frozen, d, r)]
        if not candidates:
            unmatched.append(d.id)
            continue
        if mode is MatchingMode.cost:
            q = frozen.quotes[d.id]
            ranked = _ordered(
                candidates,
                lambda r: route_cost(q[r].travel_time, q[r].free_flow_time, q[r].toll),
                lambda r: threshold[r] - used[r],
                lambda r: r,
                descending=False,
            )
        else:
            ranked = _ordered(
                candidates,
                lambda r: frozen_utility(frozen, d.id, r),
                lambda r: threshold[r] - used[r],
                lambda r: r,
                descending=True,
            )
        top = ranked[0]
        remaining[top] -= 1
        used[top] += 1
        assignments.append(frozen_pair(frozen, d.id, top))
    return Matching(assignments=assignments, unmatched=unmatched)


def trip_duration(travel_time: float) -> int:
    """Timesteps a trip occupies its route: ceil(E_t), at least one."""
    return max(1, math.ceil(travel_time - TOLERANCE))
