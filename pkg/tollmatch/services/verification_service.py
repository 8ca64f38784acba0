"""Checks for the mechanism's claimed properties.

Offline oracles (maximum cardinality and maximum welfare), the exhaustive
Pareto-dominance checker, competitive-ratio measurement for RANKING and the
two strategy-proofness deviation probes.
"""

import collections
import itertools
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from tollmatch.config.settings import settings
from tollmatch.schemas.driver import DriverSpec, ScriptedDriver
from tollmatch.schemas.matching import BipartiteInstance, FrozenInstance, FrozenQuote, Matching, pairs_to_matching
from tollmatch.schemas.report import DeviationKind, DeviationOutcome, ParetoVerdict, RatioReport
from tollmatch.schemas.route import RouteSpec
from tollmatch.schemas.scenario import ScenarioConfig, TollConfig
from tollmatch.services import matching_service
from tollmatch.services.core_model import TOLERANCE, travel_time
from tollmatch.services.simulator import materialize_drivers, run
from tollmatch.services.toll_engine import per_driver_charge
from tollmatch.workers.pool import run_indexed

logger = logging.getLogger(__name__)

INFINITY = float("inf")


class InstanceTooLargeError(Exception):
    """Raised when an exhaustive check is asked to enumerate too much."""


def _guard(n_drivers: int, n_slots: int, limit: Optional[int]) -> None:
    limit = settings.pareto_limit if limit is None else limit
    if n_drivers > limit or n_slots > limit:
        raise InstanceTooLargeError(
            f"Exhaustive search is limited to {limit} drivers and {limit} slots, got {n_drivers}x{n_slots}."
        )


# --- Offline oracles ----------------------------------------------------------


def offline_max_matching(g: BipartiteInstance) -> Matching:
    """Maximum-cardinality matching by Hopcroft-Karp augmenting paths."""
    adj = g.adjacency()
    driver_match: Dict[str, Optional[str]] = {d: None for d in g.drivers}
    slot_match: Dict[str, Optional[str]] = {s: None for s in g.slot_ids()}
    distances: Dict[Optional[str], float] = {}

    def breadth_first_search() -> bool:
        queue = collections.deque()
        for d in g.drivers:
            if driver_match[d] is None:
                distances[d] = 0
                queue.append(d)
            else:
                distances[d] = INFINITY
        distances[None] = INFINITY
        while queue:
            d = queue.popleft()
            if distances[d] < distances[None]:
                for s in adj[d]:
                    owner = slot_match[s]
                    if distances[owner] is INFINITY:
                        distances[owner] = distances[d] + 1
                        queue.append(owner)
        return distances[None] is not INFINITY

    def depth_first_search(d: Optional[str]) -> bool:
        if d is None:
            return True
        for s in adj[d]:
            owner = slot_match[s]
            if distances[owner] == distances[d] + 1 and depth_first_search(owner):
                slot_match[s] = d
                driver_match[d] = s
                return True
        distances[d] = INFINITY
        return False

    while breadth_first_search():
        for d in g.drivers:
            if driver_match[d] is None:
                depth_first_search(d)

    pairs = [(d, s) for d, s in driver_match.items() if s is not None]
    return pairs_to_matching(g, pairs)


def _enumerate_assignments(
    frozen: FrozenInstance, options: Callable[[DriverSpec], Sequence[Optional[str]]]
):
    """Yield feasible driver -> route-or-None tuples, drivers in instance order."""
    capacity = frozen.capacities()
    used = {r: 0 for r in capacity}
    choice: List[Optional[str]] = []

    def extend(i: int):
        if i == len(frozen.drivers):
            yield tuple(choice)
            return
        for r in options(frozen.drivers[i]):
            if r is not None and used[r] >= capacity[r]:
                continue
            if r is not None:
                used[r] += 1
            choice.append(r)
            yield from extend(i + 1)
            choice.pop()
            if r is not None:
                used[r] -= 1

    yield from extend(0)


def _as_matching(frozen: FrozenInstance, choice: Sequence[Optional[str]]) -> Matching:
    pairs = [
        matching_service.frozen_pair(frozen, d.id, r) for d, r in zip(frozen.drivers, choice) if r is not None
    ]
    unmatched = [d.id for d, r in zip(frozen.drivers, choice) if r is None]
    return Matching(assignments=pairs, unmatched=unmatched)


def _offered(frozen: FrozenInstance, d: DriverSpec) -> List[str]:
    return [r.id for r in frozen.routes if matching_service.frozen_eligible(frozen, d, r.id)]


def offline_max_welfare_matching(frozen: FrozenInstance, limit: Optional[int] = None) -> Matching:
    """Welfare-maximum matching by enumeration; unmatched drivers count 0."""
    _guard(len(frozen.drivers), frozen.slot_count, limit)
    best_choice: Tuple[Optional[str], ...] = tuple(None for _ in frozen.drivers)
    best = 0.0
    for choice in _enumerate_assignments(frozen, lambda d: [None, *_offered(frozen, d)]):
        total = sum(
            matching_service.frozen_utility(frozen, d.id, r) for d, r in zip(frozen.drivers, choice) if r is not None
        )
        if total > best + TOLERANCE:
            best, best_choice = total, choice
    return _as_matching(frozen, best_choice)


# --- Pareto dominance -----------------------------------------------------------


def _preference(frozen: FrozenInstance, driver_id: str, route_id: Optional[str]) -> Tuple[int, float]:
    """Drivers rank every route they are offered above not travelling, then by utility."""
    if route_id is None:
        return (0, 0.0)
    return (1, matching_service.frozen_utility(frozen, driver_id, route_id))


def _strictly_better(a: Tuple[int, float], b: Tuple[int, float]) -> bool:
    if a[0] != b[0]:
        return a[0] > b[0]
    return a[1] > b[1] + TOLERANCE


def pareto_check(frozen: FrozenInstance, candidate: Matching, limit: Optional[int] = None) -> ParetoVerdict:
    """Search for a feasible matching every driver weakly prefers and someone strictly prefers."""
    _guard(len(frozen.drivers), frozen.slot_count, limit)
    current = {d.id: _preference(frozen, d.id, candidate.route_of(d.id)) for d in frozen.drivers}

    def acceptable(d: DriverSpec) -> List[Optional[str]]:
        outcomes = [None, *_offered(frozen, d)]
        return [r for r in outcomes if not _strictly_better(current[d.id], _preference(frozen, d.id, r))]

    for choice in _enumerate_assignments(frozen, acceptable):
        if any(
            _strictly_better(_preference(frozen, d.id, r), current[d.id]) for d, r in zip(frozen.drivers, choice)
        ):
            witness = _as_matching(frozen, choice)
            logger.debug(f"Candidate dominated; witness {[(a.driver_id, a.route_id) for a in witness.assignments]}")
            return ParetoVerdict(dominated=True, witness=witness)
    return ParetoVerdict(dominated=False)


def random_frozen_instance(
    rng: np.random.Generator, max_drivers: int = 6, max_slots: int = 6, max_routes: int = 3
) -> FrozenInstance:
    """Small instance with distinct per-driver utilities; each quote splits its route toll only above k_f."""
    n_routes = int(rng.integers(1, max_routes + 1))
    capacities = [1] * n_routes
    for _ in range(int(rng.integers(0, max_slots - n_routes + 1))):
        capacities[int(rng.integers(0, n_routes))] += 1
    routes = [
        RouteSpec(
            id=f"r{j + 1}",
            free_flow_time=float(rng.uniform(5.0, 15.0)),
            threshold_capacity=float(rng.uniform(1.0, 4.0)),
            slot_capacity=capacities[j],
        )
        for j in range(n_routes)
    ]
    n_drivers = int(rng.integers(1, max_drivers + 1))
    drivers = [
        DriverSpec(id=f"d{i + 1}", arrival_time=i, willingness_to_pay=float(rng.uniform(0.0, 5.0)))
        for i in range(n_drivers)
    ]
    quotes: Dict[str, Dict[str, FrozenQuote]] = {}
    for d in drivers:
        while True:
            row = {}
            for r in routes:
                low, high = math.ceil(0.5 * r.threshold_capacity), math.floor(2.0 * r.threshold_capacity)
                k = int(rng.integers(low, high + 1))
                toll = float(rng.uniform(0.1, 5.0))
                row[r.id] = FrozenQuote(
                    free_flow_time=r.free_flow_time,
                    travel_time=travel_time(r, float(k)),
                    charge=per_driver_charge(toll, k, r.threshold_capacity),
                    toll=toll,
                )
            utilities = sorted((q.free_flow_time - q.travel_time) * q.charge for q in row.values())
            if all(b - a > TOLERANCE for a, b in zip(utilities, utilities[1:])):
                break
        quotes[d.id] = row
    return FrozenInstance(drivers=drivers, routes=routes, quotes=quotes)


# --- Competitive ratio -----------------------------------------------------------


FAMILIES = ("complete", "upper_triangular", "random", "adversarial_pair")


def build_family_instance(
    family: str, size: int, rng: np.random.Generator, density: float = 0.3
) -> BipartiteInstance:
    if family == "complete":
        return matching_service.complete_instance(size, rng)
    if family == "upper_triangular":
        return matching_service.upper_triangular_instance(size, rng)
    if family == "random":
        return matching_service.random_instance(size, size, density, rng)
    if family == "adversarial_pair":
        return matching_service.adversarial_pair_instance()
    raise ValueError(f"Unknown instance family {family!r}; choose from {', '.join(FAMILIES)}.")


def _ratio(online: Matching, optimum: Matching) -> float:
    # nothing to match counts as a perfect run
    if optimum.cardinality == 0:
        return 1.0
    return online.cardinality / optimum.cardinality


def exhaustive_ratio(g: BipartiteInstance, limit: Optional[int] = None) -> float:
    """Expected RANKING ratio over every slot permutation."""
    _guard(len(g.drivers), len(g.slots), limit)
    optimum = offline_max_matching(g)
    ratios = [_ratio(matching_service.ranking_match(g, perm), optimum) for perm in itertools.permutations(g.slot_ids())]
    return math.fsum(ratios) / len(ratios)


def _ratio_trial(job: Tuple[str, int, float, np.random.SeedSequence]) -> Tuple[float, float]:
    family, size, density, seed_seq = job
    rng = np.random.default_rng(seed_seq)
    g = build_family_instance(family, size, rng, density)
    optimum = offline_max_matching(g)
    ranking = matching_service.ranking_match(g, matching_service.random_permutation(g, rng))
    greedy = matching_service.greedy_cost_match(g)
    return _ratio(ranking, optimum), _ratio(greedy, optimum)


def measure_ratio(
    family: str,
    size: int,
    trials: int,
    seed: int,
    workers: int = 1,
    density: float = 0.3,
) -> RatioReport:
    """RANKING cardinality over the offline optimum, one seeded instance and permutation per trial."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if family not in FAMILIES:
        raise ValueError(f"Unknown instance family {family!r}; choose from {', '.join(FAMILIES)}.")
    children = np.random.SeedSequence(seed).spawn(trials)
    results = run_indexed(_ratio_trial, [(family, size, density, child) for child in children], workers)
    ratios = [r for r, _ in results]
    report = RatioReport(
        family=family,
        instance_count=trials,
        ratios=ratios,
        mean=math.fsum(ratios) / trials,
        min=min(ratios),
        permutation_strategy="seeded-uniform",
        greedy_ratios=[g for _, g in results],
    )
    logger.info(f"RANKING on {trials} {family} {size}x{size} instances: mean {report.mean:.4f}, min {report.min:.4f}")
    return report


# --- Strategy-proofness probes ---------------------------------------------------


def _scripted(cfg: ScenarioConfig) -> ScenarioConfig:
    if cfg.arrivals is None:
        return cfg
    return cfg.model_copy(update={"drivers": materialize_drivers(cfg), "arrivals": None})


def _with_driver(cfg: ScenarioConfig, driver: ScriptedDriver) -> ScenarioConfig:
    drivers = [driver if d.id == driver.id else d for d in cfg.drivers]
    return cfg.model_copy(update={"drivers": drivers})


def _find_driver(cfg: ScenarioConfig, driver_id: str) -> ScriptedDriver:
    for d in cfg.drivers:
        if d.id == driver_id:
            return d
    raise KeyError(f"Driver {driver_id} is not in scenario {cfg.name}")


def _compare(
    cfg: ScenarioConfig, deviant: ScriptedDriver, kind: DeviationKind
) -> DeviationOutcome:
    truthful = run(cfg).outcomes[deviant.id]
    deviating = run(_with_driver(cfg, deviant)).outcomes[deviant.id]
    outcome = DeviationOutcome(
        driver_id=deviant.id,
        kind=kind,
        truthful_utility=truthful.utility,
        deviating_utility=deviating.utility,
        truthful_status=truthful.status,
        deviating_status=deviating.status,
        verdict=deviating.utility <= truthful.utility + TOLERANCE,
    )
    if not outcome.verdict:
        logger.warning(
            f"{kind.value} deviation pays off for {deviant.id}: {outcome.deviating_utility} > {outcome.truthful_utility}"
        )
    return outcome


def probe_early_arrival(cfg: ScenarioConfig, driver_id: str, shift: int) -> DeviationOutcome:
    """Driver comes online `shift` steps early but can only accept once truly ready."""
    if shift < 0:
        raise ValueError("shift must be >= 0")
    cfg = _scripted(cfg)
    driver = _find_driver(cfg, driver_id)
    deviant = driver.model_copy(
        update={"arrival_time": max(driver.arrival_time - shift, 0), "ready_time": driver.ready_time}
    )
    return _compare(cfg, deviant, DeviationKind.early_arrival)


def probe_under_report(cfg: ScenarioConfig, driver_id: str, reported: float) -> DeviationOutcome:
    """Driver reports a lower willingness to pay; eligibility uses the report."""
    cfg = _scripted(cfg)
    driver = _find_driver(cfg, driver_id)
    if reported < 0 or reported > driver.willingness_to_pay:
        raise ValueError(f"Reported {reported} must lie in [0, {driver.willingness_to_pay}].")
    deviant = driver.model_copy(update={"reported_wtp": reported})
    return _compare(cfg, deviant, DeviationKind.under_report)


def random_probe_scenario(rng: np.random.Generator, horizon: int = 6) -> ScenarioConfig:
    """Busy tolled routes, sometimes next to a small bypass; drivers often face only congested quotes."""
    n_drivers = int(rng.integers(4, 11))
    routes = []
    for j in range(int(rng.integers(1, 3))):
        routes.append(
            RouteSpec(
                id=f"toll{j + 1}",
                free_flow_time=float(rng.uniform(4.0, 10.0)),
                threshold_capacity=float(rng.integers(1, 3)),
                slot_capacity=int(rng.integers(2, n_drivers + 1)),
            )
        )
    if rng.random() < 0.5:
        routes.append(
            RouteSpec(
                id="bypass",
                free_flow_time=12.0,
                threshold_capacity=float(rng.integers(1, 3)),
                slot_capacity=int(rng.integers(1, max(2, n_drivers // 2) + 1)),
            )
        )
    drivers = [
        ScriptedDriver(
            id=f"d{i + 1:02d}",
            arrival_time=int(rng.integers(0, horizon)),
            willingness_to_pay=float(rng.uniform(0.0, 5.0)),
            deadline_window=int(rng.integers(1, 4)),
            accept_delay=int(rng.integers(0, 3)),
        )
        for i in range(n_drivers)
    ]
    return ScenarioConfig(
        name="probe",
        horizon=horizon,
        routes=routes,
        toll=TollConfig(initial_toll=float(rng.uniform(1.0, 10.0))),
        drivers=drivers,
        seed=int(rng.integers(0, 2**31)),
    )
