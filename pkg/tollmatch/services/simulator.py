"""Discrete-time simulation of online route assignment under anticipatory tolls.

Each timestep runs the same fixed sequence:

1. record X_t per route (background flow plus last step's departures)
2. predict X_{t+q}
3. update the route toll
4. match arrivals in (arrival_time, id) order; a pending offer reserves a slot
5. resolve deadlines: accept or expire pending offers
6. complete finished trips, then depart accepted drivers (penalising deviators)

After the horizon no one arrives, but the run keeps stepping until every
offer has resolved and every trip has completed.
"""

import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from tollmatch.schemas.driver import ScriptedDriver
from tollmatch.schemas.matching import Assignment, AssignmentStatus, Matching, MatchedPair, MatchingMode
from tollmatch.schemas.report import DriverOutcome, EventKind, MetricsReport, SimEvent, SimulationResult
from tollmatch.schemas.route import Route
from tollmatch.schemas.scenario import ScenarioConfig
from tollmatch.services import matching_service, toll_engine
from tollmatch.services.core_model import current_route_cost, current_travel_time
from tollmatch.services.event_log import close_log, summarize
from tollmatch.services.flow_predictor import get_predictor
from tollmatch.workers.pool import run_indexed

logger = logging.getLogger(__name__)

# spawn_key prefixes, one substream family per concern
ARRIVALS = 1
WILLINGNESS = 2
COMPLIANCE = 3
RANKING = 4


class ScenarioConfigError(Exception):
    """Raised when a scenario file cannot be read or does not validate."""


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """Read a TOML or JSON scenario file into a validated config."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioConfigError(f"Cannot read scenario {path}: {exc.strerror}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ScenarioConfigError(f"Cannot parse scenario {path}: {exc}") from exc
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ScenarioConfigError(f"Invalid scenario {path}: {exc}") from exc


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _driver_key(driver_id: str) -> Tuple[int, ...]:
    return tuple(driver_id.encode("utf-8"))


def materialize_drivers(cfg: ScenarioConfig) -> List[ScriptedDriver]:
    """Scripted drivers as given, or draw the random arrival process.

    Arrival counts come from one substream per timestep and each driver's
    alpha, window and acceptance lag from a substream keyed by (timestep,
    index), so changing the rate only adds or drops draws at the tail.
    """
    if cfg.arrivals is None:
        return sorted(cfg.drivers, key=lambda d: (d.arrival_time, d.id))
    proc = cfg.arrivals
    last = cfg.horizon - 1 if proc.last_arrival is None else min(proc.last_arrival, cfg.horizon - 1)
    drivers: List[ScriptedDriver] = []
    for t in range(last + 1):
        count = int(_stream(cfg.seed, ARRIVALS, t).poisson(proc.rate))
        for j in range(count):
            rng = _stream(cfg.seed, WILLINGNESS, t, j)
            drivers.append(
                ScriptedDriver(
                    id=f"d{t:05d}-{j:03d}",
                    arrival_time=t,
                    willingness_to_pay=float(rng.uniform(proc.wtp_min, proc.wtp_max)),
                    deadline_window=int(rng.integers(proc.deadline_window_min, proc.deadline_window_max + 1)),
                    accept_delay=int(rng.integers(0, proc.accept_delay_max + 1)),
                )
            )
    logger.info(f"Drew {len(drivers)} arrivals over {last + 1} timesteps (seed {cfg.seed})")
    return drivers


class _Trip(BaseModel):
    """A departed driver holding a slot until ends_at."""

    model_config = ConfigDict(frozen=True)

    driver_id: str
    route_id: str
    slot_id: str
    ends_at: int


class Simulator:
    """One run of a scenario; single-threaded, arrival-order dependent."""

    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg
        self.routes: Dict[str, Route] = {
            spec.id: Route.fresh(spec, cfg.toll.initial_toll) for spec in cfg.routes
        }
        self.order = [spec.id for spec in cfg.routes]
        self.predictors = {
            spec.id: get_predictor(cfg.predictor, spec.background_flow) for spec in cfg.routes
        }
        self.drivers = {d.id: d for d in materialize_drivers(cfg)}
        self.arrivals: Dict[int, List[ScriptedDriver]] = {}
        for d in self.drivers.values():
            self.arrivals.setdefault(d.arrival_time, []).append(d)

        self.holders: Dict[str, Optional[str]] = {
            slot: None for spec in cfg.routes for slot in spec.slot_ids()
        }
        self.slot_rank: Dict[str, int] = {}
        if cfg.mode is MatchingMode.ranking:
            slots = list(self.holders)
            perm = _stream(cfg.seed, RANKING).permutation(len(slots))
            self.slot_rank = {slots[i]: rank for rank, i in enumerate(perm)}

        self.pending: Dict[str, Assignment] = {}
        self.held_slot: Dict[str, str] = {}
        self.departing: List[Assignment] = []
        self.trips: List[_Trip] = []
        self.departures = {rid: 0 for rid in self.order}
        self.outcomes: Dict[str, DriverOutcome] = {}
        self.final: Dict[str, Assignment] = {}
        self.events: List[SimEvent] = []

    # --- slots ---------------------------------------------------------------

    def _free_slots(self, route_id: str) -> List[str]:
        return [s for s in self.routes[route_id].spec.slot_ids() if self.holders[s] is None]

    def _take_slot(self, route_id: str, driver_id: str) -> str:
        free = self._free_slots(route_id)
        if self.slot_rank:
            free.sort(key=self.slot_rank.__getitem__)
        self.holders[free[0]] = driver_id
        return free[0]

    def _best_free_slot_rank(self) -> Dict[str, int]:
        ranks: Dict[str, int] = {}
        for rid in self.order:
            free = self._free_slots(rid)
            ranks[rid] = min((self.slot_rank[s] for s in free), default=len(self.holders))
        return ranks

    # --- per-step phases -----------------------------------------------------

    def _emit(self, t: int, kind: EventKind, driver: str = "", route: str = "", value: float = 0.0) -> None:
        self.events.append(SimEvent(timestep=t, kind=kind, driver=driver, route=route, value=value))

    def _update_tolls(self, t: int) -> None:
        q = self.cfg.toll.horizon
        for rid in self.order:
            route = self.routes[rid]
            background = route.spec.background_flow
            flow = (background[t] if t < len(background) else 0.0) + self.departures[rid]
            self.departures[rid] = 0
            route.state.record_flow(flow)
            self._emit(t, EventKind.flow, route=rid, value=flow)

            forecast = self.predictors[rid].predict(route.state.flow_history, q)
            self._emit(t, EventKind.predict, route=rid, value=forecast)

            route.state.current_toll = toll_engine.update_toll(route.state.current_toll, self.cfg.toll, forecast, flow)
            self._emit(t, EventKind.toll, route=rid, value=route.state.current_toll)

    def _match_arrivals(self, t: int) -> None:
        live = [self.routes[rid] for rid in self.order]
        for d in sorted(self.arrivals.get(t, []), key=lambda d: d.id):
            ranks = self._best_free_slot_rank() if self.slot_rank else None
            a = matching_service.assign_online(d, live, self.cfg.mode, timestep=t, best_free_slot_rank=ranks)
            if a is None:
                self._emit(t, EventKind.unmatched, driver=d.id)
                self.outcomes[d.id] = DriverOutcome(driver_id=d.id)
                continue
            self.routes[a.route_id].state.pending += 1
            self.held_slot[d.id] = self._take_slot(a.route_id, d.id)
            self.pending[d.id] = a
            self._emit(t, EventKind.assign, driver=d.id, route=a.route_id, value=a.charge)
            self._emit(t, EventKind.quote, driver=d.id, route=a.route_id, value=a.travel_time)

    def _acceptance_time(self, a: Assignment) -> Optional[int]:
        d = self.drivers[a.driver_id]
        if not d.accepts:
            return None
        return max(a.issued_at, d.ready_time) + d.accept_delay

    def _resolve_deadlines(self, t: int) -> None:
        for driver_id, a in list(self.pending.items()):
            accepted_at = self._acceptance_time(a)
            if accepted_at == t and t <= a.deadline:
                resolved = matching_service.resolve_deadline(a, accepted_at)
                self._emit(t, EventKind.accept, driver=driver_id, route=a.route_id, value=a.charge)
                self.departing.append(resolved)
            elif t > a.deadline:
                resolved = matching_service.resolve_deadline(a, accepted_at)
                self._release_slot(driver_id)
                self.routes[a.route_id].state.pending -= 1
                self.final[driver_id] = resolved
                self.outcomes[driver_id] = DriverOutcome(
                    driver_id=driver_id, status=resolved.status, route_id=a.route_id, charge=a.charge
                )
                self._emit(t, EventKind.expire, driver=driver_id, route=a.route_id)
            else:
                continue
            del self.pending[driver_id]

    def _release_slot(self, driver_id: str) -> None:
        slot = self.held_slot.pop(driver_id)
        self.holders[slot] = None

    def _driven_route(self, a: Assignment) -> str:
        """Route the driver actually takes: a scripted detour, a compliance draw, or the assigned one."""
        d = self.drivers[a.driver_id]
        target = d.deviate_to
        if target is None and self.cfg.compliance.deviation_probability > 0:
            rng = _stream(self.cfg.seed, COMPLIANCE, *_driver_key(d.id))
            if rng.random() < self.cfg.compliance.deviation_probability:
                others = [self.routes[r] for r in self.order if r != a.route_id and self._free_slots(r)]
                if others:
                    target = min(others, key=lambda r: (current_travel_time(r), r.id)).id
        if target is None or target == a.route_id or not self._free_slots(target):
            return a.route_id
        return target

    def _advance_trips(self, t: int) -> None:
        for trip in [x for x in self.trips if x.ends_at == t]:
            self.trips.remove(trip)
            self.routes[trip.route_id].state.occupancy -= 1
            self.holders[trip.slot_id] = None
            a = self.final[trip.driver_id]
            if a.status is AssignmentStatus.accepted:
                a = matching_service.complete_assignment(a)
                self.final[trip.driver_id] = a
                self.outcomes[trip.driver_id].status = a.status
            self._emit(t, EventKind.complete, driver=trip.driver_id, route=trip.route_id)

        for a in self.departing:
            driven = self._driven_route(a)
            route = self.routes[driven]
            if driven == a.route_id:
                slot = self.held_slot.pop(a.driver_id)
            else:
                self._release_slot(a.driver_id)
                slot = self._take_slot(driven, a.driver_id)
            self.routes[a.route_id].state.pending -= 1

            resolved, charged = matching_service.enforce_penalty(a, driven, route.state.current_toll, self.cfg.toll)
            if charged:
                self._emit(t, EventKind.penalty, driver=a.driver_id, route=driven, value=charged)

            duration = matching_service.trip_duration(current_travel_time(route))
            route.state.occupancy += 1
            self.departures[driven] += 1
            self.trips.append(_Trip(driver_id=a.driver_id, route_id=driven, slot_id=slot, ends_at=t + duration))
            self.final[a.driver_id] = resolved
            self.outcomes[a.driver_id] = DriverOutcome(
                driver_id=a.driver_id,
                status=resolved.status,
                route_id=a.route_id,
                driven_route_id=driven,
                charge=a.charge,
                utility=matching_service.realized_utility(resolved),
                penalty=charged,
            )
            logger.debug(f"t={t} {a.driver_id} departs on {driven} for {duration} steps")
        self.departing = []

    def _snapshot(self, t: int) -> None:
        for rid in self.order:
            route = self.routes[rid]
            self._emit(t, EventKind.occupancy, route=rid, value=float(route.state.occupancy))
            self._emit(t, EventKind.cost, route=rid, value=current_route_cost(route))

    # --- driver ----------------------------------------------------------------

    def step(self, t: int) -> None:
        self._update_tolls(t)
        self._match_arrivals(t)
        self._resolve_deadlines(t)
        self._advance_trips(t)
        self._snapshot(t)

    def busy(self) -> bool:
        return bool(self.pending or self.trips or self.departing)

    def run(self) -> SimulationResult:
        for rid in self.order:
            self._emit(0, EventKind.route, route=rid, value=self.routes[rid].spec.free_flow_time)
        t = 0
        while t < self.cfg.horizon or self.busy():
            self.step(t)
            t += 1
        close_log(self.events, max(t - 1, 0))
        report = summarize(self.events)
        logger.info(
            f"{self.cfg.name}: {report.timesteps} steps, {report.matched}/{report.total_drivers} matched, "
            f"welfare {report.welfare:.4f}"
        )
        return SimulationResult(report=report, events=self.events, outcomes=self.outcomes, matching=self._matching())

    def _matching(self) -> Matching:
        pairs = [
            MatchedPair(
                driver_id=a.driver_id,
                route_id=a.route_id,
                charge=a.charge,
                travel_time=a.travel_time,
                free_flow_time=a.free_flow_time,
            )
            for a in self.final.values()
            if a.status is not AssignmentStatus.expired
        ]
        unmatched = [o.driver_id for o in self.outcomes.values() if o.status in (None, AssignmentStatus.expired)]
        return Matching(assignments=pairs, unmatched=unmatched)


def run(cfg: ScenarioConfig) -> SimulationResult:
    return Simulator(cfg).run()


def driver_utility_in(result: SimulationResult, driver_id: str) -> float:
    """Quoted utility a driver realised in a run; 0 if unmatched or expired."""
    outcome = result.outcomes.get(driver_id)
    return 0.0 if outcome is None else outcome.utility


def _run_seed(job: Tuple[ScenarioConfig, int]) -> MetricsReport:
    cfg, seed = job
    return run(cfg.model_copy(update={"seed": seed})).report


def run_batch(cfg: ScenarioConfig, seeds: Sequence[int], workers: int = 1) -> List[MetricsReport]:
    """Independent runs of one scenario, reports in seed order."""
    return run_indexed(_run_seed, [(cfg, s) for s in seeds], workers)
