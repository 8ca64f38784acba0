from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from tollmatch.schemas.driver import DriverSpec
from tollmatch.schemas.route import RouteSpec


class AssignmentStatus(str, Enum):
    pending = "pending"
    accepted = "accepted"
    expired = "expired"
    penalized = "penalized"
    completed = "completed"


# Allowed lifecycle moves; anything else raises AssignmentStateError
TRANSITIONS: Dict[AssignmentStatus, Tuple[AssignmentStatus, ...]] = {
    AssignmentStatus.pending: (AssignmentStatus.accepted, AssignmentStatus.expired),
    AssignmentStatus.accepted: (AssignmentStatus.completed, AssignmentStatus.penalized),
    AssignmentStatus.expired: (),
    AssignmentStatus.penalized: (),
    AssignmentStatus.completed: (),
}


class MatchingMode(str, Enum):
    utility = "utility"
    cost = "cost"
    ranking = "ranking"


class Assignment(BaseModel):
    """A quoted route offer; charge and travel time are frozen at issue."""

    model_config = ConfigDict(frozen=True)

    driver_id: str
    route_id: str
    issued_at: int = Field(..., ge=0)
    deadline: int = Field(..., ge=0)
    charge: float = Field(0.0, ge=0, description="C_d quoted at issue")
    travel_time: float = Field(..., gt=0, description="E_t quoted at issue")
    free_flow_time: float = Field(..., gt=0, description="E_f of the assigned route")
    status: AssignmentStatus = AssignmentStatus.pending
    accepted_at: Optional[int] = None

    @model_validator(mode="after")
    def validate_deadline(self) -> "Assignment":
        if self.deadline < self.issued_at:
            raise ValueError("Deadline must not precede issue time.")
        return self


class MatchedPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    driver_id: str
    route_id: str
    slot_id: Optional[str] = None
    charge: float = Field(0.0, ge=0)
    travel_time: float = Field(0.0, ge=0)
    free_flow_time: float = Field(0.0, ge=0)


class Matching(BaseModel):
    """mu: driver-route pairs plus the drivers left unmatched."""

    assignments: List[MatchedPair] = Field(default_factory=list)
    unmatched: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_drivers_once(self) -> "Matching":
        seen = [a.driver_id for a in self.assignments] + list(self.unmatched)
        if len(seen) != len(set(seen)):
            raise ValueError("Each driver may appear at most once in a matching.")
        return self

    @property
    def cardinality(self) -> int:
        return len(self.assignments)

    def route_of(self, driver_id: str) -> Optional[str]:
        for a in self.assignments:
            if a.driver_id == driver_id:
                return a.route_id
        return None

    def route_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for a in self.assignments:
            counts[a.route_id] = counts.get(a.route_id, 0) + 1
        return counts

    def check_capacity(self, capacities: Dict[str, int]) -> bool:
        return all(n <= capacities.get(route_id, 0) for route_id, n in self.route_counts().items())


class SlotVertex(BaseModel):
    """One unit of route capacity on the offline side of the bipartite graph."""

    model_config = ConfigDict(frozen=True)

    id: str
    route_id: str
    cost: float = Field(0.0, ge=0, description="Static cost used by greedy-by-cost")


class BipartiteInstance(BaseModel):
    drivers: List[str] = Field(default_factory=list, description="Online side, in arrival order")
    slots: List[SlotVertex] = Field(default_factory=list)
    edges: List[Tuple[str, str]] = Field(default_factory=list, description="(driver, slot) pairs")

    @field_validator("drivers")
    @classmethod
    def validate_unique_drivers(cls, v: List[str]) -> List[str]:
        if len(v) != len(set(v)):
            raise ValueError("Driver ids must be unique.")
        return v

    @model_validator(mode="after")
    def validate_edges(self) -> "BipartiteInstance":
        slot_ids = {s.id for s in self.slots}
        if len(slot_ids) != len(self.slots):
            raise ValueError("Slot ids must be unique.")
        drivers = set(self.drivers)
        for d, s in self.edges:
            if d not in drivers or s not in slot_ids:
                raise ValueError(f"Edge ({d}, {s}) references an unknown vertex.")
        return self

    def slot_ids(self) -> List[str]:
        return [s.id for s in self.slots]

    def adjacency(self) -> Dict[str, List[str]]:
        """Neighbours per driver, in slot declaration order."""
        order = {s.id: i for i, s in enumerate(self.slots)}
        adj: Dict[str, List[str]] = {d: [] for d in self.drivers}
        for d, s in dict.fromkeys(self.edges):
            adj[d].append(s)
        for d in adj:
            adj[d].sort(key=order.__getitem__)
        return adj

    def route_of_slot(self) -> Dict[str, str]:
        return {s.id: s.route_id for s in self.slots}


def pairs_to_matching(
    instance: BipartiteInstance, pairs: Iterable[Tuple[str, str]]
) -> Matching:
    """Build a cardinality matching (no charges) from (driver, slot) pairs."""
    route_of = instance.route_of_slot()
    by_driver = dict(pairs)
    assignments = [
        MatchedPair(driver_id=d, route_id=route_of[by_driver[d]], slot_id=by_driver[d])
        for d in instance.drivers
        if d in by_driver
    ]
    unmatched = [d for d in instance.drivers if d not in by_driver]
    return Matching(assignments=assignments, unmatched=unmatched)


class FrozenQuote(BaseModel):
    """Travel time and charge a driver would get on a route, held fixed."""

    model_config = ConfigDict(frozen=True)

    free_flow_time: float = Field(..., gt=0)
    travel_time: float = Field(..., gt=0)
    charge: float = Field(0.0, ge=0, description="C_d, the per-driver share")
    toll: float = Field(0.0, ge=0, description="C_r the share was split from")


class FrozenInstance(BaseModel):
    """Drivers and routes with utilities fixed per (driver, route) pair.

    Used by the Pareto checker and the welfare oracle, where congestion
    feedback is switched off.
    """

    drivers: List[DriverSpec] = Field(default_factory=list)
    routes: List[RouteSpec] = Field(default_factory=list)
    quotes: Dict[str, Dict[str, FrozenQuote]] = Field(
        default_factory=dict, description="driver id -> route id -> quote; missing = not offered"
    )

    @model_validator(mode="after")
    def validate_ids(self) -> "FrozenInstance":
        driver_ids = {d.id for d in self.drivers}
        route_ids = {r.id for r in self.routes}
        if len(driver_ids) != len(self.drivers) or len(route_ids) != len(self.routes):
            raise ValueError("Driver and route ids must be unique.")
        for d, row in self.quotes.items():
            if d not in driver_ids or not set(row) <= route_ids:
                raise ValueError(f"Quotes for {d} reference an unknown driver or route.")
        return self

    def capacities(self) -> Dict[str, int]:
        return {r.id: r.slot_capacity for r in self.routes}

    @property
    def slot_count(self) -> int:
        return sum(r.slot_capacity for r in self.routes)

