from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from tollmatch.schemas.matching import AssignmentStatus, Matching


class EventKind(str, Enum):
    route = "route"  # value: E_f, emitted once per route at t=0
    flow = "flow"  # value: X_t
    predict = "predict"  # value: predicted X_{t+q}
    toll = "toll"  # value: C_r^t after the update
    assign = "assign"  # value: C_d quoted
    quote = "quote"  # value: E_t quoted
    unmatched = "unmatched"
    accept = "accept"  # value: C_d paid
    expire = "expire"
    penalty = "penalty"  # route: route actually driven; value: P
    complete = "complete"
    occupancy = "occupancy"  # value: k_t at end of step
    cost = "cost"  # value: R(E, C)_r at end of step
    end = "end"  # value: number of records before it


class SimEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    timestep: int = Field(..., ge=0)
    kind: EventKind
    driver: str = ""
    route: str = ""
    value: float = 0.0


class DriverOutcome(BaseModel):
    driver_id: str
    status: Optional[AssignmentStatus] = Field(None, description="None: never matched")
    route_id: Optional[str] = None
    driven_route_id: Optional[str] = None
    charge: float = 0.0
    utility: float = 0.0
    penalty: float = 0.0


class MetricsReport(BaseModel):
    welfare: float = 0.0
    total_route_cost: float = 0.0
    tolls_collected: float = 0.0
    penalties_collected: float = 0.0
    total_drivers: int = 0
    matched: int = 0
    unmatched: int = 0
    expired: int = 0
    penalized: int = 0
    completed: int = 0
    timesteps: int = 0
    toll_trace: Dict[str, List[float]] = Field(default_factory=dict)
    occupancy_trace: Dict[str, List[int]] = Field(default_factory=dict)
    flow_trace: Dict[str, List[float]] = Field(default_factory=dict)
    cost_trace: Dict[str, List[float]] = Field(default_factory=dict)


class SimulationResult(BaseModel):
    report: MetricsReport
    events: List[SimEvent] = Field(default_factory=list)
    outcomes: Dict[str, DriverOutcome] = Field(default_factory=dict)
    matching: Matching = Field(default_factory=Matching)


class RatioReport(BaseModel):
    family: str
    instance_count: int
    ratios: List[float] = Field(default_factory=list, description="Per instance, online / offline")
    mean: float
    min: float
    permutation_strategy: str = Field(..., description="seeded-uniform or exhaustive")
    greedy_ratios: List[float] = Field(default_factory=list, description="Greedy-by-cost, measured only")


class DeviationKind(str, Enum):
    early_arrival = "early-arrival"
    under_report = "under-report"


class DeviationOutcome(BaseModel):
    driver_id: str
    kind: DeviationKind
    truthful_utility: float
    deviating_utility: float
    truthful_status: Optional[AssignmentStatus] = None
    deviating_status: Optional[AssignmentStatus] = None
    verdict: bool = Field(..., description="deviating <= truthful (within tolerance)")


class ParetoVerdict(BaseModel):
    dominated: bool
    witness: Optional[Matching] = None


class SuiteResult(BaseModel):
    name: str
    passed: bool
    rows: List[dict] = Field(default_factory=list)
    summary: dict = Field(default_factory=dict)
