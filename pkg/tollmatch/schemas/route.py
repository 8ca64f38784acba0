from typing import List

from pydantic import BaseModel, Field, field_validator


class RouteSpec(BaseModel):
    """Static parameters of one O-D route."""

    id: str = Field(..., examples=["r1"])
    free_flow_time: float = Field(..., gt=0, description="E_f, minutes")
    threshold_capacity: float = Field(..., gt=0, description="k_f, vehicles before congestion")
    congestion_a: float = Field(0.15, ge=0, description="BPR scale A")
    congestion_b: float = Field(4.0, ge=1, description="BPR exponent B")
    slot_capacity: int = Field(..., ge=1, description="Max simultaneous assignments")
    background_flow: List[float] = Field(
        default_factory=list,
        description="Exogenous flow added to X_t per timestep; also the foresight predictor's script",
    )

    @field_validator("background_flow")
    @classmethod
    def validate_background_flow(cls, v: List[float]) -> List[float]:
        if any(x < 0 for x in v):
            raise ValueError("Background flow values must be non-negative.")
        return v

    def slot_ids(self) -> List[str]:
        return [f"{self.id}#{i}" for i in range(self.slot_capacity)]


class RouteState(BaseModel):
    """Evolving state of a route within one run."""

    route_id: str
    occupancy: int = Field(0, ge=0, description="k_t, drivers with active trips")
    pending: int = Field(0, ge=0, description="Issued assignments awaiting acceptance")
    flow_history: List[float] = Field(default_factory=list, description="X_0..X_t, append-only")
    current_toll: float = Field(0.0, ge=0, description="C_r")

    def record_flow(self, value: float) -> None:
        if value < 0:
            raise ValueError("Flow values must be non-negative.")
        self.flow_history.append(float(value))


class Route(BaseModel):
    """A live route: its spec plus the state the simulator mutates."""

    spec: RouteSpec
    state: RouteState

    @property
    def id(self) -> str:
        return self.spec.id

    @classmethod
    def fresh(cls, spec: RouteSpec, initial_toll: float = 0.0) -> "Route":
        return cls(spec=spec, state=RouteState(route_id=spec.id, current_toll=initial_toll))

    def reserved(self) -> int:
        return self.state.occupancy + self.state.pending

    def has_free_slot(self) -> bool:
        return self.reserved() < self.spec.slot_capacity

    def residual(self) -> float:
        return self.spec.threshold_capacity - self.state.occupancy
