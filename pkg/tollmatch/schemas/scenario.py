from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from tollmatch.schemas.driver import ScriptedDriver
from tollmatch.schemas.matching import MatchingMode
from tollmatch.schemas.route import RouteSpec


class TollConfig(BaseModel):
    beta: float = Field(0.0, ge=0, description="Toll sensitivity to predicted flow change")
    horizon: int = Field(1, ge=1, description="q, prediction lookahead in timesteps")
    fixed_penalty: float = Field(0.0, ge=0, description="F, fixed part of the switching penalty")
    initial_toll: float = Field(0.0, ge=0, description="C_r^0")


class PredictorMethod(str, Enum):
    persistence = "persistence"
    linear = "linear"
    moving_average = "moving_average"
    foresight = "foresight"


class PredictorConfig(BaseModel):
    method: PredictorMethod = PredictorMethod.persistence
    linear_window: int = Field(5, ge=2)
    average_window: int = Field(5, ge=1)


class ArrivalProcess(BaseModel):
    """Seeded random arrivals: Poisson counts per timestep, uniform alpha."""

    rate: float = Field(..., ge=0, description="Mean arrivals per timestep")
    wtp_min: float = Field(0.0, ge=0)
    wtp_max: float = Field(..., ge=0)
    deadline_window_min: int = Field(1, ge=1)
    deadline_window_max: int = Field(1, ge=1)
    accept_delay_max: int = Field(0, ge=0, description="Acceptance lag drawn uniformly in [0, max]")
    last_arrival: Optional[int] = Field(None, ge=0, description="No arrivals after this timestep")

    @model_validator(mode="after")
    def validate_bounds(self) -> "ArrivalProcess":
        if self.wtp_min > self.wtp_max:
            raise ValueError("wtp_min must not exceed wtp_max.")
        if self.deadline_window_min > self.deadline_window_max:
            raise ValueError("deadline_window_min must not exceed deadline_window_max.")
        return self


class ComplianceConfig(BaseModel):
    deviation_probability: float = Field(
        0.0, ge=0, le=1, description="Chance an accepting driver drives another route"
    )


class ScenarioConfig(BaseModel):
    name: str = "scenario"
    horizon: int = Field(..., ge=1, description="Timesteps during which drivers arrive")
    routes: List[RouteSpec] = Field(..., min_length=1)
    toll: TollConfig = Field(default_factory=TollConfig)
    predictor: PredictorConfig = Field(default_factory=PredictorConfig)
    drivers: List[ScriptedDriver] = Field(default_factory=list)
    arrivals: Optional[ArrivalProcess] = None
    mode: MatchingMode = MatchingMode.utility
    compliance: ComplianceConfig = Field(default_factory=ComplianceConfig)
    seed: int = Field(0, ge=0)

    @field_validator("routes")
    @classmethod
    def validate_route_ids(cls, v: List[RouteSpec]) -> List[RouteSpec]:
        ids = [r.id for r in v]
        if len(ids) != len(set(ids)):
            raise ValueError("Route ids must be unique.")
        return v

    @model_validator(mode="after")
    def validate_drivers(self) -> "ScenarioConfig":
        if self.drivers and self.arrivals is not None:
            raise ValueError("Give either a scripted driver list or a random arrival process, not both.")
        ids = [d.id for d in self.drivers]
        if len(ids) != len(set(ids)):
            raise ValueError("Driver ids must be unique.")
        route_ids = {r.id for r in self.routes}
        for d in self.drivers:
            if d.arrival_time >= self.horizon:
                raise ValueError(f"Driver {d.id} arrives at {d.arrival_time}, outside the horizon.")
            if d.deviate_to is not None and d.deviate_to not in route_ids:
                raise ValueError(f"Driver {d.id} deviates to unknown route {d.deviate_to}.")
        return self

    def route(self, route_id: str) -> RouteSpec:
        for r in self.routes:
            if r.id == route_id:
                return r
        raise KeyError(route_id)
