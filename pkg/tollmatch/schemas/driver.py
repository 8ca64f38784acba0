from typing import Optional

from pydantic import BaseModel, Field, model_validator


class DriverSpec(BaseModel):
    id: str = Field(..., examples=["d001"])
    arrival_time: int = Field(..., ge=0, description="Timestep the driver comes online")
    willingness_to_pay: float = Field(..., ge=0, description="alpha_d, max acceptable charge")
    deadline_window: int = Field(1, ge=1, description="Timesteps allowed to accept an assignment")

    @property
    def reported(self) -> float:
        """The alpha the mechanism sees."""
        return self.willingness_to_pay


class ScriptedDriver(DriverSpec):
    """A driver plus the behaviour the simulator plays back for it."""

    ready_time: Optional[int] = Field(
        None, ge=0, description="Earliest timestep the driver can start travelling (default: arrival)"
    )
    accept_delay: int = Field(0, ge=0, description="Timesteps between readiness and acceptance")
    accepts: bool = Field(True, description="False: never accepts, assignment expires")
    deviate_to: Optional[str] = Field(None, description="Route actually driven, if not the assigned one")
    reported_wtp: Optional[float] = Field(
        None, ge=0, description="alpha reported to the mechanism (default: truthful)"
    )

    @model_validator(mode="after")
    def default_ready_time(self) -> "ScriptedDriver":
        if self.ready_time is None:
            self.ready_time = self.arrival_time
        return self

    @property
    def reported(self) -> float:
        return self.willingness_to_pay if self.reported_wtp is None else self.reported_wtp
