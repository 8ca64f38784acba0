from enum import Enum
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, Field, field_validator


class AuctionCase(str, Enum):
    shared = "shared"  # theta1 in [theta2/2, 2*theta2]
    first_only = "first_only"  # theta1 > 2*theta2
    second_only = "second_only"  # theta1 < theta2/2


class AuctionScenario(BaseModel):
    """Two-driver, single-route auction setting."""

    theta1: float = Field(1.0, gt=0, description="VOT of driver 1")
    theta2: float = Field(1.0, gt=0, description="VOT of driver 2")
    free_time: float = Field(4.0, gt=0, description="S (t_f), trip time without traffic")
    congestion_time: Dict[int, float] = Field(
        default_factory=lambda: {1: 1.0, 2: 2.0}, description="c(k), time with k travellers"
    )
    phi: float = Field(0.5, gt=0, lt=1, description="Matching charge as a fraction of VOT (i/j)")

    @field_validator("congestion_time")
    @classmethod
    def validate_congestion_time(cls, v: Dict[int, float]) -> Dict[int, float]:
        if not v or min(v) < 1:
            raise ValueError("c(k) needs entries for traveller counts k >= 1.")
        times = [v[k] for k in sorted(v)]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("c(k) must be nondecreasing in k.")
        return v

    def c(self, k: int) -> float:
        try:
            return self.congestion_time[k]
        except KeyError:
            raise ValueError(f"c({k}) is not defined in the congestion table.") from None


class ComparisonUtilities(BaseModel):
    u_auction: float
    u_matching: float
    ratio: Optional[float] = Field(None, description="u_matching / u_auction; None when u_auction is 0")
    degenerate: bool = False


class AuctionComparisonRow(BaseModel):
    theta1: float
    theta2: float
    phi: float
    case: AuctionCase
    allocation: Tuple[int, int]
    payment: float
    travel_time: Optional[float] = Field(None, description="None: driver 1 does not travel")
    matching_allocation: Tuple[int, int] = (1, 1)
    matching_payment: float
    utility_eq3: float = Field(..., description="v(theta, k) - p for driver 1, 0 when opting out")
    congested_time: float = Field(..., description="t_c used for the utility comparison")
    u_auction: float
    u_matching: float
    ratio: Optional[float] = None
    gap_sign: int = Field(..., description="sign of u_matching - u_auction")
    claim_holds: bool = Field(..., description="u_auction <= u_matching")
