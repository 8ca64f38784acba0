"""Two-driver auction baseline and its comparison with the matching charge.

Driver 1 is priced against driver 2's value of time. The three cases split
theta1 around [theta2 / 2, 2 * theta2]; both endpoints belong to the middle
(shared) case. The matching side always lets both drivers travel and charges
phi * theta.
"""

import itertools
import logging
from typing import Iterable, List, Optional, Tuple

from tollmatch.schemas.auction import AuctionCase, AuctionComparisonRow, AuctionScenario, ComparisonUtilities

logger = logging.getLogger(__name__)


def _check_thetas(theta1: float, theta2: float) -> None:
    if theta1 <= 0 or theta2 <= 0:
        raise ValueError(f"Values of time must be positive, got ({theta1}, {theta2}).")


def auction_case(theta1: float, theta2: float) -> AuctionCase:
    _check_thetas(theta1, theta2)
    if theta1 > 2 * theta2:
        return AuctionCase.first_only
    if 2 * theta1 < theta2:
        return AuctionCase.second_only
    return AuctionCase.shared


def auc_allocate(theta1: float, theta2: float) -> Tuple[int, int]:
    return {
        AuctionCase.shared: (1, 1),
        AuctionCase.first_only: (1, 0),
        AuctionCase.second_only: (0, 1),
    }[auction_case(theta1, theta2)]


def auc_payment(theta1: float, theta2: float) -> float:
    """Driver 1's payment: theta2 when sharing, 3 * theta2 alone, 0 when priced out."""
    case = auction_case(theta1, theta2)
    if case is AuctionCase.shared:
        return theta2
    if case is AuctionCase.first_only:
        return 3 * theta2
    return 0.0


def auc_travel_time(theta1: float, theta2: float) -> Optional[float]:
    """Driver 1's travel time; None means driver 1 does not travel."""
    case = auction_case(theta1, theta2)
    if case is AuctionCase.shared:
        return 2.0
    if case is AuctionCase.first_only:
        return 1.0
    return None


def auc_utility(theta: float, k: int, p: float, scenario: AuctionScenario, travels: bool = True) -> float:
    """u = theta * (S - c(k)) - p when travelling; 0 when opting out."""
    if not travels:
        return 0.0
    if k < 1:
        raise ValueError("A travelling driver needs k >= 1.")
    return theta * (scenario.free_time - scenario.c(k)) - p


def matching_payment(theta: float, phi: float) -> float:
    return phi * theta


def matching_comparison_utilities(
    theta_d: float, t_c: float, phi: float, free_time: float = 4.0
) -> ComparisonUtilities:
    """U_auc = theta * (t_f - t_c) and U_mat = (t_f - t_c) * phi * theta, as written."""
    if not 0 < phi < 1:
        raise ValueError(f"phi must lie in (0, 1), got {phi}.")
    saving = free_time - t_c
    u_auction = theta_d * saving
    u_matching = saving * phi * theta_d
    if u_auction == 0:
        return ComparisonUtilities(u_auction=u_auction, u_matching=u_matching, ratio=None, degenerate=True)
    return ComparisonUtilities(u_auction=u_auction, u_matching=u_matching, ratio=u_matching / u_auction)


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def comparison_row(theta1: float, theta2: float, scenario: AuctionScenario) -> AuctionComparisonRow:
    case = auction_case(theta1, theta2)
    allocation = auc_allocate(theta1, theta2)
    payment = auc_payment(theta1, theta2)
    travellers = sum(allocation)
    t_c = scenario.c(travellers)
    utilities = matching_comparison_utilities(theta1, t_c, scenario.phi, scenario.free_time)
    return AuctionComparisonRow(
        theta1=theta1,
        theta2=theta2,
        phi=scenario.phi,
        case=case,
        allocation=allocation,
        payment=payment,
        travel_time=auc_travel_time(theta1, theta2),
        matching_payment=matching_payment(theta1, scenario.phi),
        utility_eq3=auc_utility(theta1, travellers, payment, scenario, travels=allocation[0] == 1),
        congested_time=t_c,
        u_auction=utilities.u_auction,
        u_matching=utilities.u_matching,
        ratio=utilities.ratio,
        gap_sign=_sign(utilities.u_matching - utilities.u_auction),
        claim_holds=utilities.u_auction <= utilities.u_matching,
    )


def comparison_table(
    theta1_values: Iterable[float], theta2_values: Iterable[float], scenario: AuctionScenario
) -> List[AuctionComparisonRow]:
    """One row per (theta1, theta2) grid point, theta1 varying slowest."""
    rows = [comparison_row(t1, t2, scenario) for t1, t2 in itertools.product(theta1_values, list(theta2_values))]
    broken = sum(not r.claim_holds for r in rows)
    if broken:
        logger.warning(f"{broken}/{len(rows)} grid points have U_auc > U_mat")
    return rows
