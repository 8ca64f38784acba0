"""Anticipatory tolls, per-driver charges and switching penalties."""

import logging
from typing import List, Sequence

from tollmatch.schemas.scenario import TollConfig

logger = logging.getLogger(__name__)


def update_toll(C_prev: float, cfg: TollConfig, X_future: float, X_now: float) -> float:
    """C_r^t = C_r^{t-1} + beta * (X_{t+q} - X_t), clamped at zero."""
    toll = C_prev + cfg.beta * (X_future - X_now)
    if toll < 0:
        logger.debug(f"Toll update {toll:.6f} clamped to 0")
        return 0.0
    return toll


def per_driver_charge(C_r: float, k_t: float, k_f: float) -> float:
    """Route toll split evenly over travelling drivers once k_t exceeds k_f; else 0."""
    if k_f <= 0:
        raise ValueError(f"Threshold capacity must be positive, got {k_f}.")
    if k_t - k_f > 0:
        return C_r / k_t
    return 0.0


def penalty(C_r_t: float, cfg: TollConfig) -> float:
    """P = C_r^t + F for a driver found on a route other than the assigned one."""
    return C_r_t + cfg.fixed_penalty


def toll_series(flows: Sequence[float], predictions: Sequence[float], cfg: TollConfig) -> List[float]:
    """Tolls after each update, given X_t and the matching X_{t+q} forecasts."""
    if len(flows) != len(predictions):
        raise ValueError("Need one prediction per recorded flow.")
    tolls: List[float] = []
    toll = cfg.initial_toll
    for now, future in zip(flows, predictions):
        toll = update_toll(toll, cfg, future, now)
        tolls.append(toll)
    return tolls
