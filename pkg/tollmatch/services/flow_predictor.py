"""Short-term flow forecasts X_{t+q} for the anticipatory toll.

Three history-only baselines plus a foresight lookup into a scripted series.
Any object with ``predict(history, q) -> float`` can stand in for these.
"""

from typing import List, Protocol, Sequence

import numpy as np

from tollmatch.schemas.scenario import PredictorConfig, PredictorMethod


class FlowPredictor(Protocol):
    def predict(self, history: Sequence[float], q: int) -> float: ...


def _as_history(history: Sequence[float], q: int) -> np.ndarray:
    if q < 1:
        raise ValueError("q must be >= 1")
    samples = np.asarray(history, dtype=float).reshape(-1)
    if samples.size == 0:
        raise ValueError("Flow history is empty; record at least one sample before predicting.")
    if not np.isfinite(samples).all() or (samples < 0).any():
        raise ValueError("Flow history must contain finite, non-negative values.")
    return samples


def _flat(window: np.ndarray) -> bool:
    return bool((window == window[0]).all())


class PersistencePredictor:
    def predict(self, history: Sequence[float], q: int) -> float:
        return float(_as_history(history, q)[-1])


class LinearTrendPredictor:
    """Least-squares line over the trailing window, extrapolated q steps."""

    def __init__(self, window: int = 5) -> None:
        if window < 2:
            raise ValueError(f"A linear fit needs at least 2 points, got window={window}.")
        self.window = window

    def predict(self, history: Sequence[float], q: int) -> float:
        samples = _as_history(history, q)
        if samples.size < self.window:
            return float(samples[-1])
        y = samples[-self.window :]
        if _flat(y):
            return float(y[0])
        x = np.arange(self.window, dtype=float)
        slope, intercept = np.polyfit(x, y, deg=1)
        forecast = intercept + slope * (self.window - 1 + q)
        return max(float(forecast), 0.0)


class MovingAveragePredictor:
    def __init__(self, window: int = 5) -> None:
        if window < 1:
            raise ValueError(f"Averaging window must be >= 1, got {window}.")
        self.window = window

    def predict(self, history: Sequence[float], q: int) -> float:
        tail = _as_history(history, q)[-self.window :]
        if _flat(tail):
            return float(tail[0])
        return max(float(tail.mean()), 0.0)


class ForesightPredictor:
    """Reads X_{t+q} off a known script; holds the last value past its end."""

    def __init__(self, script: Sequence[float] = ()) -> None:
        self.script: List[float] = list(script)

    def predict(self, history: Sequence[float], q: int) -> float:
        samples = _as_history(history, q)
        if not self.script:
            return float(samples[-1])
        t = samples.size - 1
        return float(self.script[min(t + q, len(self.script) - 1)])


def get_predictor(cfg: PredictorConfig, script: Sequence[float] = ()) -> FlowPredictor:
    if cfg.method is PredictorMethod.persistence:
        return PersistencePredictor()
    if cfg.method is PredictorMethod.linear:
        return LinearTrendPredictor(window=cfg.linear_window)
    if cfg.method is PredictorMethod.moving_average:
        return MovingAveragePredictor(window=cfg.average_window)
    return ForesightPredictor(script=list(script))


def predict(
    history: Sequence[float],
    q: int,
    method: PredictorMethod = PredictorMethod.persistence,
    window: int = 5,
) -> float:
    """Forecast X_{t+q} from X_0..X_t with the named baseline."""
    if method is PredictorMethod.linear:
        return LinearTrendPredictor(window).predict(history, q)
    if method is PredictorMethod.moving_average:
        return MovingAveragePredictor(window).predict(history, q)
    return get_predictor(PredictorConfig(method=method)).predict(history, q)
