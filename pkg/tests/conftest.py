from pathlib import Path

import pytest

from tollmatch.schemas.route import Route, RouteSpec, RouteState
from tollmatch.schemas.scenario import ScenarioConfig

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def make_route(
    route_id: str,
    free_flow_time: float = 10.0,
    threshold_capacity: float = 100.0,
    slot_capacity: int = 300,
    occupancy: int = 0,
    toll: float = 0.0,
) -> Route:
    spec = RouteSpec(
        id=route_id,
        free_flow_time=free_flow_time,
        threshold_capacity=threshold_capacity,
        slot_capacity=slot_capacity,
    )
    return Route(spec=spec, state=RouteState(route_id=route_id, occupancy=occupancy, current_toll=toll))


def single_route_scenario(drivers, **overrides) -> ScenarioConfig:
    data = {
        "name": "test",
        "horizon": 3,
        "routes": [{"id": "r1", "free_flow_time": 10.0, "threshold_capacity": 100.0, "slot_capacity": 100}],
        "drivers": drivers,
    }
    data.update(overrides)
    return ScenarioConfig.model_validate(data)


@pytest.fixture
def scenarios_dir() -> Path:
    return SCENARIOS
