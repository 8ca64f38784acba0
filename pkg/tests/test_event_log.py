import pytest

from tollmatch.schemas.report import EventKind, SimEvent
from tollmatch.services.event_log import (
    HEADER,
    EventLogError,
    close_log,
    dumps_events,
    parse_events,
    read_events,
    summarize,
)
from tollmatch.services.simulator import load_scenario, run
from tests.conftest import SCENARIOS


@pytest.fixture(scope="module")
def scripted():
    return run(load_scenario(SCENARIOS / "scripted_10.toml"))


def _lines(text: str):
    return text.splitlines(keepends=True)


def test_replay_reproduces_run_metrics(scripted):
    events = parse_events(_lines(dumps_events(scripted.events)))
    assert events == scripted.events
    assert summarize(events) == scripted.report


def test_read_events_from_disk(tmp_path, scripted):
    path = tmp_path / "events.csv"
    path.write_text(dumps_events(scripted.events), encoding="utf-8")
    assert summarize(read_events(path)) == scripted.report


def test_floats_survive_round_trip():
    events = [SimEvent(timestep=0, kind=EventKind.toll, route="r1", value=0.1 + 0.2)]
    close_log(events, 0)
    assert parse_events(_lines(dumps_events(events)))[0].value == 0.1 + 0.2


def test_end_record_counts_prior_records():
    events = [SimEvent(timestep=0, kind=EventKind.route, route="r1", value=4.0)]
    close_log(events, 3)
    assert events[-1] == SimEvent(timestep=3, kind=EventKind.end, value=1.0)


def test_truncated_log_reports_last_line(scripted):
    lines = _lines(dumps_events(scripted.events))[:-1]
    with pytest.raises(EventLogError) as info:
        parse_events(lines)
    assert info.value.line == len(lines)
    assert "truncated" in str(info.value)


def test_wrong_field_count(scripted):
    lines = _lines(dumps_events(scripted.events))
    lines[3] = "0,flow,,r1\n"
    with pytest.raises(EventLogError) as info:
        parse_events(lines)
    assert info.value.line == 4


def test_unknown_event_kind():
    lines = [",".join(HEADER) + "\n", "0,teleport,d1,r1,0.0\n", "0,end,,,1.0\n"]
    with pytest.raises(EventLogError) as info:
        parse_events(lines)
    assert info.value.line == 2


def test_bad_header():
    with pytest.raises(EventLogError) as info:
        parse_events(["t,kind,driver,route,value\n"])
    assert info.value.line == 1


def test_empty_log():
    with pytest.raises(EventLogError) as info:
        parse_events([])
    assert info.value.line == 1


def test_end_count_mismatch():
    lines = [",".join(HEADER) + "\n", "0,route,,r1,4.0\n", "0,end,,,5.0\n"]
    with pytest.raises(EventLogError) as info:
        parse_events(lines)
    assert info.value.line == 3


def test_record_after_end():
    lines = [",".join(HEADER) + "\n", "0,end,,,0.0\n", "1,flow,,r1,2.0\n"]
    with pytest.raises(EventLogError) as info:
        parse_events(lines)
    assert info.value.line == 3


def test_summary_of_log_without_steps():
    events = []
    close_log(events, 0)
    assert summarize(events).timesteps == 0
