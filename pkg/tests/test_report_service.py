import json

import pytest

from tollmatch.schemas.report import SuiteResult
from tollmatch.services.report_service import OutputError, ReportWriter
from tollmatch.services.simulator import load_scenario, run
from tests.conftest import SCENARIOS


def test_writes_leave_no_temporary_files(tmp_path):
    writer = ReportWriter(tmp_path / "out")
    writer.write_text("a.txt", "first\n")
    writer.write_text("a.txt", "second\n")
    assert [p.name for p in (tmp_path / "out").iterdir()] == ["a.txt"]
    assert (tmp_path / "out" / "a.txt").read_text() == "second\n"


def test_records_header_is_union_of_keys(tmp_path):
    writer = ReportWriter(tmp_path)
    path = writer.write_records("r.csv", [{"a": 1}, {"b": 2, "a": 3}])
    assert path.read_text().splitlines() == ["a,b", "1,", "3,2"]


def test_traces_are_ordered_by_timestep(tmp_path):
    result = run(load_scenario(SCENARIOS / "scripted_10.toml"))
    lines = ReportWriter(tmp_path).write_traces("traces.csv", result.report).read_text().splitlines()
    assert lines[0] == "timestep,route,flow,toll,occupancy,route_cost"
    steps = [int(line.split(",")[0]) for line in lines[1:]]
    assert steps == sorted(steps)
    assert len(steps) == 2 * result.report.timesteps


def test_suite_json(tmp_path):
    writer = ReportWriter(tmp_path)
    writer.write_json("s.json", SuiteResult(name="x", passed=True, summary={"n": 1}))
    assert json.loads((tmp_path / "s.json").read_text())["summary"] == {"n": 1}


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OutputError):
        ReportWriter(blocker / "sub")
