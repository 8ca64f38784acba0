import csv

import openpyxl
import pytest

from tollmatch.main import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main, parse_range
from tollmatch.schemas.report import SuiteResult
from tollmatch.services import verification_suites
from tests.conftest import SCENARIOS


def _cli(tmp_path, *args):
    return main(["--out", str(tmp_path), "--log-level", "WARNING", *args])


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_range():
    assert parse_range("2.5") == [2.5]
    assert parse_range("1:3:3") == [1.0, 2.0, 3.0]


def test_simulate_writes_outputs(tmp_path, capsys):
    assert _cli(tmp_path, "simulate", "--config", str(SCENARIOS / "empty.toml"), "--seed", "7") == EXIT_OK
    for name in ("events.csv", "traces.csv", "outcomes.csv", "summary.json"):
        assert (tmp_path / name).exists()
    assert "0 drivers" in capsys.readouterr().out
    assert len(_rows(tmp_path / "traces.csv")) == 10


def test_simulate_then_replay(tmp_path):
    assert _cli(tmp_path, "simulate", "--config", str(SCENARIOS / "scripted_10.toml")) == EXIT_OK
    assert _cli(tmp_path, "replay", "--log", str(tmp_path / "events.csv")) == EXIT_OK
    assert (tmp_path / "replay_summary.json").read_text() == (tmp_path / "summary.json").read_text()


def test_simulate_batch(tmp_path):
    args = ("simulate", "--config", str(SCENARIOS / "random.toml"), "--runs", "3", "--workers", "1")
    assert _cli(tmp_path, *args) == EXIT_OK
    rows = _rows(tmp_path / "batch.csv")
    assert [r["seed"] for r in rows] == ["1", "2", "3"]


def test_compare_auction_table(tmp_path, capsys):
    assert _cli(tmp_path, "compare-auction", "--theta1", "3", "--theta2", "1", "--phi", "0.5") == EXIT_OK
    (row,) = _rows(tmp_path / "auction.csv")
    assert row["case"] == "first_only"
    assert float(row["payment"]) == 3.0
    assert float(row["travel_time"]) == 1.0
    assert (row["x1"], row["x2"]) == ("1", "0")
    assert float(row["u_auction"]) == 9.0
    assert float(row["u_matching"]) == 4.5
    assert "U_auc=9 U_mat=4.5" in capsys.readouterr().out


def test_compare_auction_no_travel(tmp_path):
    assert _cli(tmp_path, "compare-auction", "--theta1", "1", "--theta2", "3") == EXIT_OK
    (row,) = _rows(tmp_path / "auction.csv")
    assert row["travel_time"] == "no-travel"
    assert float(row["payment"]) == 0.0


def test_compare_auction_workbook(tmp_path):
    args = ("compare-auction", "--theta1", "0.5:4:8", "--theta2", "1", "--xlsx")
    assert _cli(tmp_path, *args) == EXIT_OK
    ws = openpyxl.load_workbook(tmp_path / "auction.xlsx").active
    assert ws.title == "Auction vs Matching"
    assert ws.cell(row=1, column=1).value == "INPUTS"
    assert ws.cell(row=2, column=1).value == "theta1"
    assert ws.max_row == 10


def test_verify_auction_passes(tmp_path):
    assert _cli(tmp_path, "verify", "--property", "auction", "--trials", "50") == EXIT_OK
    assert (tmp_path / "verify_auction.csv").exists()
    assert (tmp_path / "verify_auction.json").exists()


def test_verify_ratio_passes(tmp_path, capsys):
    assert _cli(tmp_path, "verify", "--property", "ratio", "--trials", "1000", "--seed", "1") == EXIT_OK
    assert "ratio: PASS" in capsys.readouterr().out


def test_ratio_experiment(tmp_path):
    args = ("ratio-experiment", "--family", "complete", "--size", "5", "--trials", "10")
    assert _cli(tmp_path, *args) == EXIT_OK
    rows = _rows(tmp_path / "ratio.csv")
    assert len(rows) == 10
    assert all(float(r["ratio"]) == 1.0 for r in rows)


def test_failed_property_exits_one(tmp_path, monkeypatch):
    failing = SuiteResult(name="tolls", passed=False, summary={"failures": 1})
    monkeypatch.setattr(verification_suites, "tolls_suite", lambda seed=0: failing)
    assert _cli(tmp_path, "verify", "--property", "tolls") == EXIT_VIOLATION


@pytest.mark.parametrize(
    "args",
    [
        ("simulate", "--config", "x.toml", "--bogus"),
        ("compare-auction", "--theta1", "a:b", "--theta2", "1"),
        ("verify", "--property", "liveness"),
        (),
    ],
)
def test_usage_errors(tmp_path, args):
    assert _cli(tmp_path, *args) == EXIT_USAGE


def test_missing_config(tmp_path, capsys):
    assert _cli(tmp_path, "simulate", "--config", str(tmp_path / "absent.toml")) == EXIT_USAGE
    assert "scenario config" in capsys.readouterr().err


def test_truncated_replay(tmp_path, capsys):
    log = tmp_path / "events.csv"
    log.write_text("timestep,event_kind,driver,route,value\n0,route,,r1,10.0\n")
    assert _cli(tmp_path, "replay", "--log", str(log)) == EXIT_USAGE
    assert "line 2" in capsys.readouterr().err


def test_output_path_is_a_file(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["--out", str(blocker), "compare-auction", "--theta1", "1", "--theta2", "1"]) == EXIT_USAGE
    assert "output" in capsys.readouterr().err


def test_invalid_phi(tmp_path):
    assert _cli(tmp_path, "compare-auction", "--theta1", "1", "--theta2", "1", "--phi", "1.5") == EXIT_USAGE
