"""CSV event log: writing, parsing and summarising.

One record per line: ``timestep,event_kind,driver,route,value``. Values are
written with ``repr`` so floats survive the round trip bit for bit, and the
log closes with an ``end`` record holding the number of records before it.
"""

import csv
import io
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

from tollmatch.schemas.report import EventKind, MetricsReport, SimEvent
from tollmatch.services.core_model import driver_utility

logger = logging.getLogger(__name__)

HEADER = ["timestep", "event_kind", "driver", "route", "value"]


class EventLogError(Exception):
    """Raised for a malformed or truncated event log; carries the line number."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


def close_log(events: List[SimEvent], timestep: int) -> None:
    events.append(SimEvent(timestep=timestep, kind=EventKind.end, value=float(len(events))))


def dumps_events(events: Iterable[SimEvent]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(HEADER)
    for e in events:
        writer.writerow([e.timestep, e.kind.value, e.driver, e.route, repr(float(e.value))])
    return buffer.getvalue()


def parse_events(lines: Iterable[str]) -> List[SimEvent]:
    reader = csv.reader(lines)
    events: List[SimEvent] = []
    line_no = 0
    ended = False
    for line_no, row in enumerate(reader, start=1):
        if line_no == 1:
            if row != HEADER:
                raise EventLogError(1, f"expected header {','.join(HEADER)}")
            continue
        if ended:
            raise EventLogError(line_no, "record after the end marker")
        if len(row) != len(HEADER):
            raise EventLogError(line_no, f"expected {len(HEADER)} fields, got {len(row)}")
        try:
            event = SimEvent(
                timestep=int(row[0]), kind=EventKind(row[1]), driver=row[2], route=row[3], value=float(row[4])
            )
        except ValueError as exc:
            raise EventLogError(line_no, f"bad field ({exc.__class__.__name__}): {row}") from exc
        if event.kind is EventKind.end:
            if int(event.value) != len(events):
                raise EventLogError(line_no, f"end marker counts {int(event.value)} records, found {len(events)}")
            ended = True
        events.append(event)
    if line_no == 0:
        raise EventLogError(1, "empty log")
    if not ended:
        raise EventLogError(line_no, "log truncated: no end record")
    return events


def read_events(path: Union[str, Path]) -> List[SimEvent]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_events(fh)


def summarize(events: Sequence[SimEvent]) -> MetricsReport:
    """Metrics from the log alone; the simulator uses this same fold."""
    free_flow: Dict[str, float] = {}
    quoted_charge: Dict[str, float] = {}
    quoted_time: Dict[str, float] = {}
    quoted_route: Dict[str, str] = {}
    report = MetricsReport()
    last_t = -1

    for e in events:
        last_t = max(last_t, e.timestep)
        kind = e.kind
        if kind is EventKind.route:
            free_flow[e.route] = e.value
            for trace in (report.toll_trace, report.occupancy_trace, report.flow_trace, report.cost_trace):
                trace.setdefault(e.route, [])
        elif kind is EventKind.flow:
            report.flow_trace[e.route].append(e.value)
        elif kind is EventKind.toll:
            report.toll_trace[e.route].append(e.value)
        elif kind is EventKind.assign:
            report.total_drivers += 1
            quoted_charge[e.driver] = e.value
            quoted_route[e.driver] = e.route
        elif kind is EventKind.quote:
            quoted_time[e.driver] = e.value
        elif kind is EventKind.unmatched:
            report.total_drivers += 1
            report.unmatched += 1
        elif kind is EventKind.accept:
            report.matched += 1
            report.tolls_collected += e.value
            route = quoted_route[e.driver]
            report.welfare += driver_utility(free_flow[route], quoted_time[e.driver], quoted_charge[e.driver])
        elif kind is EventKind.expire:
            report.expired += 1
        elif kind is EventKind.penalty:
            report.penalized += 1
            report.penalties_collected += e.value
        elif kind is EventKind.complete:
            report.completed += 1
        elif kind is EventKind.occupancy:
            report.occupancy_trace[e.route].append(int(e.value))
        elif kind is EventKind.cost:
            report.cost_trace[e.route].append(e.value)
            report.total_route_cost += e.value

    # the end marker shares the last step's timestep
    report.timesteps = last_t + 1 if any(e.kind is EventKind.occupancy for e in events) else 0
    return report
