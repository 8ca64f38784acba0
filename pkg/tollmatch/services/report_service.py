import csv
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import openpyxl
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter
from pydantic import BaseModel

from tollmatch.schemas.auction import AuctionComparisonRow
from tollmatch.schemas.report import MetricsReport, SimEvent, SuiteResult
from tollmatch.services.event_log import dumps_events

logger = logging.getLogger(__name__)

# Workbook styling
HEADER_FILL_COLOR = "4F81BD"
BAND_COLORS = {"auction": "C0504D", "matching": "9BBB59", "comparison": "8064A2"}
LIGHT_COLORS = {"auction": "F2DCDB", "matching": "EBF1DE", "comparison": "E4DFEC"}

AUCTION_COLUMNS: List[tuple] = [
    ("inputs", "theta1", "theta1"),
    ("inputs", "theta2", "theta2"),
    ("inputs", "phi", "phi"),
    ("auction", "case", "case"),
    ("auction", "x1", None),
    ("auction", "x2", None),
    ("auction", "payment", "payment"),
    ("auction", "travel_time", "travel_time"),
    ("auction", "utility_eq3", "utility_eq3"),
    ("matching", "m1", None),
    ("matching", "m2", None),
    ("matching", "payment", "matching_payment"),
    ("comparison", "t_c", "congested_time"),
    ("comparison", "u_auction", "u_auction"),
    ("comparison", "u_matching", "u_matching"),
    ("comparison", "ratio", "ratio"),
    ("comparison", "gap_sign", "gap_sign"),
    ("comparison", "claim_holds", "claim_holds"),
]


class OutputError(Exception):
    """Raised when an output file cannot be written."""


def auction_csv_row(row: AuctionComparisonRow) -> List[Any]:
    values: List[Any] = []
    for _, header, field in AUCTION_COLUMNS:
        if header in ("x1", "x2"):
            values.append(row.allocation[int(header[1]) - 1])
        elif header in ("m1", "m2"):
            values.append(row.matching_allocation[int(header[1]) - 1])
        else:
            value = getattr(row, field)
            if header == "travel_time" and value is None:
                value = "no-travel"
            values.append(getattr(value, "value", value))
    return values


class ReportWriter:
    """Writes run and verification outputs under one directory, each file atomically."""

    def __init__(self, output_dir: Union[str, Path]) -> None:
        self.output_dir = Path(output_dir)
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"Cannot create output directory {self.output_dir}: {exc.strerror}") from exc

    def _replace(self, name: str, write) -> Path:
        target = self.output_dir / name
        tmp = None
        try:
            fd, tmp = tempfile.mkstemp(dir=self.output_dir, prefix=f".{name}.", suffix=".tmp")
            os.close(fd)
            write(tmp)
            os.replace(tmp, target)
        except OSError as exc:
            raise OutputError(f"Cannot write {target}: {exc.strerror}") from exc
        finally:
            if tmp is not None and os.path.exists(tmp):
                os.unlink(tmp)
        logger.info(f"Wrote {target}")
        return target

    def write_text(self, name: str, text: str) -> Path:
        def write(tmp: str) -> None:
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)

        return self._replace(name, write)

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return self.write_text(name, buffer.getvalue())

    def write_records(self, name: str, records: Sequence[Dict[str, Any]]) -> Path:
        """CSV from dict rows; the header is the union of keys in first-seen order."""
        header: List[str] = []
        for record in records:
            header.extend(k for k in record if k not in header)
        return self.write_csv(name, header, ([record.get(k, "") for k in header] for record in records))

    def write_json(self, name: str, model: BaseModel) -> Path:
        return self.write_text(name, model.model_dump_json(indent=2) + "\n")

    def write_event_log(self, name: str, events: Sequence[SimEvent]) -> Path:
        return self.write_text(name, dumps_events(events))

    def write_traces(self, name: str, report: MetricsReport) -> Path:
        rows = []
        for route, tolls in report.toll_trace.items():
            for t, toll in enumerate(tolls):
                rows.append(
                    [
                        t,
                        route,
                        repr(report.flow_trace[route][t]),
                        repr(toll),
                        report.occupancy_trace[route][t],
                        repr(report.cost_trace[route][t]),
                    ]
                )
        rows.sort(key=lambda r: r[0])
        return self.write_csv(name, ["timestep", "route", "flow", "toll", "occupancy", "route_cost"], rows)

    def write_suite(self, result: SuiteResult) -> Path:
        return self.write_records(f"verify_{result.name}.csv", result.rows)

    def write_auction_table(self, name: str, rows: Sequence[AuctionComparisonRow]) -> Path:
        return self.write_csv(name, [h for _, h, _ in AUCTION_COLUMNS], (auction_csv_row(r) for r in rows))

    def write_auction_workbook(self, name: str, rows: Sequence[AuctionComparisonRow]) -> Path:
        wb = openpyxl.Workbook()
        ws = wb.active
        ws.title = "Auction vs Matching"

        # Row 1: band headers, one merged block per column group
        col = 1
        for band in ("inputs", "auction", "matching", "comparison"):
            width = sum(1 for b, _, _ in AUCTION_COLUMNS if b == band)
            ws.merge_cells(start_row=1, start_column=col, end_row=1, end_column=col + width - 1)
            cell = ws.cell(row=1, column=col, value=band.upper())
            cell.font = Font(bold=True, size=12, color="FFFFFF")
            cell.fill = PatternFill("solid", fgColor=BAND_COLORS.get(band, HEADER_FILL_COLOR))
            cell.alignment = Alignment(horizontal="center")
            col += width

        ws.append([h for _, h, _ in AUCTION_COLUMNS])
        for col_num, (band, _, _) in enumerate(AUCTION_COLUMNS, 1):
            cell = ws.cell(row=2, column=col_num)
            cell.border = Border(bottom=Side(style="thick"))
            cell.alignment = Alignment(horizontal="center")
            if band in LIGHT_COLORS:
                cell.font = Font(bold=True)
                cell.fill = PatternFill("solid", fgColor=LIGHT_COLORS[band])
            else:
                cell.font = Font(bold=True, color="FFFFFF")
                cell.fill = PatternFill("solid", fgColor=HEADER_FILL_COLOR)

        for row in rows:
            ws.append(auction_csv_row(row))
        self._set_border(ws, f"A1:{get_column_letter(len(AUCTION_COLUMNS))}{len(rows) + 2}")

        return self._replace(name, wb.save)

    def _set_border(self, ws, cell_range: str) -> None:
        thin = Side(border_style="thin", color="000000")
        for row in ws[cell_range]:
            for cell in row:
                cell.border = Border(top=thin, left=thin, right=thin, bottom=thin)
