"""Command-line front end: simulate, replay, verify, compare-auction, ratio-experiment.

Exit codes: 0 success, 1 a checked property failed, 2 bad usage, config or output.
"""

import argparse
import logging
import sys
from typing import List, Optional, Sequence

import numpy as np

from tollmatch.config.settings import settings
from tollmatch.schemas.auction import AuctionScenario
from tollmatch.schemas.report import SuiteResult
from tollmatch.services import auction_service, verification_suites
from tollmatch.services.event_log import EventLogError, read_events, summarize
from tollmatch.services.report_service import OutputError, ReportWriter
from tollmatch.services.simulator import ScenarioConfigError, load_scenario, run, run_batch
from tollmatch.services.verification_service import FAMILIES, InstanceTooLargeError, measure_ratio

logger = logging.getLogger("tollmatch")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def parse_range(text: str) -> List[float]:
    """A single value, or `start:stop:count` for an evenly spaced grid."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) == 3:
            count = int(parts[2])
            if count < 1:
                raise ValueError
            return [float(x) for x in np.linspace(float(parts[0]), float(parts[1]), count)]
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected a number or start:stop:count, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tollmatch", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default=settings.log_level, help="logging level (default from TOLLMATCH_LOG_LEVEL)")
    parser.add_argument("--out", default=settings.output_dir, help="output directory (default from TOLLMATCH_OUT)")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and write its event log and metrics")
    sim.add_argument("--config", required=True, help="scenario file (.toml or .json)")
    sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sim.add_argument("--runs", type=int, default=1, help="independent runs with seeds seed..seed+runs-1")
    sim.add_argument("--workers", type=int, default=settings.workers)

    rep = sub.add_parser("replay", help="recompute the metrics summary from an event log")
    rep.add_argument("--log", required=True, help="event log CSV written by simulate")

    ver = sub.add_parser("verify", help="run a property suite")
    ver.add_argument("--property", required=True, choices=[*verification_suites.SUITES, "all"])
    ver.add_argument("--trials", type=int, default=None, help="instances, probes or trials (suite default if omitted)")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--workers", type=int, default=settings.workers)

    auc = sub.add_parser("compare-auction", help="two-driver auction against the matching charge")
    auc.add_argument("--theta1", type=parse_range, required=True)
    auc.add_argument("--theta2", type=parse_range, required=True)
    auc.add_argument("--phi", type=float, default=0.5)
    auc.add_argument("--free-time", type=float, default=4.0)
    auc.add_argument("--xlsx", action="store_true", help="also write an Excel workbook")

    rat = sub.add_parser("ratio-experiment", help="RANKING cardinality against the offline optimum")
    rat.add_argument("--family", choices=FAMILIES, default="upper_triangular")
    rat.add_argument("--size", type=int, default=20)
    rat.add_argument("--trials", type=int, default=1000)
    rat.add_argument("--seed", type=int, default=0)
    rat.add_argument("--density", type=float, default=0.3)
    rat.add_argument("--workers", type=int, default=settings.workers)
    return parser


def cmd_simulate(args: argparse.Namespace, writer: ReportWriter) -> int:
    cfg = load_scenario(args.config)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    if args.runs > 1:
        seeds = [cfg.seed + i for i in range(args.runs)]
        reports = run_batch(cfg, seeds, args.workers)
        writer.write_csv(
            "batch.csv",
            ["run", "seed", "welfare", "total_route_cost", "tolls_collected", "penalties_collected", "matched", "unmatched", "expired"],
            (
                [i, s, repr(r.welfare), repr(r.total_route_cost), repr(r.tolls_collected), repr(r.penalties_collected), r.matched, r.unmatched, r.expired]
                for i, (s, r) in enumerate(zip(seeds, reports))
            ),
        )
        print(f"{len(reports)} runs of {cfg.name}: mean welfare {np.mean([r.welfare for r in reports]):.6f}")
        return EXIT_OK

    result = run(cfg)
    writer.write_event_log("events.csv", result.events)
    writer.write_traces("traces.csv", result.report)
    writer.write_records("outcomes.csv", [o.model_dump(mode="json") for o in result.outcomes.values()])
    writer.write_json("summary.json", result.report)
    r = result.report
    print(
        f"{cfg.name}: {r.total_drivers} drivers, {r.matched} matched, {r.unmatched} unmatched, {r.expired} expired; "
        f"welfare {r.welfare:.6f}, tolls {r.tolls_collected:.6f}, penalties {r.penalties_collected:.6f}"
    )
    return EXIT_OK


def cmd_replay(args: argparse.Namespace, writer: ReportWriter) -> int:
    report = summarize(read_events(args.log))
    writer.write_json("replay_summary.json", report)
    print(f"replayed {args.log}: {report.timesteps} steps, welfare {report.welfare:.6f}")
    return EXIT_OK


def _run_suite(name: str, args: argparse.Namespace) -> SuiteResult:
    if name == "pareto":
        return verification_suites.pareto_suite(args.trials or 200, args.seed)
    if name == "strategyproof":
        return verification_suites.strategyproof_suite(args.trials or 100, args.seed)
    if name == "ratio":
        return verification_suites.ratio_suite(args.trials or 1000, args.seed, workers=args.workers)
    if name == "auction":
        return verification_suites.auction_suite(args.trials or 300, args.seed)
    return verification_suites.tolls_suite(args.seed)


def cmd_verify(args: argparse.Namespace, writer: ReportWriter) -> int:
    names = list(verification_suites.SUITES) if args.property == "all" else [args.property]
    failed = []
    for name in names:
        result = _run_suite(name, args)
        writer.write_suite(result)
        writer.write_json(f"verify_{name}.json", result.model_copy(update={"rows": []}))
        print(f"{name}: {'PASS' if result.passed else 'FAIL'} {result.summary}")
        if not result.passed:
            failed.append(name)
    if failed:
        logger.error(f"Property violated: {', '.join(failed)}")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_compare_auction(args: argparse.Namespace, writer: ReportWriter) -> int:
    scenario = AuctionScenario(phi=args.phi, free_time=args.free_time)
    rows = auction_service.comparison_table(args.theta1, args.theta2, scenario)
    writer.write_auction_table("auction.csv", rows)
    if args.xlsx:
        writer.write_auction_workbook("auction.xlsx", rows)
    for row in rows:
        time = "no-travel" if row.travel_time is None else row.travel_time
        print(
            f"theta=({row.theta1:g}, {row.theta2:g}) {row.case.value}: x={row.allocation} p1={row.payment:g} "
            f"t1={time} U_auc={row.u_auction:g} U_mat={row.u_matching:g}"
        )
    return EXIT_OK


def cmd_ratio_experiment(args: argparse.Namespace, writer: ReportWriter) -> int:
    report = measure_ratio(args.family, args.size, args.trials, args.seed, workers=args.workers, density=args.density)
    writer.write_csv(
        "ratio.csv",
        ["trial", "ratio", "greedy_ratio"],
        ([i, repr(r), repr(g)] for i, (r, g) in enumerate(zip(report.ratios, report.greedy_ratios))),
    )
    writer.write_json("ratio.json", report)
    print(f"{args.family} {args.size}x{args.size}, {args.trials} trials: mean {report.mean:.4f}, min {report.min:.4f}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "replay": cmd_replay,
    "verify": cmd_verify,
    "compare-auction": cmd_compare_auction,
    "ratio-experiment": cmd_ratio_experiment,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        writer = ReportWriter(args.out)
        return COMMANDS[args.command](args, writer)
    except ScenarioConfigError as exc:
        print(f"error: scenario config: {exc}", file=sys.stderr)
    except EventLogError as exc:
        print(f"error: event log: {exc}", file=sys.stderr)
    except OutputError as exc:
        print(f"error: output: {exc}", file=sys.stderr)
    except InstanceTooLargeError as exc:
        print(f"error: instance too large: {exc}", file=sys.stderr)
    except ValueError as exc:
        print(f"error: invalid argument: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: cannot read input: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
