"""Property suites behind `verify`: each returns report rows and a pass flag."""

import logging
import math
from typing import Callable, Dict, List

import numpy as np

from tollmatch.schemas.auction import AuctionCase, AuctionScenario
from tollmatch.schemas.route import RouteSpec
from tollmatch.schemas.scenario import ArrivalProcess, PredictorConfig, PredictorMethod, ScenarioConfig, TollConfig
from tollmatch.schemas.report import EventKind, SimEvent, SuiteResult
from tollmatch.services import auction_service, verification_service
from tollmatch.services.matching_service import adversarial_pair_instance, serial_assignment
from tollmatch.services.simulator import run

logger = logging.getLogger(__name__)

RATIO_BOUND = 0.632
EXACT = 1e-12
CHARGE_TOLERANCE = 1e-9


def _children(seed: int, n: int) -> List[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def pareto_suite(instances: int = 200, seed: int = 0) -> SuiteResult:
    rows = []
    for i, rng in enumerate(_children(seed, instances)):
        frozen = verification_service.random_frozen_instance(rng)
        candidate = serial_assignment(frozen)
        verdict = verification_service.pareto_check(frozen, candidate)
        rows.append(
            {
                "instance": i,
                "drivers": len(frozen.drivers),
                "slots": frozen.slot_count,
                "matched": candidate.cardinality,
                "dominated": verdict.dominated,
            }
        )
    counterexamples = sum(r["dominated"] for r in rows)
    return SuiteResult(
        name="pareto",
        passed=counterexamples == 0,
        rows=rows,
        summary={"instances": instances, "counterexamples": counterexamples},
    )


def strategyproof_suite(probes: int = 100, seed: int = 0, controls: int = 10) -> SuiteResult:
    """Deviation sweep over congested probe scenarios.

    Violations are counted, not failed: once every offered route is congested
    a quoted utility is negative, and a driver who under-reports its way out
    of the match keeps 0. The suite fails only when its own controls break:
    a null deviation that changes the outcome, or a lapsed early arrival that
    is not worth exactly 0.
    """
    rows = []
    early_rngs = _children(seed, probes)
    report_rngs = _children(seed + 1, probes)
    for i, rng in enumerate(early_rngs):
        cfg = verification_service.random_probe_scenario(rng)
        driver = cfg.drivers[int(rng.integers(0, len(cfg.drivers)))]
        outcome = verification_service.probe_early_arrival(cfg, driver.id, int(rng.integers(1, 4)))
        rows.append({"probe": i, **outcome.model_dump(mode="json")})
    for i, rng in enumerate(report_rngs):
        cfg = verification_service.random_probe_scenario(rng)
        driver = cfg.drivers[int(rng.integers(0, len(cfg.drivers)))]
        reported = float(rng.uniform(0.0, driver.willingness_to_pay))
        outcome = verification_service.probe_under_report(cfg, driver.id, reported)
        rows.append({"probe": i, **outcome.model_dump(mode="json")})

    broken_controls = 0
    for i, rng in enumerate(_children(seed + 2, controls)):
        cfg = verification_service.random_probe_scenario(rng)
        driver = cfg.drivers[int(rng.integers(0, len(cfg.drivers)))]
        for outcome in (
            verification_service.probe_early_arrival(cfg, driver.id, 0),
            verification_service.probe_under_report(cfg, driver.id, driver.willingness_to_pay),
        ):
            same = outcome.deviating_utility == outcome.truthful_utility
            broken_controls += not same
            rows.append({"probe": f"control-{i}", **outcome.model_dump(mode="json")})

    expiry = verification_service.probe_early_arrival(expiry_scenario(), "late", 3)
    rows.append({"probe": "expiry", **expiry.model_dump(mode="json")})
    expiry_exact = expiry.deviating_utility == 0.0
    violations = sum(not r["verdict"] for r in rows)
    if violations:
        logger.warning(f"{violations}/{len(rows)} deviations beat truthful reporting")
    return SuiteResult(
        name="strategyproof",
        passed=broken_controls == 0 and expiry_exact,
        rows=rows,
        summary={
            "probes": len(rows),
            "violations": violations,
            "negative_truthful": sum(r["truthful_utility"] < 0 for r in rows),
            "broken_controls": broken_controls,
            "expiry_utility_zero": expiry_exact,
        },
    )


def expiry_scenario() -> ScenarioConfig:
    """A driver ready at t=5 with a one-step window: arriving early lets the offer lapse."""
    return ScenarioConfig.model_validate(
        {
            "name": "expiry",
            "horizon": 8,
            "routes": [{"id": "r1", "free_flow_time": 10.0, "threshold_capacity": 5.0, "slot_capacity": 5}],
            "drivers": [{"id": "late", "arrival_time": 5, "willingness_to_pay": 2.0, "deadline_window": 1}],
        }
    )


def ratio_suite(trials: int = 1000, seed: int = 0, size: int = 20, workers: int = 1) -> SuiteResult:
    report = verification_service.measure_ratio("upper_triangular", size, trials, seed, workers=workers)
    adversarial = verification_service.exhaustive_ratio(adversarial_pair_instance())
    complete = verification_service.measure_ratio("complete", min(size, 8), min(trials, 20), seed)
    rows = [{"trial": i, "ratio": r, "greedy_ratio": g} for i, (r, g) in enumerate(zip(report.ratios, report.greedy_ratios))]
    passed = report.mean >= RATIO_BOUND and adversarial == 0.75 and complete.min == 1.0
    return SuiteResult(
        name="ratio",
        passed=passed,
        rows=rows,
        summary={
            "family": report.family,
            "size": size,
            "trials": trials,
            "mean": report.mean,
            "min": report.min,
            "greedy_mean": math.fsum(report.greedy_ratios) / trials,
            "adversarial_exhaustive": adversarial,
            "complete_min": complete.min,
            "bound": RATIO_BOUND,
        },
    )


def _expected_row(case: AuctionCase, theta2: float):
    """Allocation, payment and travel time read straight off the two-driver table."""
    if case is AuctionCase.shared:
        return (1, 1), theta2, 2.0
    if case is AuctionCase.first_only:
        return (1, 0), 3 * theta2, 1.0
    return (0, 1), 0.0, None


def _sample_theta1(rng: np.random.Generator, case: AuctionCase, theta2: float) -> float:
    low, high = {
        AuctionCase.shared: (theta2 / 2, 2 * theta2),
        AuctionCase.first_only: (2 * theta2, 10 * theta2),
        AuctionCase.second_only: (theta2 / 10, theta2 / 2),
    }[case]
    # the closed middle interval owns both endpoints
    edge = {AuctionCase.first_only: low, AuctionCase.second_only: high}.get(case)
    while True:
        theta1 = float(rng.uniform(low, high))
        if theta1 != edge:
            return theta1


def auction_suite(samples: int = 300, seed: int = 0, phi: float = 0.5) -> SuiteResult:
    rng = np.random.default_rng(seed)
    scenario = AuctionScenario(phi=phi)
    points = []
    for case in AuctionCase:
        for _ in range(samples):
            theta2 = float(rng.uniform(0.1, 10.0))
            points.append((case, _sample_theta1(rng, case, theta2), theta2))
    for theta2 in (1.0, 3.0):
        points.append((AuctionCase.shared, theta2 / 2, theta2))
        points.append((AuctionCase.shared, 2 * theta2, theta2))

    rows = []
    for case, theta1, theta2 in points:
        allocation, payment, time = _expected_row(case, theta2)
        row = auction_service.comparison_row(theta1, theta2, scenario)
        ok = (
            row.case is case
            and row.allocation == allocation
            and abs(row.payment - payment) <= EXACT
            and row.travel_time == time
        )
        rows.append({"check": "table", **row.model_dump(mode="json"), "ok": ok})

    for theta in (0.5, 1.0, 2.0, 5.0):
        for t_c in (0.0, 1.0, 2.0, 3.0, 4.0, 5.0):
            for f in (0.1, 0.25, 0.5, 0.9):
                u = auction_service.matching_comparison_utilities(theta, t_c, f)
                ok = abs(u.u_matching - f * u.u_auction) <= EXACT
                rows.append(
                    {
                        "check": "relation",
                        "theta1": theta,
                        "congested_time": t_c,
                        "phi": f,
                        "u_auction": u.u_auction,
                        "u_matching": u.u_matching,
                        "ratio": u.ratio,
                        "gap_sign": (u.u_matching > u.u_auction) - (u.u_matching < u.u_auction),
                        "claim_holds": u.u_auction <= u.u_matching,
                        "ok": ok,
                    }
                )
    failures = sum(not r["ok"] for r in rows)
    return SuiteResult(
        name="auction",
        passed=failures == 0,
        rows=rows,
        summary={
            "points": len(rows),
            "failures": failures,
            "claim_violations": sum(not r["claim_holds"] for r in rows),
        },
    )


def persistence_scenario(seed: int = 0, horizon: int = 500) -> ScenarioConfig:
    return ScenarioConfig(
        name="persistence",
        horizon=horizon,
        routes=[
            RouteSpec(id="r1", free_flow_time=6.0, threshold_capacity=2.0, slot_capacity=6),
            RouteSpec(id="r2", free_flow_time=9.0, threshold_capacity=4.0, slot_capacity=10),
        ],
        toll=TollConfig(beta=0.1, horizon=3, initial_toll=2.0),
        predictor=PredictorConfig(method=PredictorMethod.persistence),
        arrivals=ArrivalProcess(rate=1.5, wtp_min=0.0, wtp_max=3.0, deadline_window_max=3, accept_delay_max=2),
        seed=seed,
    )


def ramp_scenario(horizon: int = 50, beta: float = 0.1, q: int = 3) -> ScenarioConfig:
    ramp = [10.0 + 2.0 * t for t in range(horizon + q)]
    return ScenarioConfig(
        name="ramp",
        horizon=horizon,
        routes=[RouteSpec(id="r1", free_flow_time=5.0, threshold_capacity=10.0, slot_capacity=5, background_flow=ramp)],
        toll=TollConfig(beta=beta, horizon=q),
        predictor=PredictorConfig(method=PredictorMethod.foresight),
    )


def _quoted_charge_rows(cfg: ScenarioConfig, events: List[SimEvent]) -> List[Dict]:
    """Check each quoted charge against the toll and occupancy in force when it was quoted.

    Occupancy only moves at the end of a step, so a quote at t sees the
    snapshot from t-1. With k drivers travelling, k equal shares must add
    back up to the toll above the threshold and be exactly 0 at or below it.
    """
    occupancy = {r.id: 0 for r in cfg.routes}
    settled = dict(occupancy)
    tolls: Dict[str, float] = {}
    step = 0
    rows = []
    for e in events:
        if e.timestep != step:
            settled, step = dict(occupancy), e.timestep
        if e.kind is EventKind.toll:
            tolls[e.route] = e.value
        elif e.kind is EventKind.occupancy:
            occupancy[e.route] = int(e.value)
        elif e.kind is EventKind.assign:
            k, k_f = settled[e.route], cfg.route(e.route).threshold_capacity
            congested = k > k_f
            if congested:
                ok = abs(k * e.value - tolls[e.route]) <= CHARGE_TOLERANCE
            else:
                ok = e.value == 0.0
            rows.append(
                {"check": "distribution", "route": e.route, "step": e.timestep, "occupancy": k, "congested": congested, "ok": ok}
            )
    return rows


def tolls_suite(seed: int = 0) -> SuiteResult:
    rows: List[Dict] = []

    steady_cfg = persistence_scenario(seed)
    steady = run(steady_cfg)
    for rid, trace in steady.report.toll_trace.items():
        rows.append({"check": "persistence", "route": rid, "steps": len(trace), "ok": all(c == trace[0] for c in trace)})

    cfg = ramp_scenario()
    ramp = run(cfg)
    toll = cfg.toll
    flows = cfg.routes[0].background_flow
    trace = ramp.report.toll_trace["r1"]
    previous = toll.initial_toll
    for t, c in enumerate(trace[: cfg.horizon]):
        expected = toll.beta * (flows[t + toll.horizon] - flows[t])
        rows.append({"check": "ramp", "route": "r1", "step": t, "delta": c - previous, "ok": abs(c - previous - expected) <= EXACT})
        previous = c

    rows.extend(_quoted_charge_rows(steady_cfg, steady.events))

    failures = sum(not r["ok"] for r in rows)
    congested = sum(bool(r.get("congested")) for r in rows)
    return SuiteResult(
        name="tolls",
        passed=failures == 0,
        rows=rows,
        summary={"checks": len(rows), "failures": failures, "congested_quotes": congested},
    )


SUITES: Dict[str, Callable[..., SuiteResult]] = {
    "pareto": pareto_suite,
    "strategyproof": strategyproof_suite,
    "ratio": ratio_suite,
    "auction": auction_suite,
    "tolls": tolls_suite,
}
