"""Command-line entry point: run, serve, record, replay, infer.

Exit codes: 0 pass, 1 assertion/runtime failure, 2 usage/parse error,
3 environment (e.g. endpoint bind failure).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .capture import (LogError, infer_periods, read_log, record, replay,
                      write_log)
from .catalog import catalog
from .cluster import ClusterEcu
from .bus import Scheduler, VirtualBus
from .scenario import Scenario, ScenarioError, run_scenario

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_ENVIRONMENT = 3

log = logging.getLogger("canwire")


def _setup_logging() -> None:
    level = os.environ.get("CANWIRE_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _load_scenario(path: str) -> Scenario:
    if not os.path.exists(path):
        print(f"error: scenario file not found: {path}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    try:
        return Scenario.load(path)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario)
    testbed, results = run_scenario(scenario)
    width = max([len(r.assertion.check) for r in results], default=10)
    failures = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        if not r.passed:
            failures += 1
        print(f"[{status}] t={r.assertion.t_ms:>8.1f}ms "
              f"{r.assertion.check:<{width}} {r.assertion.args} -- {r.detail}")
    snap = testbed.cluster.snapshot()
    print(f"final: speed={snap.speed} rpm={snap.rpm} lamps="
          f"{[k for k, v in snap.lamps.items() if v] or 'none'}")
    print(f"{len(results) - failures}/{len(results)} assertions passed")
    return EXIT_OK if failures == 0 else EXIT_FAILURE


def cmd_serve(args) -> int:
    scenario = _load_scenario(args.scenario)
    host, _, port = args.endpoint.rpartition(":")
    try:
        port = int(port)
    except ValueError:
        print(f"error: bad endpoint {args.endpoint!r}", file=sys.stderr)
        return EXIT_USAGE
    from .control import serve  # imported lazily: pulls in fastapi/uvicorn
    try:
        serve(scenario, host=host or "127.0.0.1", port=port,
              time_scale=args.time_scale)
    except OSError as exc:
        print(f"error: cannot bind {args.endpoint}: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    return EXIT_OK


def cmd_record(args) -> int:
    scenario = _load_scenario(args.scenario)
    testbed = scenario.build()
    duration_us = round(args.duration * 1e6)
    testbed.run_until(duration_us)
    records = record(testbed.cluster_bus, 0, duration_us)
    text = write_log(records)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"{len(records)} frames recorded to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        records = read_log(open(args.log, encoding="utf-8").read())
    except (OSError, LogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    scheduler = Scheduler()
    bus = VirtualBus(scheduler, name="vcan0")
    cluster = ClusterEcu(bus, catalog())
    try:
        replay(records, bus, speed=args.speed)
    except LogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if records:
        span = records[-1].timestamp - records[0].timestamp
        # short settle so in-flight frames land without tripping the
        # cluster's post-log silence timeouts
        bus.run_until(round(span * 1e6 / args.speed) + 20_000)
    snap = cluster.snapshot()
    print(f"replayed {len(records)} frames; final speed={snap.speed} "
          f"rpm={snap.rpm} lamps={[k for k, v in snap.lamps.items() if v] or 'none'}")
    return EXIT_OK


def cmd_infer(args) -> int:
    try:
        records = read_log(open(args.log, encoding="utf-8").read())
        estimates = infer_periods(records)
    except (OSError, LogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"{'ID':>5}  {'PERIOD':>10}  {'SAMPLES':>7}  {'CONF':>5}")
    for e in estimates:
        period = "once" if e.period_ms is None else (
            f"{e.period_ms:.0f} ms" if e.snapped else f"~{e.period_ms:.1f} ms")
        print(f"{e.can_id:>05X}  {period:>10}  {e.sample_count:>7}  "
              f"{e.confidence:>5.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canwire",
        description="Software CAN-bus security testbed (vehicle simulator, "
                    "instrument cluster, man-in-the-middle rogue device)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario unpaced and check assertions")
    p.add_argument("scenario", help="scenario JSON file")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("serve", help="paced live simulation with control plane")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--endpoint", default="127.0.0.1:3090")
    p.add_argument("--time-scale", type=float, default=1.0)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("record", help="run a scenario and write a candump log")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--duration", type=float, default=10.0, help="seconds")
    p.add_argument("--out", help="output log file (default stdout)")
    p.set_defaults(fn=cmd_record)

    p = sub.add_parser("replay", help="replay a candump log into a fresh cluster")
    p.add_argument("log", help="candump log file")
    p.add_argument("--speed", type=float, default=1.0)
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("infer", help="infer message periods from an untimed log")
    p.add_argument("log", help="candump log file (untimed lines allowed)")
    p.set_defaults(fn=cmd_infer)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
