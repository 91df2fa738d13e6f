"""Scenario files: initial state, scheduled actions, timed assertions.

JSON with a versioned schema (docs/scenario-schema.md). Assertions are a
small closed predicate vocabulary, evaluated against cluster snapshots at
their scheduled virtual times.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .testbed import Testbed, TestbedConfig
from .vehicle import DemoScript, VehicleState

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Scenario file fails schema validation."""


@dataclass
class Action:
    t_ms: float
    verb: str
    args: dict


@dataclass
class Assertion:
    t_ms: float
    check: str
    args: list


@dataclass
class AssertionResult:
    assertion: Assertion
    passed: bool
    detail: str


@dataclass
class Scenario:
    bitrate: int
    duration_ms: float
    mitm: bool
    initial_state: VehicleState
    mode: str
    demo_script: DemoScript | None
    actions: list[Action]
    assertions: list[Assertion]

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        if not isinstance(doc, dict):
            raise ScenarioError("scenario must be a JSON object")
        if doc.get("version") != SCHEMA_VERSION:
            raise ScenarioError(
                f"unsupported scenario version {doc.get('version')!r}")
        duration = doc.get("duration_ms", 10_000)
        if not isinstance(duration, (int, float)) or duration <= 0:
            raise ScenarioError("duration_ms must be positive")
        vehicle = doc.get("vehicle", {})
        try:
            initial = VehicleState(**vehicle.get("initial", {}))
            initial.validate()
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad initial vehicle state: {exc}") from exc
        mode = vehicle.get("mode", "manual")
        if mode not in ("manual", "demo"):
            raise ScenarioError(f"unknown vehicle mode {mode!r}")
        script = None
        if "demo_script" in vehicle:
            try:
                script = DemoScript.from_json(vehicle["demo_script"])
            except (TypeError, KeyError, ValueError) as exc:
                raise ScenarioError(f"bad demo script: {exc}") from exc
        actions = []
        for row in doc.get("actions", []):
            try:
                actions.append(Action(row["t_ms"], row["verb"],
                                      row.get("args", {})))
            except (TypeError, KeyError) as exc:
                raise ScenarioError(f"bad action {row!r}") from exc
        assertions = []
        for row in doc.get("assertions", []):
            try:
                assertions.append(Assertion(row["t_ms"], row["check"],
                                            row.get("args", [])))
            except (TypeError, KeyError) as exc:
                raise ScenarioError(f"bad assertion {row!r}") from exc
        for item in actions + assertions:
            if not 0 <= item.t_ms <= duration:
                raise ScenarioError(
                    f"time {item.t_ms} ms outside run duration {duration} ms")
        return cls(
            bitrate=doc.get("bitrate", 100_000),
            duration_ms=duration,
            mitm=doc.get("mitm", True),
            initial_state=initial,
            mode=mode,
            demo_script=script,
            actions=sorted(actions, key=lambda a: a.t_ms),
            assertions=sorted(assertions, key=lambda a: a.t_ms),
        )

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            doc = json.loads(open(path, encoding="utf-8").read())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def build(self) -> Testbed:
        return Testbed(TestbedConfig(
            bitrate=self.bitrate, mitm=self.mitm,
            initial_state=self.initial_state, mode=self.mode,
            demo_script=self.demo_script))


# -- assertion predicates ------------------------------------------------------

def _check(testbed: Testbed, assertion: Assertion) -> AssertionResult:
    snap = testbed.cluster.snapshot()
    name, args = assertion.check, assertion.args
    if name == "lamp_on" or name == "lamp_off":
        lamp = args[0]
        want = name == "lamp_on"
        got = snap.lamps[lamp]
        return AssertionResult(assertion, got == want,
                               f"lamp {lamp} is {'on' if got else 'off'}")
    if name == "displayed_speed_eq":
        return AssertionResult(assertion, snap.speed == args[0],
                               f"displayed speed {snap.speed}")
    if name == "displayed_rpm_eq":
        return AssertionResult(assertion, snap.rpm == args[0],
                               f"displayed rpm {snap.rpm}")
    if name == "flag_set":
        kind, hex_id = args
        flags = snap.timeouts if kind == "timeout" else snap.counter_errors
        got = int(hex_id, 16) in flags
        return AssertionResult(assertion, got,
                               f"{kind} flags {sorted(flags)}")
    if name == "no_flags":
        return AssertionResult(assertion, not snap.any_flags,
                               f"timeouts={sorted(snap.timeouts)} "
                               f"counter_errors={sorted(snap.counter_errors)}")
    if name == "utilization_ge":
        threshold, window_ms = args
        t1 = testbed.now_us
        t0 = max(0, t1 - round(window_ms * 1000))
        value = testbed.cluster_bus.utilization(t0, t1)
        return AssertionResult(assertion, value >= threshold,
                               f"utilization {value:.4f}")
    raise ScenarioError(f"unknown assertion predicate {name!r}")


def run_scenario(scenario: Scenario) -> tuple[Testbed, list[AssertionResult]]:
    """Run unpaced; actions apply at their times, assertions are evaluated."""
    testbed = scenario.build()
    results: list[AssertionResult] = []
    timeline = ([("action", a.t_ms, a) for a in scenario.actions]
                + [("assert", a.t_ms, a) for a in scenario.assertions])
    timeline.sort(key=lambda item: item[1])
    for kind, t_ms, item in timeline:
        testbed.run_until(round(t_ms * 1000))
        if kind == "action":
            testbed.apply_command(item.verb, item.args)
        else:
            results.append(_check(testbed, item))
    testbed.run_until(round(scenario.duration_ms * 1000))
    return testbed, results
