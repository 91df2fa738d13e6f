"""Rogue man-in-the-middle device bridging two bus segments.

Store-and-forward: a frame is fully received from the vehicle-side segment,
the matching attack rule is applied, and the result (if any) is submitted on
the cluster-side segment. Rules: pass, modify signals, block, inject, flood.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .bus import VirtualBus
from .catalog import Catalog
from .cluster import RPM_GAUGE_MAX, SPEED_GAUGE_MAX
from .frame import CanFrame

FLOOD_ID = 0x000
FLOOD_PAYLOAD = bytes(8)
ABS_IDS = (0x0C0, 0x19E)        # both ABS-related rows are blocked together
AIRBAG_ID = 0x0D7
SPEED_ID = 0x1A6
WHEEL_SPEED_ID = 0x0CE
RPM_ID = 0x0AA


class RuleError(ValueError):
    """Malformed attack rule set, rejected at configure time."""


@dataclass(frozen=True)
class AttackRule:
    """One per-id behavior; ids without a rule pass through unchanged."""

    can_id: int
    action: str                          # pass | modify | block | inject
    signals: dict = field(default_factory=dict)   # modify: name -> forged value
    frame: CanFrame | None = None        # inject only
    period_ms: int | None = None         # inject only


class _SegmentNode:
    def __init__(self, on_frame, on_sent=None):
        self._on_frame = on_frame
        self._on_sent = on_sent

    def on_frame(self, t, frame):
        self._on_frame(t, frame)

    def on_sent(self, t, frame):
        if self._on_sent is not None:
            self._on_sent(t, frame)


class RogueDevice:
    """Bridges upstream (vehicle side) to downstream (cluster side)."""

    def __init__(self, upstream: VirtualBus, downstream: VirtualBus,
                 catalog: Catalog):
        if upstream is downstream:
            raise RuleError("bridge ports must be on distinct bus segments")
        self.catalog = catalog
        self.scheduler = upstream.scheduler
        self.upstream_port = upstream.attach(
            _SegmentNode(self.on_upstream_frame), name="rogue-up")
        self.downstream_port = downstream.attach(
            _SegmentNode(self.on_downstream_frame), name="rogue-down")
        # flooding transmits from its own port so the flood frame and the
        # forwarded traffic genuinely compete in arbitration
        self.flood_port = downstream.attach(
            _SegmentNode(lambda t, f: None, self._on_flood_sent),
            name="rogue-flood")
        self.rules: dict[int, AttackRule] = {}
        self.flood_active = False
        self.flood_frame = CanFrame(FLOOD_ID, FLOOD_PAYLOAD)
        self._inject_timers: list = []
        self.forwarded = 0
        self.blocked = 0

    # -- rule management ------------------------------------------------------

    def configure(self, rules) -> None:
        """Atomically replace the rule set; rejects bad rules untouched."""
        validated: dict[int, AttackRule] = {}
        for rule in rules:
            if rule.can_id in validated:
                raise RuleError(f"duplicate rule for id 0x{rule.can_id:03X}")
            if rule.action not in ("pass", "modify", "block", "inject"):
                raise RuleError(f"unknown action {rule.action!r}")
            if rule.action == "modify":
                spec = self.catalog.spec(rule.can_id)  # raises on unknown id
                probe = bytearray(spec.fill)
                for name, value in rule.signals.items():
                    # validates both the signal name and the forged value
                    self.catalog.set_signal(rule.can_id, bytes(probe),
                                            name, value)
            if rule.action == "inject":
                if rule.frame is None or rule.period_ms is None \
                        or rule.period_ms <= 0:
                    raise RuleError("inject rule needs a frame and a period")
            validated[rule.can_id] = rule
        for timer in self._inject_timers:
            timer.cancel()
        self._inject_timers = []
        self.rules = validated
        for rule in validated.values():
            if rule.action == "inject":
                self._arm_inject(rule)

    def _arm_inject(self, rule: AttackRule) -> None:
        period_us = rule.period_ms * 1000

        def fire(now):
            self.downstream_port.submit(rule.frame, replace_same_id=True)
            self._inject_timers.append(self.scheduler.after(period_us, fire))

        self._inject_timers.append(self.scheduler.after(period_us, fire))

    def set_attack(self, speed_override: float | None = None,
                   rpm_override: float | None = None,
                   airbag_disabled: bool = False,
                   abs_disabled: bool = False) -> None:
        """Compile the console-level attack switches into a rule set."""
        if speed_override is not None \
                and not 0 <= speed_override <= SPEED_GAUGE_MAX:
            raise RuleError(
                f"speed override {speed_override} outside 0..{SPEED_GAUGE_MAX}")
        if rpm_override is not None and not 0 <= rpm_override <= RPM_GAUGE_MAX:
            raise RuleError(
                f"rpm override {rpm_override} outside 0..{RPM_GAUGE_MAX}")
        rules = []
        if speed_override is not None:
            rules.append(AttackRule(SPEED_ID, "modify",
                                    {"speed": speed_override}))
            # keep the wheel speeds consistent with the forged road speed
            rules.append(AttackRule(WHEEL_SPEED_ID, "modify", {
                name: speed_override
                for name in ("wheel_fl", "wheel_fr", "wheel_rl", "wheel_rr")}))
        if rpm_override is not None:
            rules.append(AttackRule(RPM_ID, "modify", {"rpm": rpm_override}))
        if airbag_disabled:
            rules.append(AttackRule(AIRBAG_ID, "block"))
        if abs_disabled:
            rules.extend(AttackRule(i, "block") for i in ABS_IDS)
        self.configure(rules)

    def flood(self, active: bool, can_id: int = FLOOD_ID,
              payload: bytes = FLOOD_PAYLOAD) -> None:
        """Saturate the downstream segment with a top-priority frame."""
        self.flood_frame = CanFrame(can_id, payload)
        was_active = self.flood_active
        self.flood_active = active
        if active and not was_active:
            # keep two queued so the bus never sees an idle gap
            self.flood_port.submit(self.flood_frame)
            self.flood_port.submit(self.flood_frame)

    def _on_flood_sent(self, t: int, frame: CanFrame) -> None:
        if self.flood_active:
            self.flood_port.submit(self.flood_frame)

    # -- forwarding -----------------------------------------------------------

    def on_upstream_frame(self, t: int, frame: CanFrame) -> None:
        rule = self.rules.get(frame.can_id)
        if rule is None or rule.action in ("pass", "inject"):
            out = frame
        elif rule.action == "block":
            self.blocked += 1
            return
        else:  # modify: rewrite only the targeted signals, bit-preserving
            payload = frame.data
            for name, value in rule.signals.items():
                payload = self.catalog.set_signal(frame.can_id, payload,
                                                  name, value)
            out = CanFrame(frame.can_id, payload, frame.extended, frame.rtr)
        self.forwarded += 1
        # latest-value forwarding: under saturation the pending copy of an id
        # is overwritten instead of queueing stale history behind the flood
        self.downstream_port.submit(out, replace_same_id=True)

    def on_downstream_frame(self, t: int, frame: CanFrame) -> None:
        # reverse direction is pass-through only
        if frame.can_id == self.flood_frame.can_id and self.flood_active:
            return
        self.upstream_port.submit(frame, replace_same_id=True)
