"""Deterministic discrete-event CAN bus segment.

Virtual time is integer microseconds. A shared Scheduler can drive several
bus segments (the rogue bridges two); exactly one context steps the clock,
and node callbacks run synchronously inside run_until.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .frame import (CanFrame, ProtocolViolation, arbitration_bits,
                    frame_time_us)

DEFAULT_BITRATE = 100_000
DEFAULT_QUEUE_DEPTH = 64


class Timer:
    """Handle for a scheduled callback; cancel() makes it a no-op."""

    __slots__ = ("cancelled",)

    def __init__(self):
        self.cancelled = False

    def cancel(self):
        self.cancelled = True


class Scheduler:
    """Event queue over a monotone integer-microsecond clock."""

    def __init__(self):
        self.now = 0
        self._heap: list = []
        self._seq = itertools.count()

    def at(self, t_us: int, fn) -> Timer:
        if t_us < self.now:
            raise ValueError(f"cannot schedule at {t_us} before now {self.now}")
        timer = Timer()
        heapq.heappush(self._heap, (t_us, next(self._seq), fn, timer))
        return timer

    def after(self, dt_us: int, fn) -> Timer:
        return self.at(self.now + dt_us, fn)

    def run_until(self, t_us: int) -> None:
        """Process all events with time <= t_us; clock ends at exactly t_us."""
        if t_us < self.now:
            raise ValueError(f"cannot run backwards to {t_us} from {self.now}")
        while self._heap and self._heap[0][0] <= t_us:
            when, _, fn, timer = heapq.heappop(self._heap)
            self.now = when
            if not timer.cancelled:
                fn(when)
        self.now = t_us


@dataclass
class BusEvent:
    time: int                     # us
    kind: str                     # frame-delivered | arbitration-resolved
    #                             # | bus-idle | overflow
    frame: CanFrame | None = None
    port: "Port | None" = None


class Port:
    """One node's attachment point: pending TX queue plus RX callback."""

    _ids = itertools.count()

    def __init__(self, bus: "VirtualBus", node, name: str):
        self.bus = bus
        self.node = node
        self.name = name
        self.index = next(Port._ids)
        self.queue: list[CanFrame] = []
        self.attached = True
        self.submitted = 0
        self.overflowed = 0

    def submit(self, frame: CanFrame, replace_same_id: bool = False) -> bool:
        return self.bus.submit(self, frame, replace_same_id=replace_same_id)

    def __repr__(self):
        return f"<Port {self.name}@{self.bus.name}>"


class VirtualBus:
    """One CAN segment: idle detection, arbitration, timed broadcast."""

    def __init__(self, scheduler: Scheduler, bitrate: int = DEFAULT_BITRATE,
                 queue_depth: int = DEFAULT_QUEUE_DEPTH, name: str = "vcan0"):
        if bitrate <= 0:
            raise ValueError("bitrate must be positive")
        self.scheduler = scheduler
        self.bitrate = bitrate
        self.queue_depth = queue_depth
        self.name = name
        self.ports: list[Port] = []
        self.busy = False
        self.events: list[BusEvent] = []
        self.busy_intervals: list[tuple[int, int]] = []
        self.delivered = 0
        self._event_cursor = 0

    # -- attachment ---------------------------------------------------------

    def attach(self, node, name: str | None = None) -> Port:
        port = Port(self, node, name or f"node{len(self.ports)}")
        self.ports.append(port)
        return port

    def detach(self, port: Port) -> None:
        port.attached = False
        self.ports = [p for p in self.ports if p is not port]

    # -- transmit path ------------------------------------------------------

    def submit(self, port: Port, frame: CanFrame,
               replace_same_id: bool = False) -> bool:
        """Queue a frame for transmission at the next won arbitration.

        Returns False (and records an overflow event) if the port queue is
        full -- the observable DoS starvation condition. With
        replace_same_id, a pending frame with the same id is overwritten in
        place (latest-value gateway semantics).
        """
        port.submitted += 1
        if replace_same_id:
            for i, pending in enumerate(port.queue):
                if pending.can_id == frame.can_id:
                    port.queue[i] = frame
                    return True
        if len(port.queue) >= self.queue_depth:
            port.overflowed += 1
            self.events.append(BusEvent(self.scheduler.now, "overflow",
                                        frame, port))
            return False
        port.queue.append(frame)
        if not self.busy:
            self.scheduler.at(self.scheduler.now, self._try_start)
        return True

    def _contenders(self) -> list[Port]:
        return [p for p in self.ports if p.queue]

    def _try_start(self, t: int) -> None:
        if self.busy:
            return
        contenders = self._contenders()
        if not contenders:
            return
        keyed = sorted(contenders,
                       key=lambda p: (arbitration_bits(p.queue[0]), p.index))
        winner = keyed[0]
        if len(keyed) > 1 and (arbitration_bits(keyed[0].queue[0])
                               == arbitration_bits(keyed[1].queue[0])):
            raise ProtocolViolation(
                f"ports {keyed[0].name} and {keyed[1].name} transmitted "
                f"identical arbitration fields "
                f"(id 0x{winner.queue[0].can_id:X}) at t={t}us")
        frame = winner.queue.pop(0)
        if len(contenders) > 1:
            self.events.append(BusEvent(t, "arbitration-resolved",
                                        frame, winner))
        duration = frame_time_us(frame, self.bitrate)
        self.busy = True
        self.busy_intervals.append((t, t + duration))
        self.scheduler.at(
            t + duration, lambda now: self._complete(now, frame, winner))

    def _complete(self, t: int, frame: CanFrame, sender: Port) -> None:
        self.busy = False
        self.delivered += 1
        self.events.append(BusEvent(t, "frame-delivered", frame, sender))
        for port in list(self.ports):
            if port is not sender and port.attached:
                port.node.on_frame(t, frame)
        on_sent = getattr(sender.node, "on_sent", None)
        if on_sent is not None and sender.attached:
            on_sent(t, frame)
        if self._contenders():
            self._try_start(t)
        else:
            self.events.append(BusEvent(t, "bus-idle", None, None))

    # -- driving & measurement ----------------------------------------------

    def run_until(self, t_us: int) -> list[BusEvent]:
        """Advance the shared clock to t_us; returns this bus's new events."""
        self.scheduler.run_until(t_us)
        new = self.events[self._event_cursor:]
        self._event_cursor = len(self.events)
        return new

    def deliveries(self, t0: int = 0, t1: int | None = None) -> list[BusEvent]:
        t1 = self.scheduler.now if t1 is None else t1
        return [e for e in self.events
                if e.kind == "frame-delivered" and t0 <= e.time <= t1]

    def utilization(self, t0: int, t1: int) -> float:
        """Fraction of [t0, t1] during which a frame occupied the wire."""
        if t1 <= t0:
            raise ValueError("empty utilization window")
        busy = 0
        for start, end in self.busy_intervals:
            lo, hi = max(start, t0), min(end, t1)
            if hi > lo:
                busy += hi - lo
        return busy / (t1 - t0)
