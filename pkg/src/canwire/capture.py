"""Traffic recording, candump-style log I/O, replay, and period inference.

Log line format is candump-compatible: "(<sec.usec>) <channel> <ID>#<DATA>".
Untimed logs omit the parenthesized timestamp; their timings are
reconstructed by infer_periods.
"""
from __future__ import annotations

import re
import statistics
from dataclasses import dataclass

from .bus import VirtualBus
from .frame import CanFrame

REFERENCE_ID = 0x130
REFERENCE_PERIOD_MS = 100.0
KNOWN_PERIODS_MS = (10.0, 100.0, 200.0, 1000.0, 4000.0, 5000.0)
SNAP_TOLERANCE = 0.25
CONFIDENCE_BAND = 0.20

_LINE_RE = re.compile(
    r"^(?:\((?P<ts>\d+\.\d{6})\)\s+)?(?P<chan>\S+)\s+"
    r"(?P<id>[0-9A-Fa-f]{3,8})#(?P<data>(?:[0-9A-Fa-f]{2})*)\s*$")


class LogError(ValueError):
    """Malformed log line or unusable log contents."""


@dataclass(frozen=True)
class LogRecord:
    timestamp: float | None          # seconds, us precision; None = untimed
    channel: str
    can_id: int
    data: bytes


@dataclass(frozen=True)
class PeriodEstimate:
    can_id: int
    period_ms: float | None          # None = one-shot
    sample_count: int
    confidence: float                # deltas within +-20% of the estimate
    snapped: bool


def write_log(records) -> str:
    lines = []
    for r in records:
        prefix = f"({r.timestamp:.6f}) " if r.timestamp is not None else ""
        lines.append(f"{prefix}{r.channel} {r.can_id:03X}#{r.data.hex().upper()}")
    return "\n".join(lines) + ("\n" if lines else "")


def read_log(text: str) -> list[LogRecord]:
    records = []
    last_ts = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        m = _LINE_RE.match(line)
        if m is None:
            raise LogError(f"line {lineno}: malformed log line: {line!r}")
        data = bytes.fromhex(m.group("data"))
        if len(data) > 8:
            raise LogError(f"line {lineno}: payload longer than 8 bytes")
        ts = float(m.group("ts")) if m.group("ts") else None
        if ts is not None and last_ts is not None and ts < last_ts:
            raise LogError(f"line {lineno}: timestamps must be non-decreasing")
        if ts is not None:
            last_ts = ts
        records.append(LogRecord(ts, m.group("chan"),
                                 int(m.group("id"), 16), data))
    return records


def record(bus: VirtualBus, t0_us: int = 0, t1_us: int | None = None) -> list[LogRecord]:
    """One record per frame delivered on the bus within the window."""
    return [LogRecord(e.time / 1e6, bus.name, e.frame.can_id, e.frame.data)
            for e in bus.deliveries(t0_us, t1_us)]


def strip_timestamps(records) -> list[LogRecord]:
    return [LogRecord(None, r.channel, r.can_id, r.data) for r in records]


class _ReplayNode:
    def on_frame(self, t, frame):
        pass


def replay(records, bus: VirtualBus, speed: float = 1.0):
    """Schedule a recorded log back onto a bus as an ordinary node.

    Record times are scaled by 1/speed and offset from the current virtual
    clock. Returns the transmitting port.
    """
    if speed <= 0:
        raise LogError("replay speed must be positive")
    port = bus.attach(_ReplayNode(), name="replay")
    base = bus.scheduler.now
    first = None
    for r in records:
        if r.timestamp is None:
            raise LogError(
                "untimed log: run period inference to reconstruct timings")
        if first is None:
            first = r.timestamp
        due = base + round((r.timestamp - first) * 1e6 / speed)
        frame = CanFrame(r.can_id, r.data)
        bus.scheduler.at(due, lambda now, f=frame: port.submit(f))
    return port


def _snap(period_ms: float) -> tuple[float, bool]:
    best = min(KNOWN_PERIODS_MS, key=lambda p: abs(p - period_ms))
    if abs(best - period_ms) <= SNAP_TOLERANCE * best:
        return best, True
    return period_ms, False


def infer_periods(records, ref_id: int = REFERENCE_ID,
                  ref_period_ms: float = REFERENCE_PERIOD_MS) -> list[PeriodEstimate]:
    """Reconstruct per-id periods from an untimed log.

    The k-th occurrence of the reference id is pinned at k * ref_period;
    records between consecutive anchors are spaced uniformly within the
    interval. Per-id period = median of successive synthetic deltas,
    snapped to the known period set when within 25%.
    """
    records = list(records)
    anchors = [i for i, r in enumerate(records) if r.can_id == ref_id]
    if len(anchors) < 2:
        raise LogError(
            f"reference id 0x{ref_id:03X} must appear at least twice")
    synthetic: dict[int, float] = {}
    for k, idx in enumerate(anchors):
        synthetic[idx] = k * ref_period_ms
    for k in range(len(anchors) - 1):
        lo, hi = anchors[k], anchors[k + 1]
        gap = hi - lo
        for j, idx in enumerate(range(lo + 1, hi), start=1):
            synthetic[idx] = k * ref_period_ms + ref_period_ms * j / gap
    # records before the first / after the last anchor have no bracketing
    # reference interval and are excluded from delta estimation
    by_id: dict[int, list[float]] = {}
    seen: dict[int, int] = {}
    for i, r in enumerate(records):
        seen[r.can_id] = seen.get(r.can_id, 0) + 1
        if i in synthetic:
            by_id.setdefault(r.can_id, []).append(synthetic[i])
    estimates = []
    for can_id in sorted(seen):
        times = by_id.get(can_id, [])
        if seen[can_id] == 1 or len(times) < 2:
            estimates.append(PeriodEstimate(can_id, None, seen[can_id],
                                            1.0, False))
            continue
        deltas = [b - a for a, b in zip(times, times[1:])]
        est = statistics.median(deltas)
        period, snapped = _snap(est)
        confident = sum(1 for d in deltas
                        if abs(d - period) <= CONFIDENCE_BAND * period)
        estimates.append(PeriodEstimate(can_id, period, seen[can_id],
                                        confident / len(deltas), snapped))
    return estimates
