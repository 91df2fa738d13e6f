"""Instrument cluster ECU: gauges, warning lamps, counter and timeout checks.

The cluster trusts the bus completely (no sender authentication); every
anomaly it can express becomes a ClusterState flag, never a rejection.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .bus import Port, VirtualBus
from .catalog import COUNTER_MODULUS, Catalog
from .frame import CanFrame

SPEED_GAUGE_MAX = 260.0
RPM_GAUGE_MAX = 7000.0
HANDBRAKE_SPEED_THRESHOLD = 5.0     # km/h; above this, handbrake-on warns
DEADLINE_FACTOR = 5                 # timeout = 5 x nominal period
SUPERVISION_PERIOD_US = 10_000
SUPERVISED_MAX_PERIOD_MS = 200      # slower ids are display-only, unsupervised
BATTERY_LOW_VOLTS = 11.0

LAMPS = ("airbag", "abs", "brake", "battery", "seatbelt")

# rest values a gauge falls back to when its feed times out
GAUGE_IDS = (0x0AA, 0x1A6, 0x349, 0x1D0)


@dataclass
class ClusterState:
    """What the cluster face shows: gauge values, lamps, error flags."""

    speed: float = 0.0
    rpm: float = 0.0
    fuel: float | None = None
    engine_temp: float | None = None
    ignition: str = "off"
    vin: str = ""
    clock: tuple | None = None          # (h, m, s, day, month, year)
    lamps: dict = field(default_factory=lambda: {l: False for l in LAMPS})
    counter_errors: frozenset = frozenset()
    timeouts: frozenset = frozenset()

    @property
    def any_flags(self) -> bool:
        return bool(self.counter_errors or self.timeouts)


@dataclass
class SupervisionEntry:
    can_id: int
    period_us: int
    deadline_us: int
    last_seen: int | None = None
    expected_counter: int | None = None
    timed_out: bool = False


class ClusterEcu:
    """Decodes catalog traffic into displayed state with BMW-style checks."""

    def __init__(self, bus: VirtualBus, catalog: Catalog):
        self.bus = bus
        self.catalog = catalog
        self.port: Port = bus.attach(self, name="cluster")
        self._start = bus.scheduler.now
        self._speed = 0.0
        self._rpm = 0.0
        self._fuel: float | None = None
        self._temp: float | None = None
        self._handbrake = False
        self._battery: float | None = None
        self._unbelted = False
        self._ignition = "off"
        self._vin = ""
        self._clock: tuple | None = None
        self._counter_errors: set[int] = set()
        self._timeouts: set[int] = set()
        self.lamps = {l: False for l in LAMPS}
        self.lamp_transitions: list[tuple[int, str, bool]] = []
        self.entries: dict[int, SupervisionEntry] = {}
        for spec in catalog.specs():
            if spec.one_shot or spec.period_ms > SUPERVISED_MAX_PERIOD_MS:
                continue
            period_us = spec.period_ms * 1000
            self.entries[spec.can_id] = SupervisionEntry(
                spec.can_id, period_us, DEADLINE_FACTOR * period_us)
        # periodic self-supervision; fires from the shared event clock
        self._schedule_supervision()

    def _schedule_supervision(self) -> None:
        def tick(now):
            self.supervise(now)
            self.bus.scheduler.after(SUPERVISION_PERIOD_US, tick)
        self.bus.scheduler.after(SUPERVISION_PERIOD_US, tick)

    # -- frame intake -------------------------------------------------------

    def on_frame(self, t: int, frame: CanFrame) -> None:
        if frame.extended or frame.rtr or frame.can_id not in self.catalog:
            return  # id filtering: everything else is silently ignored
        spec = self.catalog.spec(frame.can_id)
        if len(frame.data) != spec.dlc:
            return
        entry = self.entries.get(frame.can_id)
        if entry is not None:
            self._check_counter(entry, frame, spec)
            entry.last_seen = t
            if entry.timed_out:
                entry.timed_out = False
                self._timeouts.discard(frame.can_id)
        self._apply_signals(frame.can_id, frame.data)
        self._update_lamps(t)

    def _check_counter(self, entry: SupervisionEntry, frame: CanFrame,
                       spec) -> None:
        if not spec.counter_protected:
            return
        counter = self.catalog.read_counter(frame.can_id, frame.data)
        resync = entry.last_seen is None or entry.timed_out
        if resync:
            # first frame ever, or first after a gap: accept as new baseline
            self._counter_errors.discard(frame.can_id)
        elif entry.expected_counter is not None \
                and counter != entry.expected_counter:
            self._counter_errors.add(frame.can_id)
        entry.expected_counter = (counter + 1) % COUNTER_MODULUS

    def _apply_signals(self, can_id: int, payload: bytes) -> None:
        values = self.catalog.decode_map(can_id, payload)
        if can_id == 0x1A6:
            self._speed = min(max(values["speed"], 0.0), SPEED_GAUGE_MAX)
        elif can_id == 0x0AA:
            self._rpm = min(max(values["rpm"], 0.0), RPM_GAUGE_MAX)
        elif can_id == 0x349:
            self._fuel = (values["fuel_level_1"] + values["fuel_level_2"]) / 2
        elif can_id == 0x1D0:
            self._temp = values["engine_temp"]
        elif can_id == 0x34F:
            self._handbrake = values["handbrake"]
        elif can_id == 0x3B4:
            self._battery = values["battery"]
        elif can_id == 0x581:
            self._unbelted = values["driver_unbelted"]
        elif can_id == 0x130:
            value = values["ignition"]
            if isinstance(value, str):
                self._ignition = value
        elif can_id == 0x380:
            self._vin = values["vin"]
        elif can_id == 0x39E:
            self._clock = (values["hour"], values["minute"], values["second"],
                           values["day"], values["month"], values["year"])

    # -- supervision ----------------------------------------------------------

    def supervise(self, t: int) -> None:
        """Timeout scan; call at <= 10 ms intervals of virtual time."""
        for entry in self.entries.values():
            if entry.timed_out:
                continue
            reference = entry.last_seen if entry.last_seen is not None \
                else self._start
            if t - reference > entry.deadline_us:
                entry.timed_out = True
                self._timeouts.add(entry.can_id)
                self._gauge_rest(entry.can_id)
        self._update_lamps(t)

    def _gauge_rest(self, can_id: int) -> None:
        if can_id == 0x1A6:
            self._speed = 0.0
        elif can_id == 0x0AA:
            self._rpm = 0.0
        elif can_id == 0x1D0:
            self._temp = None       # needle at the low stop
        # fuel is slow-varying: the gauge holds the last known level

    # -- lamps ------------------------------------------------------------------

    def plausibility(self) -> dict:
        """The single implausibility rule the real cluster exhibited."""
        return {"brake": self._handbrake
                and self._speed > HANDBRAKE_SPEED_THRESHOLD}

    def _lamp_conditions(self) -> dict:
        flags = self._timeouts | self._counter_errors
        lamps = {
            "airbag": 0x0D7 in flags,
            "abs": bool(flags & {0x0C0, 0x19E}),
            "battery": self._battery is not None
            and self._battery < BATTERY_LOW_VOLTS,
            "seatbelt": self._unbelted,
        }
        lamps.update(self.plausibility())
        return lamps

    def _update_lamps(self, t: int) -> None:
        new = self._lamp_conditions()
        for name, on in new.items():
            if on != self.lamps[name]:
                self.lamp_transitions.append((t, name, on))
        self.lamps = new

    # -- output -------------------------------------------------------------------

    def snapshot(self) -> ClusterState:
        """Immutable copy of the displayed state."""
        return ClusterState(
            speed=self._speed, rpm=self._rpm, fuel=self._fuel,
            engine_temp=self._temp, ignition=self._ignition, vin=self._vin,
            clock=self._clock, lamps=dict(self.lamps),
            counter_errors=frozenset(self._counter_errors),
            timeouts=frozenset(self._timeouts))
