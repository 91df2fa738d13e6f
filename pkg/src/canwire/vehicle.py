"""Vehicle simulator ECU: emits the full message schedule from ground truth.

Runs in demo mode (scripted keyframes, linear interpolation for numbers,
step changes for booleans) or manual mode (externally commanded fields).
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .bus import Port, Scheduler, VirtualBus
from .catalog import Catalog, next_counter
from .frame import CanFrame

IGNITION_STATES = ("off", "key_in", "ignition_on", "running")
_IGNITION_RANK = {s: i for i, s in enumerate(IGNITION_STATES)}

# Same-period messages are phased apart by one slot each (id order) so they
# never hit a single arbitration instant in a permanently synchronized burst.
PHASE_SLOT_US = 100


class VehicleError(ValueError):
    """Invalid state change or demo script."""


@dataclass
class VehicleState:
    """Ground truth of the simulated car."""

    ignition: str = "off"
    rpm: float = 0.0
    speed: float = 0.0
    wheel_speeds: tuple | None = None   # defaults to road speed on all four
    throttle: float = 0.0
    fuel: float = 40.0
    engine_temp: float = 20.0
    handbrake: bool = False
    side_lights: bool = False
    low_beam: bool = False
    main_beam: bool = False
    seatbelt: bool = True
    brake_pedal: bool = False
    clutch_pedal: bool = False
    battery: float = 12.6
    torque: float = 0.0
    vin: str = "BAV0001"
    # one-shot clock message epoch
    hour: int = 12
    minute: int = 0
    second: int = 0
    day: int = 1
    month: int = 6
    year: int = 2018

    def validate(self) -> None:
        if self.ignition not in IGNITION_STATES:
            raise VehicleError(f"unknown ignition state {self.ignition!r}")
        if self.rpm != 0 and self.ignition != "running":
            raise VehicleError("rpm must be 0 unless the engine is running")
        if self.speed < 0 or self.fuel < 0:
            raise VehicleError("speed and fuel must be non-negative")


_NUMERIC_FIELDS = {f.name for f in fields(VehicleState)
                   if f.type in ("float", "int")}
_BOOL_FIELDS = {f.name for f in fields(VehicleState) if f.type == "bool"}
_FIELD_NAMES = {f.name for f in fields(VehicleState)}


@dataclass
class Keyframe:
    t_ms: float
    field: str
    value: object


class DemoScript:
    """Keyframe list: linear interpolation for numerics, steps otherwise."""

    def __init__(self, keyframes):
        self._tracks: dict[str, list[tuple[float, object]]] = {}
        for kf in keyframes:
            if kf.field not in _FIELD_NAMES:
                raise VehicleError(f"unknown vehicle field {kf.field!r}")
            self._tracks.setdefault(kf.field, []).append((kf.t_ms, kf.value))
        for name, track in self._tracks.items():
            times = [t for t, _ in track]
            if times != sorted(times) or len(set(times)) != len(times):
                raise VehicleError(
                    f"demo keyframe times for {name!r} must strictly increase")

    @classmethod
    def from_json(cls, rows) -> "DemoScript":
        return cls([Keyframe(r["t_ms"], r["field"], r["value"]) for r in rows])

    def fields(self):
        return self._tracks.keys()

    def value_at(self, name: str, t_ms: float, initial):
        track = self._tracks.get(name)
        if not track:
            return initial
        prev_t, prev_v = None, initial
        for kt, kv in track:
            if kt > t_ms:
                if name in _NUMERIC_FIELDS and prev_t is not None:
                    frac = (t_ms - prev_t) / (kt - prev_t)
                    return prev_v + (kv - prev_v) * frac
                return prev_v
            prev_t, prev_v = kt, kv
        return prev_v


@dataclass
class ScheduleEntry:
    can_id: int
    period_us: int | None
    next_due: int
    counter: int | None = None      # alive counter state, protected ids only


class VehicleEcu:
    """Bus node emitting the catalog schedule from current VehicleState."""

    def __init__(self, bus: VirtualBus, catalog: Catalog,
                 state: VehicleState | None = None, mode: str = "manual",
                 demo_script: DemoScript | None = None):
        self.bus = bus
        self.scheduler = bus.scheduler
        self.catalog = catalog
        self.state = state or VehicleState()
        self.state.validate()
        self.mode = mode
        self.script = demo_script
        if mode == "demo" and demo_script is None:
            raise VehicleError("demo mode needs a demo script")
        self.port: Port = bus.attach(self, name="vehicle")
        self._free_counter = 0
        self._oneshots_fired = False
        self._start = self.scheduler.now
        self.entries: dict[int, ScheduleEntry] = {}
        for index, spec in enumerate(catalog.specs()):
            if spec.one_shot:
                continue
            entry = ScheduleEntry(
                can_id=spec.can_id,
                period_us=spec.period_ms * 1000,
                next_due=self._start + index * PHASE_SLOT_US,
                counter=0 if spec.counter_protected else None)
            self.entries[spec.can_id] = entry
            self.scheduler.at(entry.next_due, self._on_timer)
        self._oneshot_due: dict[int, int] = {}
        if _IGNITION_RANK[self.state.ignition] >= _IGNITION_RANK["ignition_on"]:
            self._fire_oneshots(self._start)

    # -- schedule -------------------------------------------------------------

    def _fire_oneshots(self, now: int) -> None:
        if self._oneshots_fired:
            return
        self._oneshots_fired = True
        specs = self.catalog.specs()
        for index, spec in enumerate(specs):
            if spec.one_shot:
                due = max(now, self._start) + index * PHASE_SLOT_US
                self._oneshot_due[spec.can_id] = due
                self.scheduler.at(due, self._on_timer)

    def _on_timer(self, now: int) -> None:
        self.tick(now)

    def tick(self, now: int) -> list[CanFrame]:
        """Emit every message whose next-due time has been reached."""
        if self.mode == "demo":
            self._apply_script(now)
        emitted = []
        for entry in self.entries.values():
            while entry.next_due <= now:
                emitted.append(self._emit(entry.can_id, entry))
                entry.next_due += entry.period_us
                self.scheduler.at(entry.next_due, self._on_timer)
        for can_id, due in list(self._oneshot_due.items()):
            if due <= now:
                del self._oneshot_due[can_id]
                emitted.append(self._emit(can_id, None))
        return emitted

    def _emit(self, can_id: int, entry: ScheduleEntry | None) -> CanFrame:
        counter = None
        if entry is not None and entry.counter is not None:
            counter = entry.counter
            entry.counter = next_counter(entry.counter)
        payload = self.catalog.encode(can_id, self._signal_values(can_id),
                                      counter=counter)
        frame = CanFrame(can_id, payload)
        self.port.submit(frame)
        return frame

    def _signal_values(self, can_id: int) -> dict:
        s = self.state
        if can_id == 0x0A8:
            return {"torque": s.torque, "brake_pedal": s.brake_pedal,
                    "clutch_pedal": s.clutch_pedal}
        if can_id == 0x0AA:
            return {"rpm": s.rpm, "throttle": s.throttle}
        if can_id == 0x0CE:
            ws = s.wheel_speeds or (s.speed,) * 4
            return {"wheel_fl": ws[0], "wheel_fr": ws[1],
                    "wheel_rl": ws[2], "wheel_rr": ws[3]}
        if can_id in (0x130, 0x26E):
            return {"ignition": s.ignition}
        if can_id == 0x19E:
            self._free_counter = (self._free_counter + 1) & 0xFF
            return {"free_counter": self._free_counter}
        if can_id == 0x1A6:
            return {"speed": s.speed}
        if can_id == 0x1D0:
            return {"engine_temp": s.engine_temp,
                    "handbrake_mirror": s.handbrake}
        if can_id == 0x21A:
            return {"side_lights": s.side_lights, "low_beam": s.low_beam,
                    "main_beam": s.main_beam}
        if can_id == 0x349:
            return {"fuel_level_1": s.fuel, "fuel_level_2": s.fuel}
        if can_id == 0x34F:
            return {"handbrake": s.handbrake}
        if can_id == 0x380:
            return {"vin": s.vin}
        if can_id == 0x39E:
            return {"hour": s.hour, "minute": s.minute, "second": s.second,
                    "day": s.day, "month": s.month, "year": s.year}
        if can_id == 0x3B4:
            return {"battery": s.battery}
        if can_id == 0x581:
            return {"driver_unbelted": not s.seatbelt}
        return {}   # 0x335 and the counter-only ids are constant payloads

    # -- state control ----------------------------------------------------------

    def set_state(self, field_name: str, value) -> None:
        """Manual-mode command (the software analogue of a panel switch)."""
        if self.mode != "manual":
            raise VehicleError("set_state requires manual mode")
        self._set_field(field_name, value)

    def _set_field(self, field_name: str, value) -> None:
        if field_name not in _FIELD_NAMES:
            raise VehicleError(f"unknown vehicle field {field_name!r}")
        candidate = replace(self.state)
        setattr(candidate, field_name, value)
        candidate.validate()
        # range checks ride on the catalog at encode time; check eagerly for
        # the gauge-bearing numerics so bad commands fail at the command.
        self._probe_encode(candidate, field_name)
        old_ignition = self.state.ignition
        setattr(self.state, field_name, value)
        if field_name == "ignition":
            self._ignition_changed(old_ignition, value)

    def _probe_encode(self, candidate: VehicleState, field_name: str) -> None:
        probes = {"speed": (0x1A6, "speed"), "rpm": (0x0AA, "rpm"),
                  "throttle": (0x0AA, "throttle"), "fuel": (0x349, "fuel_level_1"),
                  "engine_temp": (0x1D0, "engine_temp"),
                  "battery": (0x3B4, "battery"), "torque": (0x0A8, "torque"),
                  "vin": (0x380, "vin")}
        if field_name in probes:
            can_id, signal = probes[field_name]
            self.catalog.encode(can_id, {signal: getattr(candidate, field_name)})

    def _ignition_changed(self, old: str, new: str) -> None:
        if new == "off":
            self._oneshots_fired = False   # next ignition cycle re-arms them
        elif (_IGNITION_RANK[new] >= _IGNITION_RANK["ignition_on"]
              and _IGNITION_RANK[old] < _IGNITION_RANK["ignition_on"]):
            self._fire_oneshots(self.scheduler.now)

    def run_demo(self, script: DemoScript) -> None:
        self.mode = "demo"
        self.script = script

    def _apply_script(self, now: int) -> None:
        t_ms = (now - self._start) / 1000.0
        for name in self.script.fields():
            value = self.script.value_at(name, t_ms, getattr(self.state, name))
            if getattr(self.state, name) != value:
                old_ignition = self.state.ignition
                setattr(self.state, name, value)
                if name == "ignition":
                    self._ignition_changed(old_ignition, value)

    # the vehicle transmits only; incoming traffic is ignored
    def on_frame(self, t: int, frame: CanFrame) -> None:
        pass
