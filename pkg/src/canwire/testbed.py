"""Wires the whole bench together: buses, vehicle, cluster, optional rogue.

The testbed owns the single simulation context. Everything external
(scenario actions, control-plane commands) funnels through apply_command,
which runs between event steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .bus import DEFAULT_BITRATE, Scheduler, VirtualBus
from .catalog import Catalog, catalog as default_catalog
from .cluster import ClusterEcu
from .rogue import RogueDevice
from .vehicle import DemoScript, VehicleEcu, VehicleState


class CommandError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class TestbedConfig:
    __test__ = False    # not a pytest collection target

    bitrate: int = DEFAULT_BITRATE
    mitm: bool = True
    initial_state: VehicleState = field(default_factory=VehicleState)
    mode: str = "manual"
    demo_script: DemoScript | None = None


class Testbed:
    __test__ = False    # not a pytest collection target

    def __init__(self, config: TestbedConfig | None = None,
                 cat: Catalog | None = None):
        self.config = config or TestbedConfig()
        self.catalog = cat or default_catalog()
        self.scheduler = Scheduler()
        self.vehicle_bus = VirtualBus(self.scheduler, self.config.bitrate,
                                      name="vcan0")
        if self.config.mitm:
            self.cluster_bus = VirtualBus(self.scheduler, self.config.bitrate,
                                          name="vcan1")
            self.rogue: RogueDevice | None = RogueDevice(
                self.vehicle_bus, self.cluster_bus, self.catalog)
        else:
            self.cluster_bus = self.vehicle_bus
            self.rogue = None
        self.vehicle = VehicleEcu(self.vehicle_bus, self.catalog,
                                  self.config.initial_state,
                                  mode=self.config.mode,
                                  demo_script=self.config.demo_script)
        self.cluster = ClusterEcu(self.cluster_bus, self.catalog)
        # attacker-facing override state, recompiled on every change
        self.speed_override: float | None = None
        self.rpm_override: float | None = None
        self.airbag_disabled = False
        self.abs_disabled = False
        self.flood_on = False

    @property
    def now_us(self) -> int:
        return self.scheduler.now

    def run_until(self, t_us: int) -> None:
        self.scheduler.run_until(t_us)

    def run_for(self, dt_us: int) -> None:
        self.scheduler.run_until(self.scheduler.now + dt_us)

    # -- command surface (shared by scenario actions and the control plane) --

    def _require_rogue(self) -> RogueDevice:
        if self.rogue is None:
            raise CommandError("no_rogue",
                               "scenario has no man-in-the-middle device")
        return self.rogue

    def _recompile_attack(self) -> None:
        self._require_rogue().set_attack(
            speed_override=self.speed_override,
            rpm_override=self.rpm_override,
            airbag_disabled=self.airbag_disabled,
            abs_disabled=self.abs_disabled)

    _OVERRIDE_FIELDS = ("speed_override", "rpm_override", "airbag_disabled",
                        "abs_disabled", "flood_on")

    def apply_command(self, verb: str, args: dict) -> None:
        saved = {name: getattr(self, name) for name in self._OVERRIDE_FIELDS}
        try:
            self._apply(verb, args)
        except Exception as exc:
            # a rejected command must leave no trace in the override state
            for name, value in saved.items():
                setattr(self, name, value)
            if isinstance(exc, CommandError):
                raise
            if isinstance(exc, (TypeError, KeyError)):
                raise CommandError("bad_argument", str(exc)) from exc
            if isinstance(exc, ValueError):
                raise CommandError("out_of_range", str(exc)) from exc
            raise

    def _apply(self, verb: str, args: dict) -> None:
        if verb == "set_speed_override":
            self.speed_override = args["value"]
            self._recompile_attack()
        elif verb == "set_rpm_override":
            self.rpm_override = args["value"]
            self._recompile_attack()
        elif verb == "set_airbag_disabled":
            self.airbag_disabled = bool(args["value"])
            self._recompile_attack()
        elif verb == "set_abs_disabled":
            self.abs_disabled = bool(args["value"])
            self._recompile_attack()
        elif verb == "clear_overrides":
            self.speed_override = None
            self.rpm_override = None
            self.airbag_disabled = False
            self.abs_disabled = False
            self._recompile_attack()
        elif verb == "set_flood":
            self.flood_on = bool(args["value"])
            self._require_rogue().flood(self.flood_on)
        elif verb == "vehicle_set":
            self.vehicle.set_state(args["field"], args["value"])
        else:
            raise CommandError("unknown_verb", f"unknown verb {verb!r}")

    # -- telemetry ------------------------------------------------------------

    def telemetry(self) -> dict:
        s = self.vehicle.state
        snap = self.cluster.snapshot()
        window = 1_000_000
        t1 = self.now_us
        t0 = max(0, t1 - window)
        utilization = (self.cluster_bus.utilization(t0, t1) if t1 > t0 else 0.0)
        return {
            "sim_time_us": self.now_us,
            "vehicle": {
                "speed": s.speed, "rpm": s.rpm, "fuel": s.fuel,
                "handbrake": s.handbrake, "ignition": s.ignition,
                "lights": {"side": s.side_lights, "low": s.low_beam,
                           "main": s.main_beam},
            },
            "cluster": {
                "speed": snap.speed, "rpm": snap.rpm, "fuel": snap.fuel,
                "engine_temp": snap.engine_temp,
                "lamps": dict(snap.lamps),
                "counter_errors": [f"{i:03X}" for i in sorted(snap.counter_errors)],
                "timeouts": [f"{i:03X}" for i in sorted(snap.timeouts)],
            },
            "rogue": {
                "present": self.rogue is not None,
                "speed_override": self.speed_override,
                "rpm_override": self.rpm_override,
                "airbag_disabled": self.airbag_disabled,
                "abs_disabled": self.abs_disabled,
                "flood": self.flood_on,
                "rules": [
                    {"id": f"{r.can_id:03X}", "action": r.action,
                     "signals": dict(r.signals)}
                    for r in (self.rogue.rules.values() if self.rogue else [])],
            },
            "utilization": utilization,
        }
