"""Rogue MITM tests: pass-through, modify, block, inject, flood."""
import pytest

from canwire.bus import Scheduler, VirtualBus
from canwire.catalog import catalog
from canwire.frame import CanFrame
from canwire.rogue import AttackRule, RogueDevice, RuleError

CAT = catalog()


class Sink:
    def __init__(self):
        self.rx = []

    def on_frame(self, t, frame):
        self.rx.append((t, frame))


def build():
    sched = Scheduler()
    up = VirtualBus(sched, name="vcan0")
    down = VirtualBus(sched, name="vcan1")
    vehicle_tx = up.attach(Sink(), "vehicle")
    up_sink = Sink()
    up.attach(up_sink, "up-sink")
    down_sink = Sink()
    down.attach(down_sink, "cluster")
    rogue = RogueDevice(up, down, CAT)
    return sched, up, down, vehicle_tx, up_sink, down_sink, rogue


def ids_of(sink):
    return [f.can_id for _, f in sink.rx]


# -- configuration ------------------------------------------------------------

def test_same_segment_bridge_rejected():
    sched = Scheduler()
    bus = VirtualBus(sched)
    with pytest.raises(RuleError):
        RogueDevice(bus, bus, CAT)


def test_duplicate_rule_rejected():
    *_, rogue = build()
    with pytest.raises(RuleError):
        rogue.configure([AttackRule(0x1A6, "block"),
                         AttackRule(0x1A6, "pass")])


def test_unknown_action_rejected():
    *_, rogue = build()
    with pytest.raises(RuleError):
        rogue.configure([AttackRule(0x1A6, "mangle")])


def test_modify_rule_validates_signal_names():
    *_, rogue = build()
    with pytest.raises(Exception):
        rogue.configure([AttackRule(0x1A6, "modify", {"altitude": 5})])


def test_inject_rule_needs_frame_and_period():
    *_, rogue = build()
    with pytest.raises(RuleError):
        rogue.configure([AttackRule(0x700, "inject")])


def test_bad_rule_set_leaves_old_rules_in_place():
    *_, rogue = build()
    rogue.configure([AttackRule(0x0D7, "block")])
    with pytest.raises(RuleError):
        rogue.configure([AttackRule(0x1A6, "block"),
                         AttackRule(0x1A6, "block")])
    assert set(rogue.rules) == {0x0D7}


def test_set_attack_range_checks():
    *_, rogue = build()
    with pytest.raises(RuleError):
        rogue.set_attack(speed_override=300)
    with pytest.raises(RuleError):
        rogue.set_attack(rpm_override=-1)


# -- forwarding ---------------------------------------------------------------

def test_transparent_forwarding_preserves_frames():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    frame = CanFrame(0x1A6, CAT.encode(0x1A6, {"speed": 77}))
    tx.submit(frame)
    up.run_until(50_000)
    assert [f for _, f in down_sink.rx] == [frame]


def test_forwarding_adds_one_frame_time_of_latency():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    frame = CanFrame(0x130, CAT.encode(0x130, {"ignition": "running"}))
    tx.submit(frame)
    up.run_until(100_000)
    t_up = up_sink.rx[0][0]
    t_down = down_sink.rx[0][0]
    assert t_down > t_up
    assert t_down - t_up < 2_000   # under 2 ms at 100 kbit/s


def test_reverse_direction_passes_through():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    cluster_tx = down.attach(Sink(), "cluster-tx")
    frame = CanFrame(0x700, b"\x01")
    cluster_tx.submit(frame)
    down.run_until(50_000)
    assert [f for _, f in up_sink.rx] == [frame]


# -- modify -------------------------------------------------------------------

def test_modify_rewrites_targeted_signal():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    rogue.configure([AttackRule(0x1A6, "modify", {"speed": 260})])
    tx.submit(CanFrame(0x1A6, CAT.encode(0x1A6, {"speed": 30})))
    up.run_until(50_000)
    forged = down_sink.rx[0][1]
    assert CAT.decode_map(0x1A6, forged.data)["speed"] == 260.0


def test_modify_leaves_other_bytes_untouched():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    rogue.configure([AttackRule(0x1A6, "modify", {"speed": 100})])
    original = bytearray(CAT.encode(0x1A6, {"speed": 55}))
    original[5] = 0xA7    # unrelated marker byte
    tx.submit(CanFrame(0x1A6, bytes(original)))
    up.run_until(50_000)
    assert down_sink.rx[0][1].data[5] == 0xA7


def test_modify_preserves_alive_counter():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    rogue.configure([AttackRule(0x0C0, "modify", {})])
    for c in (4, 5, 6):
        tx.submit(CanFrame(0x0C0, CAT.encode(0x0C0, {}, counter=c)))
    up.run_until(100_000)
    seen = [CAT.read_counter(0x0C0, f.data) for _, f in down_sink.rx]
    assert seen == [4, 5, 6]


def test_modify_only_affects_its_id():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    rogue.configure([AttackRule(0x1A6, "modify", {"speed": 0})])
    rpm_frame = CanFrame(0x0AA, CAT.encode(0x0AA, {"rpm": 3000}))
    tx.submit(rpm_frame)
    up.run_until(50_000)
    assert down_sink.rx[0][1] == rpm_frame


# -- block --------------------------------------------------------------------

def test_block_drops_matching_id_only():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    rogue.configure([AttackRule(0x0D7, "block")])
    tx.submit(CanFrame(0x0D7, CAT.encode(0x0D7, {}, counter=0)))
    tx.submit(CanFrame(0x1A6, CAT.encode(0x1A6, {"speed": 10})))
    up.run_until(100_000)
    assert ids_of(down_sink) == [0x1A6]
    assert rogue.blocked == 1


def test_set_attack_abs_blocks_both_abs_ids():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    rogue.set_attack(abs_disabled=True)
    tx.submit(CanFrame(0x0C0, CAT.encode(0x0C0, {}, counter=0)))
    tx.submit(CanFrame(0x19E, CAT.encode(0x19E, {})))
    tx.submit(CanFrame(0x130, CAT.encode(0x130, {})))
    up.run_until(100_000)
    assert ids_of(down_sink) == [0x130]


# -- inject ---------------------------------------------------------------------

def test_inject_emits_periodically():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    forged = CanFrame(0x1A6, CAT.encode(0x1A6, {"speed": 250}))
    rogue.configure([AttackRule(0x1A6, "inject", frame=forged, period_ms=100)])
    down.run_until(1_000_000)
    injected = [f for _, f in down_sink.rx if f.can_id == 0x1A6]
    assert 9 <= len(injected) <= 11
    assert all(f == forged for f in injected)


def test_reconfigure_stops_old_injection():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    forged = CanFrame(0x1A6, CAT.encode(0x1A6, {"speed": 250}))
    rogue.configure([AttackRule(0x1A6, "inject", frame=forged, period_ms=100)])
    down.run_until(450_000)
    before = len(down_sink.rx)
    rogue.configure([])
    down.run_until(2_000_000)
    assert len(down_sink.rx) == before


# -- flood ----------------------------------------------------------------------

def test_flood_saturates_downstream_segment():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    rogue.flood(True)
    down.run_until(1_000_000)
    assert down.utilization(100_000, 1_000_000) == pytest.approx(1.0)
    assert all(i == 0x000 for i in ids_of(down_sink))


def test_flood_starves_forwarded_traffic():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    rogue.flood(True)
    down.run_until(100_000)
    for _ in range(5):
        tx.submit(CanFrame(0x1A6, CAT.encode(0x1A6, {"speed": 60})))
    up.run_until(2_000_000)
    assert 0x1A6 not in ids_of(down_sink)


def test_flood_stop_releases_the_bus():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    rogue.flood(True)
    down.run_until(500_000)
    rogue.flood(False)
    down.run_until(1_000_000)
    tx.submit(CanFrame(0x1A6, CAT.encode(0x1A6, {"speed": 60})))
    up.run_until(1_500_000)
    assert 0x1A6 in ids_of(down_sink)


def test_flood_does_not_echo_back_upstream():
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    rogue.flood(True)
    down.run_until(500_000)
    assert 0x000 not in ids_of(up_sink)


def test_latest_value_forwarding_under_flood():
    # queued stale frames are replaced, so the last pre-flood value and the
    # unbroken counter sequence survive to flood end
    sched, up, down, tx, up_sink, down_sink, rogue = build()
    rogue.flood(True)
    down.run_until(100_000)
    for speed in (10, 20, 30):
        tx.submit(CanFrame(0x1A6, CAT.encode(0x1A6, {"speed": speed})))
        up.run_until(sched.now + 10_000)
    rogue.flood(False)
    down.run_until(sched.now + 200_000)
    speeds = [CAT.decode_map(0x1A6, f.data)["speed"]
              for _, f in down_sink.rx if f.can_id == 0x1A6]
    assert speeds == [30.0]
