"""Frame codec tests: CRC oracle, stuffing, round trips, arbitration."""
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from canwire.frame import (CanFrame, CrcMismatch, FrameError, FrameFormatError,
                           ProtocolViolation, StuffingViolation,
                           TruncatedFrame, arbitration_winner, crc15,
                           deserialize, frame_bit_length, frame_time,
                           frame_time_us, make_frame, serialize, stuff,
                           unstuff)

# -- independent oracles -------------------------------------------------------

# x^15 + x^14 + x^10 + x^8 + x^7 + x^4 + x^3 + 1, full 16-bit divisor
_POLY_BITS = [1, 1, 0, 0, 0, 1, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1]


def crc15_longdiv(bits):
    """Bitwise GF(2) polynomial long division; independent of the
    shift-register implementation under test."""
    work = list(bits) + [0] * 15
    for i in range(len(bits)):
        if work[i]:
            for j, p in enumerate(_POLY_BITS):
                work[i + j] ^= p
    remainder = work[-15:]
    value = 0
    for b in remainder:
        value = (value << 1) | b
    return value


def max_run_length(bits):
    best = run = 0
    prev = None
    for b in bits:
        run = run + 1 if b == prev else 1
        prev = b
        best = max(best, run)
    return best


def random_frame(rng):
    extended = rng.random() < 0.3
    rtr = rng.random() < 0.1
    can_id = rng.randrange(1 << (29 if extended else 11))
    dlc = rng.randrange(9)
    data = b"" if rtr else bytes(rng.randrange(256) for _ in range(dlc))
    return CanFrame(can_id, data, extended, rtr, dlc)


# -- construction -----------------------------------------------------------

def test_make_frame_table1_speed_row():
    frame = make_frame(0x1A6, bytes(8))
    assert frame.dlc == 8 and not frame.extended


def test_make_frame_minimal():
    assert make_frame(0x000, b"").dlc == 0


def test_make_frame_id_boundary():
    make_frame(0x7FF, b"")
    with pytest.raises(FrameFormatError):
        make_frame(0x800, b"")
    make_frame(0x800, b"", extended=True)
    with pytest.raises(FrameFormatError):
        make_frame(1 << 29, b"", extended=True)


def test_make_frame_data_too_long():
    with pytest.raises(FrameFormatError):
        make_frame(0x100, bytes(9))


def test_rtr_carries_dlc_but_no_data():
    frame = make_frame(0x130, rtr=True, dlc=5)
    assert frame.dlc == 5 and frame.data == b""
    with pytest.raises(FrameFormatError):
        make_frame(0x130, b"\x01", rtr=True)


# -- CRC ------------------------------------------------------------------

def test_crc15_empty():
    assert crc15([]) == 0


def test_crc15_single_one_bit():
    assert crc15([1]) == 0x4599


def test_crc15_matches_long_division_oracle():
    rng = random.Random(7)
    for _ in range(100):
        bits = [rng.randrange(2) for _ in range(rng.randrange(1, 120))]
        assert crc15(bits) == crc15_longdiv(bits)


# -- stuffing ----------------------------------------------------------------

def test_stuff_single_run():
    assert stuff([1, 1, 1, 1, 1]) == [1, 1, 1, 1, 1, 0]


def test_stuff_restarts_run_count():
    assert stuff([0, 0, 0, 0, 0, 0]) == [0, 0, 0, 0, 0, 1, 0]


def test_unstuff_rejects_run_of_six():
    with pytest.raises(StuffingViolation):
        unstuff([0, 0, 0, 0, 0, 0])


@given(st.lists(st.integers(0, 1), max_size=200))
@settings(max_examples=500)
def test_stuff_unstuff_identity(bits):
    assert unstuff(stuff(bits)) == bits


@given(st.lists(st.integers(0, 1), max_size=200))
def test_stuffed_stream_has_no_run_of_six(bits):
    assert max_run_length(stuff(bits)) <= 5


# -- serialization -------------------------------------------------------

def test_unstuffed_standard_frame_length():
    for dlc in range(9):
        frame = CanFrame(0x2AB, bytes(range(dlc)))
        body_and_tail = len(serialize(frame))
        stuffed_region = serialize(frame)[:-10]
        assert len(unstuff(stuffed_region)) + 10 == 44 + 8 * dlc


def test_all_dominant_frame_forces_stuff_bits():
    frame = CanFrame(0x000, b"")
    bits = serialize(frame)
    assert len(bits) > 44  # stuff bits present
    assert max_run_length(bits[:-10]) <= 5


def test_round_trip_random_frames():
    rng = random.Random(42)
    for _ in range(10_000):
        frame = random_frame(rng)
        assert deserialize(serialize(frame)) == frame


def test_single_payload_bit_flips_detected():
    rng = random.Random(3)
    for _ in range(20):
        dlc = rng.randrange(1, 9)
        frame = CanFrame(rng.randrange(1 << 11),
                         bytes(rng.randrange(256) for _ in range(dlc)))
        bits = serialize(frame)
        # payload region: everything stuffed (SOF..CRC); flip each in turn
        stuffed_len = len(bits) - 10
        for i in range(stuffed_len):
            corrupted = list(bits)
            corrupted[i] ^= 1
            with pytest.raises(FrameError):
                deserialize(corrupted)


def test_stuffing_violation_reported_distinctly():
    frame = CanFrame(0x000, b"")
    bits = serialize(frame)
    # SOF + 11 dominant id bits serialize as 00000 1 00000 1 0...
    assert bits[5] == 1
    corrupted = list(bits)
    corrupted[5] = 0
    with pytest.raises(StuffingViolation):
        deserialize(corrupted)


def test_truncated_input_reported_distinctly():
    bits = serialize(CanFrame(0x1A6, bytes(8)))
    with pytest.raises(TruncatedFrame):
        deserialize(bits[:30])


def test_crc_mismatch_reported_distinctly():
    frame = CanFrame(0x555, b"\xAA\x55")
    bits = serialize(frame)
    # flip one bit of a data byte chosen to keep stuffing runs legal
    corrupted = list(bits)
    corrupted[22] ^= 1
    try:
        deserialize(corrupted)
    except CrcMismatch:
        pass
    except FrameError:
        pass  # structural detection also counts; CRC path checked below
    payload_error_seen = False
    for i in range(len(bits) - 10):
        corrupted = list(bits)
        corrupted[i] ^= 1
        try:
            deserialize(corrupted)
        except CrcMismatch:
            payload_error_seen = True
        except FrameError:
            pass
    assert payload_error_seen


# -- arbitration ------------------------------------------------------------

def test_lower_id_wins():
    a, b = CanFrame(0x0A8, bytes(8)), CanFrame(0x1A6, bytes(8))
    assert arbitration_winner(a, b) is a
    assert arbitration_winner(b, a) is a


def test_all_dominant_id_beats_everything():
    zero = CanFrame(0x000, b"")
    rng = random.Random(1)
    for _ in range(50):
        other = random_frame(rng)
        if other.can_id == 0 and not other.extended:
            continue
        assert arbitration_winner(zero, other) is zero


def test_data_frame_beats_remote_frame_same_id():
    data = CanFrame(0x130, bytes(5))
    remote = CanFrame(0x130, rtr=True, dlc=5)
    assert arbitration_winner(data, remote) is data


def test_standard_beats_extended_same_base_id():
    std = CanFrame(0x130, b"")
    ext = CanFrame(0x130 << 18, b"", extended=True)
    assert arbitration_winner(std, ext) is std


def test_identical_arbitration_fields_rejected():
    with pytest.raises(ProtocolViolation):
        arbitration_winner(CanFrame(0x130, b"\x01"), CanFrame(0x130, b"\x02"))


def test_arbitration_total_order_matches_id_order():
    rng = random.Random(9)
    ids = rng.sample(range(1 << 11), 30)
    frames = [CanFrame(i, b"") for i in ids]
    for a in frames:
        for b in frames:
            if a.can_id != b.can_id:
                winner = arbitration_winner(a, b)
                assert winner.can_id == min(a.can_id, b.can_id)


# -- timing ---------------------------------------------------------------

def test_frame_time_definition_at_1mbit():
    frame = CanFrame(0x123, bytes(4))
    k = frame_bit_length(frame)
    assert frame_time_us(frame, 1_000_000) == k


def test_frame_time_130_at_100k_matches_bit_count():
    frame = CanFrame(0x130, bytes(5))
    # independent count: fixed fields + data + oracle-counted stuff bits + IFS
    stuffed_region = serialize(frame)[:-10]
    unstuffed = 44 + 8 * frame.dlc - 10
    stuff_bits = len(stuffed_region) - unstuffed
    bits = unstuffed + stuff_bits + 10 + 3
    assert frame_time_us(frame, 100_000) == bits * 10


def test_frame_time_linear_in_bitrate():
    frame = CanFrame(0x130, bytes(5))
    assert frame_time(frame, 200_000) == pytest.approx(
        frame_time(frame, 100_000) / 2)


def test_frame_time_monotonic_in_dlc():
    times = [frame_time_us(CanFrame(0x1A6, bytes([0xAA] * d)), 100_000)
             for d in range(9)]
    assert times == sorted(times) and len(set(times)) == 9
