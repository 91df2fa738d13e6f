"""CAN 2.0 frame codec: bit-level serialization, CRC-15, stuffing, arbitration.

Everything here is pure and operates on immutable values; bits are plain
ints (dominant == 0, recessive == 1) in lists/tuples.
"""
from __future__ import annotations

from dataclasses import dataclass

DOMINANT = 0
RECESSIVE = 1

CRC15_POLY = 0x4599  # x^15 + x^14 + x^10 + x^8 + x^7 + x^4 + x^3 + 1
MAX_STD_ID = (1 << 11) - 1
MAX_EXT_ID = (1 << 29) - 1
MAX_DLC = 8
INTERFRAME_BITS = 3

# CRC delimiter, ACK slot, ACK delimiter, 7-bit EOF. The ACK slot is sent
# recessive and assumed acknowledged; none of the tail is stuffed.
_TAIL = (RECESSIVE,) * 10


class FrameError(ValueError):
    """Base class for frame construction and codec errors."""


class FrameFormatError(FrameError):
    """Structurally invalid frame or bit stream (bad id, dlc, field value)."""


class StuffingViolation(FrameError):
    """Six consecutive identical bits inside the stuffed region."""


class CrcMismatch(FrameError):
    """Received CRC sequence does not match the recomputed CRC-15."""


class TruncatedFrame(FrameError):
    """Bit stream ended before the frame was complete."""


class ProtocolViolation(FrameError):
    """Two nodes transmitted identical arbitration fields (illegal on CAN)."""


@dataclass(frozen=True)
class CanFrame:
    """One CAN 2.0 message: identifier, format/RTR flags and 0-8 data bytes."""

    can_id: int
    data: bytes = b""
    extended: bool = False
    rtr: bool = False
    dlc: int | None = None  # defaults to len(data); RTR frames may differ

    def __post_init__(self):
        limit = MAX_EXT_ID if self.extended else MAX_STD_ID
        kind = "extended" if self.extended else "standard"
        if not 0 <= self.can_id <= limit:
            raise FrameFormatError(
                f"{kind} id 0x{self.can_id:X} out of range (max 0x{limit:X})")
        object.__setattr__(self, "data", bytes(self.data))
        if self.rtr:
            if self.data:
                raise FrameFormatError("RTR frames carry no data bytes")
            dlc = 0 if self.dlc is None else self.dlc
        else:
            dlc = len(self.data) if self.dlc is None else self.dlc
            if dlc != len(self.data):
                raise FrameFormatError(
                    f"dlc {dlc} does not match data length {len(self.data)}")
        if not 0 <= dlc <= MAX_DLC:
            raise FrameFormatError(f"dlc {dlc} out of range (0-{MAX_DLC})")
        object.__setattr__(self, "dlc", dlc)


def make_frame(can_id: int, data: bytes = b"", extended: bool = False,
               rtr: bool = False, dlc: int | None = None) -> CanFrame:
    """Build and validate a CanFrame."""
    return CanFrame(can_id, data, extended, rtr, dlc)


def _int_bits(value: int, width: int) -> list[int]:
    return [(value >> i) & 1 for i in range(width - 1, -1, -1)]


def _bits_int(bits) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | b
    return value


def crc15(bits) -> int:
    """CAN CRC-15 over a bit sequence, initial register 0."""
    crc = 0
    for bit in bits:
        feedback = bit ^ ((crc >> 14) & 1)
        crc = (crc << 1) & 0x7FFF
        if feedback:
            crc ^= CRC15_POLY
    return crc


def stuff(bits) -> list[int]:
    """Insert a complement bit after every run of 5 identical bits.

    The inserted bit itself starts the next run, so 6 zeros stuff to
    0000010 (the stuff bit restarts the count).
    """
    out: list[int] = []
    run_bit = None
    run_len = 0
    for b in bits:
        out.append(b)
        if b == run_bit:
            run_len += 1
        else:
            run_bit, run_len = b, 1
        if run_len == 5:
            s = b ^ 1
            out.append(s)
            run_bit, run_len = s, 1
    return out


def unstuff(bits) -> list[int]:
    """Remove stuff bits; raises StuffingViolation on a run of 6."""
    out: list[int] = []
    run_bit = None
    run_len = 0
    expect_stuff = False
    for b in bits:
        if expect_stuff:
            if b == run_bit:
                raise StuffingViolation(
                    "six consecutive identical bits in stuffed region")
            run_bit, run_len = b, 1
            expect_stuff = False
            continue
        out.append(b)
        if b == run_bit:
            run_len += 1
        else:
            run_bit, run_len = b, 1
        if run_len == 5:
            expect_stuff = True
    return out


def _body_bits(frame: CanFrame) -> list[int]:
    """SOF through data field (the CRC-protected region), unstuffed."""
    bits = [DOMINANT]  # SOF
    if frame.extended:
        bits += _int_bits(frame.can_id >> 18, 11)
        bits += [RECESSIVE, RECESSIVE]          # SRR, IDE
        bits += _int_bits(frame.can_id & 0x3FFFF, 18)
        bits += [int(frame.rtr), 0, 0]          # RTR, r1, r0
    else:
        bits += _int_bits(frame.can_id, 11)
        bits += [int(frame.rtr), 0, 0]          # RTR, IDE, r0
    bits += _int_bits(frame.dlc, 4)
    for byte in frame.data:
        bits += _int_bits(byte, 8)
    return bits


def serialize(frame: CanFrame) -> list[int]:
    """Serialize SOF..EOF; stuffing covers SOF through the CRC sequence."""
    body = _body_bits(frame)
    crc = crc15(body)
    stuffed = stuff(body + _int_bits(crc, 15))
    return stuffed + list(_TAIL)


class _BitReader:
    """Reads destuffed bits from a stuffed stream, tracking run state."""

    def __init__(self, bits):
        self._bits = list(bits)
        self._pos = 0
        self._run_bit = None
        self._run_len = 0

    def _raw(self) -> int:
        if self._pos >= len(self._bits):
            raise TruncatedFrame("bit stream ended mid-frame")
        b = self._bits[self._pos]
        self._pos += 1
        return b

    def read(self, n: int) -> list[int]:
        out = []
        for _ in range(n):
            b = self._raw()
            if b == self._run_bit:
                self._run_len += 1
            else:
                self._run_bit, self._run_len = b, 1
            out.append(b)
            if self._run_len == 5:
                s = self._raw()
                if s == b:
                    raise StuffingViolation(
                        "six consecutive identical bits in stuffed region")
                self._run_bit, self._run_len = s, 1
        return out

    def read_raw(self, n: int) -> list[int]:
        return [self._raw() for _ in range(n)]

    @property
    def remaining(self) -> int:
        return len(self._bits) - self._pos


def deserialize(bits) -> CanFrame:
    """Parse a serialized frame back into a CanFrame, re-verifying the CRC.

    The CRC is recomputed over the destuffed bits as received (reserved
    bits included), so any surviving single-bit flip in the protected
    region is caught even when it does not change the decoded fields.
    """
    r = _BitReader(bits)
    body: list[int] = []

    def read(n):
        chunk = r.read(n)
        body.extend(chunk)
        return chunk

    sof = read(1)[0]
    if sof != DOMINANT:
        raise FrameFormatError("expected dominant SOF bit")
    base_id = read(11)
    bit12 = read(1)[0]     # RTR (std) or SRR (ext)
    ide = read(1)[0]
    if ide:
        ext_id = read(18)
        rtr = read(1)[0]
        read(2)            # r1, r0
        can_id = (_bits_int(base_id) << 18) | _bits_int(ext_id)
        extended = True
    else:
        rtr = bit12
        read(1)            # r0
        can_id = _bits_int(base_id)
        extended = False
    dlc = _bits_int(read(4))
    if dlc > MAX_DLC:
        raise FrameFormatError(f"dlc {dlc} out of range")
    data = bytes(_bits_int(read(8)) for _ in range(0 if rtr else dlc))
    received_crc = _bits_int(r.read(15))

    if crc15(body) != received_crc:
        raise CrcMismatch(f"CRC mismatch on frame id 0x{can_id:X}")
    frame = CanFrame(can_id, data, extended, bool(rtr), dlc)
    if r.remaining != len(_TAIL):
        raise TruncatedFrame(
            f"expected {len(_TAIL)} tail bits, found {r.remaining}")
    tail = r.read_raw(len(_TAIL))
    # ACK slot (index 1) may legitimately be driven dominant by a receiver.
    for i, b in enumerate(tail):
        if i != 1 and b != RECESSIVE:
            raise FrameFormatError("dominant bit in delimiter/EOF field")
    return frame


def arbitration_bits(frame: CanFrame) -> list[int]:
    """The bits a transmitter drives during arbitration, IDE included.

    A standard frame's dominant IDE bit is what lets it beat an extended
    frame sharing the same 11-bit base id.
    """
    if frame.extended:
        return (_int_bits(frame.can_id >> 18, 11) + [RECESSIVE, RECESSIVE]
                + _int_bits(frame.can_id & 0x3FFFF, 18) + [int(frame.rtr)])
    return _int_bits(frame.can_id, 11) + [int(frame.rtr), DOMINANT]


def arbitration_winner(frame_a: CanFrame, frame_b: CanFrame) -> CanFrame:
    """Bitwise arbitration between two simultaneous transmitters.

    Dominant (0) beats recessive at the first differing bit; identical
    arbitration fields are illegal on a real bus and raise.
    """
    a, b = arbitration_bits(frame_a), arbitration_bits(frame_b)
    for bit_a, bit_b in zip(a, b):
        if bit_a != bit_b:
            return frame_a if bit_a == DOMINANT else frame_b
    raise ProtocolViolation(
        f"two nodes transmitted identical arbitration fields "
        f"(id 0x{frame_a.can_id:X})")


def frame_bit_length(frame: CanFrame) -> int:
    """On-wire bit count: stuffed SOF..EOF plus the 3-bit interframe space."""
    return len(serialize(frame)) + INTERFRAME_BITS


def frame_time(frame: CanFrame, bitrate: int) -> float:
    """Wire occupancy of one frame in seconds at the given bitrate."""
    if bitrate <= 0:
        raise ValueError("bitrate must be positive")
    return frame_bit_length(frame) / bitrate


def frame_time_us(frame: CanFrame, bitrate: int) -> int:
    """Frame duration in integer microseconds (round half up)."""
    if bitrate <= 0:
        raise ValueError("bitrate must be positive")
    n = frame_bit_length(frame) * 1_000_000
    return (2 * n + bitrate) // (2 * bitrate)
