"""Message catalog: per-id payload layouts, signal codecs, alive counters.

The byte maps live in data/catalog.json (human-readable copy in
docs/signal-catalog.md); this module is a thin typed layer over that file.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

COUNTER_MAX = 14          # alive counters run 0..14, 0xF is reserved
COUNTER_MODULUS = 15
COUNTER_HIGH_NIBBLE = 0xF0


class CatalogError(ValueError):
    """Unknown id/signal, bad payload length, or malformed catalog data."""


class SignalRangeError(CatalogError):
    """Physical value outside the signal's declared range."""


class CounterError(CatalogError):
    """Alive counter outside 0..14 (0xF is reserved and never valid)."""


@dataclass(frozen=True)
class SignalSpec:
    name: str
    unit: str
    codec: str                      # uint | bit | enum | ascii
    byte: int
    size: int = 1                   # bytes, for uint/ascii
    scale: float = 1.0
    offset: float = 0.0
    minimum: float = 0.0
    maximum: float = 0.0
    bit: int = 0
    values: dict | None = None      # enum name -> raw byte


@dataclass(frozen=True)
class MessageSpec:
    can_id: int
    dlc: int
    description: str
    period_ms: int | None           # None = one-shot
    counter_protected: bool
    fill: bytes
    signals: tuple[SignalSpec, ...]

    @property
    def one_shot(self) -> bool:
        return self.period_ms is None

    def signal(self, name: str) -> SignalSpec:
        for s in self.signals:
            if s.name == name:
                return s
        raise CatalogError(f"id 0x{self.can_id:03X} has no signal {name!r}")


@dataclass(frozen=True)
class SignalUpdate:
    name: str
    value: object
    unit: str


def next_counter(c: int) -> int:
    """Advance a 4-bit alive counter: 0..14 cyclic, 15 is reserved."""
    if not 0 <= c <= COUNTER_MAX:
        raise CounterError(f"counter {c} outside 0..{COUNTER_MAX}")
    return (c + 1) % COUNTER_MODULUS


def _encode_raw(spec: SignalSpec, value) -> int:
    if spec.codec == "bit":
        return 1 if value else 0
    if spec.codec == "enum":
        if value not in spec.values:
            raise SignalRangeError(
                f"{spec.name}: {value!r} not in {sorted(spec.values)}")
        return spec.values[value]
    if spec.codec == "uint":
        if not spec.minimum <= value <= spec.maximum:
            raise SignalRangeError(
                f"{spec.name}: {value} outside "
                f"[{spec.minimum}, {spec.maximum}] {spec.unit}")
        return round((value - spec.offset) / spec.scale)
    raise CatalogError(f"unknown codec {spec.codec!r}")


def _decode_raw(spec: SignalSpec, raw: int):
    if spec.codec == "bit":
        return bool(raw)
    if spec.codec == "enum":
        for name, v in spec.values.items():
            if v == raw:
                return name
        return raw  # unmapped raw byte, surfaced as-is
    return raw * spec.scale + spec.offset


class Catalog:
    """The 18-row message catalog, indexed by CAN id."""

    def __init__(self, specs: list[MessageSpec]):
        self._by_id = {s.can_id: s for s in specs}

    @classmethod
    def load(cls, path=None) -> "Catalog":
        if path is not None:
            raw = json.loads(open(path, encoding="utf-8").read())
        else:
            raw = json.loads(resources.files("canwire.data")
                             .joinpath("catalog.json").read_text())
        specs = []
        for row in raw["messages"]:
            signals = tuple(
                SignalSpec(
                    name=s["name"], unit=s["unit"], codec=s["codec"],
                    byte=s["byte"], size=s.get("size", 1),
                    scale=s.get("scale", 1.0), offset=s.get("offset", 0.0),
                    minimum=s.get("min", 0.0), maximum=s.get("max", 0.0),
                    bit=s.get("bit", 0), values=s.get("values"))
                for s in row["signals"])
            fill = bytes.fromhex(row["fill"])
            if len(fill) != row["dlc"]:
                raise CatalogError(
                    f"id {row['id']}: fill length != dlc {row['dlc']}")
            specs.append(MessageSpec(
                can_id=int(row["id"], 16), dlc=row["dlc"],
                description=row["description"], period_ms=row["period_ms"],
                counter_protected=row["counter"], fill=fill, signals=signals))
        return cls(specs)

    def ids(self) -> list[int]:
        return sorted(self._by_id)

    def specs(self) -> list[MessageSpec]:
        return [self._by_id[i] for i in self.ids()]

    def periodic_ids(self) -> list[int]:
        return [i for i in self.ids() if not self._by_id[i].one_shot]

    def one_shot_ids(self) -> list[int]:
        return [i for i in self.ids() if self._by_id[i].one_shot]

    def __contains__(self, can_id: int) -> bool:
        return can_id in self._by_id

    def spec(self, can_id: int) -> MessageSpec:
        try:
            return self._by_id[can_id]
        except KeyError:
            raise CatalogError(f"unknown id 0x{can_id:03X}") from None

    def _write_signal(self, buf: bytearray, spec: SignalSpec, value) -> None:
        if spec.codec == "ascii":
            text = str(value)
            if len(text) != spec.size or not text.isascii():
                raise SignalRangeError(
                    f"{spec.name}: need exactly {spec.size} ASCII chars")
            buf[spec.byte:spec.byte + spec.size] = text.encode("ascii")
            return
        raw = _encode_raw(spec, value)
        if spec.codec == "bit":
            if raw:
                buf[spec.byte] |= 1 << spec.bit
            else:
                buf[spec.byte] &= ~(1 << spec.bit) & 0xFF
        elif spec.codec == "enum":
            buf[spec.byte] = raw
        else:
            if not 0 <= raw < (1 << (8 * spec.size)):
                raise SignalRangeError(f"{spec.name}: raw value overflow")
            buf[spec.byte:spec.byte + spec.size] = raw.to_bytes(
                spec.size, "little")

    def encode(self, can_id: int, values=None, counter: int | None = None) -> bytes:
        """Encode physical values into a payload of exactly dlc bytes.

        Unlisted signals take their fill-byte defaults. `counter` is
        required iff the id is counter-protected.
        """
        spec = self.spec(can_id)
        if spec.counter_protected:
            if counter is None:
                raise CounterError(
                    f"id 0x{can_id:03X} is counter-protected, counter required")
            if not 0 <= counter <= COUNTER_MAX:
                raise CounterError(f"counter {counter} outside 0..{COUNTER_MAX}")
        elif counter is not None:
            raise CounterError(f"id 0x{can_id:03X} carries no counter")
        buf = bytearray(spec.fill)
        for name, value in (values or {}).items():
            self._write_signal(buf, spec.signal(name), value)
        if spec.counter_protected:
            buf[0] = COUNTER_HIGH_NIBBLE | counter
        return bytes(buf)

    def set_signal(self, can_id: int, payload: bytes, name: str, value) -> bytes:
        """Rewrite one signal in place; every other bit is preserved."""
        spec = self.spec(can_id)
        if len(payload) != spec.dlc:
            raise CatalogError(
                f"id 0x{can_id:03X}: payload length {len(payload)} != dlc {spec.dlc}")
        buf = bytearray(payload)
        self._write_signal(buf, spec.signal(name), value)
        return bytes(buf)

    def decode(self, can_id: int, payload: bytes) -> list[SignalUpdate]:
        """Recover physical values; inverse of encode for in-range values."""
        spec = self.spec(can_id)
        if len(payload) != spec.dlc:
            raise CatalogError(
                f"id 0x{can_id:03X}: payload length {len(payload)} != dlc {spec.dlc}")
        updates = []
        for s in spec.signals:
            if s.codec == "bit":
                raw = (payload[s.byte] >> s.bit) & 1
            elif s.codec == "enum":
                raw = payload[s.byte]
            elif s.codec == "ascii":
                updates.append(SignalUpdate(
                    s.name, payload[s.byte:s.byte + s.size].decode("ascii"),
                    s.unit))
                continue
            else:
                raw = int.from_bytes(payload[s.byte:s.byte + s.size], "little")
            updates.append(SignalUpdate(s.name, _decode_raw(s, raw), s.unit))
        return updates

    def decode_map(self, can_id: int, payload: bytes) -> dict:
        return {u.name: u.value for u in self.decode(can_id, payload)}

    def read_counter(self, can_id: int, payload: bytes) -> int:
        """Extract the alive counter from a counter-protected payload."""
        spec = self.spec(can_id)
        if not spec.counter_protected:
            raise CounterError(f"id 0x{can_id:03X} carries no counter")
        return payload[0] & 0x0F


@lru_cache(maxsize=1)
def catalog() -> Catalog:
    """The process-wide catalog loaded from the shipped data file."""
    return Catalog.load()
