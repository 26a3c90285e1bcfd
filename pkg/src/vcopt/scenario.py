"""Demands, processing scenarios and traffic modes."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .params import NodeKind

MIPS_PER_MBPS = 2000.0


class Scenario(str, enum.Enum):
    """Which processing layers may host demands."""

    V = "v"
    VE = "ve"
    C = "c"
    VEC = "vec"

    @property
    def kinds(self) -> frozenset[NodeKind]:
        return _LAYERS[self]

    @classmethod
    def parse(cls, value: str | Scenario) -> Scenario:
        if isinstance(value, Scenario):
            return value
        return cls(value.strip().lower())


_LAYERS = {
    Scenario.V: frozenset({NodeKind.VEHICLE}),
    Scenario.VE: frozenset({NodeKind.VEHICLE, NodeKind.EDGE}),
    Scenario.C: frozenset({NodeKind.CLOUD_SERVER}),
    Scenario.VEC: frozenset({NodeKind.VEHICLE, NodeKind.EDGE, NodeKind.CLOUD_SERVER}),
}


class TrafficMode(str, enum.Enum):
    FT = "ft"  # every destination receives the full traffic
    PT = "pt"  # traffic proportional to the processing share

    @classmethod
    def parse(cls, value: str | TrafficMode) -> TrafficMode:
        if isinstance(value, TrafficMode):
            return value
        return cls(value.strip().lower())


@dataclass(frozen=True, order=True)
class Demand:
    """A processing request generated at ``source``.

    ``traffic`` is in bit/s and ``mips`` in MIPS. ``id`` orders demands that
    tie on processing size.
    """

    id: int
    source: str
    traffic: float
    mips: float

    def __post_init__(self):
        if not self.traffic > 0:
            raise ValueError(f"demand {self.id}: traffic must be > 0")
        if not self.mips > 0:
            raise ValueError(f"demand {self.id}: processing must be > 0")

    @classmethod
    def from_mbps(cls, source: str, mbps: float, mips: float | None = None, id: int = 0) -> Demand:
        return cls(id, source, mbps * 1e6, MIPS_PER_MBPS * mbps if mips is None else mips)

    @property
    def mbps(self) -> float:
        return self.traffic / 1e6


_RATE = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*(mbps|mb/s|kbps|bps)?\s*$", re.I)


def parse_rate(text: str) -> float:
    """``'2mbps'`` -> 2e6 bit/s. A bare number is read as Mb/s."""
    m = _RATE.match(text)
    if not m:
        raise ValueError(f"cannot parse traffic rate {text!r}")
    value = float(m.group(1))
    unit = (m.group(2) or "mbps").lower()
    return value * {"mbps": 1e6, "mb/s": 1e6, "kbps": 1e3, "bps": 1.0}[unit]


def admissible_destinations(t, source: str, scenario: Scenario) -> list[str]:
    """Processing candidates for a demand at ``source``; never the source itself."""
    kinds = Scenario.parse(scenario).kinds
    return [n.id for n in t.nodes if n.kind in kinds and n.params.proc_capacity > 0 and n.id != source]
