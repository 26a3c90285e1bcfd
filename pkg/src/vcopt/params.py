"""Node kinds and the default device parameter catalog.

Units used throughout the package: power in W, processing in MIPS, rates in
bit/s, distances in m, energies in J/bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from typing import Any


class NodeKind(str, enum.Enum):
    VEHICLE = "vehicle"
    EDGE = "edge"
    OLT = "olt"
    AGG_SWITCH = "agg_switch"
    AGG_ROUTER = "agg_router"
    CORE_ROUTER = "core_router"
    CLOUD_ROUTER = "cloud_router"
    CLOUD_SWITCH = "cloud_switch"
    CLOUD_SERVER = "cloud_server"

    @property
    def is_wired(self) -> bool:
        return self in WIRED_KINDS

    @property
    def is_wireless(self) -> bool:
        return self in (NodeKind.VEHICLE, NodeKind.EDGE)


# Order of the fiber chain from the access side to the data centre.
WIRED_CHAIN = (
    NodeKind.OLT,
    NodeKind.AGG_SWITCH,
    NodeKind.AGG_ROUTER,
    NodeKind.CORE_ROUTER,
    NodeKind.CLOUD_ROUTER,
    NodeKind.CLOUD_SWITCH,
)
WIRED_KINDS = frozenset(WIRED_CHAIN)

# Share of a network device's idle power attributed to this application:
# 7% M2M traffic, of which 13% is connected cars / cities.
M2M_IDLE_SHARE = 0.07 * 0.13


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class NodeParams:
    """Device parameters of one node.

    ``rx_dbm`` values are receiver sensitivities in dBm; they are converted to
    watts where reception energy is computed. Fields that do not apply to a
    node kind are ``None``.
    """

    proc_capacity: float = 0.0  # MIPS
    proc_max: float = 0.0  # W
    proc_idle: float = 0.0  # W
    net_max: float = 0.0  # W
    net_idle: float = 0.0  # W, full device idle
    idle_share: float = 1.0  # fraction of net_idle charged to this application
    node_rate: float | None = None  # bit/s; DSRC rate for vehicles, AP rate for edges
    wifi_rate: float | None = None  # vehicles only
    onu_rate: float | None = None  # edges only
    onu_max: float | None = None
    onu_idle: float | None = None
    tx_power: float | None = None  # W; DSRC for vehicles, AP for edges
    rx_dbm: float | None = None
    wifi_tx_power: float | None = None  # vehicles only
    wifi_rx_dbm: float | None = None
    amp_factor: float | None = None  # J/(bit m^2)
    pue: float = 1.0

    @property
    def attributed_idle(self) -> float:
        return self.net_idle * self.idle_share

    @property
    def proc_efficiency(self) -> float:
        """W per MIPS; raises for nodes without processing capacity."""
        if self.proc_capacity <= 0:
            raise ValueError("processing efficiency undefined for zero capacity")
        return (self.proc_max - self.proc_idle) / self.proc_capacity

    def violations(self) -> list[str]:
        out = []
        if self.proc_capacity < 0:
            out.append("proc_capacity must be >= 0")
        if not self.proc_max >= self.proc_idle >= 0:
            out.append("need proc_max >= proc_idle >= 0")
        if not self.net_max >= self.net_idle >= 0:
            out.append("need net_max >= net_idle >= 0")
        if self.onu_max is not None or self.onu_idle is not None:
            if not (self.onu_max or 0) >= (self.onu_idle or 0) >= 0:
                out.append("need onu_max >= onu_idle >= 0")
        for name in ("node_rate", "wifi_rate", "onu_rate"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                out.append(f"{name} must be > 0")
        if not 0 <= self.idle_share <= 1:
            out.append("idle_share must lie in [0, 1]")
        if self.pue < 1:
            out.append("pue must be >= 1")
        return out

    def with_overrides(self, overrides: dict[str, Any]) -> NodeParams:
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return replace(self, **overrides)

    def diff(self, other: NodeParams) -> dict[str, Any]:
        """Fields of ``self`` that differ from ``other``."""
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if getattr(self, f.name) != getattr(other, f.name)
        }


AMP_FACTOR = 100e-12  # 100 pJ/(bit m^2)

VEHICLE = NodeParams(
    proc_capacity=2 * 2 * 800.0,  # instr/cycle x cores x MHz
    proc_max=7.9,
    proc_idle=3.95,
    net_max=2.712,
    net_idle=1.05007,
    node_rate=27e6,
    wifi_rate=150e6,
    tx_power=0.158,  # +22 dBm
    rx_dbm=-77.0,
    wifi_tx_power=0.025,  # +14 dBm
    wifi_rx_dbm=-72.0,
    amp_factor=AMP_FACTOR,
    pue=1.0,
)

EDGE = NodeParams(
    proc_capacity=2 * 4 * 1200.0,
    proc_max=12.5,
    proc_idle=2.0,
    net_max=25.0,
    net_idle=5.5,
    node_rate=150e6,
    onu_rate=10e9,
    onu_max=15.0,
    onu_idle=13.5,
    tx_power=0.630,  # +28 dBm
    rx_dbm=-104.0,
    amp_factor=AMP_FACTOR,
    pue=1.0,
)

CLOUD_SERVER = NodeParams(
    proc_capacity=4 * 10 * 2800.0,
    proc_max=115.0,
    proc_idle=57.0,
    pue=1.1,
)


def _wired(net_max: float, net_idle: float, rate_gbps: float) -> NodeParams:
    return NodeParams(
        net_max=net_max,
        net_idle=net_idle,
        idle_share=M2M_IDLE_SHARE,
        node_rate=rate_gbps * 1e9,
        pue=1.5,
    )


CATALOG: dict[NodeKind, NodeParams] = {
    NodeKind.VEHICLE: VEHICLE,
    NodeKind.EDGE: EDGE,
    NodeKind.OLT: _wired(1940.0, 60.0, 8600.0),
    NodeKind.AGG_SWITCH: _wired(210.0, 189.0, 6 * 40.0),
    NodeKind.AGG_ROUTER: _wired(5.25, 4.725, 10.0),
    NodeKind.CORE_ROUTER: _wired(30.0, 27.0, 40.0),
    NodeKind.CLOUD_ROUTER: _wired(30.0, 27.0, 40.0),
    NodeKind.CLOUD_SWITCH: _wired(470.0, 423.0, 6 * 100.0),
    NodeKind.CLOUD_SERVER: CLOUD_SERVER,
}


def default_params(kind: NodeKind) -> NodeParams:
    return CATALOG[NodeKind(kind)]

