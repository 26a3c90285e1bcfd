"""Power model of the architecture and the evaluator of complete assignments.

Every consumer that needs a power number (the MILP objective, the heuristic
scores, reported results) derives it from the per-link energy attribution and
idle rules in this module.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .params import NodeKind, dbm_to_watts
from .scenario import Demand, Scenario, TrafficMode
from .topo import Link, Medium, Node, Topology

# Absolute tolerances in model units (MIPS, Mb/s); flows are stored in bit/s.
TOL_MIPS = 1e-6
TOL_BPS = 1e-6 * 1e6

Pair = tuple[str, str]


class PowerModelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# per-bit energies


def energy_per_bit(node: Node) -> float:
    """Load-dependent networking energy of a wired device or an edge ONU (J/bit).

    Uses the full device idle, not the attributed share.
    """
    p = node.params
    if node.kind is NodeKind.EDGE:
        if not p.onu_rate:
            raise PowerModelError(f"{node.id}: ONU rate is zero or undefined")
        return (p.onu_max - p.onu_idle) / p.onu_rate
    if not node.kind.is_wired:
        raise PowerModelError(f"{node.id}: energy per bit is defined for OLT/metro/core devices and edge ONUs only")
    if not p.node_rate:
        raise PowerModelError(f"{node.id}: rate is zero or undefined")
    return (p.net_max - p.net_idle) / p.node_rate


def _tx_power(sender: Node, medium: Medium) -> float:
    p = sender.params
    if sender.kind is NodeKind.VEHICLE and medium is Medium.WIFI:
        return p.wifi_tx_power or 0.0
    return p.tx_power or 0.0


def _rx_dbm(receiver: Node, medium: Medium) -> float | None:
    p = receiver.params
    if receiver.kind is NodeKind.VEHICLE and medium is Medium.WIFI:
        return p.wifi_rx_dbm
    return p.rx_dbm


def wireless_tx_energy(link: Link, sender: Node) -> float:
    """Transmission energy per bit: TX / rate + amplifier * distance^2."""
    if not link.medium.wireless:
        raise PowerModelError(f"{link.src}->{link.dst} is not a wireless link")
    eps = sender.params.amp_factor or 0.0
    return _tx_power(sender, link.medium) / link.rate_bps + eps * link.distance_m**2


def wireless_rx_energy(link: Link, receiver: Node) -> float:
    """Reception energy per bit: receiver sensitivity (in W) over the link rate."""
    if not link.medium.wireless:
        raise PowerModelError(f"{link.src}->{link.dst} is not a wireless link")
    dbm = _rx_dbm(receiver, link.medium)
    if dbm is None:
        return 0.0
    return dbm_to_watts(dbm) / link.rate_bps


def processing_efficiency(node: Node) -> float:
    """W per MIPS."""
    if node.params.proc_capacity <= 0:
        raise PowerModelError(f"{node.id}: no processing capacity")
    return node.params.proc_efficiency


def link_energy_terms(t: Topology, a: str, b: str) -> list[tuple[str, float]]:
    """Per-bit energy that traffic on link ``a -> b`` induces, by charged node.

    Values are J/bit before PUE scaling.
    """
    link = t.link(a, b)
    na, nb = t[a], t[b]
    if link.medium.wireless:
        return [(a, wireless_tx_energy(link, na)), (b, wireless_rx_energy(link, nb))]
    terms = []
    if na.kind is NodeKind.EDGE:
        terms.append((a, energy_per_bit(na)))
    elif na.kind.is_wired:
        terms.append((a, energy_per_bit(na)))
    # cloud servers only receive; their transmission power is not modelled
    if nb.kind is NodeKind.EDGE:
        terms.append((b, energy_per_bit(nb)))
    return terms


def link_cost_per_bit(t: Topology, a: str, b: str) -> float:
    """PUE-weighted power per bit/s carried on ``a -> b`` (W per bit/s)."""
    return sum(t[n].params.pue * e for n, e in link_energy_terms(t, a, b))


def route_cost_per_bit(t: Topology, path: list[str]) -> float:
    return sum(link_cost_per_bit(t, a, b) for a, b in zip(path, path[1:]))


# ---------------------------------------------------------------------------
# idle charges


def idle_components(node: Node) -> dict[str, float]:
    """Activation charges of a node before PUE: networking, ONU, processing."""
    p = node.params
    out = {"proc": p.proc_idle if p.proc_capacity > 0 else 0.0}
    if node.kind is NodeKind.VEHICLE:
        out["net"] = p.net_idle
    elif node.kind is NodeKind.EDGE:
        out["net"] = p.net_idle
        out["onu"] = p.onu_idle or 0.0
    elif node.kind.is_wired:
        out["net"] = p.attributed_idle
    else:
        out["net"] = 0.0
    return out


def node_processing_power(node: Node, load_mips: float) -> float:
    """Idle (when loaded) plus load-proportional processing power, before PUE."""
    if load_mips <= TOL_MIPS:
        return 0.0
    cap = node.params.proc_capacity
    if load_mips > cap + TOL_MIPS:
        raise PowerModelError(f"{node.id}: load {load_mips:g} MIPS exceeds capacity {cap:g}")
    return node.params.proc_idle + load_mips * node.params.proc_efficiency


def _interface_traffic(t: Topology, n: str, loads: Mapping[Pair, float]) -> dict[str, float]:
    """in+out traffic of node ``n`` per interface class."""
    kind = t.kind(n)
    out: dict[str, float] = defaultdict(float)
    for m in t.neighbors(n):
        f = loads.get((n, m), 0.0) + loads.get((m, n), 0.0)
        if f:
            out[interface_of(kind, t.kind(m))] += f
    return out


def interface_of(kind: NodeKind, other: NodeKind) -> str:
    """Name of the interface node of ``kind`` uses towards a node of ``other``."""
    if kind is NodeKind.VEHICLE:
        return "dsrc" if other is NodeKind.VEHICLE else "wifi"
    if kind is NodeKind.EDGE:
        return "ap" if other in (NodeKind.VEHICLE, NodeKind.EDGE) else "onu"
    return "wired"


def interface_capacity(node: Node, interface: str) -> float:
    p = node.params
    cap = {
        "dsrc": p.node_rate,
        "wifi": p.wifi_rate,
        "ap": p.node_rate,
        "onu": p.onu_rate,
        "wired": p.node_rate,
    }[interface]
    return math.inf if cap is None else cap


def node_networking_power(t: Topology, n: str, loads: Mapping[Pair, float], *, check_rates: bool = True) -> float:
    """Networking power of node ``n`` (before PUE) under aggregate link loads in bit/s."""
    node = t[n]
    traffic = _interface_traffic(t, n, loads)
    for iface, f in traffic.items():
        cap = interface_capacity(node, iface)
        if check_rates and f > cap + TOL_BPS:
            raise PowerModelError(f"{n}: {iface} traffic {f:g} bit/s exceeds rate {cap:g}")
    idle = idle_components(node)
    power = 0.0
    if node.kind is NodeKind.EDGE:
        if traffic.get("ap", 0.0) > TOL_BPS:
            power += idle["net"]
        if traffic.get("onu", 0.0) > TOL_BPS:
            power += idle["onu"]
    elif sum(traffic.values()) > TOL_BPS:
        power += idle["net"]
    for m in t.neighbors(n):
        for a, b in ((n, m), (m, n)):
            f = loads.get((a, b), 0.0)
            if f:
                power += f * sum(e for who, e in link_energy_terms(t, a, b) if who == n)
    return power


# ---------------------------------------------------------------------------
# assignments


@dataclass
class Assignment:
    """Placements (MIPS), per-destination traffic and per-commodity flows (bit/s)."""

    placements: dict[Pair, float] = field(default_factory=dict)
    traffic: dict[Pair, float] = field(default_factory=dict)
    flows: dict[Pair, dict[Pair, float]] = field(default_factory=dict)

    @property
    def selections(self) -> dict[Pair, int]:
        return {sd: int(om > TOL_MIPS) for sd, om in self.placements.items()}

    def splits(self) -> dict[str, int]:
        out: dict[str, int] = defaultdict(int)
        for (s, _), om in self.placements.items():
            if om > TOL_MIPS:
                out[s] += 1
        return dict(out)

    def destinations(self, source: str) -> list[str]:
        return sorted(d for (s, d), om in self.placements.items() if s == source and om > TOL_MIPS)

    def processing_load(self) -> dict[str, float]:
        out: dict[str, float] = defaultdict(float)
        for (_, d), om in self.placements.items():
            out[d] += om
        return dict(out)

    def link_loads(self) -> dict[Pair, float]:
        out: dict[Pair, float] = defaultdict(float)
        for flow in self.flows.values():
            for link, f in flow.items():
                out[link] += f
        return dict(out)

    def flags(self, t: Topology) -> dict[str, dict[str, int]]:
        """Activation flags derived from actual usage: net, proc, onu."""
        loads = self.link_loads()
        proc = self.processing_load()
        net, pr, onu = {}, {}, {}
        for node in t.nodes:
            n = node.id
            traffic = _interface_traffic(t, n, loads)
            if node.kind is NodeKind.EDGE:
                net[n] = int(traffic.get("ap", 0.0) > TOL_BPS)
                onu[n] = int(traffic.get("onu", 0.0) > TOL_BPS)
            else:
                net[n] = int(sum(traffic.values()) > TOL_BPS)
            pr[n] = int(proc.get(n, 0.0) > TOL_MIPS)
        return {"net": net, "proc": pr, "onu": onu}

    def merged(self, other: Assignment) -> Assignment:
        out = Assignment(dict(self.placements), dict(self.traffic), {k: dict(v) for k, v in self.flows.items()})
        for sd, om in other.placements.items():
            out.placements[sd] = out.placements.get(sd, 0.0) + om
        for sd, f in other.traffic.items():
            out.traffic[sd] = out.traffic.get(sd, 0.0) + f
        for sd, flow in other.flows.items():
            target = out.flows.setdefault(sd, {})
            for link, f in flow.items():
                target[link] = target.get(link, 0.0) + f
        return out

    @classmethod
    def union(cls, parts: Iterable[Assignment]) -> Assignment:
        out = cls()
        for p in parts:
            out = out.merged(p)
        return out


@dataclass
class PowerBreakdown:
    """Per-node power and totals. Per-node ``networking``/``processing`` are IT
    power before PUE; ``total`` and the ``tp*`` totals include PUE."""

    networking: dict[str, float]
    processing: dict[str, float]
    total: dict[str, float]
    tp: float
    tp_net: float
    tp_proc: float

    def layer_totals(self, t: Topology) -> dict[str, float]:
        out: dict[str, float] = defaultdict(float)
        for n, w in self.total.items():
            out[t.kind(n).value] += w
        return dict(out)

    def to_dict(self) -> dict:
        return {
            "tp_w": self.tp,
            "net_w": self.tp_net,
            "proc_w": self.tp_proc,
            "nodes": {
                n: {"networking_w": self.networking[n], "processing_w": self.processing[n], "total_w": self.total[n]}
                for n in self.total
            },
        }


def savings(tp: float, tp_cloud: float) -> float:
    """Fractional saving of ``tp`` against the cloud-only baseline."""
    if tp_cloud <= 0:
        return 0.0
    return (tp_cloud - tp) / tp_cloud


# ---------------------------------------------------------------------------
# feasibility


@dataclass(frozen=True)
class Violation:
    constraint: str  # constraint number of the model, or "link" / "source"
    subject: str
    magnitude: float
    detail: str = ""

    def __str__(self) -> str:
        return f"({self.constraint}) {self.subject}: {self.detail} [by {self.magnitude:.6g}]"


@dataclass
class FeasibilityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def constraints(self) -> set[str]:
        return {v.constraint for v in self.violations}

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "feasible"
        return "infeasible:\n" + "\n".join(f"  {v}" for v in self.violations)


class InfeasibleAssignment(PowerModelError):
    def __init__(self, report: FeasibilityReport):
        super().__init__(str(report))
        self.report = report


def check_feasibility(
    t: Topology,
    a: Assignment,
    demands: Iterable[Demand] | None = None,
    S: int | None = None,
    mode: TrafficMode | str | None = None,
    scenario: Scenario | str | None = None,
) -> FeasibilityReport:
    """Check an assignment against the model constraints.

    Without ``demands`` only the demand-independent constraints are checked
    (capacity, flow conservation, interface rates).
    """
    rep = FeasibilityReport()
    bad = rep.violations.append
    demands = list(demands or [])
    by_source = {d.source: d for d in demands}
    kinds = Scenario.parse(scenario).kinds if scenario is not None else None

    for (s, d), om in a.placements.items():
        if s == d and om > TOL_MIPS:
            bad(Violation("12", f"{s}", om, "demand processed locally"))
        if d not in t:
            bad(Violation("13", d, om, "unknown processing node"))

    for demand in demands:
        served = sum(om for (s, _), om in a.placements.items() if s == demand.source)
        if abs(served - demand.mips) > TOL_MIPS:
            bad(Violation("12", demand.source, abs(served - demand.mips), f"served {served:g} of {demand.mips:g} MIPS"))

    for d, load in a.processing_load().items():
        if d not in t:
            continue
        node = t[d]
        cap = node.params.proc_capacity
        if kinds is not None and node.kind not in kinds:
            cap = 0.0
        if load > cap + TOL_MIPS:
            bad(Violation("13", d, load - cap, f"load {load:g} MIPS exceeds capacity {cap:g}"))

    for sd, om in a.placements.items():
        if TOL_MIPS < om < 1.0 - TOL_MIPS:
            bad(Violation("14", f"{sd[0]}->{sd[1]}", 1.0 - om, "selected destination serves less than 1 MIPS"))

    if mode is not None and demands:
        mode = TrafficMode.parse(mode)
        for sd, om in a.placements.items():
            demand = by_source.get(sd[0])
            if demand is None or om <= TOL_MIPS:
                continue
            if mode is TrafficMode.FT:
                want, tag = demand.traffic, "16"
            else:
                want, tag = demand.traffic * om / demand.mips, "31"
            got = a.traffic.get(sd, 0.0)
            if abs(got - want) > TOL_BPS:
                bad(Violation(tag, f"{sd[0]}->{sd[1]}", abs(got - want), f"traffic {got:g} bit/s, expected {want:g}"))

    for sd, flow in a.flows.items():
        s, d = sd
        for link, f in flow.items():
            if link not in t.link_map and f > TOL_BPS:
                bad(Violation("link", f"{link[0]}->{link[1]}", f, "flow on a missing link"))
            if f < -TOL_BPS:
                bad(Violation("17", f"{link[0]}->{link[1]}", -f, "negative flow"))
        F = a.traffic.get(sd, 0.0)
        net: dict[str, float] = defaultdict(float)
        for (n, m), f in flow.items():
            net[n] += f
            net[m] -= f
        for n in set(net) | {s, d}:
            want = F if n == s else -F if n == d else 0.0
            if abs(net[n] - want) > TOL_BPS:
                bad(Violation("17", f"{s}->{d} at {n}", abs(net[n] - want), f"net outflow {net[n]:g}, expected {want:g}"))
    for sd, F in a.traffic.items():
        if F > TOL_BPS and sd not in a.flows:
            bad(Violation("17", f"{sd[0]}->{sd[1]}", F, "traffic without routed flow"))

    loads = a.link_loads()
    tags = {"wired": "18", "dsrc": "19", "wifi": "20", "ap": "21", "onu": "22"}
    for node in t.nodes:
        for iface, f in _interface_traffic(t, node.id, loads).items():
            cap = interface_capacity(node, iface)
            if f > cap + TOL_BPS:
                bad(Violation(tags[iface], f"{node.id}/{iface}", f - cap, f"{f:g} bit/s over rate {cap:g}"))

    if S is not None:
        for s, q in a.splits().items():
            if q > S:
                bad(Violation("24", s, q - S, f"{q} destinations exceed split limit {S}"))
    return rep


def total_power(t: Topology, a: Assignment, *, validate: bool = True) -> PowerBreakdown:
    """Evaluate every node's power for assignment ``a``.

    Raises :class:`InfeasibleAssignment` when ``validate`` is set and the
    assignment breaks capacity, conservation or rate constraints.
    """
    if validate:
        rep = check_feasibility(t, a)
        if not rep.ok:
            raise InfeasibleAssignment(rep)
    loads = a.link_loads()
    proc = a.processing_load()
    networking, processing, total = {}, {}, {}
    for node in t.nodes:
        n = node.id
        wn = node_networking_power(t, n, loads, check_rates=validate)
        wp = node_processing_power(node, proc.get(n, 0.0))
        networking[n] = wn
        processing[n] = wp
        total[n] = node.params.pue * (wn + wp)
    tp_net = sum(t[n].params.pue * w for n, w in networking.items())
    tp_proc = sum(t[n].params.pue * w for n, w in processing.items())
    return PowerBreakdown(networking, processing, total, sum(total.values()), tp_net, tp_proc)
