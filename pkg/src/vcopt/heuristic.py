"""Real-time allocator: greedy candidate ranking with minimum-hop routing.

Demands are served one at a time, largest processing first. For each demand
the admissible processing nodes are ranked once by the power their use would
add, then walked in that order. Each candidate is packed as full as the
demand allows once a minimum-hop route with spare interface rate reaches it.
The first minimum-hop route with enough spare rate is used; when none has,
the cheapest one loses its bottleneck link for the rest of the demand and
the candidate waits for the next pass. A demand gets two passes over the list; if it is still not served,
everything it holds is released and it is blocked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .params import NodeKind
from .powermodel import (
    TOL_MIPS,
    Assignment,
    PowerBreakdown,
    idle_components,
    interface_capacity,
    interface_of,
    route_cost_per_bit,
    total_power,
)
from .scenario import Demand, Scenario, TrafficMode, admissible_destinations
from .topo import Topology, path_links, shortest_routes

TRIALS = 2
Iface = tuple[str, str]  # (node, interface class)


@dataclass(frozen=True)
class CandidateScore:
    destination: str
    npower: float  # W, traffic-dependent power along the route
    prpower: float  # W, load-dependent processing power of the open demand at this node
    idle: float  # W, idle charges the candidate would switch on
    route: tuple[str, ...]
    fillable: float  # MIPS

    @property
    def score(self) -> float:
        return self.npower + self.prpower + self.idle


@dataclass
class AllocationState:
    """Residual processing and interface rates while demands are placed."""

    t: Topology
    proc: dict[str, float]
    iface: dict[Iface, float]
    capacity_proc: dict[str, float] = field(init=False)
    capacity_iface: dict[Iface, float] = field(init=False)
    placements: dict[tuple[str, str], float] = field(default_factory=dict)
    flows: dict[tuple[str, str], dict[tuple[str, str], float]] = field(default_factory=dict)
    traffic: dict[tuple[str, str], float] = field(default_factory=dict)
    removed: set[tuple[str, str]] = field(default_factory=set)
    trial: int = 1

    def __post_init__(self):
        self.capacity_proc = dict(self.proc)
        self.capacity_iface = dict(self.iface)

    @classmethod
    def fresh(cls, t: Topology) -> AllocationState:
        proc = {n.id: n.params.proc_capacity for n in t.nodes if n.params.proc_capacity > 0}
        iface = {}
        for l in t.links:
            for a, b in ((l.src, l.dst), (l.dst, l.src)):
                key = (a, interface_of(t.kind(a), t.kind(b)))
                iface[key] = interface_capacity(t[a], key[1])
        return cls(t, proc, dict(sorted(iface.items())))

    # -- bookkeeping ------------------------------------------------------------

    def snapshot(self) -> tuple:
        return (
            dict(self.proc),
            dict(self.iface),
            dict(self.placements),
            {k: dict(v) for k, v in self.flows.items()},
            dict(self.traffic),
        )

    def restore(self, snap: tuple) -> None:
        self.proc, self.iface, self.placements, flows, self.traffic = (dict(x) for x in snap)
        self.flows = {k: dict(v) for k, v in flows.items()}

    def processing_on(self, n: str) -> bool:
        return self.proc.get(n, 0.0) < self.capacity_proc.get(n, 0.0)

    def interface_on(self, key: Iface) -> bool:
        return self.iface[key] < self.capacity_iface[key]

    def route_needs(self, route) -> dict[Iface, int]:
        """How many times each interface carries the route's traffic."""
        needs: dict[Iface, int] = {}
        for a, b in path_links(list(route)):
            for x, y in ((a, b), (b, a)):
                key = (x, interface_of(self.t.kind(x), self.t.kind(y)))
                needs[key] = needs.get(key, 0) + 1
        return needs

    def bottleneck(self, route, traffic: float) -> tuple[str, str] | None:
        """First link of ``route`` whose interfaces cannot take ``traffic`` more."""
        seen: dict[Iface, int] = {}
        for a, b in path_links(list(route)):
            for x, y in ((a, b), (b, a)):
                key = (x, interface_of(self.t.kind(x), self.t.kind(y)))
                seen[key] = seen.get(key, 0) + 1
                if seen[key] * traffic > self.iface[key]:
                    return (a, b)
        return None

    def commit(self, source: str, d: str, mips: float, traffic: float, route) -> None:
        self.proc[d] -= mips
        for key, k in self.route_needs(route).items():
            for _ in range(k):
                self.iface[key] -= traffic
        self.placements[(source, d)] = self.placements.get((source, d), 0.0) + mips
        self.traffic[(source, d)] = self.traffic.get((source, d), 0.0) + traffic
        flow = self.flows.setdefault((source, d), {})
        for link in path_links(list(route)):
            flow[link] = flow.get(link, 0.0) + traffic

    def assignment(self) -> Assignment:
        return Assignment(dict(self.placements), dict(self.traffic), {k: dict(v) for k, v in self.flows.items()})


def _min_hop_routes(t: Topology, s: str, d: str, removed) -> list[tuple[str, ...]]:
    """Minimum-hop routes, cheapest per bit first, then by node ids."""
    routes = shortest_routes(t, s, d, removed)
    return sorted((tuple(r) for r in routes), key=lambda r: (route_cost_per_bit(t, list(r)), r))


def _best_route(t: Topology, s: str, d: str, removed) -> tuple[str, ...] | None:
    routes = _min_hop_routes(t, s, d, removed)
    return routes[0] if routes else None


def _new_idle(state: AllocationState, d: str, route) -> float:
    """Processing, ONU and attributed wired idle charges that ``d`` would add."""
    t = state.t
    node = t[d]
    idle = 0.0 if state.processing_on(d) else node.params.pue * idle_components(node)["proc"]
    for key in state.route_needs(route):
        n, iface = key
        kind = t.kind(n)
        if state.interface_on(key):
            continue
        if kind is NodeKind.EDGE and iface == "onu":
            idle += t[n].params.pue * idle_components(t[n])["onu"]
        elif kind.is_wired:
            # a wired device with any interface in use is already charged
            if not any(state.interface_on(k) for k in state.iface if k[0] == n):
                idle += t[n].params.pue * idle_components(t[n])["net"]
    return idle


def score_candidates(
    state: AllocationState,
    demand: Demand,
    mode: TrafficMode | str = TrafficMode.FT,
    scenario: Scenario | str = Scenario.VEC,
    remaining: float | None = None,
) -> list[CandidateScore]:
    """Rank admissible nodes with spare capacity, most fit first."""
    mode = TrafficMode.parse(mode)
    t = state.t
    remaining = demand.mips if remaining is None else remaining
    out = []
    for d in admissible_destinations(t, demand.source, scenario):
        spare = state.proc.get(d, 0.0)
        if spare < 1.0:
            continue
        route = _best_route(t, demand.source, d, state.removed)
        if route is None:
            continue
        fill = min(remaining, spare)
        traffic = demand.traffic if mode is TrafficMode.FT else demand.traffic * fill / demand.mips
        node = t[d]
        out.append(
            CandidateScore(
                d,
                traffic * route_cost_per_bit(t, list(route)),
                # priced as if d served everything still open, so a node that
                # would need helpers is not favoured by its small share
                node.params.pue * node.params.proc_efficiency * remaining,
                _new_idle(state, d, route),
                route,
                fill,
            )
        )
    source_rate = t[demand.source].params.node_rate
    if source_rate is not None and demand.traffic > source_rate:
        # traffic cannot leave over the vehicle-to-vehicle radio: biggest nodes first
        out.sort(key=lambda c: (-state.proc[c.destination], c.score, c.destination))
    else:
        out.sort(key=lambda c: (c.score, c.destination))
    return out


@dataclass
class Outcome:
    demand: Demand
    served: bool
    placements: dict[str, float]
    trials: int


def allocate_demand(
    state: AllocationState,
    demand: Demand,
    S: int | None = None,
    mode: TrafficMode | str = TrafficMode.FT,
    scenario: Scenario | str = Scenario.VEC,
    log: list[str] | None = None,
) -> Outcome:
    mode = TrafficMode.parse(mode)
    log = log if log is not None else []
    t, s = state.t, demand.source
    snap = state.snapshot()
    state.removed = set()
    state.trial = 1
    ranked = score_candidates(state, demand, mode, scenario)
    log.append(f"demand {demand.id} source={s} traffic={demand.traffic:.6g} mips={demand.mips:.6g} mode={mode.value}")
    for c in ranked:
        log.append(
            f"  score {c.destination} npower={c.npower:.6f} prpower={c.prpower:.6f} idle={c.idle:.6f} "
            f"score={c.score:.6f} route={'>'.join(c.route)}"
        )
    remaining, used = demand.mips, []
    while state.trial <= TRIALS and remaining > TOL_MIPS:
        log.append(f"  trial {state.trial}")
        for c in ranked:
            d = c.destination
            spare = state.proc.get(d, 0.0)
            if remaining <= TOL_MIPS:
                break
            if d in used or spare < 1.0:
                continue
            if S is not None and len(used) + math.ceil(remaining / t[d].params.proc_capacity - 1e-12) > S:
                log.append(f"  skip {d}: split limit")
                continue
            take = min(remaining, spare)
            if 0 < remaining - take < 1.0:
                # leave at least 1 MIPS for whichever node serves the rest
                take = remaining - 1.0
                if take < 1.0:
                    continue
            traffic = demand.traffic if mode is TrafficMode.FT else demand.traffic * take / demand.mips
            # first minimum-hop route with enough spare rate; when none has,
            # the cheapest one loses its short link and the candidate waits
            # for the next trial
            routes = _min_hop_routes(t, s, d, state.removed)
            if not routes:
                log.append(f"  skip {d}: no route")
                continue
            route = next((r for r in routes if state.bottleneck(r, traffic) is None), None)
            if route is None:
                cut = state.bottleneck(routes[0], traffic)
                state.removed.add(cut)
                log.append(f"  remove {cut[0]}>{cut[1]} while routing to {d}")
                continue
            state.commit(s, d, take, traffic, route)
            used.append(d)
            remaining -= take
            log.append(f"  pack {d} mips={take:.6g} traffic={traffic:.6g} route={'>'.join(route)}")
        if remaining > TOL_MIPS:
            state.trial += 1
    if remaining > TOL_MIPS:
        state.restore(snap)
        log.append(f"  blocked after {TRIALS} trials")
        return Outcome(demand, False, {}, TRIALS)
    log.append(f"  served q={len(used)}")
    return Outcome(demand, True, {d: state.placements[(s, d)] for d in used}, state.trial)


@dataclass
class HeuristicResult:
    assignment: Assignment
    served: list[Outcome]
    blocked: list[Demand]
    breakdown: PowerBreakdown
    trace: list[str]

    @property
    def tp(self) -> float:
        return self.breakdown.tp


def run(
    t: Topology,
    demands,
    scenario: Scenario | str = Scenario.VEC,
    S: int | None = None,
    mode: TrafficMode | str = TrafficMode.FT,
) -> HeuristicResult:
    demands = sorted(demands, key=lambda d: (-d.mips, d.id))
    sources = [d.source for d in demands]
    if len(set(sources)) != len(sources):
        raise ValueError("at most one demand per source node")
    state = AllocationState.fresh(t)
    trace: list[str] = []
    served, blocked = [], []
    for dem in demands:
        out = allocate_demand(state, dem, S, mode, scenario, trace)
        (served if out.served else blocked).append(out if out.served else dem)
    a = state.assignment()
    return HeuristicResult(a, served, blocked, total_power(t, a), trace)


__all__ = [
    "AllocationState",
    "CandidateScore",
    "HeuristicResult",
    "Outcome",
    "allocate_demand",
    "run",
    "score_candidates",
]
