"""Exhaustive reference solver for tiny instances, and a generator for them.

The oracle never touches the MILP. It enumerates destination sets and the
set of switched-on relay interfaces, routes every stream on its cheapest
path through switched-on nodes, fills processing at least cost and prices
the winner with the power evaluator.

Routing ignores interface rates. When the winning assignment respects
every rate it is optimal for the rated problem as well; otherwise the
instance is outside what this enumeration can certify and
:class:`OracleEnvelopeError` is raised.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.optimize import linprog

from ..params import NodeKind, default_params
from ..powermodel import Assignment, check_feasibility, idle_components, interface_of, link_cost_per_bit, total_power
from ..scenario import Demand, Scenario, TrafficMode, admissible_destinations
from ..topo import Node, Topology, build_topology, path_links
from .solve import SolveResult, Status, infeasible_result

MAX_CANDIDATES = 8
MAX_DEMANDS = 2
RATE_CONSTRAINTS = {"18", "19", "20", "21", "22"}


class OracleEnvelopeError(ValueError):
    pass


# A switch is one idle charge: ("net", node), ("onu", edge) or ("proc", node).
Switch = tuple[str, str]


def _switch_cost(t: Topology, sw: Switch) -> float:
    node = t[sw[1]]
    return node.params.pue * idle_components(node)[sw[0]]


def _needed_switch(t: Topology, n: str, other: str) -> Switch | None:
    """Idle charge node ``n`` incurs by using its interface towards ``other``."""
    kind = t.kind(n)
    if kind is NodeKind.CLOUD_SERVER:
        return None
    if kind is NodeKind.EDGE and interface_of(kind, t.kind(other)) == "onu":
        return ("onu", n)
    return ("net", n)


@dataclass
class _Search:
    t: Topology
    demands: tuple[Demand, ...]
    mode: TrafficMode
    weight: dict[tuple[str, str], float]  # W per Mb/s
    link_switches: dict[tuple[str, str], frozenset[Switch]]

    def distances(self, on: frozenset[Switch]) -> dict[str, tuple[dict[str, float], dict[str, list[str]]]]:
        g = nx.DiGraph()
        for key, sws in self.link_switches.items():
            if sws <= on:
                g.add_edge(*key, weight=self.weight[key])
        out = {}
        for dem in self.demands:
            if dem.source in g:
                out[dem.source] = nx.single_source_dijkstra(g, dem.source, weight="weight")
            else:
                out[dem.source] = ({dem.source: 0.0}, {dem.source: [dem.source]})
        return out

    def unit_costs(self, sets: tuple[tuple[str, ...], ...], dist) -> dict[tuple[str, str], tuple[float, float]] | None:
        """Per pair: (fixed W, W per MIPS) for the given routing distances."""
        out = {}
        for dem, dests in zip(self.demands, sets):
            lengths = dist[dem.source][0]
            for d in dests:
                if d not in lengths:
                    return None
                node = self.t[d]
                per_mips = node.params.pue * node.params.proc_efficiency
                if self.mode is TrafficMode.FT:
                    out[(dem.source, d)] = (dem.mbps * lengths[d], per_mips)
                else:
                    out[(dem.source, d)] = (0.0, per_mips + dem.mbps / dem.mips * lengths[d])
        return out

    def fill(self, sets, costs) -> tuple[float, dict[tuple[str, str], float]] | None:
        """Least-cost processing split with every selected pair given >= 1 MIPS."""
        pairs = [(dem.source, d) for dem, dests in zip(self.demands, sets) for d in dests]
        residual = {}
        for _, d in pairs:
            residual[d] = residual.get(d, self.t[d].params.proc_capacity) - 1.0
        if any(r < -1e-9 for r in residual.values()):
            return None
        need = {dem.source: dem.mips - len(dests) for dem, dests in zip(self.demands, sets)}
        if any(n < -1e-9 for n in need.values()):
            return None
        fixed = sum(costs[p][0] + costs[p][1] for p in pairs)
        if len(self.demands) == 1:
            s = self.demands[0].source
            left, om = need[s], {}
            for p in sorted(pairs, key=lambda p: (costs[p][1], p[1])):
                take = min(left, max(residual[p[1]], 0.0))
                om[p] = 1.0 + take
                left -= take
            if left > 1e-6:
                return None
            return fixed + sum(costs[p][1] * (om[p] - 1.0) for p in pairs), om
        # two demands: a small transportation problem
        c = np.array([costs[p][1] for p in pairs])
        dests = sorted(residual)
        a_ub = np.array([[1.0 if p[1] == d else 0.0 for p in pairs] for d in dests])
        b_ub = np.array([max(residual[d], 0.0) for d in dests])
        srcs = [dem.source for dem in self.demands]
        a_eq = np.array([[1.0 if p[0] == s else 0.0 for p in pairs] for s in srcs])
        b_eq = np.array([need[s] for s in srcs])
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if res.status != 0:
            return None
        om = {p: 1.0 + float(x) for p, x in zip(pairs, res.x)}
        return fixed + float(res.fun), om


def brute_force_oracle(
    t: Topology,
    demands,
    scenario: Scenario | str = Scenario.VEC,
    S: int | None = None,
    mode: TrafficMode | str = TrafficMode.FT,
) -> SolveResult:
    demands = tuple(sorted(demands, key=lambda d: d.id))
    scenario, mode = Scenario.parse(scenario), TrafficMode.parse(mode)
    if not demands or len(demands) > MAX_DEMANDS:
        raise OracleEnvelopeError(f"oracle handles 1..{MAX_DEMANDS} demands")
    if len({d.source for d in demands}) != len(demands):
        raise OracleEnvelopeError("at most one demand per source")
    cands = {d.source: admissible_destinations(t, d.source, scenario) for d in demands}
    if len(set().union(*cands.values())) > MAX_CANDIDATES:
        raise OracleEnvelopeError(f"more than {MAX_CANDIDATES} candidate destinations")

    link_switches = {}
    for l in t.links:
        sws = {_needed_switch(t, l.src, l.dst), _needed_switch(t, l.dst, l.src)} - {None}
        link_switches[l.key] = frozenset(sws)
    weight = {l.key: link_cost_per_bit(t, *l.key) * 1e6 for l in t.links}
    search = _Search(t, demands, mode, weight, link_switches)
    all_switches = frozenset().union(*link_switches.values())

    # Wired devices beyond the access node only lead to the cloud server, so
    # they are all on exactly when the cloud is a destination.
    wired = {n.id for n in t.nodes if n.kind.is_wired}
    access = {n for n in wired if any(t.kind(m) is NodeKind.EDGE for m in t.neighbors(n))}
    if len(access) > 1:
        raise OracleEnvelopeError("oracle expects a single access node on the wired side")
    cloud_side = frozenset(("net", n) for n in wired)
    sources = frozenset(("net", d.source) for d in demands)
    units = [frozenset([sw]) for sw in sorted(all_switches - sources) if sw[1] not in wired or sw[1] in access]
    limit = S if S is not None else MAX_CANDIDATES
    per_demand = []
    for dem in demands:
        options = [
            combo
            for k in range(1, min(limit, len(cands[dem.source])) + 1)
            for combo in itertools.combinations(cands[dem.source], k)
        ]
        per_demand.append(options)

    # Lower bound of each destination choice: every interface switched on.
    full_dist = search.distances(all_switches)
    source_idle = sum(_switch_cost(t, ("net", d.source)) for d in demands)
    queue = []
    for sets in itertools.product(*per_demand):
        costs = search.unit_costs(sets, full_dist)
        if costs is None:
            continue
        filled = search.fill(sets, costs)
        if filled is None:
            continue
        dests = sorted(set().union(*sets))
        proc_idle = sum(_switch_cost(t, ("proc", d)) for d in dests)
        forced = {("net", d) for d in dests if t.kind(d) is NodeKind.VEHICLE}
        if any(t.kind(d) is NodeKind.CLOUD_SERVER for d in dests):
            forced |= cloud_side
        forced = frozenset(forced - sources)
        bound = filled[0] + proc_idle + source_idle + sum(_switch_cost(t, sw) for sw in forced)
        heapq.heappush(queue, (bound, sets, forced, proc_idle))

    # Relay switch sets in ascending idle cost, shared by every destination choice.
    relay_sets = sorted(
        (sum(_switch_cost(t, sw) for u in combo for sw in u), frozenset().union(*combo))
        for k in range(len(units) + 1)
        for combo in itertools.combinations(units, k)
    )
    dist_cache: dict[frozenset[Switch], dict] = {}
    best = (math.inf, None, None, None)
    while queue and queue[0][0] < best[0] * (1 - 1e-12):
        bound, sets, forced, proc_idle = heapq.heappop(queue)
        for idle, relays in relay_sets:
            if bound + idle >= best[0]:
                break
            if relays & forced:
                continue  # the same switch set is reached without the overlap
            on = relays | forced | sources
            if on not in dist_cache:
                dist_cache[on] = search.distances(on)
            dist = dist_cache[on]
            costs = search.unit_costs(sets, dist)
            if costs is None:
                continue
            filled = search.fill(sets, costs)
            if filled is None:
                continue
            total = filled[0] + proc_idle + sum(_switch_cost(t, sw) for sw in on)
            if total < best[0] - 1e-12:
                best = (total, sets, dist, filled[1])

    if best[1] is None:
        return infeasible_result({"oracle": True})
    _, sets, dist, om = best
    a = Assignment()
    for dem, dests in zip(demands, sets):
        paths = dist[dem.source][1]
        for d in dests:
            a.placements[(dem.source, d)] = om[(dem.source, d)]
            F = dem.traffic if mode is TrafficMode.FT else dem.traffic * om[(dem.source, d)] / dem.mips
            a.traffic[(dem.source, d)] = F
            a.flows[(dem.source, d)] = {k: F for k in path_links(paths[d])}
    report = check_feasibility(t, a, demands, S=S, mode=mode, scenario=scenario)
    if not report.ok:
        if report.constraints() <= RATE_CONSTRAINTS:
            raise OracleEnvelopeError(f"cheapest uncapacitated routing breaks interface rates: {report}")
        raise AssertionError(f"oracle built an invalid assignment:\n{report}")
    bd = total_power(t, a)
    return SolveResult(Status.OPTIMAL, a, bd.tp, bd.tp, bd, {"oracle": True, "search_value": best[0]})


# ---------------------------------------------------------------------------
# random tiny instances


@dataclass(frozen=True)
class OracleCase:
    topology: Topology
    demands: tuple[Demand, ...]
    scenario: Scenario
    S: int | None
    mode: TrafficMode

    def describe(self) -> str:
        ds = ", ".join(f"{d.source}:{d.mbps:g}Mb/s/{d.mips:g}MIPS" for d in self.demands)
        return f"{len(self.topology.vehicles)}v/{len(self.topology.edges)}e {self.scenario.value} {self.mode.value} S={self.S} [{ds}]"


def random_case(rng: np.random.Generator) -> OracleCase:
    """A small car park with one or two demands, inside the oracle envelope."""
    n_edges = int(rng.integers(1, 3))
    n_veh = int(rng.integers(3, 6 - n_edges + 1))
    vparams = default_params(NodeKind.VEHICLE)
    eparams = default_params(NodeKind.EDGE)
    vehicles = []
    for i in range(n_veh):
        cap = float(rng.choice([800.0, 1600.0, 3200.0]))
        p = vparams.with_overrides({"proc_capacity": cap}) if cap != vparams.proc_capacity else vparams
        vehicles.append(Node(f"v{i + 1}", NodeKind.VEHICLE, p, *np.round(rng.uniform(0, 30, 2), 3)))
    edges = []
    for j in range(n_edges):
        cap = float(rng.choice([2400.0, 9600.0]))
        p = eparams.with_overrides({"proc_capacity": cap}) if cap != eparams.proc_capacity else eparams
        edges.append(Node(f"e{j + 1}", NodeKind.EDGE, p, *np.round(rng.uniform(-20, 50, 2), 3)))
    controller = {v.id: edges[i % n_edges].id for i, v in enumerate(vehicles)}
    t = build_topology(vehicles, edges, controller)

    n_dem = int(rng.integers(1, 3))
    sources = rng.choice([v.id for v in vehicles], size=n_dem, replace=False)
    demands = tuple(
        Demand(i, str(s), float(rng.choice([0.5, 1, 2, 4, 8])) * 1e6, float(rng.integers(5, 80)) * 100.0)
        for i, s in enumerate(sorted(sources))
    )
    scenario = Scenario(rng.choice([s.value for s in Scenario]))
    S = [None, 1, 2, 3][int(rng.integers(0, 4))]
    mode = TrafficMode(rng.choice(["ft", "pt"]))
    return OracleCase(t, demands, scenario, S, mode)

