"""MILP instance of the placement-and-routing problem.

Model units are MIPS, Mb/s and W; the assignment boundary converts flows back
to bit/s.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

from ..params import NodeKind
from ..powermodel import Assignment, idle_components, interface_capacity, interface_of, link_cost_per_bit
from ..scenario import Demand, Scenario, TrafficMode, admissible_destinations
from ..topo import Topology

MBPS = 1e6
# Lower-bound coefficient of the traffic indicators: a node flagged as used must
# carry at least 1 bit/s.
TRAFFIC_FLOOR = 1e-6

CONSTRAINT_TAGS = frozenset(str(i) for i in range(12, 32))


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Var:
    name: str
    binary: bool
    lb: float
    ub: float


@dataclass(frozen=True)
class Constraint:
    tag: str
    name: str
    coeffs: tuple[tuple[int, float], ...]
    sense: str  # "<=", ">=", "="
    rhs: float


@dataclass(frozen=True)
class FlowGroup:
    """Flow variables sharing one conservation system.

    Per-destination form has one group per (source, destination); the
    aggregated form has one group per source, sinking at every candidate.
    """

    source: str
    sinks: tuple[str, ...]
    links: tuple[tuple[str, str], ...]
    prefix: str

    def var_name(self, a: str, b: str) -> str:
        return f"{self.prefix}_{a}_{b}"


@dataclass
class ModelInstance:
    topology: Topology
    demands: tuple[Demand, ...]
    scenario: Scenario
    S: int | None
    mode: TrafficMode
    variables: list[Var] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    index: dict[str, int] = field(default_factory=dict)
    candidates: dict[str, list[str]] = field(default_factory=dict)
    aggregate: bool = False
    groups: dict[str, FlowGroup] = field(default_factory=dict)
    big_a: dict[str, float] = field(default_factory=dict)

    # -- construction helpers -------------------------------------------------

    def add_var(self, name: str, *, binary: bool = False, lb: float = 0.0, ub: float = math.inf, cost: float = 0.0) -> int:
        if name in self.index:
            raise ModelError(f"duplicate variable {name}")
        i = len(self.variables)
        self.variables.append(Var(name, binary, lb, 1.0 if binary else ub))
        self.index[name] = i
        if cost:
            self.objective[i] = cost
        return i

    def add_constraint(self, tag: str, name: str, coeffs: Mapping[int, float] | Iterable[tuple[int, float]], sense: str, rhs: float) -> None:
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        merged: dict[int, float] = defaultdict(float)
        for i, c in items:
            merged[i] += c
        self.constraints.append(Constraint(tag, name, tuple(sorted((i, c) for i, c in merged.items() if c)), sense, rhs))

    # -- queries ----------------------------------------------------------------

    def var(self, name: str) -> int:
        return self.index[name]

    def tags(self) -> set[str]:
        return {c.tag for c in self.constraints}

    def names(self, prefix: str) -> list[str]:
        return [v.name for v in self.variables if v.name.startswith(prefix)]

    def binaries(self) -> list[str]:
        return [v.name for v in self.variables if v.binary]

    def demand(self, source: str) -> Demand:
        for d in self.demands:
            if d.source == source:
                return d
        raise KeyError(source)

    def aggregated(self) -> ModelInstance:
        """The same instance with per-source flow variables."""
        if self.aggregate:
            return self
        return build_model(self.topology, self.demands, self.scenario, self.S, self.mode, aggregate=True)

    def objective_value(self, x: np.ndarray) -> float:
        return float(sum(c * x[i] for i, c in self.objective.items()))

    def matrices(self):
        """Objective vector, sparse constraint matrix, row bounds, variable bounds, integrality."""
        n = len(self.variables)
        c = np.zeros(n)
        for i, v in self.objective.items():
            c[i] = v
        rows, cols, vals = [], [], []
        lo = np.empty(len(self.constraints))
        hi = np.empty(len(self.constraints))
        for r, con in enumerate(self.constraints):
            for i, v in con.coeffs:
                rows.append(r)
                cols.append(i)
                vals.append(v)
            lo[r] = con.rhs if con.sense in (">=", "=") else -np.inf
            hi[r] = con.rhs if con.sense in ("<=", "=") else np.inf
        a = sparse.csr_array((vals, (rows, cols)), shape=(len(self.constraints), n))
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        integrality = np.array([1 if v.binary else 0 for v in self.variables])
        return c, a, lo, hi, lb, ub, integrality

    # -- solutions ----------------------------------------------------------------

    def assignment_from_values(self, values: Mapping[str, float] | np.ndarray, *, clean: bool = True) -> Assignment:
        """Turn variable values into an :class:`Assignment` in native units.

        With ``clean`` the processing split is renormalised to the demand, the
        traffic is recomputed from the traffic mode and each commodity's flow
        is rebuilt from its path decomposition, so conservation holds to
        floating-point precision.
        """
        if isinstance(values, np.ndarray):
            get = lambda name: float(values[self.index[name]]) if name in self.index else 0.0  # noqa: E731
        else:
            get = lambda name: float(values.get(name, 0.0))  # noqa: E731
        a = Assignment()
        for demand in self.demands:
            s = demand.source
            raw = {d: max(get(f"om_{s}_{d}"), 0.0) for d in self.candidates[s]}
            if clean:
                raw = {d: om for d, om in raw.items() if om > 1e-6}
                total = sum(raw.values())
                if total > 0:
                    raw = {d: om * demand.mips / total for d, om in raw.items()}
            for d, om in raw.items():
                if om <= 0:
                    continue
                a.placements[(s, d)] = om
                if clean:
                    a.traffic[(s, d)] = demand.traffic if self.mode is TrafficMode.FT else demand.traffic * om / demand.mips
                else:
                    a.traffic[(s, d)] = get(f"f_{s}_{d}") * MBPS
        for g in self.groups.values():
            flow = {(x, y): get(g.var_name(x, y)) * MBPS for x, y in g.links}
            flow = {k: v for k, v in flow.items() if v > 0}
            sinks = {d: a.traffic[(g.source, d)] for d in g.sinks if (g.source, d) in a.traffic}
            if not sinks:
                continue
            if clean:
                for d, f in split_flow(flow, g.source, sinks).items():
                    a.flows[(g.source, d)] = rebuild_flow(f, g.source, d, sinks[d])
            elif len(g.sinks) == 1:
                a.flows[(g.source, g.sinks[0])] = flow
            else:
                a.flows.update(split_flow(flow, g.source, sinks))
        return a


def decompose_flow(flow: Mapping[tuple[str, str], float], s: str, d: str, tol: float = 1e-9) -> list[tuple[list[str], float]]:
    """Split a single-commodity flow into source-to-sink paths (cycles dropped)."""
    residual = {k: v for k, v in flow.items() if v > tol}
    out_edges: dict[str, list[str]] = defaultdict(list)
    for n, m in sorted(residual):
        out_edges[n].append(m)
    paths = []
    while True:
        # depth-first walk along positive arcs, avoiding revisits
        path, seen = [s], {s}
        while path[-1] != d:
            nxt = next((m for m in out_edges[path[-1]] if residual.get((path[-1], m), 0) > tol and m not in seen), None)
            if nxt is None:
                if len(path) == 1:
                    return paths
                dead = (path[-2], path[-1])
                residual[dead] = 0.0
                seen.discard(path.pop())
                continue
            path.append(nxt)
            seen.add(nxt)
        amount = min(residual[(a, b)] for a, b in zip(path, path[1:]))
        for a, b in zip(path, path[1:]):
            residual[(a, b)] -= amount
        paths.append((path, amount))


def split_flow(
    flow: Mapping[tuple[str, str], float], s: str, sinks: Mapping[str, float], tol: float = 1e-9
) -> dict[str, dict[tuple[str, str], float]]:
    """Separate a single-source flow into one flow per sink.

    Walks positive arcs from ``s`` and stops at the first node that still
    expects traffic; the path carries the bottleneck amount. Cycles met on
    the way are cancelled.
    """
    scale = max(sinks.values(), default=0.0)
    eps = max(tol * scale, 1e-12)
    residual = {k: v for k, v in flow.items() if v > eps}
    want = {d: f for d, f in sinks.items() if f > eps}
    out_edges: dict[str, list[str]] = defaultdict(list)
    for n, m in sorted(residual):
        out_edges[n].append(m)
    parts: dict[str, dict[tuple[str, str], float]] = {d: defaultdict(float) for d in sinks}
    while want:
        path, seen = [s], {s: 0}
        while path[-1] == s or path[-1] not in want:
            here = path[-1]
            nxt = next((m for m in out_edges[here] if residual.get((here, m), 0.0) > eps), None)
            if nxt is None:
                if len(path) == 1:
                    return {d: dict(p) for d, p in parts.items()}
                residual[(path[-2], here)] = 0.0
                del seen[path.pop()]
                continue
            if nxt in seen:
                # cancel the cycle nxt -> ... -> here -> nxt
                cycle = path[seen[nxt]:] + [nxt]
                amount = min(residual[(x, y)] for x, y in zip(cycle, cycle[1:]))
                for x, y in zip(cycle, cycle[1:]):
                    residual[(x, y)] -= amount
                for n in path[seen[nxt] + 1:]:
                    del seen[n]
                path = path[: seen[nxt] + 1]
                continue
            seen[nxt] = len(path)
            path.append(nxt)
        d = path[-1]
        amount = min(min(residual[(x, y)] for x, y in zip(path, path[1:])), want[d])
        for x, y in zip(path, path[1:]):
            residual[(x, y)] -= amount
            parts[d][(x, y)] += amount
        want[d] -= amount
        if want[d] <= eps:
            del want[d]
    return {d: dict(p) for d, p in parts.items()}


def rebuild_flow(flow: Mapping[tuple[str, str], float], s: str, d: str, F: float) -> dict[tuple[str, str], float]:
    paths = decompose_flow(flow, s, d, tol=max(1e-9 * F, 1e-12))
    total = sum(x for _, x in paths)
    if total <= 0:
        return {}
    scale = F / total
    out: dict[tuple[str, str], float] = defaultdict(float)
    for path, x in paths:
        for a, b in zip(path, path[1:]):
            out[(a, b)] += x * scale
    return dict(out)


def _group_links(t: Topology, s: str, d: str | None) -> tuple[tuple[str, str], ...]:
    # Arcs into the source, out of a lone destination or out of a cloud server
    # can only carry circulations, which never lower the objective.
    return tuple(
        l.key
        for l in t.links
        if l.dst != s and l.src != d and t.kind(l.src) is not NodeKind.CLOUD_SERVER
    )


def build_model(
    t: Topology,
    demands: Iterable[Demand],
    scenario: Scenario | str = Scenario.VEC,
    S: int | None = None,
    mode: TrafficMode | str = TrafficMode.FT,
    *,
    aggregate: bool = False,
) -> ModelInstance:
    """Assemble objective and constraints for the given demands.

    ``S=None`` leaves the number of destinations per demand unbounded. With
    ``aggregate`` the flows of each source share one set of link variables
    ``lam_s_n_m`` instead of one set per destination. Link costs and rate
    caps only see link totals, so both forms have the same optimum; the
    aggregated one is much smaller.
    """
    demands = tuple(demands)
    scenario = Scenario.parse(scenario)
    mode = TrafficMode.parse(mode)
    if not demands:
        raise ModelError("empty demand set")
    if S is not None and S < 1:
        raise ModelError("split limit S must be >= 1")
    sources = [d.source for d in demands]
    if len(set(sources)) != len(sources):
        raise ModelError("at most one demand per source node")
    for d in demands:
        if d.source not in t:
            raise ModelError(f"unknown source {d.source!r}")
        if t.kind(d.source) is NodeKind.CLOUD_SERVER:
            raise ModelError("cloud servers cannot generate demands")

    m = ModelInstance(t, demands, scenario, S, mode, aggregate=aggregate)
    for dem in demands:
        m.candidates[dem.source] = admissible_destinations(t, dem.source, scenario)
    a_proc = sum(d.mips for d in demands)
    max_traffic = 2 * sum(d.mbps * len(m.candidates[d.source]) for d in demands)
    m.big_a["processing"] = a_proc

    # ---- variables
    proc_nodes = sorted({d for c in m.candidates.values() for d in c}, key=[n.id for n in t.nodes].index)
    link_cost = {l.key: link_cost_per_bit(t, *l.key) * MBPS for l in t.links}
    for dem in demands:
        s = dem.source
        for d in m.candidates[s]:
            node = t[d]
            m.add_var(f"om_{s}_{d}", ub=min(dem.mips, node.params.proc_capacity), cost=node.params.pue * node.params.proc_efficiency)
        for d in m.candidates[s]:
            m.add_var(f"f_{s}_{d}", ub=dem.mbps)
        if aggregate:
            m.groups[s] = FlowGroup(s, tuple(m.candidates[s]), _group_links(t, s, None), f"lam_{s}")
        else:
            for d in m.candidates[s]:
                m.groups[f"{s}_{d}"] = FlowGroup(s, (d,), _group_links(t, s, d), f"lam_{s}_{d}")
        for key, g in m.groups.items():
            if g.source == s:
                for a, b in g.links:
                    m.add_var(g.var_name(a, b), cost=link_cost[(a, b)])
        for d in m.candidates[s]:
            m.add_var(f"a_{s}_{d}", binary=True)
        m.add_var(f"q_{s}", ub=len(m.candidates[s]))
    for node in t.nodes:
        idle = idle_components(node)
        m.add_var(f"bnet_{node.id}", binary=True, cost=node.params.pue * idle["net"])
    for n in proc_nodes:
        node = t[n]
        m.add_var(f"bpr_{n}", binary=True, cost=node.params.pue * idle_components(node)["proc"])
    for e in t.edges:
        node = t[e]
        m.add_var(f"bonu_{e}", binary=True, cost=node.params.pue * idle_components(node)["onu"])

    v = m.var
    # ---- processing
    for dem in demands:
        s = dem.source
        m.add_constraint("12", f"c12_{s}", {v(f"om_{s}_{d}"): 1.0 for d in m.candidates[s]}, "=", dem.mips)
    served_by: dict[str, list[str]] = defaultdict(list)
    for dem in demands:
        for d in m.candidates[dem.source]:
            served_by[d].append(dem.source)
    for d in proc_nodes:
        m.add_constraint("13", f"c13_{d}", {v(f"om_{s}_{d}"): 1.0 for s in served_by[d]}, "<=", t[d].params.proc_capacity)
    for dem in demands:
        s = dem.source
        for d in m.candidates[s]:
            om, al = v(f"om_{s}_{d}"), v(f"a_{s}_{d}")
            m.add_constraint("14", f"c14_{s}_{d}", {om: 1.0, al: -1.0}, ">=", 0.0)
            m.add_constraint("15", f"c15_{s}_{d}", {om: 1.0, al: -min(dem.mips, t[d].params.proc_capacity)}, "<=", 0.0)
            if mode is TrafficMode.FT:
                m.add_constraint("16", f"c16_{s}_{d}", {v(f"f_{s}_{d}"): 1.0, al: -dem.mbps}, "=", 0.0)
            else:
                m.add_constraint("31", f"c31_{s}_{d}", {v(f"f_{s}_{d}"): 1.0, om: -dem.mbps / dem.mips}, "=", 0.0)

    # ---- flow conservation
    for key, g in m.groups.items():
        rows: dict[str, dict[int, float]] = defaultdict(dict)
        for a, b in g.links:
            i = v(g.var_name(a, b))
            rows[a][i] = rows[a].get(i, 0.0) + 1.0
            rows[b][i] = rows[b].get(i, 0.0) - 1.0
        for node in t.nodes:
            n = node.id
            coeffs = dict(rows.get(n, {}))
            if n == g.source:
                for d in g.sinks:
                    coeffs[v(f"f_{n}_{d}")] = -1.0
            elif n in g.sinks:
                coeffs[v(f"f_{g.source}_{n}")] = 1.0
            if coeffs:
                m.add_constraint("17", f"c17_{key}_{n}", coeffs, "=", 0.0)

    # ---- interface rates and traffic indicators
    incident: dict[str, dict[str, list[int]]] = {n.id: defaultdict(list) for n in t.nodes}
    for g in m.groups.values():
        for a, b in g.links:
            i = v(g.var_name(a, b))
            incident[a][interface_of(t.kind(a), t.kind(b))].append(i)
            incident[b][interface_of(t.kind(b), t.kind(a))].append(i)
    rate_tag = {"wired": "18", "dsrc": "19", "wifi": "20", "ap": "21", "onu": "22"}
    for node in t.nodes:
        n = node.id
        for iface, idx in incident[n].items():
            cap = interface_capacity(node, iface) / MBPS
            if math.isfinite(cap):
                m.add_constraint(rate_tag[iface], f"c{rate_tag[iface]}_{n}_{iface}", {i: 1.0 for i in idx}, "<=", cap)
        if node.kind is NodeKind.EDGE:
            groups = [("bnet", ["ap"], "25", "26"), ("bonu", ["onu"], "29", "30")]
        else:
            groups = [("bnet", list(incident[n]), "25", "26")]
        for flag, ifaces, lo_tag, hi_tag in groups:
            b = v(f"{flag}_{n}")
            idx = [i for iface in ifaces for i in incident[n].get(iface, [])]
            if not idx:
                m.add_constraint(hi_tag, f"c{hi_tag}_{n}", {b: 1.0}, "<=", 0.0)
                continue
            # tightest valid big constant: the node's own interface rates
            big = min(max_traffic, sum(interface_capacity(node, i) / MBPS for i in ifaces))
            m.big_a[f"{flag}_{n}"] = big
            coeffs = {i: 1.0 for i in idx}
            m.add_constraint(lo_tag, f"c{lo_tag}_{n}", {**coeffs, b: -TRAFFIC_FLOOR}, ">=", 0.0)
            m.add_constraint(hi_tag, f"c{hi_tag}_{n}", {**coeffs, b: -big}, "<=", 0.0)

    # ---- splits
    for dem in demands:
        s = dem.source
        q = v(f"q_{s}")
        m.add_constraint("23", f"c23_{s}", {q: 1.0, **{v(f"a_{s}_{d}"): -1.0 for d in m.candidates[s]}}, "=", 0.0)
        if S is not None:
            m.add_constraint("24", f"c24_{s}", {q: 1.0}, "<=", float(S))

    # ---- processing indicators
    for d in proc_nodes:
        om = {v(f"om_{s}_{d}"): 1.0 for s in served_by[d]}
        b = v(f"bpr_{d}")
        m.add_constraint("27", f"c27_{d}", {**om, b: -1.0}, ">=", 0.0)
        m.add_constraint("28", f"c28_{d}", {**om, b: -a_proc}, "<=", 0.0)
    # Disaggregated forms of the same indicator links. Redundant for integer
    # points, they tighten the relaxation considerably.
    for dem in demands:
        s = dem.source
        for d in m.candidates[s]:
            al = v(f"a_{s}_{d}")
            cap = min(dem.mips, t[d].params.proc_capacity)
            m.add_constraint("28", f"c28_{s}_{d}", {v(f"om_{s}_{d}"): 1.0, v(f"bpr_{d}"): -cap}, "<=", 0.0)
            m.add_constraint("26", f"c26_{s}_{d}_src", {al: 1.0, v(f"bnet_{s}"): -1.0}, "<=", 0.0)
            if t.kind(d) is NodeKind.VEHICLE:
                m.add_constraint("26", f"c26_{s}_{d}_dst", {al: 1.0, v(f"bnet_{d}"): -1.0}, "<=", 0.0)
    return m
