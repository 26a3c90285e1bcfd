"""Typed network graph of the vehicular-edge-cloud architecture."""

from __future__ import annotations

import enum
import itertools
import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Iterator

import networkx as nx

from .params import WIRED_CHAIN, NodeKind, NodeParams, default_params

__all__ = [
    "Medium",
    "Node",
    "Link",
    "Topology",
    "TopologyError",
    "SchemaError",
    "ValidationError",
    "canonical_parking_lot",
    "load_topology",
    "save_topology",
    "topology_from_dict",
    "topology_to_dict",
    "min_hop_routes",
    "shortest_routes",
]

NODE_ID = re.compile(r"^[A-Za-z][A-Za-z0-9]*$")


class TopologyError(ValueError):
    pass


class SchemaError(TopologyError):
    """Malformed topology document; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ValidationError(TopologyError):
    pass


class Medium(str, enum.Enum):
    DSRC = "dsrc"
    WIFI = "wifi"
    FIBER = "fiber"

    @property
    def wireless(self) -> bool:
        return self is not Medium.FIBER


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    params: NodeParams
    x: float | None = None
    y: float | None = None

    @property
    def position(self) -> tuple[float, float] | None:
        if self.x is None or self.y is None:
            return None
        return (self.x, self.y)


@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    medium: Medium
    distance_m: float
    rate_bps: float

    @property
    def key(self) -> tuple[str, str]:
        return (self.src, self.dst)


_FIBER_PAIRS = {
    frozenset((NodeKind.EDGE, NodeKind.OLT)),
    frozenset((NodeKind.CLOUD_SWITCH, NodeKind.CLOUD_SERVER)),
} | {frozenset(pair) for pair in zip(WIRED_CHAIN, WIRED_CHAIN[1:])}


def _medium_allowed(medium: Medium, a: NodeKind, b: NodeKind) -> bool:
    if medium is Medium.DSRC:
        return a is NodeKind.VEHICLE and b is NodeKind.VEHICLE
    if medium is Medium.WIFI:
        pair = {a, b}
        return pair <= {NodeKind.VEHICLE, NodeKind.EDGE} and NodeKind.EDGE in pair
    return frozenset((a, b)) in _FIBER_PAIRS


@dataclass(frozen=True, eq=True)
class Topology:
    """Immutable node/link set with derived neighbour and link indices."""

    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        if self.validate:
            problems = self.violations()
            if problems:
                raise ValidationError("; ".join(problems))

    @cached_property
    def node_map(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def link_map(self) -> dict[tuple[str, str], Link]:
        return {l.key: l for l in self.links}

    @cached_property
    def _neighbors(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for l in self.links:
            if l.src in out:
                out[l.src].append(l.dst)
        return {k: tuple(sorted(v)) for k, v in out.items()}

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(n.id for n in self.nodes)
        g.add_edges_from(l.key for l in self.links)
        return g

    def __getitem__(self, node_id: str) -> Node:
        return self.node_map[node_id]

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.node_map

    def neighbors(self, node_id: str) -> tuple[str, ...]:
        return self._neighbors[node_id]

    def link(self, a: str, b: str) -> Link:
        return self.link_map[(a, b)]

    def kind(self, node_id: str) -> NodeKind:
        return self.node_map[node_id].kind

    def ids(self, *kinds: NodeKind) -> list[str]:
        return [n.id for n in self.nodes if n.kind in kinds]

    @property
    def vehicles(self) -> list[str]:
        return self.ids(NodeKind.VEHICLE)

    @property
    def edges(self) -> list[str]:
        return self.ids(NodeKind.EDGE)

    @property
    def cloud_server(self) -> str:
        return self.ids(NodeKind.CLOUD_SERVER)[0]

    def controller(self, vehicle: str) -> str | None:
        """Edge node the vehicle reaches over WiFi (first one, by id)."""
        for m in self.neighbors(vehicle):
            if self.kind(m) is NodeKind.EDGE:
                return m
        return None

    def processing_capacity(self, *kinds: NodeKind) -> float:
        return sum(n.params.proc_capacity for n in self.nodes if not kinds or n.kind in kinds)

    def violations(self) -> list[str]:
        out: list[str] = []
        seen: set[str] = set()
        for n in self.nodes:
            if not NODE_ID.match(n.id):
                out.append(f"node id {n.id!r} must be alphanumeric and start with a letter")
            if n.id in seen:
                out.append(f"duplicate node id {n.id!r}")
            seen.add(n.id)
            for p in n.params.violations():
                out.append(f"node {n.id}: {p}")
            if n.kind in (NodeKind.OLT, *WIRED_CHAIN[1:]) and n.params.proc_capacity != 0:
                out.append(f"node {n.id}: network devices have no processing capacity")
        servers = [n for n in self.nodes if n.kind is NodeKind.CLOUD_SERVER]
        if len(servers) != 1:
            out.append(f"expected exactly one cloud server, found {len(servers)}")
        keys = set()
        for l in self.links:
            if l.src not in seen or l.dst not in seen:
                out.append(f"link {l.src}->{l.dst} references an unknown node")
                continue
            if l.src == l.dst:
                out.append(f"self-loop at {l.src}")
            if l.key in keys:
                out.append(f"duplicate link {l.src}->{l.dst}")
            keys.add(l.key)
            a, b = self.node_map[l.src].kind, self.node_map[l.dst].kind
            if not _medium_allowed(l.medium, a, b):
                out.append(f"link {l.src}->{l.dst}: {l.medium.value} not allowed between {a.value} and {b.value}")
            if not l.rate_bps > 0:
                out.append(f"link {l.src}->{l.dst}: rate must be > 0")
            if l.medium.wireless and not l.distance_m > 0:
                out.append(f"link {l.src}->{l.dst}: wireless distance must be > 0")
        for a, b in keys:
            if (b, a) not in keys:
                out.append(f"link {a}->{b} has no reverse link")
        if len(servers) == 1 and not out:
            out.extend(self._chain_violations(servers[0].id))
        return out

    def _chain_violations(self, server: str) -> list[str]:
        fiber = nx.Graph()
        fiber.add_edges_from(l.key for l in self.links if l.medium is Medium.FIBER)
        out = []
        for kind in WIRED_CHAIN:
            if not self.ids(kind):
                out.append(f"wired chain has no {kind.value} device")
        for n in self.ids(NodeKind.OLT, NodeKind.EDGE):
            if n in fiber and not nx.has_path(fiber, n, server):
                out.append(f"{n} is not connected to the cloud server over fiber")
        for e in self.edges:
            if e not in fiber:
                out.append(f"edge {e} has no fiber link to an OLT")
        return out


# ---------------------------------------------------------------------------
# route queries


def _route_key(path: list[str]) -> tuple[int, tuple[str, ...]]:
    return (len(path) - 1, tuple(path))


def _pruned_graph(t: Topology, exclude: Iterable[tuple[str, str]]) -> nx.DiGraph:
    exclude = set(exclude)
    if not exclude:
        return t.graph
    g = t.graph.copy()
    g.remove_edges_from(e for e in exclude if g.has_edge(*e))
    return g


def min_hop_routes(
    t: Topology,
    s: str,
    d: str,
    exclude: Iterable[tuple[str, str]] = (),
    limit: int | None = None,
) -> list[list[str]]:
    """Simple paths from ``s`` to ``d`` ordered by hop count, then node ids.

    ``exclude`` holds directed links that may not be used. With ``limit`` the
    first ``limit`` routes of that order are returned; without it every
    simple path is enumerated, which is only sensible on small graphs.
    """
    if s == d:
        raise ValueError("source and destination must differ")
    for n in (s, d):
        if n not in t:
            raise KeyError(n)
    g = _pruned_graph(t, exclude)
    gen = nx.shortest_simple_paths(g, s, d)
    out: list[list[str]] = []
    try:
        for path in gen:
            # shortest_simple_paths yields by length; finish the current tie
            # group before truncating so the id order is complete.
            if limit is not None and len(out) >= limit and len(path) > len(out[-1]):
                break
            out.append(path)
    except nx.NetworkXNoPath:
        return []
    out.sort(key=_route_key)
    return out if limit is None else out[:limit]


def shortest_routes(
    t: Topology, s: str, d: str, exclude: Iterable[tuple[str, str]] = ()
) -> list[list[str]]:
    """All minimum-hop routes, sorted by node ids."""
    g = _pruned_graph(t, exclude)
    try:
        return sorted(nx.all_shortest_paths(g, s, d), key=_route_key)
    except nx.NetworkXNoPath:
        return []


def path_links(path: list[str]) -> Iterator[tuple[str, str]]:
    return zip(path, path[1:])


# ---------------------------------------------------------------------------
# construction helpers

WIFI_RATE = 150e6
DSRC_RATE = 27e6


def _dist(a: Node, b: Node) -> float:
    if a.position is None or b.position is None:
        raise ValidationError(f"cannot derive distance between {a.id} and {b.id} without positions")
    return math.dist(a.position, b.position)


def wireless_link_pair(a: Node, b: Node, distance: float | None = None) -> list[Link]:
    """Both directions of a DSRC (vehicle-vehicle) or WiFi link."""
    medium = Medium.DSRC if a.kind is b.kind is NodeKind.VEHICLE else Medium.WIFI
    rate = DSRC_RATE if medium is Medium.DSRC else WIFI_RATE
    d = _dist(a, b) if distance is None else distance
    return [Link(a.id, b.id, medium, d, rate), Link(b.id, a.id, medium, d, rate)]


def fiber_link_pair(a: Node, b: Node, distance: float = 0.0) -> list[Link]:
    rates = [r for r in (a.params.node_rate, b.params.node_rate) if r]
    if a.kind is NodeKind.EDGE:
        rates = [a.params.onu_rate or a.params.node_rate, b.params.node_rate]
    elif b.kind is NodeKind.EDGE:
        rates = [a.params.node_rate, b.params.onu_rate or b.params.node_rate]
    rate = min(r for r in rates if r)
    return [Link(a.id, b.id, Medium.FIBER, distance, rate), Link(b.id, a.id, Medium.FIBER, distance, rate)]


CHAIN_IDS = {
    NodeKind.OLT: "olt",
    NodeKind.AGG_SWITCH: "aggsw",
    NodeKind.AGG_ROUTER: "aggrt",
    NodeKind.CORE_ROUTER: "core",
    NodeKind.CLOUD_ROUTER: "cloudrt",
    NodeKind.CLOUD_SWITCH: "cloudsw",
}
CLOUD_ID = "cloud"


def wired_chain_nodes() -> list[Node]:
    nodes = [Node(CHAIN_IDS[k], k, default_params(k)) for k in WIRED_CHAIN]
    nodes.append(Node(CLOUD_ID, NodeKind.CLOUD_SERVER, default_params(NodeKind.CLOUD_SERVER)))
    return nodes


def build_topology(
    vehicles: list[Node],
    edges: list[Node],
    controller: dict[str, str],
    *,
    dsrc_pairs: Iterable[tuple[str, str]] | None = None,
) -> Topology:
    """Assemble a topology with the standard wiring.

    DSRC between every vehicle pair (or ``dsrc_pairs``), WiFi from each vehicle
    to its controlling edge, WiFi between every edge pair, fiber from each edge
    to the single OLT and up the chain to the cloud server.
    """
    chain = wired_chain_nodes()
    by_id = {n.id: n for n in [*vehicles, *edges, *chain]}
    links: list[Link] = []
    pairs = itertools.combinations([v.id for v in vehicles], 2) if dsrc_pairs is None else dsrc_pairs
    for a, b in pairs:
        links += wireless_link_pair(by_id[a], by_id[b])
    for v in vehicles:
        links += wireless_link_pair(v, by_id[controller[v.id]])
    for a, b in itertools.combinations(edges, 2):
        links += wireless_link_pair(a, b)
    olt = chain[0]
    for e in edges:
        links += fiber_link_pair(e, olt)
    for a, b in zip(chain, chain[1:]):
        links += fiber_link_pair(a, b)
    return Topology(tuple([*vehicles, *edges, *chain]), tuple(links))


# ---------------------------------------------------------------------------
# canonical car park

LOT_SIZE = 45.0
COLUMN_PITCH = 2.0  # m between neighbouring bays, the closest vehicle pair
ROW_PITCH = math.sqrt(24.0**2 - (3 * COLUMN_PITCH) ** 2) / 3  # farthest pair exactly 24 m
EDGE_MEAN_DISTANCE = 30.0
# (column half, row half) of each vehicular cloud and the direction its edge
# node sits in, seen from the cloud's centre.
_DIAG = 1 / math.sqrt(2)
EDGE_DIRECTIONS = (
    ((0, 0), (-_DIAG, -_DIAG)),
    ((1, 0), (_DIAG, -_DIAG)),
    ((0, 1), (-_DIAG, _DIAG)),
    ((1, 1), (_DIAG, _DIAG)),
)


def _solve_offset(points: list[tuple[float, float]], origin: tuple[float, float], direction: tuple[float, float], target: float) -> tuple[float, float]:
    """Point ``origin + r*direction`` whose mean distance to ``points`` is ``target``."""

    def mean_at(r: float) -> float:
        p = (origin[0] + r * direction[0], origin[1] + r * direction[1])
        return sum(math.dist(p, q) for q in points) / len(points)

    lo, hi = 0.0, 10 * target
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean_at(mid) < target:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    return (origin[0] + r * direction[0], origin[1] + r * direction[1])


def canonical_layout() -> tuple[list[Node], list[Node], dict[str, str]]:
    """Vehicle and edge positions of the 16-vehicle car park.

    A 4x4 block of bays centred in the 45 m lot; vehicles ``v01..v16`` run row
    by row. Each 2x2 quadrant is one vehicular cloud, controlled by an edge
    node placed diagonally out from the lot corner nearest that quadrant, so
    the four edges surround the lot, at a mean distance of 30 m from its four
    vehicles.
    """
    cx = cy = LOT_SIZE / 2
    xs = [cx + COLUMN_PITCH * (i - 1.5) for i in range(4)]
    ys = [cy + ROW_PITCH * (j - 1.5) for j in range(4)]
    vparams = default_params(NodeKind.VEHICLE)
    eparams = default_params(NodeKind.EDGE)
    vehicles, cell = [], {}
    for j in range(4):
        for i in range(4):
            v = Node(f"v{4 * j + i + 1:02d}", NodeKind.VEHICLE, vparams, round(xs[i], 6), round(ys[j], 6))
            vehicles.append(v)
            cell[v.id] = (i // 2, j // 2)
    edges, controller = [], {}
    for q, (quadrant, direction) in enumerate(EDGE_DIRECTIONS, start=1):
        members = [v for v in vehicles if cell[v.id] == quadrant]
        centre = (sum(v.x for v in members) / 4, sum(v.y for v in members) / 4)
        pos = _solve_offset([v.position for v in members], centre, direction, EDGE_MEAN_DISTANCE)
        e = Node(f"e{q}", NodeKind.EDGE, eparams, round(pos[0], 6), round(pos[1], 6))
        edges.append(e)
        for v in members:
            controller[v.id] = e.id
    return vehicles, edges, controller


def canonical_parking_lot() -> Topology:
    """The 16-vehicle, 4-edge car park with the full wired chain."""
    vehicles, edges, controller = canonical_layout()
    return build_topology(vehicles, edges, controller)


# ---------------------------------------------------------------------------
# file format


def _node_to_dict(n: Node) -> dict[str, Any]:
    out: dict[str, Any] = {"id": n.id, "kind": n.kind.value}
    if n.x is not None:
        out["x"] = n.x
        out["y"] = n.y
    overrides = n.params.diff(default_params(n.kind))
    if overrides:
        out["params"] = overrides
    return out


def topology_to_dict(t: Topology) -> dict[str, Any]:
    return {
        "nodes": [_node_to_dict(n) for n in t.nodes],
        "links": [
            {
                "from": l.src,
                "to": l.dst,
                "medium": l.medium.value,
                "distance_m": l.distance_m,
                "rate_bps": l.rate_bps,
            }
            for l in t.links
        ],
    }


def _require(entry: dict, key: str, where: str, kind: type | tuple[type, ...]) -> Any:
    if key not in entry:
        raise SchemaError(f"{where}.{key}", "missing")
    value = entry[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SchemaError(f"{where}.{key}", f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


def topology_from_dict(doc: dict[str, Any]) -> Topology:
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "expected an object")
    for key in ("nodes", "links"):
        if not isinstance(doc.get(key), list):
            raise SchemaError(key, "expected a list")
    num = (int, float)
    nodes = []
    for i, entry in enumerate(doc["nodes"]):
        where = f"nodes[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(where, "expected an object")
        nid = _require(entry, "id", where, str)
        raw_kind = _require(entry, "kind", where, str)
        try:
            kind = NodeKind(raw_kind)
        except ValueError:
            raise SchemaError(f"{where}.kind", f"unknown kind {raw_kind!r}") from None
        x = entry.get("x")
        y = entry.get("y")
        for key, val in (("x", x), ("y", y)):
            if val is not None and (not isinstance(val, num) or isinstance(val, bool)):
                raise SchemaError(f"{where}.{key}", "expected a number")
        overrides = entry.get("params", {})
        if not isinstance(overrides, dict):
            raise SchemaError(f"{where}.params", "expected an object")
        try:
            params = default_params(kind).with_overrides(overrides)
        except KeyError as exc:
            raise SchemaError(f"{where}.params", str(exc.args[0])) from None
        nodes.append(Node(nid, kind, params, None if x is None else float(x), None if y is None else float(y)))
    links = []
    for i, entry in enumerate(doc["links"]):
        where = f"links[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(where, "expected an object")
        raw_medium = _require(entry, "medium", where, str)
        try:
            medium = Medium(raw_medium)
        except ValueError:
            raise SchemaError(f"{where}.medium", f"unknown medium {raw_medium!r}") from None
        links.append(
            Link(
                _require(entry, "from", where, str),
                _require(entry, "to", where, str),
                medium,
                float(_require(entry, "distance_m", where, num)),
                float(_require(entry, "rate_bps", where, num)),
            )
        )
    return Topology(tuple(nodes), tuple(links))


def load_topology(path: str | Path) -> Topology:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", f"invalid JSON: {exc}") from None
    return topology_from_dict(doc)


def save_topology(t: Topology, path: str | Path) -> None:
    Path(path).write_text(json.dumps(topology_to_dict(t), indent=2) + "\n")
