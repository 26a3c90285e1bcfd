import itertools
import json
import math
from importlib import resources

import pytest

from vcopt.params import NodeKind, default_params
from vcopt.scenario import Scenario, admissible_destinations
from vcopt.topo import (
    CHAIN_IDS,
    Medium,
    Node,
    SchemaError,
    TopologyError,
    ValidationError,
    build_topology,
    canonical_parking_lot,
    load_topology,
    min_hop_routes,
    save_topology,
    shortest_routes,
    topology_from_dict,
    topology_to_dict,
)


def tiny():
    v = default_params(NodeKind.VEHICLE)
    e = default_params(NodeKind.EDGE)
    vehicles = [Node("v1", NodeKind.VEHICLE, v, 0.0, 0.0), Node("v2", NodeKind.VEHICLE, v, 5.0, 0.0)]
    edges = [Node("e1", NodeKind.EDGE, e, 0.0, 20.0)]
    return build_topology(vehicles, edges, {"v1": "e1", "v2": "e1"})


def test_canonical_counts(lot):
    assert len(lot.vehicles) == 16
    assert len(lot.edges) == 4
    assert len(lot.ids(NodeKind.CLOUD_SERVER)) == 1


def test_vehicle_pair_distances_between_2_and_24(lot):
    ds = [math.dist(lot[a].position, lot[b].position) for a, b in itertools.combinations(lot.vehicles, 2)]
    assert min(ds) == pytest.approx(2.0)
    assert max(ds) <= 24.0 + 1e-9


def test_mean_vehicle_to_own_edge_distance_is_30(lot):
    for e in lot.edges:
        members = [v for v in lot.vehicles if lot.controller(v) == e]
        assert len(members) == 4
        mean = sum(lot.link(v, e).distance_m for v in members) / 4
        assert mean == pytest.approx(30.0, abs=1e-6)


def test_distributed_capacity_open_to_one_demand_is_86400(lot):
    # a vehicle never processes its own demand
    open_to_v01 = [n for n in admissible_destinations(lot, "v01", Scenario.VE)]
    assert sum(lot[n].params.proc_capacity for n in open_to_v01) == 86400
    assert lot.processing_capacity(NodeKind.VEHICLE, NodeKind.EDGE) == 16 * 3200 + 4 * 9600


def test_neighbour_symmetry(lot):
    for n in lot.nodes:
        for m in lot.neighbors(n.id):
            assert n.id in lot.neighbors(m)


def test_media_rules(lot):
    for l in lot.links:
        a, b = lot.kind(l.src), lot.kind(l.dst)
        if l.medium is Medium.DSRC:
            assert a is b is NodeKind.VEHICLE
        elif l.medium is Medium.WIFI:
            assert NodeKind.EDGE in (a, b)
        else:
            assert NodeKind.VEHICLE not in (a, b)


def test_vehicles_reach_only_their_own_edge(lot):
    for v in lot.vehicles:
        edges = [m for m in lot.neighbors(v) if lot.kind(m) is NodeKind.EDGE]
        assert edges == [lot.controller(v)]


def test_minimal_file_gives_ten_nodes(tmp_path):
    path = tmp_path / "t.json"
    save_topology(tiny(), path)
    assert len(load_topology(path).nodes) == 10


def test_proc_max_below_idle_is_rejected(tmp_path):
    doc = topology_to_dict(tiny())
    node = next(n for n in doc["nodes"] if n["id"] == "v1")
    node.setdefault("params", {})["proc_max"] = 1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError):
        load_topology(path)


def test_missing_field_names_it():
    doc = topology_to_dict(tiny())
    del doc["nodes"][0]["kind"]
    with pytest.raises(SchemaError, match="kind"):
        topology_from_dict(doc)


def test_canonical_round_trip(tmp_path, lot):
    path = tmp_path / "lot.json"
    save_topology(lot, path)
    assert load_topology(path) == lot


def test_packaged_topology_matches_builder(lot):
    text = resources.files("vcopt").joinpath("data/canonical_topology.json").read_text()
    assert topology_from_dict(json.loads(text)) == lot


def test_asymmetric_link_rejected():
    t = tiny()
    with pytest.raises(TopologyError, match="reverse"):
        type(t)(t.nodes, tuple(l for l in t.links if l.key != ("v1", "v2")))


def test_route_to_same_cloud_vehicle_is_direct(lot):
    assert min_hop_routes(lot, "v01", "v02", limit=1)[0] == ["v01", "v02"]


def test_route_to_cloud_is_unique_and_eight_hops(lot):
    routes = shortest_routes(lot, "v01", "cloud")
    assert len(routes) == 1
    r = routes[0]
    assert len(r) - 1 == 8
    assert r[1] == lot.controller("v01")
    assert r[2:] == list(CHAIN_IDS.values()) + ["cloud"]


def test_route_to_other_edge_goes_through_own_edge(lot):
    own = lot.controller("v01")
    other = next(e for e in lot.edges if e != own)
    assert ("v01", other) not in lot.link_map
    routes = shortest_routes(lot, "v01", other)
    assert routes[0] == ["v01", own, other]
    assert all(len(r) == 3 for r in routes)


def test_min_hop_routes_are_ordered_and_exclusion_never_shortens():
    t = tiny()
    routes = min_hop_routes(t, "v1", "olt")
    hops = [len(r) - 1 for r in routes]
    assert hops == sorted(hops)
    cut = min_hop_routes(t, "v1", "olt", exclude=[("v1", "e1")])
    assert len(cut[0]) >= len(routes[0])


def test_no_route_returns_empty():
    t = tiny()
    assert shortest_routes(t, "v1", "e1", exclude=[("v1", "e1"), ("v2", "e1")]) == []
