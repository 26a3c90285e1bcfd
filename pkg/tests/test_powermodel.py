import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vcopt.params import CATALOG, NodeKind, default_params
from vcopt.powermodel import (
    Assignment,
    check_feasibility,
    energy_per_bit,
    link_cost_per_bit,
    node_networking_power,
    node_processing_power,
    processing_efficiency,
    savings,
    total_power,
    wireless_rx_energy,
    wireless_tx_energy,
)
from vcopt.scenario import Demand, TrafficMode
from vcopt.topo import Link, Medium, Node, path_links, shortest_routes


def node(kind, nid="n"):
    return Node(nid, kind, default_params(kind), 0.0, 0.0)


def chain_flow(t, route, bps):
    return {l: bps for l in path_links(route)}


# -- per-bit and per-MIPS constants ------------------------------------------


@pytest.mark.parametrize(
    "kind, expected",
    [
        (NodeKind.CORE_ROUTER, 0.075e-9),
        (NodeKind.OLT, (1940 - 60) / 8.6e12),
        (NodeKind.EDGE, 0.15e-9),
    ],
)
def test_energy_per_bit(kind, expected):
    assert energy_per_bit(node(kind)) == pytest.approx(expected, rel=1e-12)


def test_energy_per_bit_undefined_for_vehicles():
    with pytest.raises(ValueError):
        energy_per_bit(node(NodeKind.VEHICLE))


def test_dsrc_tx_energy_at_10m():
    link = Link("a", "b", Medium.DSRC, 10.0, 27e6)
    assert wireless_tx_energy(link, node(NodeKind.VEHICLE)) == pytest.approx(0.158 / 27e6 + 1e-10 * 100, rel=1e-12)
    assert wireless_tx_energy(link, node(NodeKind.VEHICLE)) == pytest.approx(1.585e-8, rel=1e-3)


def test_wifi_tx_energy_vehicle_to_edge_at_30m():
    link = Link("a", "b", Medium.WIFI, 30.0, 150e6)
    assert wireless_tx_energy(link, node(NodeKind.VEHICLE)) == pytest.approx(9.017e-8, rel=1e-3)


def test_tx_energy_at_zero_distance_is_power_over_rate():
    link = Link("a", "b", Medium.DSRC, 0.0, 27e6)
    assert wireless_tx_energy(link, node(NodeKind.VEHICLE)) == 0.158 / 27e6


def test_rx_energies():
    dsrc = Link("a", "b", Medium.DSRC, 10.0, 27e6)
    assert wireless_rx_energy(dsrc, node(NodeKind.VEHICLE)) == pytest.approx(7.39e-19, rel=1e-2)
    ap = Link("a", "b", Medium.WIFI, 30.0, 150e6)
    assert wireless_rx_energy(ap, node(NodeKind.EDGE)) == pytest.approx(2.65e-22, rel=1e-2)


def test_rx_energy_zero_when_sensitivity_missing():
    quiet = Node("q", NodeKind.VEHICLE, default_params(NodeKind.VEHICLE).with_overrides({"rx_dbm": None}))
    assert wireless_rx_energy(Link("a", "q", Medium.DSRC, 10.0, 27e6), quiet) == 0.0


@given(st.floats(1, 200), st.floats(1, 200), st.floats(1e6, 1e9))
def test_tx_energy_grows_with_distance_and_falls_with_rate(d1, d2, rate):
    v = node(NodeKind.VEHICLE)
    lo, hi = sorted((d1, d2))
    if hi - lo > 1e-6:
        assert wireless_tx_energy(Link("a", "b", Medium.DSRC, lo, rate), v) < wireless_tx_energy(
            Link("a", "b", Medium.DSRC, hi, rate), v
        )
    assert wireless_tx_energy(Link("a", "b", Medium.DSRC, lo, rate * 2), v) < wireless_tx_energy(
        Link("a", "b", Medium.DSRC, lo, rate), v
    )


@pytest.mark.parametrize(
    "kind, expected, digits",
    [(NodeKind.VEHICLE, 0.00123, 5), (NodeKind.CLOUD_SERVER, 0.000518, 6), (NodeKind.EDGE, 0.0011, 4)],
)
def test_processing_efficiency(kind, expected, digits):
    assert round(processing_efficiency(node(kind)), digits) == expected


def test_edge_serving_8000_mips():
    assert node_processing_power(node(NodeKind.EDGE), 8000) == pytest.approx(10.75, abs=1e-9)


def test_unused_node_draws_no_processing_power():
    assert node_processing_power(node(NodeKind.EDGE), 0.0) == 0.0


def test_vehicle_at_full_load_draws_max():
    assert node_processing_power(node(NodeKind.VEHICLE), 3200) == pytest.approx(7.9, abs=1e-9)


def test_processing_over_capacity_raises():
    with pytest.raises(ValueError):
        node_processing_power(node(NodeKind.VEHICLE), 3300)


# -- networking power on the canonical lot -----------------------------------


def test_vehicle_sending_on_one_dsrc_link(lot):
    # pick the pair at 10 m if present, otherwise scale the oracle by distance
    a, b = "v01", "v02"
    d = lot.link(a, b).distance_m
    expected = 1.05007 + 2e6 * (0.158 / 27e6 + 1e-10 * d * d)
    assert node_networking_power(lot, a, {(a, b): 2e6}) == pytest.approx(expected, rel=1e-12)


def test_vehicle_sending_at_10m_matches_worked_value():
    v = default_params(NodeKind.VEHICLE)
    from vcopt.topo import Topology, wired_chain_nodes, wireless_link_pair, fiber_link_pair

    a = Node("a", NodeKind.VEHICLE, v, 0.0, 0.0)
    b = Node("b", NodeKind.VEHICLE, v, 10.0, 0.0)
    e = Node("e", NodeKind.EDGE, default_params(NodeKind.EDGE), 0.0, 30.0)
    chain = wired_chain_nodes()
    links = wireless_link_pair(a, b) + wireless_link_pair(a, e) + wireless_link_pair(b, e) + fiber_link_pair(e, chain[0])
    for x, y in zip(chain, chain[1:]):
        links += fiber_link_pair(x, y)
    t = Topology((a, b, e, *chain), tuple(links))
    assert node_networking_power(t, "a", {("a", "b"): 2e6}) == pytest.approx(1.0818, abs=5e-5)


def test_idle_wired_device_draws_nothing(lot):
    assert node_networking_power(lot, "core", {}) == 0.0


def test_olt_relaying_5_mbps(lot):
    loads = {("e1", "olt"): 5e6, ("olt", "aggsw"): 5e6}
    assert node_networking_power(lot, "olt", loads) == pytest.approx(0.5460 + 5e6 * 0.2186e-9, abs=1e-4)
    assert node_networking_power(lot, "olt", loads) == pytest.approx(0.5471, abs=1e-3)


def test_empty_assignment_costs_nothing(lot):
    assert total_power(lot, Assignment()).tp == 0.0


def cloud_assignment(lot, mbps):
    route = shortest_routes(lot, "v01", "cloud")[0]
    bps = mbps * 1e6
    return Assignment({("v01", "cloud"): 2000 * mbps}, {("v01", "cloud"): bps}, {("v01", "cloud"): chain_flow(lot, route, bps)}), route


def test_cloud_path_matches_hand_sum(lot):
    a, route = cloud_assignment(lot, 2)
    bps = 2e6
    by_hand = 0.0
    # sender idle and per-bit terms, hop by hop
    for n in route:
        nd = lot[n]
        p = nd.params
        if nd.kind is NodeKind.VEHICLE:
            by_hand += p.pue * p.net_idle
        elif nd.kind is NodeKind.EDGE:
            by_hand += p.pue * (p.net_idle + p.onu_idle)
        elif nd.kind.is_wired:
            by_hand += p.pue * p.net_idle * 0.07 * 0.13
    for x, y in path_links(route):
        by_hand += bps * link_cost_per_bit(lot, x, y)
    cloud = lot["cloud"].params
    by_hand += cloud.pue * (cloud.proc_idle + 4000 * (cloud.proc_max - cloud.proc_idle) / cloud.proc_capacity)
    assert total_power(lot, a).tp == pytest.approx(by_hand, rel=1e-12)


def test_total_is_sum_of_pue_weighted_nodes(lot):
    a, _ = cloud_assignment(lot, 3)
    b = total_power(lot, a)
    again = sum(lot[n].params.pue * (b.networking[n] + b.processing[n]) for n in b.total)
    assert b.tp == pytest.approx(again, rel=1e-12)
    assert b.tp == pytest.approx(b.tp_net + b.tp_proc, rel=1e-12)


def test_disjoint_assignments_add(lot):
    a1 = Assignment({("v01", "v02"): 1000}, {("v01", "v02"): 1e6}, {("v01", "v02"): {("v01", "v02"): 1e6}})
    a2 = Assignment({("v05", "v06"): 1500}, {("v05", "v06"): 2e6}, {("v05", "v06"): {("v05", "v06"): 2e6}})
    tp = total_power(lot, a1.merged(a2)).tp
    assert tp == pytest.approx(total_power(lot, a1).tp + total_power(lot, a2).tp, rel=1e-12)


def test_savings_of_baseline_against_itself_is_zero():
    assert savings(95.1, 95.1) == 0.0


# -- feasibility --------------------------------------------------------------


def test_wrong_served_amount(lot):
    a, _ = cloud_assignment(lot, 2)
    rep = check_feasibility(lot, a, [Demand.from_mbps("v01", 2, 5000)])
    assert "12" in rep.constraints()


def test_five_vehicle_destinations_overrun_dsrc(lot):
    dests = ["v02", "v03", "v04", "v05", "v06"]
    a = Assignment(
        {("v01", d): 3200.0 for d in dests},
        {("v01", d): 8e6 for d in dests},
        {("v01", d): {("v01", d): 8e6} for d in dests},
    )
    rep = check_feasibility(lot, a, [Demand.from_mbps("v01", 8, 16000)], mode=TrafficMode.FT)
    assert "19" in rep.constraints()


def test_split_limit_violation(lot):
    dests = ["v02", "v03", "v04"]
    a = Assignment(
        {("v01", d): 1000.0 for d in dests},
        {("v01", d): 1e6 for d in dests},
        {("v01", d): {("v01", d): 1e6} for d in dests},
    )
    rep = check_feasibility(lot, a, [Demand.from_mbps("v01", 1, 3000)], S=2, mode=TrafficMode.FT)
    assert rep.constraints() == {"24"}


def test_broken_conservation_is_reported(lot):
    a = Assignment({("v01", "v03"): 1000.0}, {("v01", "v03"): 1e6}, {("v01", "v03"): {("v01", "v02"): 1e6}})
    assert "17" in check_feasibility(lot, a).constraints()


def test_catalog_is_valid():
    for kind, p in CATALOG.items():
        assert p.violations() == [], kind
