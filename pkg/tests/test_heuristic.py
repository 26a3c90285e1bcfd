import numpy as np
import pytest

from vcopt.heuristic import AllocationState, allocate_demand, run, score_candidates
from vcopt.optimizer import build_model, solve_exact
from vcopt.params import NodeKind
from vcopt.powermodel import check_feasibility
from vcopt.scenario import Demand, Scenario, TrafficMode
from vcopt.topo import Medium


def d(mbps, source="v01", mips=None, id=0):
    return Demand.from_mbps(source, mbps, mips, id=id)


def test_score_is_sum_of_terms(lot):
    for c in score_candidates(AllocationState.fresh(lot), d(3)):
        assert c.score == c.npower + c.prpower + c.idle


def test_nearer_vehicle_ranks_first(lot):
    ranked = [c.destination for c in score_candidates(AllocationState.fresh(lot), d(1), scenario=Scenario.V)]
    near, far = sorted(["v02", "v03"], key=lambda v: lot.link("v01", v).distance_m)
    assert ranked.index(near) < ranked.index(far)


def test_edge_ranks_ahead_of_vehicles_for_8000_mips(lot):
    ranked = score_candidates(AllocationState.fresh(lot), d(4))
    assert lot.kind(ranked[0].destination) is NodeKind.EDGE


def test_cloud_heads_the_list_when_traffic_exceeds_dsrc(lot):
    ranked = score_candidates(AllocationState.fresh(lot), d(30))
    assert ranked[0].destination == "cloud"


def test_no_spare_capacity_gives_empty_list(lot):
    state = AllocationState.fresh(lot)
    for n in state.proc:
        state.proc[n] = 0.0
    assert score_candidates(state, d(1)) == []


def test_small_demand_served_by_one_node(lot):
    state = AllocationState.fresh(lot)
    out = allocate_demand(state, d(1, mips=1500), scenario=Scenario.V)
    assert out.served and len(out.placements) == 1 and out.trials == 1
    assert len(state.flows) == 1


def test_five_vehicle_demand_spills_onto_wifi(lot):
    h = run(lot, [d(8)], Scenario.V)
    assert not h.blocked
    assert len(h.assignment.destinations("v01")) == 5
    loads = h.assignment.link_loads()
    assert any(lot.link(*k).medium is Medium.WIFI for k, f in loads.items() if f > 0)
    assert check_feasibility(lot, h.assignment, [d(8)], mode="ft", scenario="v").ok


def test_blocked_demand_restores_state_exactly(lot):
    state = AllocationState.fresh(lot)
    allocate_demand(state, d(2, "v05"))
    before = state.snapshot()
    out = allocate_demand(state, d(60, "v09", mips=500000))
    assert not out.served
    assert state.snapshot() == before


def test_residuals_plus_allocations_equal_capacity(lot):
    rng = np.random.default_rng(3)
    state = AllocationState.fresh(lot)
    sources = rng.permutation(lot.vehicles)[:8]
    for i, s in enumerate(sources):
        allocate_demand(state, d(float(rng.choice([1, 3, 5, 12, 40])), str(s), id=i))
    used = {}
    for (_, dst), om in state.placements.items():
        used[dst] = used.get(dst, 0.0) + om
    for n, cap in state.capacity_proc.items():
        assert state.proc[n] + used.get(n, 0.0) == pytest.approx(cap, abs=1e-6)
        assert state.proc[n] >= -1e-9
    for key, cap in state.capacity_iface.items():
        assert state.iface[key] >= -1e-6
    a = state.assignment()
    assert check_feasibility(lot, a).ok


def test_demands_served_largest_first(lot):
    h = run(lot, [d(1, "v01", id=0), d(3, "v06", id=1), d(3, "v11", id=2)])
    order = [line.split()[1] for line in h.trace if line.startswith("demand ")]
    assert order == ["1", "2", "0"]


def test_one_demand_per_source(lot):
    with pytest.raises(ValueError):
        run(lot, [d(1), d(2, id=1)])


def test_run_is_deterministic(lot):
    demands = [d(3, s, id=i) for i, s in enumerate(["v01", "v06", "v11", "v16"])]
    a, b = run(lot, demands), run(lot, demands)
    assert a.trace == b.trace and a.tp == b.tp


def test_thirty_mbps_matches_the_exact_placement(lot):
    h = run(lot, [d(30)])
    r = solve_exact(build_model(lot, [d(30)]))
    assert h.assignment.destinations("v01") == r.assignment.destinations("v01") == ["cloud"]


def test_two_mbps_has_no_gap(lot):
    h = run(lot, [d(2)])
    r = solve_exact(build_model(lot, [d(2)]))
    assert round(100 * (h.tp - r.objective) / r.objective) == 0


@pytest.mark.xfail(strict=True, reason="measured gap at 4 Mb/s is 0%; see the decisions ledger")
def test_four_mbps_gap_near_23_percent(lot):
    h = run(lot, [d(4)])
    r = solve_exact(build_model(lot, [d(4)]))
    assert 100 * (h.tp - r.objective) / r.objective == pytest.approx(23, abs=5)


@pytest.mark.parametrize("mbps", [1.5, 5.5])
@pytest.mark.parametrize("S", [1, 2, None])
def test_split_limit_respected_and_dominated(lot, mbps, S):
    h = run(lot, [d(mbps)], S=S)
    r = solve_exact(build_model(lot, [d(mbps)], S=S))
    if S is not None:
        assert len(h.assignment.destinations("v01")) <= S
    assert h.tp >= r.objective * (1 - 1e-9)


def test_proportional_traffic_matches_exact_on_vehicles(lot):
    for mbps in (4, 10, 20):
        h = run(lot, [d(mbps)], Scenario.V, mode=TrafficMode.PT)
        r = solve_exact(build_model(lot, [d(mbps)], Scenario.V, mode=TrafficMode.PT))
        assert round(100 * (h.tp - r.objective) / r.objective) == 0
