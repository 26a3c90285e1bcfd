"""Energy-aware placement of processing demands over parked vehicles, edge
nodes and a central cloud."""

from .heuristic import HeuristicResult
from .heuristic import run as run_heuristic
from .optimizer import build_model, export_lp, solve_exact
from .powermodel import Assignment, PowerBreakdown, check_feasibility, total_power
from .scenario import Demand, Scenario, TrafficMode
from .topo import Topology, canonical_parking_lot, load_topology, save_topology

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "Demand",
    "HeuristicResult",
    "PowerBreakdown",
    "Scenario",
    "Topology",
    "TrafficMode",
    "build_model",
    "canonical_parking_lot",
    "check_feasibility",
    "export_lp",
    "load_topology",
    "run_heuristic",
    "save_topology",
    "solve_exact",
    "total_power",
]
