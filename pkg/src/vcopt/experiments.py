"""Parameter sweeps over the car-park instance, savings and gap tables."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

from . import heuristic
from .optimizer import build_model, solve_exact
from .params import NodeKind
from .powermodel import Assignment, savings
from .scenario import Demand, Scenario, TrafficMode
from .topo import Topology, canonical_parking_lot, load_topology

DEMAND_GRID = (2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 30.0)
SPLIT_GRID = (1.5, 2.0, 2.5, 3.0, 3.5, 4.5, 5.5)
COUNT_GRID = tuple(range(1, 11))
PROFILES = {"low": (1.0, 2000.0), "med": (3.0, 6000.0), "high": (5.0, 10000.0)}
DEFAULT_SOURCE = "v01"  # corner vehicle of the first vehicular cloud

COLUMNS = (
    "scenario",
    "engine",
    "mode",
    "S",
    "demand_mbps",
    "demand_mips",
    "tp_w",
    "net_w",
    "proc_w",
    "mips_vehicles",
    "mips_edge",
    "mips_cloud",
    "savings_pct",
    "blocked",
    "gap_pct",
)


class SweepKind(str, enum.Enum):
    DEMAND_SIZE = "DemandSize"
    SPLIT_LIMIT = "SplitLimit"
    TRAFFIC_MODE = "TrafficMode"
    MULTI_DEMAND = "MultiDemand"
    HEURISTIC_GAP = "HeuristicGap"


class Engine(str, enum.Enum):
    MILP = "milp"
    HEURISTIC = "heuristic"
    BOTH = "both"

    def engines(self) -> tuple[str, ...]:
        return ("milp", "heuristic") if self is Engine.BOTH else (self.value,)


class SweepSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    """What to evaluate. ``demands`` holds Mb/s values for single-demand
    sweeps and demand counts for multi-demand ones; ``splits`` uses ``None``
    for no limit."""

    kind: SweepKind
    scenarios: tuple[Scenario, ...]
    demands: tuple[float, ...]
    splits: tuple[int | None, ...] = (None,)
    modes: tuple[TrafficMode, ...] = (TrafficMode.FT,)
    engine: Engine = Engine.MILP
    profiles: tuple[str, ...] = ()
    source: str = DEFAULT_SOURCE
    budget: float = 600.0
    name: str = ""

    def __post_init__(self):
        if not self.demands:
            raise SweepSpecError("demand grid is empty")
        if not self.scenarios:
            raise SweepSpecError("no scenarios")
        if self.kind is SweepKind.MULTI_DEMAND:
            if not self.profiles:
                raise SweepSpecError("multi-demand sweeps need at least one profile")
            for p in self.profiles:
                if p not in PROFILES:
                    raise SweepSpecError(f"unknown profile {p!r}; expected one of {sorted(PROFILES)}")
            for c in self.demands:
                if c < 1 or c != int(c):
                    raise SweepSpecError(f"demand count {c} must be a positive integer")
        elif any(x <= 0 for x in self.demands):
            raise SweepSpecError("demand sizes must be positive")
        for S in self.splits:
            if S is not None and S < 1:
                raise SweepSpecError("split limits must be >= 1")

    @property
    def multi(self) -> bool:
        return self.kind is SweepKind.MULTI_DEMAND

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "name": self.name,
            "scenarios": [s.value for s in self.scenarios],
            "demands": list(self.demands),
            "splits": list(self.splits),
            "modes": [m.value for m in self.modes],
            "engine": self.engine.value,
            "profiles": list(self.profiles),
            "source": self.source,
            "budget": self.budget,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> SweepSpec:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise SweepSpecError(f"unknown field(s): {', '.join(sorted(unknown))}")
        try:
            return cls(
                kind=SweepKind(doc["kind"]),
                scenarios=tuple(Scenario.parse(s) for s in doc["scenarios"]),
                demands=tuple(float(x) for x in doc["demands"]),
                splits=tuple(None if s is None else int(s) for s in doc.get("splits", [None])),
                modes=tuple(TrafficMode.parse(m) for m in doc.get("modes", ["ft"])),
                engine=Engine(doc.get("engine", "milp")),
                profiles=tuple(doc.get("profiles", ())),
                source=doc.get("source", DEFAULT_SOURCE),
                budget=float(doc.get("budget", 600.0)),
                name=doc.get("name", ""),
            )
        except KeyError as e:
            raise SweepSpecError(f"missing field {e.args[0]!r}") from None
        except ValueError as e:
            raise SweepSpecError(str(e)) from None


def load_sweep_spec(path: str | Path) -> SweepSpec:
    return SweepSpec.from_dict(json.loads(Path(path).read_text()))


def save_sweep_spec(spec: SweepSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# demand construction


def multi_demand_sources(t: Topology, count: int) -> list[str]:
    """Round-robin over the vehicular clouds, lowest vehicle ids first."""
    clouds = [sorted(v for v in t.vehicles if t.controller(v) == e) for e in t.edges]
    clouds = [c for c in clouds if c]
    out = []
    for i in range(count):
        members = clouds[i % len(clouds)]
        k = i // len(clouds)
        if k >= len(members):
            raise SweepSpecError(f"not enough vehicles for {count} demands")
        out.append(members[k])
    return out


def make_demands(t: Topology, spec: SweepSpec, value: float, profile: str | None = None) -> list[Demand]:
    if profile is None:
        return [Demand.from_mbps(spec.source, value)]
    mbps, mips = PROFILES[profile]
    return [Demand.from_mbps(s, mbps, mips, id=i) for i, s in enumerate(multi_demand_sources(t, int(value)))]


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class SweepPoint:
    scenario: str
    engine: str
    mode: str
    S: int | None
    demand_mbps: float  # total over the point's demands
    demand_mips: float
    tp_w: float | None
    net_w: float | None
    proc_w: float | None
    mips_vehicles: float
    mips_edge: float
    mips_cloud: float
    savings_pct: float | None
    blocked: int
    gap_pct: float | None
    count: int = 1
    profile: str = ""

    @property
    def feasible(self) -> bool:
        return self.blocked == 0 and self.tp_w is not None

    def key(self) -> tuple:
        return (
            self.profile,
            self.count,
            self.demand_mbps,
            self.mode,
            math.inf if self.S is None else self.S,
            self.scenario,
            self.engine,
        )


@dataclass
class SweepResult:
    spec: SweepSpec | None
    points: list[SweepPoint] = field(default_factory=list)

    def select(self, **match) -> list[SweepPoint]:
        return [p for p in self.points if all(getattr(p, k) == v for k, v in match.items())]

    def one(self, **match) -> SweepPoint:
        found = self.select(**match)
        if len(found) != 1:
            raise KeyError(f"{len(found)} points match {match}")
        return found[0]


def layer_mips(t: Topology, a: Assignment) -> tuple[float, float, float]:
    out = {NodeKind.VEHICLE: 0.0, NodeKind.EDGE: 0.0, NodeKind.CLOUD_SERVER: 0.0}
    for n, load in a.processing_load().items():
        out[t.kind(n)] += load
    return out[NodeKind.VEHICLE], out[NodeKind.EDGE], out[NodeKind.CLOUD_SERVER]


@dataclass(frozen=True)
class _Eval:
    tp: float | None
    net: float | None
    proc: float | None
    layers: tuple[float, float, float]
    blocked: int


def evaluate(
    t: Topology,
    demands: Sequence[Demand],
    scenario: Scenario,
    S: int | None,
    mode: TrafficMode,
    engine: str,
    budget: float = 600.0,
) -> _Eval:
    """One engine on one instance; infeasibility is reported, never raised."""
    if engine == "milp":
        r = solve_exact(build_model(t, demands, scenario, S, mode), budget)
        if not r.feasible:
            return _Eval(None, None, None, (0.0, 0.0, 0.0), len(demands))
        b = r.breakdown
        return _Eval(b.tp, b.tp_net, b.tp_proc, layer_mips(t, r.assignment), 0)
    if engine == "heuristic":
        h = heuristic.run(t, demands, scenario, S, mode)
        b = h.breakdown
        if len(h.blocked) == len(demands):
            return _Eval(None, None, None, (0.0, 0.0, 0.0), len(demands))
        return _Eval(b.tp, b.tp_net, b.tp_proc, layer_mips(t, h.assignment), len(h.blocked))
    raise ValueError(f"unknown engine {engine!r}")


def _round(x: float | None, digits: int) -> float | None:
    return None if x is None else round(x, digits)


def run_sweep(spec: SweepSpec, topology: Topology | None = None, threads: int = 1) -> SweepResult:
    """Evaluate every grid point with the requested engines.

    Each (demand, mode, split, engine) combination is also solved in scenario
    C for the savings column. Infeasible points are flagged, not raised.
    """
    t = topology or canonical_parking_lot()
    engines = spec.engine.engines()
    profiles = spec.profiles if spec.multi else (None,)
    jobs = []
    for profile in profiles:
        for value in spec.demands:
            demands = tuple(make_demands(t, spec, value, profile))
            for mode in spec.modes:
                for S in spec.splits:
                    for engine in engines:
                        scenarios = list(dict.fromkeys(list(spec.scenarios) + [Scenario.C]))
                        for sc in scenarios:
                            jobs.append((profile, value, demands, mode, S, engine, sc))

    def work(job):
        profile, value, demands, mode, S, engine, sc = job
        return job, evaluate(t, demands, sc, S, mode, engine, spec.budget)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(work, jobs))
    else:
        done = [work(j) for j in jobs]
    table = {(p, v, m, S, e, sc): ev for (p, v, _, m, S, e, sc), ev in done}

    points = []
    for (profile, value, demands, mode, S, engine, sc), ev in done:
        if sc not in spec.scenarios:
            continue
        base = table[(profile, value, mode, S, engine, Scenario.C)]
        sav = None
        if ev.tp is not None and base.tp is not None and ev.blocked == 0 and base.blocked == 0:
            sav = round(100.0 * savings(ev.tp, base.tp), 1)
        gap = None
        if engine == "heuristic" and "milp" in engines:
            ref = table[(profile, value, mode, S, "milp", sc)]
            if ev.tp is not None and ref.tp is not None and ev.blocked == 0 and ref.blocked == 0:
                gap = float(round(100.0 * (ev.tp - ref.tp) / ref.tp))
        points.append(
            SweepPoint(
                scenario=sc.value,
                engine=engine,
                mode=mode.value,
                S=S,
                demand_mbps=sum(d.mbps for d in demands),
                demand_mips=sum(d.mips for d in demands),
                tp_w=ev.tp,
                net_w=ev.net,
                proc_w=ev.proc,
                mips_vehicles=ev.layers[0],
                mips_edge=ev.layers[1],
                mips_cloud=ev.layers[2],
                savings_pct=sav,
                blocked=ev.blocked,
                gap_pct=gap,
                count=len(demands),
                profile=profile or "",
            )
        )
    points.sort(key=SweepPoint.key)
    return SweepResult(spec, points)


# ---------------------------------------------------------------------------
# gap tables


class MissingEngineError(ValueError):
    pass


@dataclass(frozen=True)
class GapRow:
    suite: str
    scenario: str
    mode: str
    S: int | None
    demand: str
    gap_pct: int | None


@dataclass
class GapTable:
    rows: list[GapRow]

    def summary(self) -> dict[str, tuple[int, int]]:
        """Per suite: (min, max) gap in percent over points both engines served."""
        out: dict[str, list[int]] = {}
        for r in self.rows:
            if r.gap_pct is not None:
                out.setdefault(r.suite, []).append(r.gap_pct)
        return {k: (min(v), max(v)) for k, v in out.items()}

    def to_text(self) -> str:
        lines = [f"{'suite':<16} {'scen':<5} {'mode':<4} {'S':>4} {'demand':>16} {'gap%':>6}"]
        for r in self.rows:
            gap = "-" if r.gap_pct is None else f"{r.gap_pct:d}"
            S = "-" if r.S is None else str(r.S)
            lines.append(f"{r.suite:<16} {r.scenario:<5} {r.mode:<4} {S:>4} {r.demand:>16} {gap:>6}")
        for suite, (lo, hi) in self.summary().items():
            lines.append(f"{suite}: {lo}-{hi}%")
        return "\n".join(lines) + "\n"


def gap_report(result: SweepResult) -> GapTable:
    engines = {p.engine for p in result.points}
    if not {"milp", "heuristic"} <= engines:
        raise MissingEngineError("gap report needs points from both engines")
    rows = []
    for p in result.points:
        if p.engine != "heuristic":
            continue
        suite = p.profile or p.scenario
        demand = f"{p.count}x{p.profile}" if p.profile else f"{p.demand_mbps:g}Mb/s"
        rows.append(GapRow(suite, p.scenario, p.mode, p.S, demand, None if p.gap_pct is None else int(p.gap_pct)))
    return GapTable(rows)


# ---------------------------------------------------------------------------
# output


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def point_row(p: SweepPoint) -> list[str]:
    return [_cell(getattr(p, c)) for c in COLUMNS]


def results_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for p in result.points:
        w.writerow(point_row(p))
    return buf.getvalue()


def results_text(result: SweepResult) -> str:
    head = f"{'scen':<5}{'engine':<10}{'mode':<5}{'S':>4}{'Mb/s':>8}{'MIPS':>9}{'TP W':>10}{'net W':>9}{'proc W':>9}" \
           f"{'veh':>8}{'edge':>8}{'cloud':>8}{'sav%':>7}{'blk':>4}{'gap%':>6}"
    lines = [head]
    for p in result.points:
        f3 = lambda x: "-" if x is None else f"{x:.3f}"  # noqa: E731
        lines.append(
            f"{p.scenario:<5}{p.engine:<10}{p.mode:<5}{'-' if p.S is None else p.S:>4}{p.demand_mbps:>8g}{p.demand_mips:>9g}"
            f"{f3(p.tp_w):>10}{f3(p.net_w):>9}{f3(p.proc_w):>9}{p.mips_vehicles:>8g}{p.mips_edge:>8g}{p.mips_cloud:>8g}"
            f"{'-' if p.savings_pct is None else f'{p.savings_pct:.1f}':>7}{p.blocked:>4}"
            f"{'-' if p.gap_pct is None else f'{p.gap_pct:.0f}':>6}"
        )
    return "\n".join(lines) + "\n"


def emit_results(result: SweepResult, path: str | Path, format: str = "csv") -> Path:
    path = Path(path)
    if format == "csv":
        text = results_csv(result)
    elif format == "text":
        text = results_text(result)
    else:
        raise ValueError(f"unknown format {format!r}")
    path.write_text(text)
    return path


def read_results_csv(text: str) -> list[dict]:
    """Parse :func:`results_csv` output back into typed values."""
    ints = {"S", "blocked"}
    strs = {"scenario", "engine", "mode"}
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        row = {}
        for k in COLUMNS:
            v = raw[k]
            if k in strs:
                row[k] = v
            elif v == "":
                row[k] = None
            elif k in ints:
                row[k] = int(v)
            else:
                row[k] = float(v)
        rows.append(row)
    return rows


def row_dict(p: SweepPoint) -> dict:
    d = asdict(p)
    return {k: d[k] for k in COLUMNS}


# ---------------------------------------------------------------------------
# the standard study suites


def standard_specs() -> dict[str, SweepSpec]:
    all4 = (Scenario.V, Scenario.VE, Scenario.C, Scenario.VEC)
    return {
        "demand_size": SweepSpec(SweepKind.DEMAND_SIZE, all4, DEMAND_GRID, name="demand_size"),
        "split_limit": SweepSpec(
            SweepKind.SPLIT_LIMIT, (Scenario.VEC,), SPLIT_GRID, splits=(1, 2, 3, None), name="split_limit"
        ),
        "traffic_mode": SweepSpec(
            SweepKind.TRAFFIC_MODE, all4, DEMAND_GRID, modes=(TrafficMode.FT, TrafficMode.PT), name="traffic_mode"
        ),
        "multi_demand": SweepSpec(
            SweepKind.MULTI_DEMAND,
            (Scenario.VEC,),
            tuple(float(c) for c in COUNT_GRID),
            engine=Engine.BOTH,
            profiles=("low", "med", "high"),
            name="multi_demand",
        ),
        "heuristic_gap": SweepSpec(
            SweepKind.HEURISTIC_GAP, (Scenario.VEC,), DEMAND_GRID, engine=Engine.BOTH, name="heuristic_gap"
        ),
    }


def load_topology_or_default(path: str | Path | None) -> Topology:
    return canonical_parking_lot() if path is None else load_topology(path)


__all__ = [
    "COLUMNS",
    "Engine",
    "GapTable",
    "SweepKind",
    "SweepPoint",
    "SweepResult",
    "SweepSpec",
    "emit_results",
    "gap_report",
    "load_sweep_spec",
    "run_sweep",
    "standard_specs",
]
