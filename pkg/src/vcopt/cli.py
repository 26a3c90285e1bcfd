"""Command-line entry point: ``vcopt solve | heuristic | sweep | export-lp | validate``.

Exit codes: 0 success, 1 infeasible or blocked, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import heuristic
from .experiments import Engine, SweepSpecError, emit_results, load_sweep_spec, results_csv, results_text, run_sweep
from .optimizer import ModelError, build_model, solve_exact
from .optimizer.lpformat import SolutionFormatError, export_lp, parse_solution, validate_solution
from .powermodel import Assignment, PowerBreakdown
from .scenario import Demand, Scenario, TrafficMode, parse_rate
from .topo import Topology, TopologyError, load_topology, topology_from_dict

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2
ENV_TOPOLOGY = "VCOPT_TOPOLOGY"


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage text and exit 2, as argparse does, but to stderr only
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def embedded_topology() -> Topology:
    text = resources.files("vcopt").joinpath("data/canonical_topology.json").read_text()
    return topology_from_dict(json.loads(text))


def resolve_topology(path: str | None) -> Topology:
    path = path or os.environ.get(ENV_TOPOLOGY)
    if not path:
        return embedded_topology()
    try:
        return load_topology(path)
    except FileNotFoundError:
        raise InputError(f"topology file not found: {path}") from None
    except TopologyError as exc:
        raise InputError(f"invalid topology {path}: {exc}") from None


def read_demands(path: str) -> list[Demand]:
    """JSON list (or ``{"demands": [...]}``) of ``{source, traffic_mbps, mips?}``."""
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"demands file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"demands file is not valid JSON: {exc}") from None
    items = doc.get("demands") if isinstance(doc, dict) else doc
    if not isinstance(items, list) or not items:
        raise InputError("demands file must hold a non-empty list")
    out = []
    for i, entry in enumerate(items):
        try:
            out.append(Demand.from_mbps(str(entry["source"]), float(entry["traffic_mbps"]), entry.get("mips"), id=int(entry.get("id", i))))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"demands[{i}]: {exc}") from None
    return out


def collect_demands(args, t: Topology) -> list[Demand]:
    if args.demands and args.demand:
        raise InputError("use either --demands or --demand, not both")
    if args.demands:
        return read_demands(args.demands)
    if not args.demand:
        raise InputError("no demand given (use --demand or --demands)")
    try:
        traffic = parse_rate(args.demand)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    source = args.source or t.vehicles[0]
    mips = args.mips if args.mips is not None else None
    try:
        return [Demand.from_mbps(source, traffic / 1e6, mips)]
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def report_text(t: Topology, a: Assignment, b: PowerBreakdown, head: list[str]) -> str:
    lines = list(head)
    lines.append(f"total_power_w: {_fmt(b.tp)}")
    lines.append(f"networking_w: {_fmt(b.tp_net)}")
    lines.append(f"processing_w: {_fmt(b.tp_proc)}")
    lines.append("placements:")
    for (s, d), om in sorted(a.placements.items()):
        lines.append(f"  {s} -> {d}: {_fmt(om)} MIPS, {_fmt(a.traffic.get((s, d), 0.0) / 1e6)} Mb/s")
    lines.append("nodes:")
    for n in (node.id for node in t.nodes):
        if b.total[n] > 0:
            lines.append(f"  {n}: net {_fmt(b.networking[n])} W, proc {_fmt(b.processing[n])} W, total {_fmt(b.total[n])} W")
    return "\n".join(lines) + "\n"


def report_csv(a: Assignment, b: PowerBreakdown, status: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["status", "source", "destination", "mips", "traffic_bps", "tp_w", "net_w", "proc_w"])
    for (s, d), om in sorted(a.placements.items()):
        w.writerow([status, s, d, repr(om), repr(a.traffic.get((s, d), 0.0)), repr(b.tp), repr(b.tp_net), repr(b.tp_proc)])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    t = resolve_topology(args.topology)
    demands = collect_demands(args, t)
    try:
        m = build_model(t, demands, args.scenario, args.splits, args.mode)
    except ModelError as exc:
        raise InputError(str(exc)) from None
    r = solve_exact(m, args.budget)
    if not r.feasible:
        _emit("status: Infeasible\n" if args.format == "text" else "status\nInfeasible\n", args.out)
        return EXIT_INFEASIBLE
    if args.format == "csv":
        _emit(report_csv(r.assignment, r.breakdown, r.status.value), args.out)
    else:
        head = [f"status: {r.status.value}", f"lower_bound_w: {_fmt(r.lower_bound)}"]
        _emit(report_text(t, r.assignment, r.breakdown, head), args.out)
    return EXIT_OK


def cmd_heuristic(args) -> int:
    t = resolve_topology(args.topology)
    demands = collect_demands(args, t)
    for d in demands:
        if d.source not in t:
            raise InputError(f"unknown source {d.source!r}")
    try:
        h = heuristic.run(t, demands, args.scenario, args.splits, args.mode)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.format == "csv":
        _emit(report_csv(h.assignment, h.breakdown, "Blocked" if h.blocked else "Served"), args.out)
    else:
        head = [
            f"served: {len(h.served)}",
            f"blocked: {len(h.blocked)}" + (f" ({', '.join(d.source for d in h.blocked)})" if h.blocked else ""),
        ]
        text = report_text(t, h.assignment, h.breakdown, head)
        if args.verbose:
            text += "trace:\n" + "\n".join(h.trace) + "\n"
        _emit(text, args.out)
    return EXIT_INFEASIBLE if h.blocked else EXIT_OK


def cmd_sweep(args) -> int:
    try:
        spec = load_sweep_spec(args.spec)
    except FileNotFoundError:
        raise InputError(f"sweep spec not found: {args.spec}") from None
    except (SweepSpecError, json.JSONDecodeError) as exc:
        raise InputError(f"invalid sweep spec: {exc}") from None
    if args.engine:
        spec = replace(spec, engine=Engine(args.engine))
    t = resolve_topology(args.topology)
    result = run_sweep(spec, t, threads=args.threads)
    if args.out:
        emit_results(result, args.out, args.format)
    else:
        sys.stdout.write(results_csv(result) if args.format == "csv" else results_text(result))
    return EXIT_OK


def cmd_export_lp(args) -> int:
    t = resolve_topology(args.topology)
    demands = collect_demands(args, t)
    try:
        m = build_model(t, demands, args.scenario, args.splits, args.mode)
    except ModelError as exc:
        raise InputError(str(exc)) from None
    _emit(export_lp(m), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    t = resolve_topology(args.topology)
    problems = t.violations()
    if problems:
        sys.stdout.write("topology: invalid\n" + "".join(f"  {p}\n" for p in problems))
        return EXIT_INPUT
    if not args.solution:
        sys.stdout.write(f"topology: ok ({len(t.nodes)} nodes, {len(t.links)} links)\n")
        return EXIT_OK
    demands = collect_demands(args, t)
    try:
        m = build_model(t, demands, args.scenario, args.splits, args.mode)
        values = parse_solution(Path(args.solution).read_text(), m)
    except FileNotFoundError:
        raise InputError(f"solution file not found: {args.solution}") from None
    except (ModelError, SolutionFormatError) as exc:
        raise InputError(str(exc)) from None
    report, breakdown = validate_solution(m, values)
    if not report.ok:
        sys.stdout.write("solution: infeasible\n" + str(report) + "\n")
        return EXIT_INFEASIBLE
    sys.stdout.write(f"solution: ok\ntotal_power_w: {_fmt(breakdown.tp)}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vcopt", description="Energy-aware placement of processing demands over vehicles, edge nodes and the cloud.")
    common = _Parser(add_help=False)
    common.add_argument("--topology", help=f"topology JSON (default: ${ENV_TOPOLOGY} or the built-in car park)")
    common.add_argument("--scenario", type=Scenario.parse, default=Scenario.VEC, help="v, ve, c or vec")
    common.add_argument("--splits", type=int, default=None, help="max destinations per demand (default unlimited)")
    common.add_argument("--mode", type=TrafficMode.parse, default=TrafficMode.FT, help="ft or pt")
    common.add_argument("--out", "-o", help="write output here instead of stdout")
    common.add_argument("--format", choices=("text", "csv"), default="text")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=None, help="reserved; runs are deterministic")
    common.add_argument("--verbose", "-v", action="store_true")
    common.add_argument("--engine", choices=[e.value for e in Engine], default=None)
    dem = _Parser(add_help=False)
    dem.add_argument("--demand", help="traffic of a single demand, e.g. 2mbps")
    dem.add_argument("--mips", type=float, default=None, help="processing of --demand (default 2000 MIPS per Mb/s)")
    dem.add_argument("--source", help="source vehicle of --demand (default: first vehicle)")
    dem.add_argument("--demands", help="JSON file of demands")
    dem.add_argument("--budget", type=float, default=600.0, help="solver time limit in seconds")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common, dem], help="exact optimum").set_defaults(func=cmd_solve)
    sub.add_parser("heuristic", parents=[common, dem], help="real-time allocator").set_defaults(func=cmd_heuristic)
    sw = sub.add_parser("sweep", parents=[common], help="run a sweep spec file")
    sw.add_argument("spec")
    sw.set_defaults(func=cmd_sweep)
    sub.add_parser("export-lp", parents=[common, dem], help="write the model in LP format").set_defaults(func=cmd_export_lp)
    va = sub.add_parser("validate", parents=[common, dem], help="check a topology or an imported solution")
    va.add_argument("--solution", help="name=value solution file for the model given by the demand flags")
    va.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.splits is not None and args.splits < 1:
        parser.error("--splits must be >= 1")
    try:
        return args.func(args)
    except InputError as exc:
        sys.stderr.write(f"vcopt: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
