"""CPLEX LP text export and ``name=value`` solution import."""

from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Iterable

from ..powermodel import FeasibilityReport, PowerBreakdown, check_feasibility, total_power
from .model import ModelInstance

LINE_WIDTH = 78


def _num(x: float) -> str:
    # repr round-trips floats exactly; integers print without a trailing .0
    return str(int(x)) if float(x).is_integer() and abs(x) < 1e15 else repr(float(x))


def _terms(coeffs: Iterable[tuple[int, float]], names: list[str]) -> list[str]:
    out = []
    for k, (i, c) in enumerate(coeffs):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = names[i] if mag == 1 else f"{_num(mag)} {names[i]}"
        out.append(f"{sign} {body}" if k or c < 0 else body)
    return out


def _wrap(head: str, tokens: list[str], tail: str = "") -> list[str]:
    lines, cur = [], head
    for tok in tokens + ([tail] if tail else []):
        if len(cur) + 1 + len(tok) > LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "   " + tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    lines.append(cur)
    return lines


def export_lp(m: ModelInstance) -> str:
    """The instance in CPLEX LP format; identical instances give identical text."""
    names = [v.name for v in m.variables]
    out = [
        f"\\ vcopt placement model: {len(m.demands)} demand(s), scenario {m.scenario.value}, "
        f"mode {m.mode.value}, S {'unlimited' if m.S is None else m.S}",
        "Minimize",
    ]
    obj = sorted(m.objective.items())
    out += _wrap(" obj:", _terms(obj, names) if obj else ["0 " + names[0]])
    out.append("Subject To")
    sense = {"<=": "<=", ">=": ">=", "=": "="}
    for con in m.constraints:
        terms = _terms(con.coeffs, names)
        if not terms:
            continue
        out += _wrap(f" {con.name}:", terms, f"{sense[con.sense]} {_num(con.rhs)}")
    out.append("Bounds")
    for v in m.variables:
        if v.binary:
            continue
        if math.isinf(v.ub):
            out.append(f" {v.name} >= {_num(v.lb)}")
        else:
            out.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    out.append("Binaries")
    out += _wrap("", [v.name for v in m.variables if v.binary])
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(m: ModelInstance, path: str | Path) -> None:
    Path(path).write_text(export_lp(m))


_ASSIGN = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_]*)\s*=\s*([-+0-9.eE]+|inf|nan)\s*$")


class SolutionFormatError(ValueError):
    pass


def parse_solution(text: str, m: ModelInstance | None = None) -> dict[str, float]:
    """Read ``name=value`` lines. Blank lines and ``#`` comments are skipped.

    With ``m`` given, names that are not variables of the instance are
    rejected.
    """
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _ASSIGN.match(line)
        if not match:
            raise SolutionFormatError(f"line {lineno}: expected name=value, got {raw.strip()!r}")
        name, value = match.group(1), float(match.group(2))
        if not math.isfinite(value):
            raise SolutionFormatError(f"line {lineno}: {name} is not finite")
        if m is not None and name not in m.index:
            raise SolutionFormatError(f"line {lineno}: unknown variable {name}")
        if name in values:
            raise SolutionFormatError(f"line {lineno}: {name} assigned twice")
        values[name] = value
    return values


def format_solution(m: ModelInstance, values) -> str:
    """Inverse of :func:`parse_solution`; zero values are left out."""
    lines = []
    for v in m.variables:
        x = float(values[m.index[v.name]]) if not isinstance(values, dict) else float(values.get(v.name, 0.0))
        if x != 0.0:
            lines.append(f"{v.name}={x!r}")
    return "\n".join(lines) + "\n"


def validate_solution(m: ModelInstance, values: dict[str, float]) -> tuple[FeasibilityReport, PowerBreakdown | None]:
    """Check an externally produced solution and price it with the evaluator.

    Flows are taken as given, apart from the path decomposition that assigns
    shared arcs to destinations, so conservation slips show up as violations.
    """
    a = m.assignment_from_values(values, clean=False)
    report = check_feasibility(m.topology, a, m.demands, S=m.S, mode=m.mode, scenario=m.scenario)
    if not report.ok:
        return report, None
    return report, total_power(m.topology, a)
