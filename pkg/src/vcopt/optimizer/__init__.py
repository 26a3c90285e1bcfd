from .lpformat import SolutionFormatError, export_lp, parse_solution, validate_solution, write_lp
from .model import ModelError, ModelInstance, build_model
from .oracle import OracleEnvelopeError, brute_force_oracle
from .solve import SolveResult, Status, solve_exact

__all__ = [
    "ModelError",
    "ModelInstance",
    "OracleEnvelopeError",
    "SolutionFormatError",
    "SolveResult",
    "Status",
    "brute_force_oracle",
    "build_model",
    "export_lp",
    "parse_solution",
    "solve_exact",
    "validate_solution",
    "write_lp",
]
