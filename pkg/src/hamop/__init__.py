"""Hamiltonian differential operators on the jet space of one field in one variable."""

from .catalog import Family, FamilyError, FamilySpec, build, lemma3_coefficients, verify_lemma3_relations
from .diffop import DiffOp, adjoint, compose, from_symmetrized, is_hamiltonian, is_skew_adjoint, jacobi_residual
from .expr import Expr, JetPoint, U, W, X, evaluate, substitute, total_derivative
from .files import format_operator, parse_operator_file, parse_substitution_file
from .jetcalc import NEG_INFINITY, diff_order, euler_operator, frechet_derivative, level
from .momentum import (
    MomentumVerdict,
    Outcome,
    decide_momentum,
    momentum_ode_fifth,
    momentum_ode_third,
    solve_ode,
    verify_momentum_density,
)
from .parser import ParseError, parse
from .probe import ZeroKind, ZeroVerdict, probabilistic_zero, zero_test
from .transform import Kind, Substitution, is_special_contact, normalize_leading_coefficient, pushforward_operator

__version__ = "0.1.0"

__all__ = [
    "DiffOp", "Expr", "Family", "FamilyError", "FamilySpec", "JetPoint", "Kind", "MomentumVerdict",
    "NEG_INFINITY", "Outcome", "ParseError", "Substitution", "U", "W", "X", "ZeroKind", "ZeroVerdict",
    "adjoint", "build", "compose", "decide_momentum", "diff_order", "euler_operator", "evaluate",
    "format_operator", "frechet_derivative", "from_symmetrized", "is_hamiltonian", "is_skew_adjoint",
    "is_special_contact", "jacobi_residual", "lemma3_coefficients", "level", "momentum_ode_fifth",
    "momentum_ode_third", "normalize_leading_coefficient", "parse", "parse_operator_file",
    "parse_substitution_file", "probabilistic_zero", "pushforward_operator", "solve_ode", "substitute",
    "total_derivative", "verify_lemma3_relations", "verify_momentum_density", "zero_test",
]
