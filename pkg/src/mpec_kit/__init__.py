"""Exact first-order analysis of MPECs at a given point."""

__version__ = "0.1.0"

from .expr import PolyExpr, differentiate, evaluate, jacobian, parse_expr
from .instance import ActiveSets, EvalPoint, MpecInstance, active_sets, feasibility_report, load_instance
from .multipliers import (
    MultiplierAnalysis,
    check_licq,
    check_mfcq,
    check_smfcq,
    check_strong_nondegeneracy,
    extreme_multipliers,
    multiplier_set,
)
from .polyhedra import ConeUnion, LpProblem, LpSolution, PolyhedralCone, Polyhedron, solve_lp
