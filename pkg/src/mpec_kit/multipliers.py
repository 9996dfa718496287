"""Lower-level KKT multiplier set and point-checkable constraint qualifications."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .expr import jacobian
from .instance import MpecInstance, active_set, as_point, g_values
from .linalg import RationalMatrix, Vector, matrix_rank
from .polyhedra import (
    LpProblem,
    Polyhedron,
    PolyhedralCone,
    enumerate_extreme_rays,
    enumerate_vertices,
    is_empty,
    solve_lp,
)

STRONG_NONDEGENERACY_SOURCE = (
    "LICQ of the active lower-level gradients plus strict complementarity "
    "lambda_i - g_i(z) > 0 for every i (read componentwise)"
)


class CqStatus(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    NOT_APPLICABLE = "not-applicable"

    @classmethod
    def of(cls, ok: bool) -> CqStatus:
        return cls.HOLDS if ok else cls.FAILS


@dataclass(frozen=True)
class MultiplierAnalysis:
    set: Polyhedron
    active: tuple[int, ...]
    extreme_points: tuple[Vector, ...]
    rays: tuple[Vector, ...]
    is_empty: bool
    licq: CqStatus = CqStatus.NOT_APPLICABLE
    mfcq: CqStatus = CqStatus.NOT_APPLICABLE
    smfcq: CqStatus = CqStatus.NOT_APPLICABLE
    strongly_nondegenerate: CqStatus = CqStatus.NOT_APPLICABLE
    notes: tuple[str, ...] = field(default=())

    @property
    def is_singleton(self) -> bool:
        return not self.is_empty and len(self.extreme_points) == 1 and not self.rays

    @property
    def is_bounded(self) -> bool:
        return not self.rays


def lower_level_jacobian(inst: MpecInstance, z) -> RationalMatrix:
    """``∇_y g(z)`` as an l x m matrix."""
    zz = as_point(inst, z).z
    return jacobian(inst.g, range(inst.n, inst.n + inst.m), zz, inst.m)


def _primal_feasible(inst, z) -> bool:
    return all(v <= 0 for v in g_values(inst, z))


def multiplier_polyhedron(inst: MpecInstance, z) -> Polyhedron:
    """``{λ : ∇_y g(z)ᵀλ = -F(z), λ >= 0, λ_i = 0 for inactive i}``."""
    p = as_point(inst, z)
    zz = p.z
    l = inst.l
    Jg = lower_level_jacobian(inst, p)
    Fv = [f.evaluate(zz) for f in inst.F]
    act = set(active_set(inst, p))
    E, d = [], []
    for k in range(inst.m):
        E.append(Jg.col(k))
        d.append(-Fv[k])
    for i in range(l):
        if i not in act:
            E.append(tuple(Fraction(1 if j == i else 0) for j in range(l)))
            d.append(Fraction(0))
    A = [tuple(Fraction(-1 if j == i else 0) for j in range(l)) for i in range(l)]
    return Polyhedron(l, A, (0,) * l, E, d)


def multiplier_set(inst: MpecInstance, z) -> MultiplierAnalysis:
    """Multiplier polyhedron, its vertices and recession rays, and every CQ flag."""
    P = multiplier_polyhedron(inst, z)
    act = active_set(inst, z)
    empty = is_empty(P)
    if empty:
        verts, rays = (), ()
    else:
        verts = tuple(enumerate_vertices(P).points)
        rays = tuple(enumerate_extreme_rays(PolyhedralCone(P.dim, P.A, P.E)).rays)
    ma = MultiplierAnalysis(P, act, verts, rays, empty)
    if not _primal_feasible(inst, z):
        return ma
    licq = check_licq(inst, z)
    mfcq = check_mfcq(inst, z)
    smfcq = CqStatus.of(ma.is_singleton)
    sn = _strong_nondegeneracy(inst, z, licq, ma)
    return MultiplierAnalysis(P, act, verts, rays, empty, licq, mfcq, smfcq, sn, (STRONG_NONDEGENERACY_SOURCE,))


def extreme_multipliers(ma: MultiplierAnalysis) -> list[Vector]:
    return [] if ma.is_empty else list(ma.extreme_points)


def check_licq(inst: MpecInstance, z) -> CqStatus:
    if not _primal_feasible(inst, z):
        return CqStatus.NOT_APPLICABLE
    act = active_set(inst, z)
    Jg = lower_level_jacobian(inst, z)
    rows = [Jg.row(i) for i in act]
    return CqStatus.of(matrix_rank((rows, inst.m)) == len(act))


def check_mfcq(inst: MpecInstance, z) -> CqStatus:
    """LP test: max t s.t. ∇_y g_iᵀd + t <= 0 (i active), t <= 1; holds iff t* > 0."""
    if not _primal_feasible(inst, z):
        return CqStatus.NOT_APPLICABLE
    act = active_set(inst, z)
    if not act:
        return CqStatus.HOLDS
    m = inst.m
    Jg = lower_level_jacobian(inst, z)
    A = [tuple(Jg.row(i)) + (Fraction(1),) for i in act]
    A.append((Fraction(0),) * m + (Fraction(1),))
    b = [Fraction(0)] * len(act) + [Fraction(1)]
    sol = solve_lp(LpProblem((0,) * m + (1,), Polyhedron(m + 1, A, b), "max"))
    return CqStatus.of(sol.status == "optimal" and sol.value > 0)


def check_smfcq(inst: MpecInstance, z) -> CqStatus:
    if not _primal_feasible(inst, z):
        return CqStatus.NOT_APPLICABLE
    return multiplier_set(inst, z).smfcq


def _strong_nondegeneracy(inst, z, licq: CqStatus, ma: MultiplierAnalysis) -> CqStatus:
    if licq is not CqStatus.HOLDS or not ma.is_singleton:
        return CqStatus.FAILS
    lam = ma.extreme_points[0]
    gv = g_values(inst, z)
    return CqStatus.of(all(li - gi > 0 for li, gi in zip(lam, gv)))


def check_strong_nondegeneracy(inst: MpecInstance, z) -> CqStatus:
    if not _primal_feasible(inst, z):
        return CqStatus.NOT_APPLICABLE
    return multiplier_set(inst, z).strongly_nondegenerate
