"""Critical cones, critical multipliers, the AVI linearization map and the MPEC linearized cone."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import NamedTuple, Sequence

from .expr import PolyExpr, differentiate, jacobian
from .instance import MpecInstance, active_set, as_point
from .linalg import RationalMatrix, Vector, dot
from .multipliers import lower_level_jacobian, multiplier_polyhedron, multiplier_set
from .polyhedra import (
    MAX_FACE_ROWS,
    ConeUnion,
    EnumerationLimitError,
    LpProblem,
    Polyhedron,
    PolyhedralCone,
    cone_contains,
    conic_hull,
    enumerate_vertices,
    is_empty,
    member,
    solve_lp,
)


def _nonzero(rows):
    return [r for r in rows if any(x != 0 for x in r)]


def _zeros(k):
    return tuple(Fraction(0) for _ in range(k))


def _lam(inst: MpecInstance, lam) -> Vector:
    lam = tuple(Fraction(v) for v in lam)
    if len(lam) != inst.l:
        raise ValueError(f"multiplier must have length l={inst.l}")
    return lam


def require_multiplier(inst: MpecInstance, z, lam) -> Vector:
    lam = _lam(inst, lam)
    if not member(multiplier_polyhedron(inst, z), lam):
        raise ValueError(f"{[str(v) for v in lam]} is not in the multiplier set M(z)")
    return lam


def full_gradients(inst: MpecInstance, z) -> RationalMatrix:
    """``∇g(z)`` over all n+m variables."""
    zz = as_point(inst, z).z
    return jacobian(inst.g, range(inst.dim), zz, inst.dim)


def index_split(inst: MpecInstance, z, lam) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """(I_0, I_+): active indices with zero and with positive multiplier."""
    act = active_set(inst, z)
    return tuple(i for i in act if lam[i] == 0), tuple(i for i in act if lam[i] > 0)


# --------------------------------------------------------------------------
# Lagrangian and critical cones


def vi_lagrangian(inst: MpecInstance, lam) -> list[PolyExpr]:
    """Components of ``L(z, λ) = F(z) + Σ λ_i ∇_y g_i(z)``."""
    lam = _lam(inst, lam)
    out = []
    for k in range(inst.m):
        Lk = inst.F[k]
        for i, li in enumerate(lam):
            if li:
                Lk = Lk + differentiate(inst.g[i], inst.n + k) * li
        out.append(Lk)
    return out


def vi_lagrangian_jacobians(inst: MpecInstance, z, lam) -> tuple[RationalMatrix, RationalMatrix]:
    zz = as_point(inst, z).z
    L = vi_lagrangian(inst, lam)
    Jx = jacobian(L, range(inst.n), zz, inst.n)
    Jy = jacobian(L, range(inst.n, inst.dim), zz, inst.m)
    return Jx, Jy


def lifted_critical_cone(inst: MpecInstance, z, lam) -> PolyhedralCone:
    lam = require_multiplier(inst, z, lam)
    J = full_gradients(inst, z)
    I0, Ip = index_split(inst, z, lam)
    return PolyhedralCone(inst.dim, [J.row(i) for i in I0], [J.row(i) for i in Ip])


def _dx_offsets(inst, z, dx):
    dx = tuple(Fraction(v) for v in dx)
    if len(dx) != inst.n:
        raise ValueError(f"dx must have length n={inst.n}")
    J = full_gradients(inst, z)
    return [dot(J.row(i)[: inst.n], dx) for i in range(inst.l)]


def directional_critical_set(inst: MpecInstance, z, lam, dx) -> Polyhedron:
    """``{dy : ∇g_i·(dx, dy) <= 0 on I_0, = 0 on I_+}`` for fixed dx."""
    lam = require_multiplier(inst, z, lam)
    Jy = lower_level_jacobian(inst, z)
    off = _dx_offsets(inst, z, dx)
    I0, Ip = index_split(inst, z, lam)
    return Polyhedron(
        inst.m,
        [Jy.row(i) for i in I0],
        [-off[i] for i in I0],
        [Jy.row(i) for i in Ip],
        [-off[i] for i in Ip],
    )


@dataclass(frozen=True)
class LpFace:
    status: str
    face: Polyhedron | None
    value: Fraction | None
    vertex: Vector | None = None


def critical_multipliers(inst: MpecInstance, z, dx) -> LpFace:
    """Maximise ``Σ λ_i dxᵀ∇_x g_i(z)`` over M(z); the optimal face is M^c(z; dx)."""
    M = multiplier_polyhedron(inst, z)
    c = _dx_offsets(inst, z, dx)
    sol = solve_lp(LpProblem(c, M, "max"))
    if sol.status == "infeasible":
        raise ValueError("M(z) is empty, so there are no critical multipliers")
    if sol.status == "unbounded":
        return LpFace("unbounded", None, None)
    return LpFace("optimal", sol.face, sol.value, sol.vertex)


def critical_multiplier_vertices(inst: MpecInstance, z, dx) -> list[Vector]:
    r = critical_multipliers(inst, z, dx)
    return [] if r.face is None else enumerate_vertices(r.face).points


def dual_critical_lp(inst: MpecInstance, z, dx) -> LpFace:
    """``min dyᵀF(z)`` s.t. ``dxᵀ∇_x g_i + dyᵀ∇_y g_i <= 0`` for active i."""
    p = as_point(inst, z)
    Fv = [f.evaluate(p.z) for f in inst.F]
    Jy = lower_level_jacobian(inst, p)
    off = _dx_offsets(inst, p, dx)
    act = active_set(inst, p)
    P = Polyhedron(inst.m, [Jy.row(i) for i in act], [-off[i] for i in act])
    sol = solve_lp(LpProblem(Fv, P, "min"))
    if sol.status != "optimal":
        return LpFace(sol.status, None, None)
    return LpFace("optimal", sol.face, sol.value, sol.vertex)


# --------------------------------------------------------------------------
# affine variational inequalities


@dataclass(frozen=True)
class AviProblem:
    """Find ``dy ∈ K`` with ``(q + M dy)ᵀ(v - dy) >= 0`` for all ``v ∈ K``."""

    q: Vector
    M: RationalMatrix
    K: Polyhedron

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(Fraction(v) for v in self.q))
        m = len(self.q)
        if self.M.shape != (m, m) or self.K.dim != m:
            raise ValueError("AVI data dimensions disagree")


class SolutionPiece(NamedTuple):
    pattern: tuple[int, ...]
    piece: Polyhedron


@dataclass(frozen=True)
class SolutionSetDescription:
    dim: int
    pieces: tuple[SolutionPiece, ...] = field(default=())

    @property
    def is_empty(self) -> bool:
        return not self.pieces

    @property
    def polyhedra(self) -> list[Polyhedron]:
        return [p.piece for p in self.pieces]

    def contains(self, v) -> bool:
        return any(member(p.piece, v) for p in self.pieces)


def _normal_rows(ineq_normals, eq_normals, dim):
    """H-rep (N, P) of ``cone(ineq_normals) + span(eq_normals)``: ``N w <= 0, P w = 0``."""
    h = conic_hull(ineq_normals, eq_normals, dim)
    return h.A, h.E


def _drop_trivial_rows(P: Polyhedron) -> Polyhedron | None:
    """Remove all-zero rows; ``None`` when such a row is unsatisfiable."""
    A, b, E, d = [], [], [], []
    for a, bi in zip(P.A, P.b):
        if any(a):
            A.append(a)
            b.append(bi)
        elif bi < 0:
            return None
    for e, di in zip(P.E, P.d):
        if any(e):
            E.append(e)
            d.append(di)
        elif di != 0:
            return None
    return Polyhedron(P.dim, A, b, E, d)


def solve_avi(p: AviProblem) -> SolutionSetDescription:
    """Exact solution set by enumerating which inequality rows of K are active.

    On the face where rows ``S`` hold with equality, ``dy`` solves the AVI iff
    ``-(q + M dy)`` lies in ``cone(A_S) + span(E)``.
    """
    K = p.K
    m = K.dim
    if len(K.A) > MAX_FACE_ROWS:
        raise EnumerationLimitError(f"{len(K.A)} inequality rows exceed the face cap {MAX_FACE_ROWS}")
    Mrows = p.M.rows
    pieces = []
    seen = set()
    for k in range(len(K.A) + 1):
        for S in combinations(range(len(K.A)), k):
            N, P = _normal_rows([K.A[i] for i in S], K.E, m)
            A = list(K.A)
            b = list(K.b)
            for nr in N:
                A.append(tuple(-dot(nr, [Mrows[r][j] for r in range(m)]) for j in range(m)))
                b.append(dot(nr, p.q))
            E = [K.A[i] for i in S] + list(K.E)
            d = [K.b[i] for i in S] + list(K.d)
            for pr in P:
                E.append(tuple(-dot(pr, [Mrows[r][j] for r in range(m)]) for j in range(m)))
                d.append(dot(pr, p.q))
            piece = _drop_trivial_rows(Polyhedron(m, A, b, E, d))
            if piece is None or is_empty(piece):
                continue
            key = (piece.A, piece.b, piece.E, piece.d)
            if key in seen:
                continue
            seen.add(key)
            pieces.append(SolutionPiece(S, piece))
    return SolutionSetDescription(m, tuple(pieces))


def linearization_map(inst: MpecInstance, z, lam, dx) -> SolutionSetDescription:
    lam = require_multiplier(inst, z, lam)
    Jx, Jy = vi_lagrangian_jacobians(inst, z, lam)
    dx = tuple(Fraction(v) for v in dx)
    K = directional_critical_set(inst, z, lam, dx)
    return solve_avi(AviProblem(Jx @ dx, Jy, K))


# --------------------------------------------------------------------------
# MPEC linearized cone


def z_tangent_rows(inst: MpecInstance, z) -> list[Vector]:
    """Active rows of ``Gx + Hy + a <= 0``; ``T(z; Z) = {dz : rows·dz <= 0}``."""
    zz = as_point(inst, z).z
    return [row for row, c in inst.z_rows() if dot(row, zz) + c == 0]


def z_tangent_cone(inst: MpecInstance, z) -> PolyhedralCone:
    return PolyhedralCone(inst.dim, z_tangent_rows(inst, z))


def lambda_graph_pieces(inst: MpecInstance, z, lam) -> list[tuple[tuple[int, ...], PolyhedralCone]]:
    """Pieces of ``Gr(LS_λ) ∩ T(z; Z)`` in (dx, dy), one per active-face pattern."""
    lam = require_multiplier(inst, z, lam)
    n, m = inst.n, inst.m
    J = full_gradients(inst, z)
    Jy = lower_level_jacobian(inst, z)
    Lx, Ly = vi_lagrangian_jacobians(inst, z, lam)
    I0, Ip = index_split(inst, z, lam)
    if len(I0) > MAX_FACE_ROWS:
        raise EnumerationLimitError(f"{len(I0)} degenerate indices exceed the face cap {MAX_FACE_ROWS}")
    # row r of (Lx | Ly) as a joint vector
    Lrows = [tuple(Lx.row(r)) + tuple(Ly.row(r)) for r in range(m)]
    zrows = z_tangent_rows(inst, z)
    out = []
    for k in range(len(I0) + 1):
        for S in combinations(I0, k):
            N, P = _normal_rows([Jy.row(i) for i in S], [Jy.row(i) for i in Ip], m)
            A = [J.row(i) for i in I0 if i not in S] + list(zrows)
            E = [J.row(i) for i in S] + [J.row(i) for i in Ip]
            for nr in N:
                A.append(tuple(-sum((nr[r] * Lrows[r][j] for r in range(m)), Fraction(0)) for j in range(n + m)))
            for pr in P:
                E.append(tuple(-sum((pr[r] * Lrows[r][j] for r in range(m)), Fraction(0)) for j in range(n + m)))
            out.append((S, PolyhedralCone(n + m, _nonzero(A), _nonzero(E))))
    return out


def prune_pieces(pieces: Sequence[PolyhedralCone]) -> list[PolyhedralCone]:
    """Drop pieces contained in another piece (keeps the first of equal pieces)."""
    pieces = list(pieces)
    keep = []
    for i, P in enumerate(pieces):
        redundant = False
        for j, Q in enumerate(pieces):
            if i == j or not cone_contains(Q, P):
                continue
            if not cone_contains(P, Q) or j < i:
                redundant = True
                break
        if not redundant:
            keep.append(P)
    return keep


def linearized_cone(inst: MpecInstance, z, multipliers: Sequence) -> ConeUnion:
    pieces = []
    for lam in multipliers:
        pieces.extend(P for _, P in lambda_graph_pieces(inst, z, lam))
    return ConeUnion(inst.dim, prune_pieces(pieces))


class Membership(NamedTuple):
    member: bool
    multiplier: Vector | None = None


def _avi_kkt_holds(inst, z, lam, dx, dy) -> bool:
    """Is there μ with Lx dx + Ly dy + Σ μ_i ∇_y g_i = 0, μ >= 0 on tight I_0 rows, free on I_+?"""
    Jy = lower_level_jacobian(inst, z)
    Lx, Ly = vi_lagrangian_jacobians(inst, z, lam)
    off = _dx_offsets(inst, z, dx)
    I0, Ip = index_split(inst, z, lam)
    tight = [i for i in I0 if off[i] + dot(Jy.row(i), dy) == 0]
    idx = tight + list(Ip)
    k = len(idx)
    rhs = [-(a + b) for a, b in zip(Lx @ dx, Ly @ dy)]
    E = [tuple(Jy.row(i)[r] for i in idx) for r in range(inst.m)]
    A = [tuple(Fraction(-1 if t == s else 0) for t in range(k)) for s in range(len(tight))]
    P = Polyhedron(k, A, _zeros(len(A)), E, rhs)
    return not is_empty(P)


def linearized_cone_member(inst: MpecInstance, z, dz, multipliers: Sequence) -> Membership:
    dz = tuple(Fraction(v) for v in dz)
    if len(dz) != inst.dim:
        raise ValueError(f"dz must have length {inst.dim}")
    if any(dot(r, dz) > 0 for r in z_tangent_rows(inst, z)):
        return Membership(False)
    dx, dy = dz[: inst.n], dz[inst.n:]
    for lam in multipliers:
        lam = require_multiplier(inst, z, lam)
        if member(directional_critical_set(inst, z, lam, dx), dy) and _avi_kkt_holds(inst, z, lam, dx, dy):
            return Membership(True, lam)
    return Membership(False)


def candidate_multipliers(inst: MpecInstance, z, dx=None) -> tuple[list[Vector], str]:
    """Finite multiplier list ``M^e(z)`` (plus vertices of ``M^c(z; dx)`` when dx is given)."""
    ma = multiplier_set(inst, z)
    if ma.is_empty:
        return [], "M(z) is empty"
    lams = list(ma.extreme_points)
    note = "extreme points M^e(z)"
    if dx is not None:
        for v in critical_multiplier_vertices(inst, z, dx):
            if v not in lams:
                lams.append(v)
        note += " plus vertices of M^c(z; dx)"
    return lams, note
