"""Exact-rational polyhedral computation.

Everything here works with ``Fraction`` and has no tolerances.  Enumeration
routines are brute force over constraint subsets and are capped at desk
scale (``MAX_DIM`` variables, ``MAX_CONSTRAINTS`` inequality rows).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import NamedTuple, Sequence

from .expr import format_rational, to_rational
from .linalg import (
    RationalMatrix,
    Vector,
    canonical_basis,
    dot,
    matrix_rank,
    normalize_direction,
    null_space,
    project_onto_span,
    rref,
    solve,
)

MAX_DIM = 12
MAX_CONSTRAINTS = 24
MAX_FACE_ROWS = 20

__all__ = [
    "Polyhedron", "PolyhedralCone", "ConeUnion", "LpProblem", "LpSolution",
    "solve_lp", "enumerate_vertices", "enumerate_extreme_rays", "member",
    "cone_union_equal", "squared_distance_to_union", "matrix_rank", "null_space",
    "conic_hull", "project_cone", "homogenize", "polyhedra_union_equal",
    "is_empty", "EnumerationLimitError",
]


class EnumerationLimitError(ValueError):
    """Raised when a brute-force enumeration would exceed the desk-scale caps."""


def _vec(v) -> Vector:
    return tuple(to_rational(x) for x in v)


@dataclass(frozen=True)
class Polyhedron:
    """``{v : A v <= b, E v = d}`` in ``R^dim``; no rows means the whole space."""

    dim: int
    A: tuple[Vector, ...] = ()
    b: Vector = ()
    E: tuple[Vector, ...] = ()
    d: Vector = ()

    def __post_init__(self):
        A = tuple(_vec(r) for r in self.A)
        E = tuple(_vec(r) for r in self.E)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "b", _vec(self.b))
        object.__setattr__(self, "d", _vec(self.d))
        if len(self.A) != len(self.b) or len(self.E) != len(self.d):
            raise ValueError("row/rhs count mismatch")
        if any(len(r) != self.dim for r in self.A + self.E):
            raise ValueError(f"constraint width differs from dim={self.dim}")

    @classmethod
    def whole_space(cls, dim: int) -> Polyhedron:
        return cls(dim)

    @classmethod
    def point(cls, p) -> Polyhedron:
        k = len(p)
        return cls(k, E=[[1 if i == j else 0 for j in range(k)] for i in range(k)], d=p)

    @property
    def ineq(self) -> tuple[RationalMatrix, Vector]:
        return RationalMatrix(self.A, self.dim), self.b

    @property
    def eq(self) -> tuple[RationalMatrix, Vector]:
        return RationalMatrix(self.E, self.dim), self.d

    def add(self, A=(), b=(), E=(), d=()) -> Polyhedron:
        return Polyhedron(self.dim, self.A + tuple(A), self.b + tuple(b), self.E + tuple(E), self.d + tuple(d))

    def intersect(self, other: Polyhedron) -> Polyhedron:
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return self.add(other.A, other.b, other.E, other.d)

    def is_homogeneous(self) -> bool:
        return all(x == 0 for x in self.b) and all(x == 0 for x in self.d)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "A": [[format_rational(x) for x in r] for r in self.A],
            "b": [format_rational(x) for x in self.b],
            "E": [[format_rational(x) for x in r] for r in self.E],
            "d": [format_rational(x) for x in self.d],
        }

    @classmethod
    def from_json(cls, doc: dict) -> Polyhedron:
        return cls(doc["dim"], doc.get("A", ()), doc.get("b", ()), doc.get("E", ()), doc.get("d", ()))


class PolyhedralCone(Polyhedron):
    """A polyhedron whose right-hand sides are all zero."""

    def __init__(self, dim: int, A=(), E=(), b=None, d=None):
        A, E = tuple(A), tuple(E)
        super().__init__(dim, A, (0,) * len(A) if b is None else b, E, (0,) * len(E) if d is None else d)
        if not self.is_homogeneous():
            raise ValueError("cone rows must have zero right-hand side")

    @classmethod
    def from_polyhedron(cls, p: Polyhedron) -> PolyhedralCone:
        return cls(p.dim, p.A, p.E, p.b, p.d)

    def add_rows(self, A=(), E=()) -> PolyhedralCone:
        return PolyhedralCone(self.dim, self.A + tuple(_vec(r) for r in A), self.E + tuple(_vec(r) for r in E))

    def __repr__(self):
        return f"PolyhedralCone(dim={self.dim}, A={_fmt_rows(self.A)}, E={_fmt_rows(self.E)})"


def _fmt_rows(rows):
    return "[" + "; ".join(",".join(format_rational(x) for x in r) for r in rows) + "]"


@dataclass(frozen=True)
class ConeUnion:
    dim: int
    pieces: tuple[PolyhedralCone, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if any(p.dim != self.dim for p in self.pieces):
            raise ValueError("all pieces must share the union's dimension")

    def contains(self, v) -> bool:
        return any(member(p, v) for p in self.pieces)


# --------------------------------------------------------------------------
# linear programming


@dataclass(frozen=True)
class LpProblem:
    c: Vector
    feasible: Polyhedron
    sense: str = "min"

    def __post_init__(self):
        object.__setattr__(self, "c", _vec(self.c))
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        if len(self.c) != self.feasible.dim:
            raise ValueError("objective length differs from polyhedron dim")


@dataclass(frozen=True)
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    value: Fraction | None = None
    vertex: Vector | None = None
    active: tuple[int, ...] = ()
    face: Polyhedron | None = field(default=None, compare=False)


def _pivot(T, red, r, c):
    pv = T[r][c]
    if pv != 1:
        T[r] = [v / pv for v in T[r]]
    row = T[r]
    for i in range(len(T)):
        if i != r:
            f = T[i][c]
            if f:
                T[i] = [a - f * b for a, b in zip(T[i], row)]
    f = red[c]
    if f:
        red[:] = [a - f * b for a, b in zip(red, row)]


def _run_simplex(T, basis, cost, allowed):
    red = list(cost) + [Fraction(0)]
    for i, bv in enumerate(basis):
        cb = red[bv]
        if cb:
            red[:] = [a - cb * b for a, b in zip(red, T[i])]
    while True:
        # Bland: lowest-index improving column, lowest-index leaving variable on ties
        enter = next((j for j in allowed if red[j] < 0), None)
        if enter is None:
            return "optimal", red
        best = None
        for i, row in enumerate(T):
            a = row[enter]
            if a > 0:
                ratio = row[-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            return "unbounded", red
        _pivot(T, red, best[1], enter)
        basis[best[1]] = enter


def solve_lp(p: LpProblem) -> LpSolution:
    """Exact two-phase tableau simplex with Bland's anti-cycling rule."""
    P = p.feasible
    n = P.dim
    sign = -1 if p.sense == "max" else 1
    cost_v = [sign * c for c in p.c]
    mi, me = len(P.A), len(P.E)
    # columns: v+ (n), v- (n), slacks (mi), artificials (mi+me)
    nreal = 2 * n + mi
    rows = []
    for i, (a, bi) in enumerate(zip(P.A, P.b)):
        r = list(a) + [-x for x in a] + [Fraction(1 if k == i else 0) for k in range(mi)]
        rows.append((r, bi))
    for e, di in zip(P.E, P.d):
        rows.append((list(e) + [-x for x in e] + [Fraction(0)] * mi, di))
    T = []
    nart = len(rows)
    for i, (r, rhs) in enumerate(rows):
        if rhs < 0:
            r, rhs = [-x for x in r], -rhs
        T.append(r + [Fraction(1 if k == i else 0) for k in range(nart)] + [rhs])
    basis = [nreal + i for i in range(nart)]
    ncol = nreal + nart
    cost1 = [Fraction(0)] * nreal + [Fraction(1)] * nart
    _, red = _run_simplex(T, basis, cost1, list(range(ncol)))
    if red[-1] != 0:
        return LpSolution("infeasible")
    # drive artificials out of the basis; drop redundant rows
    i = 0
    while i < len(T):
        if basis[i] >= nreal:
            j = next((j for j in range(nreal) if T[i][j] != 0), None)
            if j is None:
                del T[i]
                del basis[i]
                continue
            dummy = [Fraction(0)] * (ncol + 1)
            _pivot(T, dummy, i, j)
            basis[i] = j
        i += 1
    cost2 = cost_v + [-c for c in cost_v] + [Fraction(0)] * mi + [Fraction(0)] * nart
    status, red = _run_simplex(T, basis, cost2, list(range(nreal)))
    if status == "unbounded":
        return LpSolution("unbounded")
    x = [Fraction(0)] * ncol
    for i, bv in enumerate(basis):
        x[bv] = T[i][-1]
    v = tuple(x[j] - x[n + j] for j in range(n))
    value = dot(p.c, v)
    active = tuple(i for i, (a, bi) in enumerate(zip(P.A, P.b)) if dot(a, v) == bi)
    face = P if all(c == 0 for c in p.c) else P.add(E=[p.c], d=[value])
    return LpSolution("optimal", value, v, active, face)


def is_empty(P: Polyhedron) -> bool:
    return solve_lp(LpProblem((0,) * P.dim, P)).status == "infeasible"


# --------------------------------------------------------------------------
# enumeration


class Vertices(NamedTuple):
    points: list[Vector]
    pointed: bool


class Rays(NamedTuple):
    rays: list[Vector]
    lineality: list[Vector]


def _check_limits(P: Polyhedron, max_dim=MAX_DIM, max_rows=MAX_CONSTRAINTS):
    if P.dim > max_dim:
        raise EnumerationLimitError(f"dimension {P.dim} exceeds the enumeration cap {max_dim}")
    if len(P.A) > max_rows:
        raise EnumerationLimitError(f"{len(P.A)} inequality rows exceed the enumeration cap {max_rows}")


def _affine_param(P: Polyhedron):
    """Write ``{E v = d}`` as ``v0 + N u``; returns (v0, N) or None when inconsistent."""
    if P.E:
        v0 = solve(P.E, P.d, P.dim)
        if v0 is None:
            return None
        N = null_space((P.E, P.dim))
    else:
        v0 = tuple(Fraction(0) for _ in range(P.dim))
        N = [tuple(Fraction(1 if i == j else 0) for j in range(P.dim)) for i in range(P.dim)]
    return v0, N


def _reduce(P: Polyhedron):
    par = _affine_param(P)
    if par is None:
        return None
    v0, N = par
    k = len(N)
    AN = [tuple(dot(a, [N[t][j] for j in range(P.dim)]) for t in range(k)) for a in P.A]
    rhs = [bi - dot(a, v0) for a, bi in zip(P.A, P.b)]
    return v0, N, AN, rhs


def _lift(v0, N, u):
    return tuple(v0[j] + sum((u[t] * N[t][j] for t in range(len(N))), Fraction(0)) for j in range(len(v0)))


def enumerate_vertices(P: Polyhedron) -> Vertices:
    """All extreme points, by brute force over maximal-rank active subsets."""
    _check_limits(P)
    red = _reduce(P)
    if red is None:
        return Vertices([], True)
    v0, N, AN, rhs = red
    k = len(N)
    if k and null_space((AN, k)):
        return Vertices([], False)
    if k == 0:
        ok = all(x >= 0 for x in rhs)
        return Vertices([v0] if ok else [], True)
    found = set()
    for S in combinations(range(len(AN)), k):
        R, piv = rref([list(AN[i]) + [rhs[i]] for i in S], k + 1)
        if len(piv) != k or piv[-1] == k:
            continue
        u = [R[i][k] for i in range(k)]
        if all(dot(AN[i], u) <= rhs[i] for i in range(len(AN))):
            found.add(_lift(v0, N, u))
    return Vertices(sorted(found), True)


def enumerate_extreme_rays(C: Polyhedron) -> Rays:
    """Extreme rays of the pointed part ``C ∩ lin(C)^⊥`` plus a lineality basis."""
    if not C.is_homogeneous():
        raise ValueError("ray enumeration needs a cone (zero right-hand sides)")
    _check_limits(C)
    dim = C.dim
    lineality = null_space((list(C.E) + list(C.A), dim))
    W = null_space((list(C.E) + lineality, dim))
    k = len(W)
    if k == 0:
        return Rays([], lineality)
    AW = [tuple(dot(a, w) for w in W) for a in C.A]
    rays = set()
    for S in combinations(range(len(AW)), k - 1):
        sub = [AW[i] for i in S]
        ns = null_space((sub, k)) if sub else [tuple(Fraction(1 if i == j else 0) for j in range(k)) for i in range(k)]
        if len(ns) != 1:
            continue
        u = ns[0]
        for s in (1, -1):
            us = [s * x for x in u]
            if all(dot(a, us) <= 0 for a in AW):
                r = tuple(sum((us[t] * W[t][j] for t in range(k)), Fraction(0)) for j in range(dim))
                rays.add(normalize_direction(r))
    return Rays(sorted(rays, reverse=True), lineality)


def member(P: Polyhedron, v) -> bool:
    if len(v) != P.dim:
        raise ValueError(f"vector length {len(v)} differs from dim {P.dim}")
    v = _vec(v)
    return all(dot(a, v) <= bi for a, bi in zip(P.A, P.b)) and all(dot(e, v) == di for e, di in zip(P.E, P.d))


def cone_generators(C: Polyhedron) -> list[Vector]:
    r = enumerate_extreme_rays(C)
    return list(r.rays) + list(r.lineality) + [tuple(-x for x in l) for l in r.lineality]


def is_zero_cone(C: Polyhedron) -> bool:
    r = enumerate_extreme_rays(C)
    return not r.rays and not r.lineality


def cone_contains(big: Polyhedron, small: Polyhedron) -> bool:
    return all(member(big, g) for g in cone_generators(small))


def cones_equal(c1: Polyhedron, c2: Polyhedron) -> bool:
    return cone_contains(c1, c2) and cone_contains(c2, c1)


# --------------------------------------------------------------------------
# hulls and projections


def conic_hull(rays: Sequence, lineality: Sequence = (), dim: int | None = None) -> PolyhedralCone:
    """H-representation of ``cone(rays) + span(lineality)`` by facet search over ray subsets."""
    rays = [_vec(r) for r in rays if any(x != 0 for x in r)]
    lin = [_vec(v) for v in lineality if any(x != 0 for x in v)]
    if dim is None:
        if not rays and not lin:
            raise ValueError("dim is required for an empty generator list")
        dim = len((rays + lin)[0])
    if dim > MAX_DIM:
        raise EnumerationLimitError(f"dimension {dim} exceeds the enumeration cap {MAX_DIM}")
    gens = rays + lin
    S = canonical_basis(gens, dim) if gens else []
    E = null_space((S, dim)) if S else [tuple(Fraction(1 if i == j else 0) for j in range(dim)) for i in range(dim)]
    L = canonical_basis(lin, dim) if lin else []
    dimS, dimL = len(S), len(L)
    facets = set()
    if rays and dimS > dimL:
        need = dimS - 1 - dimL
        for T in combinations(range(len(rays)), need):
            sub = [rays[i] for i in T]
            if matrix_rank((L + sub, dim)) != dimS - 1:
                continue
            ns = null_space((list(E) + L + sub, dim))
            if len(ns) != 1:
                continue
            a = ns[0]
            vals = [dot(a, r) for r in rays]
            if all(x <= 0 for x in vals):
                pass
            elif all(x >= 0 for x in vals):
                a = tuple(-x for x in a)
            else:
                continue
            facets.add(normalize_direction(a))
    return PolyhedralCone(dim, sorted(facets, reverse=True), E)


def project_cone(C: Polyhedron, coords: Sequence[int]) -> PolyhedralCone:
    """Image of a cone under the coordinate projection onto ``coords``."""
    r = enumerate_extreme_rays(C)
    pr = [tuple(v[i] for i in coords) for v in r.rays]
    pl = [tuple(v[i] for i in coords) for v in r.lineality]
    return conic_hull(pr, pl, len(coords))


def homogenize(P: Polyhedron) -> PolyhedralCone:
    """``{(v, t) : A v - b t <= 0, E v - d t = 0, t >= 0}``."""
    A = [tuple(a) + (-bi,) for a, bi in zip(P.A, P.b)] + [(Fraction(0),) * P.dim + (Fraction(-1),)]
    E = [tuple(e) + (-di,) for e, di in zip(P.E, P.d)]
    return PolyhedralCone(P.dim + 1, A, E)


# --------------------------------------------------------------------------
# union comparison


class UnionComparison(NamedTuple):
    equal: bool
    witness: Vector | None = None
    # "first" when the witness lies in the first union only, "second" otherwise
    side: str | None = None

    def __bool__(self):
        return self.equal


def _strict_violation_witness(P: Polyhedron, Qs: Sequence[Polyhedron]):
    """A point of cone ``P`` outside every cone in ``Qs``, or ``None``.

    A point leaves ``Q`` iff it strictly violates one of Q's rows, so ``P``
    escapes the union iff some choice of one violated row per piece is
    strictly feasible on ``P``; each choice is an LP.
    """
    dim = P.dim
    choices = []
    for Q in Qs:
        cands = [a for a in Q.A] + [e for e in Q.E] + [tuple(-x for x in e) for e in Q.E]
        useful = []
        for a in cands:
            if _strict_lp(P, [a]) is not None:
                useful.append(a)
        if not useful:
            return None
        choices.append(useful)
    for combo in product(*choices):
        w = _strict_lp(P, combo)
        if w is not None:
            return w
    return None


def _strict_lp(P: Polyhedron, rows):
    """Maximise t with rows·v >= t, v in P, |v_i| <= 1, t <= 1; return v when t > 0."""
    dim = P.dim
    A = [tuple(a) + (Fraction(0),) for a in P.A]
    b = list(P.b)
    for a in rows:
        A.append(tuple(-x for x in a) + (Fraction(1),))
        b.append(Fraction(0))
    for i in range(dim):
        e = [Fraction(0)] * (dim + 1)
        e[i] = Fraction(1)
        A.append(tuple(e))
        b.append(Fraction(1))
        A.append(tuple(-x for x in e))
        b.append(Fraction(1))
    A.append((Fraction(0),) * dim + (Fraction(1),))
    b.append(Fraction(1))
    E = [tuple(e) + (Fraction(0),) for e in P.E]
    lifted = Polyhedron(dim + 1, A, b, E, P.d)
    sol = solve_lp(LpProblem((0,) * dim + (1,), lifted, "max"))
    if sol.status == "optimal" and sol.value > 0:
        return sol.vertex[:dim]
    return None


def _cone_in_union(P: Polyhedron, Qs: Sequence[Polyhedron]):
    gens = cone_generators(P)
    for g in gens:
        if not any(member(Q, g) for Q in Qs):
            return g
    if any(all(member(Q, g) for g in gens) for Q in Qs):
        return None
    return _strict_violation_witness(P, Qs)


def cone_union_equal(u1: ConeUnion, u2: ConeUnion) -> UnionComparison:
    """Exact set equality of two finite unions of polyhedral cones."""
    if u1.dim != u2.dim:
        raise ValueError("dimension mismatch")
    for P in u1.pieces:
        w = _cone_in_union(P, u2.pieces) if u2.pieces else _first_nonzero_generator(P)
        if w is not None:
            return UnionComparison(False, normalize_direction(w), "first")
    for P in u2.pieces:
        w = _cone_in_union(P, u1.pieces) if u1.pieces else _first_nonzero_generator(P)
        if w is not None:
            return UnionComparison(False, normalize_direction(w), "second")
    return UnionComparison(True)


def _first_nonzero_generator(P):
    gens = cone_generators(P)
    # an empty union does not even contain the apex, so report 0 when P = {0}
    return gens[0] if gens else tuple(Fraction(0) for _ in range(P.dim))


def polyhedra_union_equal(list1: Sequence[Polyhedron], list2: Sequence[Polyhedron]) -> UnionComparison:
    """Set equality of unions of (affine) polyhedra via homogenisation."""
    p1 = [homogenize(p) for p in list1 if not is_empty(p)]
    p2 = [homogenize(p) for p in list2 if not is_empty(p)]
    dim = (list1 or list2)[0].dim + 1 if (list1 or list2) else 1
    res = cone_union_equal(ConeUnion(dim, p1), ConeUnion(dim, p2))
    if res.equal or res.witness is None:
        return res
    w = res.witness
    if w[-1] != 0:
        w = tuple(x / w[-1] for x in w[:-1])
    else:
        w = w[:-1]
    return UnionComparison(False, w, res.side)


# --------------------------------------------------------------------------
# distance


def squared_distance_to_cone(v, C: Polyhedron) -> Fraction:
    """Exact squared distance by projecting onto the span of every face."""
    if not C.is_homogeneous():
        raise ValueError("distance computation needs a cone")
    if len(C.A) > MAX_FACE_ROWS:
        raise EnumerationLimitError(f"{len(C.A)} rows exceed the face-enumeration cap {MAX_FACE_ROWS}")
    v = _vec(v)
    if member(C, v):
        return Fraction(0)
    best = None
    seen = set()
    for k in range(len(C.A) + 1):
        for S in combinations(range(len(C.A)), k):
            basis = null_space((list(C.E) + [C.A[i] for i in S], C.dim))
            key = tuple(basis)
            if key in seen:
                continue
            seen.add(key)
            p = project_onto_span(v, basis)
            if member(C, p):
                d2 = sum(((a - b) ** 2 for a, b in zip(v, p)), Fraction(0))
                if best is None or d2 < best:
                    best = d2
    return best


def squared_distance_to_union(v, u: ConeUnion) -> Fraction:
    if not u.pieces:
        raise ValueError("distance to an empty union is undefined")
    return min(squared_distance_to_cone(v, p) for p in u.pieces)
