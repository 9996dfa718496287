"""Tangent cones of complementarity feasible sets by branch enumeration.

Each branch is a basic semialgebraic set ``{e = 0, q <= 0}``.  Its tangent
cone at a point is computed locally: variables that an equality determines
explicitly are eliminated, then the lowest-order forms of what remains are
classified.  A branch cone is *certified* only when that local picture
provably equals the true tangent cone; otherwise it is an outer
approximation and the result is labelled heuristic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import NamedTuple, Sequence

from .cones import candidate_multipliers, linearized_cone, prune_pieces
from .expr import PolyExpr, evaluate
from .instance import MpecInstance, as_point
from .linalg import Vector, dot, matrix_rank, row_space_contains
from .polyhedra import (
    ConeUnion,
    LpProblem,
    Polyhedron,
    PolyhedralCone,
    UnionComparison,
    cone_generators,
    cone_union_equal,
    conic_hull,
    enumerate_extreme_rays,
    is_zero_cone,
    project_cone,
    solve_lp,
)
from .stationarity import KktNlpInstance, kkt_reformulate, nlp_linearized_cone, nlp_point

CERTIFIED = "certified"
HEURISTIC = "heuristic"
DEFAULT_RADII = (1e-1, 1e-2, 1e-3, 1e-4)


class UnsupportedStructure(ValueError):
    """The feasible set is outside the branch-enumerable class."""


@dataclass(frozen=True)
class BranchSystem:
    equalities: tuple[PolyExpr, ...]
    inequalities: tuple[PolyExpr, ...]
    label: str
    arity: tuple[int, int]

    def feasible_at(self, z) -> bool:
        return all(evaluate(e, z) == 0 for e in self.equalities) and all(
            evaluate(q, z) <= 0 for q in self.inequalities
        )


def _fmt_set(idx) -> str:
    return "{" + ",".join(str(i + 1) for i in idx) + "}"


def _ncp_branches(inst: MpecInstance) -> list[BranchSystem]:
    n, m = inst.n, inst.m
    ys = [PolyExpr.variable(n + i, inst.arity) for i in range(m)]
    zp = inst.z_polys()
    out = []
    for k in range(m, -1, -1):
        for S in combinations(range(m), k):
            rest = [i for i in range(m) if i not in S]
            eqs = [ys[i] for i in S] + [inst.F[i] for i in rest]
            ins = [-ys[i] for i in rest] + [-inst.F[i] for i in S] + zp
            label = f"y=0 on {_fmt_set(S)}, F=0 on {_fmt_set(rest)}"
            out.append(BranchSystem(tuple(eqs), tuple(ins), label, inst.arity))
    return out


def _kkt_branches(nlp: KktNlpInstance) -> list[BranchSystem]:
    l, m = nlp.l, nlp.m
    Ls = [e for j, e in enumerate(nlp.equalities) if j != nlp.complementarity_index]
    gs = nlp.inequalities[:l]
    lams = [-q for q in nlp.inequalities[l: 2 * l]]
    zp = list(nlp.inequalities[2 * l:])
    out = []
    for k in range(l, -1, -1):
        for S in combinations(range(l), k):
            rest = [i for i in range(l) if i not in S]
            eqs = list(Ls) + [gs[i] for i in S] + [lams[i] for i in rest]
            ins = [gs[i] for i in rest] + [-lams[i] for i in S] + zp
            label = f"g=0 on {_fmt_set(S)}, lambda=0 on {_fmt_set(rest)}"
            out.append(BranchSystem(tuple(eqs), tuple(ins), label, nlp.arity))
    return out


def _point_of(obj, z):
    if isinstance(obj, MpecInstance):
        return as_point(obj, z).z
    pt = tuple(Fraction(v) for v in z)
    if len(pt) != obj.dim:
        raise ValueError(f"point must have length {obj.dim}")
    return pt


def enumerate_branches(obj, z) -> list[BranchSystem]:
    """Branches of the complementarity structure that contain ``z``."""
    if isinstance(obj, KktNlpInstance):
        allb = _kkt_branches(obj)
    elif isinstance(obj, MpecInstance):
        if obj.ncp_form:
            allb = _ncp_branches(obj)
        elif obj.l == 0:
            allb = [BranchSystem(tuple(obj.F), tuple(obj.z_polys()), "F=0", obj.arity)]
        else:
            raise UnsupportedStructure(
                "exact tangent cones need an NCP instance (g = -y), an instance without "
                "lower-level constraints, or a KKT reformulation"
            )
    else:
        raise TypeError("expected an MpecInstance or a KktNlpInstance")
    pt = _point_of(obj, z)
    return [b for b in allb if b.feasible_at(pt)]


# --------------------------------------------------------------------------
# local analysis of one branch


@dataclass
class BranchCone:
    cone: PolyhedralCone
    certified: bool
    notes: list[str] = field(default_factory=list)


def _power_of_linear(h: PolyExpr):
    """Write a homogeneous ``h`` as ``c (a·u)^r`` with a_j = 1 at its first pure power; else None."""
    r = h.degree()
    nv = h.nvars
    for j in range(nv):
        mono = tuple(r if t == j else 0 for t in range(nv))
        c = h.terms.get(mono)
        if c is None:
            continue
        a = []
        for k in range(nv):
            if k == j:
                a.append(Fraction(1))
                continue
            mk = [0] * nv
            mk[j] = r - 1
            mk[k] += 1
            a.append(h.terms.get(tuple(mk), Fraction(0)) / (c * r))
        lin = PolyExpr.linear(a, 0, h.arity)
        if (lin ** r) * c == h:
            return c, tuple(a), r
        return None
    return None


def _quadratic_definiteness(h: PolyExpr, free: Sequence[int]) -> int:
    """+1 positive definite, -1 negative definite, 0 otherwise, over the ``free`` variables."""
    if h.degree() != 2 or any(sum(mn) != 2 for mn in h.terms):
        return 0
    if any(mn[v] for mn in h.terms for v in range(h.nvars) if v not in free):
        return 0
    k = len(free)
    Q = [[Fraction(0)] * k for _ in range(k)]
    for a, va in enumerate(free):
        for b, vb in enumerate(free):
            mono = [0] * h.nvars
            mono[va] += 1
            mono[vb] += 1
            c = h.terms.get(tuple(mono), Fraction(0))
            Q[a][b] = c if a == b else c / 2
    for sign in (1, -1):
        ok = True
        for t in range(1, k + 1):
            sub = [[sign * Q[i][j] for j in range(t)] for i in range(t)]
            if _det(sub) <= 0:
                ok = False
                break
        if ok and k:
            return sign
    return 0


def _det(M) -> Fraction:
    M = [list(r) for r in M]
    k = len(M)
    det = Fraction(1)
    for c in range(k):
        p = next((i for i in range(c, k) if M[i][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            M[c], M[p] = M[p], M[c]
            det = -det
        det *= M[c][c]
        for i in range(c + 1, k):
            f = M[i][c] / M[c][c]
            if f:
                M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return det


def _eliminable(p: PolyExpr, done: set[int]):
    """A variable that ``p`` contains only as a degree-one monomial, with its coefficient."""
    for v in sorted(p.variables()):
        if v in done:
            continue
        hits = [(mn, c) for mn, c in p.terms.items() if mn[v]]
        if len(hits) == 1:
            mn, c = hits[0]
            if sum(mn) == 1:
                return v, c
    return None


def _strict_direction_exists(eq_rows, le_rows, nv) -> bool:
    if not le_rows:
        return True
    A = [tuple(r) + (Fraction(1),) for r in le_rows] + [(Fraction(0),) * nv + (Fraction(1),)]
    b = [Fraction(0)] * len(le_rows) + [Fraction(1)]
    E = [tuple(r) + (Fraction(0),) for r in eq_rows]
    sol = solve_lp(LpProblem((0,) * nv + (1,), Polyhedron(nv + 1, A, b, E, (0,) * len(E)), "max"))
    return sol.status == "optimal" and sol.value > 0


def branch_tangent_cone(branch: BranchSystem, z) -> BranchCone:
    pt = tuple(Fraction(v) for v in z)
    if not branch.feasible_at(pt):
        raise ValueError(f"point is not feasible for branch {branch.label}")
    ar = branch.arity
    nv = ar[0] + ar[1]
    eqs = [e.shift(pt) for e in branch.equalities]
    ins = [q.shift(pt) for q in branch.inequalities if evaluate(q, pt) == 0]
    eqs = [e for e in eqs if not e.is_zero()]
    notes: list[str] = []

    # eliminate variables that an equality determines explicitly
    subs: dict[int, PolyExpr] = {}
    while True:
        pick = None
        for j, e in enumerate(eqs):
            hit = _eliminable(e, set(subs))
            if hit is not None:
                pick = (j, hit)
                break
        if pick is None:
            break
        j, (v, c) = pick
        e = eqs.pop(j)
        expr = (e - PolyExpr.variable(v, ar) * c) * (Fraction(-1) / c)
        mapping = {v: expr}
        subs = {w: s.substitute(mapping) for w, s in subs.items()}
        subs[v] = expr
        eqs = [x for x in (p.substitute(mapping) for p in eqs) if not x.is_zero()]
        ins = [x for x in (p.substitute(mapping) for p in ins) if not x.is_zero()]
    free = [v for v in range(nv) if v not in subs]

    eq_rows, le_rows, even_drops = [], [], []
    certified = True
    zero_cone = False
    for e in eqs:
        h = e.initial_form()
        r = h.degree()
        if r == 1:
            eq_rows.append(tuple(e.linear_part()))
            continue
        if r == 2 and _quadratic_definiteness(h, free) != 0:
            zero_cone = True
            notes.append("definite quadratic equality isolates the point")
            continue
        pl = _power_of_linear(h)
        if pl is not None:
            eq_rows.append(pl[1])
        certified = False
        notes.append(f"equality with singular lowest-order form {h}")
    for q in ins:
        h = q.initial_form()
        r = h.degree()
        if r == 1:
            le_rows.append(tuple(q.linear_part()))
            continue
        pl = _power_of_linear(h)
        if pl is not None:
            c, a, r = pl
            if r % 2 == 1:
                le_rows.append(a if c > 0 else tuple(-x for x in a))
            elif c < 0:
                even_drops.append(a)
            else:
                eq_rows.append(a)
                certified = False
                notes.append(f"inequality {h} <= 0 forces a hyperplane; curvature not analysed")
            continue
        if r == 2:
            sgn = _quadratic_definiteness(h, free)
            if sgn > 0:
                zero_cone = True
                notes.append("positive definite quadratic inequality isolates the point")
                continue
            if sgn < 0:
                continue
        certified = False
        notes.append(f"inequality with lowest-order form {h} not analysed")

    if zero_cone:
        local = PolyhedralCone(nv, (), [tuple(Fraction(1 if i == j else 0) for j in range(nv)) for i in range(nv)])
        certified = True
    else:
        local = PolyhedralCone(nv, le_rows, eq_rows)
        if certified:
            if matrix_rank((eq_rows, nv)) != len(eq_rows):
                certified = False
                notes.append("dependent equality gradients")
            elif not _strict_direction_exists(eq_rows, le_rows, nv):
                certified = False
                notes.append("no strictly feasible direction")
            elif any(row_space_contains(eq_rows, nv, a) for a in even_drops):
                certified = False
                notes.append("even-order inequality degenerate on the equality subspace")
    # restore eliminated coordinates: d_v = ∇ψ_v(0)·d
    E = list(local.E)
    for v, s in sorted(subs.items()):
        row = [-x for x in s.linear_part()]
        row[v] += 1
        E.append(tuple(row))
    cone = PolyhedralCone(nv, _dedupe(local.A), _dedupe(E))
    if not certified and is_zero_cone(cone):
        certified = True
        notes.append("outer approximation is {0}")
    return BranchCone(cone, certified, notes)


def _dedupe(rows):
    out = []
    for r in rows:
        if any(r) and r not in out:
            out.append(r)
    return out


# --------------------------------------------------------------------------
# tangent cones of whole feasible sets


@dataclass
class TangentResult:
    cone: ConeUnion
    status: str
    branches: list[tuple[BranchSystem, BranchCone]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED


def union_of(dim: int, cones: Sequence[PolyhedralCone]) -> ConeUnion:
    """Union with {0} pieces and pieces inside other pieces removed."""
    nz = [c for c in cones if not is_zero_cone(c)]
    if not nz:
        zero = [tuple(Fraction(1 if i == j else 0) for j in range(dim)) for i in range(dim)]
        return ConeUnion(dim, [PolyhedralCone(dim, (), zero)] if cones else [])
    return ConeUnion(dim, prune_pieces(nz))


def tangent_cone(obj, z) -> TangentResult:
    """Exact tangent cone by branch enumeration, or a labelled heuristic outer estimate."""
    if isinstance(obj, MpecInstance) and not obj.ncp_form and obj.l > 0:
        return _tangent_via_kkt(obj, z)
    pt = _point_of(obj, z)
    branches = enumerate_branches(obj, pt)
    results = [(b, branch_tangent_cone(b, pt)) for b in branches]
    dim = len(pt)
    u = union_of(dim, [r.cone for _, r in results])
    ok = all(r.certified for _, r in results)
    return TangentResult(u, CERTIFIED if ok else HEURISTIC, results)


def _tangent_via_kkt(inst: MpecInstance, z) -> TangentResult:
    nlp = kkt_reformulate(inst)
    lams, _ = candidate_multipliers(inst, z)
    pieces, results = [], []
    for lam in lams:
        pt = nlp_point(inst, z, lam)
        for b in enumerate_branches(nlp, pt):
            bc = branch_tangent_cone(b, pt)
            results.append((b, bc))
            pieces.append(project_cone(bc.cone, list(range(inst.dim))))
    u = union_of(inst.dim, pieces)
    note = (
        "general VI constraint: projected KKT branch cones over M^e(z); "
        "not certified, validate by sampling"
    )
    return TangentResult(u, HEURISTIC, results, [note])


def convex_hull_union(u: ConeUnion) -> PolyhedralCone:
    rays, lin = [], []
    for p in u.pieces:
        r = enumerate_extreme_rays(p)
        rays += r.rays
        lin += r.lineality
    return conic_hull(rays, lin, u.dim)


# --------------------------------------------------------------------------
# constraint qualifications comparing T and L


@dataclass
class CqVerdict:
    verdict: str  # holds | fails | inconclusive
    witness: Vector | None
    side: str | None
    tangent: TangentResult
    linearized: ConeUnion
    multipliers: list[Vector]
    semantics: str

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"


def _compare(T: TangentResult, L: ConeUnion) -> tuple[str, UnionComparison | None]:
    if not T.certified:
        return "inconclusive", None
    res = cone_union_equal(T.cone, L)
    return ("holds" if res.equal else "fails"), res


def check_full_cq(inst: MpecInstance, z, multipliers: Sequence | None = None, semantics: str | None = None) -> CqVerdict:
    """Compare T(z; F) with the MPEC linearized cone over the given multipliers (default M^e)."""
    if multipliers is None:
        multipliers, _ = candidate_multipliers(inst, z)
        semantics = semantics or "extreme CQ (multipliers = M^e(z))"
    multipliers = [tuple(Fraction(v) for v in lam) for lam in multipliers]
    semantics = semantics or "basic CQ over the supplied multiplier list"
    T = tangent_cone(inst, z)
    L = linearized_cone(inst, z, multipliers)
    verdict, res = _compare(T, L)
    w = res.witness if res is not None else None
    side = res.side if res is not None else None
    return CqVerdict(verdict, w, side, T, L, multipliers, semantics)


def check_nlp_basic_cq(nlp: KktNlpInstance, point) -> CqVerdict:
    """Standard NLP check: tangent cone of the reformulation against its linearized cone."""
    T = tangent_cone(nlp, point)
    L = ConeUnion(nlp.dim, [nlp_linearized_cone(nlp, point)])
    verdict, res = _compare(T, L)
    w = res.witness if res is not None else None
    side = res.side if res is not None else None
    return CqVerdict(verdict, w, side, T, L, [], "NLP basic CQ: T equals the NLP linearized cone")


# --------------------------------------------------------------------------
# floating-point sampling oracle


@dataclass
class SampleResult:
    directions: list  # unit numpy vectors from the smallest radius that produced samples
    clusters: list  # representative unit vectors
    points: list  # accepted feasible points (numpy), all radii
    failures: int


def _project_to_branch(fs, x0, iters=60):
    import numpy as np

    eqs, jac = fs
    x = np.array(x0, dtype=float)
    for _ in range(iters):
        h = np.array([e(x) for e in eqs])
        if np.max(np.abs(h), initial=0.0) < 1e-14:
            return x
        J = np.array([[dj(x) for dj in row] for row in jac])
        step, *_ = np.linalg.lstsq(J, h, rcond=None)
        x = x - step
    h = np.array([e(x) for e in eqs])
    return x if np.max(np.abs(h), initial=0.0) < 1e-11 else None


def _float_system(branch: BranchSystem):
    nv = branch.arity[0] + branch.arity[1]
    eqs = [e.to_float_function() for e in branch.equalities]
    jac = [[e.differentiate(v).to_float_function() for v in range(nv)] for e in branch.equalities]
    ins = [q.to_float_function() for q in branch.inequalities]
    return (eqs, jac), ins


def cluster_directions(dirs, tol=1e-3) -> list:
    import numpy as np

    reps = []
    for d in dirs:
        if not any(np.linalg.norm(d - r) < tol for r in reps):
            reps.append(d)
    return reps


def sample_tangent_directions(obj, z, count: int = 200, radius_schedule=DEFAULT_RADII, seed: int = 0,
                              tol: float = 1e-3) -> SampleResult:
    """Feasible points near ``z`` at each radius, projected onto branch equalities, as unit directions."""
    import numpy as np

    rng = np.random.default_rng(seed)
    pt = _point_of(obj, z)
    zf = np.array([float(v) for v in pt])
    nv = len(pt)
    systems = [_float_system(b) for b in enumerate_branches(obj, pt)]
    failures = 0
    points, last = [], []
    for r in sorted(radius_schedule, reverse=True):
        batch = []
        for fs, ins in systems:
            for _ in range(count):
                w = rng.normal(size=nv)
                w /= np.linalg.norm(w)
                p = _project_to_branch(fs, zf + r * w)
                if p is None:
                    failures += 1
                    continue
                dist = np.linalg.norm(p - zf)
                if dist < r / 10 or dist > 10 * r:
                    continue
                if any(q(p) > 1e-12 for q in ins):
                    continue
                batch.append(p)
        points += batch
        if batch:
            last = [(p - zf) / np.linalg.norm(p - zf) for p in batch]
    clusters = cluster_directions(last, tol)
    return SampleResult(last, clusters, points, failures)


def ray_matches_clusters(rays, clusters, tol=1e-3) -> tuple[bool, bool]:
    """(every ray near some cluster, every cluster near some ray), angles within ``tol``."""
    import numpy as np

    units = [np.array([float(x) for x in r]) for r in rays]
    units = [u / np.linalg.norm(u) for u in units]

    def close(a, b):
        return np.arccos(np.clip(np.dot(a, b), -1.0, 1.0)) <= tol

    return (
        all(any(close(u, c) for c in clusters) for u in units),
        all(any(close(u, c) for u in units) for c in clusters),
    )
