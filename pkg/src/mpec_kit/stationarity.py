"""Primal stationarity over cone unions, the disjunctive primal-dual systems, and the KKT reformulation."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import NamedTuple, Sequence

from .cones import full_gradients, index_split, require_multiplier, vi_lagrangian, vi_lagrangian_jacobians
from .expr import PolyExpr, evaluate, format_rational, gradient, jacobian
from .instance import MpecInstance, active_sets, as_point
from .linalg import Vector, dot
from .multipliers import multiplier_set
from .polyhedra import (
    ConeUnion,
    LpProblem,
    Polyhedron,
    PolyhedralCone,
    enumerate_extreme_rays,
    solve_lp,
    squared_distance_to_union,
)

MAX_PARTITIONS = 2 ** 20

NCP_SOURCE = "NCP systems: the general primal-dual system specialised to g = -y and lambda = F(z)"


def objective_gradient(inst: MpecInstance, z) -> Vector:
    return tuple(gradient(inst.f, as_point(inst, z).z))


# --------------------------------------------------------------------------
# primal stationarity


class PrimalVerdict(NamedTuple):
    stationary: bool
    counterexample: Vector | None = None


def primal_stationarity(inst: MpecInstance, z, cone: ConeUnion) -> PrimalVerdict:
    """``∇f(z)ᵀdz >= 0`` on every generator of every piece."""
    gf = objective_gradient(inst, z)
    for piece in cone.pieces:
        r = enumerate_extreme_rays(piece)
        for ray in r.rays:
            if dot(gf, ray) < 0:
                return PrimalVerdict(False, ray)
        for v in r.lineality:
            s = dot(gf, v)
            if s != 0:
                return PrimalVerdict(False, v if s < 0 else tuple(-x for x in v))
    return PrimalVerdict(True)


def distance_condition_check(inst: MpecInstance, z, cone: ConeUnion, dz, alpha) -> bool:
    """``∇fᵀdz + α·dist(dz, cone) >= 0`` decided on squares, never taking a root."""
    alpha = Fraction(alpha)
    gf = objective_gradient(inst, z)
    if alpha < 0 or alpha * alpha < dot(gf, gf):
        raise ValueError("alpha must satisfy alpha >= ||grad f(z)||")
    s = dot(gf, dz)
    if s >= 0:
        return True
    # s < 0: need alpha*dist >= -s > 0
    return alpha * alpha * squared_distance_to_union(dz, cone) >= s * s


# --------------------------------------------------------------------------
# primal-dual systems


@dataclass(frozen=True)
class IndexPartition:
    lam: Vector
    alpha: tuple[int, ...]
    alpha_bar: tuple[int, ...]
    i_plus: tuple[int, ...]


@dataclass(frozen=True)
class StationarityCertificate:
    partition: IndexPartition
    zeta: Vector
    eta: Vector
    pi: Vector


@dataclass(frozen=True)
class PdSystem:
    """Linear system in the stacked unknowns (ζ, η, π)."""

    s: int
    l: int
    m: int
    eq_rows: tuple[tuple[Vector, Fraction], ...]
    le_rows: tuple[tuple[Vector, Fraction], ...]

    @property
    def nvars(self) -> int:
        return self.s + self.l + self.m

    def names(self) -> list[str]:
        return (
            [f"zeta{j + 1}" for j in range(self.s)]
            + [f"eta{i + 1}" for i in range(self.l)]
            + [f"pi{k + 1}" for k in range(self.m)]
        )

    def describe(self) -> list[str]:
        """Human-readable rows such as ``1 - pi1 = 0``."""
        names = self.names()
        out = []
        for rows, op in ((self.eq_rows, "="), (self.le_rows, "<=")):
            for coef, const in rows:
                out.append(f"{_render_affine(coef, const, names)} {op} 0")
        return out

    def polyhedron(self) -> Polyhedron:
        # rows mean coef·v + const (op) 0
        return Polyhedron(
            self.nvars,
            [c for c, _ in self.le_rows],
            [-k for _, k in self.le_rows],
            [c for c, _ in self.eq_rows],
            [-k for _, k in self.eq_rows],
        )

    def satisfied_by(self, v) -> bool:
        return all(dot(c, v) + k == 0 for c, k in self.eq_rows) and all(dot(c, v) + k <= 0 for c, k in self.le_rows)


def _render_affine(coef, const, names) -> str:
    parts = []
    if const != 0:
        parts.append(format_rational(const))
    for c, nm in zip(coef, names):
        if c == 0:
            continue
        mag = abs(c)
        body = nm if mag == 1 else f"{format_rational(mag)}*{nm}"
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(("+ " if c > 0 else "- ") + body)
    return " ".join(parts) if parts else "0"


def make_partition(inst: MpecInstance, z, lam, alpha) -> IndexPartition:
    lam = require_multiplier(inst, z, lam)
    I0, Ip = index_split(inst, z, lam)
    alpha = tuple(sorted(alpha))
    if not set(alpha) <= set(I0):
        raise ValueError("alpha must be a subset of I_0(z, lambda)")
    return IndexPartition(lam, alpha, tuple(i for i in I0 if i not in alpha), Ip)


def assemble_pd_system(inst: MpecInstance, z, partition: IndexPartition) -> PdSystem:
    p = as_point(inst, z)
    zz = p.z
    n, m, l = inst.n, inst.m, inst.l
    zrows = inst.z_rows()
    s = len(zrows)
    nv = s + l + m
    gf = objective_gradient(inst, p)
    Jg = full_gradients(inst, p)
    Lx, Ly = vi_lagrangian_jacobians(inst, p, partition.lam)
    act = set(active_sets(inst, p, ncp=False).active)

    def unit(k, scale=Fraction(1)):
        v = [Fraction(0)] * nv
        v[k] = scale
        return tuple(v)

    eq, le = [], []
    # stationarity in x then y: ∇f + [G H]ᵀζ + ∇gᵀη - [Lx Ly]ᵀπ = 0
    for j in range(n + m):
        row = [Fraction(0)] * nv
        for t, (zr, _) in enumerate(zrows):
            row[t] = zr[j]
        for i in range(l):
            row[s + i] = Jg.row(i)[j]
        for k in range(m):
            row[s + l + k] = -(Lx.row(k)[j] if j < n else Ly.row(k)[j - n])
        eq.append((tuple(row), gf[j]))
    for i in partition.alpha:
        row = [Fraction(0)] * nv
        for k in range(m):
            row[s + l + k] = Jg.row(i)[n + k]
        le.append((tuple(row), Fraction(0)))
    for i in partition.i_plus:
        row = [Fraction(0)] * nv
        for k in range(m):
            row[s + l + k] = Jg.row(i)[n + k]
        eq.append((tuple(row), Fraction(0)))
    for i in partition.alpha_bar:
        le.append((unit(s + i, Fraction(-1)), Fraction(0)))
    for i in range(l):
        if i not in act:
            eq.append((unit(s + i), Fraction(0)))
    for t, (zr, c) in enumerate(zrows):
        if dot(zr, zz) + c == 0:
            le.append((unit(t, Fraction(-1)), Fraction(0)))
        else:
            eq.append((unit(t), Fraction(0)))
    return PdSystem(s, l, m, tuple(eq), tuple(le))


def _min_l1_solution(system: PdSystem):
    """Feasible point of minimal l1 norm (deterministic certificate), or None."""
    P = system.polyhedron()
    k = P.dim
    zero = (Fraction(0),) * k
    A = [tuple(a) + zero for a in P.A]
    b = list(P.b)
    for j in range(k):
        e = [Fraction(0)] * (2 * k)
        e[j], e[k + j] = Fraction(1), Fraction(-1)
        A.append(tuple(e))
        e = [Fraction(0)] * (2 * k)
        e[j], e[k + j] = Fraction(-1), Fraction(-1)
        A.append(tuple(e))
        b += [Fraction(0), Fraction(0)]
    E = [tuple(e) + zero for e in P.E]
    lifted = Polyhedron(2 * k, A, b, E, P.d)
    sol = solve_lp(LpProblem((0,) * k + (1,) * k, lifted, "min"))
    if sol.status != "optimal":
        return None
    return sol.vertex[:k]


def solve_pd_system(inst: MpecInstance, z, partition: IndexPartition) -> StationarityCertificate | None:
    system = assemble_pd_system(inst, z, partition)
    v = _min_l1_solution(system)
    if v is None:
        return None
    assert system.satisfied_by(v)
    s, l = system.s, system.l
    return StationarityCertificate(partition, v[:s], v[s: s + l], v[s + l:])


def all_partitions(inst: MpecInstance, z, lam) -> list[IndexPartition]:
    lam = require_multiplier(inst, z, lam)
    I0, _ = index_split(inst, z, lam)
    subsets = sorted(S for k in range(len(I0) + 1) for S in combinations(I0, k))
    return [make_partition(inst, z, lam, S) for S in subsets]


@dataclass
class PdReport:
    verdict: str  # stationary | not stationary | not applicable
    systems: list[tuple[IndexPartition, StationarityCertificate | None]] = field(default_factory=list)
    hypothesis: str = ""

    @property
    def stationary(self) -> bool:
        return self.verdict == "stationary"


def full_pd_stationarity(inst: MpecInstance, z, multipliers: Sequence | None = None, hypothesis: str = "") -> PdReport:
    """Solve every (λ, α) system; stationary iff all are feasible.

    With ``multipliers=None`` the extreme points of M(z) are used, which is
    exact under CRCQ plus the extreme CQ.
    """
    if multipliers is None:
        ma = multiplier_set(inst, z)
        multipliers = list(ma.extreme_points)
        hypothesis = hypothesis or "lambda ranges over M^e(z); exact under CRCQ and the extreme CQ"
    if not multipliers:
        return PdReport("not applicable", [], "no KKT multiplier: M(z) is empty")
    total = 0
    for lam in multipliers:
        I0, _ = index_split(inst, z, require_multiplier(inst, z, lam))
        total += 2 ** len(I0)
    if total > MAX_PARTITIONS:
        raise ValueError(f"{total} partition systems exceed the cap {MAX_PARTITIONS}")
    systems = []
    for lam in multipliers:
        for part in all_partitions(inst, z, lam):
            systems.append((part, solve_pd_system(inst, z, part)))
    ok = all(c is not None for _, c in systems)
    return PdReport("stationary" if ok else "not stationary", systems, hypothesis)


def ncp_index_systems(inst: MpecInstance, z, beta_subset) -> tuple[PdSystem, StationarityCertificate | None]:
    """The NCP system for ``beta_1 = beta_subset``: alpha = beta_1, alpha_bar = beta minus beta_1."""
    if not inst.ncp_form:
        raise ValueError("NCP index systems need an instance with g = -y")
    sets = active_sets(inst, z, ncp=True)
    beta_subset = tuple(sorted(beta_subset))
    if not set(beta_subset) <= set(sets.beta):
        raise ValueError(f"subset {[i + 1 for i in beta_subset]} is not within beta = {[i + 1 for i in sets.beta]}")
    zz = as_point(inst, z).z
    lam = tuple(f.evaluate(zz) for f in inst.F)
    part = make_partition(inst, z, lam, beta_subset)
    system = assemble_pd_system(inst, z, part)
    return system, solve_pd_system(inst, z, part)


# --------------------------------------------------------------------------
# KKT reformulation


@dataclass(frozen=True)
class KktNlpInstance:
    """NLP in (x, y, λ); λ_i is stored as variable y_{m+i} of arity (n, m+l)."""

    n: int
    m: int
    l: int
    f: PolyExpr
    equalities: tuple[PolyExpr, ...]
    inequalities: tuple[PolyExpr, ...]
    eq_labels: tuple[str, ...]
    ineq_labels: tuple[str, ...]
    # index of the λᵀg equality within ``equalities``, or None when it vanishes
    complementarity_index: int | None = None

    @property
    def arity(self) -> tuple[int, int]:
        return (self.n, self.m + self.l)

    @property
    def dim(self) -> int:
        return self.n + self.m + self.l

    def variable_names(self) -> list[str]:
        return (
            [f"x{i + 1}" for i in range(self.n)]
            + [f"y{i + 1}" for i in range(self.m)]
            + [f"lambda{i + 1}" for i in range(self.l)]
        )

    def to_json(self) -> dict:
        from .expr import format_poly

        return {
            "kind": "kkt-nlp",
            "n": self.n,
            "m": self.m,
            "l": self.l,
            "variables": self.variable_names(),
            "variable_map": {f"lambda{i + 1}": f"y{self.m + i + 1}" for i in range(self.l)},
            "f": format_poly(self.f),
            "equalities": [{"label": a, "expr": format_poly(p)} for a, p in zip(self.eq_labels, self.equalities)],
            "inequalities": [{"label": a, "expr": format_poly(p)} for a, p in zip(self.ineq_labels, self.inequalities)],
        }


def kkt_reformulate(inst: MpecInstance) -> KktNlpInstance:
    n, m, l = inst.n, inst.m, inst.l
    ar = (n, m + l)
    pos = list(range(n + m))
    lam_vars = [PolyExpr.variable(n + m + i, ar) for i in range(l)]

    def lift(p):
        return p.embed(ar, pos)

    eqs, eql = [], []
    for k in range(m):
        Lk = lift(inst.F[k])
        for i in range(l):
            dg = lift(inst.g[i].differentiate(n + k))
            if not dg.is_zero():
                Lk = Lk + lam_vars[i] * dg
        eqs.append(Lk)
        eql.append(f"L{k + 1} = 0")
    comp = PolyExpr.zero(ar)
    for i in range(l):
        comp = comp + lam_vars[i] * lift(inst.g[i])
    cidx = None
    if not comp.is_zero():
        cidx = len(eqs)
        eqs.append(comp)
        eql.append("lambda^T g = 0")
    ins, inl = [], []
    for i in range(l):
        ins.append(lift(inst.g[i]))
        inl.append(f"g{i + 1} <= 0")
    for i in range(l):
        ins.append(-lam_vars[i])
        inl.append(f"lambda{i + 1} >= 0")
    for j, zp in enumerate(inst.z_polys()):
        ins.append(lift(zp))
        inl.append(f"Z row {j + 1}")
    return KktNlpInstance(n, m, l, lift(inst.f), tuple(eqs), tuple(ins), tuple(eql), tuple(inl), cidx)


def nlp_linearized_cone(nlp: KktNlpInstance, point) -> PolyhedralCone:
    """``{d : ∇h·d = 0, ∇g_i·d <= 0 for active i}`` at an exactly feasible point."""
    pt = tuple(Fraction(v) for v in point)
    if len(pt) != nlp.dim:
        raise ValueError(f"point must have length {nlp.dim}")
    for lab, h in zip(nlp.eq_labels, nlp.equalities):
        if evaluate(h, pt) != 0:
            raise ValueError(f"point is infeasible: {lab} evaluates to {format_rational(evaluate(h, pt))}")
    for lab, g in zip(nlp.ineq_labels, nlp.inequalities):
        if evaluate(g, pt) > 0:
            raise ValueError(f"point is infeasible: {lab} is violated")
    E = [tuple(gradient(h, pt)) for h in nlp.equalities]
    A = [tuple(gradient(g, pt)) for g in nlp.inequalities if evaluate(g, pt) == 0]
    E = [r for r in E if any(r)]
    A = [r for r in A if any(r)]
    return PolyhedralCone(nlp.dim, A, E)


def nlp_point(inst: MpecInstance, z, lam) -> Vector:
    return as_point(inst, z).z + tuple(Fraction(v) for v in lam)
