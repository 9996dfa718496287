"""MPEC problem data, JSON (de)serialisation, active sets and feasibility."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .expr import ExprError, PolyExpr, evaluate, format_poly, format_rational, parse_expr, to_rational
from .polyhedra import Polyhedron

KNOWN_CQS = ("SBCQ", "CRCQ")


class SchemaError(ValueError):
    """Instance document does not match the expected schema."""


@dataclass(frozen=True)
class MpecInstance:
    n: int
    m: int
    l: int
    f: PolyExpr
    F: tuple[PolyExpr, ...]
    g: tuple[PolyExpr, ...]
    # rows of G x + H y + a <= 0, kept as (G, H, a); None means Z is the whole space
    Z: tuple | None = None
    asserted_cqs: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "F", tuple(self.F))
        object.__setattr__(self, "g", tuple(self.g))
        object.__setattr__(self, "asserted_cqs", frozenset(self.asserted_cqs))
        ar = (self.n, self.m)
        for name, p in [("f", self.f)] + [("F", p) for p in self.F] + [("g", p) for p in self.g]:
            if p.arity != ar:
                raise SchemaError(f"{name} has arity {p.arity}, expected {ar}")
        if len(self.F) != self.m:
            raise SchemaError(f"F has {len(self.F)} components, expected m={self.m}")
        if len(self.g) != self.l:
            raise SchemaError(f"g has {len(self.g)} components, expected l={self.l}")
        if self.Z is not None:
            G, H, a = self.Z
            G = tuple(tuple(to_rational(v) for v in r) for r in G)
            H = tuple(tuple(to_rational(v) for v in r) for r in H)
            a = tuple(to_rational(v) for v in a)
            if not (len(G) == len(H) == len(a)):
                raise SchemaError("Z: G, H and a must have the same number of rows")
            if any(len(r) != self.n for r in G) or any(len(r) != self.m for r in H):
                raise SchemaError("Z dimension mismatch: G must be s x n and H s x m")
            object.__setattr__(self, "Z", (G, H, a))
        bad = set(self.asserted_cqs) - set(KNOWN_CQS)
        if bad:
            raise SchemaError(f"unknown asserted CQs {sorted(bad)}; allowed {KNOWN_CQS}")

    @property
    def arity(self) -> tuple[int, int]:
        return (self.n, self.m)

    @property
    def dim(self) -> int:
        return self.n + self.m

    @property
    def ncp_form(self) -> bool:
        """True when ``g = -y`` exactly (so l = m)."""
        if self.l != self.m:
            return False
        return all(self.g[i] == -PolyExpr.variable(self.n + i, self.arity) for i in range(self.m))

    @property
    def s(self) -> int:
        return 0 if self.Z is None else len(self.Z[2])

    def z_rows(self) -> list[tuple[tuple[Fraction, ...], Fraction]]:
        """Rows of Z as (coefficients over (x, y), constant) meaning coef·z + const <= 0."""
        if self.Z is None:
            return []
        G, H, a = self.Z
        return [(tuple(G[j]) + tuple(H[j]), a[j]) for j in range(len(a))]

    def z_polyhedron(self) -> Polyhedron:
        rows = self.z_rows()
        return Polyhedron(self.dim, [r for r, _ in rows], [-c for _, c in rows])

    def z_polys(self) -> list[PolyExpr]:
        return [PolyExpr.linear(r, c, self.arity) for r, c in self.z_rows()]

    def digest(self) -> str:
        return hashlib.sha256(dump_instance(self).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EvalPoint:
    x: tuple[Fraction, ...]
    y: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(to_rational(v) for v in self.x))
        object.__setattr__(self, "y", tuple(to_rational(v) for v in self.y))

    @property
    def z(self) -> tuple[Fraction, ...]:
        return self.x + self.y

    @classmethod
    def from_z(cls, z: Sequence, n: int) -> EvalPoint:
        z = list(z)
        return cls(z[:n], z[n:])


def as_point(inst: MpecInstance, z) -> EvalPoint:
    if isinstance(z, EvalPoint):
        p = z
    else:
        p = EvalPoint.from_z(z, inst.n)
    if len(p.x) != inst.n or len(p.y) != inst.m:
        raise ValueError(f"point must have {inst.n} x-entries and {inst.m} y-entries")
    return p


# --------------------------------------------------------------------------
# serialisation


def _rat_json(q: Fraction):
    return q.numerator if q.denominator == 1 else format_rational(q)


def instance_to_json(inst: MpecInstance) -> dict:
    doc = {
        "n": inst.n,
        "m": inst.m,
        "l": inst.l,
        "f": format_poly(inst.f),
        "F": [format_poly(p) for p in inst.F],
        "g": [format_poly(p) for p in inst.g],
        "Z": None,
        "asserted_cqs": sorted(inst.asserted_cqs),
    }
    if inst.Z is not None:
        G, H, a = inst.Z
        doc["Z"] = {
            "G": [[_rat_json(v) for v in r] for r in G],
            "H": [[_rat_json(v) for v in r] for r in H],
            "a": [_rat_json(v) for v in a],
        }
    return doc


def dump_instance(inst: MpecInstance) -> str:
    return json.dumps(instance_to_json(inst), indent=2, sort_keys=True)


def _rat(v, where):
    try:
        if isinstance(v, float):
            raise TypeError
        return to_rational(v)
    except (TypeError, ValueError, ZeroDivisionError):
        raise SchemaError(f"{where}: expected an integer or 'p/q' string, got {v!r}") from None


def load_instance(document) -> MpecInstance:
    """Build an instance from a JSON string, bytes or an already-parsed dict."""
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise SchemaError("instance document must be a JSON object")
    for key in ("n", "m", "l", "f", "F", "g"):
        if key not in doc:
            raise SchemaError(f"missing required key {key!r}")
    n, m, l = doc["n"], doc["m"], doc["l"]
    if not all(isinstance(k, int) and not isinstance(k, bool) and k >= 0 for k in (n, m, l)):
        raise SchemaError("n, m, l must be nonnegative integers")
    if not isinstance(doc["F"], list) or not isinstance(doc["g"], list):
        raise SchemaError("F and g must be lists of expression strings")
    if len(doc["F"]) != m:
        raise SchemaError(f"F has {len(doc['F'])} entries but m={m}")
    if len(doc["g"]) != l:
        raise SchemaError(f"g has {len(doc['g'])} entries but l={l}")
    unknown = set(doc) - {"n", "m", "l", "f", "F", "g", "Z", "asserted_cqs", "name", "comment"}
    if unknown:
        raise SchemaError(f"unknown keys {sorted(unknown)}")
    arity = (n, m)

    def parse(text, where):
        if not isinstance(text, str):
            raise SchemaError(f"{where}: expected an expression string")
        try:
            return parse_expr(text, arity)
        except ExprError as exc:
            raise SchemaError(f"{where}: {exc}") from None

    f = parse(doc["f"], "f")
    F = [parse(t, f"F[{i}]") for i, t in enumerate(doc["F"])]
    g = [parse(t, f"g[{i}]") for i, t in enumerate(doc["g"])]
    Z = None
    if doc.get("Z") is not None:
        zd = doc["Z"]
        if not isinstance(zd, dict) or not {"G", "H", "a"} <= set(zd):
            raise SchemaError("Z must be null or an object with G, H, a")
        G = [[_rat(v, "Z.G") for v in r] for r in zd["G"]]
        H = [[_rat(v, "Z.H") for v in r] for r in zd["H"]]
        a = [_rat(v, "Z.a") for v in zd["a"]]
        Z = (G, H, a)
    cqs = doc.get("asserted_cqs", [])
    if not isinstance(cqs, list):
        raise SchemaError("asserted_cqs must be a list")
    return MpecInstance(n, m, l, f, F, g, Z, frozenset(cqs))


def read_instance(path) -> MpecInstance:
    with open(path) as fh:
        return load_instance(fh.read())


# --------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class ActiveSets:
    active: tuple[int, ...]
    alpha: tuple[int, ...] | None = None
    beta: tuple[int, ...] | None = None
    gamma: tuple[int, ...] | None = None


def g_values(inst: MpecInstance, z) -> list[Fraction]:
    zz = as_point(inst, z).z
    return [evaluate(p, zz) for p in inst.g]


def F_values(inst: MpecInstance, z) -> list[Fraction]:
    zz = as_point(inst, z).z
    return [evaluate(p, zz) for p in inst.F]


def active_set(inst: MpecInstance, z) -> tuple[int, ...]:
    return tuple(i for i, v in enumerate(g_values(inst, z)) if v == 0)


def active_sets(inst: MpecInstance, z, ncp: bool | None = None) -> ActiveSets:
    """Active index set, plus the (alpha, beta, gamma) split for NCP instances.

    ``ncp=True`` forces the NCP split and raises on non-NCP instances.
    """
    act = active_set(inst, z)
    if ncp is None:
        ncp = inst.ncp_form
    if not ncp:
        return ActiveSets(act)
    if not inst.ncp_form:
        raise ValueError("NCP index sets requested for an instance that is not in NCP form (g = -y)")
    p = as_point(inst, z)
    Fv = F_values(inst, p)
    alpha, beta, gamma = [], [], []
    for i in range(inst.m):
        y, Fi = p.y[i], Fv[i]
        if y > 0 and Fi == 0:
            alpha.append(i)
        elif y == 0 and Fi == 0:
            beta.append(i)
        elif y == 0 and Fi > 0:
            gamma.append(i)
        else:
            raise ValueError(f"point violates complementarity at index {i + 1}: y={y}, F={Fi}")
    return ActiveSets(act, tuple(alpha), tuple(beta), tuple(gamma))


@dataclass
class FeasibilityReport:
    in_Z: bool
    g_feasible: bool
    complementarity: bool | None = None
    multiplier_exists: bool | None = None
    certification: str = ""
    violations: list[str] = field(default_factory=list)
    asserted_cqs: tuple[str, ...] = ()

    @property
    def feasible(self) -> bool:
        ok = self.in_Z and self.g_feasible
        if self.complementarity is not None:
            ok = ok and self.complementarity
        if self.multiplier_exists is not None:
            ok = ok and self.multiplier_exists
        return ok


def feasibility_report(inst: MpecInstance, z) -> FeasibilityReport:
    from .multipliers import multiplier_set

    p = as_point(inst, z)
    viol = []
    zz = p.z
    in_Z = True
    for j, (row, c) in enumerate(inst.z_rows()):
        val = sum((a * b for a, b in zip(row, zz)), Fraction(0)) + c
        if val > 0:
            in_Z = False
            viol.append(f"Z row {j + 1} violated: value {format_rational(val)} > 0")
    gv = g_values(inst, p)
    g_ok = True
    for i, v in enumerate(gv):
        if v > 0:
            g_ok = False
            viol.append(f"g{i + 1} = {format_rational(v)} > 0")
    rep = FeasibilityReport(in_Z, g_ok, asserted_cqs=tuple(sorted(inst.asserted_cqs)))
    if inst.ncp_form:
        Fv = F_values(inst, p)
        comp = True
        for i in range(inst.m):
            y, Fi = p.y[i], Fv[i]
            if Fi < 0:
                comp = False
                viol.append(f"F{i + 1} = {format_rational(Fi)} < 0")
            if y * Fi != 0:
                comp = False
                viol.append(f"complementarity violated at index {i + 1}: y*F = {format_rational(y * Fi)}")
        rep.complementarity = comp
        rep.certification = "exact complementarity check"
    else:
        if g_ok:
            ma = multiplier_set(inst, p)
            rep.multiplier_exists = not ma.is_empty
            if ma.is_empty:
                viol.append("no KKT multiplier: M(z) is empty")
        else:
            rep.multiplier_exists = False
        rep.certification = "KKT-certified (lower-level convexity not checked)"
    rep.violations = viol
    return rep
