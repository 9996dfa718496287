"""Slow, independent brute-force oracles for cross-checking the main solvers.

Nothing here calls the simplex, the enumeration routines or the cone
machinery of the main modules; only the plain data types are shared.
"""
from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations

from .expr import PolyExpr
from .instance import EvalPoint, MpecInstance
from .polyhedra import LpProblem, LpSolution, Polyhedron

PROFILES = ("ncp-small", "vi-small", "polyhedral-z")
BRUTE_LP_MAX_DIM = 4
BRUTE_LP_MAX_ROWS = 10


# --------------------------------------------------------------------------
# private elimination (deliberately not the linalg module)


def _gauss(rows, rhs, ncols):
    """Solve rows·v = rhs; returns (solution or None, rank, nullspace basis)."""
    M = [list(map(Fraction, r)) + [Fraction(b)] for r, b in zip(rows, rhs)]
    piv_cols = []
    r = 0
    for c in range(ncols):
        p = None
        for i in range(r, len(M)):
            if M[i][c] != 0:
                p = i
                break
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        inv = 1 / M[r][c]
        M[r] = [x * inv for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        piv_cols.append(c)
        r += 1
    consistent = all(M[i][-1] == 0 for i in range(r, len(M)))
    sol = None
    if consistent:
        sol = [Fraction(0)] * ncols
        for i, c in enumerate(piv_cols):
            sol[c] = M[i][-1]
    basis = []
    for f in range(ncols):
        if f in piv_cols:
            continue
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, c in enumerate(piv_cols):
            v[c] = -M[i][f]
        basis.append(v)
    return sol, r, basis


def _ip(a, b):
    s = Fraction(0)
    for x, y in zip(a, b):
        s += x * y
    return s


def brute_lp(p: LpProblem) -> LpSolution:
    """Best vertex, or unbounded when some extreme ray improves the objective."""
    P = p.feasible
    n = P.dim
    if n > BRUTE_LP_MAX_DIM or len(P.A) + len(P.E) > BRUTE_LP_MAX_ROWS:
        raise ValueError("brute_lp is limited to dim <= 4 and <= 10 constraints")
    c = [Fraction(x) for x in p.c]
    if p.sense == "max":
        c = [-x for x in c]
    ineq = [(list(a), Fraction(b)) for a, b in zip(P.A, P.b)]
    eqs = [(list(e), Fraction(d)) for e, d in zip(P.E, P.d)]
    _, _, lin = _gauss([a for a, _ in ineq] + [e for e, _ in eqs], [0] * (len(ineq) + len(eqs)), n)
    lin_unbounded = any(_ip(c, v) != 0 for v in lin)
    # restrict to the orthogonal complement of the lineality space
    eqs = eqs + [(v, Fraction(0)) for v in lin]
    rows = [a for a, _ in ineq]
    verts = []
    eq_rows = [e for e, _ in eqs]
    eq_rhs = [d for _, d in eqs]
    for k in range(len(ineq) + 1):
        for S in combinations(range(len(ineq)), k):
            R = eq_rows + [rows[i] for i in S]
            b = eq_rhs + [ineq[i][1] for i in S]
            sol, rank, _ = _gauss(R, b, n)
            if sol is None or rank != n:
                continue
            if all(_ip(a, sol) <= bi for a, bi in ineq):
                if sol not in verts:
                    verts.append(sol)
    if not verts:
        return LpSolution("infeasible")
    if lin_unbounded:
        return LpSolution("unbounded")
    # extreme rays of the recession cone (pointed after the restriction)
    for k in range(len(ineq) + 1):
        for S in combinations(range(len(ineq)), k):
            R = eq_rows + [rows[i] for i in S]
            _, rank, ns = _gauss(R, [0] * len(R), n)
            if len(ns) != 1:
                continue
            for s in (1, -1):
                d = [s * x for x in ns[0]]
                if all(_ip(a, d) <= 0 for a in rows) and _ip(c, d) < 0:
                    return LpSolution("unbounded")
    best = min(verts, key=lambda v: _ip(c, v))
    value = _ip([Fraction(x) for x in p.c], best)
    return LpSolution("optimal", value, tuple(best))


def brute_lcp(q, M) -> list[Polyhedron]:
    """Nonempty pieces of SOL(q, M) over ``y >= 0``, one per complementary sign pattern."""
    m = len(q)
    if m > 3:
        raise ValueError("brute_lcp is limited to m <= 3")
    q = [Fraction(x) for x in q]
    M = [[Fraction(x) for x in r] for r in M]
    pieces = []
    for k in range(m + 1):
        for P in combinations(range(m), k):
            # i in P: w_i = (q + M y)_i = 0 and y_i >= 0; otherwise y_i = 0 and w_i >= 0
            E, d, A, b = [], [], [], []
            for i in range(m):
                unit = [Fraction(1 if j == i else 0) for j in range(m)]
                if i in P:
                    E.append(M[i])
                    d.append(-q[i])
                    A.append([-x for x in unit])
                    b.append(Fraction(0))
                else:
                    E.append(unit)
                    d.append(Fraction(0))
                    A.append([-x for x in M[i]])
                    b.append(q[i])
            piece = Polyhedron(m, A, b, E, d)
            if brute_lp(LpProblem((0,) * m, piece)).status != "infeasible":
                pieces.append(piece)
    return pieces


def brute_lcp_points(q, M) -> list[tuple[Fraction, ...]]:
    """Isolated solutions: one per sign pattern whose linear system has a unique solution."""
    m = len(q)
    out = []
    for k in range(m + 1):
        for P in combinations(range(m), k):
            rows, rhs = [], []
            for i in range(m):
                if i in P:
                    rows.append(M[i])
                    rhs.append(-Fraction(q[i]))
                else:
                    rows.append([1 if j == i else 0 for j in range(m)])
                    rhs.append(0)
            sol, rank, _ = _gauss(rows, rhs, m)
            if sol is None or rank != m:
                continue
            w = [Fraction(q[i]) + _ip(M[i], sol) for i in range(m)]
            if all(x >= 0 for x in sol) and all(x >= 0 for x in w) and tuple(sol) not in out:
                out.append(tuple(sol))
    return out


# --------------------------------------------------------------------------
# random instances


def _rand_poly(rng: random.Random, arity, degree: int, density: float = 0.5) -> PolyExpr:
    nv = arity[0] + arity[1]
    terms = {}
    for i in range(nv):
        mono = tuple(1 if t == i else 0 for t in range(nv))
        if rng.random() < density:
            terms[mono] = Fraction(rng.randint(-5, 5))
    if degree >= 2:
        for i in range(nv):
            for j in range(i, nv):
                if rng.random() < density / 2:
                    mono = [0] * nv
                    mono[i] += 1
                    mono[j] += 1
                    terms[tuple(mono)] = Fraction(rng.randint(-5, 5))
    return PolyExpr(terms, arity)


def _with_value(p: PolyExpr, z, target) -> PolyExpr:
    """Adjust the constant term so that ``p(z) = target``."""
    return p + (Fraction(target) - p.evaluate(z))


def random_instance(seed: int, profile: str = "ncp-small") -> tuple[MpecInstance, EvalPoint]:
    """Seeded instance feasible at the returned designated point."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {PROFILES}")
    rng = random.Random(f"{profile}:{seed}")
    n = rng.randint(1, 2)
    m = rng.randint(1, 2)
    ar = (n, m)
    x = [Fraction(rng.randint(-1, 1)) for _ in range(n)]
    if profile in ("ncp-small", "polyhedral-z"):
        y, Fs = [], []
        for i in range(m):
            kind = rng.choice("abg")
            yi = Fraction(rng.randint(1, 3)) if kind == "a" else Fraction(0)
            y.append(yi)
        z = x + y
        for i in range(m):
            target = 0 if y[i] > 0 or rng.random() < 0.5 else rng.randint(1, 3)
            Fs.append(_with_value(_rand_poly(rng, ar, 2), z, target))
        g = [-PolyExpr.variable(n + i, ar) for i in range(m)]
        f = _rand_poly(rng, ar, 2, 0.6)
        Z = None
        if profile == "polyhedral-z":
            s = rng.randint(1, 2)
            G = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(s)]
            H = [[rng.randint(-3, 3) for _ in range(m)] for _ in range(s)]
            a = []
            for j in range(s):
                val = sum(Fraction(G[j][k]) * x[k] for k in range(n)) + sum(Fraction(H[j][k]) * y[k] for k in range(m))
                slack = 0 if rng.random() < 0.6 else rng.randint(1, 2)
                a.append(-val - slack)
            Z = (G, H, a)
        return MpecInstance(n, m, m, f, Fs, g, Z), EvalPoint(x, y)
    # vi-small: general constraints, shifted so that a chosen lambda is a multiplier
    l = rng.randint(1, 2)
    y = [Fraction(rng.randint(-1, 1)) for _ in range(m)]
    z = x + y
    g, lam = [], []
    for i in range(l):
        active = rng.random() < 0.7
        gi = _rand_poly(rng, ar, 1, 0.8)
        if rng.random() < 0.5:
            k = rng.randrange(m)
            mono = [0] * (n + m)
            mono[n + k] = 2
            gi = gi + PolyExpr({tuple(mono): Fraction(rng.randint(1, 2))}, ar)
        gi = _with_value(gi, z, 0 if active else -rng.randint(1, 2))
        g.append(gi)
        lam.append(Fraction(rng.randint(0, 2)) if active else Fraction(0))
    Fs = []
    for k in range(m):
        target = -sum((lam[i] * g[i].differentiate(n + k).evaluate(z) for i in range(l)), Fraction(0))
        Fs.append(_with_value(_rand_poly(rng, ar, 2), z, target))
    f = _rand_poly(rng, ar, 2, 0.6)
    return MpecInstance(n, m, l, f, Fs, g, None), EvalPoint(x, y)
