"""Acceptance gate: one test group per numbered criterion."""
import math
import random
from fractions import Fraction as Fr

import numpy as np
import pytest
from scipy.optimize import minimize

from mpec_kit.cones import (
    AviProblem,
    candidate_multipliers,
    critical_multiplier_vertices,
    critical_multipliers,
    directional_critical_set,
    dual_critical_lp,
    linearized_cone,
    linearized_cone_member,
    solve_avi,
)
from mpec_kit.expr import PolyExpr, differentiate, evaluate, jacobian
from mpec_kit.instance import active_sets, feasibility_report
from mpec_kit.linalg import RationalMatrix, matrix_rank, solve
from mpec_kit.multipliers import CqStatus, lower_level_jacobian, multiplier_set
from mpec_kit.oracle import brute_lcp, brute_lp, random_instance
from mpec_kit.polyhedra import (
    ConeUnion,
    LpProblem,
    PolyhedralCone,
    Polyhedron,
    cone_union_equal,
    enumerate_extreme_rays,
    is_empty,
    member,
    polyhedra_union_equal,
    project_cone,
    solve_lp,
)
from mpec_kit.stationarity import (
    distance_condition_check,
    full_pd_stationarity,
    kkt_reformulate,
    ncp_index_systems,
    nlp_linearized_cone,
    nlp_point,
    objective_gradient,
    primal_stationarity,
)
from mpec_kit.tangent import (
    check_nlp_basic_cq,
    convex_hull_union,
    ray_matches_clusters,
    sample_tangent_directions,
    tangent_cone,
)

ORIGIN3 = (0, 0, 0)
Q4_POINT = (2, 0, 1, 0)


def cone(dim, A=(), E=()):
    return PolyhedralCone(dim, A, E)


def same_union(pieces1, pieces2, dim):
    return cone_union_equal(ConeUnion(dim, list(pieces1)), ConeUnion(dim, list(pieces2)))


# ---------------------------------------------------------------- criterion 1


@pytest.mark.criterion(1, "Q1 KKT reformulation: T, L and basic-CQ failure")
def test_q1_nlp_cones(corpus):
    nlp = kkt_reformulate(corpus("q1"))
    for x in (1, 0, Fr(-3, 2)):
        pt = (x, 0, 0)
        T = tangent_cone(nlp, pt)
        assert T.certified
        assert same_union(T.cone.pieces, [cone(3, E=[(0, 1, 0), (0, 0, 1)])], 3).equal
        L = nlp_linearized_cone(nlp, pt)
        assert same_union([L], [cone(3, A=[(0, -1, 0)], E=[(0, 1, -1)])], 3).equal
        cq = check_nlp_basic_cq(nlp, pt)
        assert cq.verdict == "fails"
        assert member(L, cq.witness) and not T.cone.contains(cq.witness)


# ---------------------------------------------------------------- criterion 2


@pytest.mark.criterion(2, "Q2 tangent cone at the origin, certified, matched by sampling")
def test_q2_tangent_cone(corpus):
    inst = corpus("q2")
    T = tangent_cone(inst, ORIGIN3)
    assert T.status == "certified"
    expected = [
        cone(3, A=[(-1, 0, 0)], E=[(0, 1, 0), (0, 0, 1)]),
        cone(3, A=[(1, 0, 0)], E=[(1, 1, 0), (0, 0, 1)]),
    ]
    assert same_union(T.cone.pieces, expected, 3).equal
    s = sample_tangent_directions(inst, ORIGIN3, count=200, seed=0)
    rays = [r for p in T.cone.pieces for r in enumerate_extreme_rays(p).rays]
    assert sorted(rays) == sorted([(Fr(1), Fr(0), Fr(0)), (Fr(-1), Fr(1), Fr(0))])
    assert ray_matches_clusters(rays, s.clusters, tol=1e-3) == (True, True)


# ---------------------------------------------------------------- criterion 3


@pytest.mark.criterion(3, "Q3 NLP linearized cone strictly contains conv T")
def test_q3_hull_strictly_inside_nlp_cone(corpus):
    inst = corpus("q3")
    nlp = kkt_reformulate(inst)
    lam = (0, 0)
    L5 = nlp_linearized_cone(nlp, nlp_point(inst, ORIGIN3, lam))
    L = project_cone(L5, [0, 1, 2])
    expected_L = cone(3, A=[(-1, -1, 0), (0, -1, 0), (0, 0, -1)])
    assert same_union([L], [expected_L], 3).equal
    hull = convex_hull_union(tangent_cone(inst, ORIGIN3).cone)
    expected_hull = cone(3, A=[(-1, -1, 0), (0, -1, 0)], E=[(0, 0, 1)])
    assert same_union([hull], [expected_hull], 3).equal
    cmp = same_union([hull], [L], 3)
    assert not cmp.equal and cmp.side == "second"
    assert cmp.witness[2] > 0
    assert member(L, cmp.witness) and not member(hull, cmp.witness)


# ---------------------------------------------------------------- criterion 4


@pytest.mark.criterion(4, "Q4 multiplier set, extreme points, SMFCQ failure")
def test_q4_multipliers(corpus):
    ma = multiplier_set(corpus("q4"), Q4_POINT)
    expected = Polyhedron(2, [(-1, 0), (0, -1)], [0, 0], [(2, 1)], [1])
    assert polyhedra_union_equal([ma.set], [expected]).equal
    assert sorted(ma.extreme_points) == sorted([(Fr(1, 2), Fr(0)), (Fr(0), Fr(1))])
    assert ma.smfcq == CqStatus.FAILS


# ---------------------------------------------------------------- criterion 5


@pytest.mark.criterion(5, "Q5 directional critical set {0} x R for any dx")
def test_q5_directional_critical_set(corpus):
    inst = corpus("q5")
    # dx enters only through the x-gradients of g, which vanish identically
    assert all(differentiate(g, j).is_zero() for g in inst.g for j in range(inst.n))
    rng = random.Random(5)
    expected = Polyhedron(2, E=[(1, 0)], d=[0])
    for _ in range(10):
        dx = (Fr(rng.randint(-9, 9), rng.randint(1, 5)), Fr(rng.randint(-9, 9), rng.randint(1, 5)))
        K = directional_critical_set(inst, Q4_POINT, (Fr(1, 2), 0), dx)
        assert polyhedra_union_equal([K], [expected]).equal


# ---------------------------------------------------------------- criterion 6


@pytest.mark.criterion(6, "Q6 T = R+ x {0}, L = R+^2, full CQ fails with witness (0,1)")
def test_q6_full_cq(corpus):
    from mpec_kit.tangent import check_full_cq

    inst = corpus("q6")
    cq = check_full_cq(inst, (0, 0))
    assert cq.tangent.certified
    assert same_union(cq.tangent.cone.pieces, [cone(2, A=[(-1, 0)], E=[(0, 1)])], 2).equal
    assert same_union(cq.linearized.pieces, [cone(2, A=[(-1, 0), (0, -1)])], 2).equal
    assert cq.verdict == "fails"
    assert cq.witness == (0, 1) and cq.side == "second"


# ---------------------------------------------------------------- criterion 7


@pytest.mark.criterion(7, "Q7 beta = {1,2}, certificate (1,0) for beta_1 = {1}, all systems feasible")
def test_q7_ncp_systems(corpus):
    inst = corpus("q7")
    assert active_sets(inst, ORIGIN3).beta == (0, 1)
    system, cert = ncp_index_systems(inst, ORIGIN3, (0,))
    assert cert is not None and cert.pi == (1, 0)
    assert system.satisfied_by(tuple(cert.zeta) + tuple(cert.eta) + tuple(cert.pi))
    for S in [(), (0,), (1,), (0, 1)]:
        assert ncp_index_systems(inst, ORIGIN3, S)[1] is not None
    rep = full_pd_stationarity(inst, ORIGIN3)
    assert rep.verdict == "stationary" and len(rep.systems) == 4


# ---------------------------------------------------------------- criterion 8


@pytest.mark.criterion(8, "Q8 dual LP optimal set {dy1 = 0} independent of dx")
def test_q8_dual_lp(corpus):
    inst = corpus("q8")
    rng = random.Random(8)
    expected = Polyhedron(2, E=[(1, 0)], d=[0])
    for _ in range(10):
        dx = tuple(Fr(rng.randint(-20, 20), rng.randint(1, 7)) for _ in range(2))
        res = dual_critical_lp(inst, Q4_POINT, dx)
        assert res.status == "optimal" and res.value == 0
        assert polyhedra_union_equal([res.face], [expected]).equal


# ---------------------------------------------------------------- criterion 9


@pytest.mark.criterion(9, "Q9 independent gradients, forced multiplier (-1,-1), M empty")
def test_q9_empty_multipliers(corpus):
    inst = corpus("q9")
    z = (0, 0, 0, 0)
    Jy = lower_level_jacobian(inst, z)
    assert matrix_rank(Jy) == 2
    Fv = [evaluate(F, z) for F in inst.F]
    forced = solve(Jy.T.rows, [-v for v in Fv], 2)
    assert tuple(forced) == (-1, -1)
    ma = multiplier_set(inst, z)
    assert ma.is_empty and not ma.extreme_points
    assert ma.strongly_nondegenerate == CqStatus.FAILS
    fr = feasibility_report(inst, z)
    assert not fr.multiplier_exists and not fr.feasible


# ---------------------------------------------------------------- criterion 10


def _project_onto_c(x):
    """Euclidean projection onto {|y| <= 1, y1 <= 1}; the disk already forces y1 <= 1."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x)
    return x / r if r > 1 else x


@pytest.mark.criterion(10, "Q10 lower objective arbitrarily close to (2,0) for lambda* = (0,1)")
def test_q10_not_local_min(corpus):
    inst = corpus("q10")
    assert member(multiplier_set(inst, Q4_POINT).set, (0, 1))
    f_bar = evaluate(inst.f, Q4_POINT)
    assert f_bar == 1
    rng = random.Random(10)
    cons = [
        {"type": "ineq", "fun": lambda y: 1 - y @ y},
        {"type": "ineq", "fun": lambda y: 1 - y[0]},
    ]
    for k in range(10):
        r = Fr(rng.randint(1, 99), 1000)
        sgn = 1 if k % 2 else -1
        x = (2 + Fr(rng.randint(-50, 50), 1000), sgn * r)
        assert x[1] != 0 and (x[0] - 2) ** 2 + x[1] ** 2 <= Fr(1, 100)
        xf = np.array([float(v) for v in x])
        y = _project_onto_c(xf)
        # independent check of the closed form with a generic solver
        res = minimize(lambda v: 0.5 * np.sum((v - xf) ** 2), x0=np.zeros(2), constraints=cons, method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 200})
        assert np.allclose(res.x, y, atol=1e-6)
        assert y[0] < 1 - 1e-9
        # the KKT triple with lambda* = (0,1) stays feasible nearby and the objective drops
        f_val = float(inst.f.to_float_function()(np.concatenate([xf, y])))
        assert f_val < float(f_bar) - 1e-9


# ---------------------------------------------------------------- criterion 11


def _random_lp(rng):
    n = rng.randint(1, 4)
    k = rng.randint(0, 7)
    e = rng.randint(0, min(2, 10 - k))
    A = [[rng.randint(-4, 4) for _ in range(n)] for _ in range(k)]
    b = [rng.randint(-3, 6) for _ in range(k)]
    E = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(e)]
    d = [rng.randint(-3, 3) for _ in range(e)]
    c = [rng.randint(-5, 5) for _ in range(n)]
    return LpProblem(c, Polyhedron(n, A, b, E, d), rng.choice(["min", "max"]))


@pytest.mark.criterion(11, "solve_lp agrees with brute_lp on 200 random LPs")
def test_lp_vs_brute_force():
    rng = random.Random(11)
    for _ in range(200):
        p = _random_lp(rng)
        a, b = solve_lp(p), brute_lp(p)
        assert a.status == b.status, p
        assert a.value == b.value, p


# ---------------------------------------------------------------- criterion 12


def _multiplier_candidates(ma):
    pts = list(ma.extreme_points)
    out = list(pts)
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            out.append(tuple((a + b) / 2 for a, b in zip(pts[i], pts[j])))
    for v in pts:
        for r in ma.rays:
            out.append(tuple(a + b for a, b in zip(v, r)))
    return out


@pytest.mark.criterion(12, "K(z,lambda;dx) nonempty iff lambda is critical, K constant on the face")
def test_critical_multiplier_equivalence():
    rng = random.Random(12)
    faces_compared = 0
    for seed in range(100):
        profile = ("vi-small", "ncp-small", "polyhedral-z")[seed % 3]
        inst, p = random_instance(seed, profile)
        ma = multiplier_set(inst, p)
        if ma.is_empty:
            continue
        dx = tuple(Fr(rng.randint(-2, 2)) for _ in range(inst.n))
        cm = critical_multipliers(inst, p, dx)
        in_face = []
        for lam in _multiplier_candidates(ma):
            crit = cm.status == "optimal" and member(cm.face, lam)
            K = directional_critical_set(inst, p, lam, dx)
            assert (not is_empty(K)) == crit, (seed, lam)
            if crit:
                in_face.append((lam, K))
        distinct = {lam for lam, _ in in_face}
        if len(distinct) > 1:
            faces_compared += 1
            (l1, K1), (l2, K2) = in_face[0], next(t for t in in_face if t[0] != in_face[0][0])
            assert polyhedra_union_equal([K1], [K2]).equal, (seed, l1, l2)
    assert faces_compared > 0


# ---------------------------------------------------------------- criterion 13


@pytest.mark.criterion(13, "solve_avi on the nonnegative orthant agrees with brute_lcp (500 trials)")
def test_avi_vs_brute_lcp():
    rng = random.Random(13)
    for _ in range(500):
        m = rng.randint(1, 3)
        q = [rng.randint(-3, 3) for _ in range(m)]
        M = [[rng.randint(-2, 2) for _ in range(m)] for _ in range(m)]
        K = Polyhedron(m, [tuple(-1 if i == j else 0 for j in range(m)) for i in range(m)], [0] * m)
        sol = solve_avi(AviProblem(q, RationalMatrix(M), K))
        brute = brute_lcp(q, M)
        cmp = polyhedra_union_equal(sol.polyhedra, brute)
        assert cmp.equal, (q, M, cmp.witness)


# ---------------------------------------------------------------- criterion 14

CERTIFIED_CORPUS = [("q1", (1, 0)), ("q2", ORIGIN3), ("q6", (0, 0)), ("q7", ORIGIN3)]


@pytest.mark.criterion(14, "every certified tangent ray lies in the linearized cone")
@pytest.mark.parametrize("name,point", CERTIFIED_CORPUS)
def test_tangent_rays_in_linearized_cone(corpus, name, point):
    inst = corpus(name)
    T = tangent_cone(inst, point)
    assert T.certified
    extreme, _ = candidate_multipliers(inst, point)
    checked = 0
    for piece in T.cone.pieces:
        r = enumerate_extreme_rays(piece)
        gens = list(r.rays) + list(r.lineality) + [tuple(-v for v in w) for w in r.lineality]
        for d in gens:
            dx = d[: inst.n]
            lams = list(extreme) + [v for v in critical_multiplier_vertices(inst, point, dx) if v not in extreme]
            res = linearized_cone_member(inst, point, d, lams)
            assert res.member, (name, d)
            assert res.multiplier is not None and member(multiplier_set(inst, point).set, res.multiplier)
            checked += 1
    assert checked > 0


# ---------------------------------------------------------------- criterion 15


def _random_poly(rng, nv, arity):
    terms = {}
    for _ in range(rng.randint(1, 6)):
        mono = [0] * nv
        for _ in range(rng.randint(0, 3)):
            mono[rng.randrange(nv)] += 1
        terms[tuple(mono)] = Fr(rng.randint(-5, 5))
    return PolyExpr(terms, arity)


@pytest.mark.criterion(15, "exact derivatives match central differences (100 cases)")
def test_derivatives_vs_finite_differences():
    rng = random.Random(15)
    h = 1e-5
    for _ in range(100):
        arity = (rng.randint(1, 2), rng.randint(1, 2))
        nv = sum(arity)
        p = _random_poly(rng, nv, arity)
        z = [Fr(rng.randint(-20, 20), 10) for _ in range(nv)]
        fz = p.to_float_function()
        zf = np.array([float(v) for v in z])
        exact = jacobian([p], range(nv), z).row(0)
        for j in range(nv):
            e = np.zeros(nv)
            e[j] = h
            fd = (fz(zf + e) - fz(zf - e)) / (2 * h)
            ex = float(exact[j])
            assert abs(fd - ex) <= 1e-6 * max(1.0, abs(ex)), (p, z, j)


# ---------------------------------------------------------------- criterion 16

PD_CORPUS = [
    ("q1", (1, 0)),
    ("q2", ORIGIN3),
    ("q3", ORIGIN3),
    ("q4", Q4_POINT),
    ("q5", Q4_POINT),
    ("q6", (0, 0)),
    ("q7", ORIGIN3),
    ("q8", Q4_POINT),
    ("q9", (0, 0, 0, 0)),
    ("q10", Q4_POINT),
]


@pytest.mark.criterion(16, "primal stationarity on L(M^e) iff primal-dual verdict; distance condition")
@pytest.mark.parametrize("name,point", PD_CORPUS)
def test_primal_dual_consistency(corpus, name, point):
    inst = corpus(name)
    lams, note = candidate_multipliers(inst, point)
    L = linearized_cone(inst, point, lams)
    pv = primal_stationarity(inst, point, L)
    rep = full_pd_stationarity(inst, point, lams, note)
    if not lams:
        assert rep.verdict == "not applicable" and not L.pieces
        return
    assert pv.stationary == rep.stationary
    if not pv.stationary:
        return
    gf = objective_gradient(inst, point)
    alpha = math.isqrt(math.ceil(sum(g * g for g in gf))) + 1
    rng = random.Random(16)
    for _ in range(100):
        dz = tuple(Fr(rng.randint(-10, 10), rng.randint(1, 4)) for _ in range(inst.dim))
        assert distance_condition_check(inst, point, L, dz, alpha), dz
