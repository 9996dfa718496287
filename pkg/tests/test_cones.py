import random
from fractions import Fraction as Fr

import pytest

from mpec_kit.cones import (
    AviProblem,
    critical_multiplier_vertices,
    critical_multipliers,
    directional_critical_set,
    dual_critical_lp,
    lifted_critical_cone,
    linearization_map,
    linearized_cone,
    linearized_cone_member,
    solve_avi,
    vi_lagrangian_jacobians,
)
from mpec_kit.expr import parse_expr
from mpec_kit.instance import MpecInstance, active_sets
from mpec_kit.linalg import RationalMatrix
from mpec_kit.multipliers import multiplier_set
from mpec_kit.oracle import random_instance
from mpec_kit.polyhedra import (
    ConeUnion,
    LpProblem,
    PolyhedralCone,
    Polyhedron,
    cone_union_equal,
    cones_equal,
    enumerate_vertices,
    is_empty,
    member,
    polyhedra_union_equal,
    solve_lp,
)

Q4 = (2, 0, 1, 0)
O3 = (0, 0, 0)


def make(n, m, F, g, f="0"):
    ar = (n, m)
    return MpecInstance(n, m, len(g), parse_expr(f, ar), [parse_expr(s, ar) for s in F],
                        [parse_expr(s, ar) for s in g])


def test_lagrangian_jacobians(corpus):
    Lx, Ly = vi_lagrangian_jacobians(corpus("q2"), O3, (0, 0))
    assert Lx.tolist() == [[1], [0]] and Ly.tolist() == [[1, 0], [0, 1]]
    lam = (Fr(1, 2), 0)
    Lx, Ly = vi_lagrangian_jacobians(corpus("q4"), Q4, lam)
    assert Lx.tolist() == [[-1, 0], [0, -1]]
    assert Ly.tolist() == [[2, 0], [0, 2]]


def test_ncp_lagrangian_is_jacobian_of_F():
    inst, p = random_instance(3, "ncp-small")
    lam = multiplier_set(inst, p).extreme_points[0]
    _, Ly = vi_lagrangian_jacobians(inst, p, lam)
    from mpec_kit.expr import jacobian

    assert Ly == jacobian(inst.F, range(inst.n, inst.dim), p.z)


def test_lifted_critical_cone_q5(corpus):
    K = lifted_critical_cone(corpus("q5"), Q4, (Fr(1, 2), 0))
    assert cones_equal(K, PolyhedralCone(4, [(0, 0, 1, 0)], [(0, 0, 2, 0)]))


def test_lifted_critical_cone_without_active_constraints(corpus):
    inst = make(1, 1, ["y1"], ["y1 - 1"])
    assert cones_equal(lifted_critical_cone(inst, (0, 0), (0,)), PolyhedralCone(2))


def _ncp_expected(inst, p, dim_offset):
    s = active_sets(inst, p)
    A, E = [], []
    for i in s.beta:
        A.append(tuple(-1 if j == dim_offset + i else 0 for j in range(dim_offset + inst.m)))
    for i in s.gamma:
        E.append(tuple(1 if j == dim_offset + i else 0 for j in range(dim_offset + inst.m)))
    return PolyhedralCone(dim_offset + inst.m, A, E)


@pytest.mark.parametrize("seed", range(12))
def test_ncp_critical_cones_are_constant(seed):
    inst, p = random_instance(seed, "ncp-small")
    lam = multiplier_set(inst, p).extreme_points[0]
    assert cones_equal(lifted_critical_cone(inst, p, lam), _ncp_expected(inst, p, inst.n))
    dx = tuple(Fr(seed - 5, 3) for _ in range(inst.n))
    K = directional_critical_set(inst, p, lam, dx)
    assert polyhedra_union_equal([K], [_ncp_expected(inst, p, 0)]).equal


def test_incompatible_equalities_give_empty_set():
    inst = make(1, 1, ["-2"], ["y1 - x1", "y1 + x1"])
    lam = (1, 1)
    assert member(multiplier_set(inst, (0, 0)).set, lam)
    assert not is_empty(directional_critical_set(inst, (0, 0), lam, (0,)))
    assert is_empty(directional_critical_set(inst, (0, 0), lam, (1,)))


def test_critical_multipliers_with_x_free_gradients(corpus):
    inst = corpus("q5")
    M = multiplier_set(inst, Q4).set
    for dx in [(1, 0), (-3, Fr(1, 2))]:
        r = critical_multipliers(inst, Q4, dx)
        assert r.value == 0 and polyhedra_union_equal([r.face], [M]).equal


def test_singleton_multiplier_is_always_critical(corpus):
    inst = corpus("q7")
    for dx in [(1,), (-2,)]:
        assert critical_multiplier_vertices(inst, O3, dx) == list(multiplier_set(inst, O3).extreme_points)


def test_critical_vertices_are_maximising_vertices():
    rng = random.Random(21)
    for seed in range(40):
        inst, p = random_instance(seed, "vi-small")
        ma = multiplier_set(inst, p)
        if ma.is_empty:
            continue
        dx = tuple(Fr(rng.randint(-2, 2)) for _ in range(inst.n))
        r = critical_multipliers(inst, p, dx)
        if r.status != "optimal":
            continue
        verts = critical_multiplier_vertices(inst, p, dx)
        from mpec_kit.cones import _dx_offsets

        c = _dx_offsets(inst, p, dx)
        best = [v for v in ma.extreme_points if sum(a * b for a, b in zip(c, v)) == r.value]
        assert sorted(verts) == sorted(best)


def test_dual_lp_trivial_case():
    inst = make(1, 2, ["0", "0"], ["y1 - 1"])
    r = dual_critical_lp(inst, (0, 0, 0), (1,))
    assert r.value == 0 and polyhedra_union_equal([r.face], [Polyhedron.whole_space(2)]).equal


def test_lp_duality_on_random_instances():
    rng = random.Random(22)
    checked = 0
    for seed in range(60):
        inst, p = random_instance(seed, ("vi-small", "ncp-small")[seed % 2])
        if multiplier_set(inst, p).is_empty:
            continue
        dx = tuple(Fr(rng.randint(-3, 3)) for _ in range(inst.n))
        primal = critical_multipliers(inst, p, dx)
        dual = dual_critical_lp(inst, p, dx)
        if primal.status == "optimal":
            assert dual.status == "optimal" and dual.value == primal.value
            checked += 1
        else:
            assert dual.status == "infeasible"
    assert checked > 10


def test_avi_on_whole_space():
    M = RationalMatrix([[1, 1], [0, 0]])
    sol = solve_avi(AviProblem((1, 0), M, Polyhedron.whole_space(2)))
    assert polyhedra_union_equal(sol.polyhedra, [Polyhedron(2, E=[(1, 1)], d=[-1])]).equal


def test_avi_trivial_lcp():
    sol = solve_avi(AviProblem((0,), RationalMatrix([[1]]), Polyhedron(1, [(-1,)], [0])))
    assert polyhedra_union_equal(sol.polyhedra, [Polyhedron.point((0,))]).equal


def test_linearization_map_empty_when_critical_set_is():
    inst = make(1, 1, ["-2"], ["y1 - x1", "y1 + x1"])
    assert linearization_map(inst, (0, 0), (1, 1), (1,)).is_empty


def test_linearization_map_q6(corpus):
    sol = linearization_map(corpus("q6"), (0, 0), (0,), (1,))
    assert polyhedra_union_equal(sol.polyhedra, [Polyhedron(1, [(-1,)], [0])]).equal


def test_linearized_cone_examples(corpus):
    L = linearized_cone(corpus("q6"), (0, 0), [(0,)])
    assert cone_union_equal(L, ConeUnion(2, [PolyhedralCone(2, [(-1, 0), (0, -1)])])).equal
    assert not linearized_cone(corpus("q6"), (0, 0), []).pieces
    L2 = linearized_cone(corpus("q2"), O3, [(0, 0)])
    expected = [
        PolyhedralCone(3, [(-1, -1, 0)], [(0, 1, 0), (0, 0, 1)]),
        PolyhedralCone(3, [(0, -1, 0)], [(1, 1, 0), (0, 0, 1)]),
    ]
    assert cone_union_equal(L2, ConeUnion(3, expected)).equal


def test_membership_examples(corpus):
    inst = corpus("q6")
    for dz in [(1, 0), (0, 1), (0, 0)]:
        res = linearized_cone_member(inst, (0, 0), dz, [(0,)])
        assert res.member and res.multiplier == (0,)
    assert not linearized_cone_member(inst, (0, 0), (-1, 0), [(0,)]).member
    with pytest.raises(ValueError):
        linearized_cone_member(inst, (0, 0), (0, 0), [(1,)])  # not a multiplier
