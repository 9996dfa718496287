import random

import pytest

from mpec_kit.instance import feasibility_report
from mpec_kit.oracle import PROFILES, brute_lcp, brute_lcp_points, brute_lp, random_instance
from mpec_kit.polyhedra import LpProblem, Polyhedron


def test_brute_lp_examples():
    empty = Polyhedron(1, [(1,), (-1,)], [-1, -1])
    assert brute_lp(LpProblem((1,), empty)).status == "infeasible"
    res = brute_lp(LpProblem((1, 0), Polyhedron(2, [(2, 0), (1, 0)], [0, 0])))
    assert res.status == "unbounded"  # dy1 may decrease without bound
    res = brute_lp(LpProblem((-1,), Polyhedron(1, [(2,), (1,)], [0, 0])))
    assert res.status == "optimal" and res.vertex == (0,) and res.value == 0
    with pytest.raises(ValueError):
        brute_lp(LpProblem((0,) * 5, Polyhedron.whole_space(5)))


def test_brute_lcp_examples():
    assert brute_lcp_points([-1], [[1]]) == [(1,)]
    assert (0, 0) in brute_lcp_points([1, 2], [[0, 1], [3, -1]])


def test_positive_definite_lcp_has_one_solution():
    rng = random.Random(4)
    for _ in range(40):
        m = rng.randint(1, 3)
        B = [[rng.randint(-2, 2) for _ in range(m)] for _ in range(m)]
        M = [[sum(B[k][i] * B[k][j] for k in range(m)) + (1 if i == j else 0) for j in range(m)] for i in range(m)]
        q = [rng.randint(-4, 4) for _ in range(m)]
        assert len(brute_lcp_points(q, M)) == 1
        assert len(brute_lcp(q, M)) >= 1


@pytest.mark.parametrize("profile", PROFILES)
def test_random_instances_feasible_and_deterministic(profile):
    for seed in range(100):
        inst, p = random_instance(seed, profile)
        assert feasibility_report(inst, p).feasible, (profile, seed)
        assert inst.n <= 3 and inst.m <= 3
    assert random_instance(7, profile) == random_instance(7, profile)


def test_unknown_profile():
    with pytest.raises(ValueError):
        random_instance(0, "huge")


def test_oracle_module_is_independent():
    import ast
    from pathlib import Path

    import mpec_kit.oracle as o

    tree = ast.parse(Path(o.__file__).read_text())
    imported = {a.name for node in ast.walk(tree) if isinstance(node, ast.ImportFrom) for a in node.names}
    assert not imported & {"solve_lp", "enumerate_vertices", "enumerate_extreme_rays", "solve_avi", "rref", "solve"}
