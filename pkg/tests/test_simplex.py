import itertools

import numpy as np
import pytest

from oracles import lp_optimum, polytope_vertices_lp
from shadowbench.ensembles import KleeMintySpec, klee_minty
from shadowbench.errors import DegeneracyError, InfeasibleError, InputError
from shadowbench.geometry import HPolytope, cube, positively_spanning, vertex_edge_graph
from shadowbench.numerics import RngStream
from shadowbench.simplex import (
    BlandRule,
    DantzigRule,
    GreatestImprovementRule,
    GreedyRule,
    LinearProgram,
    Termination,
    brute_force_optimum,
    check_vertex,
    check_walk,
    find_initial_vertex,
    make_basis,
    neighbors,
    solve_with_rule,
)


def cube_lp(d, z):
    P = cube(d)
    return LinearProgram(P.normals, P.rhs, np.asarray(z, float))


def test_cube_initial_vertex_is_a_corner():
    lp = cube_lp(3, np.ones(3))
    v = find_initial_vertex(lp, RngStream(0))
    assert np.allclose(np.abs(v.x), 1)
    check_vertex(lp, v)


def test_single_point_feasible_set():
    # x_i <= 2 and -x_i <= -2 pin x = (2, 2, 2)
    A = np.vstack([np.eye(3), -np.eye(3)])
    b = np.array([2, 2, 2, -2, -2, -2.0])
    v = find_initial_vertex(LinearProgram(A, b, np.zeros(3)), RngStream(1))
    assert np.allclose(v.x, 2)


@pytest.mark.parametrize("seed", range(10))
def test_random_initial_vertex_passes_invariants(seed):
    rs = RngStream(seed, "phase1-test")
    A = rs.normal((10, 3))
    b = rs.child("b").uniform(10, -0.5, 1.0)
    lp = LinearProgram(A, b, np.zeros(3))
    try:
        v = find_initial_vertex(lp, rs.child("p"))
    except InfeasibleError as exc:
        y = exc.certificate
        assert np.all(y >= -1e-9) and np.allclose(A.T @ y, 0, atol=1e-7) and b @ y < 0
        return
    check_vertex(lp, v)


def test_infeasible_certificate():
    A = np.array([[1.0, 0], [-1.0, 0], [0, 1], [0, -1]])
    b = np.array([-1.0, -1.0, 1, 1])  # x <= -1 and x >= 1
    with pytest.raises(InfeasibleError) as err:
        find_initial_vertex(LinearProgram(A, b, np.zeros(2)))
    y = err.value.certificate
    assert np.all(y >= -1e-12) and np.allclose(A.T @ y, 0) and b @ y < 0


def test_non_pointed_rejected():
    A = np.array([[1.0, 0, 0], [-1.0, 0, 0]])
    with pytest.raises(DegeneracyError):
        find_initial_vertex(LinearProgram(A, np.ones(2), np.zeros(3)))


def test_cube_walk_to_opposite_corner():
    for d in (2, 3, 4):
        lp = cube_lp(d, np.ones(d))
        start = make_basis(lp, range(d, 2 * d))  # rows -x_i <= 1: the all -1 corner
        assert np.allclose(start.x, -1)
        opt, walk = solve_with_rule(lp, start, GreedyRule())
        assert np.allclose(opt.x, 1) and lp.z @ opt.x == pytest.approx(d)
        assert walk.pivot_count == d == len(walk.vertices) - 1
        check_walk(walk, d)


def test_zero_objective_returns_start():
    lp = cube_lp(3, np.zeros(3))
    start = make_basis(lp, [3, 4, 5])
    opt, walk = solve_with_rule(lp, start)
    assert opt == start and walk.pivot_count == 0


def test_klee_minty_d3_visits_all_vertices():
    lp, start = klee_minty(KleeMintySpec(3))
    opt, walk = solve_with_rule(lp, start, GreedyRule())
    assert walk.pivot_count == 7 and len(walk.distinct_points()) == 8
    verts = polytope_vertices_lp(lp.A, lp.b)
    assert {tuple(np.round(v, 9)) for v in verts} == walk.distinct_points()
    objs = [lp.z @ v.x for v in walk.vertices]
    assert all(b > a for a, b in zip(objs, objs[1:]))


def test_budget_exhaustion():
    lp, start = klee_minty(KleeMintySpec(4))
    opt, walk = solve_with_rule(lp, start, DantzigRule(), budget=3)
    assert walk.terminated == Termination.BUDGET_EXHAUSTED and walk.pivot_count == 3
    with pytest.raises(InputError):
        solve_with_rule(lp, start, budget=0)


def test_unbounded_ray_certified():
    A = np.array([[-1.0, 0], [0, -1.0]])
    lp = LinearProgram(A, np.zeros(2), np.array([1.0, 1.0]))
    opt, walk = solve_with_rule(lp, make_basis(lp, [0, 1]))
    assert opt is None and walk.terminated == Termination.UNBOUNDED
    assert lp.z @ walk.ray > 0 and np.all(A @ walk.ray <= 1e-12)


def test_cube_corner_neighbors():
    lp = cube_lp(3, np.ones(3))
    v = make_basis(lp, [0, 1, 2])
    nb = neighbors(lp, v)
    assert len(nb) == 3
    assert all(np.sum(np.abs(n.x - v.x) > 1e-9) == 1 for n in nb)


def test_simplex_vertex_neighbors():
    d = 4
    A = np.vstack([-np.eye(d), np.ones((1, d))])
    b = np.concatenate([np.zeros(d), [1.0]])
    lp = LinearProgram(A, b, np.zeros(d))
    v = make_basis(lp, range(d))
    assert len(neighbors(lp, v)) == d


@pytest.mark.parametrize("seed", range(5))
def test_neighbors_match_vertex_edge_graph(seed):
    rs = RngStream(seed, "nbr")
    while True:
        A = rs.normal((8, 3))
        if positively_spanning(A):
            break
    lp = LinearProgram.canonical(A, np.zeros(3))
    g = vertex_edge_graph(HPolytope.canonical(A))
    for i, rows in enumerate(g.tight_sets):
        v = make_basis(lp, rows[:3]) if len(rows) == 3 else None
        if v is None:
            continue
        got = {tuple(np.round(n.x, 8)) for n in neighbors(lp, v)}
        want = {tuple(np.round(g.vertices[j], 8)) for j in g.adjacency[i]}
        assert got == want


@pytest.mark.parametrize("rule", [DantzigRule, GreatestImprovementRule, BlandRule])
def test_rules_agree_with_lp_solver(rule):
    for t in range(25):
        rs = RngStream(t, "rules")
        d = 2 + t % 3
        A = rs.normal((3 * d, d))
        lp = LinearProgram(A, np.ones(3 * d), rs.child("z").normal(d))
        start = find_initial_vertex(lp, rs.child("p"))
        opt, walk = solve_with_rule(lp, start, rule())
        ref = lp_optimum(A, lp.b, lp.z)
        if ref is None:
            assert opt is None
        else:
            assert lp.z @ opt.x == pytest.approx(ref, abs=1e-8)
        check_walk(walk, d)
        assert len({v.tight_rows for v in walk.vertices}) == len(walk.vertices)


def test_brute_force_optimum_cube():
    val, x = brute_force_optimum(cube_lp(3, np.array([1.0, 2.0, 3.0])))
    assert val == pytest.approx(6) and np.allclose(x, 1)


def test_degenerate_vertex_no_cycling():
    # Square pyramid apex: four facets meet at one vertex (degenerate in d = 3).
    A = np.array([[1.0, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1], [0, 0, -1]])
    b = np.array([1.0, 1, 1, 1, 0])
    for z in itertools.product((-1.0, 0.5, 1.0), repeat=3):
        lp = LinearProgram(A, b, np.array(z))
        start = make_basis(lp, [0, 1, 2])  # apex (0, 0, 1)
        opt, walk = solve_with_rule(lp, start, DantzigRule())
        ref = lp_optimum(A, b, lp.z)
        assert lp.z @ opt.x == pytest.approx(ref, abs=1e-9)
