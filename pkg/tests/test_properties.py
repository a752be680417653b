"""Property-based checks of the invariants each module promises."""

import math

import numpy as np
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import cofactor_det, gram_schmidt, lp_optimum, power_iteration_norm
from shadowbench.experiments import TrialStats, format_value
from shadowbench.geometry import VPolytope, hull_membership_residual, perimeter, positively_spanning, random_plane, section_polygon
from shadowbench.numerics import RngStream, exact_integer_det, singular_values
from shadowbench.shadow import shadow_path
from shadowbench.simplex import (
    BlandRule,
    DantzigRule,
    GreatestImprovementRule,
    LinearProgram,
    Termination,
    brute_force_optimum,
    check_vertex,
    check_walk,
    find_initial_vertex,
    solve_with_rule,
)

seeds = st.integers(0, 2**32 - 1)
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def matrices(max_side=6):
    shapes = st.tuples(st.integers(1, max_side), st.integers(1, max_side))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite))


def random_bounded_lp(seed):
    rs = RngStream(seed, "property-lp")
    d = int(rs.integers(2, 5))
    n = int(rs.integers(2 * d + 1, 13))
    for attempt in range(50):
        A = rs.child("A", attempt).normal((n, d))
        if positively_spanning(A):
            return LinearProgram(A, np.ones(n), rs.child("z").normal(d)), rs
    return None, rs


# -- numerics ------------------------------------------------------------------


@given(matrices())
def test_singular_values_sorted_and_nonnegative(A):
    r = singular_values(A)
    assert np.all(r.values >= 0)
    assert np.all(np.diff(r.values) <= 0)
    assert r.lambda_max == r.values[0] and r.lambda_min == r.values[-1]


@given(matrices(), seeds)
def test_singular_values_orthogonal_invariance(A, seed):
    m = A.shape[0]
    Q = gram_schmidt(np.random.default_rng(seed).standard_normal((m, m)))
    a, b = singular_values(A).values, singular_values(Q @ A).values
    assert np.allclose(a, b, rtol=0, atol=1e-8 * max(1.0, a[0]))


@given(matrices(5))
def test_lambda_max_is_operator_norm(A):
    assume(np.linalg.norm(A) > 1e-3)
    ref = power_iteration_norm(A)
    # power iteration converges slowly when the top two values nearly tie
    s = np.linalg.svd(A, compute_uv=False)
    assume(len(s) == 1 or s[1] < 0.99 * s[0])
    assert abs(singular_values(A).lambda_max - ref) <= 1e-6 * ref


@given(st.integers(1, 3).flatmap(lambda n: arrays(np.int64, (n, n), elements=st.sampled_from([-1, 1]))))
def test_exact_det_matches_cofactor(S):
    assert exact_integer_det(S) == cofactor_det(S.tolist())


@given(st.integers(1, 6).flatmap(lambda n: arrays(np.int64, (n, n), elements=st.integers(-50, 50))))
def test_exact_det_integer_matrices(S):
    assert exact_integer_det(S) == cofactor_det(S.tolist())


@given(seeds, st.text(max_size=12), st.integers(0, 10**6))
def test_rng_stream_is_pure(seed, label, counter):
    a = RngStream(seed, label, counter)
    b = RngStream(seed, label, counter)
    assert np.array_equal(a.normal(17), b.normal(17))
    assert np.array_equal(a.child("x").uniform(5), b.child("x").uniform(5))
    assert not np.array_equal(RngStream(seed, label, counter + 1).normal(4), RngStream(seed, label, counter).normal(4))


# -- simplex and shadow --------------------------------------------------------


@given(seeds, st.sampled_from([DantzigRule, GreatestImprovementRule, BlandRule]))
def test_walk_invariants_and_brute_force(seed, rule):
    lp, rs = random_bounded_lp(seed)
    assume(lp is not None)
    start = find_initial_vertex(lp, rs.child("p1"))
    check_vertex(lp, start)
    opt, walk = solve_with_rule(lp, start, rule())
    check_walk(walk, lp.d)
    assert len({v.tight_rows for v in walk.vertices}) == len(walk.vertices)
    assert walk.terminated == Termination.OPTIMAL
    best, _ = brute_force_optimum(lp)
    assert abs(lp.z @ opt.x - best) <= 1e-8 * max(1.0, abs(best))
    assert abs(best - lp_optimum(lp.A, lp.b, lp.z)) <= 1e-7 * max(1.0, abs(best))


@given(seeds)
def test_shadow_path_terminal_and_monotone_angles(seed):
    lp, rs = random_bounded_lp(seed)
    assume(lp is not None)
    start = find_initial_vertex(lp, rs.child("p1"))
    z0 = lp.A[list(start.tight_rows)].T @ rs.child("w").uniform(lp.d, 0.5, 1.5)
    walk = shadow_path(lp, z0, start)
    check_walk(walk, lp.d)
    assert walk.terminated == Termination.OPTIMAL
    assert all(b >= a for a, b in zip(walk.angles, walk.angles[1:]))
    best, _ = brute_force_optimum(lp)
    assert abs(lp.z @ walk.vertices[-1].x - best) <= 1e-8 * max(1.0, abs(best))


# -- geometry ------------------------------------------------------------------


@given(seeds, st.integers(3, 4), st.integers(5, 12), st.floats(0.01, 3.0))
def test_section_perimeter_and_containment(seed, d, n, scale):
    rs = RngStream(seed, "property-section")
    K = VPolytope(scale * rs.normal((n, d)))
    E = random_plane(rs.child("E"), d)
    poly = section_polygon(K, E)
    assert perimeter(poly) <= 2 * math.pi * K.max_norm() * (1 + 1e-12)
    for v in poly.vertices:
        assert hull_membership_residual(K, E.lift(v)) <= 1e-8 * max(1.0, scale)


# -- experiments ---------------------------------------------------------------


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=200))
def test_trial_stats_consistency(values):
    s = TrialStats.from_values(values)
    q = s.quantiles
    assert s.min <= q[0] <= q[1] <= q[2] <= s.max
    assert math.isclose(s.std_error, np.std(values, ddof=1) / math.sqrt(len(values)), rel_tol=1e-9, abs_tol=1e-9)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_value_round_trips(x):
    text = format_value(x)
    assert float(text) == x
    assert text != "-0"
