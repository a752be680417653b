import itertools
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from oracles import cofactor_det, gram_schmidt, power_iteration_norm, singular_values_2x2
from shadowbench.errors import ExactOverflowError, InputError
from shadowbench.numerics import (
    RngStream,
    batched_sign_det,
    batched_singular_values,
    exact_integer_det,
    gaussian_matrix,
    rademacher_matrix,
    singular_values,
    uniform_matrix,
)


def test_identity_singular_values():
    r = singular_values(np.eye(2))
    assert np.allclose(r.values, [1, 1])
    assert r.condition_number == pytest.approx(1.0)


def test_diagonal_singular_values():
    r = singular_values(np.diag([3.0, 4.0]))
    assert np.allclose(r.values, [4, 3])
    assert r.condition_number == pytest.approx(4 / 3)
    assert r.lambda_max == r.values[0] and r.lambda_min == r.values[-1]


def test_shear_matches_quadratic_formula():
    A = [[1.0, 1.0], [0.0, 1.0]]
    hi, lo = singular_values_2x2(A)
    r = singular_values(np.array(A))
    assert hi == pytest.approx((1 + math.sqrt(5)) / 2, rel=1e-14)
    assert lo == pytest.approx((math.sqrt(5) - 1) / 2, rel=1e-14)
    assert r.values == pytest.approx([hi, lo], rel=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_random_2x2_against_formula(seed):
    A = np.random.default_rng(seed).standard_normal((2, 2))
    assert singular_values(A).values == pytest.approx(singular_values_2x2(A), rel=1e-10)


def test_nonfinite_rejected():
    with pytest.raises(InputError):
        singular_values(np.array([[1.0, np.nan], [0, 1]]))
    with pytest.raises(InputError):
        singular_values(np.array([[np.inf]]))


def test_singular_matrix_has_infinite_condition():
    r = singular_values(np.array([[1.0, 2.0], [2.0, 4.0]]))
    assert r.lambda_min == pytest.approx(0.0, abs=1e-14)
    assert r.condition_number == math.inf or r.condition_number > 1e14


@pytest.mark.parametrize("shape", [(5, 5), (12, 4), (4, 12), (40, 40), (1, 7), (7, 1)])
def test_rectangular_shapes_and_residual(shape):
    A = np.random.default_rng(1).standard_normal(shape)
    r = singular_values(A)
    assert len(r.values) == min(shape)
    assert np.all(np.diff(r.values) <= 0) and np.all(r.values >= 0)
    assert r.residual <= 1e-10
    assert r.lambda_max == pytest.approx(power_iteration_norm(A), rel=1e-6)


def test_small_singular_value_accuracy():
    # Graded matrix: relative accuracy on the smallest value is the point of Jacobi.
    U = gram_schmidt(np.random.default_rng(2).standard_normal((6, 6)))
    s = np.array([1.0, 1e-2, 1e-4, 1e-6, 1e-8, 1e-10])
    A = (U * s) @ gram_schmidt(np.random.default_rng(3).standard_normal((6, 6))).T
    got = singular_values(A).values
    assert got[-1] == pytest.approx(1e-10, rel=1e-4)


def test_orthogonal_invariance():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((8, 5))
    Q = gram_schmidt(rng.standard_normal((8, 8)))
    assert np.allclose(singular_values(Q @ A).values, singular_values(A).values, rtol=0, atol=1e-8)


def test_batched_equals_single():
    A = np.random.default_rng(5).standard_normal((7, 6, 6))
    batch = batched_singular_values(A)
    for k in range(7):
        assert np.array_equal(batch[k], batched_singular_values(A[k:k + 1])[0])


def test_exact_det_examples():
    assert exact_integer_det([[1, 1], [1, 1]]) == 0
    assert exact_integer_det([[1, 1], [1, -1]]) == -2
    assert exact_integer_det([[2]]) == 2
    assert exact_integer_det(np.array([[0, 1], [1, 0]], dtype=float)) == -1


@pytest.mark.parametrize("n", [1, 2, 3])
def test_exact_det_all_sign_matrices_vs_cofactor(n):
    for signs in itertools.product((-1, 1), repeat=n * n):
        M = np.array(signs).reshape(n, n)
        assert exact_integer_det(M) == cofactor_det(M)


def test_batched_sign_det_matches_exact():
    S = np.array(list(itertools.product((-1, 1), repeat=9))).reshape(-1, 3, 3)
    got = batched_sign_det(S)
    assert all(int(g) == cofactor_det(M) for g, M in zip(got, S))
    R = np.random.default_rng(6).integers(-9, 10, size=(200, 5, 5))
    assert [int(v) for v in batched_sign_det(R)] == [exact_integer_det(M) for M in R]


def test_exact_det_large_entries_exact():
    M = [[2**30, 2**30 - 1], [2**30 - 1, 2**30 - 2]]
    assert exact_integer_det(M) == 2**30 * (2**30 - 2) - (2**30 - 1) ** 2


def test_exact_det_errors():
    with pytest.raises(InputError):
        exact_integer_det([[1.5, 0], [0, 1]])
    with pytest.raises(ExactOverflowError):
        exact_integer_det([[2**31, 0], [0, 1]])
    with pytest.raises(ExactOverflowError):
        exact_integer_det(np.eye(13, dtype=int))
    with pytest.raises(InputError):
        exact_integer_det([[1, 2, 3], [4, 5, 6]])


def test_gaussian_zero_sigma_limit_and_determinism():
    C = np.arange(6.0).reshape(2, 3)
    tiny = gaussian_matrix(RngStream(1, "g"), 2, 3, center=C, sigma=1e-300)
    assert np.allclose(tiny, C, rtol=0, atol=1e-250)
    a = gaussian_matrix(RngStream(1, "g"), 4, 4)
    b = gaussian_matrix(RngStream(1, "g"), 4, 4)
    assert np.array_equal(a, b)
    with pytest.raises(InputError):
        gaussian_matrix(RngStream(1), 2, 2, sigma=0.0)


def test_gaussian_mean_clt():
    m = n = 200
    trials = 50
    total = sum(gaussian_matrix(RngStream(9, "clt", t), m, n).mean() for t in range(trials)) / trials
    assert abs(total) <= 4 / math.sqrt(m * n * trials)


def test_gaussian_moments():
    x = RngStream(3, "moments").normal(200000)
    assert abs(x.mean()) < 5 / math.sqrt(2e5)
    assert x.var() == pytest.approx(1.0, abs=0.02)
    assert np.mean(x**4) == pytest.approx(3.0, abs=0.1)


def test_rademacher_and_uniform_support():
    R = rademacher_matrix(RngStream(2), 100, 100)
    assert set(np.unique(R)) == {-1.0, 1.0}
    assert abs(R.mean()) <= 0.05
    U = uniform_matrix(RngStream(2), 50, 50)
    assert U.min() >= -1 and U.max() <= 1
    assert U.var() == pytest.approx(1 / 3, abs=0.03)


def test_stream_purity_and_independence():
    a = RngStream(7, "x", 3).normal(10)
    b = RngStream(7, "x", 3).normal(10)
    c = RngStream(7, "y", 3).normal(10)
    d = RngStream(7, "x", 4).normal(10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    # children depend on the parent's counter as well as its label
    assert not np.array_equal(RngStream(7, "x", 3).child("k").normal(3), RngStream(7, "x", 4).child("k").normal(3))


def test_stream_thread_independence():
    def draw(i):
        return RngStream(11, "t", i).normal(50)

    serial = [draw(i) for i in range(32)]
    with ThreadPoolExecutor(8) as pool:
        parallel = list(pool.map(draw, range(32)))
    assert all(np.array_equal(s, p) for s, p in zip(serial, parallel))


def test_coin_flips_binomial_chi2():
    from scipy.stats import binom, chisquare

    counts = np.array([RngStream(5, "coins", t).coin_flips(10).sum() for t in range(1000)])
    obs = np.bincount(counts, minlength=11)
    exp = 1000 * binom.pmf(np.arange(11), 10, 0.5)
    # pool sparse tails
    obs_p = np.concatenate([[obs[:2].sum()], obs[2:9], [obs[9:].sum()]])
    exp_p = np.concatenate([[exp[:2].sum()], exp[2:9], [exp[9:].sum()]])
    assert chisquare(obs_p, exp_p).pvalue > 1e-3
