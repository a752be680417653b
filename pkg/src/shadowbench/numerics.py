"""Numeric substrate: seeded streams, singular values, exact determinants.

Vectors and matrices are plain ``numpy`` float64 arrays. Every function here
is pure; randomness only enters through an explicit :class:`RngStream`.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceError, ExactOverflowError, InputError

__all__ = [
    "RngStream",
    "SingularValueReport",
    "as_matrix",
    "singular_values",
    "batched_singular_values",
    "exact_integer_det",
    "batched_sign_det",
    "gaussian_matrix",
    "rademacher_matrix",
    "uniform_matrix",
]

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 60
SVD_RESIDUAL_TOL = 1e-10
MAX_EXACT_ENTRY = 2**30
MAX_EXACT_ORDER = 12


def as_matrix(A, name="A"):
    A = np.array(A, dtype=float)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InputError(f"{name} must be a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} has non-finite entries")
    return A


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------


class RngStream:
    """Counter-based random stream.

    The output sequence is a pure function of ``(master_seed, label, counter)``:
    the triple is hashed with BLAKE2b into a 128-bit Philox key, so streams for
    different labels or counters are independent and no state is shared between
    trials. ``child`` derives a sub-stream without touching this one.

    Gaussian variates use the Box-Muller transform on Philox uniforms
    (``sqrt(-2 log(1-u1)) * (cos, sin)(2 pi u2)``); both outputs are used.
    """

    def __init__(self, master_seed: int, label: str = "", counter: int = 0):
        self.master_seed = int(master_seed)
        self.label = str(label)
        self.counter = int(counter)
        digest = hashlib.blake2b(
            f"{self.master_seed}|{self.label}|{self.counter}".encode(), digest_size=16
        ).digest()
        key = int.from_bytes(digest, "little")
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, label={self.label!r}, counter={self.counter})"

    def child(self, label: str, counter: int = 0) -> "RngStream":
        return RngStream(self.master_seed, f"{self.label}#{self.counter}/{label}", counter)

    def uniform(self, size=None, low=0.0, high=1.0):
        return low + (high - low) * self._gen.random(size)

    def normal(self, size=None):
        shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        half = (count + 1) // 2
        u1 = self._gen.random(half)
        u2 = self._gen.random(half)
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        angle = 2.0 * np.pi * u2
        out = np.empty(2 * half)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        out = out[:count]
        return float(out[0]) if not shape else out.reshape(shape)

    def signs(self, size=None):
        bits = self._gen.integers(0, 2, size=size)
        return 2.0 * bits - 1.0

    def coin_flips(self, n: int):
        """``n`` fair coins as a bool array (True means tails / flip)."""
        return self._gen.integers(0, 2, size=n).astype(bool)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)


# ---------------------------------------------------------------------------
# Singular values (one-sided Jacobi)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingularValueReport:
    values: np.ndarray
    lambda_min: float
    lambda_max: float
    condition_number: float
    residual: float = 0.0
    sweeps: int = 0


@njit(cache=True, nogil=True)
def _jacobi_kernel(X, Vt, want_vectors, tol, max_sweeps):
    """Cyclic one-sided Jacobi on the rows of ``X`` (in place).

    Returns the number of sweeps used, or -1 when ``max_sweeps`` is exhausted.
    Squared row norms are refreshed each sweep and updated per rotation with
    ``alpha - t*gamma`` / ``beta + t*gamma``. A pair is left alone when
    ``|gamma| <= tol * sqrt(alpha * beta)`` or when ``|gamma|`` is below
    ``1e-28 * ||X||_F^2``: two rows that are both at rounding level (a rank
    deficient input) would otherwise rotate forever.
    """
    k, m = X.shape
    norms = np.empty(k)
    floor = 0.0
    for i in range(k):
        for r in range(m):
            floor += X[i, r] * X[i, r]
    floor *= 1e-28
    for sweep in range(max_sweeps):
        for i in range(k):
            acc = 0.0
            for r in range(m):
                acc += X[i, r] * X[i, r]
            norms[i] = acc
        rotated = False
        for p in range(k - 1):
            for q in range(p + 1, k):
                gamma = 0.0
                for r in range(m):
                    gamma += X[p, r] * X[q, r]
                alpha = norms[p]
                beta = norms[q]
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or abs(gamma) <= floor:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta == 0.0:
                    t = 1.0
                elif zeta > 0.0:
                    t = 1.0 / (zeta + np.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for r in range(m):
                    xp = X[p, r]
                    xq = X[q, r]
                    X[p, r] = c * xp - s * xq
                    X[q, r] = s * xp + c * xq
                if want_vectors:
                    for r in range(k):
                        vp = Vt[p, r]
                        vq = Vt[q, r]
                        Vt[p, r] = c * vp - s * vq
                        Vt[q, r] = s * vp + c * vq
                norms[p] = alpha - t * gamma
                norms[q] = beta + t * gamma
        if not rotated:
            return sweep + 1
    return -1


def _jacobi_rows(X, want_vectors, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Orthogonalise the rows of each ``X[b]`` (shape ``(B, k, m)``) by plane rotations.

    Rows are the columns of the original matrices. Each matrix is processed on
    its own, so results never depend on how trials were batched.
    """
    B, k, _ = X.shape
    X = np.array(X, dtype=np.float64, order="C", copy=True)
    if want_vectors:
        Vt = np.broadcast_to(np.eye(k), (B, k, k)).copy()
    else:
        Vt = np.zeros((B, 1, 1))
    sweeps = np.zeros(B, dtype=int)
    for b in range(B):
        used = _jacobi_kernel(X[b], Vt[b], want_vectors, tol, max_sweeps)
        if used < 0:
            raise ConvergenceError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")
        sweeps[b] = used
    return X, (Vt if want_vectors else None), sweeps


def _to_rows(A):
    """Reduce a stack ``(B, m, n)`` to a ``(B, k, k')`` row problem with equal singular values."""
    _, m, n = A.shape
    if m < n:
        A = np.swapaxes(A, 1, 2)
        m, n = n, m
    if m > n:
        # Tall input: Jacobi on the triangular QR factor has the same singular values.
        A = np.linalg.qr(A, mode="r")
    return np.ascontiguousarray(np.swapaxes(A, 1, 2))


def batched_singular_values(A):
    """Descending singular values of every matrix in a stack ``(B, m, n)``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 3:
        raise InputError("expected a stack of matrices with shape (B, m, n)")
    if not np.all(np.isfinite(A)):
        raise InputError("non-finite entries")
    X, _, _ = _jacobi_rows(_to_rows(A), want_vectors=False)
    sv = np.sqrt(np.sum(X * X, axis=-1))
    return -np.sort(-sv, axis=1)


def singular_values(A) -> SingularValueReport:
    """Singular values of ``A`` with the extreme values and condition number.

    Uses one-sided (Hestenes) Jacobi rotations, which compute small singular
    values to high relative accuracy. The right singular vectors are carried
    along and ``A^T A = V diag(s^2) V^T`` is checked before returning.

    >>> singular_values([[3.0, 0.0], [0.0, 4.0]]).values
    array([4., 3.])
    """
    A = as_matrix(A)
    m, n = A.shape
    work = A if m >= n else A.T
    rows = np.ascontiguousarray(work.T)[None]
    X, Vt, sweeps = _jacobi_rows(rows, want_vectors=True)
    sv = np.sqrt(np.sum(X[0] * X[0], axis=-1))
    order = np.argsort(-sv, kind="stable")
    sv = sv[order]
    V = Vt[0][order].T

    gram = work.T @ work
    recon = (V * sv**2) @ V.T
    scale = max(np.linalg.norm(gram), np.finfo(float).tiny)
    residual = float(np.linalg.norm(gram - recon) / scale)
    if residual > SVD_RESIDUAL_TOL:
        raise ConvergenceError(f"SVD residual {residual:.3g} above {SVD_RESIDUAL_TOL}")

    lo, hi = float(sv[-1]), float(sv[0])
    kappa = hi / lo if lo > 0 else math.inf
    return SingularValueReport(sv, lo, hi, kappa, residual, int(sweeps[0]))


# ---------------------------------------------------------------------------
# Exact determinants
# ---------------------------------------------------------------------------


def _integer_entries(A):
    rows = [list(r) for r in A]
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise InputError("exact_integer_det needs a non-empty square matrix")
    out = []
    for r in rows:
        row = []
        for v in r:
            if isinstance(v, (bool, np.bool_)):
                raise InputError("boolean entries are not integers")
            if isinstance(v, (int, np.integer)):
                iv = int(v)
            else:
                fv = float(v)
                if not math.isfinite(fv) or fv != int(fv):
                    raise InputError(f"entry {v!r} is not an integer")
                iv = int(fv)
            row.append(iv)
        out.append(row)
    return out


def exact_integer_det(A) -> int:
    """Determinant by Bareiss fraction-free elimination in Python integers.

    Every intermediate value is a minor of ``A``, so all divisions are exact.
    Inputs are limited to order 12 and entries of magnitude at most 2**30.
    """
    M = _integer_entries(A)
    n = len(M)
    if n > MAX_EXACT_ORDER:
        raise ExactOverflowError(f"order {n} exceeds exact-arithmetic limit {MAX_EXACT_ORDER}")
    if any(abs(v) > MAX_EXACT_ENTRY for r in M for v in r):
        raise ExactOverflowError("entry magnitude exceeds 2**30")
    return bareiss(M)


def bareiss(M) -> int:
    """Unchecked Bareiss core on a list of integer rows (modified in place).

    Python integers do not overflow, so this is exact at any order; only the
    running time grows.
    """
    n = len(M)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        pivot = M[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * pivot - M[i][k] * M[k][j]) // prev
            M[i][k] = 0
        prev = pivot
    return sign * M[n - 1][n - 1]


def batched_sign_det(S):
    """Exact determinants of a stack of small integer matrices, vectorised.

    Runs Bareiss elimination in int64, which is exact whenever Hadamard's bound
    fits; larger inputs are rejected rather than silently overflowing.
    """
    S = np.asarray(S)
    if S.ndim != 3 or S.shape[1] != S.shape[2]:
        raise InputError("expected a stack of square matrices")
    if not np.issubdtype(S.dtype, np.integer):
        if not np.all(S == np.round(S)):
            raise InputError("entries must be integers")
    M = S.astype(np.int64)
    B, n, _ = M.shape
    if n == 0:
        return np.ones(B, dtype=np.int64)
    row_norms = np.sqrt(np.sum(M.astype(float) ** 2, axis=2))
    hadamard = np.max(np.prod(np.maximum(row_norms, 1.0), axis=1)) if B else 1.0
    # Bareiss intermediates are minors (bounded by Hadamard); products of two of
    # them appear before the exact division.
    if hadamard**2 * n >= 2.0**62:
        raise ExactOverflowError("stack exceeds the int64 exact range; use exact_integer_det")
    M = M.copy()
    sign = np.ones(B, dtype=np.int64)
    prev = np.ones(B, dtype=np.int64)
    dead = np.zeros(B, dtype=bool)
    idx = np.arange(B)
    for k in range(n - 1):
        col = M[:, k:, k]
        nz = col != 0
        has = nz.any(axis=1)
        dead |= ~has
        first = np.argmax(nz, axis=1) + k
        swap = has & (first != k)
        if swap.any():
            rows_k = M[idx[swap], k, :].copy()
            M[idx[swap], k, :] = M[idx[swap], first[swap], :]
            M[idx[swap], first[swap], :] = rows_k
            sign[swap] = -sign[swap]
        pivot = np.where(dead, 1, M[:, k, k])
        sub = M[:, k + 1 :, k + 1 :]
        outer = M[:, k + 1 :, k][:, :, None] * M[:, k, k + 1 :][:, None, :]
        M[:, k + 1 :, k + 1 :] = (sub * pivot[:, None, None] - outer) // prev[:, None, None]
        M[:, k + 1 :, k] = 0
        prev = pivot
    det = sign * M[:, n - 1, n - 1]
    det[dead] = 0
    return det


# ---------------------------------------------------------------------------
# Matrix samplers
# ---------------------------------------------------------------------------


def _dims(m, n):
    m, n = int(m), int(n)
    if m < 1 or n < 1:
        raise InputError(f"dimensions must be positive, got {m}x{n}")
    return m, n


def gaussian_matrix(rng: RngStream, m, n, center=None, sigma=1.0):
    """``center + sigma * G`` with ``G`` standard normal entries."""
    m, n = _dims(m, n)
    if not sigma > 0:
        raise InputError(f"sigma must be positive, got {sigma}")
    G = rng.normal((m, n))
    if center is None:
        return sigma * G
    center = np.asarray(center, dtype=float)
    if np.ndim(center) == 0:
        return float(center) + sigma * G
    if center.shape != (m, n):
        raise InputError(f"center shape {center.shape} != {(m, n)}")
    return center + sigma * G


def rademacher_matrix(rng: RngStream, m, n):
    m, n = _dims(m, n)
    return rng.signs((m, n))


def uniform_matrix(rng: RngStream, m, n):
    """Entries uniform on [-1, 1] (variance 1/3)."""
    m, n = _dims(m, n)
    return rng.uniform((m, n), -1.0, 1.0)
