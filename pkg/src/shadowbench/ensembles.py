"""Reproducible random and adversarial instance generators."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .geometry import VPolytope
from .numerics import RngStream, gaussian_matrix, rademacher_matrix, uniform_matrix
from .simplex import LinearProgram, VertexBasis, make_basis


class SigmaCapWarning(UserWarning):
    """Noise level above the smoothed-analysis cap 1/(6 sqrt(d log n))."""


def sigma_cap(d, n):
    return 1.0 / (6.0 * math.sqrt(d * math.log(n)))


def sphere_points(rng: RngStream, n, d):
    g = rng.normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass
class SmoothedPolytopeSpec:
    """Gaussian perturbation of ``n`` centres of norm at most one.

    When ``centers`` is omitted they are drawn once, uniformly from the unit
    sphere, from the stream ``(seed, "centers")`` and then kept fixed.
    """

    n: int
    d: int
    sigma: float
    centers: np.ndarray | None = None
    seed: int = 0
    sigma_valid: bool = field(init=False)

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InputError("n and d must be positive")
        if not self.sigma > 0:
            raise InputError("sigma must be positive")
        if self.centers is None:
            self.centers = sphere_points(RngStream(self.seed, "centers"), self.n, self.d)
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if self.centers.shape != (self.n, self.d):
            raise InputError(f"centers shape {self.centers.shape} != {(self.n, self.d)}")
        if np.any(np.linalg.norm(self.centers, axis=1) > 1.0 + 1e-12):
            raise InputError("centers must have norm at most 1")
        self.sigma_valid = self.n >= 2 and self.sigma <= sigma_cap(self.d, self.n)


def load_centers(path):
    """Centres from text: one point per line, whitespace-separated coordinates."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                rows.append([float(t) for t in line.split()])
    if not rows or len({len(r) for r in rows}) != 1:
        raise InputError(f"{path}: expected a non-empty rectangular list of points")
    return np.array(rows)


def _stream(spec, rng, label, trial):
    return rng if rng is not None else RngStream(spec.seed, label, trial)


def sample_smoothed_polytope(spec: SmoothedPolytopeSpec, rng: RngStream | None = None, trial=0) -> VPolytope:
    """``K = conv(a_1..a_n)`` with ``a_i = centre_i + sigma * g_i``."""
    if not spec.sigma_valid:
        warnings.warn(
            f"sigma={spec.sigma} exceeds cap {sigma_cap(spec.d, max(spec.n, 2)):.4g}", SigmaCapWarning, stacklevel=2
        )
    rng = _stream(spec, rng, "smoothed", trial)
    points = gaussian_matrix(rng, spec.n, spec.d, center=spec.centers, sigma=spec.sigma)
    return VPolytope(points, include_origin=False)


def sample_bounded_perturbation(spec: SmoothedPolytopeSpec, law="sign_cube", rng=None, trial=0) -> VPolytope:
    """``a_i = centre_i + sigma * theta_i`` with ``theta`` from ``{-1,1}^d`` or ``[-1,1]^d``."""
    rng = _stream(spec, rng, f"bounded-{law}", trial)
    if law == "sign_cube":
        theta = rademacher_matrix(rng, spec.n, spec.d)
    elif law == "solid_cube":
        theta = uniform_matrix(rng, spec.n, spec.d)
    else:
        raise InputError(f"unknown perturbation law {law!r}")
    return VPolytope(spec.centers + spec.sigma * theta)


def haimovich_flip(lp: LinearProgram, rng: RngStream) -> LinearProgram:
    """Independently reverse each inequality with probability 1/2.

    A reversed row ``<a_i, x> >= 1`` is stored as ``<-a_i, x> <= -1``.
    """
    if not np.allclose(lp.b, 1.0):
        raise InputError("haimovich_flip expects the canonical form b = 1")
    flips = rng.coin_flips(lp.n)
    sign = np.where(flips, -1.0, 1.0)
    return LinearProgram(lp.A * sign[:, None], lp.b * sign, lp.z)


@dataclass(frozen=True)
class KleeMintySpec:
    d: int
    epsilon: float = 1.0 / 3.0

    def __post_init__(self):
        if not 2 <= self.d <= 12:
            raise InputError(f"Klee-Minty dimension must be in [2, 12], got {self.d}")
        if not 0 < self.epsilon < 0.5:
            raise InputError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")


def klee_minty(spec: KleeMintySpec):
    """Deformed cube ``0 <= x_1 <= 1``, ``eps x_{j-1} <= x_j <= 1 - eps x_{j-1}``; maximise ``x_d``.

    Returns ``(lp, start)`` with ``start`` the basis at ``x = 0``. Both rows of
    coordinate ``j`` (0-based) are multiplied by ``(2/eps)**j``. This leaves the
    cube unchanged; it orders the multipliers at the start as ``-eps**(d-1)/2**j``,
    so the largest-coefficient rule follows the monotone path through all
    ``2**d`` vertices instead of jumping straight up in ``x_d``.
    """
    d, eps = spec.d, spec.epsilon
    A = np.zeros((2 * d, d))
    b = np.zeros(2 * d)
    for j in range(d):
        w = (2.0 / eps) ** j
        A[2 * j, j] = -w
        A[2 * j + 1, j] = w
        if j > 0:
            A[2 * j, j - 1] = eps * w
            A[2 * j + 1, j - 1] = eps * w
        b[2 * j + 1] = w
    z = np.zeros(d)
    z[-1] = 1.0
    lp = LinearProgram(A, b, z)
    start = make_basis(lp, range(0, 2 * d, 2))
    return lp, start


# ---------------------------------------------------------------------------
# Matrix ensembles
# ---------------------------------------------------------------------------

KINDS = ("gaussian", "rademacher", "uniform")


def _min_subgaussian_moment(tail, grid):
    """Smallest B with ``tail(t) <= 2 exp(-t^2/B^2)`` on ``grid`` (bisection)."""
    lo, hi = 1e-3, 10.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.all(tail(grid) <= 2 * np.exp(-(grid**2) / mid**2) + 1e-15):
            hi = mid
        else:
            lo = mid
    return hi


def subgaussian_moment(kind, unit_variance=False):
    """Documented subgaussian moment B of one entry of the named law."""
    if kind == "gaussian":
        return math.sqrt(2.0)
    if kind == "rademacher":
        return 1.0 / math.sqrt(math.log(2.0))
    if kind == "uniform":
        grid = np.linspace(1e-4, 1.0, 20001)
        b = _min_subgaussian_moment(lambda t: np.clip(1.0 - t, 0.0, 1.0), grid)
        return b * math.sqrt(3.0) if unit_variance else b
    raise InputError(f"unknown ensemble kind {kind!r}")


@dataclass
class MatrixEnsembleSpec:
    kind: str
    m: int
    n: int
    center: np.ndarray | float | None = None
    sigma: float = 1.0
    unit_variance: bool = False
    subgaussian_moment_note: float = field(init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown ensemble kind {self.kind!r}")
        if self.m < 1 or self.n < 1:
            raise InputError("matrix dimensions must be positive")
        if not self.sigma > 0:
            raise InputError("sigma must be positive")
        self.subgaussian_moment_note = subgaussian_moment(self.kind, self.unit_variance)

    @property
    def entry_variance(self):
        base = {"gaussian": 1.0, "rademacher": 1.0, "uniform": 1.0 / 3.0}[self.kind]
        if self.kind == "uniform" and self.unit_variance:
            base = 1.0
        return base * self.sigma**2

    def sample(self, rng: RngStream):
        if self.kind == "gaussian":
            return gaussian_matrix(rng, self.m, self.n, center=self.center, sigma=self.sigma)
        if self.kind == "rademacher":
            M = rademacher_matrix(rng, self.m, self.n)
        else:
            M = uniform_matrix(rng, self.m, self.n)
            if self.unit_variance:
                M = M * math.sqrt(3.0)
        M = self.sigma * M
        if self.center is not None:
            M = M + np.asarray(self.center, dtype=float)
        return M


def subgaussian_moment_probe(spec: MatrixEnsembleSpec, p, trials, rng: RngStream):
    """Empirical ``(E|xi|^p)^(1/p)`` of one standardised entry of the ensemble."""
    if not 1 <= p <= 20:
        raise InputError("p must lie in [1, 20]")
    if trials < 1000:
        raise InputError("trials must be at least 1000")
    unit = MatrixEnsembleSpec(spec.kind, 1, int(trials), None, 1.0, spec.unit_variance)
    xi = unit.sample(rng).ravel()
    return float(np.mean(np.abs(xi) ** p) ** (1.0 / p))
