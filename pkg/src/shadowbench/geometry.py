"""Polytopes in H- and V-form, polar duality, facets, planar sections, graphs.

All routines are brute force on purpose: dimensions and generator counts are
desk scale, and exhaustive enumeration is easy to audit.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, QhullError

from .errors import (
    BudgetError,
    DegenerateSpanError,
    InputError,
    RankDeficiencyError,
    UnboundedError,
    UnsupportedFormError,
)

FACET_TOL = 1e-9
MERGE_TOL = 1e-9
DEFAULT_BUDGET = 10**6
_CHUNK = 20000


@dataclass(frozen=True)
class HPolytope:
    """``{x : normals @ x <= rhs}``."""

    normals: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.normals, dtype=float))
        b = np.asarray(self.rhs, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise InputError(f"{A.shape[0]} normals but {b.shape[0]} right-hand sides")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InputError("non-finite polytope data")
        object.__setattr__(self, "normals", A)
        object.__setattr__(self, "rhs", b)

    @classmethod
    def canonical(cls, normals):
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        return cls(normals, np.ones(normals.shape[0]))

    @property
    def dim(self):
        return self.normals.shape[1]

    def __len__(self):
        return self.normals.shape[0]

    def contains(self, x, tol=FACET_TOL):
        scale = np.maximum(1.0, np.linalg.norm(self.normals, axis=1))
        return bool(np.all(self.normals @ np.asarray(x, float) - self.rhs <= tol * scale))


@dataclass(frozen=True)
class VPolytope:
    """``conv(points)``, or ``conv(0, points)`` when ``include_origin`` is set."""

    points: np.ndarray
    include_origin: bool = False

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.points, dtype=float))
        if not np.all(np.isfinite(P)):
            raise InputError("non-finite generator")
        object.__setattr__(self, "points", P)

    @property
    def dim(self):
        return self.points.shape[1]

    def generators(self):
        if self.include_origin:
            return np.vstack([np.zeros(self.dim), self.points])
        return self.points

    def max_norm(self):
        return float(np.max(np.linalg.norm(self.generators(), axis=1)))


@dataclass(frozen=True)
class Plane:
    """Two-dimensional subspace with orthonormal basis ``(u, v)``."""

    u: np.ndarray
    v: np.ndarray
    provenance: tuple | None = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if abs(np.linalg.norm(u) - 1) > 1e-12 or abs(np.linalg.norm(v) - 1) > 1e-12 or abs(u @ v) > 1e-12:
            raise InputError("plane basis must be orthonormal")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def dim(self):
        return self.u.shape[0]

    def coords(self, x):
        """Coordinates of the orthogonal projection of ``x`` in the ``(u, v)`` frame."""
        x = np.asarray(x, dtype=float)
        return np.stack([x @ self.u, x @ self.v], axis=-1)

    def lift(self, st):
        st = np.asarray(st, dtype=float)
        return st[..., :1] * self.u + st[..., 1:2] * self.v

    def direction(self, theta):
        return math.cos(theta) * self.u + math.sin(theta) * self.v


@dataclass
class Polygon2D:
    """Convex polygon, counterclockwise, in plane coordinates."""

    vertices: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    degeneracies: int = 0

    @property
    def edge_count(self):
        k = len(self.vertices)
        return k if k >= 3 else 0

    @property
    def is_empty(self):
        return len(self.vertices) == 0


@dataclass(frozen=True)
class Facet:
    index_set: tuple
    normal: np.ndarray
    offset: float


@dataclass
class FacetList:
    facets: list
    generators: np.ndarray
    method: str = "brute"

    def __len__(self):
        return len(self.facets)

    def __iter__(self):
        return iter(self.facets)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def cube(d, half_width=1.0):
    """``{|x_i| <= half_width}`` as ``2d`` rows."""
    eye = np.eye(d)
    return HPolytope(np.vstack([eye, -eye]), np.full(2 * d, float(half_width)))


def cross_polytope(d):
    eye = np.eye(d)
    return VPolytope(np.vstack([eye, -eye]))


def polar_of_H(P: HPolytope) -> VPolytope:
    """Polar body of ``{<a_i, x> <= 1}``, i.e. ``conv(0, a_1, ..., a_n)``."""
    if not np.allclose(P.rhs, 1.0, rtol=0, atol=1e-12):
        raise UnsupportedFormError("polar duality is only defined here for right-hand side 1")
    return VPolytope(P.normals.copy(), include_origin=True)


def plane_from_span(z0, z) -> Plane:
    """Orthonormal basis of ``span(z0, z)`` with ``u`` along ``z0``."""
    z0 = np.asarray(z0, dtype=float)
    z = np.asarray(z, dtype=float)
    n0, n1 = np.linalg.norm(z0), np.linalg.norm(z)
    if n0 == 0 or n1 == 0:
        raise DegenerateSpanError("spanning vectors must be nonzero")
    u = z0 / n0
    w = z - (z @ u) * u
    # sin of the angle between z0 and z
    if np.linalg.norm(w) / n1 < 1e-10:
        raise DegenerateSpanError("z0 and z are collinear")
    w = w - (w @ u) * u
    v = w / np.linalg.norm(w)
    return Plane(u, v, provenance=(z0.copy(), z.copy()))


def random_plane(rng, d) -> Plane:
    """Uniformly distributed plane: two orthonormalised Gaussian vectors."""
    while True:
        g = rng.normal((2, d))
        try:
            E = plane_from_span(g[0], g[1])
        except DegenerateSpanError:
            continue
        return Plane(E.u, E.v)


# ---------------------------------------------------------------------------
# Feasibility helpers
# ---------------------------------------------------------------------------


def positively_spanning(vectors, margin_cap=1e6) -> bool:
    """True when the vectors positively span R^d.

    Equivalently ``0`` is interior to their convex hull, and ``{x : <a_i, x> <= 1}``
    is bounded. Checked with an LP for ``y >= 1`` (capped) with ``sum y_i a_i = 0``.
    """
    A = np.atleast_2d(np.asarray(vectors, dtype=float))
    n, d = A.shape
    if n <= d or np.linalg.matrix_rank(A) < d:
        return False
    res = linprog(
        np.zeros(n), A_eq=A.T, b_eq=np.zeros(d), bounds=[(1.0, margin_cap)] * n, method="highs"
    )
    return res.status == 0


def hull_membership_residual(K: VPolytope, y) -> float:
    """Distance-like residual of ``y`` from ``K`` via nonnegative least squares.

    Solves ``min ||G^T lam - y||^2 + ||sum(lam) - 1||^2`` over ``lam >= 0``; zero
    exactly when ``y`` lies in the hull.
    """
    G = K.generators()
    M = np.vstack([G.T, np.ones(len(G))])
    rhs = np.concatenate([np.asarray(y, dtype=float), [1.0]])
    _, res = nnls(M, rhs, maxiter=50 * M.shape[1])
    return float(res)


def plane_meets_hull(K: VPolytope, E: Plane) -> bool:
    """LP test for ``K ∩ E != {}``: a convex combination of generators orthogonal to ``E^perp``."""
    G = K.generators()
    d = K.dim
    if d == 2:
        return True
    basis = np.linalg.svd(np.vstack([E.u, E.v]))[2][2:]  # orthonormal complement of E
    A_eq = np.vstack([basis @ G.T, np.ones(len(G))])
    b_eq = np.concatenate([np.zeros(d - 2), [1.0]])
    res = linprog(np.zeros(len(G)), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * len(G), method="highs")
    return res.status == 0


# ---------------------------------------------------------------------------
# Facets
# ---------------------------------------------------------------------------


def _affine_rank(G):
    return np.linalg.matrix_rank(G[1:] - G[0]) if len(G) > 1 else 0


def _hyperplane_normals(G, subsets):
    """Unit normals of the affine hulls of ``G[subsets]`` via generalised cross products.

    Rows with (near) zero normal mark affinely dependent subsets.
    """
    pts = G[subsets]
    diffs = pts[:, 1:, :] - pts[:, :1, :]
    B, dm1, d = diffs.shape
    normals = np.empty((B, d))
    if d == 1:
        normals[:] = 1.0
    else:
        for k in range(d):
            minor = np.delete(diffs, k, axis=2)
            normals[:, k] = (-1) ** k * np.linalg.det(minor)
    norms = np.linalg.norm(normals, axis=1)
    return normals, norms


def enumerate_facets(K: VPolytope, budget=DEFAULT_BUDGET, tol=FACET_TOL) -> FacetList:
    """All facets of ``K`` by exhaustive search over ``d``-subsets of generators.

    A subset spans a facet when every generator lies on one side of its affine
    hull. Each facet is reported once, with its full tight set as ``index_set``
    (generator indices count the origin as index 0 when it is included).
    """
    G = K.generators()
    N, d = G.shape
    if N < d + 1 or _affine_rank(G) < d:
        raise RankDeficiencyError("generators do not affinely span the ambient space")
    total = math.comb(N, d)
    if total > budget:
        raise BudgetError(f"C({N},{d}) = {total} subsets exceeds budget {budget}")
    scale = max(1.0, float(np.max(np.abs(G))))
    seen = {}
    combos = itertools.combinations(range(N), d)
    while True:
        block = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, _CHUNK)), dtype=np.int64)
        if block.size == 0:
            break
        subsets = block.reshape(-1, d)
        normals, norms = _hyperplane_normals(G, subsets)
        ok = norms > 1e-12 * scale ** (d - 1)
        subsets, normals, norms = subsets[ok], normals[ok], norms[ok]
        normals = normals / norms[:, None]
        offsets = np.einsum("bd,bd->b", normals, G[subsets[:, 0]])
        slack = G @ normals.T - offsets  # (N, B)
        thr = tol * scale
        below = np.all(slack <= thr, axis=0)
        above = np.all(slack >= -thr, axis=0)
        for b in np.nonzero(below | above)[0]:
            sign = 1.0 if below[b] else -1.0
            tight = tuple(np.nonzero(np.abs(slack[:, b]) <= thr)[0].tolist())
            if tight not in seen:
                seen[tight] = Facet(tight, sign * normals[b], float(sign * offsets[b]))
    facets = sorted(seen.values(), key=lambda f: f.index_set)
    return FacetList(facets, G, "brute")


def qhull_facets(K: VPolytope, tol=FACET_TOL) -> FacetList:
    """Facets from Qhull, merged by tight set; for inputs beyond the brute-force budget."""
    G = K.generators()
    N, d = G.shape
    if N < d + 1 or _affine_rank(G) < d:
        raise RankDeficiencyError("generators do not affinely span the ambient space")
    try:
        hull = ConvexHull(G)
    except QhullError as exc:
        raise RankDeficiencyError(str(exc)) from exc
    scale = max(1.0, float(np.max(np.abs(G))))
    seen = {}
    for eq in hull.equations:
        normal, offset = eq[:d], -eq[d]
        slack = G @ normal - offset
        tight = tuple(np.nonzero(np.abs(slack) <= tol * scale)[0].tolist())
        if tight not in seen:
            seen[tight] = Facet(tight, normal.copy(), float(offset))
    return FacetList(sorted(seen.values(), key=lambda f: f.index_set), G, "qhull")


def hull_facets(K: VPolytope, method="auto", budget=DEFAULT_BUDGET) -> FacetList:
    if method == "brute":
        return enumerate_facets(K, budget=budget)
    if method == "qhull":
        return qhull_facets(K)
    if method != "auto":
        raise InputError(f"unknown facet method {method!r}")
    G = K.generators()
    if math.comb(G.shape[0], G.shape[1]) <= budget:
        return enumerate_facets(K, budget=budget)
    return qhull_facets(K)


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------


def _clip(poly, a, off):
    """Clip a convex polygon (list of 2-vectors) to ``a . p <= off``."""
    if not poly:
        return poly
    vals = [a[0] * p[0] + a[1] * p[1] - off for p in poly]
    out = []
    k = len(poly)
    for i in range(k):
        p, fp = poly[i], vals[i]
        q, fq = poly[(i + 1) % k], vals[(i + 1) % k]
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            lam = fp / (fp - fq)
            out.append((p[0] + lam * (q[0] - p[0]), p[1] + lam * (q[1] - p[1])))
    return out


def _cleanup(pts, tol):
    """Merge near-duplicate vertices and drop collinear ones; returns (array, events)."""
    events = 0
    pts = list(pts)
    changed = True
    while changed and len(pts) >= 2:
        changed = False
        k = len(pts)
        for i in range(k):
            p, q = pts[i], pts[(i + 1) % k]
            if math.hypot(q[0] - p[0], q[1] - p[1]) <= tol:
                del pts[(i + 1) % k]
                events += 1
                changed = True
                break
        if changed:
            continue
        if len(pts) >= 3:
            k = len(pts)
            for i in range(k):
                a, b, c = pts[i - 1], pts[i], pts[(i + 1) % k]
                cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
                span = math.hypot(c[0] - a[0], c[1] - a[1])
                if cross <= tol * max(span, 1.0):
                    del pts[i]
                    events += 1
                    changed = True
                    break
    return np.array(pts, dtype=float).reshape(-1, 2), events


def section_polygon(K: VPolytope, E: Plane, facets: FacetList | None = None, method="auto") -> Polygon2D:
    """The polygon ``K ∩ E`` in the ``(u, v)`` coordinates of ``E``.

    ``K`` equals the intersection of its facet halfspaces, so the section is the
    intersection of the induced halfplanes in ``E``; a square that contains
    ``K ∩ E`` is clipped against each of them. Vertices closer than
    ``MERGE_TOL`` are merged and collinear vertices dropped; each such event is
    counted in ``Polygon2D.degeneracies``.
    """
    if K.dim != E.dim:
        raise InputError("plane and polytope dimensions differ")
    if facets is None:
        G = K.generators()
        if _affine_rank(G) < K.dim and not plane_meets_hull(K, E):
            return Polygon2D()
        facets = hull_facets(K, method=method)
    radius = 2.0 * K.max_norm() + 1.0
    poly = [(-radius, -radius), (radius, -radius), (radius, radius), (-radius, radius)]
    for f in facets:
        a = (float(f.normal @ E.u), float(f.normal @ E.v))
        poly = _clip(poly, a, f.offset)
        if not poly:
            return Polygon2D()
    verts, events = _cleanup(poly, MERGE_TOL)
    if len(verts) and np.max(np.abs(verts)) >= radius * (1 - 1e-12):
        raise RankDeficiencyError("section not bounded by the facet list")
    if 0 < len(verts) < 3:
        events += 1
    return Polygon2D(verts, events)


def perimeter(poly: Polygon2D) -> float:
    V = np.asarray(poly.vertices, dtype=float)
    if len(V) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.roll(V, -1, axis=0) - V, axis=1)))


# ---------------------------------------------------------------------------
# Vertex-edge graph
# ---------------------------------------------------------------------------


@dataclass
class VertexEdgeGraph:
    vertices: np.ndarray
    tight_sets: list
    adjacency: list

    @property
    def edge_count(self):
        return sum(len(a) for a in self.adjacency) // 2


def enumerate_vertices(P: HPolytope, budget=DEFAULT_BUDGET, tol=FACET_TOL):
    """Vertices of ``P`` with their tight row sets, by trying every ``d``-subset of rows."""
    A, b = P.normals, P.rhs
    n, d = A.shape
    total = math.comb(n, d)
    if total > budget:
        raise BudgetError(f"C({n},{d}) = {total} bases exceeds budget {budget}")
    row_scale = np.maximum(1.0, np.linalg.norm(A, axis=1))
    found = {}
    combos = itertools.combinations(range(n), d)
    while True:
        block = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, _CHUNK)), dtype=np.int64)
        if block.size == 0:
            break
        subsets = block.reshape(-1, d)
        AI = A[subsets]
        cond = np.linalg.cond(AI)
        good = np.isfinite(cond) & (cond < 1e12)
        if not good.any():
            continue
        subsets, AI = subsets[good], AI[good]
        x = np.linalg.solve(AI, b[subsets][..., None])[..., 0]
        slack = x @ A.T - b  # (B, n)
        feasible = np.all(slack <= tol * row_scale, axis=1)
        for i in np.nonzero(feasible)[0]:
            tight = tuple(np.nonzero(np.abs(slack[i]) <= tol * row_scale)[0].tolist())
            if tight not in found:
                found[tight] = x[i]
    keys = sorted(found)
    verts = np.array([found[k] for k in keys]).reshape(-1, d)
    return verts, keys


def vertex_edge_graph(P: HPolytope, budget=DEFAULT_BUDGET) -> VertexEdgeGraph:
    """Vertices and edges of a bounded ``P``.

    Two vertices are adjacent exactly when the rows tight at both have rank
    ``d - 1``, which also handles degenerate vertices.
    """
    n, d = P.normals.shape
    if not positively_spanning(P.normals):
        raise UnboundedError("polytope is unbounded (rows do not positively span)")
    verts, tight = enumerate_vertices(P, budget=budget)
    V = len(verts)
    inc = np.zeros((V, n), dtype=bool)
    for i, t in enumerate(tight):
        inc[i, list(t)] = True
    shared = inc.astype(int) @ inc.T.astype(int)
    adjacency = [set() for _ in range(V)]
    for i, j in zip(*np.nonzero(np.triu(shared >= d - 1, k=1))):
        rows = np.nonzero(inc[i] & inc[j])[0]
        if np.linalg.matrix_rank(P.normals[rows]) == d - 1:
            adjacency[i].add(int(j))
            adjacency[j].add(int(i))
    return VertexEdgeGraph(verts, tight, adjacency)


def graph_diameter(graph: VertexEdgeGraph) -> int:
    """Longest shortest path, by breadth-first search from every vertex."""
    adj = graph.adjacency
    best = 0
    for s in range(len(adj)):
        dist = {s: 0}
        queue = deque([s])
        while queue:
            a = queue.popleft()
            for b in adj[a]:
                if b not in dist:
                    dist[b] = dist[a] + 1
                    queue.append(b)
        if len(dist) != len(adj):
            raise RankDeficiencyError("vertex-edge graph is disconnected")
        best = max(best, max(dist.values()))
    return best
