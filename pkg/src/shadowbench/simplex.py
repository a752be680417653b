"""Vertex-walking simplex engine with pluggable pivot rules.

The LP is ``maximize <z, x> subject to A x <= b`` with ``x`` free in R^d. A
vertex is described by ``d`` linearly independent tight rows (the basis). From
basis ``I`` the multipliers ``y`` solve ``A_I^T y = z``; the basis is optimal when
``y >= 0``, and each row with ``y_k < 0`` opens an improving edge obtained by
releasing that row.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegeneracyError,
    InfeasibleError,
    InputError,
    PreconditionError,
    UnboundedError,
)
from .numerics import RngStream

FEAS_TOL = 1e-9
MULT_TOL = 1e-9
TIE_TOL = 1e-9


def _rank(rows):
    """Rank after normalising rows, so wildly scaled constraints are judged fairly."""
    rows = np.atleast_2d(rows)
    norms = np.linalg.norm(rows, axis=1)
    norms[norms == 0] = 1.0
    return np.linalg.matrix_rank(rows / norms[:, None])


@dataclass(frozen=True)
class LinearProgram:
    A: np.ndarray
    b: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        z = np.asarray(self.z, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0] or A.shape[1] != z.shape[0]:
            raise InputError(f"inconsistent LP shapes A{A.shape} b{b.shape} z{z.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(z))):
            raise InputError("LP data must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "z", z)

    @classmethod
    def canonical(cls, A, z):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A, np.ones(A.shape[0]), z)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def d(self):
        return self.A.shape[1]

    def with_objective(self, z):
        return LinearProgram(self.A, self.b, z)

    def row_scale(self):
        return np.maximum(1.0, np.linalg.norm(self.A, axis=1))

    def slack(self, x):
        return self.b - self.A @ x


@dataclass(frozen=True)
class VertexBasis:
    tight_rows: tuple
    x: np.ndarray

    @property
    def key(self):
        return self.tight_rows


class Termination(str, enum.Enum):
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass
class WalkRecord:
    vertices: list = field(default_factory=list)
    terminated: Termination = Termination.OPTIMAL
    degenerate_pivots: int = 0
    ray: np.ndarray | None = None
    rule: str = ""
    angles: list = field(default_factory=list)

    @property
    def pivot_count(self):
        return max(len(self.vertices) - 1, 0)

    def distinct_points(self, decimals=9):
        return {tuple(np.round(v.x, decimals)) for v in self.vertices}


def make_basis(lp: LinearProgram, rows) -> VertexBasis:
    rows = tuple(sorted(int(r) for r in rows))
    if len(rows) != lp.d:
        raise InputError(f"basis needs {lp.d} rows, got {len(rows)}")
    AI = lp.A[list(rows)]
    if _rank(AI) < lp.d:
        raise InputError(f"rows {rows} are linearly dependent")
    return VertexBasis(rows, np.linalg.solve(AI, lp.b[list(rows)]))


def check_vertex(lp: LinearProgram, v: VertexBasis, tol=FEAS_TOL) -> None:
    """Raise ``InputError`` unless ``v`` is a valid basis of ``lp``."""
    rows = list(v.tight_rows)
    if len(rows) != lp.d or len(set(rows)) != lp.d or list(rows) != sorted(rows):
        raise InputError("tight_rows must be a sorted d-subset")
    AI = lp.A[rows]
    if _rank(AI) < lp.d:
        raise InputError("tight rows are rank deficient")
    scale = lp.row_scale()
    if np.max(np.abs(AI @ v.x - lp.b[rows]) / scale[rows]) > tol:
        raise InputError("basis rows are not tight at x")
    if np.any(lp.A @ v.x - lp.b > tol * scale):
        raise InputError("x violates a constraint")


def check_walk(walk: WalkRecord, d: int) -> None:
    for a, b in zip(walk.vertices, walk.vertices[1:]):
        if len(set(a.tight_rows) & set(b.tight_rows)) != d - 1:
            raise InputError(f"bases {a.tight_rows} and {b.tight_rows} are not adjacent")


# ---------------------------------------------------------------------------
# Pivot machinery
# ---------------------------------------------------------------------------


class PivotStep:
    """Everything a rule may inspect at one basis.

    ``candidates`` are basis positions whose release improves ``<z, x>``.
    ``edge(k)`` runs the ratio test for releasing position ``k`` lazily.
    """

    def __init__(self, lp: LinearProgram, rows, x):
        self.lp = lp
        self.rows = list(rows)
        self.x = x
        AI = lp.A[self.rows]
        self.Binv = np.linalg.inv(AI)
        self.y = self.Binv.T @ lp.z
        col_norms = np.linalg.norm(self.Binv, axis=0)
        znorm = np.linalg.norm(lp.z)
        self.candidates = [k for k in range(lp.d) if self.y[k] < -MULT_TOL * col_norms[k] * znorm]
        self._edges = {}

    def direction(self, k):
        return -self.Binv[:, k]

    def edge(self, k):
        if k not in self._edges:
            self._edges[k] = ratio_test(self.lp, self.rows, self.x, self.Binv, k)
        return self._edges[k]


def ratio_test(lp, rows, x, Binv, k):
    """Leave row ``rows[k]`` moving along ``r`` with ``A_I r = -e_k``.

    Returns ``(entering_row, step, direction)``; ``entering_row`` is ``None`` for an
    unbounded ray. Ties in the step length are broken lexicographically, as if
    row ``i`` had right-hand side ``b_i + eps**(i+1)``.
    """
    r = -Binv[:, k]
    A = lp.A
    rate = A @ r
    slack = lp.b - A @ x
    scale = lp.row_scale()
    mask = rate > TIE_TOL * scale * max(1.0, np.linalg.norm(r))
    mask[rows] = False
    cand = np.nonzero(mask)[0]
    if cand.size == 0:
        return None, math.inf, r
    steps = np.maximum(slack[cand], 0.0) / rate[cand]
    best = steps.min()
    tied = cand[steps <= best + TIE_TOL * max(1.0, best)]
    if tied.size > 1:
        # Lexicographic comparison of perturbed slack ratios.
        W = A[tied] @ Binv  # (t, d)
        coef = np.zeros((tied.size, lp.n))
        coef[np.arange(tied.size), tied] = 1.0
        coef[:, rows] -= W
        coef /= rate[tied][:, None]
        alive = np.arange(tied.size)
        for col in range(lp.n):
            vals = coef[alive, col]
            lo = vals.min()
            alive = alive[vals <= lo + TIE_TOL]
            if alive.size == 1:
                break
        tied = tied[alive]
    j = int(tied.min())
    return j, float(max(slack[j], 0.0) / rate[j]), r


class PivotRule:
    """Strategy interface: pick which basis position to release."""

    name = "abstract"

    def start(self, lp: LinearProgram, basis: VertexBasis) -> None:
        pass

    def select(self, step: PivotStep) -> int:
        raise NotImplementedError


class DantzigRule(PivotRule):
    """Largest objective rate: the most negative multiplier (classical greedy rule).

    Ties go to the lowest row index.
    """

    name = "dantzig"

    def select(self, step):
        return min(step.candidates, key=lambda k: (step.y[k], step.rows[k]))


class GreatestImprovementRule(PivotRule):
    """Move to the improving neighbour with the largest objective value."""

    name = "greatest-improvement"

    def select(self, step):
        def gain(k):
            j, t, _ = step.edge(k)
            return math.inf if j is None else -step.y[k] * t

        return min(step.candidates, key=lambda k: (-gain(k), step.rows[k]))


class BlandRule(PivotRule):
    name = "bland"

    def select(self, step):
        return min(step.candidates, key=lambda k: step.rows[k])


GreedyRule = DantzigRule

RULES = {r.name: r for r in (DantzigRule, GreatestImprovementRule, BlandRule)}


def default_budget(d):
    return 10 * 2**d


def solve_with_rule(lp: LinearProgram, start: VertexBasis, rule: PivotRule | None = None, budget=None):
    """Walk from ``start`` until optimal, unbounded, or out of budget.

    Returns ``(optimum, walk)`` where ``optimum`` is the final basis, or ``None``
    when an improving unbounded ray was found (stored in ``walk.ray``).
    """
    rule = rule or DantzigRule()
    budget = default_budget(lp.d) if budget is None else int(budget)
    if budget < 1:
        raise InputError("budget must be at least 1")
    check_vertex(lp, start)
    rule.start(lp, start)
    walk = WalkRecord([start], rule=rule.name)
    seen = {start.tight_rows}
    current = start
    while True:
        step = PivotStep(lp, current.tight_rows, current.x)
        if not step.candidates:
            walk.terminated = Termination.OPTIMAL
            return current, walk
        if walk.pivot_count >= budget:
            walk.terminated = Termination.BUDGET_EXHAUSTED
            return current, walk
        k = rule.select(step)
        if k not in step.candidates:
            raise PreconditionError(f"rule {rule.name} chose a non-improving row")
        j, t, r = step.edge(k)
        if j is None:
            walk.terminated = Termination.UNBOUNDED
            walk.ray = r
            return None, walk
        rows = list(current.tight_rows)
        rows[k] = j
        nxt = make_basis(lp, rows)
        if t <= TIE_TOL:
            walk.degenerate_pivots += 1
        if nxt.tight_rows in seen:
            raise DegeneracyError(f"basis {nxt.tight_rows} repeated: cycling")
        seen.add(nxt.tight_rows)
        walk.vertices.append(nxt)
        current = nxt


def neighbors(lp: LinearProgram, v: VertexBasis):
    """Adjacent vertices: release one tight row and follow the edge to its far end."""
    step = PivotStep(lp, v.tight_rows, v.x)
    out = []
    seen = set()
    for k in range(lp.d):
        j, t, r = step.edge(k)
        if j is None or t <= TIE_TOL:
            continue
        rows = list(v.tight_rows)
        rows[k] = j
        nb = make_basis(lp, rows)
        key = tuple(np.round(nb.x, 9))
        if key not in seen:
            seen.add(key)
            out.append(nb)
    return out


# ---------------------------------------------------------------------------
# Phase I
# ---------------------------------------------------------------------------


def _independent_rows(A, candidates, d):
    chosen = []
    for i in candidates:
        trial = chosen + [i]
        if _rank(A[trial]) == len(trial):
            chosen = trial
            if len(chosen) == d:
                break
    return chosen


def _purify(A, b, x, rng, objective=None):
    """Move from a feasible point to a vertex without decreasing ``objective``."""
    n, d = A.shape
    scale = np.maximum(1.0, np.linalg.norm(A, axis=1))
    for _ in range(d + 1):
        slack = b - A @ x
        tight = np.nonzero(np.abs(slack) <= FEAS_TOL * scale)[0]
        if tight.size and _rank(A[tight]) == d:
            return x, _independent_rows(A, tight, d)
        if tight.size:
            _, s, vt = np.linalg.svd(A[tight])
            rank = int(np.sum(s > 1e-12 * max(s[0], 1.0)))
            null = vt[rank:].T
        else:
            null = np.eye(d)
        r = null @ rng.normal(null.shape[1])
        if objective is not None and objective @ r < 0:
            r = -r
        moved = False
        for direction in (r, -r):
            if objective is not None and objective @ direction < -1e-14 * np.linalg.norm(direction):
                continue
            rate = A @ direction
            mask = rate > 1e-12 * scale * np.linalg.norm(direction)
            if not mask.any():
                continue
            t = np.min(np.maximum(slack[mask], 0.0) / rate[mask])
            x = x + t * direction
            moved = True
            break
        if not moved:
            raise DegeneracyError("feasible set contains a line (not pointed)")
    raise DegeneracyError("could not reach a vertex")


def find_initial_vertex(lp: LinearProgram, rng: RngStream | None = None) -> VertexBasis:
    """A vertex of the feasible set by an auxiliary-variable Phase I.

    If the origin is infeasible, solves ``max -t`` over ``A x - t <= b, t >= 0``
    from the strictly feasible point ``(0, t0)``; a positive optimum yields a
    Farkas certificate ``y >= 0, A^T y = 0, b^T y < 0``.
    """
    rng = rng or RngStream(0, "phase1")
    A, b = lp.A, lp.b
    n, d = A.shape
    if _rank(A) < d:
        raise DegeneracyError("constraint matrix has rank < d: feasible set is not pointed")
    scale = lp.row_scale()
    x0 = np.zeros(d)
    if np.all(A @ x0 - b <= FEAS_TOL * scale):
        x, rows = _purify(A, b, x0, rng)
        return make_basis(lp, rows)

    t0 = float(max(0.0, np.max(-b))) + 1.0
    A_aux = np.vstack([np.hstack([A, -np.ones((n, 1))]), np.concatenate([np.zeros(d), [-1.0]])])
    b_aux = np.concatenate([b, [0.0]])
    obj = np.concatenate([np.zeros(d), [-1.0]])
    aux = LinearProgram(A_aux, b_aux, obj)
    p, rows = _purify(A_aux, b_aux, np.concatenate([x0, [t0]]), rng, objective=obj)
    start = make_basis(aux, rows)
    opt, walk = solve_with_rule(aux, start, BlandRule(), budget=max(1000, 50 * n))
    if opt is None or walk.terminated is not Termination.OPTIMAL:
        raise DegeneracyError("phase I did not terminate")
    t_star = opt.x[-1]
    if t_star > FEAS_TOL * max(1.0, t0):
        step = PivotStep(aux, opt.tight_rows, opt.x)
        y = np.zeros(n)
        for pos, row in enumerate(opt.tight_rows):
            if row < n:
                y[row] = step.y[pos]
        raise InfeasibleError("linear program is infeasible", certificate=y)
    x = opt.x[:d]
    slack = b - A @ x
    tight = np.nonzero(np.abs(slack) <= 1e-8 * scale)[0]
    rows = _independent_rows(A, tight, d)
    if len(rows) < d:
        x, rows = _purify(A, b, x, rng)
    return make_basis(lp, rows)


def brute_force_optimum(lp: LinearProgram, budget=10**5):
    """Best objective over all feasible basic solutions (oracle for small LPs)."""
    from .geometry import HPolytope, enumerate_vertices

    verts, _ = enumerate_vertices(HPolytope(lp.A, lp.b), budget=budget)
    if len(verts) == 0:
        raise InfeasibleError("no vertices")
    vals = verts @ lp.z
    i = int(np.argmax(vals))
    return float(vals[i]), verts[i]
