"""Shadow-vertex pivot rule: exact parametric sweep of the objective in a plane.

For a basis ``I`` the multipliers of the objective ``cos(t) u + sin(t) v`` are
``y(t) = cos(t) p + sin(t) q`` with ``p = A_I^-T u`` and ``q = A_I^-T v``. Each
component is a sinusoid ``R cos(t - a)``, so the angle at which the basis stops
being optimal is available in closed form: no discretisation is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import DegenerateSpanError, PreconditionError, UnboundedError
from .geometry import Plane, plane_from_span
from .simplex import (
    DantzigRule,
    LinearProgram,
    PivotRule,
    PivotStep,
    Termination,
    VertexBasis,
    WalkRecord,
    check_vertex,
    find_initial_vertex,
    make_basis,
    ratio_test,
    solve_with_rule,
)

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-11


def _exit_angles(Binv, E: Plane, theta):
    """For each basis position, the first angle >= theta where its multiplier turns negative."""
    p = Binv.T @ E.u
    q = Binv.T @ E.v
    R = np.hypot(p, q)
    scale = max(float(R.max()), 1e-300)
    out = np.full(len(p), math.inf)
    for k in range(len(p)):
        if R[k] <= 1e-12 * scale:
            continue
        alpha = math.atan2(q[k], p[k])
        gap = (alpha + 0.5 * math.pi - theta) % TWO_PI
        if gap < ANGLE_TOL or gap > TWO_PI - ANGLE_TOL:
            slope = -p[k] * math.sin(theta) + q[k] * math.cos(theta)
            gap = 0.0 if slope < 0 else TWO_PI
        out[k] = theta + gap
    return out


def _pick_exit(angles, rows):
    """Earliest exit; simultaneous exits (within ANGLE_TOL) go to the lowest row and are flagged."""
    first = float(np.min(angles))
    tied = [k for k in range(len(angles)) if angles[k] <= first + ANGLE_TOL]
    k = min(tied, key=lambda i: rows[i])
    return k, first, len(tied) > 1


class ShadowVertexRule(PivotRule):
    """Release the row whose multiplier vanishes first as the objective rotates to ``z``."""

    name = "shadow-vertex"

    def __init__(self, plane: Plane):
        self.plane = plane
        self.theta = 0.0
        self.angles = []
        self.ties = 0

    def start(self, lp, basis):
        self.theta = 0.0
        self.angles = [0.0]
        self.ties = 0

    def select(self, step: PivotStep) -> int:
        angles = _exit_angles(step.Binv, self.plane, self.theta)
        k, theta, tie = _pick_exit(angles, step.rows)
        self.ties += int(tie)
        self.theta = theta
        self.angles.append(theta)
        return k


def shadow_path(lp: LinearProgram, z0, x0: VertexBasis, budget=None) -> WalkRecord:
    """Shadow-vertex walk from ``x0`` (optimal for ``z0``) to the optimum of ``lp.z``.

    Every basis on the walk is optimal for some objective on the arc from ``z0``
    to ``z`` in ``span(z0, z)``. An unbounded edge ends the walk with
    ``terminated = UNBOUNDED`` and the ray in ``walk.ray``.
    """
    z0 = np.asarray(z0, dtype=float)
    check_vertex(lp, x0)
    if PivotStep(lp.with_objective(z0), x0.tight_rows, x0.x).candidates:
        raise PreconditionError("x0 is not optimal for z0")
    z = lp.z
    try:
        E = plane_from_span(z0, z)
    except DegenerateSpanError:
        if z0 @ z > 0 or not np.any(z):
            return WalkRecord([x0], Termination.OPTIMAL, rule=ShadowVertexRule.name)
        raise
    rule = ShadowVertexRule(E)
    budget = 10 * 2**lp.d if budget is None else budget
    _, walk = solve_with_rule(lp, x0, rule, budget)
    walk.degenerate_pivots += rule.ties
    walk.angles = rule.angles
    return walk


@dataclass
class SweepResult:
    shadow_vertices: list = field(default_factory=list)
    total_count: int = 0
    unbounded_arcs: list = field(default_factory=list)
    degeneracies: int = 0
    pivots: int = 0
    budget_exhausted: bool = False


def _bounded_direction(lp: LinearProgram, E: Plane):
    """An objective in ``E`` with bounded optimum: a conic combination of the rows lying in ``E``."""
    A = lp.A
    n, d = A.shape
    comp = np.linalg.svd(np.vstack([E.u, E.v]))[2][2:]
    A_eq = np.vstack([comp @ A.T, np.ones(n)]) if d > 2 else np.ones((1, n))
    b_eq = np.concatenate([np.zeros(A_eq.shape[0] - 1), [1.0]])
    res = linprog(-np.ones(n) * 0.0, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * n, method="highs")
    if res.status != 0:
        return None
    w = A.T @ res.x
    if np.linalg.norm(w) < 1e-12:
        return None
    return math.atan2(w @ E.v, w @ E.u)


def _sweep_one_way(lp, E, basis, theta0, limit, budget, record):
    """Rotate counterclockwise from ``theta0`` up to ``limit``.

    Appends ``(start, end, basis)`` arcs to ``record``; returns
    ``(end_angle, unbounded, pivots, ties, exhausted)``.
    """
    theta = theta0
    pivots = ties = 0
    current = basis
    while True:
        step = PivotStep(lp.with_objective(E.u), current.tight_rows, current.x)
        angles = _exit_angles(step.Binv, E, theta)
        k, nxt_theta, tie = _pick_exit(angles, step.rows)
        ties += int(tie)
        end = min(nxt_theta, limit)
        record.append((theta, end, current))
        if nxt_theta >= limit:
            return limit, False, pivots, ties, False
        if pivots >= budget:
            return nxt_theta, False, pivots, ties, True
        j, _, _ = ratio_test(lp, step.rows, current.x, step.Binv, k)
        if j is None:
            return nxt_theta, True, pivots, ties, False
        rows = list(current.tight_rows)
        rows[k] = j
        current = make_basis(lp, rows)
        theta = nxt_theta
        pivots += 1


def _mirror(E: Plane) -> Plane:
    return Plane(E.u, -E.v)


def shadow_sweep_count(lp: LinearProgram, E: Plane, budget=None, rng=None) -> SweepResult:
    """Rotate the objective once around ``E`` and count the vertices of the shadow ``Q(P)``.

    Arcs on which the LP is unbounded are reported and not counted. The count is
    the number of distinct optimal points among bases holding a non-empty arc.
    """
    budget = 10 * 2**lp.d if budget is None else int(budget)
    result = SweepResult()
    start = find_initial_vertex(lp.with_objective(E.u), rng)
    opt, walk = solve_with_rule(lp.with_objective(E.u), start, DantzigRule(), budget)
    theta0 = 0.0
    if opt is None:
        theta0 = _bounded_direction(lp, E)
        if theta0 is None:
            result.unbounded_arcs.append((0.0, TWO_PI))
            return result
        w = E.direction(theta0)
        opt, walk = solve_with_rule(lp.with_objective(w), start, DantzigRule(), budget)
        if opt is None:
            raise UnboundedError("no bounded objective found in the plane")
    result.pivots += walk.pivot_count

    forward = []
    end, unbounded, piv, ties, exhausted = _sweep_one_way(lp, E, opt, theta0, theta0 + TWO_PI, budget, forward)
    result.pivots += piv
    result.degeneracies += ties
    result.budget_exhausted |= exhausted
    arcs = list(forward)
    if unbounded:
        backward = []
        F = _mirror(E)
        b_end, b_unb, piv, ties, exhausted = _sweep_one_way(
            lp, F, opt, -theta0, -theta0 + TWO_PI, budget, backward
        )
        result.pivots += piv
        result.degeneracies += ties
        result.budget_exhausted |= exhausted
        for s, e, basis in backward:
            arcs.append((-e, -s, basis))
        lo = -b_end
        result.unbounded_arcs.append((end, lo + TWO_PI))
    # Canonical ordering: by arc start in [0, 2*pi).
    merged = {}
    for s, e, basis in arcs:
        if e - s <= ANGLE_TOL:
            result.degeneracies += 1
            continue
        key = basis.tight_rows
        if key in merged:
            merged[key][1] += e - s
        else:
            merged[key] = [s % TWO_PI, e - s, basis]
    entries = sorted(merged.values(), key=lambda t: t[0])
    result.shadow_vertices = [((s, s + length), basis) for s, length, basis in entries]
    points = []
    for _, basis in result.shadow_vertices:
        if not any(np.allclose(basis.x, p, atol=1e-9, rtol=1e-9) for p in points):
            points.append(basis.x)
    if len(points) != len(result.shadow_vertices):
        result.degeneracies += len(result.shadow_vertices) - len(points)
    result.total_count = len(points)
    return result
