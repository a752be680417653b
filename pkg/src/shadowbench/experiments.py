"""Config-driven Monte Carlo experiments.

Every trial draws its randomness from ``RngStream(master_seed, experiment, i)``
and nothing else, so a trial can be replayed on its own and the CSV does not
depend on the number of worker threads. Acceptance thresholds live in the
parameter map next to the instance sizes; the runners only compare against them.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .ensembles import (
    KINDS,
    KleeMintySpec,
    MatrixEnsembleSpec,
    SmoothedPolytopeSpec,
    haimovich_flip,
    klee_minty,
    load_centers,
    sample_smoothed_polytope,
    sigma_cap,
)
from .errors import (
    BudgetError,
    ConfigError,
    ConvergenceError,
    InfeasibleError,
    InputError,
    RankDeficiencyError,
    UnboundedError,
)
from .geometry import HPolytope, Plane, graph_diameter, perimeter, positively_spanning, random_plane, section_polygon, vertex_edge_graph
from .numerics import MAX_EXACT_ORDER, RngStream, bareiss, batched_sign_det, batched_singular_values, exact_integer_det
from .shadow import shadow_path
from .simplex import DantzigRule, LinearProgram, Termination, find_initial_vertex, solve_with_rule

DERIVATION_RULE = (
    "trial i draws from RngStream(master_seed, experiment, i): BLAKE2b-128 of "
    "(master_seed, experiment, i) keys a Philox generator; sub-streams use child(label)"
)

HAIMOVICH_CAVEAT = (
    "proxy measurement: a sampled polytope LP with each inequality reversed with "
    "probability 1/2, started at a vertex optimal for a random conic combination "
    "of its tight rows; this is not the exact averaging ensemble of the d/2 theorem"
)

# name -> parameter defaults. Keys ending in a threshold role are used only in
# the final comparisons, never in sampling.
DEFAULTS = {
    "section-size": dict(
        n=16, d=3, sigma=0.04, trials=200, random_plane=False, centers="", facet_method="auto",
        budget=10**6, perimeter_rtol=1e-9,
    ),
    "shadow-walk": dict(
        n=10, d=2, sigma=0.05, trials=500, centers="", max_attempts_factor=50, budget=0, se_multiplier=3.0,
    ),
    "km-cube": dict(d=8, eps=[1.0 / 3.0], budget=0),
    "sv-tail": dict(
        n=50, trials=20000, eps=[0.05, 0.1, 0.2], ensemble="gaussian", sigma=1.0, center=0.0,
        tail_factor=2.0, sst_constant=1.823, se_multiplier=3.0, singular_cap=0.01,
    ),
    "sv-bounds": dict(
        n=400, d=100, trials=200, t=[2.0], ensemble="gaussian", sigma=1.0,
        se_multiplier=3.0, scale_low=0.1, scale_high=10.0,
    ),
    "singularity": dict(n=4, mode="exact", trials=100000, long_run=False, se_multiplier=3.0),
    "submatrix-min": dict(n=12, d=4, trials=100, ensemble="gaussian", sigma=1.0, collapse_threshold=1e-12, positive_floor=1e-13),
    "diameter": dict(n=8, d=3, sigma=0.05, trials=50, centers="", budget=10**6),
}
ALIASES = {"km": "km-cube"}
EXPERIMENTS = tuple(DEFAULTS)

_LIST_KEYS = {"eps", "t"}
_ANY_KEYS = {"trial_index": -1}


def _coerce(key, value, default):
    """Parse ``value`` (possibly text from a config file) to the type of ``default``."""
    try:
        if key in _LIST_KEYS:
            if isinstance(value, str):
                value = [v for v in value.replace(",", " ").split() if v]
            elif np.isscalar(value):
                value = [value]
            return [float(v) for v in value]
        if isinstance(default, bool):
            if isinstance(value, str):
                low = value.strip().lower()
                if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                    raise ValueError(value)
                return low in ("1", "true", "yes", "on")
            return bool(value)
        if isinstance(default, int):
            f = float(value)
            if f != int(f):
                raise ValueError(value)
            return int(f)
        if isinstance(default, float):
            return float(value)
        return str(value).strip()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"parameter {key!r}: cannot parse {value!r}") from exc


def read_config_file(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


@dataclass
class ExperimentConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    master_seed: int = 0
    output_path: str | None = None
    threads: int = 1

    def __post_init__(self):
        self.experiment = ALIASES.get(self.experiment, self.experiment)
        if self.experiment not in DEFAULTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        defaults = dict(DEFAULTS[self.experiment], **_ANY_KEYS)
        unknown = set(self.parameters) - set(defaults)
        if unknown:
            raise ConfigError(f"{self.experiment}: unknown parameter(s) {sorted(unknown)}")
        merged = dict(defaults)
        for key, value in self.parameters.items():
            merged[key] = _coerce(key, value, defaults[key])
        self.parameters = merged
        self.master_seed = int(self.master_seed)
        self.threads = int(self.threads)
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        _validate(self.experiment, self.parameters)

    def __getitem__(self, key):
        return self.parameters[key]

    @classmethod
    def from_sources(cls, experiment, config_path=None, overrides=None):
        """Defaults, then the config file, then explicit overrides (e.g. CLI flags)."""
        values = read_config_file(config_path) if config_path else {}
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        from_file = values.pop("experiment", None)
        experiment = experiment or from_file
        seed = values.pop("seed", values.pop("master_seed", 0))
        out = values.pop("out", values.pop("output_path", None))
        threads = values.pop("threads", 1)
        try:
            seed, threads = int(seed), int(threads)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"seed and threads must be integers: {exc}") from exc
        return cls(experiment, values, seed, out, threads)

    def trial_stream(self, i) -> RngStream:
        return RngStream(self.master_seed, self.experiment, i)

    def echo(self):
        return {
            "experiment": self.experiment,
            "parameters": self.parameters,
            "master_seed": self.master_seed,
            "output_path": self.output_path,
            "threads": self.threads,
        }


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _validate(name, p):
    _require(p.get("trials", 1) >= 1, "trials must be positive")
    if "sigma" in p:
        _require(p["sigma"] > 0, "sigma must be positive")
    if "ensemble" in p:
        _require(p["ensemble"] in KINDS, f"ensemble must be one of {KINDS}")
    n, d = p.get("n"), p.get("d")
    if name == "section-size":
        _require(3 <= d <= 6, "section-size needs d in [3, 6]")
        _require(n <= 512, "section-size needs n <= 512")
        _require(n >= d + 1, "section-size needs n >= d + 1")
        _require(p["facet_method"] in ("auto", "brute", "qhull"), "facet_method must be auto, brute or qhull")
        if p["facet_method"] == "brute":
            _require(math.comb(n, d) <= p["budget"], f"C({n},{d}) exceeds the facet budget {p['budget']}")
    elif name == "shadow-walk":
        _require(2 <= d <= 4, "shadow-walk needs d in [2, 4]")
        _require(n <= 30, "shadow-walk needs n <= 30")
        _require(n > d, "shadow-walk needs n > d")
    elif name == "km-cube":
        _require(2 <= d <= 12, "km-cube needs 2 <= d <= 12")
        _require(len(p["eps"]) == 1 and 0 < p["eps"][0] < 0.5, "km-cube needs a single eps in (0, 1/2)")
    elif name == "sv-tail":
        _require(1 <= n <= 200, "sv-tail needs 1 <= n <= 200")
        _require(len(p["eps"]) > 0 and min(p["eps"]) >= 0, "sv-tail needs a nonempty list of eps >= 0")
        _require(p["trials"] >= 1000, "sv-tail needs at least 1000 trials")
    elif name == "sv-bounds":
        _require(1 <= d <= n, "sv-bounds needs 1 <= d <= n")
        _require(p["trials"] >= 100, "sv-bounds needs at least 100 trials")
        _require(len(p["t"]) > 0 and min(p["t"]) >= 0, "sv-bounds needs a nonempty list of t >= 0")
    elif name == "singularity":
        _require(p["mode"] in ("exact", "montecarlo"), "mode must be exact or montecarlo")
        _require(n >= 1, "n must be positive")
        if p["mode"] == "exact":
            _require(
                n <= 4 or (n == 5 and p["long_run"]),
                f"exact enumeration of 2^{n * n} sign matrices is over budget; use mode = montecarlo",
            )
        else:
            _require(n <= 50, "Monte Carlo singularity needs n <= 50")
    elif name == "submatrix-min":
        _require(1 <= d <= n, "submatrix-min needs 1 <= d <= n")
        _require(math.comb(n, d) <= 10**5, f"C({n},{d}) submatrices exceeds the budget 1e5")
        _require(p["trials"] <= 1000, "submatrix-min allows at most 1000 trials")
    elif name == "diameter":
        _require(3 <= d <= 4, "diameter needs d in [3, 4]")
        _require(d + 1 <= n <= 14, "diameter needs d + 1 <= n <= 14")


# ---------------------------------------------------------------------------
# Statistics and results
# ---------------------------------------------------------------------------


@dataclass
class TrialStats:
    count: int
    mean: float
    std_error: float
    min: float
    max: float
    quantiles: tuple
    violation_count: int = 0
    flags: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, values, violation_count=0, flags=None):
        x = np.asarray(values, dtype=float)
        x = x[~np.isnan(x)]
        flags = dict(flags or {})
        if x.size == 0:
            nan = float("nan")
            return cls(0, nan, nan, nan, nan, (nan, nan, nan), violation_count, flags)
        se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        q = np.quantile(x, [0.05, 0.5, 0.95])
        return cls(int(x.size), float(x.mean()), se, float(x.min()), float(x.max()),
                   tuple(float(v) for v in q), int(violation_count), flags)

    @property
    def median(self):
        return self.quantiles[1]

    def as_dict(self):
        return {
            "count": self.count, "mean": self.mean, "std_error": self.std_error,
            "min": self.min, "max": self.max, "q05": self.quantiles[0], "q50": self.quantiles[1],
            "q95": self.quantiles[2], "violation_count": self.violation_count, "flags": self.flags,
        }


@dataclass
class RunManifest:
    config: dict
    master_seed: int
    version: str
    derivation_rule: str
    duration_seconds: float
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    caveats: list = field(default_factory=list)

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")


def _jsonable(v):
    if isinstance(v, TrialStats):
        return v.as_dict()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    columns: list
    rows: list
    stats: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    caveats: list = field(default_factory=list)
    duration: float = 0.0

    @property
    def ok(self):
        return all(self.checks.values())

    def manifest(self) -> RunManifest:
        summary = dict(self.summary)
        summary.update({f"stats_{k}": v for k, v in self.stats.items()})
        return RunManifest(
            self.config.echo(), self.config.master_seed, __version__, DERIVATION_RULE,
            self.duration, summary, dict(self.checks), list(self.caveats),
        )


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % (float(v) + 0.0)  # no "-0"
    return str(v)


def write_csv(result: ExperimentResult, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.columns)
        for row in result.rows:
            w.writerow([format_value(row[c]) for c in result.columns])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_outputs(result: ExperimentResult, path=None):
    path = path or result.config.output_path
    if not path:
        return None
    write_csv(result, path)
    result.manifest().write(f"{path}.manifest")
    return path


def _map_trials(cfg: ExperimentConfig, fn, indices):
    """Run ``fn`` over trial indices; results come back in index order."""
    indices = list(indices)
    if cfg.threads <= 1 or len(indices) <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, indices))


def _trial_indices(cfg):
    i = cfg["trial_index"]
    return [i] if i >= 0 else range(cfg["trials"])


def _centers(cfg, n, d):
    if not cfg["centers"]:
        return None
    try:
        return load_centers(cfg["centers"])
    except (OSError, InputError) as exc:
        raise ConfigError(str(exc)) from exc


def _polytope_spec(cfg):
    try:
        return SmoothedPolytopeSpec(cfg["n"], cfg["d"], cfg["sigma"], _centers(cfg, cfg["n"], cfg["d"]), cfg.master_seed)
    except InputError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Section size of smoothed polytopes
# ---------------------------------------------------------------------------

SECTION_COLUMNS = [
    "trial", "seed_index", "n", "d", "sigma", "sigma_valid", "edges", "empty", "perimeter",
    "max_norm", "degenerate_flags", "perimeter_ok", "error",
]


def section_size_trial(cfg: ExperimentConfig, spec: SmoothedPolytopeSpec, i):
    rng = cfg.trial_stream(i)
    K = sample_smoothed_polytope(spec, rng.child("points"))
    d = spec.d
    if cfg["random_plane"]:
        E = random_plane(rng.child("plane"), d)
    else:
        E = Plane(np.eye(d)[0], np.eye(d)[1])
    row = dict(trial=i, seed_index=i, n=spec.n, d=d, sigma=spec.sigma, sigma_valid=spec.sigma_valid,
               max_norm=K.max_norm(), error="")
    try:
        poly = section_polygon(K, E, method=cfg["facet_method"])
    except (BudgetError, RankDeficiencyError, ConvergenceError) as exc:
        row.update(edges=0, empty=False, perimeter=float("nan"), degenerate_flags=0, perimeter_ok=True,
                   error=type(exc).__name__)
        return row
    per = perimeter(poly)
    row.update(
        edges=poly.edge_count, empty=poly.is_empty, perimeter=per, degenerate_flags=poly.degeneracies,
        perimeter_ok=per <= 2 * math.pi * row["max_norm"] * (1 + cfg["perimeter_rtol"]),
    )
    return row


def run_section_size(cfg: ExperimentConfig) -> ExperimentResult:
    spec = _polytope_spec(cfg)
    rows = _map_trials(cfg, lambda i: section_size_trial(cfg, spec, i), _trial_indices(cfg))
    ok = [r for r in rows if not r["error"]]
    violations = sum(not r["perimeter_ok"] for r in ok)
    flags = {
        "degenerate": sum(r["degenerate_flags"] > 0 for r in ok),
        "empty_sections": sum(r["empty"] for r in ok),
        "budget_exhaustions": len(rows) - len(ok),
    }
    stats = {
        "edges": TrialStats.from_values([r["edges"] for r in ok], violations, flags),
        "edges_nonempty": TrialStats.from_values([r["edges"] for r in ok if not r["empty"]]),
        "perimeter": TrialStats.from_values([r["perimeter"] for r in ok]),
        "max_norm": TrialStats.from_values([r["max_norm"] for r in rows]),
    }
    summary = dict(sigma_cap=sigma_cap(spec.d, spec.n), sigma_valid=spec.sigma_valid,
                   plane="random" if cfg["random_plane"] else "span(e1, e2)")
    checks = {"perimeter_bound": violations == 0}
    return ExperimentResult(cfg, SECTION_COLUMNS, rows, stats, summary, checks)


# ---------------------------------------------------------------------------
# Shadow-vertex walk on randomly flipped LPs
# ---------------------------------------------------------------------------

WALK_COLUMNS = ["trial", "seed_index", "n", "d", "feasible", "pivots", "terminated", "degenerate_pivots"]


def shadow_walk_trial(lp: LinearProgram, flip_rng, start_rng, budget=None):
    """Flip the inequalities of ``lp``, find a start vertex, and walk to the optimum of ``lp.z``.

    Returns a dict with ``feasible``, ``pivots``, ``terminated`` and
    ``degenerate_pivots``; infeasible flips report ``pivots = -1``.
    """
    flipped = haimovich_flip(lp, flip_rng)
    try:
        x0 = find_initial_vertex(flipped, start_rng.child("phase1"))
    except InfeasibleError:
        return dict(feasible=False, pivots=-1, terminated="infeasible", degenerate_pivots=0)
    weights = start_rng.child("start-objective").uniform(lp.d, 0.5, 1.5)
    z0 = flipped.A[list(x0.tight_rows)].T @ weights
    walk = shadow_path(flipped, z0, x0, budget=budget)
    return dict(feasible=True, pivots=walk.pivot_count, terminated=walk.terminated.value,
                degenerate_pivots=walk.degenerate_pivots)


def _walk_attempt(cfg, spec, i):
    rng = cfg.trial_stream(i)
    K = sample_smoothed_polytope(spec, rng.child("points"))
    lp = LinearProgram.canonical(K.points, rng.child("objective").normal(spec.d))
    budget = cfg["budget"] or None
    row = dict(trial=i, seed_index=i, n=spec.n, d=spec.d)
    row.update(shadow_walk_trial(lp, rng.child("flip"), rng.child("start"), budget))
    return row


def run_shadow_walk(cfg: ExperimentConfig) -> ExperimentResult:
    spec = _polytope_spec(cfg)
    target = cfg["trials"]
    if cfg["trial_index"] >= 0:
        rows = [_walk_attempt(cfg, spec, cfg["trial_index"])]
    else:
        # Attempts run in fixed-size batches; the kept set is "the first `target`
        # feasible attempts by index", which does not depend on scheduling.
        limit = cfg["max_attempts_factor"] * target
        rows, start = [], 0
        while sum(r["feasible"] for r in rows) < target and start < limit:
            stop = min(start + target, limit)
            rows += _map_trials(cfg, lambda i: _walk_attempt(cfg, spec, i), range(start, stop))
            start = stop
        kept, cut = 0, len(rows)
        for k, r in enumerate(rows):
            kept += r["feasible"]
            if kept == target:
                cut = k + 1
                break
        rows = rows[:cut]
    feas = [r for r in rows if r["feasible"]]
    flags = {
        "infeasible": len(rows) - len(feas),
        "unbounded": sum(r["terminated"] == Termination.UNBOUNDED.value for r in feas),
        "budget_exhaustions": sum(r["terminated"] == Termination.BUDGET_EXHAUSTED.value for r in feas),
        "degenerate": sum(r["degenerate_pivots"] > 0 for r in feas),
    }
    st = TrialStats.from_values([r["pivots"] for r in feas], 0, flags)
    bound = spec.d / 2 + cfg["se_multiplier"] * st.std_error
    summary = dict(feasible_trials=len(feas), attempts=len(rows), mean_pivots=st.mean, bound=bound,
                   half_dimension=spec.d / 2)
    checks = {"haimovich_proxy": st.count > 0 and st.mean <= bound}
    if cfg["trial_index"] < 0:
        checks["enough_feasible"] = len(feas) == target
    return ExperimentResult(cfg, WALK_COLUMNS, rows, {"pivots": st}, summary, checks, [HAIMOVICH_CAVEAT])


# ---------------------------------------------------------------------------
# Klee-Minty self-test
# ---------------------------------------------------------------------------


def run_km(cfg: ExperimentConfig) -> ExperimentResult:
    d, eps = cfg["d"], cfg["eps"][0]
    lp, start = klee_minty(KleeMintySpec(d, eps))
    _, walk = solve_with_rule(lp, start, DantzigRule(), cfg["budget"] or None)
    columns = ["step", "seed_index", "objective"] + [f"x{j + 1}" for j in range(d)]
    rows = []
    for step, v in enumerate(walk.vertices):
        row = dict(step=step, seed_index=0, objective=float(lp.z @ v.x))
        row.update({f"x{j + 1}": float(v.x[j]) for j in range(d)})
        rows.append(row)
    distinct = len(walk.distinct_points())
    summary = dict(pivots=walk.pivot_count, distinct_vertices=distinct, expected_pivots=2**d - 1,
                   terminated=walk.terminated.value, rule=walk.rule, epsilon=eps)
    checks = {
        "pivot_count": walk.pivot_count == 2**d - 1,
        "distinct_vertices": distinct == 2**d,
        "optimal": walk.terminated == Termination.OPTIMAL,
    }
    return ExperimentResult(cfg, columns, rows, {}, summary, checks)


# ---------------------------------------------------------------------------
# Smallest singular value tail
# ---------------------------------------------------------------------------


def _eps_label(e):
    return "hit_%g" % e


def _ensemble(cfg, m, n):
    center = cfg.parameters.get("center", 0.0) or None
    return MatrixEnsembleSpec(cfg["ensemble"], m, n, center, cfg["sigma"], unit_variance=True)


def _is_integer_ensemble(cfg):
    c = cfg.parameters.get("center", 0.0)
    return cfg["ensemble"] == "rademacher" and float(c).is_integer() and float(cfg["sigma"]).is_integer()


def _exact_singular(M):
    rows = [[int(v) for v in r] for r in np.rint(M).astype(np.int64)]
    return bareiss(rows) == 0


def sv_tail_trial(cfg, ens, i):
    n = cfg["n"]
    A = ens.sample(cfg.trial_stream(i))
    lam = float(batched_singular_values(A[None])[0, -1])
    row = dict(trial=i, seed_index=i, n=n, ensemble=cfg["ensemble"], center=cfg["center"],
               sigma=cfg["sigma"], lambda_min=lam, scaled=math.sqrt(n) * lam)
    exact = _is_integer_ensemble(cfg)
    for e in cfg["eps"]:
        if e == 0:
            row[_eps_label(e)] = _exact_singular(A) if exact else lam == 0.0
        else:
            row[_eps_label(e)] = lam <= e / math.sqrt(n)
    return row


def run_sv_tail(cfg: ExperimentConfig) -> ExperimentResult:
    n = cfg["n"]
    ens = _ensemble(cfg, n, n)
    rows = _map_trials(cfg, lambda i: sv_tail_trial(cfg, ens, i), _trial_indices(cfg))
    columns = ["trial", "seed_index", "n", "ensemble", "center", "sigma", "lambda_min", "scaled"]
    columns += [_eps_label(e) for e in cfg["eps"]]
    gaussian = cfg["ensemble"] == "gaussian"
    standard = gaussian and cfg["center"] == 0 and cfg["sigma"] == 1
    k = cfg["se_multiplier"]
    stats = {"lambda_min": TrialStats.from_values([r["lambda_min"] for r in rows]),
             "scaled": TrialStats.from_values([r["scaled"] for r in rows])}
    per_eps, tail_ok, sst_ok, sing_ok = {}, True, True, True
    sst_violations = 0
    for e in cfg["eps"]:
        st = TrialStats.from_values([float(r[_eps_label(e)]) for r in rows])
        entry = dict(eps=e, frequency=st.mean, std_error=st.std_error)
        if gaussian and e > 0:
            entry["sst_bound"] = cfg["sst_constant"] * e / cfg["sigma"]
            if st.mean > entry["sst_bound"] + k * st.std_error:
                sst_violations += 1
        if standard and e > 0:
            lo, hi = e / cfg["tail_factor"], e * cfg["tail_factor"]
            entry["tail_window"] = (lo, hi)
            tail_ok &= lo <= st.mean <= hi
        if e == 0:
            sing_ok &= st.mean < cfg["singular_cap"]
        stats[_eps_label(e)] = st
        per_eps[_eps_label(e)] = entry
    sst_ok = sst_violations == 0
    checks = {}
    if standard and any(e > 0 for e in cfg["eps"]):
        checks["tail_window"] = bool(tail_ok)
    if gaussian and any(e > 0 for e in cfg["eps"]):
        checks["sst_bound"] = bool(sst_ok)
        stats["lambda_min"].violation_count = sst_violations
    if 0 in cfg["eps"]:
        checks["singularity_cap"] = bool(sing_ok)
    summary = dict(per_eps=per_eps, exact_singularity=_is_integer_ensemble(cfg))
    return ExperimentResult(cfg, columns, rows, stats, summary, checks)


# ---------------------------------------------------------------------------
# Extreme singular values of tall matrices
# ---------------------------------------------------------------------------


def _t_label(t):
    return "exceed_t%g" % t


def sv_bounds_trial(cfg, ens, i):
    n, d = cfg["n"], cfg["d"]
    A = ens.sample(cfg.trial_stream(i))
    s = batched_singular_values(A[None])[0]
    lmax, lmin = float(s[0]), float(s[-1])
    gap = math.sqrt(n) - math.sqrt(d)
    row = dict(trial=i, seed_index=i, n=n, d=d, lambda_min=lmin, lambda_max=lmax,
               ratio_min=lmin / gap if gap > 0 else float("nan"), scaled_min=math.sqrt(n) * lmin)
    for t in cfg["t"]:
        row[_t_label(t)] = lmin < gap - t or lmax > math.sqrt(n) + math.sqrt(d) + t
    return row


def run_sv_bounds(cfg: ExperimentConfig) -> ExperimentResult:
    n, d = cfg["n"], cfg["d"]
    ens = _ensemble(cfg, n, d)
    rows = _map_trials(cfg, lambda i: sv_bounds_trial(cfg, ens, i), _trial_indices(cfg))
    columns = ["trial", "seed_index", "n", "d", "lambda_min", "lambda_max", "ratio_min", "scaled_min"]
    columns += [_t_label(t) for t in cfg["t"]]
    stats = {key: TrialStats.from_values([r[key] for r in rows])
             for key in ("lambda_min", "lambda_max", "ratio_min", "scaled_min")}
    rn, rd = math.sqrt(n), math.sqrt(d)
    summary = dict(gordon_lambda_max=(rn, rn + rd), gordon_lambda_min=(rn - rd, rn))
    checks = {}
    gaussian = cfg["ensemble"] == "gaussian" and cfg["sigma"] == 1
    if gaussian and n > d:
        checks["gordon_lambda_max"] = rn <= stats["lambda_max"].mean <= rn + rd
        checks["gordon_lambda_min"] = rn - rd <= stats["lambda_min"].mean <= rn
    conc = {}
    for t in cfg["t"]:
        st = TrialStats.from_values([float(r[_t_label(t)]) for r in rows])
        bound = 2 * math.exp(-t * t / 2)
        conc[_t_label(t)] = dict(t=t, frequency=st.mean, std_error=st.std_error, bound=bound)
        stats[_t_label(t)] = st
        if gaussian:
            checks[f"concentration_t{t:g}"] = st.mean <= bound + cfg["se_multiplier"] * st.std_error
    summary["concentration"] = conc
    if n == d:
        med = stats["scaled_min"].median
        summary["median_scaled_min"] = med
        checks["square_scale"] = cfg["scale_low"] <= med <= cfg["scale_high"]
    return ExperimentResult(cfg, columns, rows, stats, summary, checks)


# ---------------------------------------------------------------------------
# Singularity of random sign matrices
# ---------------------------------------------------------------------------


def _sign_matrices(n):
    """All ``2**(n*n)`` sign matrices of order ``n``, in binary counting order."""
    N = n * n
    idx = np.arange(2**N, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(N)) & 1
    return (2 * bits - 1).reshape(-1, n, n)


def exact_singular_probability(n) -> Fraction:
    """Fraction of singular ``n x n`` sign matrices, by full enumeration.

    Orders up to 4 use ``exact_integer_det`` matrix by matrix; order 5 (2**25
    matrices) runs the vectorised int64 Bareiss in chunks.
    """
    if n <= 4:
        S = _sign_matrices(n)
        singular = sum(exact_integer_det(M) == 0 for M in S)
        return Fraction(int(singular), len(S))
    if n == 5:
        total, singular, chunk = 2**25, 0, 2**20
        for lo in range(0, total, chunk):
            idx = np.arange(lo, lo + chunk, dtype=np.int64)
            S = (2 * ((idx[:, None] >> np.arange(25)) & 1) - 1).reshape(-1, 5, 5)
            singular += int(np.count_nonzero(batched_sign_det(S) == 0))
        return Fraction(singular, total)
    raise ConfigError(f"exact enumeration at n = {n} is over budget; use Monte Carlo mode")


def sign_matrix_det(rng: RngStream, n):
    S = rng.signs((n, n)).astype(np.int64)
    return exact_integer_det(S) if n <= MAX_EXACT_ORDER else bareiss(S.tolist())


def run_singularity(cfg: ExperimentConfig) -> ExperimentResult:
    n = cfg["n"]
    if cfg["mode"] == "exact":
        columns = ["n", "seed_index", "singular", "total", "probability"]
        rows, probs = [], []
        for k in range(1, n + 1):
            p = exact_singular_probability(k)
            probs.append(p)
            rows.append(dict(n=k, seed_index=0, singular=p.numerator * (2 ** (k * k) // p.denominator),
                             total=2 ** (k * k), probability=float(p)))
        tail = probs[1:]  # from order 2 on
        summary = dict(probabilities={k + 1: p for k, p in enumerate(probs)})
        checks = {"strictly_decreasing_from_2": all(a > b for a, b in zip(tail, tail[1:]))}
        return ExperimentResult(cfg, columns, rows, {}, summary, checks)

    def trial(i):
        det = sign_matrix_det(cfg.trial_stream(i), n)
        return dict(trial=i, seed_index=i, n=n, det=det, singular=det == 0)

    rows = _map_trials(cfg, trial, _trial_indices(cfg))
    st = TrialStats.from_values([float(r["singular"]) for r in rows])
    summary = dict(frequency=st.mean, std_error=st.std_error,
                   ci95=(st.mean - 1.96 * st.std_error, st.mean + 1.96 * st.std_error))
    checks = {}
    if n <= 4:
        p = float(exact_singular_probability(n))
        se = math.sqrt(p * (1 - p) / st.count)
        summary.update(exact=p, exact_std_error=se)
        checks["agrees_with_exact"] = abs(st.mean - p) <= cfg["se_multiplier"] * se
    return ExperimentResult(cfg, ["trial", "seed_index", "n", "det", "singular"], rows,
                            {"singular": st}, summary, checks)


# ---------------------------------------------------------------------------
# Minimum over square submatrices
# ---------------------------------------------------------------------------


def submatrix_min(A):
    """Smallest ``lambda_min`` over all ``d x d`` row-submatrices of an ``n x d`` matrix.

    Returns ``(value, rows)`` for the minimising subset.
    """
    A = np.asarray(A, dtype=float)
    n, d = A.shape
    if n < d:
        raise InputError("need at least d rows")
    subsets = np.array(list(itertools.combinations(range(n), d)))
    s = batched_singular_values(A[subsets])[:, -1]
    k = int(np.argmin(s))
    return float(s[k]), tuple(int(i) for i in subsets[k])


def run_submatrix_min(cfg: ExperimentConfig) -> ExperimentResult:
    n, d = cfg["n"], cfg["d"]
    ens = _ensemble(cfg, n, d)

    def trial(i):
        value, rows = submatrix_min(ens.sample(cfg.trial_stream(i)))
        return dict(trial=i, seed_index=i, n=n, d=d, min_lambda=value, scaled=math.sqrt(n) * value,
                    collapsed=value < cfg["collapse_threshold"], argmin=" ".join(map(str, rows)))

    rows = _map_trials(cfg, trial, _trial_indices(cfg))
    collapsed = sum(r["collapsed"] for r in rows)
    stats = {"min_lambda": TrialStats.from_values([r["min_lambda"] for r in rows], 0, {"collapsed": collapsed}),
             "scaled": TrialStats.from_values([r["scaled"] for r in rows])}
    checks = {}
    if cfg["ensemble"] in ("gaussian", "uniform"):
        checks["all_positive"] = all(r["min_lambda"] > cfg["positive_floor"] for r in rows)
    columns = ["trial", "seed_index", "n", "d", "min_lambda", "scaled", "collapsed", "argmin"]
    return ExperimentResult(cfg, columns, rows, stats, {"submatrices": math.comb(n, d)}, checks)


# ---------------------------------------------------------------------------
# Diameter of polars of smoothed polytopes
# ---------------------------------------------------------------------------

DIAMETER_COLUMNS = [
    "trial", "seed_index", "n", "d", "sigma", "bounded", "vertices", "edges", "diameter",
    "hirsch", "hirsch_ok", "kalai_kleitman", "error",
]


def diameter_trial(cfg, spec, i):
    n, d = spec.n, spec.d
    K = sample_smoothed_polytope(spec, cfg.trial_stream(i).child("points"))
    row = dict(trial=i, seed_index=i, n=n, d=d, sigma=spec.sigma, hirsch=n - d,
               kalai_kleitman=float(n) ** (math.log2(d) + 2), error="")
    if not positively_spanning(K.points):
        row.update(bounded=False, vertices=0, edges=0, diameter=-1, hirsch_ok=True, error="origin-not-interior")
        return row
    try:
        graph = vertex_edge_graph(HPolytope.canonical(K.points), budget=cfg["budget"])
        diam = graph_diameter(graph)
    except (UnboundedError, BudgetError, RankDeficiencyError) as exc:
        row.update(bounded=True, vertices=0, edges=0, diameter=-1, hirsch_ok=True, error=type(exc).__name__)
        return row
    row.update(bounded=True, vertices=len(graph.vertices), edges=graph.edge_count, diameter=diam,
               hirsch_ok=diam <= n - d)
    return row


def run_diameter(cfg: ExperimentConfig) -> ExperimentResult:
    spec = _polytope_spec(cfg)
    rows = _map_trials(cfg, lambda i: diameter_trial(cfg, spec, i), _trial_indices(cfg))
    ok = [r for r in rows if not r["error"]]
    flags = {"skipped_unbounded": sum(not r["bounded"] for r in rows),
             "errors": sum(bool(r["error"]) and r["bounded"] for r in rows)}
    st = TrialStats.from_values([r["diameter"] for r in ok], sum(not r["hirsch_ok"] for r in ok), flags)
    summary = dict(hirsch=spec.n - spec.d, kalai_kleitman=float(spec.n) ** (math.log2(spec.d) + 2))
    return ExperimentResult(cfg, DIAMETER_COLUMNS, rows, {"diameter": st}, summary, {})


RUNNERS = {
    "section-size": run_section_size,
    "shadow-walk": run_shadow_walk,
    "km-cube": run_km,
    "sv-tail": run_sv_tail,
    "sv-bounds": run_sv_bounds,
    "singularity": run_singularity,
    "submatrix-min": run_submatrix_min,
    "diameter": run_diameter,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    t0 = time.perf_counter()
    result = RUNNERS[cfg.experiment](cfg)
    result.duration = time.perf_counter() - t0
    return result
