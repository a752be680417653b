"""``shadowbench <experiment> [options]``: run one experiment, write CSV and manifest.

Exit codes: 0 success, 1 configuration error, 2 failed self-test assertion,
3 numerical budget failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import BudgetError, ConfigError, ConvergenceError, DegeneracyError, InputError
from .experiments import ALIASES, EXPERIMENTS, TrialStats, run_experiment, write_outputs, ExperimentConfig

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT, EXIT_BUDGET = 0, 1, 2, 3

# Experiments whose checks are assertions about exact behaviour, not reports.
SELF_TESTS = {"km-cube"}


def build_parser():
    p = argparse.ArgumentParser(prog="shadowbench", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=sorted(EXPERIMENTS + tuple(ALIASES)))
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", help="comma-separated list (km-cube: a single epsilon)")
    p.add_argument("--t", help="comma-separated list of deviation levels")
    p.add_argument("--ensemble", choices=["gaussian", "rademacher", "uniform"])
    p.add_argument("--center", type=float, help="constant added to every matrix entry")
    p.add_argument("--mode", choices=["exact", "montecarlo"])
    p.add_argument("--long-run", action="store_true", default=None, help="allow exact singularity at n = 5")
    p.add_argument("--random-plane", action="store_true", default=None)
    p.add_argument("--budget", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--trial-index", type=int, help="re-run a single trial in isolation")
    p.add_argument("--out", help="CSV path; the manifest goes to <out>.manifest")
    p.add_argument("--config", help="flat key = value file; flags override it")
    return p


def _overrides(args):
    skip = {"experiment", "config"}
    return {k: v for k, v in vars(args).items() if k not in skip and v is not None}


def _report(result):
    out = {"experiment": result.config.experiment, "checks": result.checks, "summary": result.summary,
           "stats": {k: v.as_dict() for k, v in result.stats.items() if isinstance(v, TrialStats)},
           "caveats": result.caveats, "duration_seconds": round(result.duration, 3)}
    return json.dumps(out, indent=2, sort_keys=True, default=str)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_sources(args.experiment, args.config, _overrides(args))
        result = run_experiment(cfg)
        write_outputs(result)
    except (ConfigError, InputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetError, ConvergenceError, DegeneracyError) as exc:
        print(f"numerical budget failure: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    print(_report(result))
    if cfg.experiment in SELF_TESTS and not result.ok:
        failed = [k for k, v in result.checks.items() if not v]
        print(f"self-test failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
