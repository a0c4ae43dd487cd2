"""Config-driven experiment runner.

Usage::

    levyhom <experiment> [--config FILE] [--out DIR] [--threads N] [--seed S]

The config is TOML with a single ``[experiment]`` table; every key is
optional and defaults to the settings of the acceptance suite.  Each run
writes ``<experiment>.csv`` and ``<experiment>.json`` into the output
directory.  Exit status: 0 when the experiment's gate passes, 1 when it
fails (Inconclusive quadrature counts as a failure), 2 on a bad config.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .errors import LevyHomError, ValidationError
from .exponent import exponent_convergence_scan
from .forms import (M1_FAMILIES, TestFunction, lp_bound_check, m1_necessary_check, mosco_m2_check,
                    spectral_identity_check, vague_convergence_check, weak_lp_check)
from .measure import INCONCLUSIVE, LevyDensitySpec, ModulatedMeasure, check_levy_integrability, example1_matrix
from .periodic import PeriodicCoefficient
from .quadrature import QuadratureConfig
from .report import SCHEMA_VERSION, ConvergenceReport, strictly_decreasing
from .simulate import DROP, MODES, SimulationPlan, empirical_cf, fdd_convergence_experiment, \
    rescaling_identity_check, sample_increments

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("integrability", "example1", "exponent-scan", "vague", "weak-lp", "lp-bound", "m2",
               "m1-catalog", "spectral-identity", "simulate-cf", "rescale-identity", "fdd")

TENT = {"kind": "tent", "center": 0.0, "halfwidth": 1.0}
SMOOTH_COSINE = {"kind": "smooth_cosine", "amplitude": 0.5, "offset": 1.0}
STABLE1 = {"kind": "stable", "beta": 1.0}


def _dyadic(lo, hi):
    return [2.0 ** -n for n in range(lo, hi + 1)]


DEFAULTS = {
    "integrability": {"coefficient": {"kind": "example1", "gamma": 0.55},
                      "density": {"kind": "example1ii", "beta": 1.0, "gamma": 0.55},
                      "deltas": [1.0, 0.5]},
    "example1": {"betas": [0.5, 1.0, 1.4], "gammas": [0.2, 0.55, 0.8], "deltas": [1.0, 0.5],
                 "iii_deltas": [1.0, 0.5, 1.0 / 3.0, 0.05]},
    "exponent-scan": {"coefficient": SMOOTH_COSINE, "density": {"kind": "stable", "beta": 1.5},
                      "xis": [0.5, 1.0, 2.0], "deltas": _dyadic(1, 8), "tolerance": 1e-2},
    "vague": {"coefficient": SMOOTH_COSINE, "test_function": TENT, "deltas": _dyadic(1, 10),
              "tolerance": 1e-2},
    "weak-lp": {"coefficient": {"kind": "example1", "gamma": 0.3}, "test_function": TENT, "p": 2.0,
                "deltas": _dyadic(1, 10), "tolerance": 1e-2},
    "lp-bound": {"coefficient": {"kind": "example1", "gamma": 0.4}, "p": 2.0, "N": 3,
                 "deltas": [0.7, 0.3, 0.11, 0.05]},
    "m2": {"coefficient": SMOOTH_COSINE, "density": STABLE1, "test_function": TENT,
           "deltas": _dyadic(1, 8), "tolerance": 2e-2},
    "m1-catalog": {"coefficient": SMOOTH_COSINE, "density": STABLE1, "test_function": TENT,
                   "deltas": _dyadic(1, 6), "families": list(M1_FAMILIES), "tolerance": 2e-2},
    "spectral-identity": {"tolerance": 1e-3},
    "simulate-cf": {"coefficient": {"kind": "constant", "c": 1.0}, "density": STABLE1, "delta": 1.0,
                    "times": [0.25, 0.5, 1.0], "xis": [0.5, 1.0, 2.0, 4.0], "n_samples": 100_000,
                    "small_jump_mode": DROP, "model": "exact", "threshold": 0.95, "seed": 0},
    "rescale-identity": {"coefficient": SMOOTH_COSINE, "alpha": 1.0, "eps": [0.25, 0.0625],
                         "test_function": TENT, "tolerance": 1e-6},
    "fdd": {"coefficient": SMOOTH_COSINE, "alpha": 1.0, "eps": [0.25, 0.0625, 0.015625],
            "times": [0.5, 1.0], "xis": [1.0], "n_samples": 20_000, "cutoff": 0.125,
            "small_jump_mode": DROP, "seed": 0},
}
COMMON_KEYS = {"name", "output_dir", "quadrature"}


# ---------------------------------------------------------------------------
# config handling


def load_config(experiment: str, path: str | Path | None) -> dict:
    """Defaults for ``experiment`` overlaid with the ``[experiment]`` table of ``path``."""
    cfg = dict(DEFAULTS[experiment])
    if path is None:
        return cfg
    try:
        doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"config: cannot read {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config: not valid TOML: {exc}") from exc
    extra = set(doc) - {"experiment"}
    if extra:
        raise ValidationError(f"config: unexpected top-level table(s) {sorted(extra)}")
    table = doc.get("experiment")
    if not isinstance(table, dict):
        raise ValidationError("experiment: missing [experiment] table")
    name = table.get("name", experiment)
    if name != experiment:
        raise ValidationError(f"experiment.name: {name!r} does not match subcommand {experiment!r}")
    unknown = set(table) - set(cfg) - COMMON_KEYS - _optional_keys(experiment)
    if unknown:
        raise ValidationError(f"experiment.{sorted(unknown)[0]}: unknown key for {experiment}")
    cfg.update(table)
    return cfg


def _optional_keys(experiment):
    return {"integrability": {"expected"}, "simulate-cf": {"jump_cutoff"},
            "weak-lp": {"K"}}.get(experiment, set())


def _field(cfg, key, conv, what):
    try:
        return conv(cfg[key])
    except KeyError:
        raise ValidationError(f"experiment.{key}: missing") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise ValidationError(f"experiment.{key}: {exc}") from None
        raise ValidationError(f"experiment.{key}: expected {what}") from None


def _grid(cfg, key, decreasing=False):
    vals = _field(cfg, key, lambda v: [float(x) for x in v], "a list of numbers")
    if not vals:
        raise ValidationError(f"experiment.{key}: grid must be nonempty")
    if not all(math.isfinite(v) for v in vals):
        raise ValidationError(f"experiment.{key}: grid values must be finite")
    if decreasing and not strictly_decreasing(vals):
        raise ValidationError(f"experiment.{key}: grid must be strictly decreasing")
    if decreasing and vals[-1] <= 0:
        raise ValidationError(f"experiment.{key}: grid values must be positive")
    return vals


def _spec(cfg, key, cls):
    d = cfg.get(key)
    if not isinstance(d, dict):
        raise ValidationError(f"experiment.{key}: expected a table")
    try:
        return cls.from_dict(d)
    except ValidationError as exc:
        msg = str(exc)
        raise ValidationError(msg if msg.startswith(f"{key}.") else f"experiment.{key}: {msg}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"experiment.{key}: invalid spec ({exc})") from None


def _quadrature(cfg) -> QuadratureConfig:
    q = cfg.get("quadrature", {})
    if not isinstance(q, dict):
        raise ValidationError("experiment.quadrature: expected a table")
    try:
        return QuadratureConfig(**q)
    except TypeError as exc:
        raise ValidationError(f"experiment.quadrature: {exc}") from None


def _positive(cfg, key, conv=float):
    v = _field(cfg, key, conv, "a number")
    if not v > 0:
        raise ValidationError(f"experiment.{key}: must be positive")
    return v


# ---------------------------------------------------------------------------
# experiments


def _rows_report(check, columns, rows, passed, **notes):
    return ConvergenceReport(check, columns, rows, passed=passed, notes=notes)


INTEGRABILITY_COLUMNS = ("delta", "verdict", "value", "near_origin_error", "tail_error", "diverged",
                         "expected", "match")
EXAMPLE1_COLUMNS = ("part", "beta", "gamma", "delta", "verdict", "expected", "match", "value",
                    "near_origin_error", "tail_error", "diverged")
CF_SIM_COLUMNS = ("t", "xi", "cf_real", "cf_imag", "model", "half_width", "inside_ci")


def run_integrability(cfg, q, threads):
    a = _spec(cfg, "coefficient", PeriodicCoefficient)
    nu = _spec(cfg, "density", LevyDensitySpec)
    expected = cfg.get("expected")
    rows = []
    for d in _grid(cfg, "deltas"):
        if not d > 0:
            raise ValidationError("experiment.deltas: values must be positive")
        rep = check_levy_integrability(ModulatedMeasure(a, nu, d), q)
        row = rep.row(delta=d)
        exp = expected.get(str(d)) if isinstance(expected, dict) else expected
        row.update(expected=exp, match=None if exp is None else rep.overall == exp)
        rows.append(row)
    ok = all(r["verdict"] != INCONCLUSIVE and r["match"] is not False for r in rows)
    return _rows_report("integrability", INTEGRABILITY_COLUMNS, rows, ok)


def run_example1(cfg, q, threads):
    rows = example1_matrix(_grid(cfg, "betas"), _grid(cfg, "gammas"), _grid(cfg, "deltas"), q,
                           iii_deltas=_grid(cfg, "iii_deltas"))
    return _rows_report("example1", EXAMPLE1_COLUMNS, rows, all(r["match"] for r in rows))


def run_exponent_scan(cfg, q, threads):
    return exponent_convergence_scan(_spec(cfg, "coefficient", PeriodicCoefficient),
                                     _spec(cfg, "density", LevyDensitySpec), _grid(cfg, "xis"),
                                     _grid(cfg, "deltas", True), q, _positive(cfg, "tolerance"))


def run_vague(cfg, q, threads):
    rep = vague_convergence_check(_spec(cfg, "test_function", TestFunction),
                                  _spec(cfg, "coefficient", PeriodicCoefficient),
                                  _grid(cfg, "deltas", True), q, _positive(cfg, "tolerance"), threads)
    rep.passed = rep.passed and rep.notes["decreasing_last_4"]
    return rep


def run_weak_lp(cfg, q, threads):
    g = _spec(cfg, "test_function", TestFunction)
    K = tuple(cfg.get("K", g.support))
    if len(K) != 2:
        raise ValidationError("experiment.K: expected [lo, hi]")
    return weak_lp_check(g, K, _spec(cfg, "coefficient", PeriodicCoefficient), _positive(cfg, "p"),
                         _grid(cfg, "deltas", True), q, _positive(cfg, "tolerance"),
                         breakpoints=g.breakpoints, threads=threads)


def run_lp_bound(cfg, q, threads):
    return lp_bound_check(_spec(cfg, "coefficient", PeriodicCoefficient), _positive(cfg, "p"),
                          _positive(cfg, "N", int), _grid(cfg, "deltas", True), q)


def run_m2(cfg, q, threads):
    return mosco_m2_check(_spec(cfg, "test_function", TestFunction),
                          _spec(cfg, "coefficient", PeriodicCoefficient), _spec(cfg, "density", LevyDensitySpec),
                          _grid(cfg, "deltas", True), q, _positive(cfg, "tolerance"), threads)


def run_m1(cfg, q, threads):
    fams = _field(cfg, "families", lambda v: [str(x) for x in v], "a list of family names")
    bad = [f for f in fams if f not in M1_FAMILIES]
    if bad or not fams:
        raise ValidationError(f"experiment.families: unknown family {bad[0] if bad else '(empty)'!r}")
    return m1_necessary_check(_spec(cfg, "test_function", TestFunction),
                              _spec(cfg, "coefficient", PeriodicCoefficient),
                              _spec(cfg, "density", LevyDensitySpec), _grid(cfg, "deltas", True), fams, q,
                              _positive(cfg, "tolerance"), threads)


def run_spectral(cfg, q, threads):
    return spectral_identity_check(None, q, _positive(cfg, "tolerance"))


def run_simulate_cf(cfg, q, threads):
    a = _spec(cfg, "coefficient", PeriodicCoefficient)
    nu = _spec(cfg, "density", LevyDensitySpec)
    delta = _positive(cfg, "delta")
    m = ModulatedMeasure(a, nu, delta)
    r = _positive(cfg, "jump_cutoff") if "jump_cutoff" in cfg else min(delta, 1.0) / 8.0
    mode = cfg["small_jump_mode"]
    if mode not in MODES:
        raise ValidationError(f"experiment.small_jump_mode: must be one of {MODES}")
    if cfg["model"] not in ("exact", "homogenized"):
        raise ValidationError("experiment.model: must be 'exact' or 'homogenized'")
    times = _grid(cfg, "times")
    plan = SimulationPlan(m, tuple(times), _positive(cfg, "n_samples", int), r, mode,
                          _field(cfg, "seed", int, "an integer"))
    sample = sample_increments(plan, q, threads)
    res = empirical_cf(sample, _grid(cfg, "xis"), cfg["model"], q)
    rep = res.report("simulate-cf", _positive(cfg, "threshold"))
    rep.notes.update(rate=sample.rate, table_error=sample.table_error, imag_within_ci=res.imag_within_ci)
    return rep


def run_rescale(cfg, q, threads):
    return rescaling_identity_check(_spec(cfg, "coefficient", PeriodicCoefficient), _positive(cfg, "alpha"),
                                    _grid(cfg, "eps", True), _spec(cfg, "test_function", TestFunction),
                                    cfg=q, tolerance=_positive(cfg, "tolerance"))


def run_fdd(cfg, q, threads):
    return fdd_convergence_experiment(_spec(cfg, "coefficient", PeriodicCoefficient), _positive(cfg, "alpha"),
                                      _grid(cfg, "eps", True), _grid(cfg, "times"), _grid(cfg, "xis"),
                                      _positive(cfg, "n_samples", int), _field(cfg, "seed", int, "an integer"),
                                      q, threads, _positive(cfg, "cutoff"), cfg["small_jump_mode"])


RUNNERS = {"integrability": run_integrability, "example1": run_example1,
           "exponent-scan": run_exponent_scan, "vague": run_vague, "weak-lp": run_weak_lp,
           "lp-bound": run_lp_bound, "m2": run_m2, "m1-catalog": run_m1,
           "spectral-identity": run_spectral, "simulate-cf": run_simulate_cf,
           "rescale-identity": run_rescale, "fdd": run_fdd}


# ---------------------------------------------------------------------------
# driver


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def run(experiment: str, config_path=None, out_dir=None, threads: int = 1, seed: int | None = None) -> int:
    """Run one experiment and write its artifacts; returns the exit status."""
    t0 = time.perf_counter()
    try:
        if experiment not in RUNNERS:
            raise ValidationError(f"experiment: unknown {experiment!r}")
        cfg = load_config(experiment, config_path)
        if seed is not None:
            if "seed" not in DEFAULTS[experiment]:
                raise ValidationError(f"--seed: {experiment} is deterministic and takes no seed")
            cfg["seed"] = seed
        if "seed" in cfg and not 0 <= _field(cfg, "seed", int, "an integer") < 2 ** 64:
            raise ValidationError("experiment.seed: must be a 64-bit unsigned integer")
        if threads < 1:
            raise ValidationError("--threads: must be >= 1")
        q = _quadrature(cfg)
        out = Path(out_dir or cfg.get("output_dir", "."))
    except ValidationError as exc:
        print(f"levyhom: invalid config: {exc}", file=sys.stderr)
        return 2
    reason = None
    try:
        rep = RUNNERS[experiment](cfg, q, threads)
    except ValidationError as exc:
        print(f"levyhom: invalid config: {exc}", file=sys.stderr)
        return 2
    except LevyHomError as exc:
        reason = f"{type(exc).__name__}: {exc}"
        rep = ConvergenceReport(experiment, ("reason",), [{"reason": reason}], passed=False)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{experiment}.csv").write_text(rep.to_csv(), encoding="utf-8")
    summary = {"experiment": experiment, "passed": bool(rep.passed), "rows": _jsonable(rep.rows),
               "wall_time": time.perf_counter() - t0, "schema_version": SCHEMA_VERSION,
               "summary": _jsonable(rep.summary()), "config": _jsonable(cfg)}
    if reason:
        summary["reason"] = reason
    (out / f"{experiment}.json").write_text(json.dumps(summary, indent=1, ensure_ascii=False) + "\n",
                                            encoding="utf-8")
    status = "PASS" if rep.passed else "FAIL"
    print(f"{experiment}: {status} ({len(rep.rows)} rows) -> {out / (experiment + '.csv')}")
    if reason:
        print(f"  reason: {reason}", file=sys.stderr)
    return 0 if rep.passed else 1


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="levyhom", description="Run a homogenization verification experiment.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="TOML file with an [experiment] table")
    p.add_argument("--out", help="output directory (default: config output_dir or .)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--seed", type=int, help="override the config seed")
    args = p.parse_args(argv)
    return run(args.experiment, args.config, args.out, args.threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
