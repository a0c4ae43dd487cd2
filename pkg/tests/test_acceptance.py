"""Acceptance criteria 1-10, one PASS/FAIL line each.

Every test asserts its criterion and records a verdict line; the lines are
printed in the terminal summary of any pytest run that includes this module.
"""
import json
import math
import sys
import time
from pathlib import Path

import pytest

from levyhom import (ExponentSpec, LevyDensitySpec, ModulatedMeasure, PeriodicCoefficient, SimulationPlan,
                     TestFunction, empirical_cf, example1_matrix, fdd_convergence_experiment, lp_bound_check,
                     m1_necessary_check, mosco_m2_check, psi, rescaling_identity_check, sample_increments,
                     spectral_identity_check, vague_convergence_check)
from levyhom.cli import EXPERIMENTS, run

ORACLES = Path(__file__).parent / "oracles"
TENT = TestFunction.tent(0.0, 1.0)
SC = PeriodicCoefficient.smooth_cosine(0.5, 1.0)
E1 = PeriodicCoefficient.example1
STABLE1 = LevyDensitySpec.stable(1.0)


VERDICTS = {}


def verdict(n, ok, detail):
    line = f"AC{n}: {'PASS' if ok else 'FAIL'} - {detail}"
    VERDICTS[n] = line
    assert ok, line


def test_ac01_example1_classification():
    t0 = time.perf_counter()
    rows = example1_matrix()
    dt = time.perf_counter() - t0
    ii = [r for r in rows if r["part"] == "ii"]
    iii = [r for r in rows if r["part"] == "iii"]
    # independent restatement of the expected classification
    for r in ii:
        div = r["delta"] == 0.5 and r["beta"] < 1.5 and r["gamma"] >= 0.5
        assert r["verdict"] == ("not_levy_measure" if div else "levy_measure"), r
    ok = all(r["match"] for r in rows) and all(r["verdict"] == "levy_measure" for r in iii) and dt <= 60
    verdict(1, ok, f"{len(ii)} part-(ii) and {len(iii)} part-(iii) verdicts match, {dt:.1f} s")


def test_ac02_vague_convergence():
    t0 = time.perf_counter()
    deltas = [2.0 ** -n for n in range(1, 11)]
    reps = [vague_convergence_check(TENT, a, deltas) for a in (SC, E1(0.3))]
    dt = time.perf_counter() - t0
    ok = all(r.final_error <= 1e-2 and r.notes["decreasing_last_4"] for r in reps) and dt <= 30
    errs = ", ".join(f"{r.final_error:.1e}" for r in reps)
    verdict(2, ok, f"final errors {errs} at delta = 2^-10, non-increasing tail, {dt:.1f} s")


def test_ac03_lp_bound():
    rep = lp_bound_check(E1(0.4), 2.0, 3, [0.7, 0.3, 0.11, 0.05])
    ok = rep.passed and len(rep.rows) == 4 and not rep.notes["violations"]
    verdict(3, ok, f"0 violations over 4 deltas (min slack {min(r['slack'] for r in rep.rows):.3g})")


def test_ac04_mosco_m2():
    t0 = time.perf_counter()
    deltas = [2.0 ** -n for n in range(1, 9)]
    reps = [mosco_m2_check(TENT, a, STABLE1, deltas) for a in (SC, E1(0.3))]
    dt = time.perf_counter() - t0
    ok = all(r.final_error <= 2e-2 for r in reps) and dt <= 300
    errs = ", ".join(f"{r.final_error:.1e}" for r in reps)
    verdict(4, ok, f"relative errors {errs} at delta = 2^-8, {dt:.1f} s")


def test_ac05_spectral_identity():
    rep = spectral_identity_check()
    ok = rep.passed and len(rep.rows) >= 6 and rep.final_error <= 1e-3
    verdict(5, ok, f"{len(rep.rows)} pairs agree, worst relative gap {rep.final_error:.1e} "
                   f"(constant {rep.notes['constant_label']})")


def test_ac06_exponent_oracle():
    oracle = json.loads((ORACLES / "psi_stable.json").read_text())
    ref = float(next(o["psi"] for o in oracle if o["xi"] == 1.0 and o["beta"] == 1.0))
    assert ref == pytest.approx(math.pi, abs=1e-20)
    one = PeriodicCoefficient.constant(1.0)
    value = psi(ExponentSpec.build(ModulatedMeasure(one, STABLE1)), 1.0)
    worst = 0.0
    for beta in (0.5, 1.0, 1.5):
        spec = ExponentSpec.build(ModulatedMeasure(one, LevyDensitySpec.stable(beta)))
        for xi in (0.3, 1.0, 2.5):
            for c in (2.0, 10.0):
                big = psi(spec, c * xi)
                worst = max(worst, abs(big - c ** beta * psi(spec, xi)) / big)
    ok = abs(value - ref) <= 1e-4 and worst <= 1e-6
    verdict(6, ok, f"|psi(1) - pi| = {abs(value - ref):.1e}, worst homogeneity defect {worst:.1e}")


def test_ac07_simulation_cf():
    t0 = time.perf_counter()
    cases = [
        (ModulatedMeasure(PeriodicCoefficient.constant(1.0), STABLE1, 1.0),
         (0.25, 0.5, 0.75, 1.0), (0.25, 0.5, 1.0, 2.0, 4.0), 20240611),
        (ModulatedMeasure(SC, STABLE1, 2.0 ** -6), (0.025, 0.05, 0.075, 0.1), (0.5, 1.0, 2.0, 4.0, 8.0), 20240612),
    ]
    fracs = []
    for m, times, xis, seed in cases:
        plan = SimulationPlan(m, times, 100_000, min(m.delta, 1.0) / 8.0, "drop", seed)
        res = empirical_cf(sample_increments(plan, threads=4), xis)
        assert len(res.rows) >= 12
        fracs.append(res.inside_fraction)
    dt = time.perf_counter() - t0
    ok = all(f >= 0.95 for f in fracs) and dt <= 120
    verdict(7, ok, f"inside-CI fractions {fracs[0]:.2f} (constant), {fracs[1]:.2f} (cosine, 2^-6), {dt:.1f} s")


def test_ac08_rescaling_and_fdd():
    rep = rescaling_identity_check(SC, 1.0, [2.0 ** -2, 2.0 ** -4], TENT, tolerance=1e-6)
    fdd = fdd_convergence_experiment(SC, 1.0, [2.0 ** -2, 2.0 ** -4, 2.0 ** -6], [0.5, 1.0], [1.0],
                                     20_000, 20240613, threads=4)
    ok = rep.passed and fdd.passed
    verdict(8, ok, f"identity worst rel diff {rep.final_error:.1e}; fdd rows at eps = 2^-6 inside CI: {fdd.passed}")


def test_ac09_m1_catalog():
    deltas = [2.0 ** -n for n in range(1, 7)]
    reps = [m1_necessary_check(TENT, a, STABLE1, deltas) for a in (SC, E1(0.3))]
    viol = sum(len(r.notes["violations"]) for r in reps)
    verdict(9, viol == 0, f"{viol} violations across 3 families x 2 coefficients")


LIGHT = {
    "fdd": '[experiment]\neps = [0.25, 0.0625]\nn_samples = 4000\nseed = 5\n',
    "simulate-cf": '[experiment]\nn_samples = 20000\nseed = 5\n',
}


def test_ac10_byte_identical_reruns(tmp_path):
    same = []
    for exp in EXPERIMENTS:
        cfg = None
        if exp in LIGHT:
            cfg = tmp_path / f"{exp}.toml"
            cfg.write_text(LIGHT[exp])
        a, b = tmp_path / exp / "a", tmp_path / exp / "b"
        run(exp, cfg, a, threads=2)
        run(exp, cfg, b, threads=1)
        same.append((a / f"{exp}.csv").read_bytes() == (b / f"{exp}.csv").read_bytes())
    verdict(10, all(same), f"{sum(same)}/{len(same)} experiments reproduce byte-identical CSV")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
