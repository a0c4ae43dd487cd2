import json
import math

import numpy as np
import pytest

from levyhom.errors import TableBuildFailure, UnsupportedDimension, ValidationError
from levyhom.exponent import ExponentSpec, psi_homogenized
from levyhom.forms import TestFunction
from levyhom.measure import LevyDensitySpec, ModulatedMeasure
from levyhom.periodic import PeriodicCoefficient, shifted_coefficient
from levyhom.quadrature import QuadratureConfig
from levyhom.simulate import (DROP, GAUSSIAN, IncrementSample, InverseCDFTable, JumpSampler,
                              SimulationPlan, _discrete_power, empirical_cf, fdd_convergence_experiment,
                              load_sample_values, rescaling_identity_check, sample_increments, save_sample,
                              small_jump_variance, truncated_psi)

CFG = QuadratureConfig()
ONE = PeriodicCoefficient.constant(1.0)
SC = PeriodicCoefficient.smooth_cosine(0.5, 1.0)
TENT = TestFunction.tent(0.0, 1.0)


def mm(a, beta=1.0, delta=1.0, R=None):
    nu = LevyDensitySpec.truncated_stable(beta, R) if R else LevyDensitySpec.stable(beta)
    return ModulatedMeasure(a, nu, delta)


def oracle_measure(c):
    if c["coef"] == "smooth_cosine":
        a = PeriodicCoefficient.smooth_cosine(float(c["amplitude"]), float(c["offset"]))
    else:
        a = PeriodicCoefficient.example1(float(c["gamma"]))
        if float(c["shift"]):
            a = shifted_coefficient(a, float(c["shift"]))
    return mm(a, float(c["beta"]), float(c["delta"]), float(c["R"]) if "R" in c else None)


# -- jump tables ------------------------------------------------------------

@pytest.mark.parametrize("case", ["cosine", "example1", "example1_shifted", "example1_truncated"])
def test_jump_table_cdf_matches_oracle(oracle, case):
    c = oracle("jump_cdf")[case]
    js = JumpSampler(oracle_measure(c), c["r"], CFG)
    rate = float(c["rate"])
    assert js.rate == pytest.approx(rate, rel=1e-10)
    cdf = js.body.cdf(np.array(c["x"]))
    err = np.max(np.abs(cdf - np.array([float(v) for v in c["cdf"]]))) / rate
    assert err <= 1e-10
    assert js.table_error <= 1e-10


def test_table_inverse_round_trip():
    js = JumpSampler(mm(PeriodicCoefficient.example1(0.3), 1.2, 0.5), 0.0625, CFG)
    x = np.random.default_rng(5).uniform(js.r, js.H, 20_000)
    back = js.body.invert(js.body.cdf(x))
    assert np.max(np.abs(back - x)) <= 1e-12


def test_table_uniform_density_is_exact():
    t = InverseCDFTable(lambda x: np.ones_like(x), 0.0, 2.0)
    assert t.mass == pytest.approx(2.0, abs=1e-14)
    assert t.invert(np.array([0.5, 1.5])) == pytest.approx([0.5, 1.5], abs=1e-14)


def test_table_failure_is_reported():
    with pytest.raises(TableBuildFailure):
        InverseCDFTable(lambda x: np.ones_like(x), 1.0, 1.0)
    with pytest.raises(TableBuildFailure):
        InverseCDFTable(lambda x: np.exp(np.sin(1e4 * x)), 0.0, 1.0, max_knots=100)


def test_discrete_power_law_matches_pmf():
    rng = np.random.default_rng(11)
    m, s = 1.5, 2.0
    k = _discrete_power(rng, np.full(200_000, m), s)
    pmf = (m + np.arange(5)) ** -s / float(sum((m + j) ** -s for j in range(200_000)))
    freq = np.array([np.mean(k == j) for j in range(5)])
    se = np.sqrt(pmf * (1 - pmf) / k.size)
    assert np.all(np.abs(freq - pmf) <= 4 * se)


# -- plans ------------------------------------------------------------------

def test_plan_validation():
    m = mm(SC, delta=0.5)
    with pytest.raises(ValidationError, match="jump_cutoff"):
        SimulationPlan(m, 1.0, 10, 0.1)
    with pytest.raises(ValidationError, match="times"):
        SimulationPlan(m, (1.0, 0.5), 10, 0.05)
    with pytest.raises(ValidationError, match="small_jump_mode"):
        SimulationPlan(m, 1.0, 10, 0.05, "keep")
    with pytest.raises(ValidationError, match="truncation"):
        SimulationPlan(mm(ONE, R=0.01), 1.0, 10, 0.05)
    with pytest.raises(UnsupportedDimension):
        SimulationPlan(ModulatedMeasure(PeriodicCoefficient.constant(1.0, 2), LevyDensitySpec.stable(1.0, 2)),
                       1.0, 10, 0.05)
    assert SimulationPlan(m, 1.0, 10, 0.0625).t == 1.0


# -- sampling ---------------------------------------------------------------

@pytest.fixture(scope="module")
def const_sample():
    plan = SimulationPlan(mm(ONE), (0.05, 0.5, 1.0), 100_000, 0.125, DROP, seed=20240611)
    return sample_increments(plan)


def test_zero_jump_fraction(const_sample):
    # the small-time limit of P(no jumps) is exp(-t lambda_r)
    p = math.exp(-0.05 * const_sample.rate)
    frac = np.mean(const_sample.jump_counts[:, 0] == 0)
    assert abs(frac - p) <= 4 * math.sqrt(p * (1 - p) / 100_000)
    assert const_sample.rate == pytest.approx(16.0, rel=1e-12)


def test_mean_jump_count(const_sample):
    n = const_sample.jump_counts.sum(axis=1)
    lam = const_sample.rate
    assert abs(n.mean() - lam) <= 4 * math.sqrt(lam / n.size)


def test_symmetry_of_sample(const_sample):
    x = const_sample.values[:, 0]
    # X(0.05) has finite variance but heavy tails; test signs and a bounded odd moment
    assert abs(np.mean(np.sign(x))) <= 4 / math.sqrt(x.size)
    y = np.arctan(x)
    assert abs(y.mean()) <= 4 * y.std() / math.sqrt(x.size)


def test_constant_cf_inside_ci(const_sample):
    res = empirical_cf(const_sample, [0.0, 0.5, 1.0, 2.0, 4.0])
    assert res.inside_fraction >= 0.9
    assert res.imag_within_ci
    zero = [r for r in res.rows if r["xi"] == 0.0]
    assert all(r["cf_real"] == 1.0 and r["model"] == 1.0 for r in zero)
    # dropping jumps below r = 1/8 lifts the model above exp(-pi/2) by about exp(r/2)
    row = next(r for r in res.rows if r["t"] == 0.5 and r["xi"] == 1.0)
    assert row["model"] == pytest.approx(math.exp(-0.5 * math.pi + 0.5 * 0.125), rel=1e-3)


def test_truncated_psi_constant_closed_form():
    # int_{|h|>r} (1 - cos h) h^-2 dh = pi - 2 int_0^r 2 sin^2(h/2) h^-2 dh
    from scipy.integrate import quad
    r = 0.125
    small = quad(lambda h: 4 * math.sin(h / 2) ** 2 / h ** 2, 0, r, epsabs=1e-15)[0]
    assert float(truncated_psi(mm(ONE), r, 1.0)[0]) == pytest.approx(math.pi - small, rel=1e-9)


def test_reproducible_across_threads():
    plan = SimulationPlan(mm(PeriodicCoefficient.example1(0.4), 1.0, 0.5), (0.3, 0.6), 10_000, 0.0625,
                          GAUSSIAN, seed=99)
    a = sample_increments(plan, threads=1)
    b = sample_increments(plan, threads=4)
    assert np.array_equal(a.values, b.values)
    c = sample_increments(SimulationPlan(plan.measure, plan.times, 10_000, 0.0625, GAUSSIAN, seed=100))
    assert not np.array_equal(a.values, c.values)


def test_all_zero_sample_cf_is_one():
    plan = SimulationPlan(mm(ONE), 1.0, 4, 0.125)
    s = IncrementSample(np.zeros((4, 1)), plan, [0], np.zeros((4, 1), dtype=int), 16.0, 0.0)
    res = empirical_cf(s, [1.0, 3.0])
    assert all(r["cf_real"] == 1.0 and r["cf_imag"] == 0.0 for r in res.rows)


def test_empty_sample_rejected():
    plan = SimulationPlan(mm(ONE), 1.0, 1, 0.125)
    s = IncrementSample(np.zeros((0, 1)), plan, [], np.zeros((0, 1), dtype=int), 16.0, 0.0)
    with pytest.raises(ValidationError):
        empirical_cf(s, [1.0])


def test_mirrored_coefficient_gives_same_law():
    a = shifted_coefficient(PeriodicCoefficient.example1(0.5), 0.2)
    b = shifted_coefficient(PeriodicCoefficient.example1(0.5), 0.8)   # x -> a(-x)
    s1 = sample_increments(SimulationPlan(mm(a, 1.0, 0.5), 0.4, 2_000, 0.0625, seed=3))
    s2 = sample_increments(SimulationPlan(mm(b, 1.0, 0.5), 0.4, 2_000, 0.0625, seed=3))
    assert s1.rate == pytest.approx(s2.rate, rel=1e-10)
    assert np.allclose(s1.values, s2.values, rtol=0, atol=1e-9)


def test_gaussian_mode_matches_full_psi():
    m = mm(SC, 1.5, 0.25)
    plan = SimulationPlan(m, (0.2, 0.5), 40_000, 0.03125, GAUSSIAN, seed=8)
    s = sample_increments(plan)
    assert s.small_jump_variance == pytest.approx(small_jump_variance(m, 0.03125, CFG))
    res = empirical_cf(s, [0.5, 1.0, 2.0])
    psi = ExponentSpec.build(m, CFG).psi_with_error(np.array([1.0]))[0][0]
    assert next(r for r in res.rows if r["t"] == 0.5 and r["xi"] == 1.0)["model"] == pytest.approx(
        math.exp(-0.5 * psi))
    assert res.inside_fraction >= 5 / 6


def test_homogenized_model_at_small_delta():
    m = mm(SC, 1.0, 2.0 ** -6)
    s = sample_increments(SimulationPlan(m, (0.05, 0.1), 100_000, 2.0 ** -9, seed=17), threads=4)
    res = empirical_cf(s, [0.5, 1.0, 2.0], model="homogenized")
    assert res.inside_fraction == 1.0
    # the untruncated homogenized model is pi |xi| for abar = 1
    assert psi_homogenized(1.0, LevyDensitySpec.stable(1.0), 1.0) == pytest.approx(math.pi, rel=1e-9)


def test_halving_cutoff_keeps_agreement():
    m = mm(SC, 1.0, 0.5)
    for r in (0.0625, 0.03125):
        s = sample_increments(SimulationPlan(m, (0.25, 0.5), 30_000, r, seed=21))
        assert empirical_cf(s, [1.0, 2.0, 4.0]).inside_fraction >= 5 / 6


def test_save_and_load(tmp_path, const_sample):
    path = save_sample(const_sample, tmp_path / "x.f64")
    assert np.array_equal(load_sample_values(path), const_sample.values)
    side = json.loads((tmp_path / "x.f64.json").read_text())
    assert side["plan"]["seed"] == 20240611 and side["dtype"] == "<f8"
    assert path.stat().st_size == const_sample.values.size * 8


# -- rescaling and fdd ------------------------------------------------------

@pytest.mark.parametrize("a", [ONE, SC, PeriodicCoefficient.example1(0.3)])
@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5])
def test_rescaling_identity(a, alpha):
    rep = rescaling_identity_check(a, alpha, [1.0, 0.3, 2.0 ** -4], TENT, cfg=CFG)
    assert rep.passed, rep.rows


def test_rescaling_identity_constant_is_scaled_stable_form():
    c = rescaling_identity_check(PeriodicCoefficient.constant(2.0), 1.0, [0.25], TENT)
    assert c.rows[0]["rhs"] == pytest.approx(2.0 * 8.0 * math.log(2.0), rel=1e-8)


def test_rescaling_validation():
    with pytest.raises(ValidationError):
        rescaling_identity_check(SC, 2.0, [0.5], TENT)
    with pytest.raises(ValidationError):
        rescaling_identity_check(SC, 1.0, [0.0], TENT)


def test_fdd_constant_matches_every_eps():
    rep = fdd_convergence_experiment(PeriodicCoefficient.constant(1.5), 1.0, [0.5, 0.25], [0.5, 1.0], [1.0],
                                     20_000, 5, cutoff=0.125)
    assert all(r["inside_ci"] for r in rep.rows)
    joint = [r for r in rep.rows if r["xi2"] is not None]
    assert len(joint) == 2
    assert joint[0]["limit"] == pytest.approx(math.exp(-0.5 * 1.5 * math.pi * 3), rel=1e-8)


def test_fdd_validation():
    with pytest.raises(ValidationError):
        fdd_convergence_experiment(SC, 1.0, [0.25, 0.5], [1.0], [1.0], 10, 0)
    with pytest.raises(ValidationError):
        fdd_convergence_experiment(SC, 1.0, [0.5], [1.0, 0.5], [1.0], 10, 0)
