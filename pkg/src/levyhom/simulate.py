"""Compound-Poisson simulation of modulated jump processes.

Jumps with ``|h| > r`` are kept: their number on a time step ``dt`` is
Poisson with mean ``dt * lambda_r`` and each jump has the symmetrized law
``(a_delta(h) + a_delta(-h)) nu(h) / (2 lambda_r)``.  Jumps below ``r`` are
dropped (and the model exponent truncated accordingly) or replaced by a
Gaussian with the same variance.

Jump magnitudes come from a two-part inverse-CDF table:

* on ``(r, H]`` a cubic Hermite model of the CDF between adaptively refined
  knots, with power-law pieces at the coefficient's singular points;
* beyond ``H = K delta`` the magnitude is ``delta (K + k + u)``: ``u`` from a
  one-period table of ``a_sym(u) zeta(1 + beta, K + u)`` and the period
  index ``k`` from a discrete power law by rejection.

Random numbers come from Philox streams keyed by ``(seed, chunk)``, so the
result does not depend on how chunks are spread over threads.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TableBuildFailure, UnsupportedDimension, ValidationError
from .exponent import ExponentSpec, psi_homogenized
from .forms import TestFunction, form_direct
from .measure import LevyDensitySpec, ModulatedMeasure, check_levy_integrability
from .periodic import PeriodicCoefficient, mean_value
from .quadrature import QuadratureConfig, gauss_legendre, hurwitz_zeta, integrate_singular
from .report import ConvergenceReport, strictly_decreasing

DROP = "drop"
GAUSSIAN = "gaussian_substitute"
MODES = (DROP, GAUSSIAN)

TABLE_TOL = 1e-10
CHUNK = 4096
_SHELLS = 36


# ---------------------------------------------------------------------------
# inverse-CDF table


class InverseCDFTable:
    """Tabulated CDF of a nonnegative density on ``[lo, hi]``.

    Between knots the CDF is the cubic Hermite interpolant of (F, f) with
    interval masses from 20-point Gauss-Legendre.  Intervals are bisected
    until the interpolant matches the quadrature CDF at every midpoint to
    ``tol/2`` of the total mass and the 20- vs 10-point mass differences sum
    to at most ``tol/2``.  An interval ending at a singular point carries
    the power law ``F ~ t^exponent`` (measured from the singular point),
    scaled to the mass its neighbour implies.
    """

    def __init__(self, density, lo: float, hi: float, singular=(), kinks=(), scale: float | None = None,
                 exponent: float = 1.0, tol: float = TABLE_TOL, max_knots: int = 2_000_000):
        self.density = density
        lo, hi = float(lo), float(hi)
        if not hi > lo:
            raise TableBuildFailure("empty table range")
        scale = float(scale or (hi - lo))
        sing = sorted({float(s) for s in singular if lo <= s <= hi})
        pts = {lo, hi, *sing, *[float(k) for k in kinks if lo < k < hi]}
        step = scale / 8.0
        pts |= {p for p in (step * np.arange(math.ceil(lo / step), math.floor(hi / step) + 1)).tolist()
                if lo < p < hi}
        for s in sing:
            for side in (-1.0, 1.0):
                for k in range(_SHELLS + 1):
                    p = s + side * scale * 2.0 ** (-3 - k)
                    if lo < p < hi:
                        pts.add(p)
        x = np.array(sorted(pts))
        keep = np.concatenate([[True], np.diff(x) > 4e-16 * np.maximum(1.0, np.abs(x[1:]))])
        self.x = x[keep]
        self.exponent = float(exponent)
        self.span = hi - lo
        self._build(np.array(sing), tol, max_knots)

    def _gauss(self, a, b, n=20):
        g, w = gauss_legendre(n)
        half = 0.5 * (b - a)
        t = 0.5 * (a + b)[:, None] + half[:, None] * g
        return np.sum(self.density(t) * w, axis=1) * half

    def _build(self, sing, tol, max_knots):
        x = self.x
        for _ in range(80):
            a, b = x[:-1], x[1:]
            dx = b - a
            ls, rs = np.isin(a, sing), np.isin(b, sing)
            if np.any(ls & rs):
                raise TableBuildFailure("interval between two singular points")
            reg = ~(ls | rs)
            inner = ~np.isin(x, sing)
            f = np.zeros(x.size)
            f[inner] = self.density(x[inner])
            mass = np.zeros(a.size)
            err = np.zeros(a.size)
            mass[reg] = self._gauss(a[reg], b[reg])
            err[reg] = np.abs(mass[reg] - self._gauss(a[reg], b[reg], 10))
            for i in np.flatnonzero(~reg):
                j = i + 1 if ls[i] else i - 1
                if not (0 <= j < a.size and reg[j]):
                    raise TableBuildFailure("singular interval without a regular neighbour")
                mass[i] = mass[j] / ((1.0 + dx[j] / dx[i]) ** self.exponent - 1.0)
                err[i] = mass[i] * dx[i] / self.span
            total = float(np.sum(mass))
            mid = 0.5 * (a + b)
            herm = np.zeros(a.size)
            herm[reg] = np.abs(self._gauss(a[reg], mid[reg])
                               - (0.5 * mass[reg] + dx[reg] * (f[:-1][reg] - f[1:][reg]) / 8.0))
            budget = 0.5 * tol * total
            if herm.max() <= budget and err.sum() <= budget:
                break
            bad = reg & ((herm > budget) | (err > budget / a.size))
            if not bad.any():
                raise TableBuildFailure("table error budget not met by bisection")
            x = np.sort(np.concatenate([x, mid[bad]]))
            if x.size > max_knots:
                raise TableBuildFailure(f"table needs more than {max_knots} knots")
        else:
            raise TableBuildFailure("table refinement did not converge")
        self.x, self.f = x, f
        self.cum = np.concatenate([[0.0], np.cumsum(mass)])
        self.mass = float(self.cum[-1])
        self.left_singular, self.right_singular = ls, rs
        self.error = float(max(herm.max(), err.sum()) / total)

    def _locate(self, i):
        a, b = self.x[i], self.x[i + 1]
        return a, b, self.cum[i + 1] - self.cum[i], self.left_singular[i], self.right_singular[i]

    def invert(self, v):
        """Points ``x`` with ``F(x) = v`` for ``v`` in ``[0, mass)``."""
        v = np.asarray(v, dtype=float)
        i = np.clip(np.searchsorted(self.cum, v, side="right") - 1, 0, self.x.size - 2)
        a, b, m, ls, rs = self._locate(i)
        dx = b - a
        p = np.clip((v - self.cum[i]) / np.where(m > 0, m, 1.0), 0.0, 1.0)
        s = np.empty(v.shape)
        reg = ~(ls | rs)
        s[reg] = _hermite_inverse(p[reg], m[reg], dx[reg], self.f[i[reg]], self.f[i[reg] + 1])
        e = 1.0 / self.exponent
        s[ls] = p[ls] ** e
        s[rs] = 1.0 - (1.0 - p[rs]) ** e
        return a + dx * s

    def cdf(self, x):
        """Tabulated (unnormalized) CDF at points of ``[lo, hi]``."""
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.x, x, side="right") - 1, 0, self.x.size - 2)
        a, b, m, ls, rs = self._locate(i)
        s = (x - a) / (b - a)
        out = _hermite(s, m, b - a, self.f[i], self.f[i + 1])
        out = np.where(ls, m * s ** self.exponent, out)
        out = np.where(rs, m - m * (1.0 - s) ** self.exponent, out)
        return self.cum[i] + out


def _hermite(s, m, dx, f0, f1):
    # cubic Hermite CDF of one interval in local coordinates: F(0) = 0, F(1) = m
    return (s ** 3 - 2 * s ** 2 + s) * dx * f0 + (3 * s ** 2 - 2 * s ** 3) * m + (s ** 3 - s ** 2) * dx * f1


def _hermite_inverse(p, m, dx, f0, f1):
    # plain Newton sweeps first; entries that fail to settle get a bracketed solve
    target = p * m
    s = p.copy()
    for _ in range(4):
        der = dx * ((3 * s * s - 4 * s + 1) * f0 + (3 * s * s - 2 * s) * f1) + m * 6 * s * (1 - s)
        step = (_hermite(s, m, dx, f0, f1) - target) / np.where(der > 0, der, np.inf)
        s = np.clip(s - step, 0.0, 1.0)
    resid = np.abs(_hermite(s, m, dx, f0, f1) - target)
    slow = np.flatnonzero(~(resid <= 1e-14 * np.maximum(m, 1e-300)))
    if slow.size:
        s[slow] = _bracketed_inverse(p[slow], m[slow], dx[slow], f0[slow], f1[slow])
    return s


def _bracketed_inverse(p, m, dx, f0, f1):
    s = p.copy()
    lo, hi = np.zeros_like(p), np.ones_like(p)
    idx = np.arange(p.size)
    for _ in range(60):
        if not idx.size:
            break
        si, mi, di, a0, a1 = s[idx], m[idx], dx[idx], f0[idx], f1[idx]
        g = _hermite(si, mi, di, a0, a1) - p[idx] * mi
        l = np.where(g < 0, si, lo[idx])
        h = np.where(g >= 0, si, hi[idx])
        der = di * ((3 * si * si - 4 * si + 1) * a0 + (3 * si * si - 2 * si) * a1) + mi * 6 * si * (1 - si)
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = si - g / der
        nxt = np.where((nxt > l) & (nxt < h), nxt, 0.5 * (l + h))
        s[idx], lo[idx], hi[idx] = nxt, l, h
        done = (np.abs(nxt - si) <= 1e-14) | (h - l <= 1e-14)
        idx = idx[~done]
    return s


# ---------------------------------------------------------------------------
# jump law


class JumpSampler:
    """Magnitude law of jumps above the cutoff, ``folded / lambda_r`` on ``(r, inf)``."""

    def __init__(self, m: ModulatedMeasure, r: float, cfg: QuadratureConfig):
        self.measure = m
        self.r = r
        beta, delta = m.nu.beta, m.delta
        if m.nu.kind == "truncated_stable":
            H = m.nu.R
            self.K = None
        else:
            self.K = max(1, math.ceil(1.0 / delta - 1e-12))
            H = self.K * delta
        expo = 1.0 - m.a.gamma if m.a.kind == "example1" else 1.0
        geo = r * 2.0 ** np.arange(0.5, math.log2(H / r), 0.5)
        self.body = InverseCDFTable(m.folded, r, H, m.singular_points(r, H), [*m.kinks(r, H), *geo],
                                    scale=min(delta, H - r), exponent=expo)
        self.H = H
        self.period = None
        errors = [self.body.error * self.body.mass]
        if self.K is not None:
            a, K = m.a, self.K

            def g(u):
                return (a(u) + a(-u)) * hurwitz_zeta(1.0 + beta, K + u) * delta ** -beta

            sp = a.singular_points
            sing = sorted({*sp, *[1.0 - x for x in sp]})
            kinks = {*a.kinks, *[1.0 - x for x in a.kinks]}
            self.period = InverseCDFTable(g, 0.0, 1.0, sing, kinks, scale=1.0, exponent=expo)
            errors.append(self.period.error * self.period.mass)
        self.tail_mass = self.period.mass if self.period else 0.0
        self.rate = self.body.mass + self.tail_mass
        self.table_error = sum(errors) / self.rate

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        v = rng.random(n) * self.rate
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        out = np.empty(n)
        body = v < self.body.mass
        out[body] = self.body.invert(v[body])
        nt = int(np.count_nonzero(~body))
        if nt:
            u = self.period.invert(rng.random(nt) * self.period.mass)
            k = _discrete_power(rng, self.K + u, 1.0 + self.measure.nu.beta)
            out[~body] = self.measure.delta * (self.K + k + u)
        return sign * out


def _discrete_power(rng: np.random.Generator, m, s):
    """``k >= 0`` with ``P(k) ~ (m + k)^-s`` by Pareto proposals and rejection."""
    m = np.asarray(m, dtype=float)
    b = s - 1.0
    out = np.empty(m.shape)
    todo = np.arange(m.size)

    def rho(x):
        return 1.0 / (x * -np.expm1(-b * np.log1p(1.0 / x)))

    while todo.size:
        mm = m[todo]
        y = mm * (1.0 - rng.random(todo.size)) ** (-1.0 / b)
        k = np.floor(y - mm)
        acc = rng.random(todo.size) * rho(mm) <= rho(mm + k)
        out[todo[acc]] = k[acc]
        todo = todo[~acc]
    return out


# ---------------------------------------------------------------------------
# plans and samples


@dataclass(frozen=True)
class SimulationPlan:
    """What to simulate; ``times`` is an increasing grid of observation times."""

    measure: ModulatedMeasure
    times: tuple
    n_samples: int
    r: float
    small_jump_mode: str = DROP
    seed: int = 0

    def __post_init__(self):
        m = self.measure
        if m.dim != 1:
            raise UnsupportedDimension("simulation is one-dimensional")
        if m.nu.kind == "example1ii":
            raise ValidationError("simulation supports stable and truncated_stable densities")
        t = tuple(float(x) for x in np.atleast_1d(self.times))
        object.__setattr__(self, "times", t)
        if not t or t[0] <= 0 or any(b <= a for a, b in zip(t[:-1], t[1:])):
            raise ValidationError("times must be positive and strictly increasing")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ValidationError("n_samples must be a positive integer")
        limit = min(m.delta, 1.0) / 8.0
        if not 0.0 < self.r <= limit * (1 + 1e-12):
            raise ValidationError(f"jump_cutoff r must lie in (0, min(delta, 1)/8 = {limit:g}]")
        if m.nu.kind == "truncated_stable" and not self.r < m.nu.R:
            raise ValidationError("jump_cutoff r must be below the truncation radius")
        if self.small_jump_mode not in MODES:
            raise ValidationError(f"small_jump_mode must be one of {MODES}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer")

    @property
    def t(self) -> float:
        return self.times[-1]

    def to_dict(self) -> dict:
        return {"measure": self.measure.to_dict(), "times": list(self.times),
                "n_samples": int(self.n_samples), "jump_cutoff": self.r,
                "small_jump_mode": self.small_jump_mode, "seed": int(self.seed)}


@dataclass
class IncrementSample:
    """``values[i, j]`` is path ``i`` at ``plan.times[j]``."""

    values: np.ndarray
    plan: SimulationPlan
    rng_streams: list
    jump_counts: np.ndarray
    rate: float
    small_jump_variance: float
    table_error: float = 0.0
    extras: dict = field(default_factory=dict)


def _stream(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(chunk)))


def small_jump_variance(m: ModulatedMeasure, r: float, cfg: QuadratureConfig) -> float:
    """``sigma_r^2 = int_{|h| <= r} h^2 a_delta nu``."""
    o = integrate_singular(lambda h: h * h * m.folded(h), 0.0, r, [0.0, *m.singular_points(0.0, r)], cfg,
                           breakpoints=m.kinks(0.0, r))
    return o.require()


def _chunk(plan: SimulationPlan, sampler: JumpSampler, sigma2: float, idx: int, n: int):
    rng = _stream(plan.seed, idx)
    dts = np.diff(np.concatenate([[0.0], plan.times]))
    vals = np.zeros((n, dts.size))
    counts = np.zeros((n, dts.size), dtype=np.int64)
    for j, dt in enumerate(dts):
        N = rng.poisson(dt * sampler.rate, n)
        jumps = sampler.sample(rng, int(N.sum()))
        owner = np.repeat(np.arange(n), N)
        inc = np.bincount(owner, weights=jumps, minlength=n)
        if plan.small_jump_mode == GAUSSIAN:
            inc += math.sqrt(dt * sigma2) * rng.standard_normal(n)
        vals[:, j] = inc
        counts[:, j] = N
    return np.cumsum(vals, axis=1), counts


def sample_increments(plan: SimulationPlan, cfg: QuadratureConfig | None = None,
                      threads: int = 1) -> IncrementSample:
    """Simulate ``n_samples`` paths observed at ``plan.times``.

    Bit-identical for a given plan whatever ``threads`` is.
    """
    cfg = cfg or QuadratureConfig()
    rep = check_levy_integrability(plan.measure, cfg)
    if not rep.is_levy:
        raise ValidationError(f"measure is not a Levy density: {rep.overall}")
    sampler = _sampler(plan.measure, plan.r, cfg)
    sigma2 = small_jump_variance(plan.measure, plan.r, cfg)
    n = int(plan.n_samples)
    starts = list(range(0, n, CHUNK))
    jobs = [(i, min(CHUNK, n - s)) for i, s in enumerate(starts)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda j: _chunk(plan, sampler, sigma2, *j), jobs))
    else:
        parts = [_chunk(plan, sampler, sigma2, *j) for j in jobs]
    values = np.concatenate([p[0] for p in parts])
    counts = np.concatenate([p[1] for p in parts])
    return IncrementSample(values, plan, [i for i, _ in jobs], counts, sampler.rate, sigma2,
                           sampler.table_error)


_SAMPLERS: dict = {}


def _sampler(m: ModulatedMeasure, r: float, cfg: QuadratureConfig) -> JumpSampler:
    key = (m, r, cfg)
    if key not in _SAMPLERS:
        _SAMPLERS[key] = JumpSampler(m, r, cfg)
    return _SAMPLERS[key]


def save_sample(sample: IncrementSample, path) -> Path:
    """Little-endian float64 values plus a JSON sidecar with the plan."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sample.values.astype("<f8").tofile(path)
    side = {"plan": sample.plan.to_dict(), "shape": list(sample.values.shape), "dtype": "<f8",
            "rng": "philox", "rng_streams": sample.rng_streams, "chunk_size": CHUNK}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(side, indent=1) + "\n")
    return path


def load_sample_values(path) -> np.ndarray:
    path = Path(path)
    side = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return np.fromfile(path, dtype="<f8").reshape(side["shape"])


# ---------------------------------------------------------------------------
# characteristic functions


def truncated_psi(m: ModulatedMeasure, r: float, xi, cfg: QuadratureConfig | None = None,
                  spec: ExponentSpec | None = None):
    """``psi_{delta, r}(xi) = int_{|h| > r} (1 - cos xi h) a_delta nu dh``."""
    cfg = cfg or QuadratureConfig()
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    spec = spec or ExponentSpec.build(m, cfg)
    full = np.atleast_1d(spec.psi_with_error(xi)[0])
    sing = [0.0, *m.singular_points(0.0, r)]
    small = np.array([integrate_singular(lambda h, x=x: 2.0 * np.sin(0.5 * x * h) ** 2 * m.folded(h),
                                         0.0, r, sing, cfg, breakpoints=m.kinks(0.0, r)).require()
                      for x in xi])
    return full - small


CF_COLUMNS = ("t", "xi", "cf_real", "cf_imag", "model", "half_width", "inside_ci")


@dataclass
class CFCheckResult:
    rows: list
    imag_max_abs: float
    imag_within_ci: bool

    @property
    def inside_fraction(self) -> float:
        return sum(r["inside_ci"] for r in self.rows) / len(self.rows)

    def report(self, check: str = "simulate-cf", threshold: float = 0.95) -> ConvergenceReport:
        frac = self.inside_fraction
        return ConvergenceReport(check, CF_COLUMNS, self.rows, threshold, passed=frac >= threshold,
                                 final_error=1.0 - frac,
                                 notes={"inside_fraction": frac, "imag_max_abs": self.imag_max_abs})


def empirical_cf(sample: IncrementSample, xi_grid, model: str = "exact",
                 cfg: QuadratureConfig | None = None) -> CFCheckResult:
    """Empirical ``E cos(xi X_t)`` against the model ``exp(-t psi)`` with 3 sigma CLT bands.

    ``model="exact"`` uses the truncated exponent in Drop mode and the full
    one with Gaussian substitution; ``model="homogenized"`` replaces the
    coefficient by its mean (truncated the same way in Drop mode).
    """
    cfg = cfg or QuadratureConfig()
    X = np.asarray(sample.values)
    if X.size == 0:
        raise ValidationError("empty sample")
    plan = sample.plan
    xi = np.atleast_1d(np.asarray(xi_grid, dtype=float))
    m = plan.measure
    if model == "homogenized":
        abar = mean_value(m.a, cfg)
        m = ModulatedMeasure(PeriodicCoefficient.constant(abar), m.nu, 1.0)
    elif model != "exact":
        raise ValidationError("model must be 'exact' or 'homogenized'")
    if plan.small_jump_mode == DROP:
        psi = truncated_psi(m, plan.r, xi, cfg)
    else:
        psi = np.atleast_1d(ExponentSpec.build(m, cfg).psi_with_error(xi)[0])
    n = X.shape[0]
    rows, imag_ok, imag_max = [], True, 0.0
    for j, t in enumerate(plan.times):
        for x, p in zip(xi, psi):
            c = np.cos(x * X[:, j])
            s = np.sin(x * X[:, j])
            cr, ci = float(np.mean(c)), float(np.mean(s))
            hw = 3.0 * float(np.std(c)) / math.sqrt(n)
            hwi = 3.0 * float(np.std(s)) / math.sqrt(n)
            mod = math.exp(-t * p)
            rows.append({"t": t, "xi": float(x), "cf_real": cr, "cf_imag": ci, "model": mod,
                         "half_width": hw, "inside_ci": bool(abs(cr - mod) <= hw)})
            imag_ok &= abs(ci) <= hwi
            imag_max = max(imag_max, abs(ci))
    return CFCheckResult(rows, imag_max, bool(imag_ok))


# ---------------------------------------------------------------------------
# rescaling (stable-like processes)


RESCALE_COLUMNS = ("eps", "lhs", "rhs", "lhs_err", "rhs_err", "rel_diff", "holds")


def rescaling_identity_check(a: PeriodicCoefficient, alpha: float, eps_grid, u: TestFunction,
                             v: TestFunction | None = None, cfg: QuadratureConfig | None = None,
                             tolerance: float = 1e-6) -> ConvergenceReport:
    """``eps^(1 - alpha) E~(u(eps .), v(eps .))`` against the form with coefficient ``a(. / eps)``.

    ``E~`` is the form of ``a(x - y) |x - y|^(-1 - alpha)``; both sides are
    direct evaluations with independent parameterizations.
    """
    cfg = cfg or QuadratureConfig()
    if not 0.0 < alpha < 2.0:
        raise ValidationError("alpha must lie in (0, 2)")
    v = u if v is None else v
    nu = LevyDensitySpec.stable(alpha)
    rows = []
    for eps in [float(e) for e in eps_grid]:
        if not eps > 0:
            raise ValidationError("eps must be positive")
        left = form_direct(u.dilated(eps), ModulatedMeasure(a, nu, 1.0), cfg, v=v.dilated(eps))
        right = form_direct(u, ModulatedMeasure(a, nu, eps), cfg, v=v)
        lhs = eps ** (1.0 - alpha) * left.value
        le = eps ** (1.0 - alpha) * left.error_estimate
        rel = abs(lhs - right.value) / abs(right.value)
        rows.append({"eps": eps, "lhs": lhs, "rhs": right.value, "lhs_err": le,
                     "rhs_err": right.error_estimate, "rel_diff": rel, "holds": rel <= tolerance})
    worst = max(r["rel_diff"] for r in rows)
    return ConvergenceReport("rescale-identity", RESCALE_COLUMNS, rows, tolerance,
                             passed=all(r["holds"] for r in rows), final_error=worst)


FDD_COLUMNS = ("eps", "t", "xi", "xi2", "cf_real", "limit", "half_width", "inside_ci")


def fdd_convergence_experiment(a: PeriodicCoefficient, alpha: float, eps_sequence, t_grid, xi_grid,
                               n_samples: int, seed: int, cfg: QuadratureConfig | None = None,
                               threads: int = 1, cutoff: float = 0.125,
                               small_jump_mode: str = DROP) -> ConvergenceReport:
    """Empirical CFs of ``X_n(t) = eps_n X~(eps_n^-alpha t)`` against ``exp(-t abar psi_stable)``.

    ``X~`` has density ``a(h) |h|^(-1 - alpha)`` and is simulated with
    cutoff ``cutoff`` in its own units.  Rows with ``xi2`` set are two-time
    joint CFs ``E cos(xi X(t1) + xi2 X(t2))`` (``xi2 = xi``, first two times
    of ``t_grid``) compared with the product of increment CFs.  Passes when
    every row of the smallest ``eps`` is inside its 3 sigma band; no rate is
    claimed for the larger ones.
    """
    cfg = cfg or QuadratureConfig()
    eps_list = [float(e) for e in eps_sequence]
    if not eps_list or not strictly_decreasing(eps_list):
        raise ValidationError("eps_sequence must be nonempty and strictly decreasing")
    times = tuple(float(t) for t in t_grid)
    if not times or times[0] <= 0 or not strictly_decreasing(times[::-1]):
        raise ValidationError("t_grid must be positive and strictly increasing")
    xis = [float(x) for x in xi_grid]
    nu = LevyDensitySpec.stable(alpha)
    abar = mean_value(a, cfg)
    lim = np.atleast_1d(psi_homogenized(abar, nu, np.array(xis), cfg))
    rows = []
    for k, eps in enumerate(eps_list):
        plan = SimulationPlan(ModulatedMeasure(a, nu, 1.0), tuple(eps ** -alpha * t for t in times),
                              n_samples, cutoff, small_jump_mode, (int(seed) + k) % 2 ** 64)
        X = eps * sample_increments(plan, cfg, threads).values
        n = X.shape[0]
        for j, t in enumerate(times):
            for x, p in zip(xis, lim):
                c = np.cos(x * X[:, j])
                rows.append(_fdd_row(eps, t, x, None, c, math.exp(-t * p), n))
        if len(times) >= 2:
            t1, t2 = times[0], times[1]
            # xi X(t1) + xi X(t2) = 2 xi X(t1) + xi (X(t2) - X(t1))
            both = np.array(xis) * 2.0
            p2 = np.atleast_1d(psi_homogenized(abar, nu, both, cfg))
            for x, p, q in zip(xis, lim, p2):
                c = np.cos(x * X[:, 0] + x * X[:, 1])
                rows.append(_fdd_row(eps, t1, x, x, c, math.exp(-t1 * q - (t2 - t1) * p), n))
    last = [r for r in rows if r["eps"] == eps_list[-1]]
    inside = all(r["inside_ci"] for r in last)
    worst = max(abs(r["cf_real"] - r["limit"]) for r in last)
    return ConvergenceReport("fdd", FDD_COLUMNS, rows, passed=inside, final_error=worst,
                             notes={"abar": abar, "alpha": alpha})


def _fdd_row(eps, t, xi, xi2, c, model, n):
    cr = float(np.mean(c))
    hw = 3.0 * float(np.std(c)) / math.sqrt(n)
    return {"eps": eps, "t": t, "xi": xi, "xi2": xi2, "cf_real": cr, "limit": model,
            "half_width": hw, "inside_ci": bool(abs(cr - model) <= hw)}
