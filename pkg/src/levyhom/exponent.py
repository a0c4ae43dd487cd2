"""Characteristic exponents of modulated jump densities.

``psi_delta(xi) = int (1 - cos<xi, h>) a(h/delta) nu(h) dh`` with no diffusion
part.  In one dimension the integral is split at a multiple ``L`` of the
period ``delta``:

* ``[0, L]`` is integrated on a graded mesh whose singular shells and panel
  widths are fixed once per frequency band from the envelope
  ``min(xi^2 h^2 / 2, 2) a nu``.
* ``[L, inf)`` is written as the non-oscillatory fold (Hurwitz zeta, exact up
  to one-period quadrature) minus ``int cos(xi h) a(h/delta) h^(-1-beta)``.
  For the latter, ``xi`` is reduced modulo the lattice ``2 pi / delta`` and
  the periodic factor is expanded by repeated integration by parts against
  periodic Bernoulli functions; the coefficients are one-period moments and
  the series converges geometrically because ``|eta| delta <= pi`` and
  ``L >= 64 delta``.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special

from .errors import NotLevyMeasureError, QuadratureFailure, UnsupportedDimension, ValidationError
from .measure import (IntegrabilityReport, LevyDensitySpec, ModulatedMeasure,
                      check_levy_integrability, folded_tail, sphere_area)
from .periodic import PeriodicCoefficient, mean_value
from .quadrature import GradedRule, QuadratureConfig, gauss_legendre, integrate_singular
from .report import ConvergenceReport, strictly_decreasing

_X_ASYM = 60.0
_KMAX = 80
_ROW_BUDGET = 4_000_000


# ---------------------------------------------------------------------------
# int_x^inf cos(t) t^(-1-beta) dt


@lru_cache(maxsize=64)
def _cos_table(beta: float):
    bp = np.concatenate([2.0 ** -np.arange(80, 0, -1), np.arange(1.0, _X_ASYM + 1.0)])
    x, w = gauss_legendre(30)
    half = 0.5 * np.diff(bp)
    mid = 0.5 * (bp[1:] + bp[:-1])
    t = mid[:, None] + half[:, None] * x[None, :]
    panels = np.sum(np.cos(t) * t ** (-1.0 - beta) * w[None, :], axis=1) * half
    # J[i] = int_{bp[i]}^{X_ASYM}
    cum = np.concatenate([np.cumsum(panels[::-1])[::-1], [0.0]])
    return bp, cum


def _cos_asymptotic(x, beta: float, terms: int = 26):
    x = np.asarray(x, dtype=float)
    s, c = np.sin(x), np.cos(x)
    out = np.zeros_like(x)
    for j in range(terms):
        n = 2 * j
        f0 = special.poch(1.0 + beta, n) * x ** (-1.0 - beta - n)
        f1 = -special.poch(1.0 + beta, n + 1) * x ** (-2.0 - beta - n)
        out += (-1.0) ** j * (-s * f0 - c * f1)
    return out


def cos_tail(x, beta: float):
    """``int_x^inf cos(t) t^(-1-beta) dt`` for ``x > 0`` (vectorized)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValidationError("cos_tail needs x > 0")
    beta = float(beta)
    out = np.empty_like(x)
    big = x >= _X_ASYM
    out[big] = _cos_asymptotic(x[big], beta)
    rest = ~big
    if rest.any():
        bp, cum = _cos_table(beta)
        c60 = float(_cos_asymptotic(np.array(_X_ASYM), beta))
        xr = x[rest]
        tiny = xr < bp[0]
        idx = np.searchsorted(bp, np.where(tiny, bp[0], xr), side="left")
        b = bp[idx]
        g, w = gauss_legendre(30)
        half = 0.5 * (b - xr)
        t = 0.5 * (b + xr)[:, None] + half[:, None] * g[None, :]
        part = np.sum(np.cos(t) * t ** (-1.0 - beta) * w[None, :], axis=1) * half
        val = cum[idx] + part + c60
        # below 2^-80 cos(t) = 1 to double precision
        val = np.where(tiny, cum[0] + c60 + (xr ** -beta - bp[0] ** -beta) / beta, val)
        out[rest] = val
    return out


def cos_power_tail(eta, L: float, beta: float):
    """``int_L^inf cos(eta h) h^(-1-beta) dh`` for real ``eta``."""
    eta = np.abs(np.asarray(eta, dtype=float))
    out = np.full(eta.shape, L ** -beta / beta)
    nz = eta > 0
    out[nz] = eta[nz] ** beta * cos_tail(eta[nz] * L, beta)
    return out


# ---------------------------------------------------------------------------
# periodic Bernoulli moments


@lru_cache(maxsize=4)
def _bernoulli_toeplitz(kmax: int):
    b = special.bernoulli(kmax) / special.factorial(np.arange(kmax + 1))
    k = np.arange(kmax + 1)
    diff = k[:, None] - k[None, :]
    return np.where(diff >= 0, b[np.clip(diff, 0, kmax)], 0.0)


def bernoulli_scaled(kmax: int, u):
    """Rows ``B_k(u) / k!`` for ``k = 0..kmax``."""
    u = np.asarray(u, dtype=float).ravel()
    pw = np.empty((kmax + 1, u.size))
    pw[0] = 1.0
    for n in range(1, kmax + 1):
        pw[n] = pw[n - 1] * u / n
    return _bernoulli_toeplitz(kmax) @ pw


class _Moments:
    """One-period moments of ``cos/sin(2 pi m u) a_sym(u)`` against Bernoulli functions."""

    def __init__(self, a: PeriodicCoefficient, cfg: QuadratureConfig, kmax: int = _KMAX):
        self.a, self.cfg, self.kmax = a, cfg, kmax
        self._cache: dict[int, tuple] = {}

    def _a_sym(self, u):
        return self.a(u) + self.a(-u)

    def get(self, ms: Sequence[int]):
        missing = sorted({int(m) for m in ms} - set(self._cache))
        if missing:
            self._compute(missing)
        return [self._cache[int(m)] for m in ms]

    def _compute(self, ms):
        a, K = self.a, self.kmax + 1
        sing = sorted({float(s) for s in a.singular_points} | {float((-s) % 1.0) for s in a.singular_points})
        if 0.0 in sing:
            sing.append(1.0)
        kinks = sorted({float(k) for k in a.kinks} | {float((-k) % 1.0) for k in a.kinks})
        for chunk in np.array_split(np.array(ms), max(1, len(ms) // 16)):
            width = min(0.125, 0.25 / (int(chunk.max()) + 1))
            rule = GradedRule.build(self._a_sym, 0.0, 1.0, sing, self.cfg, kinks, max_width=width)
            u = rule.nodes
            base = self._a_sym(u)
            bern = bernoulli_scaled(K, u)
            rows = []
            for m in chunk:
                rows.append(np.cos(2 * np.pi * m * u) * base * bern)
                rows.append(np.sin(2 * np.pi * m * u) * base * bern)
            vals, errs, codes = rule.integrate(np.concatenate(rows, axis=0))
            if np.any(codes != 0):
                raise QuadratureFailure("periodic moments did not converge")
            vals = vals.reshape(len(chunk), 2, K + 1)
            errs = errs.reshape(len(chunk), 2, K + 1)
            sign = -((-1.0) ** np.arange(K + 1))
            for i, m in enumerate(chunk):
                pc = sign * vals[i, 0]
                ps = sign * vals[i, 1]
                self._cache[int(m)] = (vals[i, 0, 0], pc, ps, errs[i, 0, 0], errs[i, 0], errs[i, 1])


def _derivative_series(eta, L: float, delta: float, beta: float, kmax: int):
    """``delta^(j+1) d^j/dh^j [exp(i eta h) h^(-1-beta)]`` at ``h = L``, rows j = 0..kmax."""
    eta = np.asarray(eta, dtype=float)
    z = 1j * eta * delta
    rho = delta / L
    poch = special.poch(1.0 + beta, np.arange(kmax + 1)) * (-rho) ** np.arange(kmax + 1)
    zp = np.ones((kmax + 1, eta.size), dtype=complex)
    for i in range(1, kmax + 1):
        zp[i] = zp[i - 1] * z
    out = np.empty((kmax + 1, eta.size), dtype=complex)
    for j in range(kmax + 1):
        binom = special.comb(j, np.arange(j + 1))
        out[j] = np.sum((binom * poch[j::-1])[:, None] * zp[: j + 1], axis=0)
    return out * (delta * L ** (-1.0 - beta) * np.exp(1j * eta * L))[None, :]


# ---------------------------------------------------------------------------
# exponent specification


class ExponentSpec:
    """A modulated measure cleared for exponent evaluation.

    Construct with :meth:`build`, which runs the integrability check first;
    the integrand is ``(1 - cos<xi, h>) a_delta(h) nu(h)``.
    """

    def __init__(self, measure: ModulatedMeasure, cfg: QuadratureConfig,
                 integrability: IntegrabilityReport):
        self.measure = measure
        self.cfg = cfg
        self.integrability = integrability
        self._rules: dict = {}
        self._tail = None
        self._moments = None

    @classmethod
    def build(cls, measure: ModulatedMeasure, cfg: QuadratureConfig | None = None) -> "ExponentSpec":
        cfg = cfg or QuadratureConfig()
        if measure.nu.kind == "example1ii":
            raise ValidationError("psi supports stable and truncated_stable densities")
        rep = check_levy_integrability(measure, cfg)
        if not rep.is_levy:
            raise NotLevyMeasureError(f"not a Levy density at delta={measure.delta}: {rep.overall}", rep)
        return cls(measure, cfg, rep)

    # -- one-dimensional layout -------------------------------------------
    @property
    def split(self) -> float:
        m = self.measure
        if m.nu.kind == "truncated_stable":
            return m.nu.R
        d = m.delta
        return d * math.ceil(max(1.0, 64.0 * d) / d - 1e-9)

    def _rule(self, xi_max: float) -> GradedRule:
        band = 4.0 ** max(0, math.ceil(math.log(max(xi_max, 1.0), 4.0) - 1e-12))
        if band not in self._rules:
            m, L = self.measure, self.split
            width = min(L / 16.0, 4.0 / band)
            if not (m.a.kind == "constant"):
                width = min(width, m.delta / 4.0)

            def envelope(h):
                return np.minimum(0.5 * band * band * h * h, 2.0) * m.folded(h)

            sing = [0.0, *m.singular_points(0.0, L)]
            self._rules[band] = GradedRule.build(envelope, 0.0, L, sing, self.cfg,
                                                 m.kinks(0.0, L), max_width=width)
        return self._rules[band]

    def _near(self, xi: np.ndarray):
        rule = self._rule(float(xi.max()))
        h = rule.nodes
        dens = self.measure.folded(h)
        vals = np.empty(xi.size)
        errs = np.empty(xi.size)
        step = max(1, _ROW_BUDGET // h.size)
        for s in range(0, xi.size, step):
            x = xi[s:s + step]
            f = 2.0 * np.sin(0.5 * x[:, None] * h[None, :]) ** 2 * dens[None, :]
            v, e, c = rule.integrate(f)
            if np.any(c != 0):
                raise QuadratureFailure("near-region exponent quadrature did not converge")
            vals[s:s + step], errs[s:s + step] = v, e
        return vals, errs

    def _tail_values(self, xi: np.ndarray):
        m = self.measure
        if m.nu.kind == "truncated_stable":
            return np.zeros(xi.size), np.zeros(xi.size)
        L, beta, delta = self.split, m.nu.beta, m.delta
        a = m.a
        if a.kind == "constant":
            c = a.params[0]
            return 2.0 * c * (L ** -beta / beta - cos_power_tail(xi, L, beta)), np.zeros(xi.size)
        if self._tail is None:
            self._tail = folded_tail(m, L, self.cfg)
            self._tail.require()
            self._moments = _Moments(a, self.cfg)
        F = self._tail
        mm = np.rint(xi * delta / (2 * np.pi)).astype(int)
        eta = xi - 2 * np.pi * mm / delta
        K = _KMAX
        D = _derivative_series(eta, L, delta, beta, K)
        sign = (-1.0) ** (np.arange(K + 1) + 1)
        osc = np.empty(xi.size)
        err = np.empty(xi.size)
        for i, mom in enumerate(self._moments.get(mm)):
            qbar, pc, ps, qerr, pcerr, pserr = mom
            terms = sign * (pc[1:K + 2] * D[:, i].real - ps[1:K + 2] * D[:, i].imag)
            ccos = float(cos_power_tail(eta[i:i + 1], L, beta)[0])
            osc[i] = qbar * ccos + math.fsum(terms)
            err[i] = (abs(terms[-1]) + abs(terms[-2]) + qerr * abs(ccos)
                      + float(np.sum(pcerr[1:K + 2] * np.abs(D[:, i].real)
                                     + pserr[1:K + 2] * np.abs(D[:, i].imag))))
        return F.value - osc, err + F.error

    def psi_with_error(self, xi):
        """Values and error estimates of ``psi`` on an array of frequencies."""
        m = self.measure
        if m.dim > 1:
            return _psi_multid(self, xi)
        xi = np.abs(np.asarray(xi, dtype=float))
        shape = xi.shape
        flat = xi.ravel()
        vals = np.zeros(flat.size)
        errs = np.zeros(flat.size)
        nz = np.flatnonzero(flat > 0)
        if nz.size:
            keys = np.ceil(np.log(np.maximum(flat[nz], 1.0)) / math.log(4.0) - 1e-12)
            for k in np.unique(keys):
                sel = nz[keys == k]
                v, e = self._near(flat[sel])
                tv, te = self._tail_values(flat[sel])
                vals[sel] = v + tv
                errs[sel] = e + te
        bad = errs > 10 * np.maximum(self.cfg.rel_tol * np.abs(vals), self.cfg.abs_tol) + 1e-12 * vals
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise QuadratureFailure(f"psi error estimate {errs[i]:.3g} too large at xi={flat[i]}")
        return vals.reshape(shape), errs.reshape(shape)


def psi(e: ExponentSpec, xi):
    """``psi_delta(xi)``; scalar in, scalar out."""
    v, _ = e.psi_with_error(xi)
    return float(v) if np.ndim(v) == 0 else v


def psi_homogenized(abar: float, nu: LevyDensitySpec, xi, cfg: QuadratureConfig | None = None):
    """``abar * psi`` of the unmodulated density ``nu``."""
    if abar < 0:
        raise ValidationError("abar must be nonnegative")
    if abar == 0:
        return 0.0 if np.ndim(xi) == 0 else np.zeros(np.shape(xi)[:-1] if nu.dim > 1 else np.shape(xi))
    spec = _unit_spec(nu, cfg or QuadratureConfig())
    return abar * psi(spec, xi)


@lru_cache(maxsize=32)
def _unit_spec(nu: LevyDensitySpec, cfg: QuadratureConfig) -> ExponentSpec:
    return ExponentSpec.build(ModulatedMeasure(PeriodicCoefficient.constant(1.0, nu.dim), nu, 1.0), cfg)


# ---------------------------------------------------------------------------
# d >= 2 (constant coefficients)


def sin_tail(x, beta: float):
    """``int_x^inf sin(t) t^(-1-beta) dt``, by parts against :func:`cos_tail`.

    The two terms cancel for small ``x``; only the large-argument tails use it.
    """
    x = np.asarray(x, dtype=float)
    return np.cos(x) * x ** (-1.0 - beta) - (1.0 + beta) * cos_tail(x, beta + 1.0)


def _sphere_cos_mean(t, d: int):
    """``int_S cos(t theta_1) dtheta`` on the unit sphere of R^d."""
    nu = 0.5 * d - 1.0
    t = np.asarray(t, dtype=float)
    with np.errstate(all="ignore"):
        out = sphere_area(d) * special.gamma(0.5 * d) * (2.0 / t) ** nu * special.jv(nu, t)
    return np.where(t == 0, sphere_area(d), out)


_HANKEL_T = 400.0


@lru_cache(maxsize=32)
def _radial_unit(d: int, beta: float, cfg: QuadratureConfig):
    """``int_0^inf t^(-1-beta) int_S (1 - cos(t theta_1)) dtheta dt`` and its error."""
    S = sphere_area(d)
    T = _HANKEL_T

    def f(t):
        small = t < 1e-3
        ts = np.where(small, 1.0, t)
        full = S - _sphere_cos_mean(ts, d)
        series = S * (t * t / (2 * d) - t ** 4 / (8 * d * (d + 2)))
        return np.where(small, series, full) * t ** (-1.0 - beta)

    body = integrate_singular(f, 0.0, T, [0.0], cfg, max_width=2.0).require()
    # Hankel expansion of the Bessel function beyond T; each term is a power
    # times cos or sin of (t - phase), integrated exactly by the tail helpers.
    nu = 0.5 * d - 1.0
    mu = 4 * nu * nu
    phase = 0.5 * nu * np.pi + 0.25 * np.pi
    pref = S * special.gamma(0.5 * d) * 2.0 ** nu * math.sqrt(2.0 / math.pi)
    a = [1.0]
    for k in range(1, 7):
        a.append(a[-1] * (mu - (2 * k - 1) ** 2) / (k * 8.0))
    osc = 0.0
    for k, ak in enumerate(a):
        p = 1.0 + beta + nu + 0.5 + k  # power of t in this term
        c = float(cos_tail(np.array([T]), p - 1.0)[0])
        s_ = float(sin_tail(np.array([T]), p - 1.0)[0])
        # the k-th term carries cos(t - phase + k pi/2)
        ph = phase - 0.5 * k * np.pi
        osc += ak * (math.cos(ph) * c + math.sin(ph) * s_)
    osc *= pref
    rest_err = abs(a[-1]) * pref * T ** (-1.0 - beta - nu - 0.5 - len(a)) * 10.0
    val = body + S * T ** -beta / beta - osc
    return val, rest_err + abs(val) * cfg.rel_tol


def _psi_multid(e: ExponentSpec, xi):
    """Radial reduction for ``a = c`` in d >= 2: ``psi(xi) = c |xi|^beta I_d(beta)``."""
    m = e.measure
    d, beta = m.dim, m.nu.beta
    if m.a.kind != "constant" or m.nu.kind != "stable":
        raise UnsupportedDimension("d > 1 exponents need a constant coefficient and a stable density")
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != d:
        raise ValidationError(f"xi must have last axis of length {d}")
    rho = np.linalg.norm(xi, axis=-1)
    unit, unit_err = _radial_unit(d, beta, e.cfg)
    c = m.a.params[0]
    return c * unit * rho ** beta, c * unit_err * rho ** beta


# ---------------------------------------------------------------------------
# convergence scans

SCAN_COLUMNS = ("delta", "xi", "psi", "psi_limit", "abs_err", "rel_err")


def exponent_convergence_scan(a: PeriodicCoefficient, nu: LevyDensitySpec, xi_grid,
                              delta_sequence, cfg: QuadratureConfig | None = None,
                              tolerance: float = 1e-2) -> ConvergenceReport:
    """Compare ``psi_delta`` with ``abar * psi`` along a decreasing sequence of scales."""
    cfg = cfg or QuadratureConfig()
    deltas = [float(d) for d in delta_sequence]
    xis = np.asarray(xi_grid, dtype=float)
    if not deltas or xis.size == 0:
        raise ValidationError("scan grids must be nonempty")
    monotone = strictly_decreasing(deltas)
    if not monotone:
        raise ValidationError("delta_sequence must be strictly decreasing")
    abar = mean_value(a, cfg)
    limit = psi_homogenized(abar, nu, xis, cfg)
    rows = []
    for delta in deltas:
        try:
            spec = ExponentSpec.build(ModulatedMeasure(a, nu, delta), cfg)
        except NotLevyMeasureError as exc:
            raise NotLevyMeasureError(f"integrability failed at delta={delta}", exc.report) from exc
        vals = np.atleast_1d(psi(spec, xis))
        for x, v, lim in zip(xis, vals, np.atleast_1d(limit)):
            ae = abs(v - lim)
            rows.append({"delta": delta, "xi": float(x), "psi": float(v), "psi_limit": float(lim),
                         "abs_err": float(ae), "rel_err": float(ae / lim) if lim else 0.0})
    final = [r["rel_err"] for r in rows if r["delta"] == deltas[-1]]
    worst = max(final)
    return ConvergenceReport("exponent-scan", SCAN_COLUMNS, rows, tolerance,
                             passed=worst <= tolerance, monotone_deltas=monotone,
                             final_error=worst, notes={"abar": abar})
