"""Symmetric Levy densities, modulated densities a(h/delta) nu(h), integrability checks."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DomainError, UnsupportedDimension, ValidationError
from .periodic import (UNBOUNDED, PeriodicCoefficient, eval_periodic, mean_value,
                       shifted_coefficient)
from .quadrature import (CONVERGED, QuadratureConfig, QuadratureOutcome,
                         combine, hurwitz_zeta, integrate_singular)

LEVY = "levy_measure"
NOT_LEVY = "not_levy_measure"
INCONCLUSIVE = "inconclusive"


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class LevyDensitySpec:
    """A symmetric Levy density.

    kind ``stable``: |h|^(-d-beta).  kind ``example1ii``: b(h)|h|^(-1-beta) with
    b(x) = a(x - 1/2) built from the example coefficient with exponent
    ``gamma``.  kind ``truncated_stable``: |h|^(-1-beta) on |h| <= R.
    """

    kind: str
    beta: float
    dim: int = 1
    gamma: float | None = None
    R: float | None = None

    def __post_init__(self):
        if not 0.0 < self.beta < 2.0:
            raise ValidationError("density.beta must lie in (0, 2)")
        if self.kind not in ("stable", "example1ii", "truncated_stable"):
            raise ValidationError(f"density.kind: unknown kind {self.kind!r}")
        if self.dim < 1:
            raise ValidationError("density.dim must be >= 1")
        if self.kind == "example1ii":
            if self.dim != 1:
                raise UnsupportedDimension("example1ii densities are one-dimensional")
            if self.gamma is None or not 0.0 < self.gamma < 1.0:
                raise ValidationError("density.gamma must lie in (0, 1)")
        if self.kind == "truncated_stable":
            if self.dim != 1:
                raise UnsupportedDimension("truncated_stable densities are one-dimensional")
            if self.R is None or not self.R > 0:
                raise ValidationError("density.R must be positive")

    @classmethod
    def stable(cls, beta: float, dim: int = 1) -> "LevyDensitySpec":
        return cls("stable", float(beta), dim)

    @classmethod
    def example1ii(cls, beta: float, gamma: float) -> "LevyDensitySpec":
        return cls("example1ii", float(beta), 1, float(gamma))

    @classmethod
    def truncated_stable(cls, beta: float, R: float) -> "LevyDensitySpec":
        return cls("truncated_stable", float(beta), 1, None, float(R))

    @property
    def locally_bounded_away_from_origin(self) -> bool:
        return self.kind != "example1ii"

    @property
    def is_pure_power(self) -> bool:
        return self.kind == "stable"

    @property
    def periodic_factor(self) -> PeriodicCoefficient | None:
        if self.kind == "example1ii":
            return _b_factor(self.gamma)
        return None

    def radial(self, r):
        """Radial profile |h|^(-d-beta) (truncated where applicable), r > 0."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.power(r, -self.dim - self.beta)
        if self.kind == "truncated_stable":
            out = np.where(r <= self.R, out, 0.0)
        return out

    def __call__(self, h):
        """Vectorized density; for dim > 1 the last axis holds coordinates."""
        h = np.asarray(h, dtype=float)
        if self.dim > 1:
            return self.radial(np.linalg.norm(h, axis=-1))
        out = self.radial(np.abs(h))
        if self.kind == "example1ii":
            out = out * self.periodic_factor(h)
        return out

    def singular_points(self, lo: float, hi: float):
        """Singular points of the periodic factor inside [lo, hi] (1-d)."""
        b = self.periodic_factor
        if b is None:
            return []
        return _lattice_points(b.singular_points, 1.0, lo, hi)

    def kinks(self, lo: float, hi: float):
        b = self.periodic_factor
        if b is None:
            out = []
        else:
            out = _lattice_points(b.kinks, 1.0, lo, hi)
        if self.kind == "truncated_stable" and lo < self.R < hi:
            out.append(self.R)
        return out

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "beta": self.beta, "dim": self.dim}
        if self.gamma is not None:
            d["gamma"] = self.gamma
        if self.R is not None:
            d["R"] = self.R
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LevyDensitySpec":
        kind = d.get("kind")
        if "beta" not in d:
            raise ValidationError("density.beta: missing")
        if kind == "stable":
            return cls.stable(float(d["beta"]), int(d.get("dim", 1)))
        if kind == "example1ii":
            return cls.example1ii(float(d["beta"]), float(d["gamma"]))
        if kind == "truncated_stable":
            return cls.truncated_stable(float(d["beta"]), float(d["R"]))
        raise ValidationError(f"density.kind: unknown kind {kind!r}")


@lru_cache(maxsize=None)
def _b_factor(gamma: float) -> PeriodicCoefficient:
    return shifted_coefficient(PeriodicCoefficient.example1(gamma), 0.5)


def _lattice_points(offsets, period, lo, hi):
    """All points ``period*(k + s)`` inside [lo, hi] for s in offsets."""
    out = []
    for s in offsets:
        k0 = math.ceil(lo / period - s - 1e-12)
        k1 = math.floor(hi / period - s + 1e-12)
        out.extend(period * (k + s) for k in range(k0, k1 + 1))
    return out


@dataclass(frozen=True)
class ModulatedMeasure:
    """Density ``a(h/delta) * nu(h)``; ``delta = 1`` is the unmodulated product."""

    a: PeriodicCoefficient
    nu: LevyDensitySpec
    delta: float = 1.0

    def __post_init__(self):
        if not self.delta > 0 or not math.isfinite(self.delta):
            raise ValidationError("delta must be positive")
        if self.a.dim != self.nu.dim:
            raise ValidationError("coefficient and density dimensions differ")

    @property
    def dim(self) -> int:
        return self.a.dim

    def with_delta(self, delta: float) -> "ModulatedMeasure":
        return ModulatedMeasure(self.a, self.nu, float(delta))

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        return self.a(h / self.delta) * self.nu(h)

    def a_sym(self, h):
        """``a(h/delta) + a(-h/delta)`` (1-d), the coefficient seen by even integrands on h > 0."""
        h = np.asarray(h, dtype=float)
        return self.a(h / self.delta) + self.a(-h / self.delta)

    def folded(self, h):
        """Even part of the density times two, for h > 0 (1-d)."""
        h = np.asarray(h, dtype=float)
        return self.a_sym(h) * self.nu(h)

    def singular_points(self, lo: float, hi: float):
        if self.dim != 1:
            raise UnsupportedDimension("singular point lists are one-dimensional")
        s = self.a.singular_points
        pts = _lattice_points(s, self.delta, lo, hi)
        pts += _lattice_points([(-x) % 1.0 for x in s], self.delta, lo, hi)
        pts += self.nu.singular_points(lo, hi)
        return sorted(set(pts))

    def kinks(self, lo: float, hi: float):
        k = self.a.kinks
        pts = _lattice_points(k, self.delta, lo, hi)
        pts += _lattice_points([(-x) % 1.0 for x in k], self.delta, lo, hi)
        pts += self.nu.kinks(lo, hi)
        return sorted(set(pts))

    def period(self) -> float:
        """Common period of the periodic factors of the folded density (1-d)."""
        if self.nu.periodic_factor is None:
            return self.delta
        frac = Fraction(self.delta).limit_denominator(10_000)
        if abs(float(frac) - self.delta) > 1e-12 * self.delta:
            raise ValidationError("example1ii needs a rational delta p/q with q <= 10000")
        return float(frac.numerator)

    def to_dict(self) -> dict:
        return {"coefficient": self.a.to_dict(), "density": self.nu.to_dict(), "delta": self.delta}


def modulated_density(m: ModulatedMeasure, h):
    """Pointwise density at ``h != 0``; ``UNBOUNDED`` propagates from either factor."""
    h_arr = np.atleast_1d(np.asarray(h, dtype=float))
    if not np.any(h_arr):
        raise DomainError("modulated_density is undefined at h = 0")
    av = eval_periodic(m.a, h_arr / m.delta if m.dim > 1 else float(h_arr[0]) / m.delta)
    if av is UNBOUNDED:
        return UNBOUNDED
    nv = float(m.nu(h_arr if m.dim > 1 else h_arr[0]))
    if math.isinf(nv):
        return UNBOUNDED
    return av * nv


# ---------------------------------------------------------------------------
# integrability


@dataclass(frozen=True)
class IntegrabilityReport:
    near_origin: QuadratureOutcome
    tail: QuadratureOutcome
    overall: str
    which: str = ""

    @property
    def value(self) -> float:
        if self.overall != LEVY:
            return math.nan
        return self.near_origin.value + self.tail.value

    @property
    def is_levy(self) -> bool:
        return self.overall == LEVY

    def row(self, beta=None, gamma=None, delta=None) -> dict:
        return {"beta": beta, "gamma": gamma, "delta": delta, "verdict": self.overall,
                "value": None if math.isnan(self.value) else self.value,
                "near_origin_error": _nan_none(self.near_origin.error),
                "tail_error": _nan_none(self.tail.error),
                "diverged": self.which or None}


def _nan_none(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def _classify(near: QuadratureOutcome, tail: QuadratureOutcome) -> IntegrabilityReport:
    div = [name for name, o in (("near_origin", near), ("tail", tail)) if o.divergent]
    if div:
        return IntegrabilityReport(near, tail, NOT_LEVY, ",".join(div))
    if near.converged and tail.converged:
        return IntegrabilityReport(near, tail, LEVY)
    return IntegrabilityReport(near, tail, INCONCLUSIVE)


def folded_tail(m: ModulatedMeasure, L: float, cfg: QuadratureConfig) -> QuadratureOutcome:
    """``int_L^inf a_sym(h/delta) nu(h) dh`` for h > 0 by folding onto one period.

    ``L`` must be a multiple of :meth:`ModulatedMeasure.period`.  Each period
    is weighted by a Hurwitz-zeta sum of the power-law profile, so the tail
    is exact apart from the quadrature over a single period.
    """
    beta = m.nu.beta
    P = m.period()
    K = round(L / P)
    if abs(K * P - L) > 1e-9 * max(1.0, L) or K < 1:
        raise ValidationError("folded_tail: L must be a positive multiple of the period")

    def periodic_part(h):
        out = m.a_sym(h)
        b = m.nu.periodic_factor
        if b is not None:
            out = out * b(h)
        return out

    def f(u):
        return P ** (-beta) * periodic_part(P * u) * hurwitz_zeta(1.0 + beta, K + u)

    sing = [x / P for x in m.singular_points(0.0, P)]
    kinks = [x / P for x in m.kinks(0.0, P)]
    return integrate_singular(f, 0.0, 1.0, sing, cfg, breakpoints=kinks)


def check_levy_integrability(m: ModulatedMeasure, cfg: QuadratureConfig | None = None) -> IntegrabilityReport:
    """Classify ``a_delta * nu`` as a Levy density: both parts of int (1 ^ |h|^2) must be finite."""
    cfg = cfg or QuadratureConfig()
    if m.dim > 1:
        return _check_multid(m, cfg)
    sing = [0.0, *m.singular_points(0.0, 1.0)]
    kinks = m.kinks(0.0, 1.0)

    def near_f(h):
        return h * h * m.folded(h)

    near = integrate_singular(near_f, 0.0, 1.0, sing, cfg, breakpoints=kinks)

    if m.nu.kind == "truncated_stable":
        R = m.nu.R
        if R <= 1.0:
            tail = QuadratureOutcome(CONVERGED, 0.0, 0.0)
        else:
            tail = integrate_singular(m.folded, 1.0, R, m.singular_points(1.0, R), cfg,
                                      breakpoints=m.kinks(1.0, R))
        return _classify(near, tail)

    P = m.period()
    L = P * math.ceil(1.0 / P - 1e-12)
    parts = []
    if L > 1.0 + 1e-12:
        parts.append(integrate_singular(m.folded, 1.0, L, m.singular_points(1.0, L), cfg,
                                        breakpoints=m.kinks(1.0, L)))
    parts.append(folded_tail(m, L, cfg))
    return _classify(near, combine(parts))


def _angular_mean(a: PeriodicCoefficient, delta: float, r, d: int):
    """Average of a(r theta / delta) over the unit sphere, for each radius in r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    m = int(64 + 16 * math.ceil(float(np.max(r)) / delta))
    if d == 2:
        th = 2 * np.pi * (np.arange(m) + 0.5) / m
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        w = np.full(m, 1.0 / m)
    elif d == 3:
        xg, wg = np.polynomial.legendre.leggauss(max(16, m // 2))
        th = 2 * np.pi * (np.arange(m) + 0.5) / m
        ct, ph = np.meshgrid(xg, th, indexing="ij")
        st = np.sqrt(1 - ct**2)
        dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1).reshape(-1, 3)
        w = (np.repeat(wg, m) / (2.0 * m))
    else:
        raise UnsupportedDimension("multi-dimensional checks support d = 2 or 3")
    pts = r[:, None, None] * dirs[None, :, :] / delta
    return np.sum(a(pts) * w[None, :], axis=1)


def _check_multid(m: ModulatedMeasure, cfg: QuadratureConfig) -> IntegrabilityReport:
    if not m.a.bounded or m.nu.kind != "stable":
        raise UnsupportedDimension("d > 1 needs a bounded coefficient and a stable density")
    d, beta, S = m.dim, m.nu.beta, sphere_area(m.dim)

    def radial_mean(r):
        return S * _angular_mean(m.a, m.delta, r, d)

    near = integrate_singular(lambda r: r ** (1.0 - beta) * radial_mean(r), 0.0, 1.0, [0.0], cfg,
                              max_width=max(m.delta, 1e-3))
    R = max(4.0, 16 * m.delta)
    body = integrate_singular(lambda r: r ** (-1.0 - beta) * radial_mean(r), 1.0, R, (), cfg,
                              max_width=m.delta)
    abar = mean_value(m.a, cfg)
    fluct = float(np.max(np.abs(radial_mean(np.linspace(R, 2 * R, 9)) - S * abar)))
    rest = S * abar * R ** -beta / beta
    tail = combine([body, QuadratureOutcome(CONVERGED, rest, fluct * R ** -beta / beta)])
    return _classify(near, tail)


# ---------------------------------------------------------------------------
# Example 1 reproduction


def example1_admissible(beta: float, gamma: float) -> bool:
    return 0.0 < gamma < min(1.0, 2.0 - beta)


def example1_constants(gamma: float, beta: float, cfg: QuadratureConfig | None = None):
    """The two finite constants of the worked example, each via its four-piece split.

    Returns ``(c_gamma, c, pieces)`` where ``c_gamma = int_0^1 h^2 a nu dh`` with
    the shifted-factor density, ``c = int_0^1 a(h) b(h) dh``, and ``pieces``
    maps each name to its four piece values.
    """
    cfg = cfg or QuadratureConfig()
    if not example1_admissible(beta, gamma):
        raise ValidationError("example1_constants needs 0 < gamma < min(1, 2 - beta)")
    a = PeriodicCoefficient.example1(gamma)
    b = _b_factor(gamma)
    cuts = [0.0, 0.25, 0.5, 0.75, 1.0]
    sing = {0.0, 0.5, 1.0}

    def split(f):
        outs = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            outs.append(integrate_singular(f, lo, hi, [s for s in sing if lo <= s <= hi], cfg))
        return outs

    pg = split(lambda h: h ** (1.0 - beta) * a(h) * b(h))
    pc = split(lambda h: a(h) * b(h))
    c_gamma = combine(pg).require()
    c = combine(pc).require()
    return c_gamma, c, {"c_gamma": [o.value for o in pg], "c": [o.value for o in pc]}


def example1_matrix(betas=(0.5, 1.0, 1.4), gammas=(0.2, 0.55, 0.8),
                    deltas=(1.0, 0.5), cfg: QuadratureConfig | None = None,
                    include_iii=True, iii_deltas=(1.0, 0.5, 1.0 / 3.0, 0.05)):
    """Integrability verdicts for the example's two constructions over a parameter grid.

    Part (ii) pairs the example coefficient with the shifted-factor density;
    part (iii) pairs it with the plain stable density.  Inadmissible
    (beta, gamma) pairs are skipped.
    """
    cfg = cfg or QuadratureConfig()
    rows = []
    for beta in betas:
        for gamma in gammas:
            if not example1_admissible(beta, gamma):
                continue
            a = PeriodicCoefficient.example1(gamma)
            for delta in deltas:
                m = ModulatedMeasure(a, LevyDensitySpec.example1ii(beta, gamma), delta)
                rep = check_levy_integrability(m, cfg)
                expected = LEVY if (delta == 1.0 or not (beta < 1.5 and gamma >= 0.5)) else NOT_LEVY
                row = rep.row(beta, gamma, delta)
                row.update(part="ii", expected=expected, match=rep.overall == expected)
                rows.append(row)
            if include_iii:
                for delta in iii_deltas:
                    m = ModulatedMeasure(a, LevyDensitySpec.stable(beta), delta)
                    rep = check_levy_integrability(m, cfg)
                    row = rep.row(beta, gamma, delta)
                    row.update(part="iii", expected=LEVY, match=rep.overall == LEVY)
                    rows.append(row)
    return rows
