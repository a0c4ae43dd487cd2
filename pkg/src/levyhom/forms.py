"""Dirichlet forms of modulated jump densities and the convergence checks built on them.

The form is ``E(u, v) = iint (u(x) - u(y)) (v(x) - v(y)) a_delta(y - x) nu(y - x) dy dx``
(no factor 1/2).  In one dimension it is evaluated as an iterated integral

    E(u, v) = int_0^inf D(z) (a_delta(z) + a_delta(-z)) nu(z) dz,
    D(z) = int (u(x + z) - u(x)) (v(x + z) - v(x)) dx,

where ``D(z) = 2 <u, v>`` once ``z`` exceeds the joint support width, so the
far part is a constant times a folded tail of the density.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import (ExponentOutOfRange, NormalizationMismatch, NotLevyMeasureError,
                     QuadratureFailure, UnsupportedDimension, ValidationError)
from .exponent import ExponentSpec, cos_tail
from .measure import LevyDensitySpec, ModulatedMeasure, check_levy_integrability, folded_tail
from .periodic import PeriodicCoefficient, mean_value
from .quadrature import QuadratureConfig, gauss_legendre, integrate_singular
from .report import ConvergenceReport, non_increasing_tail, strictly_decreasing

FORM_COLUMNS = ("delta", "xi", "value", "limit", "abs_err", "rel_err", "method")

DIRECT = "direct"
SPECTRAL = "spectral"


# ---------------------------------------------------------------------------
# test functions


def _bump_profile(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    s = np.where(inside, 1.0 - t * t, 1.0)
    return np.where(inside, np.exp(1.0 - 1.0 / s), 0.0)


def _bump_slope(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    s = np.where(inside, 1.0 - t * t, 1.0)
    return np.where(inside, np.exp(1.0 - 1.0 / s) * (-2.0 * t / (s * s)), 0.0)


@lru_cache(maxsize=1)
def _bump_lipschitz() -> float:
    res = optimize.minimize_scalar(lambda t: -abs(float(_bump_slope(t))), bounds=(0.0, 1.0),
                                   method="bounded", options={"xatol": 1e-12})
    return float(-res.fun)


@dataclass(frozen=True)
class TestFunction:
    """A compactly supported Lipschitz function on the line.

    Tents and general piecewise-linear functions store knots and values
    (zero at both ends).  A smooth bump stores ``(center, radius)`` and a
    height; its profile is ``height * exp(1 - 1/(1 - t^2))``.
    """

    __test__ = False  # not a pytest class

    kind: str
    knots: tuple
    values: tuple

    # -- constructors -----------------------------------------------------
    @classmethod
    def tent(cls, center: float, halfwidth: float, height: float = 1.0) -> "TestFunction":
        if not halfwidth > 0:
            raise ValidationError("tent: halfwidth must be positive")
        c, w = float(center), float(halfwidth)
        return cls("tent", (c - w, c, c + w), (0.0, float(height), 0.0))

    @classmethod
    def piecewise_linear(cls, knots: Sequence[float], values: Sequence[float]) -> "TestFunction":
        knots = tuple(float(k) for k in knots)
        values = tuple(float(v) for v in values)
        if len(knots) != len(values) or len(knots) < 2:
            raise ValidationError("piecewise_linear: need matching knots and values (>= 2)")
        if any(b <= a for a, b in zip(knots[:-1], knots[1:])):
            raise ValidationError("piecewise_linear: knots must be strictly increasing")
        if values[0] != 0.0 or values[-1] != 0.0:
            raise ValidationError("piecewise_linear: values must vanish at the end knots")
        if not all(map(math.isfinite, knots + values)):
            raise ValidationError("piecewise_linear: knots and values must be finite")
        return cls("piecewise_linear", knots, values)

    @classmethod
    def smooth_bump(cls, center: float, radius: float, height: float = 1.0) -> "TestFunction":
        if not radius > 0:
            raise ValidationError("smooth_bump: radius must be positive")
        return cls("smooth_bump", (float(center), float(radius)), (float(height),))

    # -- metadata ---------------------------------------------------------
    @property
    def is_linear(self) -> bool:
        return self.kind != "smooth_bump"

    @property
    def support(self) -> tuple[float, float]:
        if self.is_linear:
            return self.knots[0], self.knots[-1]
        c, r = self.knots
        return c - r, c + r

    @property
    def breakpoints(self) -> tuple:
        return self.knots if self.is_linear else self.support

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    @property
    def lipschitz_constant(self) -> float:
        if self.is_linear:
            return float(np.max(np.abs(self.slopes)))
        return abs(self.values[0]) / self.knots[1] * _bump_lipschitz()

    @property
    def slope_jumps(self) -> np.ndarray:
        """Jumps of ``u'`` at the knots (piecewise-linear kinds)."""
        s = np.concatenate([[0.0], self.slopes, [0.0]])
        return np.diff(s)

    # -- evaluation -------------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_linear:
            return np.interp(x, self.knots, self.values, left=0.0, right=0.0)
        c, r = self.knots
        return self.values[0] * _bump_profile((x - c) / r)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_linear:
            idx = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, len(self.knots) - 2)
            inside = (x >= self.knots[0]) & (x < self.knots[-1])
            return np.where(inside, self.slopes[idx], 0.0)
        c, r = self.knots
        return self.values[0] / r * _bump_slope((x - c) / r)

    def increment(self, x, z):
        """``u(x + z) - u(x)`` for ``z >= 0``, free of cancellation for small ``z``."""
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.is_linear:
            xs = np.asarray(self.knots)
            start = np.maximum(x[..., None], xs[:-1])
            # overlap of [x, x + z] with each piece, measured from z so a
            # shift inside one piece returns exactly slope * z
            length = np.minimum(z[..., None] - (start - x[..., None]), xs[1:] - start)
            return np.sum(self.slopes * np.clip(length, 0.0, None), axis=-1)
        small = z < 0.05 * self.knots[1]
        g, w = gauss_legendre(8)
        t = 0.5 * (g + 1.0)
        mean_slope = np.sum(0.5 * w * self.derivative(x[..., None] + t * z[..., None]), axis=-1)
        return np.where(small, z * mean_slope, self(x + z) - self(x))

    # -- transforms -------------------------------------------------------
    def scaled(self, c: float) -> "TestFunction":
        c = float(c)
        return TestFunction(self.kind, self.knots, tuple(c * v for v in self.values))

    def translated(self, t: float) -> "TestFunction":
        """``x -> u(x - t)``."""
        if self.is_linear:
            return TestFunction(self.kind, tuple(k + t for k in self.knots), self.values)
        c, r = self.knots
        return TestFunction(self.kind, (c + t, r), self.values)

    def dilated(self, s: float) -> "TestFunction":
        """``x -> u(s x)`` for ``s > 0``."""
        if not s > 0:
            raise ValidationError("dilated: s must be positive")
        if self.is_linear:
            return TestFunction(self.kind, tuple(k / s for k in self.knots), self.values)
        c, r = self.knots
        return TestFunction(self.kind, (c / s, r / s), self.values)

    def __add__(self, other: "TestFunction") -> "TestFunction":
        if not (self.is_linear and other.is_linear):
            raise ValidationError("only piecewise-linear test functions can be added")
        xs = np.union1d(self.knots, other.knots)
        return TestFunction("piecewise_linear", tuple(xs), tuple(self(xs) + other(xs)))

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return self + other.scaled(-1.0)

    def contraction(self) -> "TestFunction":
        """The unit contraction ``min(max(u, 0), 1)``."""
        if not self.is_linear:
            raise ValidationError("contraction needs a piecewise-linear function")
        xs, ys = list(self.knots), list(self.values)
        out = [xs[0]]
        for (x0, y0), (x1, y1) in zip(zip(xs, ys), zip(xs[1:], ys[1:])):
            for level in (0.0, 1.0):
                if (y0 - level) * (y1 - level) < 0:
                    out.append(x0 + (level - y0) * (x1 - x0) / (y1 - y0))
            out.append(x1)
        xs = np.array(sorted(set(out)))
        return TestFunction("piecewise_linear", tuple(xs), tuple(np.clip(self(xs), 0.0, 1.0)))

    def inner(self, other: "TestFunction") -> float:
        """``<u, v>`` in L^2."""
        lo = min(self.support[0], other.support[0])
        hi = max(self.support[1], other.support[1])
        pts = np.union1d(np.clip(self.breakpoints, lo, hi), np.clip(other.breakpoints, lo, hi))
        sub = 1 if self.is_linear and other.is_linear else 32
        g, w = gauss_legendre(12)
        edges = np.concatenate([np.linspace(a, b, sub + 1)[:-1] for a, b in zip(pts[:-1], pts[1:])]
                               + [[pts[-1]]])
        half = 0.5 * np.diff(edges)
        x = 0.5 * (edges[1:] + edges[:-1])[:, None] + half[:, None] * g
        return float(np.sum(self(x) * other(x) * w * half[:, None]))

    def fourier_transform(self, xi):
        """``(2 pi)^-1 int e^{-i xi x} u(x) dx``."""
        xi = np.asarray(xi, dtype=float)
        flat = xi.ravel()
        out = np.empty(flat.size, dtype=complex)
        if self.is_linear:
            xs = np.asarray(self.knots)
            h = float(np.max(np.diff(xs)))
            small = np.abs(flat) * h <= 2.0
            big = ~small
            xb = flat[big]
            out[big] = -np.sum(self.slope_jumps * np.exp(-1j * np.outer(xb, xs)), axis=1) / xb ** 2
            if small.any():
                out[small] = self._ft_quadrature(flat[small], xs, 1)
        else:
            c, r = self.knots
            n = max(8, int(math.ceil(np.max(np.abs(flat), initial=0.0) * r / 4.0)))
            out[:] = self._ft_quadrature(flat, np.array([c - r, c + r]), n)
        return (out / (2.0 * np.pi)).reshape(xi.shape)

    def _ft_quadrature(self, xi, pts, sub):
        g, w = gauss_legendre(20)
        edges = np.concatenate([np.linspace(a, b, sub + 1)[:-1] for a, b in zip(pts[:-1], pts[1:])]
                               + [[pts[-1]]])
        half = 0.5 * np.diff(edges)
        x = (0.5 * (edges[1:] + edges[:-1])[:, None] + half[:, None] * g).ravel()
        wx = (w * half[:, None]).ravel() * self(x)
        return np.exp(-1j * np.outer(xi, x)) @ wx

    def second_derivative_mass(self) -> float:
        """Total variation of ``u'``; bounds ``|int e^{-i xi x} u| <= mass / xi^2``."""
        if self.is_linear:
            return float(np.sum(np.abs(self.slope_jumps)))
        c, r = self.knots
        t = np.linspace(-1.0, 1.0, 20001)
        return abs(self.values[0]) / r * float(np.sum(np.abs(np.diff(_bump_slope(t)))))

    def to_dict(self) -> dict:
        if self.kind == "tent":
            lo, c, hi = self.knots
            return {"kind": "tent", "center": c, "halfwidth": c - lo, "height": self.values[1]}
        if self.kind == "smooth_bump":
            return {"kind": "smooth_bump", "center": self.knots[0], "radius": self.knots[1],
                    "height": self.values[0]}
        return {"kind": "piecewise_linear", "knots": list(self.knots), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "TestFunction":
        kind = d.get("kind")
        if kind == "tent":
            return cls.tent(float(d.get("center", 0.0)), float(d.get("halfwidth", 1.0)),
                            float(d.get("height", 1.0)))
        if kind == "smooth_bump":
            return cls.smooth_bump(float(d.get("center", 0.0)), float(d.get("radius", 1.0)),
                                   float(d.get("height", 1.0)))
        if kind == "piecewise_linear":
            return cls.piecewise_linear(d["knots"], d["values"])
        raise ValidationError(f"test_function.kind: unknown kind {kind!r}")


@dataclass(frozen=True)
class FormValue:
    value: float
    error_estimate: float
    method: str


# ---------------------------------------------------------------------------
# direct evaluation


@lru_cache(maxsize=256)
def _verified(m: ModulatedMeasure, cfg: QuadratureConfig):
    rep = check_levy_integrability(m, cfg)
    if not rep.is_levy:
        raise NotLevyMeasureError(f"not a Levy density at delta={m.delta}: {rep.overall}", rep)
    return rep


def _require_1d(m: ModulatedMeasure):
    if m.dim != 1:
        raise UnsupportedDimension("forms are evaluated in one dimension")


def _panels(pts, sub, order):
    """Gauss nodes and weights on rows of sorted breakpoints, ``sub`` panels each."""
    g, w = gauss_legendre(order)
    frac = np.linspace(0.0, 1.0, sub + 1)
    a, b = pts[:, :-1], pts[:, 1:]
    edges = a[..., None] + (b - a)[..., None] * frac
    lo, hi = edges[..., :-1], edges[..., 1:]
    half = 0.5 * (hi - lo)
    x = 0.5 * (lo + hi)[..., None] + half[..., None] * g
    return x.reshape(len(pts), -1), (half[..., None] * w).reshape(len(pts), -1)


def difference_correlation(u: TestFunction, v: TestFunction, z) -> np.ndarray:
    """``D(z) = int (u(x + z) - u(x)) (v(x + z) - v(x)) dx`` for ``z >= 0``."""
    z = np.abs(np.asarray(z, dtype=float))
    flat = z.ravel()
    br = np.union1d(u.breakpoints, v.breakpoints)
    linear = u.is_linear and v.is_linear
    sub, order = (1, 3) if linear else (12, 16)
    out = np.empty(flat.size)
    step = max(1, 200_000 // (2 * br.size * sub * order))
    for s in range(0, flat.size, step):
        zz = flat[s:s + step]
        pts = np.sort(np.concatenate([np.broadcast_to(br, (zz.size, br.size)),
                                      br[None, :] - zz[:, None]], axis=1), axis=1)
        x, w = _panels(pts, sub, order)
        zb = np.broadcast_to(zz[:, None], x.shape)
        out[s:s + step] = np.sum(u.increment(x, zb) * v.increment(x, zb) * w, axis=1)
    return out.reshape(z.shape)


def _knot_gaps(u: TestFunction, v: TestFunction, width: float):
    br = np.union1d(u.breakpoints, v.breakpoints)
    gaps = np.abs(br[:, None] - br[None, :]).ravel()
    return sorted({float(g) for g in gaps if 0.0 < g < width})


def _density_tail(m: ModulatedMeasure, W: float, cfg: QuadratureConfig):
    """``int_W^inf folded density`` with its error."""
    if m.nu.kind == "truncated_stable":
        R = m.nu.R
        if R <= W:
            return 0.0, 0.0
        o = integrate_singular(m.folded, W, R, m.singular_points(W, R), cfg,
                               breakpoints=m.kinks(W, R))
        return o.require(), o.error
    P = m.period()
    L = P * math.ceil(W / P - 1e-12)
    value, error = 0.0, 0.0
    if L > W * (1 + 1e-12):
        o = integrate_singular(m.folded, W, L, m.singular_points(W, L), cfg,
                               breakpoints=m.kinks(W, L))
        value, error = o.require(), o.error
    t = folded_tail(m, L, cfg)
    return value + t.require(), error + t.error


def form_direct(u: TestFunction, m: ModulatedMeasure, cfg: QuadratureConfig | None = None,
                v: TestFunction | None = None) -> FormValue:
    """``E^delta(u, v)`` by iterated quadrature in (x, z = y - x); ``v`` defaults to ``u``."""
    cfg = cfg or QuadratureConfig()
    _require_1d(m)
    _verified(m, cfg)
    v = u if v is None else v
    lo = min(u.support[0], v.support[0])
    hi = max(u.support[1], v.support[1])
    W = hi - lo
    sing = [0.0, *m.singular_points(0.0, W)]
    kinks = sorted(set(m.kinks(0.0, W)) | set(_knot_gaps(u, v, W)))
    width = W / 8.0 if m.a.kind == "constant" else min(W / 8.0, m.delta / 4.0)

    def f(z):
        return difference_correlation(u, v, z) * m.folded(z)

    near = integrate_singular(f, 0.0, W, sing, cfg, breakpoints=kinks, max_width=width)
    if not near.converged:
        raise QuadratureFailure(f"form_direct: near region [0, {W:g}] {near.verdict}", near)
    uv = u.inner(v)
    tail, tail_err = _density_tail(m, W, cfg) if uv else (0.0, 0.0)
    value = near.value + 2.0 * uv * tail
    return FormValue(value, near.error + 2.0 * abs(uv) * tail_err, DIRECT)


# ---------------------------------------------------------------------------
# spectral evaluation

_CANDIDATES = (("1", lambda d: 1.0), ("(2pi)^d", lambda d: (2 * math.pi) ** d),
               ("2(2pi)^d", lambda d: 2.0 * (2 * math.pi) ** d))


@dataclass(frozen=True)
class SpectralConstant:
    value: float
    label: str
    calibration_ratio: float


@lru_cache(maxsize=4)
def spectral_constant(cfg: QuadratureConfig | None = None) -> SpectralConstant:
    """Calibrate ``E = C int |u^|^2 psi`` once on a tent with ``a = 1`` and ``beta = 1``.

    The form has no factor 1/2, so the expected constant is ``2 (2 pi)^d``.
    Raises NormalizationMismatch unless the ratio matches a known convention.
    """
    cfg = cfg or QuadratureConfig()
    u = TestFunction.tent(0.0, 1.0)
    m = ModulatedMeasure(PeriodicCoefficient.constant(1.0), LevyDensitySpec.stable(1.0))
    direct = form_direct(u, m, cfg)
    naive, nerr = _spectral_integral(u, u, ExponentSpec.build(m, cfg), cfg)
    ratio = direct.value / naive
    slack = (direct.error_estimate / direct.value + nerr / naive) + 1e-6
    for label, c in _CANDIDATES:
        if abs(ratio / c(1) - 1.0) <= slack:
            return SpectralConstant(c(1), label, ratio)
    raise NormalizationMismatch(f"spectral calibration ratio {ratio!r} matches no convention")


def _xi_panels(W: float, xi_max: float):
    """Panel edges on [0, xi_max]: geometric near 0, then about one oscillation per panel."""
    h = min(2.0, 2.0 * math.pi / W)
    n = int(math.ceil(xi_max / h))
    uniform = np.linspace(0.0, n * h, n + 1)
    inner = h * 0.25 ** np.arange(25, 0, -1)
    return np.concatenate([[0.0], inner, uniform[1:]])


def _spectral_integral(u: TestFunction, v: TestFunction, e: ExponentSpec,
                       cfg: QuadratureConfig, xi_max: float | None = None):
    """``int_R Re(u^ conj(v^)) psi`` with an error estimate (no normalization constant)."""
    lo = min(u.support[0], v.support[0])
    hi = max(u.support[1], v.support[1])
    W = hi - lo
    bump = not (u.is_linear and v.is_linear)
    if xi_max is None:
        scale = min(u.knots[1] if not u.is_linear else W, v.knots[1] if not v.is_linear else W)
        xi_max = 64.0 / scale if bump else 128.0 / W
    edges = _xi_panels(W, xi_max)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    parts = []
    for order in (20, 10):
        g, w = gauss_legendre(order)
        parts.append(((mid[:, None] + half[:, None] * g).ravel(), (half[:, None] * w).ravel()))
    nodes = np.concatenate([parts[0][0], parts[1][0]])
    fu = u.fourier_transform(nodes)
    fv = fu if v is u else v.fourier_transform(nodes)
    spec = np.real(fu * np.conj(fv))
    ps, pe = e.psi_with_error(nodes)
    n20 = parts[0][0].size
    g20 = (spec * ps)[:n20] * parts[0][1]
    g10 = (spec * ps)[n20:] * parts[1][1]
    p20 = g20.reshape(mid.size, -1).sum(axis=1)
    p10 = g10.reshape(mid.size, -1).sum(axis=1)
    value = 2.0 * math.fsum(p20)
    err = 2.0 * (float(np.sum(np.abs(p20 - p10))) + float(np.sum(np.abs(spec[:n20]) * pe[:n20] * parts[0][1])))
    tail, terr = _spectral_tail(u, v, e, float(edges[-1]), bump)
    return value + 2.0 * tail, err + 2.0 * terr


def _spectral_tail(u, v, e: ExponentSpec, X: float, bump: bool):
    """Estimate of ``int_X^inf Re(u^ conj(v^)) psi`` with an error bound."""
    probes = np.array([X / 4.0, X / 2.0, X])
    p4, p2, p1 = e.psi_with_error(probes)[0]
    if not bump:
        # fit psi ~ A xi^p on [X/2, X]; check the fit at X/4
        p = math.log(p1 / p2) / math.log(2.0)
        A = p1 / X ** p
        misfit = abs(A * (X / 4.0) ** p - p4) / p4
        b = 3.0 - p
        su, sv = u.slope_jumps, v.slope_jumps
        d = np.abs(np.subtract.outer(np.asarray(u.knots), np.asarray(v.knots))).ravel()
        c = np.outer(su, sv).ravel()
        integrals = np.where(d > 0, 0.0, X ** -b / b)
        nz = d > 0
        integrals[nz] = d[nz] ** b * cos_tail(X * d[nz], b)
        tail = A * float(np.sum(c * integrals)) / (2.0 * np.pi) ** 2
        mass = float(np.sum(np.abs(su))) * float(np.sum(np.abs(sv)))
        bound = 7.0 / 3.0 * max(p1, p2) * mass / X ** 3 / (2.0 * np.pi) ** 2
        return tail, abs(tail) * max(4.0 * misfit, 1e-6) + 1e-3 * bound
    # bumps: |u^| decays faster than any power; bound with the xi^-2 estimate
    mass = u.second_derivative_mass() * v.second_derivative_mass()
    fu = abs(complex(u.fourier_transform(np.array([X]))[0]))
    fv = abs(complex(v.fourier_transform(np.array([X]))[0]))
    bound = 7.0 / 3.0 * max(p1, p2) * min(mass / X ** 3 / (2.0 * np.pi) ** 2, fu * fv * X)
    return 0.0, bound


def form_spectral(u: TestFunction, e: ExponentSpec, cfg: QuadratureConfig | None = None,
                  v: TestFunction | None = None, xi_max: float | None = None) -> FormValue:
    """``C int u^ conj(v^) psi_delta`` with the calibrated constant ``C``."""
    cfg = cfg or e.cfg
    _require_1d(e.measure)
    const = spectral_constant(cfg)
    v = u if v is None else v
    val, err = _spectral_integral(u, v, e, cfg, xi_max)
    return FormValue(const.value * val, const.value * err, SPECTRAL)


# ---------------------------------------------------------------------------
# convergence checks


def _row(delta, value, limit, method, xi=None, **extra):
    ae = abs(value - limit)
    row = {"delta": float(delta), "xi": xi, "value": float(value), "limit": float(limit),
           "abs_err": float(ae), "rel_err": float(ae / abs(limit)) if limit else float(ae),
           "method": method}
    row.update(extra)
    return row


def _check_deltas(deltas, name="delta_sequence"):
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ValidationError(f"{name} must be nonempty")
    if any(not d > 0 for d in deltas):
        raise ValidationError(f"{name} must be positive")
    if not strictly_decreasing(deltas):
        raise ValidationError(f"{name} must be strictly decreasing")
    return deltas


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _weighted_mean(g: Callable, a: PeriodicCoefficient, delta: float, lo: float, hi: float,
                   breakpoints, cfg: QuadratureConfig, power: float = 1.0) -> float:
    """``int_lo^hi g(x) a(x/delta)^power dx``."""
    m = ModulatedMeasure(a, LevyDensitySpec.stable(1.0), delta)
    sing = sorted({x for x in m.singular_points(lo, hi)} | {-x for x in m.singular_points(-hi, -lo)})
    sing = [s for s in sing if lo <= s <= hi]
    kinks = sorted({k for k in list(m.kinks(lo, hi)) + [-k for k in m.kinks(-hi, -lo)]
                    if lo < k < hi} | {b for b in breakpoints if lo < b < hi})
    width = (hi - lo) / 8.0 if a.kind == "constant" else delta / 4.0

    def f(x):
        return g(x) * a(x / delta) ** power

    return integrate_singular(f, lo, hi, sing, cfg, breakpoints=kinks, max_width=width).require()


def vague_convergence_check(g: TestFunction, a: PeriodicCoefficient, delta_sequence,
                            cfg: QuadratureConfig | None = None, tolerance: float = 1e-2,
                            threads: int = 1) -> ConvergenceReport:
    """``|int g a_delta - abar int g|`` along a decreasing sequence of scales."""
    cfg = cfg or QuadratureConfig()
    deltas = _check_deltas(delta_sequence)
    if a.dim != 1:
        raise UnsupportedDimension("vague_convergence_check is one-dimensional")
    abar = mean_value(a, cfg)
    lo, hi = g.support
    limit = abar * _weighted_mean(g, PeriodicCoefficient.constant(1.0), 1.0, lo, hi, g.breakpoints, cfg)
    vals = _map(lambda d: _weighted_mean(g, a, d, lo, hi, g.breakpoints, cfg), deltas, threads)
    rows = [_row(d, v, limit, DIRECT) for d, v in zip(deltas, vals)]
    errs = [r["abs_err"] for r in rows]
    floor = 10 * max(cfg.rel_tol * abs(limit), cfg.abs_tol)
    return ConvergenceReport("vague", FORM_COLUMNS, rows, tolerance,
                             passed=errs[-1] <= tolerance, final_error=errs[-1],
                             notes={"abar": abar, "decreasing_last_4": non_increasing_tail(errs, 4, floor)})


def weak_lp_check(g: Callable, K: tuple[float, float], a: PeriodicCoefficient, p: float,
                  delta_sequence, cfg: QuadratureConfig | None = None, tolerance: float = 1e-2,
                  breakpoints: Sequence[float] = (), threads: int = 1) -> ConvergenceReport:
    """``|int_K g a_delta - abar int_K g|`` for ``g`` in ``L^q(K)``, ``1/p + 1/q = 1``.

    ``g`` is a vectorized callable; list its jumps in ``breakpoints``.
    """
    cfg = cfg or QuadratureConfig()
    p = float(p)
    if not p > 1.0:
        raise ValidationError("p must exceed 1")
    if p >= a.p_max:
        raise ExponentOutOfRange(f"p = {p} is not below p_max = {a.p_max} of the coefficient")
    deltas = _check_deltas(delta_sequence)
    lo, hi = map(float, K)
    if not hi > lo:
        raise ValidationError("K must be a nonempty interval")
    abar = mean_value(a, cfg)
    limit = abar * _weighted_mean(g, PeriodicCoefficient.constant(1.0), 1.0, lo, hi, breakpoints, cfg)
    vals = _map(lambda d: _weighted_mean(g, a, d, lo, hi, breakpoints, cfg), deltas, threads)
    rows = [_row(d, v, limit, DIRECT) for d, v in zip(deltas, vals)]
    err = rows[-1]["abs_err"]
    return ConvergenceReport("weak-lp", FORM_COLUMNS, rows, tolerance, passed=err <= tolerance,
                             final_error=err, notes={"abar": abar, "p": p, "q": p / (p - 1.0)})


LP_COLUMNS = ("delta", "lhs", "rhs", "slack", "holds")


def lp_bound_check(a: PeriodicCoefficient, p: float, N: int, delta_grid,
                   cfg: QuadratureConfig | None = None) -> ConvergenceReport:
    """``int_{-N}^{N} a_delta^p <= 2 (N + 1) int_0^1 a^p`` for every ``delta`` in (0, 1)."""
    cfg = cfg or QuadratureConfig()
    p = float(p)
    if p >= a.p_max:
        raise ExponentOutOfRange(f"p = {p} is not below p_max = {a.p_max} of the coefficient")
    if not p >= 1.0:
        raise ValidationError("p must be >= 1")
    if int(N) != N or N < 1:
        raise ValidationError("N must be a positive integer")
    one = lambda x: np.ones_like(x)  # noqa: E731
    rhs = 2.0 * (N + 1) * _weighted_mean(one, a, 1.0, 0.0, 1.0, (), cfg, power=p)
    rows = []
    for d in sorted({float(x) for x in delta_grid if 0.0 < x < 1.0}, reverse=True):
        lhs = _weighted_mean(one, a, d, -float(N), float(N), (), cfg, power=p)
        rows.append({"delta": d, "lhs": lhs, "rhs": rhs, "slack": rhs - lhs, "holds": lhs <= rhs})
    violations = [r["delta"] for r in rows if not r["holds"]]
    slack = min((r["slack"] for r in rows), default=math.nan)
    return ConvergenceReport("lp-bound", LP_COLUMNS, rows, passed=not violations and bool(rows),
                             final_error=-slack if rows else math.nan,
                             notes={"violations": violations, "p": p, "N": int(N)})


@dataclass(frozen=True)
class PairDomain:
    """``K = {x_lo <= x <= x_hi, z_lo <= |y - x| <= z_hi}`` in the plane.

    ``breaks`` are kinks of ``x -> g(x, x + z)``; ``shifted_breaks`` are
    points ``b`` whose kink sits at ``x = b - z``.
    """

    x_lo: float
    x_hi: float
    z_lo: float
    z_hi: float
    breaks: tuple = ()
    shifted_breaks: tuple = ()

    def __post_init__(self):
        if not (self.x_hi > self.x_lo and self.z_hi >= self.z_lo >= 0.0):
            raise ValidationError("PairDomain: need x_lo < x_hi and 0 <= z_lo <= z_hi")

    @property
    def area(self) -> float:
        return 2.0 * (self.x_hi - self.x_lo) * (self.z_hi - self.z_lo)


def _pair_integral(g, a: PeriodicCoefficient, delta: float, K: PairDomain, cfg: QuadratureConfig):
    """``iint_K g(x, y) a((x - y)/delta) dx dy`` via ``z = y - x``."""
    fixed = np.array([K.x_lo, K.x_hi, *[b for b in K.breaks if K.x_lo < b < K.x_hi]])

    def inner(z):
        z = np.asarray(z, dtype=float)
        sh = np.asarray(K.shifted_breaks, dtype=float)
        pts = np.concatenate([np.broadcast_to(fixed, (z.size, fixed.size)),
                              np.clip(sh[None, :] - z[:, None], K.x_lo, K.x_hi)], axis=1)
        pts = np.sort(pts, axis=1)
        x, w = _panels(pts, 4, 12)
        y = x + z[:, None]
        return np.sum(g(x, y) * w, axis=1)

    total, error = 0.0, 0.0
    if K.z_hi == K.z_lo:
        return 0.0, 0.0
    m = ModulatedMeasure(a, LevyDensitySpec.stable(1.0), delta)
    for sign in (1.0, -1.0):
        # coefficient argument (x - y)/delta = -z/delta
        def f(t, sign=sign):
            z = sign * t
            return inner(z) * a(-z / delta)
        lo, hi = K.z_lo, K.z_hi
        pts = m.singular_points(-hi, hi)
        sing = sorted({abs(s) for s in pts if lo <= abs(s) <= hi})
        kinks = sorted({abs(k) for k in m.kinks(-hi, hi) if lo < abs(k) < hi})
        width = (hi - lo) / 8.0 if a.kind == "constant" else delta / 4.0
        o = integrate_singular(f, lo, hi, sing, cfg, breakpoints=kinks, max_width=width)
        total += o.require()
        error += o.error
    return total, error


def corollary2_check(g_sequence: Callable[[int], Callable], g_limit: Callable,
                     a: PeriodicCoefficient, delta_sequence, K: PairDomain,
                     cfg: QuadratureConfig | None = None, tolerance: float = 1e-2) -> ConvergenceReport:
    """``|iint_K g_n a_{delta_n}(x - y) - abar iint_K g|`` with ``n = 1, 2, ...``."""
    cfg = cfg or QuadratureConfig()
    deltas = _check_deltas(delta_sequence)
    abar = mean_value(a, cfg)
    base, _ = _pair_integral(g_limit, PeriodicCoefficient.constant(1.0), 1.0, K, cfg)
    limit = abar * base
    rows = []
    for n, d in enumerate(deltas, start=1):
        val, _ = _pair_integral(g_sequence(n), a, d, K, cfg)
        rows.append(_row(d, val, limit, DIRECT, n=n))
    err = rows[-1]["abs_err"]
    return ConvergenceReport("corollary2", FORM_COLUMNS, rows, tolerance,
                             passed=err <= tolerance, final_error=err, notes={"abar": abar})


def mosco_m2_check(u: TestFunction, a: PeriodicCoefficient, nu: LevyDensitySpec, delta_sequence,
                   cfg: QuadratureConfig | None = None, tolerance: float = 2e-2,
                   threads: int = 1) -> ConvergenceReport:
    """Recovery sequence ``u_n = u``: ``E^{delta_n}(u, u)`` against ``abar E(u, u)``."""
    cfg = cfg or QuadratureConfig()
    deltas = _check_deltas(delta_sequence)
    for d in deltas:
        try:
            _verified(ModulatedMeasure(a, nu, d), cfg)
        except NotLevyMeasureError as exc:
            raise NotLevyMeasureError(f"integrability failed at delta={d}", exc.report) from exc
    abar = mean_value(a, cfg)
    base = form_direct(u, ModulatedMeasure(PeriodicCoefficient.constant(1.0), nu), cfg)
    limit = abar * base.value
    vals = _map(lambda d: form_direct(u, ModulatedMeasure(a, nu, d), cfg), deltas, threads)
    rows = [_row(d, fv.value, limit, DIRECT) for d, fv in zip(deltas, vals)]
    err = rows[-1]["rel_err"]
    return ConvergenceReport("m2", FORM_COLUMNS, rows, tolerance, passed=err <= tolerance,
                             final_error=err, notes={"abar": abar, "limit_form": base.value})


M1_FAMILIES = ("constant", "oscillating_bump", "escaping_translate")
M1_COLUMNS = ("family", "n", "delta", "value", "limit", "margin", "holds")


def m1_sequence(family: str, u: TestFunction, n: int) -> tuple[TestFunction, bool]:
    """The ``n``-th member of a cataloged sequence and whether its weak limit is ``u`` (else 0)."""
    if family == "constant":
        return u, True
    if family == "oscillating_bump":
        lo, hi = u.support
        c = lo + 0.5 * (hi - lo) + 0.5 / n
        return u + TestFunction.tent(c, 1.0 / n, n ** -0.5), True
    if family == "escaping_translate":
        return u.translated(float(n)), False
    raise ValidationError(f"m1 family: unknown {family!r}")


def m1_necessary_check(u: TestFunction, a: PeriodicCoefficient, nu: LevyDensitySpec,
                       delta_sequence, families: Sequence[str] = M1_FAMILIES,
                       cfg: QuadratureConfig | None = None, tolerance: float = 2e-2,
                       threads: int = 1) -> ConvergenceReport:
    """Spot-check ``liminf E^{delta_n}(u_n, u_n) >= E(u, u) - tol`` on cataloged sequences.

    The liminf is read off the second half of the sequence; ``tol`` is
    relative to ``E(u, u)`` of the weak limit (absolute when that is 0).
    """
    cfg = cfg or QuadratureConfig()
    deltas = _check_deltas(delta_sequence)
    if not u.is_linear:
        raise ValidationError("m1 catalog needs a piecewise-linear u")
    abar = mean_value(a, cfg)
    limit_u = abar * form_direct(u, ModulatedMeasure(PeriodicCoefficient.constant(1.0), nu), cfg).value
    rows, violations = [], []
    for fam in families:
        jobs = [(n, d, *m1_sequence(fam, u, n)) for n, d in enumerate(deltas, start=1)]
        vals = _map(lambda j: form_direct(j[2], ModulatedMeasure(a, nu, j[1]), cfg).value, jobs, threads)
        tail = []
        for (n, d, _, to_u), val in zip(jobs, vals):
            lim = limit_u if to_u else 0.0
            tol = tolerance * (lim if lim else 1.0)
            rows.append({"family": fam, "n": n, "delta": d, "value": val, "limit": lim,
                         "margin": val - (lim - tol), "holds": val >= lim - tol})
            if n > len(jobs) // 2:
                tail.append(val >= lim - tol)
        if not all(tail):
            violations.append(fam)
    margin = min(r["margin"] for r in rows)
    return ConvergenceReport("m1-catalog", M1_COLUMNS, rows, tolerance, passed=not violations,
                             final_error=-margin, notes={"abar": abar, "violations": violations,
                                                         "limit_form": limit_u})


def spectral_identity_catalog():
    """Default (u, measure) pairs for the direct/spectral cross-check."""
    tent = TestFunction.tent(0.0, 1.0)
    stable = LevyDensitySpec.stable
    return [
        (tent, ModulatedMeasure(PeriodicCoefficient.constant(1.0), stable(1.0))),
        (TestFunction.tent(0.3, 0.6, 2.0), ModulatedMeasure(PeriodicCoefficient.constant(2.0), stable(0.5))),
        (TestFunction.piecewise_linear([-1.0, -0.2, 0.5, 1.0], [0.0, 1.0, 0.4, 0.0]),
         ModulatedMeasure(PeriodicCoefficient.smooth_cosine(0.5, 1.0), stable(1.5), 0.5)),
        (TestFunction.smooth_bump(0.0, 1.0), ModulatedMeasure(PeriodicCoefficient.smooth_cosine(0.5, 1.0),
                                                              stable(1.0), 1.0)),
        (tent, ModulatedMeasure(PeriodicCoefficient.example1(0.3), stable(1.0), 0.5)),
        (tent, ModulatedMeasure(PeriodicCoefficient.constant(1.0), LevyDensitySpec.truncated_stable(1.2, 1.5))),
        (TestFunction.tent(0.0, 0.5), ModulatedMeasure(PeriodicCoefficient.example1(0.4), stable(0.8), 1.0)),
    ]


SPECTRAL_COLUMNS = ("case", "direct", "direct_err", "spectral", "spectral_err", "abs_diff",
                    "rel_diff", "agree")


def spectral_identity_check(pairs=None, cfg: QuadratureConfig | None = None,
                            tolerance: float = 1e-3) -> ConvergenceReport:
    """Direct against spectral evaluation on a catalog of (u, measure) pairs."""
    cfg = cfg or QuadratureConfig()
    pairs = spectral_identity_catalog() if pairs is None else list(pairs)
    const = spectral_constant(cfg)
    rows = []
    for i, (u, m) in enumerate(pairs):
        d = form_direct(u, m, cfg)
        s = form_spectral(u, ExponentSpec.build(m, cfg), cfg)
        diff = abs(d.value - s.value)
        rel = diff / abs(d.value)
        rows.append({"case": i, "direct": d.value, "direct_err": d.error_estimate,
                     "spectral": s.value, "spectral_err": s.error_estimate, "abs_diff": diff,
                     "rel_diff": rel,
                     "agree": bool(diff <= d.error_estimate + s.error_estimate and rel <= tolerance)})
    worst = max(r["rel_diff"] for r in rows)
    return ConvergenceReport("spectral-identity", SPECTRAL_COLUMNS, rows, tolerance,
                             passed=all(r["agree"] for r in rows), final_error=worst,
                             notes={"constant": const.value, "constant_label": const.label})
