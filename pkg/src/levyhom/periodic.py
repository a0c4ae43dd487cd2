"""Q-periodic coefficient functions.

A coefficient is one of a small closed set of kinds.  Every evaluation first
reduces the argument into the unit cube with ``x - floor(x)``; this is the only
place periodicity is enforced, so ``a(x + k) == a(x)`` holds bit-for-bit
whenever ``x + k`` is exactly representable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import UnsupportedDimension, ValidationError


class Unbounded:
    """Sentinel returned when a coefficient is evaluated at a singular point."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNBOUNDED"

    def __bool__(self) -> bool:
        return False


UNBOUNDED = Unbounded()

KINDS = ("constant", "smooth_cosine", "example1", "tensor")


def wrap(x):
    """Reduce coordinates into [0, 1)."""
    x = np.asarray(x, dtype=float)
    u = x - np.floor(x)
    # tiny negative inputs round up to exactly 1.0
    return np.where(u >= 1.0, 0.0, u)


@dataclass(frozen=True)
class PeriodicCoefficient:
    """A Q-periodic, a.e. positive coefficient ``a``.

    Use the constructors :meth:`constant`, :meth:`smooth_cosine`,
    :meth:`example1` and :meth:`tensor` rather than the raw initializer.
    ``shift`` translates the 1-d kinds: the represented function is
    ``x -> formula(frac(x - shift))``.
    """

    kind: str
    params: tuple = ()
    dim: int = 1
    shift: float = 0.0
    factors: tuple = field(default=())

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c: float, dim: int = 1) -> "PeriodicCoefficient":
        if not c > 0 or not math.isfinite(c):
            raise ValidationError("constant: c must be positive and finite")
        if dim < 1:
            raise ValidationError("constant: dim must be >= 1")
        return cls("constant", (float(c),), dim)

    @classmethod
    def smooth_cosine(cls, amplitude: float, offset: float) -> "PeriodicCoefficient":
        """``offset + amplitude*cos(2*pi*x)``; needs ``offset > |amplitude|``."""
        if not offset > abs(amplitude):
            raise ValidationError("smooth_cosine: offset must exceed |amplitude|")
        return cls("smooth_cosine", (float(amplitude), float(offset)), 1)

    @classmethod
    def example1(cls, gamma: float) -> "PeriodicCoefficient":
        if not 0.0 < gamma < 1.0:
            raise ValidationError("example1: gamma must lie in (0, 1)")
        return cls("example1", (float(gamma),), 1)

    @classmethod
    def tensor(cls, factors: Sequence["PeriodicCoefficient"]) -> "PeriodicCoefficient":
        factors = tuple(factors)
        if not factors:
            raise ValidationError("tensor: need at least one factor")
        for f in factors:
            if f.dim != 1:
                raise ValidationError("tensor: factors must be one-dimensional")
        return cls("tensor", (), len(factors), 0.0, factors)

    # -- metadata ---------------------------------------------------------
    @property
    def gamma(self) -> float:
        if self.kind != "example1":
            raise AttributeError("gamma is only defined for example1")
        return self.params[0]

    @property
    def bounded(self) -> bool:
        if self.kind == "tensor":
            return all(f.bounded for f in self.factors)
        return self.kind != "example1"

    @property
    def p_max(self) -> float:
        """Largest p with ``a`` guaranteed in L^p_loc (exclusive for example1)."""
        if self.kind == "example1":
            return 1.0 / self.gamma
        if self.kind == "tensor":
            return min(f.p_max for f in self.factors)
        return math.inf

    @property
    def singular_points(self) -> tuple[float, ...]:
        """Points of [0, 1) where a 1-d coefficient is unbounded."""
        if self.kind == "example1":
            return (float(wrap(self.shift)),)
        if self.kind == "tensor":
            raise UnsupportedDimension("singular_points is per-axis for tensor kinds")
        return ()

    @property
    def singular_points_in_Q(self) -> tuple[tuple[float, ...], ...]:
        if self.kind == "tensor":
            return tuple(f.singular_points for f in self.factors)
        return (self.singular_points,) * self.dim

    @property
    def kinks(self) -> tuple[float, ...]:
        """Points of [0, 1) where a 1-d coefficient is not smooth (besides singularities)."""
        if self.kind == "example1":
            return tuple(sorted(float(wrap(k + self.shift)) for k in (0.25, 0.75)))
        return ()

    def cos_modes(self):
        """Exact finite expansion ``[(k, c_k)]`` with ``a(x) = sum c_k cos(2 pi k (x - shift))``.

        Returns None when the coefficient has no finite trigonometric form.
        """
        if self.kind == "constant" and self.dim == 1:
            return [(0, self.params[0])]
        if self.kind == "smooth_cosine":
            amp, off = self.params
            return [(0, off), (1, amp)]
        return None

    # -- evaluation -------------------------------------------------------
    def __call__(self, x):
        """Vectorized evaluation; singular points map to ``inf``.

        For ``dim > 1`` the last axis of ``x`` holds coordinates.
        """
        x = np.asarray(x, dtype=float)
        if self.dim > 1:
            if x.shape[-1] != self.dim:
                raise ValidationError(f"expected last axis of length {self.dim}")
            if self.kind == "constant":
                return np.full(x.shape[:-1], self.params[0])
            out = np.ones(x.shape[:-1])
            for i, f in enumerate(self.factors):
                out = out * f(x[..., i])
            return out
        if self.kind == "tensor":
            return self.factors[0](x)
        if self.kind == "constant":
            return np.full(x.shape, self.params[0])
        y = x - self.shift if self.shift else x
        if self.kind == "smooth_cosine":
            amp, off = self.params
            return off + amp * np.cos(2.0 * np.pi * wrap(y))
        return _example1_alpha1(y, self.params[0])

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "dim": self.dim}
        if self.kind == "constant":
            d["c"] = self.params[0]
        elif self.kind == "smooth_cosine":
            d["amplitude"], d["offset"] = self.params
        elif self.kind == "example1":
            d["gamma"] = self.params[0]
        else:
            d["factors"] = [f.to_dict() for f in self.factors]
        if self.shift:
            d["shift"] = self.shift
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicCoefficient":
        kind = d.get("kind")
        if kind == "constant":
            a = cls.constant(float(d["c"]), int(d.get("dim", 1)))
        elif kind == "smooth_cosine":
            a = cls.smooth_cosine(float(d["amplitude"]), float(d["offset"]))
        elif kind == "example1":
            a = cls.example1(float(d["gamma"]))
        elif kind == "tensor":
            a = cls.tensor([cls.from_dict(f) for f in d["factors"]])
        else:
            raise ValidationError(f"coefficient.kind: unknown kind {kind!r}")
        if d.get("shift"):
            a = shifted_coefficient(a, float(d["shift"]))
        return a


def _example1_alpha1(y, gamma):
    # alpha_1 is symmetric about 1/2, so only the distance to the nearest
    # integer matters; computing it directly keeps tiny offsets exact.
    y = np.asarray(y, dtype=float)
    v = np.abs(y - np.rint(y))
    with np.errstate(divide="ignore"):
        out = np.where(v <= 0.25, np.power(np.where(v > 0, v, 1.0), -gamma), 4.0**gamma)
    return np.where(v > 0, out, np.inf)


def eval_periodic(a: PeriodicCoefficient, x):
    """Evaluate ``a`` at a single point; returns ``UNBOUNDED`` at singular points."""
    value = float(a(np.asarray(x, dtype=float)))
    if math.isinf(value):
        return UNBOUNDED
    return value


def shifted_coefficient(a: PeriodicCoefficient, shift: float) -> PeriodicCoefficient:
    """The coefficient ``x -> a(x - shift)``."""
    if a.dim != 1 or a.kind == "tensor":
        raise UnsupportedDimension("shifted_coefficient needs a one-dimensional coefficient")
    if a.kind == "constant":
        return a
    return PeriodicCoefficient(a.kind, a.params, 1, float(wrap(a.shift + shift)))


def mean_value(a: PeriodicCoefficient, cfg=None) -> float:
    """Mean of ``a`` over the unit cube, by quadrature.

    Raises QuadratureFailure if the singular quadrature does not converge.
    """
    from .quadrature import QuadratureConfig, integrate_singular

    cfg = cfg or QuadratureConfig()
    if a.kind == "tensor" or a.dim > 1:
        if a.kind == "constant":
            return a.params[0]
        return math.prod(mean_value(f, cfg) for f in a.factors)
    sing = list(a.singular_points)
    if 0.0 in sing:
        sing.append(1.0)
    out = integrate_singular(a, 0.0, 1.0, sing, cfg, breakpoints=a.kinks)
    return out.require()
