"""Graded Gauss-Legendre quadrature with endpoint-singularity extrapolation.

Every interval adjacent to a declared singular point ``s`` is cut into
geometric shells ``|x - s| in [w r^(k+1), w r^k]``.  Shell integrals of an
integrand behaving like ``|x - s|^p`` form a geometric sequence with ratio
``r^(p+1)``; the ratio both extrapolates the missing innermost mass (``p > -1``)
and diagnoses divergence (``p <= -1``: the shells stop shrinking).

Two entry points share the machinery:

* :func:`integrate_singular` adapts the mesh to a scalar integrand.
* :class:`GradedRule` adapts the mesh to an *envelope* once and then
  integrates whole batches of integrands on the frozen nodes; this is what
  the exponent and spectral code uses to evaluate many frequencies at once.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import sparse, special

from .errors import QuadratureFailure, ValidationError

CONVERGED = "converged"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"

# Shell-ratio thresholds (ratio q = r^(p+1) of consecutive shells).
_DIVERGENT_Q = 1.0 - 1e-5
_CONVERGENT_Q = 1.0 - 1e-3
_SHELL_WINDOW = 6
_MAX_PIECES = 400_000


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_refinements: int = 30
    divergence_cap: float = 1e12
    grading_ratio: float = 0.25
    order: int = 20

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValidationError("quadrature: tolerances must be positive")
        if self.max_refinements < 1:
            raise ValidationError("quadrature: max_refinements must be >= 1")
        if not 0.0 < self.grading_ratio < 1.0:
            raise ValidationError("quadrature: grading_ratio must lie in (0, 1)")
        if self.order < 4:
            raise ValidationError("quadrature: order must be >= 4")

    def tighter(self, factor: float = 0.5) -> "QuadratureConfig":
        return QuadratureConfig(self.rel_tol * factor, self.abs_tol * factor,
                                self.max_refinements, self.divergence_cap,
                                self.grading_ratio, self.order)

    def to_dict(self) -> dict:
        return {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol,
                "max_refinements": self.max_refinements,
                "divergence_cap": self.divergence_cap,
                "grading_ratio": self.grading_ratio, "order": self.order}


@dataclass(frozen=True)
class QuadratureOutcome:
    verdict: str
    value: float = math.nan
    error: float = math.nan
    growth: float = math.nan
    evaluations: int = 0
    detail: str = ""

    @property
    def converged(self) -> bool:
        return self.verdict == CONVERGED

    @property
    def divergent(self) -> bool:
        return self.verdict == DIVERGENT

    def require(self) -> float:
        if not self.converged:
            raise QuadratureFailure(f"quadrature {self.verdict}: {self.detail}", self)
        return self.value

    def __add__(self, other: "QuadratureOutcome") -> "QuadratureOutcome":
        return combine([self, other])


def combine(outcomes: Sequence[QuadratureOutcome], weights=None) -> QuadratureOutcome:
    """Linear combination of outcomes; any divergent part makes the whole divergent."""
    weights = [1.0] * len(outcomes) if weights is None else list(weights)
    evals = sum(o.evaluations for o in outcomes)
    for o in outcomes:
        if o.divergent:
            return QuadratureOutcome(DIVERGENT, growth=o.growth, evaluations=evals, detail=o.detail)
    for o in outcomes:
        if not o.converged:
            return QuadratureOutcome(INCONCLUSIVE, evaluations=evals, detail=o.detail)
    value = math.fsum(w * o.value for w, o in zip(weights, outcomes))
    error = math.fsum(abs(w) * o.error for w, o in zip(weights, outcomes))
    return QuadratureOutcome(CONVERGED, value, error, evaluations=evals)


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


# ---------------------------------------------------------------------------
# mesh construction


def _dedupe(points):
    out = []
    for p in sorted(points):
        if out and abs(p - out[-1]) <= 1e-14 * max(1.0, abs(p)):
            continue
        out.append(p)
    return out


class _Pieces(NamedTuple):
    left: np.ndarray
    right: np.ndarray
    group: np.ndarray   # -1 for ordinary panels, else index of a singular series
    level: np.ndarray   # shell index inside the series


class _Series(NamedTuple):
    point: float
    nshells: int


def _shell_count(s: float, w: float, cfg: QuadratureConfig) -> int:
    r = cfg.grading_ratio
    t_min = w * r ** cfg.max_refinements
    if s != 0.0:
        # below this distance x = s +- t no longer resolves t to ~1e-5
        t_min = max(t_min, 1e-10 * abs(s))
    k = int(math.floor(math.log(w / t_min) / math.log(1.0 / r)))
    return max(1, min(k, cfg.max_refinements))


def _initial_pieces(lo, hi, singular, breakpoints, cfg):
    if not hi > lo:
        raise ValidationError("quadrature: need lo < hi")
    sing = [float(s) for s in singular if lo - 1e-15 <= s <= hi + 1e-15]
    inner = [float(b) for b in breakpoints if lo < b < hi]
    pts = _dedupe([lo, hi, *sing, *inner])
    sing_set = _dedupe(sing)

    def is_sing(p):
        return any(abs(p - s) <= 1e-14 * max(1.0, abs(s)) for s in sing_set)

    segs = []
    for p, q in zip(pts[:-1], pts[1:]):
        ls, rs = is_sing(p), is_sing(q)
        if ls and rs:
            m = 0.5 * (p + q)
            segs += [(p, m, "L"), (m, q, "R")]
        elif ls:
            segs.append((p, q, "L"))
        elif rs:
            segs.append((p, q, "R"))
        else:
            segs.append((p, q, ""))

    left, right, group, level, series = [], [], [], [], []
    r = cfg.grading_ratio
    for p, q, side in segs:
        if not side:
            left.append(p), right.append(q), group.append(-1), level.append(0)
            continue
        s = p if side == "L" else q
        w = q - p
        k = _shell_count(s, w, cfg)
        gid = len(series)
        series.append(_Series(s, k))
        for j in range(k):
            near, far = w * r ** (j + 1), w * r ** j
            if side == "L":
                a, b = s + near, s + far
            else:
                a, b = s - far, s - near
            left.append(a), right.append(b), group.append(gid), level.append(j)
    pieces = _Pieces(np.array(left), np.array(right), np.array(group, dtype=int),
                     np.array(level, dtype=int))
    return pieces, series


def _split_wide(pieces: _Pieces, max_width: float | None) -> _Pieces:
    if max_width is None:
        return pieces
    width = pieces.right - pieces.left
    counts = np.maximum(1, np.ceil(width / max_width).astype(int))
    if np.all(counts == 1):
        return pieces
    idx = np.repeat(np.arange(len(width)), counts)
    offs = np.concatenate([np.arange(c) for c in counts])
    c = counts[idx]
    a = pieces.left[idx] + width[idx] * offs / c
    b = pieces.left[idx] + width[idx] * (offs + 1) / c
    b = np.where(offs + 1 == c, pieces.right[idx], b)
    return _Pieces(a, b, pieces.group[idx], pieces.level[idx])


def _bisect(pieces: _Pieces, mask: np.ndarray) -> _Pieces:
    keep = ~mask
    a, b = pieces.left[mask], pieces.right[mask]
    m = 0.5 * (a + b)
    return _Pieces(
        np.concatenate([pieces.left[keep], a, m]),
        np.concatenate([pieces.right[keep], m, b]),
        np.concatenate([pieces.group[keep], pieces.group[mask], pieces.group[mask]]),
        np.concatenate([pieces.level[keep], pieces.level[mask], pieces.level[mask]]),
    )


def _nodes(pieces: _Pieces, n: int):
    x, w = gauss_legendre(n)
    half = 0.5 * (pieces.right - pieces.left)
    mid = 0.5 * (pieces.right + pieces.left)
    return mid[:, None] + half[:, None] * x[None, :], half[:, None] * w[None, :]


def _piece_integrals(f, pieces: _Pieces, cfg):
    """Return (high-order values, error estimates, evaluation count) per piece."""
    n_hi, n_lo = cfg.order, cfg.order // 2
    xh, wh = _nodes(pieces, n_hi)
    xl, wl = _nodes(pieces, n_lo)
    allx = np.concatenate([xh.ravel(), xl.ravel()])
    with np.errstate(all="ignore"):
        fv = np.asarray(f(allx), dtype=float)
    fh = fv[: xh.size].reshape(xh.shape)
    fl = fv[xh.size:].reshape(xl.shape)
    vh = np.sum(fh * wh, axis=1)
    vl = np.sum(fl * wl, axis=1)
    return vh, np.abs(vh - vl), allx.size


# ---------------------------------------------------------------------------
# singular-series reduction (row-batched)


def _series_reduce(shells: np.ndarray, cfg: QuadratureConfig, tol: np.ndarray):
    """Extrapolate shell sequences.

    ``shells`` has shape (rows, K).  Returns remainder, remainder error,
    verdict code per row (0 converged, 1 divergent, 2 inconclusive) and the
    growth exponent ``log q / log(1/r)``.
    """
    rows, k = shells.shape
    r = cfg.grading_ratio
    last = shells[:, -1]
    partial = np.sum(shells, axis=1)
    with np.errstate(all="ignore"), warnings.catch_warnings():
        # single-shell series have no ratios; the all-NaN reductions are expected
        warnings.simplefilter("ignore", RuntimeWarning)
        if k >= 2:
            win = shells[:, -min(k, _SHELL_WINDOW + 1):]
            q = win[:, 1:] / win[:, :-1]
        else:
            q = np.full((rows, 1), np.nan)
        q_last = q[:, -1]
        q_tail = q[:, -3:]
        spread = np.nanmax(q_tail, axis=1) - np.nanmin(q_tail, axis=1)
        growth = np.log(np.abs(q_last)) / math.log(1.0 / r)
        qa = np.nanmax(np.abs(q_tail), axis=1)

        finite = np.isfinite(last) & np.isfinite(partial)
        negligible = np.abs(last) <= 1e-3 * np.maximum(tol, 1e-300)
        nondecaying = np.all(q >= _DIVERGENT_Q, axis=1) & (q.shape[1] >= min(_SHELL_WINDOW, k - 1)) & (k >= 3)
        capped = np.abs(partial) > cfg.divergence_cap
        stable = (q_last >= 0) & (q_last <= _CONVERGENT_Q) & (spread <= np.maximum(0.05 * (1 - q_last), 1e-9))
        slow = np.isfinite(qa) & (qa < _CONVERGENT_Q)

        case_neg = finite & negligible & ~capped
        case_div = finite & ~case_neg & (capped | nondecaying)
        case_stable = finite & ~case_neg & ~case_div & stable
        case_slow = finite & ~case_neg & ~case_div & ~case_stable & slow

        rem_stable = last * q_last / (1.0 - q_last)
        err_stable = np.abs(last) * (spread + 1e-12) / (1.0 - q_last) ** 2
        rem_slow = last * qa / (1.0 - qa)
    rem = np.select([case_stable, case_slow], [rem_stable, rem_slow], 0.0)
    err = np.select([case_neg, case_stable, case_slow],
                    [np.abs(last), err_stable, np.abs(rem_slow)], 0.0)
    code = np.full(rows, 2)
    code[case_neg | case_stable] = 0
    code[case_div] = 1
    code[case_slow & (np.abs(rem_slow) <= tol)] = 0
    return rem, err, code, growth


def _shell_matrix(pieces: _Pieces, series):
    """Sparse map from pieces to the flattened shell index of their series."""
    offsets = np.concatenate([[0], np.cumsum([s.nshells for s in series])]).astype(int)
    sel = np.flatnonzero(pieces.group >= 0)
    flat = offsets[pieces.group[sel]] + pieces.level[sel]
    mat = sparse.csr_matrix((np.ones(sel.size), (flat, sel)),
                            shape=(int(offsets[-1]), pieces.group.size))
    return mat, offsets


def _reduce_rows(values, errors, pieces: _Pieces, series, cfg, shell_map=None):
    """Combine per-piece integrals (rows, npieces) into totals with extrapolation."""
    rows = values.shape[0]
    total = np.sum(values, axis=1)
    error = np.sum(errors, axis=1)
    code = np.zeros(rows, dtype=int)
    growth = np.full(rows, np.nan)
    if not series:
        return total, error, code, growth
    mat, offsets = shell_map if shell_map is not None else _shell_matrix(pieces, series)
    shells_all = (mat @ values.T).T
    tol = np.maximum(cfg.rel_tol * np.abs(total), cfg.abs_tol)
    counts = np.array([s.nshells for s in series])
    for k in np.unique(counts):
        ids = np.flatnonzero(counts == k)
        cols = offsets[ids][:, None] + np.arange(k)[None, :]
        sh = shells_all[:, cols].reshape(rows * ids.size, k)
        rem, rerr, rcode, g = _series_reduce(sh, cfg, np.repeat(tol, ids.size))
        rem, rerr = rem.reshape(rows, -1), rerr.reshape(rows, -1)
        rcode, g = rcode.reshape(rows, -1), g.reshape(rows, -1)
        total = total + rem.sum(axis=1)
        error = error + rerr.sum(axis=1)
        div = rcode == 1
        with np.errstate(all="ignore"):
            gdiv = np.where(div, g, -np.inf).max(axis=1)
        growth = np.where(div.any(axis=1), np.fmax(growth, gdiv), growth)
        # divergence dominates inconclusive
        code = np.where(div.any(axis=1) | (code == 1), 1, np.maximum(code, rcode.max(axis=1)))
    return total, error, code, growth


def _adapt(f, pieces: _Pieces, series, cfg: QuadratureConfig):
    """Bisect pieces until the summed error estimate meets the tolerance."""
    vals, errs, nev = _piece_integrals(f, pieces, cfg)
    nan_rounds = 0
    for _ in range(60):
        bad_nan = ~np.isfinite(vals) | ~np.isfinite(errs)
        total = float(np.sum(np.where(bad_nan, 0.0, vals)))
        tol = max(cfg.rel_tol * abs(total), cfg.abs_tol)
        esum = float(np.sum(np.where(bad_nan, 0.0, errs)))
        if bad_nan.any():
            # a node hit an unlisted pole; a few bisections may step past it
            nan_rounds += 1
            if nan_rounds > 4:
                break
            mask = bad_nan
        elif esum <= 0.5 * tol:
            break
        else:
            width = pieces.right - pieces.left
            frac = width / float(np.sum(width))
            noise = 50 * np.finfo(float).eps * np.abs(vals)
            mask = errs > np.maximum(0.25 * tol * np.maximum(frac, 1.0 / len(vals)), noise)
            if not mask.any():
                break
        if len(vals) + mask.sum() > _MAX_PIECES:
            break
        keep = ~mask
        new = _bisect(pieces, mask)
        sub = _Pieces(new.left[keep.sum():], new.right[keep.sum():],
                      new.group[keep.sum():], new.level[keep.sum():])
        v2, e2, n2 = _piece_integrals(f, sub, cfg)
        nev += n2
        pieces = new
        vals = np.concatenate([vals[keep], v2])
        errs = np.concatenate([errs[keep], e2])
    return pieces, vals, errs, nev


def integrate_singular(f: Callable, lo: float, hi: float, singular_points=(),
                       cfg: QuadratureConfig | None = None, breakpoints=(),
                       max_width: float | None = None) -> QuadratureOutcome:
    """Integrate a vectorized ``f`` over ``[lo, hi]``.

    ``singular_points`` are locations of integrable or non-integrable
    endpoint singularities; ``breakpoints`` are kinks or jumps.  The result
    is Converged with an error estimate, Divergent with the observed growth
    exponent of the shell integrals, or Inconclusive.
    """
    cfg = cfg or QuadratureConfig()
    lo, hi = float(lo), float(hi)
    pieces, series = _initial_pieces(lo, hi, singular_points, breakpoints, cfg)
    pieces = _split_wide(pieces, max_width)
    pieces, vals, errs, nev = _adapt(f, pieces, series, cfg)
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(errs))):
        return QuadratureOutcome(INCONCLUSIVE, evaluations=nev,
                                 detail="integrand not finite at quadrature nodes")
    total, error, code, growth = _reduce_rows(vals[None, :], errs[None, :], pieces, series, cfg)
    value, err, c = float(total[0]), float(error[0]), int(code[0])
    if c == 1:
        where = [s.point for s in series]
        return QuadratureOutcome(DIVERGENT, growth=float(growth[0]), evaluations=nev,
                                 detail=f"shell integrals do not decay near {where}")
    tol = max(cfg.rel_tol * abs(value), cfg.abs_tol)
    if c == 2 or err > 10 * tol:
        return QuadratureOutcome(INCONCLUSIVE, value, err, float(growth[0]), nev,
                                 detail="error estimate above tolerance")
    return QuadratureOutcome(CONVERGED, value, err, evaluations=nev)


class GradedRule:
    """A frozen graded mesh, built against an envelope, reusable for batches.

    ``integrate(F)`` takes integrand values at :attr:`nodes` with shape
    ``(rows, len(nodes))`` and returns per-row values, error estimates and
    verdict codes (0 converged, 1 divergent, 2 inconclusive).
    """

    def __init__(self, pieces: _Pieces, series, cfg: QuadratureConfig):
        self.pieces = pieces
        self.series = series
        self.cfg = cfg
        xh, wh = _nodes(pieces, cfg.order)
        xl, wl = _nodes(pieces, cfg.order // 2)
        self._shape_hi = xh.shape
        self._shape_lo = xl.shape
        self._wh, self._wl = wh, wl
        self.nodes = np.concatenate([xh.ravel(), xl.ravel()])
        self._shell_map = _shell_matrix(pieces, series) if series else None

    @classmethod
    def build(cls, envelope: Callable | None, lo: float, hi: float, singular_points=(),
              cfg: QuadratureConfig | None = None, breakpoints=(),
              max_width: float | None = None) -> "GradedRule":
        cfg = cfg or QuadratureConfig()
        pieces, series = _initial_pieces(float(lo), float(hi), singular_points, breakpoints, cfg)
        pieces = _split_wide(pieces, max_width)
        if envelope is not None:
            pieces, _, _, _ = _adapt(envelope, pieces, series, cfg)
        return cls(pieces, series, cfg)

    def __len__(self) -> int:
        return self.nodes.size

    def integrate(self, fvals: np.ndarray):
        fvals = np.atleast_2d(np.asarray(fvals, dtype=float))
        rows = fvals.shape[0]
        nh = self._shape_hi[0] * self._shape_hi[1]
        fh = fvals[:, :nh].reshape(rows, *self._shape_hi)
        fl = fvals[:, nh:].reshape(rows, *self._shape_lo)
        vh = np.einsum("rpn,pn->rp", fh, self._wh)
        vl = np.einsum("rpn,pn->rp", fl, self._wl)
        return _reduce_rows(vh, np.abs(vh - vl), self.pieces, self.series, self.cfg,
                            self._shell_map)[:3]


# ---------------------------------------------------------------------------
# tails over periods


def _euler_maclaurin_tail(s: float, m: int):
    """sum_{l >= m} l^-s by the Euler-Maclaurin formula; returns (value, bound)."""
    m = float(m)
    terms = [m ** (1 - s) / (s - 1), 0.5 * m ** -s, s * m ** (-s - 1) / 12.0,
             -s * (s + 1) * (s + 2) * m ** (-s - 3) / 720.0]
    bound = s * (s + 1) * (s + 2) * (s + 3) * (s + 4) * m ** (-s - 5) / 30240.0
    return math.fsum(terms), abs(bound)


def periodic_tail_sum_with_error(period_integral: float, beta: float, start: int = 1,
                                 cfg: QuadratureConfig | None = None):
    """``period_integral * sum_{l >= start} l^(-1-beta)`` and its error bound."""
    if not beta > 0:
        raise ValidationError("periodic_tail_sum: beta must be positive")
    if period_integral < 0:
        raise ValidationError("periodic_tail_sum: period_integral must be >= 0")
    if start < 1:
        raise ValidationError("periodic_tail_sum: start must be >= 1")
    if period_integral == 0:
        return 0.0, 0.0
    s = 1.0 + beta
    m = start + 2000
    head = math.fsum(float(l) ** -s for l in range(start, m))
    tail, bound = _euler_maclaurin_tail(s, m)
    return period_integral * (head + tail), period_integral * bound


def periodic_tail_sum(period_integral: float, beta: float, start: int = 1,
                      cfg: QuadratureConfig | None = None) -> float:
    return periodic_tail_sum_with_error(period_integral, beta, start, cfg)[0]


def hurwitz_zeta(s: float, q):
    return special.zeta(s, np.asarray(q, dtype=float))


# ---------------------------------------------------------------------------
# tensor-product quadrature for bounded integrands


def integrate_box(f: Callable, lows: Sequence[float], highs: Sequence[float],
                  cfg: QuadratureConfig | None = None, panels: int = 4) -> QuadratureOutcome:
    """Composite tensor Gauss-Legendre on a box; ``f`` takes points of shape (N, d).

    The panel count doubles until two successive estimates agree.
    """
    cfg = cfg or QuadratureConfig()
    lows = np.asarray(lows, float)
    highs = np.asarray(highs, float)
    d = lows.size
    n = 8
    x, w = gauss_legendre(n)
    prev = None
    evals = 0
    for _ in range(8):
        axes, weights = [], []
        for i in range(d):
            edges = np.linspace(lows[i], highs[i], panels + 1)
            half = 0.5 * np.diff(edges)
            mid = 0.5 * (edges[1:] + edges[:-1])
            axes.append((mid[:, None] + half[:, None] * x).ravel())
            weights.append((half[:, None] * w).ravel())
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        wt = weights[0]
        for wi in weights[1:]:
            wt = np.multiply.outer(wt, wi)
        val = float(np.sum(f(grid) * wt.ravel()))
        evals += grid.shape[0]
        if prev is not None:
            err = abs(val - prev)
            if err <= max(cfg.rel_tol * abs(val), cfg.abs_tol):
                return QuadratureOutcome(CONVERGED, val, err, evaluations=evals)
            if grid.shape[0] * 2 ** d > 4_000_000:
                return QuadratureOutcome(INCONCLUSIVE, val, err, evaluations=evals,
                                         detail="tensor grid budget exhausted")
        prev = val
        panels *= 2
    return QuadratureOutcome(INCONCLUSIVE, prev, math.nan, evaluations=evals)
