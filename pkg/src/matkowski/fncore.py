"""Numeric substrate: intervals, function handles, inversion, derivatives.

Everything here is vectorised over NumPy arrays.  Functions wrapped in
:class:`RealFn` take and return ``float64`` arrays; scalar inputs give
scalar outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    NoConvergence,
    NotMonotone,
    OutOfRange,
    SeedInvalid,
    TooCloseToBoundary,
    VanishingFirstDerivative,
)

#: Sampling clamp for unbounded intervals.
CLAMP = 1e8
#: Relative boundary margin for bounded intervals (absolute for unbounded).
MARGIN_REL = 1e-6
#: Floor on |f'| below which the Schwarzian derivative is refused.
DERIV_FLOOR = 1e-8
#: Base finite-difference step per derivative order (scaled by max(1, |x|)).
FD_STEPS = {1: 1e-4, 2: 1e-3, 3: 5e-3, 4: 1e-2}

INCREASING = "increasing"
DECREASING = "decreasing"
UNKNOWN = "unknown"


def _as_output(x_in, value):
    """Return a Python float when the caller passed a scalar."""
    if np.ndim(x_in) == 0:
        return float(np.asarray(value).reshape(()))
    return value


@dataclass(frozen=True)
class Interval:
    """Open interval ``]lo, hi[``; either end may be infinite."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise ValueError(f"invalid interval ]{lo}, {hi}[")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def margin(self) -> float:
        """Safety margin epsilon kept away from both ends when sampling."""
        return MARGIN_REL * self.width if self.bounded else MARGIN_REL

    @property
    def midpoint(self) -> float:
        lo, hi = self.clamped()
        return 0.5 * (lo + hi)

    def clamped(self) -> tuple[float, float]:
        """Endpoints clamped to ``[-CLAMP, CLAMP]``."""
        return max(self.lo, -CLAMP), min(self.hi, CLAMP)

    def sampling_bounds(self, margin: float | None = None) -> tuple[float, float]:
        """Closed range ``[lo+eps, hi-eps]`` that sampling may touch."""
        eps = self.margin if margin is None else margin
        lo, hi = self.clamped()
        return lo + eps, hi - eps

    def contains(self, x, margin: float = 0.0):
        x = np.asarray(x, dtype=float)
        return (x > self.lo + margin) & (x < self.hi - margin)

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))

    def shrink(self, fraction: float) -> "Interval":
        """Remove ``fraction`` of the (clamped) width from each side."""
        lo, hi = self.clamped()
        d = fraction * (hi - lo)
        return Interval(lo + d, hi - d)

    def sample(self, n: int, margin: float | None = None) -> np.ndarray:
        """``n`` increasing points inside the safe range.

        Uniform for bounded intervals; for unbounded ones the points are
        uniform in ``asinh`` so that both the neighbourhood of the origin
        and the far field are represented.
        """
        a, b = self.sampling_bounds(margin)
        if self.bounded:
            return np.linspace(a, b, n)
        return np.sinh(np.linspace(np.arcsinh(a), np.arcsinh(b), n))

    def to_list(self) -> list[float]:
        return [self.lo, self.hi]


@dataclass(frozen=True, eq=False)
class RealFn:
    """A vectorised real function on an open interval.

    ``deriv_analytic`` optionally holds closures for the 1st, 2nd, ...
    derivatives.  ``monotonicity_hint`` is used by safe-domain scanning.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    domain: Interval
    deriv_analytic: tuple = ()
    monotonicity_hint: str = UNKNOWN
    name: str = ""

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            y = np.asarray(self.eval(xa), dtype=float)
        if y.shape != xa.shape:
            y = np.broadcast_to(y, xa.shape).copy()
        return _as_output(x, y)

    @property
    def n_analytic(self) -> int:
        return len(self.deriv_analytic)

    def derivative(self, order: int = 1) -> Callable:
        """Closure for the ``order``-th derivative (analytic when known)."""
        if 1 <= order <= self.n_analytic:
            fn = self.deriv_analytic[order - 1]

            def d(x):
                xa = np.asarray(x, dtype=float)
                with np.errstate(all="ignore"):
                    y = np.asarray(fn(xa), dtype=float)
                if y.shape != xa.shape:
                    y = np.broadcast_to(y, xa.shape).copy()
                return _as_output(x, y)

            return d
        return lambda x: derive_num(self, x, order)

    def derivative_fn(self, order: int = 1) -> "RealFn":
        """The ``order``-th derivative wrapped as a :class:`RealFn`."""
        higher = tuple(self.deriv_analytic[order:])
        return RealFn(self.derivative(order), self.domain, higher, UNKNOWN,
                      f"d{order}({self.name})")

    def restrict(self, domain: Interval) -> "RealFn":
        return RealFn(self.eval, domain, self.deriv_analytic,
                      self.monotonicity_hint, self.name)

    def without_derivatives(self) -> "RealFn":
        return RealFn(self.eval, self.domain, (), self.monotonicity_hint, self.name)

    def check_derivatives(self, n: int = 32, rtol: float = 1e-5) -> float:
        """Largest scaled disagreement between analytic and numeric derivatives.

        Returns the maximum of ``|analytic - numeric| / max(|analytic|, s)``
        where ``s`` is 1e-2 of the largest analytic magnitude (relative error is
        meaningless at zero crossings of a derivative); the invariant
        asks for this to stay below ``rtol``.
        """
        if not self.deriv_analytic:
            return 0.0
        plain = self.without_derivatives()
        reach = 4 * FD_STEPS[min(len(self.deriv_analytic), 3)]
        lo, hi = self.domain.sampling_bounds()
        lo, hi = lo + reach * max(1, abs(lo)) * 1.01, hi - reach * max(1, abs(hi)) * 1.01
        xs = np.linspace(lo, hi, n)
        worst = 0.0
        for k in range(1, min(len(self.deriv_analytic), 3) + 1):
            an = np.asarray(self.derivative(k)(xs), dtype=float)
            nu = np.asarray(derive_num(plain, xs, k), dtype=float)
            scale = np.maximum(np.abs(an), 1e-2 * np.max(np.abs(an)) + 1e-300)
            worst = max(worst, float(np.max(np.abs(an - nu) / scale)))
        return worst


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing sample points inside ``]lo+margin, hi-margin[``."""

    interval: Interval
    points: np.ndarray
    margin: float
    kind: str = "custom"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("grid needs a 1-d array of points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if not np.all(self.interval.contains(pts, self.margin)):
            raise ValueError("grid points must lie strictly inside the margins")

    @property
    def n(self) -> int:
        return int(self.points.size)

    @classmethod
    def chebyshev(cls, interval: Interval, n: int = 50, margin: float | None = None) -> "Grid":
        """Chebyshev points of the first kind mapped into the safe range."""
        eps = interval.margin if margin is None else margin
        a, b = interval.clamped()
        half = 0.5 * (b - a) - eps
        j = np.arange(n)
        pts = np.sort(0.5 * (a + b) + half * np.cos((2 * j + 1) * np.pi / (2 * n)))
        # the inner margin is strict: nudge points that rounding put on it
        return cls(interval, np.clip(pts, a + eps * 1.5, b - eps * 1.5) if n > 1 else pts,
                   eps * 0.5, "chebyshev")

    @classmethod
    def uniform(cls, interval: Interval, n: int = 50, margin: float | None = None) -> "Grid":
        eps = interval.margin if margin is None else margin
        a, b = interval.clamped()
        pts = np.linspace(a + 2 * eps, b - 2 * eps, n)
        return cls(interval, pts, eps, "uniform")

    def spec(self) -> dict:
        """Description record used in residual reports."""
        return {"kind": self.kind, "n": self.n, "lo": float(self.points[0]),
                "hi": float(self.points[-1]), "margin": float(self.margin)}


# ---------------------------------------------------------------------------
# monotonicity and inversion
# ---------------------------------------------------------------------------

def sampled_direction(f: RealFn, n: int = 64, domain: Interval | None = None) -> int:
    """+1 / -1 if ``f`` is sampled strictly increasing / decreasing.

    Raises :class:`NotMonotone` when sampled differences change sign or vanish.
    """
    dom = f.domain if domain is None else domain
    xs = dom.sample(n)
    v = np.asarray(f(xs), dtype=float)
    v = v[np.isfinite(v)]
    if v.size < 2:
        raise NotMonotone(f"{f.name or 'function'} has fewer than two finite samples")
    d = np.diff(v)
    if np.all(d > 0):
        return 1
    if np.all(d < 0):
        return -1
    raise NotMonotone(f"sampled differences of {f.name or 'function'} change sign")


def invert_monotone(f: RealFn, y, tol: float = 1e-12, n_sample: int = 64,
                    max_iter: int = 80):
    """Solve ``f(x) = y`` for a strictly monotone ``f`` (vectorised in ``y``).

    A 64-point sample certifies monotonicity and provides the initial
    bracket; bisection then shrinks it, with safeguarded Newton steps when
    ``f`` carries an analytic first derivative.
    """
    xs = f.domain.sample(n_sample)
    vs = np.asarray(f(xs), dtype=float)
    ok = np.isfinite(vs)
    xs, vs = xs[ok], vs[ok]
    if vs.size < 2:
        raise NotMonotone("too few finite samples to invert")
    d = np.diff(vs)
    if np.all(d > 0):
        s = 1.0
    elif np.all(d < 0):
        s = -1.0
    else:
        raise NotMonotone(f"sampled differences of {f.name or 'function'} change sign")

    ya = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    target_tol = tol * (1.0 + np.abs(ya))
    vmin, vmax = vs.min(), vs.max()
    bad = ~np.isfinite(ya) | (ya < vmin - target_tol) | (ya > vmax + target_tol)
    if np.any(bad):
        yb = ya[bad][0]
        raise OutOfRange(f"value {yb!r} outside sampled image [{vmin!r}, {vmax!r}]")

    sv = s * vs
    idx = np.clip(np.searchsorted(sv, s * ya) - 1, 0, sv.size - 2)
    a, b = xs[idx].copy(), xs[idx + 1].copy()
    fa, fb = vs[idx], vs[idx + 1]
    # secant start inside the bracket
    with np.errstate(all="ignore"):
        t = np.where(fb != fa, (ya - fa) / (fb - fa), 0.5)
    t = np.clip(np.nan_to_num(t, nan=0.5), 0.0, 1.0)
    x = a + t * (b - a)
    x = np.clip(x, a, b)

    deriv = f.derivative(1) if f.n_analytic >= 1 else None
    done = np.zeros(ya.shape, dtype=bool)
    result = x.copy()
    for _ in range(max_iter):
        act = ~done
        if not np.any(act):
            break
        xa = x[act]
        fx = np.asarray(f(xa), dtype=float)
        err = fx - ya[act]
        conv = np.abs(err) <= target_tol[act]
        # update the bracket with the sign information
        right = s * err < 0
        a_act, b_act = a[act], b[act]
        a_act = np.where(right & ~conv, xa, a_act)
        b_act = np.where(~right & ~conv, xa, b_act)
        collapsed = (b_act - a_act) <= 4 * np.spacing(np.maximum(np.abs(a_act), np.abs(b_act)))
        finished = conv | collapsed
        # next iterate: Newton when available and inside the bracket
        mid = 0.5 * (a_act + b_act)
        if deriv is not None:
            dfx = np.asarray(deriv(xa), dtype=float)
            with np.errstate(all="ignore"):
                xn = xa - err / dfx
            use = np.isfinite(xn) & (xn > a_act) & (xn < b_act)
            nxt = np.where(use, xn, mid)
        else:
            nxt = mid
        ids = np.flatnonzero(act)
        result[ids[finished]] = xa[finished]
        done[ids[finished]] = True
        a[act], b[act] = a_act, b_act
        x[act] = np.where(finished, xa, nxt)
    if not np.all(done):
        raise NoConvergence(f"inversion did not converge within {max_iter} iterations")
    return _as_output(y, result.reshape(np.shape(y)))


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

# (offsets, weights, divisor power, truncation order) per derivative order
_STENCILS = {
    1: (np.array([-1, 1]), np.array([-0.5, 0.5]), 2),
    2: (np.array([-1, 0, 1]), np.array([1.0, -2.0, 1.0]), 2),
    3: (np.array([-3, -2, -1, 1, 2, 3]),
        np.array([1.0, -8.0, 13.0, -13.0, 8.0, -1.0]) / 8.0, 4),
    4: (np.array([-3, -2, -1, 0, 1, 2, 3]),
        np.array([-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0]) / 6.0, 4),
}


def fd_step(x, order: int):
    """Default step for the given order, scaled by ``max(1, |x|)``."""
    return FD_STEPS[order] * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def derive_num(f: RealFn, x, order: int, h=None):
    """``order``-th derivative of ``f`` at ``x`` (orders 1..4).

    Uses the analytic closure when ``f`` carries one; otherwise a central
    stencil (7 points for orders 3 and 4) with one Richardson level.
    """
    if order not in _STENCILS:
        raise ValueError("order must be 1, 2, 3 or 4")
    if f.n_analytic >= order:
        return f.derivative(order)(x)
    xa = np.asarray(x, dtype=float)
    hh = fd_step(xa, order) if h is None else np.broadcast_to(np.asarray(h, float), xa.shape)
    dist = np.minimum(xa - f.domain.lo, f.domain.hi - xa)
    if np.any(dist < 4 * hh):
        raise TooCloseToBoundary(
            f"point within 4h of the boundary of ]{f.domain.lo}, {f.domain.hi}[")
    offs, w, p = _STENCILS[order]

    def stencil(step):
        pts = xa[..., None] + offs * step[..., None]
        vals = np.asarray(f(pts), dtype=float)
        return (vals @ w) / step ** order

    d1 = stencil(hh)
    d2 = stencil(hh / 2)
    r = 2.0 ** p
    return _as_output(x, (r * d2 - d1) / (r - 1))


def schwarzian_num(f: RealFn, x, floor: float = DERIV_FLOOR):
    """Schwarzian derivative ``f'''/f' - 1.5 (f''/f')**2``."""
    d1 = np.asarray(derive_num(f, x, 1), dtype=float)
    if np.any(~(np.abs(d1) >= floor)):
        raise VanishingFirstDerivative(f"|f'| below {floor} on the requested points")
    d2 = np.asarray(derive_num(f, x, 2), dtype=float)
    d3 = np.asarray(derive_num(f, x, 3), dtype=float)
    return _as_output(x, d3 / d1 - 1.5 * (d2 / d1) ** 2)


# ---------------------------------------------------------------------------
# safe domains
# ---------------------------------------------------------------------------

def _pole_between(fn: RealFn, a: float, b: float, ref: float, iters: int = 60) -> bool:
    """Bisect a sign change of ``fn`` on [a, b]; True if it is a pole."""
    fa = float(fn(a))
    for _ in range(iters):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        fm = float(fn(m))
        if not np.isfinite(fm):
            return True
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    fb = float(fn(b))
    return min(abs(fa), abs(fb)) > 1e3 * (1.0 + abs(ref))


def safe_subinterval(f_list: Sequence[RealFn], seed: float, request: Interval,
                     nonzero: Sequence[RealFn] = (), n_scan: int = 400,
                     margin: float | None = None, floor: float = 0.0) -> Interval:
    """Largest subinterval of ``request`` around ``seed`` free of singularities.

    Scans outward from ``seed`` and stops at the first point where a
    function in ``f_list`` is non-finite, jumps through a pole, or (when
    flagged monotone) reverses direction, or where a function in
    ``nonzero`` changes sign or drops to ``floor`` in absolute value.  The boundary is then located by bisection
    and the result is kept ``margin`` (default ``1e-6`` times the request
    width) away from it.
    """
    fns = list(f_list)
    guards = list(nonzero)
    eps = request.margin if margin is None else margin
    seed = float(seed)
    if not request.contains(seed):
        raise SeedInvalid(f"seed {seed} outside the request ]{request.lo}, {request.hi}[")
    eff = request
    for fn in fns + guards:
        if not fn.domain.contains(seed):
            raise SeedInvalid(f"seed {seed} outside the domain of {fn.name or 'a function'}")
        eff = eff.intersect(fn.domain)
    seed_vals = [float(fn(seed)) for fn in fns]
    if not all(np.isfinite(seed_vals)):
        raise SeedInvalid(f"some function is not finite at the seed {seed}")
    seed_signs = [np.sign(float(g(seed))) for g in guards]
    if any(sg == 0 or not np.isfinite(sg) or abs(float(g(seed))) <= floor
           for sg, g in zip(seed_signs, guards)):
        raise SeedInvalid(f"a guard expression vanishes at the seed {seed}")
    dirs = []
    for fn in fns:
        if fn.monotonicity_hint == INCREASING:
            dirs.append(1.0)
        elif fn.monotonicity_hint == DECREASING:
            dirs.append(-1.0)
        else:
            dirs.append(0.0)

    def bad_at(z: float, ref: float) -> bool:
        """Is ``z`` inadmissible given the admissible reference point ``ref``?"""
        step = np.sign(z - ref)
        for fn, dr, sv in zip(fns, dirs, seed_vals):
            fz = float(fn(z))
            if not np.isfinite(fz):
                return True
            fr = float(fn(ref))
            if dr != 0.0 and (fz - fr) * dr * step <= 0 and z != ref:
                return True
            if dr == 0.0 and np.sign(fz) * np.sign(fr) < 0 and _pole_between(fn, min(ref, z), max(ref, z), sv):
                return True
        for g, sg in zip(guards, seed_signs):
            gz = float(g(z))
            if np.sign(gz) != sg or abs(gz) <= floor:
                return True
        return False

    def scan(edge: float) -> tuple[float, bool]:
        """Walk from the seed to ``edge``; return (last safe point, hit?)."""
        if eff_is_unbounded(edge):
            t = np.linspace(0.0, 1.0, n_scan + 1)[1:]
            span = edge - seed
            pts = seed + np.sign(span) * np.expm1(t * np.log1p(abs(span)))
        else:
            pts = seed + (edge - seed) * np.linspace(0.0, 1.0, n_scan + 1)[1:]
        allp = np.concatenate(([seed], pts))
        first_bad = len(pts)
        for fn, dr, sv in zip(fns, dirs, seed_vals):
            v = np.asarray(fn(allp), dtype=float)
            nonfin = ~np.isfinite(v[1:])
            cand = np.flatnonzero(nonfin)
            if cand.size:
                first_bad = min(first_bad, int(cand[0]))
            dv = np.diff(v) * np.sign(edge - seed)
            if dr != 0.0:
                rev = np.flatnonzero(~(dv * dr > 0))
                if rev.size:
                    first_bad = min(first_bad, int(rev[0]))
            else:
                flips = np.flatnonzero(np.sign(v[1:]) * np.sign(v[:-1]) < 0)
                for i in flips:
                    if i >= first_bad:
                        break
                    if _pole_between(fn, min(allp[i], allp[i + 1]), max(allp[i], allp[i + 1]), sv):
                        first_bad = min(first_bad, int(i))
                        break
        for g, sg in zip(guards, seed_signs):
            v = np.asarray(g(pts), dtype=float)
            cand = np.flatnonzero(~((np.sign(v) == sg) & (np.abs(v) > floor)))
            if cand.size:
                first_bad = min(first_bad, int(cand[0]))
        if first_bad >= len(pts):
            return float(pts[-1]), False
        good = float(allp[first_bad])
        bad = float(pts[first_bad])
        for _ in range(80):
            mid = 0.5 * (good + bad)
            if mid == good or mid == bad:
                break
            if bad_at(mid, good):
                bad = mid
            else:
                good = mid
        return good, True

    def eff_is_unbounded(edge: float) -> bool:
        return abs(edge) >= CLAMP * 0.5

    # scan up to the edge itself so that nothing between the last scanned
    # point and the edge goes unchecked
    lo_edge = max(eff.lo, -CLAMP)
    hi_edge = min(eff.hi, CLAMP)
    lo_pt, lo_hit = scan(lo_edge) if lo_edge < seed else (seed, True)
    hi_pt, hi_hit = scan(hi_edge) if hi_edge > seed else (seed, True)
    lo = lo_pt + eps if lo_hit else (eff.lo if eff.lo == request.lo else lo_pt)
    hi = hi_pt - eps if hi_hit else (eff.hi if eff.hi == request.hi else hi_pt)
    lo = min(lo, seed - 0.25 * eps) if lo >= seed else lo
    hi = max(hi, seed + 0.25 * eps) if hi <= seed else hi
    return Interval(lo, hi)


def compose(outer: RealFn, inner: RealFn, name: str = "") -> RealFn:
    """``outer ∘ inner`` on ``inner``'s domain (first derivative by chain rule)."""
    derivs = ()
    if outer.n_analytic >= 1 and inner.n_analytic >= 1:
        do, di = outer.derivative(1), inner.derivative(1)
        derivs = (lambda x: do(inner(x)) * di(x),)
    return RealFn(lambda x: outer(inner(x)), inner.domain, derivs, UNKNOWN,
                  name or f"{outer.name}∘{inner.name}")


def linear_fn(slope: float, intercept: float, domain: Interval, name: str = "") -> RealFn:
    """``x ↦ slope·x + intercept`` with exact derivatives."""
    hint = INCREASING if slope > 0 else DECREASING if slope < 0 else UNKNOWN
    zero = lambda x: np.zeros_like(x)
    return RealFn(lambda x: slope * x + intercept, domain,
                  (lambda x: np.full_like(x, slope), zero, zero, zero), hint,
                  name or f"{slope}*x+{intercept}")


def constant_fn(value: float, domain: Interval, name: str = "") -> RealFn:
    zero = lambda x: np.zeros_like(x)
    return RealFn(lambda x: np.full_like(x, value), domain, (zero, zero, zero, zero),
                  UNKNOWN, name or str(value))


def sum_fn(parts: Iterable[tuple[float, RealFn]], domain: Interval | None = None,
           name: str = "") -> RealFn:
    """Linear combination ``Σ c_i f_i`` keeping the common analytic derivatives."""
    parts = list(parts)
    dom = domain or parts[0][1].domain
    n = min(fn.n_analytic for _, fn in parts)
    derivs = tuple(
        (lambda k: lambda x: sum(c * fn.derivative(k)(x) for c, fn in parts))(k)
        for k in range(1, n + 1))
    return RealFn(lambda x: sum(c * fn(x) for c, fn in parts), dom, derivs, UNKNOWN, name)
