"""Reduction of a regular tuple to a first-order system, and back.

For a regular solution the functions

    phi   = F'/2
    psi_k = 1/g1' + (-1)^k / g2'
    Psi_k = -f1'/g1' + (-1)^(k-1) f2'/g2'

satisfy

    phi((x+y)/2) (psi1(x) + psi1(y)) = Psi1(x) + Psi1(y)
    phi((x+y)/2) (psi2(x) - psi2(y)) = Psi2(x) - Psi2(y).

Conversely ``F' = 2 phi``, ``g_j' = 2/(psi2 ± psi1)`` and
``f_j' = -(Psi2 ± Psi1)/(psi2 ± psi1)`` recover the tuple up to additive
constants, and ``G`` is then read off the equation itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import NonFunctionG, QuadratureFailure, VanishingDerivative
from .fncore import UNKNOWN, Grid, Interval, RealFn
from .means import ResidualReport, SolutionTuple, residual_report

#: |g'| below this on a sample of I means the tuple is not regular.
REGULARITY_FLOOR = 1e-8
QUAD_TOL = 1e-10
TAB_N = 200
DEDUPE = 1e-9
CONFLICT = 1e-6


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    phi: RealFn
    psi1: RealFn
    psi2: RealFn
    Psi1: RealFn
    Psi2: RealFn
    I: Interval

    def functions(self) -> dict[str, RealFn]:
        return {"phi": self.phi, "psi1": self.psi1, "psi2": self.psi2,
                "Psi1": self.Psi1, "Psi2": self.Psi2}


@dataclass(frozen=True)
class Anchors:
    """Values fixing the additive gauges of a reconstruction."""

    x0: float
    F0: float = 0.0
    f10: float = 0.0
    f20: float = 0.0
    g10: float = 0.0
    g20: float = 0.0

    @classmethod
    def from_tuple(cls, t: SolutionTuple, x0: float | None = None) -> "Anchors":
        x0 = t.I.midpoint if x0 is None else float(x0)
        return cls(x0, float(t.F(x0)), float(t.f1(x0)), float(t.f2(x0)),
                   float(t.g1(x0)), float(t.g2(x0)))


def derive_system(t: SolutionTuple) -> ReducedSystem:
    """The functions phi, psi_k, Psi_k of a regular tuple."""
    I = t.I
    dF = t.F.derivative(1)
    df1, df2 = t.f1.derivative(1), t.f2.derivative(1)
    dg1, dg2 = t.g1.derivative(1), t.g2.derivative(1)
    xs = I.sample(64, margin=max(I.margin, 1e-3 * I.width) if t.g1.n_analytic == 0 else None)
    for name, d in (("g1", dg1), ("g2", dg2)):
        v = np.abs(np.asarray(d(xs), dtype=float))
        if not np.all(v > REGULARITY_FLOOR):
            raise VanishingDerivative(f"sampled {name}' falls below {REGULARITY_FLOOR}")

    phi_derivs = tuple(
        (lambda k: lambda x: 0.5 * t.F.derivative(k + 1)(x))(k)
        for k in range(1, max(0, t.F.n_analytic - 1) + 1))
    phi = RealFn(lambda x: 0.5 * dF(x), I, phi_derivs, UNKNOWN, "phi")

    def psi(k):
        sgn = (-1.0) ** k
        return lambda x: 1.0 / dg1(x) + sgn / dg2(x)

    def Psi(k):
        sgn = (-1.0) ** (k - 1)
        return lambda x: -df1(x) / dg1(x) + sgn * df2(x) / dg2(x)

    return ReducedSystem(phi, RealFn(psi(1), I, (), UNKNOWN, "psi1"),
                         RealFn(psi(2), I, (), UNKNOWN, "psi2"),
                         RealFn(Psi(1), I, (), UNKNOWN, "Psi1"),
                         RealFn(Psi(2), I, (), UNKNOWN, "Psi2"), I)


def system_residual(s: ReducedSystem, grid: Grid) -> tuple[ResidualReport, ResidualReport]:
    """Residuals of the plus- and minus-equations over ``grid × grid``."""
    x = grid.points
    X, Y = np.meshgrid(x, x, indexing="ij")
    ph = s.phi(0.5 * (X + Y))
    p1, p2 = s.psi1(x), s.psi2(x)
    P1, P2 = s.Psi1(x), s.Psi2(x)
    plus = ph * (p1[:, None] + p1[None, :]) - (P1[:, None] + P1[None, :])
    minus = ph * (p2[:, None] - p2[None, :]) - (P2[:, None] - P2[None, :])
    spec = grid.spec()
    return (residual_report(X, Y, plus, dict(spec, equation="plus")),
            residual_report(X, Y, minus, dict(spec, equation="minus")))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def _simpson(f, a, b, fa, fm, fb):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f, a: float, b: float, tol: float = QUAD_TOL, max_depth: int = 40) -> float:
    """Integral of the scalar function ``f`` over [a, b] (a may exceed b)."""
    if a == b:
        return 0.0
    fa, fb = float(f(a)), float(f(b))
    m = 0.5 * (a + b)
    fm = float(f(m))
    whole = _simpson(f, a, b, fa, fm, fb)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = float(f(lm)), float(f(rm))
        left = _simpson(f, a, m, fa, flm, fm)
        right = _simpson(f, m, b, fm, frm, fb)
        if not np.isfinite(left + right):
            raise QuadratureFailure(f"non-finite integrand near [{a}, {b}]")
        delta = left + right - whole
        # absolute tolerance, relaxed to rounding level for huge integrals
        eps_eff = max(eps, 1e-14 * abs(left + right))
        if abs(delta) <= 15.0 * eps_eff or depth >= max_depth:
            if depth >= max_depth and abs(delta) > 15.0 * eps_eff:
                raise QuadratureFailure(f"tolerance not reached on [{a}, {b}]")
            total += left + right + delta / 15.0
        else:
            stack.append((a, m, fa, flm, fm, left, eps / 2, depth + 1))
            stack.append((m, b, fm, frm, fb, right, eps / 2, depth + 1))
    return total


class _Antiderivative:
    """Antiderivative of ``d`` anchored at ``x0``, tabulated on nodes."""

    def __init__(self, d, x0: float, value0: float, nodes: np.ndarray):
        self.d = d
        self.nodes = nodes
        j0 = int(np.argmin(np.abs(nodes - x0)))
        vals = np.empty_like(nodes)
        vals[j0] = value0 + adaptive_simpson(d, x0, nodes[j0])
        for j in range(j0 + 1, nodes.size):
            vals[j] = vals[j - 1] + adaptive_simpson(d, nodes[j - 1], nodes[j])
        for j in range(j0 - 1, -1, -1):
            vals[j] = vals[j + 1] - adaptive_simpson(d, nodes[j], nodes[j + 1])
        self.values = vals

    def __call__(self, x):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.clip(np.searchsorted(self.nodes, xa), 0, self.nodes.size - 1)
        left = np.clip(idx - 1, 0, self.nodes.size - 1)
        pick = np.where(np.abs(self.nodes[left] - xa) < np.abs(self.nodes[idx] - xa), left, idx)
        out = np.empty_like(xa)
        for i, (xi, j) in enumerate(zip(xa.ravel(), pick.ravel())):
            nd = self.nodes[j]
            out.ravel()[i] = self.values[j] + (0.0 if xi == nd else adaptive_simpson(self.d, nd, xi))
        return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])


def reconstruct_tuple(s: ReducedSystem, anchors: Anchors | None = None,
                      n_tab: int = TAB_N, shrink: float = 0.01) -> SolutionTuple:
    """Rebuild ``(F, f1, f2, G, g1, g2)`` from the reduced system.

    ``F, f_j, g_j`` are integrated from ``anchors.x0`` with adaptive
    Simpson quadrature; ``G`` is tabulated from the equation on an
    ``n_tab × n_tab`` grid and interpolated in ``u`` by piecewise-cubic Hermite splines whose
    slopes ``G'(u) = (phi((x+y)/2) + f1'(x)) / g1'(x)`` come from the system.
    The reconstruction lives on ``s.I`` with ``shrink`` of its width removed
    at each end, keeping quadrature away from boundary singularities.
    """
    I = s.I.shrink(shrink) if shrink > 0 else s.I
    a = Anchors(I.midpoint) if anchors is None else anchors
    lo, hi = I.sampling_bounds(max(I.margin, 1e-9 * max(1.0, abs(I.midpoint))))
    if not lo < a.x0 < hi:
        raise ValueError("anchor x0 must lie inside the system's interval")
    # nodes contain every tabulation point and every pairwise midpoint
    nodes = np.linspace(lo, hi, 2 * n_tab - 1)
    xs = nodes[::2]

    def plus_minus(j):
        sg = (-1.0) ** (j - 1)
        w = lambda x: s.psi2(x) + sg * s.psi1(x)
        W = lambda x: s.Psi2(x) + sg * s.Psi1(x)
        return (lambda x: 2.0 / w(x)), (lambda x: -W(x) / w(x))

    dg1, df1 = plus_minus(1)
    dg2, df2 = plus_minus(2)
    parts = {
        "F": _Antiderivative(lambda x: 2.0 * s.phi(x), a.x0, a.F0, nodes),
        "f1": _Antiderivative(df1, a.x0, a.f10, nodes),
        "f2": _Antiderivative(df2, a.x0, a.f20, nodes),
        "g1": _Antiderivative(dg1, a.x0, a.g10, nodes),
        "g2": _Antiderivative(dg2, a.x0, a.g20, nodes),
    }
    derivs = {"F": (lambda x: 2.0 * s.phi(x),), "f1": (df1,), "f2": (df2,),
              "g1": (dg1,), "g2": (dg2,)}
    dom = Interval(lo, hi)
    fns = {k: RealFn(v, dom, derivs[k], UNKNOWN, k) for k, v in parts.items()}

    # tabulate G(g1(x)+g2(y)) = F((x+y)/2) + f1(x) + f2(y)
    ev = lambda k: parts[k].values
    Fn = ev("F")
    f1x, f2x = ev("f1")[::2], ev("f2")[::2]
    g1x, g2x = ev("g1")[::2], ev("g2")[::2]
    i, j = np.meshgrid(np.arange(n_tab), np.arange(n_tab), indexing="ij")
    U = (g1x[:, None] + g2x[None, :]).ravel()
    V = (Fn[i + j] + f1x[:, None] + f2x[None, :]).ravel()
    # exact slopes: d/dx of the equation gives G'(u) g1'(x) = phi((x+y)/2) + f1'(x)
    ph_nodes = s.phi(nodes)
    S = ((ph_nodes[i + j] + df1(xs)[:, None]) / dg1(xs)[:, None]).ravel()
    order = np.argsort(U, kind="stable")
    U, V, S = U[order], V[order], S[order]
    # group values whose u agree to DEDUPE and demand consistent G values
    brk = np.flatnonzero(np.diff(U) > DEDUPE * np.maximum(1.0, np.abs(U[1:])))
    starts = np.concatenate(([0], brk + 1))
    ends = np.concatenate((brk + 1, [U.size]))
    gmax = np.maximum.reduceat(V, starts)
    gmin = np.minimum.reduceat(V, starts)
    spread = gmax - gmin
    if np.any(spread > CONFLICT):
        k = int(np.argmax(spread))
        raise NonFunctionG(f"G would take values differing by {spread[k]:.3g} at u={U[starts[k]]:.6g}")
    cnt = ends - starts
    Uu = np.add.reduceat(U, starts) / cnt
    Vu = np.add.reduceat(V, starts) / cnt
    Su = np.add.reduceat(S, starts) / cnt
    interp = CubicHermiteSpline(Uu, Vu, Su, extrapolate=False)
    dinterp = interp.derivative()
    Gdom = Interval(float(Uu[0]), float(Uu[-1]))
    G = RealFn(lambda u: interp(u), Gdom, (lambda u: dinterp(u),), UNKNOWN, "G")
    return SolutionTuple(fns["F"], fns["f1"], fns["f2"], G, fns["g1"], fns["g2"], dom, Gdom,
                         {"source": "reconstruction", "x0": a.x0})


def round_trip_error(t: SolutionTuple, n: int = 33, shrink: float = 0.05,
                     anchors: Anchors | None = None) -> dict:
    """Sup-errors between ``t`` and its reconstruction on interior grids."""
    s = derive_system(t)
    r = reconstruct_tuple(s, Anchors.from_tuple(t) if anchors is None else anchors)
    inner = t.I.shrink(shrink)
    xs = np.linspace(*inner.clamped(), n)
    out = {k: float(np.max(np.abs(getattr(r, k)(xs) - getattr(t, k)(xs))))
           for k in ("F", "f1", "f2", "g1", "g2")}
    # compare G at the sums g1(x) + g2(y) of the interior grid
    us = (t.g1(xs)[:, None] + t.g2(xs)[None, :]).ravel()
    out["G"] = float(np.max(np.abs(r.G(us) - t.G(us))))
    out["sup"] = max(out.values())
    return out
