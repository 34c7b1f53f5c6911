"""Matkowski means, their invariance equation, and the induced functional equation.

A Matkowski mean with generators ``(f, g)`` is
``M(u, v) = (f + g)^{-1}(f(u) + g(v))``.  Invariance of ``M_m`` under the
pair ``(M_n, M_k)`` is equivalent to the four-function equation
``F((x+y)/2) + f1(x) + f2(y) = G(g1(x) + g2(y))`` for the tuple produced by
:func:`compose_generators`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DomainMismatch
from .fncore import (
    UNKNOWN,
    Grid,
    Interval,
    RealFn,
    invert_monotone,
    sampled_direction,
    sum_fn,
)

#: Tolerance used for the inverses realised inside composed tuples.
INVERSE_TOL = 1e-14
#: Relative disagreement allowed between sampled images k1(J) and k2(J).
MISMATCH_REL = 1e-3


@dataclass(frozen=True, eq=False)
class GeneratorPair:
    """Generators ``(f, g)`` on a common interval, monotone in the same sense."""

    f: RealFn
    g: RealFn
    domain: Interval

    def __post_init__(self):
        df = sampled_direction(self.f, domain=self.domain)
        dg = sampled_direction(self.g, domain=self.domain)
        if df != dg:
            from .errors import NotMonotone

            raise NotMonotone("generators are not monotone in the same sense")
        sampled_direction(self.total, domain=self.domain)

    @property
    def total(self) -> RealFn:
        """``f + g`` on the common domain."""
        return sum_fn([(1.0, self.f.restrict(self.domain)), (1.0, self.g.restrict(self.domain))],
                      self.domain, f"{self.f.name}+{self.g.name}")

    @classmethod
    def quasi_arithmetic(cls, phi: RealFn, domain: Interval) -> "GeneratorPair":
        """The symmetric pair ``(phi, phi)``."""
        return cls(phi, phi, domain)


@dataclass(frozen=True, eq=False)
class SolutionTuple:
    """The six functions ``(F, f1, f2, G, g1, g2)`` with their domains."""

    F: RealFn
    f1: RealFn
    f2: RealFn
    G: RealFn
    g1: RealFn
    g2: RealFn
    I: Interval
    sum_domain: Interval
    meta: dict = field(default_factory=dict)

    def members(self) -> dict[str, RealFn]:
        return {"F": self.F, "f1": self.f1, "f2": self.f2, "G": self.G,
                "g1": self.g1, "g2": self.g2}

    def with_G(self, G: RealFn) -> "SolutionTuple":
        return SolutionTuple(self.F, self.f1, self.f2, G, self.g1, self.g2, self.I,
                             self.sum_domain, dict(self.meta))


@dataclass(frozen=True, eq=False)
class ResidualReport:
    """Aggregate of absolute residuals over a product grid."""

    max_abs: float
    rms: float
    n_points: int
    argmax_point: tuple[float, float]
    grid_spec: dict
    samples: Any = None  # optional (x, y, residual) arrays for CSV output

    def to_dict(self) -> dict:
        return {"max_abs": self.max_abs, "rms": self.rms, "n_points": self.n_points,
                "argmax_point": list(self.argmax_point), "grid_spec": dict(self.grid_spec)}

    def passed(self, tol: float) -> bool:
        return bool(np.isfinite(self.max_abs) and self.max_abs < tol)


def residual_report(X: np.ndarray, Y: np.ndarray, R: np.ndarray, grid_spec: dict) -> ResidualReport:
    """Summarise a residual array evaluated on the product grid ``(X, Y)``."""
    A = np.abs(np.asarray(R, dtype=float))
    n = int(A.size)
    if not np.all(np.isfinite(A)):
        i = int(np.flatnonzero(~np.isfinite(A.ravel()))[0])
        return ResidualReport(float("inf"), float("inf"), n,
                              (float(X.ravel()[i]), float(Y.ravel()[i])), grid_spec,
                              (X, Y, np.asarray(R, dtype=float)))
    i = int(np.argmax(A))
    return ResidualReport(float(A.ravel()[i]), float(np.sqrt(np.mean(A ** 2))), n,
                          (float(X.ravel()[i]), float(Y.ravel()[i])), grid_spec,
                          (X, Y, np.asarray(R, dtype=float)))


def _mesh(grid: Grid):
    return np.meshgrid(grid.points, grid.points, indexing="ij")


def matkowski_eval(p: GeneratorPair, u, v, tol: float = 1e-14):
    """``(f + g)^{-1}(f(u) + g(v))`` (vectorised in ``u`` and ``v``)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    target = np.asarray(p.f(u), dtype=float) + np.asarray(p.g(v), dtype=float)
    out = invert_monotone(p.total, target, tol)
    return float(out) if np.ndim(out) == 0 else out


def invariance_residual(m: GeneratorPair, n: GeneratorPair, k: GeneratorPair,
                        grid: Grid, tol: float = 1e-14) -> ResidualReport:
    """``M_m(M_n(u,v), M_k(u,v)) - M_m(u,v)`` over ``grid × grid``."""
    U, V = _mesh(grid)
    N = matkowski_eval(n, U, V, tol)
    K = matkowski_eval(k, U, V, tol)
    R = matkowski_eval(m, N, K, tol) - matkowski_eval(m, U, V, tol)
    spec = dict(grid.spec(), equation="invariance")
    return residual_report(U, V, R, spec)


def eq1_residual(t: SolutionTuple, grid: Grid) -> ResidualReport:
    """``F((x+y)/2) + f1(x) + f2(y) - G(g1(x) + g2(y))`` over ``grid × grid``."""
    X, Y = _mesh(grid)
    x = grid.points
    f1x, g1x = t.f1(x), t.g1(x)
    f2y, g2y = t.f2(x), t.g2(x)
    lhs = t.F(0.5 * (X + Y)) + f1x[:, None] + f2y[None, :]
    rhs = t.G(g1x[:, None] + g2y[None, :])
    spec = dict(grid.spec(), equation="main")
    return residual_report(X, Y, lhs - rhs, spec)


def _image(fn: RealFn, domain: Interval) -> tuple[float, float]:
    vals = np.asarray(fn(domain.sample(64)), dtype=float)
    vals = vals[np.isfinite(vals)]
    return float(vals.min()), float(vals.max())


def _inverse(fn: RealFn, image: Interval, name: str, tol: float) -> RealFn:
    """Lazy inverse of a monotone function, with its derivative by the chain rule."""
    inv = lambda y: invert_monotone(fn, y, tol)
    derivs = ()
    if fn.n_analytic >= 1:
        d = fn.derivative(1)
        derivs = (lambda y: 1.0 / d(inv(y)),)
    return RealFn(inv, image, derivs, UNKNOWN, name)


def _after(outer: RealFn, inner: RealFn, scale: float, name: str) -> RealFn:
    """``scale * outer(inner(x))`` with first derivative when available."""
    derivs = ()
    if outer.n_analytic >= 1 and inner.n_analytic >= 1:
        do, di = outer.derivative(1), inner.derivative(1)
        derivs = (lambda x: scale * do(inner(x)) * di(x),)
    return RealFn(lambda x: scale * outer(inner(x)), inner.domain, derivs, UNKNOWN, name)


def compose_generators(m: GeneratorPair, n: GeneratorPair, k: GeneratorPair,
                       tol: float = INVERSE_TOL) -> SolutionTuple:
    """Tuple whose functional-equation residual mirrors the invariance residual.

    ``F = -m2∘((k1+k2)/2)^{-1}``, ``f_j = m_j∘k_j^{-1}``, ``G = m1∘(n1+n2)^{-1}``,
    ``g_j = n_j∘k_j^{-1}``.  Inverses are evaluated lazily.
    """
    J = m.domain.intersect(n.domain).intersect(k.domain)
    a1, b1 = _image(k.f, J)
    a2, b2 = _image(k.g, J)
    scale = max(abs(a1), abs(b1), abs(a2), abs(b2), b1 - a1, b2 - a2)
    if abs(a1 - a2) > MISMATCH_REL * scale or abs(b1 - b2) > MISMATCH_REL * scale:
        raise DomainMismatch(f"k1(J)=[{a1:.6g},{b1:.6g}] and k2(J)=[{a2:.6g},{b2:.6g}] differ")
    I = Interval(max(a1, a2), min(b1, b2))
    kf, kg = k.f.restrict(J), k.g.restrict(J)
    half_k = sum_fn([(0.5, kf), (0.5, kg)], J, "(k1+k2)/2")
    k1_inv = _inverse(kf, I, "k1^-1", tol)
    k2_inv = _inverse(kg, I, "k2^-1", tol)
    hk_inv = _inverse(half_k, I, "((k1+k2)/2)^-1", tol)
    m1, m2 = m.f.restrict(J), m.g.restrict(J)
    n1, n2 = n.f.restrict(J), n.g.restrict(J)
    F = _after(m2, hk_inv, -1.0, "F")
    f1 = _after(m1, k1_inv, 1.0, "f1")
    f2 = _after(m2, k2_inv, 1.0, "f2")
    g1 = _after(n1, k1_inv, 1.0, "g1")
    g2 = _after(n2, k2_inv, 1.0, "g2")
    n_tot = n.total.restrict(J)
    lo, hi = _image(n_tot, J)
    S = Interval(lo, hi)
    G = _after(m1, _inverse(n_tot, S, "(n1+n2)^-1", tol), 1.0, "G")
    return SolutionTuple(F, f1, f2, G, g1, g2, I, S, {"source": "composition"})
