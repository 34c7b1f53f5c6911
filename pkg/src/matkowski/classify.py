"""Recognise which solution family a regular tuple belongs to.

Pipeline: reduce the tuple to ``(phi, psi_k, Psi_k)``; a constant ``phi``
means ``F`` is affine (branch A); a vanishing ``psi1`` with constant
``psi2`` means affine ``g_k`` (branch B1); otherwise ``phi`` is a
trigonometric, linear or hyperbolic fraction whose type is read off the
sign of its (constant) Schwarzian derivative, and the family is
identified from the fitted coefficients of ``1/g_k'``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateFit,
    NonConstantSchwarzian,
    RankDeficientBasis,
    Unclassifiable,
    VanishingFirstDerivative,
)
from .families import FamilyParams
from .fncore import DERIV_FLOOR, UNKNOWN, Grid, Interval, RealFn, derive_num
from .means import ResidualReport, SolutionTuple, eq1_residual, residual_report
from .reduction import ReducedSystem, derive_system, system_residual

CONST_REL = 1e-8
SPREAD_REL = 1e-3
SPREAD_ABS = 1e-6
TIE = 1e-8
TAG_TOL = 1e-6
ZERO_COEF = 1e-7
FIT_REL = 1e-6
SIGMAS = 20.0
CLASSES = ("constant_phi", "trig", "linear", "hyperbolic")
BRANCH_OF_CLASS = {"trig": "B2_trig", "linear": "B2_linear", "hyperbolic": "B2_hyperbolic"}


@dataclass(frozen=True)
class GammaEstimate:
    gamma: float
    classification: str
    spread: float = 0.0


@dataclass(frozen=True)
class FractionFit:
    """``phi = (c s + d co) / (a s + b co)`` in the class basis ``(s, co)``.

    The vector ``(a, b, c, d)`` has unit norm and the first non-negligible
    entry of ``(a, b)`` is positive.
    """

    a: float
    b: float
    c: float
    d: float
    gamma: float
    kappa: float
    residual: float
    basis: str = "linear"
    center: float = 0.0
    centered: tuple = ()

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    def __call__(self, x):
        s, co = _pair(self.basis, self.kappa, np.asarray(x, dtype=float) - self.center)
        a, b, c, d = self.centered
        return (c * s + d * co) / (a * s + b * co)

    def to_dict(self) -> dict:
        return {"kind": "fraction", "basis": self.basis, "a": self.a, "b": self.b,
                "c": self.c, "d": self.d, "gamma": self.gamma, "kappa": self.kappa,
                "residual": self.residual}


@dataclass(frozen=True)
class BasisFit:
    """Least-squares coefficients of a function on a basis, with fit rms."""

    coefficients: tuple
    rms: float
    target: str = ""
    basis: str = ""
    stderr: tuple = ()

    def to_dict(self) -> dict:
        return {"kind": "basis", "target": self.target, "basis": self.basis,
                "coefficients": list(self.coefficients), "rms": self.rms}


@dataclass(frozen=True, eq=False)
class ClassificationReport:
    branch: str
    family_guess: FamilyParams | None
    fits: list
    residuals: list
    gamma: float | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"branch": self.branch,
                "family_guess": None if self.family_guess is None else self.family_guess.to_dict(),
                "fits": [f.to_dict() for f in self.fits],
                "residuals": [r.to_dict() for r in self.residuals]}


# ---------------------------------------------------------------------------
# Schwarzian class
# ---------------------------------------------------------------------------

def estimate_gamma(phi: RealFn, grid: Grid) -> GammaEstimate:
    """Constant ``gamma = -S(phi)/2`` and its sign class."""
    x = grid.points
    d1 = np.asarray(derive_num(phi, x, 1), dtype=float)
    if np.all(np.abs(d1) < DERIV_FLOOR):
        return GammaEstimate(0.0, "constant_phi")
    keep = np.abs(d1) >= DERIV_FLOOR
    x, d1 = x[keep], d1[keep]
    d2 = np.asarray(derive_num(phi, x, 2), dtype=float)
    d3 = np.asarray(derive_num(phi, x, 3), dtype=float)
    t3, t2 = d3 / d1, 1.5 * (d2 / d1) ** 2
    S = t3 - t2
    if not np.all(np.isfinite(S)):
        raise NonConstantSchwarzian("Schwarzian derivative is not finite on the grid")
    mean = float(np.mean(S))
    spread = float(np.max(S) - np.min(S))
    if not (spread < SPREAD_REL * abs(mean) or spread < SPREAD_ABS):
        raise NonConstantSchwarzian(f"Schwarzian varies by {spread:.3g} around {mean:.3g}")
    # rounding level of the cancellation t3 - t2
    noise = 1e-12 * float(np.max(np.abs(t3) + np.abs(t2)))
    zero = max(SPREAD_ABS, noise)
    gamma = -0.5 * mean
    if abs(mean) <= zero:
        return GammaEstimate(0.0, "linear", spread)
    return GammaEstimate(gamma, "trig" if gamma < 0 else "hyperbolic", spread)


def _class_of(gamma: float) -> str:
    return "linear" if gamma == 0 else "trig" if gamma < 0 else "hyperbolic"


def _pair(basis: str, kappa: float, x):
    if basis == "trig":
        return np.sin(kappa * x), np.cos(kappa * x)
    if basis == "hyperbolic":
        return np.sinh(kappa * x), np.cosh(kappa * x)
    return x, np.ones_like(x)


def _shift_matrix(basis: str, kappa: float, c: float) -> np.ndarray:
    """M with (s(x), co(x)) = M @ (s(x-c), co(x-c))."""
    if basis == "trig":
        sc, cc = np.sin(kappa * c), np.cos(kappa * c)
        return np.array([[cc, sc], [-sc, cc]])
    if basis == "hyperbolic":
        sc, cc = np.sinh(kappa * c), np.cosh(kappa * c)
        return np.array([[cc, sc], [sc, cc]])
    return np.array([[1.0, c], [0.0, 1.0]])


def _normalise(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    lead = v[0] if abs(v[0]) > 1e-9 else v[1]
    return -v if lead < 0 else v


def fit_fraction(phi: RealFn, gamma: float, grid: Grid) -> FractionFit:
    """Homogeneous least-squares fit of ``phi`` by a fraction of the class basis.

    Solves ``c s + d co - phi (a s + b co) = 0`` through the smallest right
    singular vector (rows scaled to unit norm; basis centred on the grid
    for conditioning, then mapped back to ``(s(x), co(x))``).
    """
    basis = _class_of(gamma)
    kappa = float(np.sqrt(abs(gamma)))
    x = grid.points
    c0 = 0.5 * (x[0] + x[-1])
    s, co = _pair(basis, kappa, x - c0)
    ph = np.asarray(phi(x), dtype=float)
    M = np.column_stack([-ph * s, -ph * co, s, co])
    M = M / np.linalg.norm(M, axis=1, keepdims=True)
    _, sv, vt = np.linalg.svd(M, full_matrices=False)
    if sv[-2] - sv[-1] <= TIE * sv[0]:
        raise DegenerateFit(f"singular values {sv[-2]:.3g} and {sv[-1]:.3g} tie")
    vc = vt[-1]
    # back to the uncentred basis: (s_c, co_c) = Minv (s, co)
    Minv = np.linalg.inv(_shift_matrix(basis, kappa, c0))
    den = vc[:2] @ Minv
    num = vc[2:] @ Minv
    v = _normalise(np.concatenate([den, num]))
    vc = _normalise(vc)
    if abs(vc[0] * vc[3] - vc[1] * vc[2]) < 1e-12:
        raise DegenerateFit("fitted fraction has ad = bc")
    return FractionFit(*map(float, v), gamma=float(gamma), kappa=kappa,
                       residual=float(sv[-1] / np.sqrt(len(x))), basis=basis,
                       center=float(c0), centered=tuple(map(float, vc)))


def fit_linear_combo(f: RealFn | Callable, basis: Sequence, grid: Grid,
                     target: str = "", basis_name: str = "") -> BasisFit:
    """Ordinary least squares of ``f`` on ``basis`` over ``grid``."""
    x = grid.points
    if len(x) < 2 * len(basis):
        raise ValueError("grid needs at least twice as many points as basis functions")
    A = np.column_stack([np.asarray(b(x), dtype=float) * np.ones_like(x) for b in basis])
    y = np.asarray(f(x), dtype=float)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise RankDeficientBasis("a basis function vanishes on the grid")
    An = A / norms
    sv = np.linalg.svd(An, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise RankDeficientBasis(f"basis condition number {sv[0] / sv[-1]:.3g}")
    coef, *_ = np.linalg.lstsq(An, y, rcond=None)
    coef = coef / norms
    rms = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    # coefficient standard errors, with rounding as the noise floor
    dof = max(len(x) - len(basis), 1)
    noise = max(rms * np.sqrt(len(x) / dof), 1e-14 * float(np.max(np.abs(y), initial=0.0)))
    cov = np.linalg.inv(An.T @ An)
    se = noise * np.sqrt(np.diag(cov)) / norms
    return BasisFit(tuple(float(c) for c in coef), rms, target, basis_name,
                    tuple(float(e) for e in se))


# ---------------------------------------------------------------------------
# tuple classification
# ---------------------------------------------------------------------------

def _class_basis(cls: str, kappa: float, c0: float):
    if cls == "trig":
        return [lambda x: np.sin(kappa * (x - c0)), lambda x: np.cos(kappa * (x - c0)),
                lambda x: np.ones_like(x)]
    if cls == "hyperbolic":
        return [lambda x: np.exp(kappa * (x - c0)), lambda x: np.ones_like(x),
                lambda x: np.exp(-kappa * (x - c0))]
    return [lambda x: (x - c0) ** 2, lambda x: x - c0, lambda x: np.ones_like(x)]


def _const_range(v: np.ndarray) -> bool:
    return float(np.ptp(v)) < CONST_REL * (1.0 + abs(float(np.mean(v))))


def _affine_guess_A(t: SolutionTuple, s: ReducedSystem, x: np.ndarray, n: int):
    A = 2.0 * float(np.mean(s.phi(x)))
    x0 = t.I.midpoint
    u = t.g1(x) + t.g2(x)
    us = u[(u > t.sum_domain.lo) & (u < t.sum_domain.hi)]
    B = float(np.mean(t.G.derivative(1)(us)))
    F0 = float(t.F(x0))
    lam = F0 - A * x0
    lam1 = float(t.f1(x0)) + 0.5 * F0 - B * float(t.g1(x0))
    lam2 = float(t.f2(x0)) + 0.5 * F0 - B * float(t.g2(x0))
    guess = FamilyParams("Main1_AffineF", {"A": A, "B": B, "lambda": lam, "lambda1": lam1,
                                           "lambda2": lam2}, t.I)
    L = lam1 + lam2
    Fh = RealFn(lambda y: A * y + lam, t.I)
    f1h = RealFn(lambda y: -0.5 * (A * y + lam) + B * t.g1(y) + lam1, t.I)
    f2h = RealFn(lambda y: -0.5 * (A * y + lam) + B * t.g2(y) + lam2, t.I)
    Gh = RealFn(lambda w: B * w + L, t.sum_domain)
    th = SolutionTuple(Fh, f1h, f2h, Gh, t.g1, t.g2, t.I, t.sum_domain)
    return guess, eq1_residual(th, Grid.chebyshev(t.I, n))


def _affine_guess_B1(t: SolutionTuple, s: ReducedSystem, x: np.ndarray, n: int):
    D = 2.0 / float(np.mean(s.psi2(x)))
    C = float(np.mean(0.5 * (t.f1.derivative(1)(x) + t.f2.derivative(1)(x))))
    x0 = t.I.midpoint
    lam1, lam2 = float(t.f1(x0)) - C * x0, float(t.f2(x0)) - C * x0
    mu1, mu2 = float(t.g1(x0)) - D * x0, float(t.g2(x0)) - D * x0
    guess = FamilyParams("Main1_AffineG", {"C": C, "D": D, "lambda1": lam1, "lambda2": lam2,
                                           "mu1": mu1, "mu2": mu2}, t.I)
    mu, L = mu1 + mu2, lam1 + lam2
    F = t.F
    g1h = RealFn(lambda y: D * y + mu1, t.I)
    g2h = RealFn(lambda y: D * y + mu2, t.I)
    f1h = RealFn(lambda y: C * y + lam1, t.I)
    f2h = RealFn(lambda y: C * y + lam2, t.I)
    Gh = RealFn(lambda w: F((w - mu) / (2 * D)) + C * (w - mu) / D + L, t.sum_domain)
    th = SolutionTuple(F, f1h, f2h, Gh, g1h, g2h, t.I, t.sum_domain)
    return guess, eq1_residual(th, Grid.chebyshev(t.I, n))


def _disc_sign(c2: float, c1: float, c0: float, se) -> int:
    """Sign of ``c1^2 - 4 c2 c0``, 0 when indistinguishable from zero."""
    disc = c1 * c1 - 4 * c2 * c0
    norm = c1 * c1 + 4 * abs(c2 * c0)
    e2, e1, e0 = se
    err = 2 * abs(c1) * e1 + 4 * abs(c2) * e0 + 4 * abs(c0) * e2
    if abs(disc) <= max(TAG_TOL * norm, SIGMAS * err):
        return 0
    return 1 if disc > 0 else -1


def _present(coef: float, bmax: float, scale: float) -> bool:
    return abs(coef) * bmax > ZERO_COEF * scale


def _match_trig(w: list[np.ndarray], kappa: float) -> tuple[str, dict]:
    Ts = []
    for cw in w:
        amp = float(np.hypot(cw[0], cw[1]))
        Ts.append(abs(cw[2]) / amp)
    T = float(np.mean(Ts))
    if abs(Ts[0] - Ts[1]) > 1e-6 * (1 + T):
        raise Unclassifiable(f"inconsistent |T| estimates {Ts}")
    if abs(T - 1.0) < TAG_TOL:
        tag = "T2"
    elif T < 1:
        tag = "T1"
    else:
        tag = "T3"
    return tag, {"alpha": kappa / 2, "T": 1.0 if tag == "T2" else T}


def _match_linear(w: list[np.ndarray], phi_affine: bool, h: float, se) -> tuple[str, dict]:
    cw = w[0]
    scale = float(np.max(np.abs(cw) * np.array([h * h, h, 1.0])))
    deg2 = _present(cw[0], h * h, scale)
    deg1 = _present(cw[1], h, scale)
    if phi_affine:
        return ("P2_2" if (deg1 or deg2) else "P2_1"), {}
    if not deg2:
        if not deg1:
            raise Unclassifiable("1/g' constant while phi is not affine")
        return "P1_4", {}
    sign = _disc_sign(*cw, se)
    return {0: "P1_2", -1: "P1_1", 1: "P1_3"}[sign], {}


def _match_hyperbolic(w: list[np.ndarray], kappa: float, h: float, se) -> tuple[str, dict]:
    e = float(np.exp(kappa * h))
    pres = []
    for cw in w:
        scale = float(np.max(np.abs(cw) * np.array([e, 1.0, e])))
        pres.append((_present(cw[0], e, scale), _present(cw[1], 1.0, scale),
                     _present(cw[2], e, scale)))
    consts = {"kappa": kappa}
    p1, p2 = pres
    if p1[0] and p1[2]:
        sign = _disc_sign(*w[0], se)
        return {0: "H2_1", -1: "H2_2", 1: "H2_3"}[sign], consts
    dirs = []
    for pr in pres:
        if pr[0] == pr[2]:
            raise Unclassifiable(f"unexpected exponential pattern {pres}")
        dirs.append(1 if pr[0] else -1)
    same = dirs[0] == dirs[1]
    if p1[1]:
        return ("H1_1" if same else "H2_4"), consts
    return ("H1_2" if same else "H2_5"), consts


def _fitted_system(frac: FractionFit, fits: dict, basis) -> ReducedSystem:
    def comb(bf):
        cf = np.array(bf.coefficients)
        return lambda x: sum(c * b(np.asarray(x, dtype=float)) for c, b in zip(cf, basis))

    dom = Interval(-np.inf, np.inf)
    mk = lambda fn, nm: RealFn(fn, dom, (), UNKNOWN, nm)
    return ReducedSystem(mk(frac, "phi"), mk(comb(fits["psi1"]), "psi1"),
                         mk(comb(fits["psi2"]), "psi2"), mk(comb(fits["Psi1"]), "Psi1"),
                         mk(comb(fits["Psi2"]), "Psi2"), dom)


def classify_tuple(t: SolutionTuple, n_fit: int = 64, n_check: int = 50,
                   shrink: float = 0.02) -> ClassificationReport:
    """Branch, fits and family guess of a regular tuple.

    Raises :class:`Unclassifiable` (with the partial report attached as
    ``exc.report``) when no family form reproduces the tuple.
    """
    s = derive_system(t)
    inner = t.I.shrink(shrink)
    grid = Grid.uniform(inner, n_fit)
    x = grid.points
    ph = np.asarray(s.phi(x), dtype=float)
    if _const_range(ph):
        guess, res = _affine_guess_A(t, s, x, n_check)
        return ClassificationReport("A", guess, [], [res])
    p1 = np.asarray(s.psi1(x), dtype=float)
    p2 = np.asarray(s.psi2(x), dtype=float)
    psi1_zero = float(np.max(np.abs(p1))) < CONST_REL * max(1.0, float(np.max(np.abs(p2))))
    if psi1_zero and _const_range(p2):
        guess, res = _affine_guess_B1(t, s, x, n_check)
        return ClassificationReport("B1", guess, [], [res])

    try:
        est = estimate_gamma(s.phi, grid)
        if est.classification == "constant_phi":
            raise Unclassifiable("phi' vanishes on the grid but phi is not constant")
        frac = fit_fraction(s.phi, est.gamma, grid)
    except (NonConstantSchwarzian, DegenerateFit, VanishingFirstDerivative) as exc:
        raise Unclassifiable(f"phi is not a fraction of the three canonical types: {exc}") from exc
    cls = est.classification
    c0 = 0.5 * (x[0] + x[-1])
    h = 0.5 * (x[-1] - x[0])
    basis = _class_basis(cls, frac.kappa, c0)
    fits = {nm: fit_linear_combo(fn, basis, grid, nm, cls)
            for nm, fn in s.functions().items() if nm != "phi"}
    notes = []
    for nm, bf in fits.items():
        vals = np.asarray(s.functions()[nm](x), dtype=float)
        if bf.rms > FIT_REL * (1.0 + float(np.max(np.abs(vals)))):
            notes.append(f"{nm} does not fit the {cls} basis (rms {bf.rms:.3g})")
    fitted = _fitted_system(frac, fits, basis)
    check = Grid.uniform(inner, n_check)
    residuals = list(system_residual(fitted, check))
    scale = 1.0 + float(np.max(np.abs(ph))) * float(np.max(np.abs(p1) + np.abs(p2))) \
        + float(np.max(np.abs(s.Psi1(x)) + np.abs(s.Psi2(x))))
    if frac.residual > FIT_REL:
        notes.append(f"phi is not a {cls} fraction (residual {frac.residual:.3g})")
    if any(r.max_abs > FIT_REL * scale for r in residuals):
        notes.append("fitted closed forms do not satisfy the reduced system")
    all_fits = [frac] + [fits[k] for k in ("psi1", "psi2", "Psi1", "Psi2")]
    branch = BRANCH_OF_CLASS[cls]
    if notes:
        exc = Unclassifiable("; ".join(notes))
        exc.report = ClassificationReport(branch, None, all_fits, residuals, est.gamma, notes)
        raise exc
    w = [np.array(fits["psi2"].coefficients) + sg * np.array(fits["psi1"].coefficients)
         for sg in (1.0, -1.0)]
    se = np.hypot(fits["psi1"].stderr, fits["psi2"].stderr)
    if cls == "trig":
        tag, consts = _match_trig(w, frac.kappa)
    elif cls == "linear":
        lin = fit_linear_combo(s.phi, basis[1:], grid, "phi", "affine")
        affine = lin.rms <= 1e-9 * (1.0 + float(np.max(np.abs(ph))))
        tag, consts = _match_linear(w, affine, h, se)
    else:
        tag, consts = _match_hyperbolic(w, frac.kappa, h, se)
    guess = FamilyParams(tag, consts, t.I)
    return ClassificationReport(branch, guess, all_fits, residuals, est.gamma, notes)
