"""Compile closed-form expressions (with derivatives) into NumPy closures.

Expressions are written once as Python builders over SymPy symbols.  A
builder receives a log-absolute-value function ``L``: for evaluation we use
``log|z|``; for differentiation we use plain ``log z`` (same derivative,
no ``sign``/``DiracDelta`` terms).  Each compiled member is cached per
builder, so lambdification happens once per family member, with the family
constants passed as extra positional arguments.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import sympy as sp

X = sp.Symbol("x", real=True)


def log_abs(z):
    return sp.log(sp.Abs(z))


@lru_cache(maxsize=None)
def param_symbols(names: tuple[str, ...]) -> tuple[sp.Symbol, ...]:
    return tuple(sp.Symbol("c_" + n, real=True) for n in names)


class Compiled:
    """Value and derivative closures of one expression ``e(x; params)``."""

    def __init__(self, value: Callable, derivs: Sequence[Callable], names: tuple[str, ...]):
        self.value = value
        self.derivs = tuple(derivs)
        self.names = names

    def bind(self, consts: dict) -> tuple[Callable, tuple[Callable, ...]]:
        args = tuple(float(consts.get(n, 0.0)) for n in self.names)

        def wrap(fn):
            return lambda x: fn(x, *args)

        return wrap(self.value), tuple(wrap(d) for d in self.derivs)


def compile_expr(builder: Callable, names: tuple[str, ...], n_derivs: int) -> Compiled:
    """Compile ``builder(x, P, L)`` where ``P`` maps constant names to symbols."""
    syms = param_symbols(names)
    P = dict(zip(names, syms))
    value_expr = builder(X, P, log_abs)
    diff_expr = builder(X, P, sp.log)
    args = (X,) + syms
    value = sp.lambdify(args, value_expr, "numpy")
    derivs = []
    d = diff_expr
    for _ in range(n_derivs):
        d = sp.diff(d, X)
        derivs.append(sp.lambdify(args, d, "numpy"))
    return Compiled(_broadcasting(value), [_broadcasting(f) for f in derivs], names)


def _broadcasting(fn: Callable) -> Callable:
    """Make constant-valued lambdified expressions return full arrays."""
    def out(x, *args):
        y = fn(x, *args)
        return np.broadcast_to(np.asarray(y, dtype=float), np.shape(x)).copy() \
            if np.shape(y) != np.shape(x) else y
    return out


_CACHE: dict = {}


def compiled(key, builder: Callable, names: tuple[str, ...], n_derivs: int) -> Compiled:
    """Cached :func:`compile_expr` keyed by ``key``."""
    hit = _CACHE.get(key)
    if hit is None:
        hit = compile_expr(builder, names, n_derivs)
        _CACHE[key] = hit
    return hit
