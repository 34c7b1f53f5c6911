"""Named test functions: mean generators and Main1 free functions.

Every entry carries analytic derivatives up to fourth order (computed
symbolically once), its natural domain and a monotonicity hint.
"""

from __future__ import annotations

import math

import sympy as sp

from ._symbolic import compiled
from .errors import ParseError
from .fncore import DECREASING, INCREASING, UNKNOWN, Interval, RealFn

_R = Interval(-math.inf, math.inf)
_POS = Interval(0.0, math.inf)

# name -> (builder, natural domain, hint)
_ENTRIES = {
    "id": (lambda x, P, L: x, _R, INCREASING),
    "neg_id": (lambda x, P, L: -x, _R, DECREASING),
    "ln": (lambda x, P, L: sp.log(x), _POS, INCREASING),
    "neg_reciprocal": (lambda x, P, L: -1 / x, _POS, INCREASING),
    "reciprocal": (lambda x, P, L: 1 / x, _POS, DECREASING),
    "exp": (lambda x, P, L: sp.exp(x), _R, INCREASING),
    "exp_neg": (lambda x, P, L: sp.exp(-x), _R, DECREASING),
    "sqrt": (lambda x, P, L: sp.sqrt(x), _POS, INCREASING),
    "square": (lambda x, P, L: x ** 2, _POS, INCREASING),
    "cube": (lambda x, P, L: x ** 3, _POS, INCREASING),
    "cube_plus_x": (lambda x, P, L: x ** 3 + x, _R, INCREASING),
    "cube_plus_exp": (lambda x, P, L: x ** 3 + sp.exp(x), _R, INCREASING),
    "sin_plus_2x": (lambda x, P, L: sp.sin(x) + 2 * x, _R, INCREASING),
    "tanh": (lambda x, P, L: sp.tanh(x), _R, INCREASING),
    "arctan": (lambda x, P, L: sp.atan(x), _R, INCREASING),
    "sinh": (lambda x, P, L: sp.sinh(x), _R, INCREASING),
    "tan": (lambda x, P, L: sp.tan(x), Interval(-math.pi / 2, math.pi / 2), INCREASING),
    "cosh": (lambda x, P, L: sp.cosh(x), _R, UNKNOWN),
    "x_exp_x": (lambda x, P, L: x * sp.exp(x), Interval(-1.0, math.inf), INCREASING),
}

#: Strictly monotone entries (usable as g_k of the affine-F family or as generators).
MONOTONE = tuple(k for k, v in _ENTRIES.items() if v[2] != UNKNOWN)
#: Entries that are nowhere affine (usable as F of the affine-G family).
NOWHERE_AFFINE = ("exp", "exp_neg", "ln", "neg_reciprocal", "reciprocal", "sqrt", "square",
                  "cube_plus_exp", "sin_plus_2x", "tanh", "arctan", "sinh", "cosh", "x_exp_x")


def names() -> tuple[str, ...]:
    return tuple(_ENTRIES)


def get(name: str, domain: Interval | None = None) -> RealFn:
    """The catalog function ``name`` (restricted to ``domain`` if given)."""
    try:
        builder, natural, hint = _ENTRIES[name]
    except KeyError:
        raise ParseError(f"unknown catalog function {name!r}; known: {', '.join(_ENTRIES)}") from None
    comp = compiled(("catalog", name), builder, (), 4)
    value, derivs = comp.bind({})
    dom = natural if domain is None else natural.intersect(domain)
    return RealFn(value, dom, derivs, hint, name)
