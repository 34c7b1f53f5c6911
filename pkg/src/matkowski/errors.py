"""Exception hierarchy shared by every module of the package.

Each failure mode has its own class so callers (and the CLI exit-code
mapping) can react precisely.  All of them derive from :class:`MatkowskiError`.
"""

from __future__ import annotations


class MatkowskiError(Exception):
    """Base class for all package errors."""


# --- numeric core -----------------------------------------------------------
class OutOfRange(MatkowskiError):
    """A target value lies outside the sampled image of a function."""


class NotMonotone(MatkowskiError):
    """Sampled differences of a supposedly monotone function change sign."""


class NoConvergence(MatkowskiError):
    """An iterative solver hit its iteration cap."""


class TooCloseToBoundary(MatkowskiError):
    """A finite-difference stencil would leave the function's domain."""


class VanishingFirstDerivative(MatkowskiError):
    """|f'| fell below the floor used by the Schwarzian derivative."""


class SeedInvalid(MatkowskiError):
    """The seed of a safe-domain scan is not an admissible point."""


# --- means ------------------------------------------------------------------
class DomainMismatch(MatkowskiError):
    """The images k1(J) and k2(J) of a generator pair do not coincide."""


# --- families ---------------------------------------------------------------
class UnknownTag(MatkowskiError):
    """A family tag that is not one of the 18 supported families."""


class ConstraintViolated(MatkowskiError):
    """Family parameters violate the constraints of their family."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class UnsafeDomain(MatkowskiError):
    """No singularity-free subinterval of sufficient width exists."""


class SelfCheckFailed(MatkowskiError):
    """A freshly built tuple does not satisfy the functional equation."""


# --- reduction --------------------------------------------------------------
class VanishingDerivative(MatkowskiError):
    """Some sampled g_k' vanishes, so the tuple is not regular."""


class QuadratureFailure(MatkowskiError):
    """Adaptive quadrature could not reach its tolerance."""


class NonFunctionG(MatkowskiError):
    """Tabulated (u, G(u)) pairs conflict: G would not be a function."""


# --- classification ---------------------------------------------------------
class NonConstantSchwarzian(MatkowskiError):
    """The Schwarzian derivative of phi is not constant on the grid."""


class DegenerateFit(MatkowskiError):
    """The homogeneous fraction fit has no unique null direction."""


class RankDeficientBasis(MatkowskiError):
    """A least-squares basis is numerically linearly dependent."""


class Unclassifiable(MatkowskiError):
    """No family form reproduces the tuple within tolerance."""


# --- CLI --------------------------------------------------------------------
class ParseError(MatkowskiError):
    """An input document could not be parsed."""


class IoError(MatkowskiError):
    """A report could not be written."""
