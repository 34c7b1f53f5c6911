"""Matkowski means and the functional equation F((x+y)/2)+f1(x)+f2(y)=G(g1(x)+g2(y)).

Modules
-------
fncore     intervals, function handles, monotone inversion, finite differences,
           Schwarzian derivative, singularity-free subintervals
means      Matkowski means, invariance residuals, the generator-to-tuple map
families   the 18 closed-form solution families (build, validate, sample)
reduction  the reduced first-order system and its reconstruction
classify   recognise the family of a given solution tuple
cli        command-line front end
"""

from .classify import (
    BasisFit,
    ClassificationReport,
    FractionFit,
    GammaEstimate,
    classify_tuple,
    estimate_gamma,
    fit_fraction,
    fit_linear_combo,
)
from .errors import MatkowskiError
from .families import (
    TAGS,
    FamilyParams,
    ValidationOutcome,
    build_family,
    complete_constants,
    random_params,
    safe_domain,
    validate_params,
)
from .fncore import (
    Grid,
    Interval,
    RealFn,
    derive_num,
    invert_monotone,
    safe_subinterval,
    schwarzian_num,
)
from .means import (
    GeneratorPair,
    ResidualReport,
    SolutionTuple,
    compose_generators,
    eq1_residual,
    invariance_residual,
    matkowski_eval,
)
from .reduction import (
    Anchors,
    ReducedSystem,
    derive_system,
    reconstruct_tuple,
    round_trip_error,
    system_residual,
)

__version__ = "0.1.0"

__all__ = [
    "Anchors", "BasisFit", "ClassificationReport", "FamilyParams", "FractionFit",
    "GammaEstimate", "GeneratorPair", "Grid", "Interval", "MatkowskiError", "RealFn",
    "ReducedSystem", "ResidualReport", "SolutionTuple", "TAGS", "ValidationOutcome",
    "build_family", "classify_tuple", "complete_constants", "compose_generators",
    "derive_num", "derive_system", "eq1_residual", "estimate_gamma", "fit_fraction",
    "fit_linear_combo", "invariance_residual", "invert_monotone", "matkowski_eval",
    "random_params", "reconstruct_tuple", "round_trip_error", "safe_domain",
    "safe_subinterval", "schwarzian_num", "system_residual", "validate_params",
]
