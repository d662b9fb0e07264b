"""Multivariable matrix spectral factorization on the N-torus."""

__version__ = "0.1.0"

from .driver import full_factor, normalize_at_origin, verify  # noqa: E402
from .errors import (  # noqa: E402
    AliasError,
    HatSingular,
    NDSpecError,
    NotPositive,
    NotPositiveDefinite,
    OriginSingular,
    ParseError,
    SliceSingular,
    SymmetryError,
    TruncationWarning,
)
from .harmonic import GridFunction, LaurentTable, MatrixFunction  # noqa: E402
from .report import FactorizationReport  # noqa: E402
from .scalar import outer_factor_1d, outer_factor_full  # noqa: E402

__all__ = [
    "__version__",
    "full_factor",
    "normalize_at_origin",
    "verify",
    "GridFunction",
    "LaurentTable",
    "MatrixFunction",
    "FactorizationReport",
    "outer_factor_1d",
    "outer_factor_full",
    "AliasError",
    "HatSingular",
    "NDSpecError",
    "NotPositive",
    "NotPositiveDefinite",
    "OriginSingular",
    "ParseError",
    "SliceSingular",
    "SymmetryError",
    "TruncationWarning",
]
