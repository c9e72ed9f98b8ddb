"""Regular model checking for parameterized public announcement logic."""

from .errors import (CapacityError, Diverged, FormulaError, LayoutError,
                     ModelSyntaxError, PrmcError, UnsupportedStar, ValidationError)

__all__ = [
    "CapacityError", "Diverged", "FormulaError", "LayoutError",
    "ModelSyntaxError", "PrmcError", "UnsupportedStar", "ValidationError",
]
