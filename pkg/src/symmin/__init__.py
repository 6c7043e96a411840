"""Haar-measure G-averaging and symmetric minimizers of discrete energies."""

from symmin.errors import (
    DivergenceError,
    FieldIOError,
    FieldParseError,
    InvalidParameter,
    InvariantDomainViolation,
    NotInvariantError,
)

__all__ = [
    "DivergenceError",
    "FieldIOError",
    "FieldParseError",
    "InvalidParameter",
    "InvariantDomainViolation",
    "NotInvariantError",
]
__version__ = "0.1.0"
