"""Exact quantum-group computations: modules, crystal/global bases, R-matrices."""

from .qscalar import (
    AmbientMismatchError,
    FieldElement,
    ONE,
    Q,
    QLaurent,
    ZERO,
    q_binom,
    q_factorial,
    q_int,
)

__all__ = [
    "AmbientMismatchError",
    "FieldElement",
    "ONE",
    "Q",
    "QLaurent",
    "ZERO",
    "q_binom",
    "q_factorial",
    "q_int",
]
