"""Exact polynomial optimization via Fritz John / KKT augmented moment-SOS hierarchies."""

from .polycore import (
    Monomial,
    MonomialBasis,
    Polynomial,
    differentiate,
    gradient,
    homogenize_scale,
    max_norm_estimate,
    monomial_basis,
    parse_polynomial,
    to_text,
)

__all__ = [
    "Monomial",
    "MonomialBasis",
    "Polynomial",
    "differentiate",
    "gradient",
    "homogenize_scale",
    "max_norm_estimate",
    "monomial_basis",
    "parse_polynomial",
    "to_text",
]

__version__ = "0.1.0"
