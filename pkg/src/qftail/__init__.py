"""Tail bounds for quadratic forms ||Ax||^2 of subgaussian vectors, with Monte Carlo checks."""

from .bounds import (
    SubgaussianParams,
    TailBound,
    gaussian_quadratic_bound,
    mgf_upper_bound,
    subgaussian_quadratic_bound,
    tail_probability_at,
)
from .errors import DomainError, InputError
from .spectral import SpectralSummary, summarize

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "InputError",
    "SpectralSummary",
    "SubgaussianParams",
    "TailBound",
    "gaussian_quadratic_bound",
    "mgf_upper_bound",
    "subgaussian_quadratic_bound",
    "summarize",
    "tail_probability_at",
]
