"""Numerical toolkit for free, monotone and boolean probability."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    BranchError,
    DomainError,
    EvaluationError,
    FreeProbError,
    InversionError,
    MeasureError,
    ParameterError,
    PoleError,
)
from .measure import Atom, DensityGrid, SpectralMeasure, density_measure, dirac, discrete

__all__ = [
    "Atom",
    "BranchError",
    "DensityGrid",
    "DomainError",
    "EvaluationError",
    "FreeProbError",
    "InversionError",
    "MeasureError",
    "ParameterError",
    "PoleError",
    "SpectralMeasure",
    "__version__",
    "density_measure",
    "dirac",
    "discrete",
]
