"""Sharp Lp-Poincare remainder computations for Baouendi-Grushin vector fields."""

from .grid import (
    GrushinDomain,
    ScalarField,
    VectorField,
    grushin_divergence,
    grushin_gradient,
    homogeneous_dimension,
    integrate,
    integrate_real,
    p_energy,
    p_grushin,
    sobolev_seminorm,
)

__version__ = "0.1.0"
