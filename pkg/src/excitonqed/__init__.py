"""Dissipative dynamics of q-deformed excitons dispersively coupled to a damped cavity."""

__version__ = "0.1.0"

from .algebra import (
    DerivedCoefficients,
    FockSpace,
    SystemParams,
    annihilation_operator,
    check_dispersive_validity,
    coherent_vector,
    derive_coefficients,
)
from .analytic import (
    DensityBlock,
    analytic_block,
    gamma_of_t,
    reduced_field,
    reduced_molecular,
    theta_of_t,
    total_density,
)
from .oracle import IntegratorConfig, block_derivative, integrate

__all__ = [
    "DensityBlock",
    "DerivedCoefficients",
    "FockSpace",
    "IntegratorConfig",
    "SystemParams",
    "analytic_block",
    "annihilation_operator",
    "block_derivative",
    "check_dispersive_validity",
    "coherent_vector",
    "derive_coefficients",
    "gamma_of_t",
    "integrate",
    "reduced_field",
    "reduced_molecular",
    "theta_of_t",
    "total_density",
]
