"""
Trapezoidal quadrature on periodic cubes, synthetic singular integrands,
convergence-rate fits and singularity-order estimation.
"""

from .rules import PUNCTURE_TOL, CubeDomain, trapezoid, punctured_trapezoid, puncture_shift, wrap
from .integrands import (
    Factor, SingularIntegrand, synthetic_integrand,
    bump, power_profile, gaussian_profile, power_profile_integral,
)
from .rates import RateFit, measure_rate, reference_value
from .singularity import (
    SingularityProfile, estimate_order, grid_function,
    correlated_rule, partially_integrated, nonsmooth_order_check,
)

__all__ = [
    'PUNCTURE_TOL', 'CubeDomain', 'trapezoid', 'punctured_trapezoid', 'puncture_shift', 'wrap',
    'Factor', 'SingularIntegrand', 'synthetic_integrand',
    'bump', 'power_profile', 'gaussian_profile', 'power_profile_integral',
    'RateFit', 'measure_rate', 'reference_value',
    'SingularityProfile', 'estimate_order', 'grid_function',
    'correlated_rule', 'partially_integrated', 'nonsmooth_order_check',
]
