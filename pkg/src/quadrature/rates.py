"""
Empirical convergence rates of the punctured trapezoidal rule.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import curve_fit

from .integrands import SingularIntegrand

logger = logging.getLogger(__name__)

OVERSAMPLE = 4
MAX_REFERENCE_NODES = 1 << 24
NOISE_FACTOR = 100.0


@dataclass
class RateFit:
    """error(m) ~ C1 m^-s about the reference C0."""

    c0: float
    c1: float
    exponent: float
    exponent_stderr: float
    meshes: List[int]
    values: List[float]
    errors: List[float]
    residuals: Dict[int, float] = field(default_factory=dict)
    validation: Dict[int, float] = field(default_factory=dict)
    reference_uncertainty: float = 0.0
    reference_source: str = 'exact'
    expected: Optional[float] = None
    reliable: bool = True
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'c0': self.c0, 'c1': self.c1, 'exponent': self.exponent,
            'exponent_stderr': self.exponent_stderr, 'meshes': self.meshes,
            'values': self.values, 'errors': self.errors,
            'residuals': {str(k): v for k, v in self.residuals.items()},
            'validation': {str(k): v for k, v in self.validation.items()},
            'reference_uncertainty': self.reference_uncertainty,
            'reference_source': self.reference_source, 'expected': self.expected,
            'reliable': self.reliable, 'notes': list(self.notes),
        }


def reference_value(integrand: SingularIntegrand, meshes: Sequence[int], offset: float = 0.0) -> Tuple[float, float, str]:
    """
    Reference integral and its uncertainty.

    Uses the closed form when known, else the rule on a mesh OVERSAMPLE
    times finer than the largest study mesh, else Richardson extrapolation
    of the two finest study rules.

    Returns:
        (value, uncertainty, source)
    """
    if integrand.exact is not None:
        return integrand.exact, 1e-14 * max(1.0, abs(integrand.exact)), 'exact'

    rate = integrand.expected_rate or 1.0
    finest = max(meshes)
    fine = OVERSAMPLE * finest
    if fine ** integrand.dimension <= MAX_REFERENCE_NODES:
        value = integrand.rule(fine, offset)
        coarser = integrand.rule(fine // 2, offset)
        uncertainty = abs(value - coarser) / (2.0 ** rate - 1.0)
        return value, uncertainty, f'oversampled m={fine}'

    m1, m2 = sorted(meshes)[-2:]
    q1, q2 = integrand.rule(m1, offset), integrand.rule(m2, offset)
    ratio = (m2 / m1) ** rate
    value = (ratio * q2 - q1) / (ratio - 1.0)
    return value, abs(value - q2), f'richardson m={m1},{m2}'


def _log_model(log_m, log_c1, s):
    return log_c1 - s * log_m


def measure_rate(
    integrand: SingularIntegrand,
    meshes: Sequence[int],
    offset: float = 0.0,
    validation_meshes: Sequence[int] = (),
    reference: Optional[Tuple[float, float]] = None,
) -> RateFit:
    """
    Fit |Q_m - reference| = C1 m^-s in log-log least squares.

    Errors below NOISE_FACTOR times the reference uncertainty are excluded
    from the fit but kept in the record. A non-monotone error sequence
    marks the fit unreliable.

    Raises:
        ValueError: with fewer than 4 study meshes
    """
    meshes = sorted(int(m) for m in meshes)
    if len(meshes) < 4:
        raise ValueError(f"Rate measurement needs at least 4 mesh sizes, got {len(meshes)}")

    values = [float(integrand.rule(m, offset)) for m in meshes]
    if reference is None:
        ref, uncertainty, source = reference_value(integrand, meshes, offset)
    else:
        (ref, uncertainty), source = reference, 'given'
    errors = [abs(v - ref) for v in values]

    fit = RateFit(
        c0=float(ref), c1=0.0, exponent=0.0, exponent_stderr=0.0,
        meshes=meshes, values=values, errors=errors,
        reference_uncertainty=float(uncertainty), reference_source=source,
        expected=integrand.expected_rate,
    )

    usable = [i for i, e in enumerate(errors) if e > NOISE_FACTOR * uncertainty and e > 0]
    if len(usable) < 2:
        fit.reliable = False
        fit.notes.append('errors at the reference noise floor')
        logger.warning(f"{integrand.description}: errors at noise floor, no exponent fitted")
        return fit
    if len(usable) < len(errors):
        fit.notes.append(f'{len(errors) - len(usable)} mesh(es) below the noise floor excluded')

    log_m = np.log([meshes[i] for i in usable])
    log_e = np.log([errors[i] for i in usable])
    guess = np.polyfit(log_m, log_e, 1)
    if len(usable) > 2:
        params, cov = curve_fit(_log_model, log_m, log_e, p0=(guess[1], -guess[0]))
        stderr = float(np.sqrt(abs(cov[1, 1]))) if np.all(np.isfinite(cov)) else float('nan')
    else:
        params, stderr = (guess[1], -guess[0]), float('nan')
    log_c1, s = float(params[0]), float(params[1])
    fit.c1, fit.exponent, fit.exponent_stderr = float(np.exp(log_c1)), s, stderr
    fit.residuals = {meshes[i]: float(log_e[n] - _log_model(log_m[n], log_c1, s)) for n, i in enumerate(usable)}

    if any(later >= earlier for earlier, later in zip(errors, errors[1:])):
        fit.reliable = False
        fit.notes.append('non-monotone error sequence')
        logger.warning(f"{integrand.description}: non-monotone error sequence {errors}")

    for m in validation_meshes:
        error = abs(integrand.rule(int(m), offset) - ref)
        if error > 0:
            fit.validation[int(m)] = float(np.log(error) - _log_model(np.log(m), log_c1, s))

    logger.info(f"{integrand.description} (d={integrand.dimension}): s = {s:.3f}"
                f" (expected {integrand.expected_rate}), reference {source}")
    return fit
