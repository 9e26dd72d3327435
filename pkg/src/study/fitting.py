"""
Three-point power-law extrapolation C0 + C1 N^-s and its validation on
larger meshes.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..quadrature import RateFit

logger = logging.getLogger(__name__)

S_MIN, S_MAX = 0.05, 6.0
BISECTION_STEPS = 200
FASTER_FACTOR = 5.0
MATCH_BAND = 2.0


class Verdict(str, Enum):
    MATCHES_POWER_LAW = 'matches_power_law'
    FASTER_THAN = 'faster_than'
    UNRELIABLE = 'unreliable'


def scalar_series(values: Sequence[complex], reference_mode: str, finest: Optional[complex] = None) -> List[float]:
    """
    Real series the fit runs on.

    'finest': |v - v_finest|, 'real': Re v, 'imag': Im v, 'abs': |v|.
    """
    values = [complex(v) for v in values]
    if reference_mode == 'finest':
        if finest is None:
            raise ValueError("reference_mode 'finest' needs the finest-mesh value")
        return [abs(v - complex(finest)) for v in values]
    if reference_mode == 'real':
        return [v.real for v in values]
    if reference_mode == 'imag':
        return [v.imag for v in values]
    if reference_mode == 'abs':
        return [abs(v) for v in values]
    raise ValueError(f"Unknown reference_mode '{reference_mode}'")


def _ratio_model(s: float, n: np.ndarray) -> float:
    p = n ** -s
    return (p[0] - p[1]) / (p[1] - p[2])


def _flagged(n: np.ndarray, y: np.ndarray, note: str) -> RateFit:
    logger.warning(f"No power law through {list(zip(n.tolist(), y.tolist()))}: {note}")
    return RateFit(
        c0=float(y[-1]), c1=0.0, exponent=0.0, exponent_stderr=float('nan'),
        meshes=[int(v) for v in n], values=[float(v) for v in y], errors=[abs(float(v - y[-1])) for v in y],
        reliable=False, notes=[note],
    )


def fit_power_law(
    points: Sequence[Tuple[int, complex]],
    reference_mode: str = 'real',
    finest: Optional[complex] = None,
    exponent: Optional[float] = None,
) -> RateFit:
    """
    Fit y = C0 + C1 N^-s through exactly three points.

    With `exponent` given, only C0 and C1 are fitted (least squares).

    Args:
        points: Three (N_k, value) pairs with distinct N_k
        reference_mode: Scalarisation of complex values (see scalar_series)
        finest: Finest-mesh value for reference_mode 'finest'
        exponent: Fixed s, or None to solve for it

    Returns:
        RateFit with meshes = N_k; flagged (reliable=False, s=0, C1=0) for
        constant, non-monotone or out-of-range triples

    Raises:
        ValueError: unless exactly three distinct N_k with finite values
    """
    points = sorted(points, key=lambda p: p[0])
    if len(points) != 3 or len({p[0] for p in points}) != 3:
        raise ValueError(f"Power-law fit needs exactly three distinct N_k, got {[p[0] for p in points]}")
    n = np.array([float(p[0]) for p in points])
    y = np.array(scalar_series([p[1] for p in points], reference_mode, finest), dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError(f"Power-law fit needs finite values, got {y.tolist()}")

    if exponent is None:
        d12, d23 = y[0] - y[1], y[1] - y[2]
        scale = max(np.max(np.abs(y)), 1e-300)
        if abs(d12) <= 1e-15 * scale or abs(d23) <= 1e-15 * scale:
            return _flagged(n, y, 'constant series')
        ratio = d12 / d23
        if ratio <= 0:
            return _flagged(n, y, 'non-monotone series')
        lo, hi = S_MIN, S_MAX
        g_lo, g_hi = _ratio_model(lo, n) - ratio, _ratio_model(hi, n) - ratio
        if g_lo * g_hi > 0:
            return _flagged(n, y, f'ratio {ratio:.4g} outside the attainable range for s in [{S_MIN}, {S_MAX}]')
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            g_mid = _ratio_model(mid, n) - ratio
            if g_lo * g_mid <= 0:
                hi = mid
            else:
                lo, g_lo = mid, g_mid
            if hi - lo < 1e-15:
                break
        s = 0.5 * (lo + hi)
    else:
        s = float(exponent)

    design = np.stack([np.ones(3), n ** -s], axis=1)
    (c0, c1), *_ = np.linalg.lstsq(design, y, rcond=None)
    model = design @ np.array([c0, c1])
    fit = RateFit(
        c0=float(c0), c1=float(c1), exponent=float(s), exponent_stderr=float('nan'),
        meshes=[int(v) for v in n], values=y.tolist(), errors=np.abs(y - c0).tolist(),
        residuals={int(nk): float(r) for nk, r in zip(n, y - model)},
        reference_source=reference_mode, expected=exponent,
    )
    logger.info(f"Power-law fit: s = {s:.4f}, C0 = {c0:.6g}, C1 = {c1:.6g}" + (' (fixed s)' if exponent is not None else ''))
    return fit


def predict(fit: RateFit, n_k: float) -> float:
    return fit.c0 + fit.c1 * float(n_k) ** -fit.exponent


@dataclass
class ValidationResult:
    exponent: float
    fixed_exponent: bool
    verdict: Verdict
    ratios: Dict[int, float] = field(default_factory=dict)
    discrepancies: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'exponent': self.exponent, 'fixed_exponent': self.fixed_exponent,
            'verdict': self.verdict.value,
            'ratios': {str(k): v for k, v in self.ratios.items()},
            'discrepancies': {str(k): v for k, v in self.discrepancies.items()},
        }


def validate_fit(fit: RateFit, later: Sequence[Tuple[int, float]], fixed_exponent: bool = False) -> ValidationResult:
    """
    Compare the extrapolation with data at larger N_k.

    For each later point the ratio is |value - C0| / |C1 N^-s|, the distance
    to the extrapolated limit measured against the fitted envelope. Using
    the two largest later meshes: both ratios at most 1/FASTER_FACTOR gives
    faster_than, both inside [1/MATCH_BAND, MATCH_BAND] gives
    matches_power_law. Anything else, a flagged fit or fewer than two later
    points is unreliable.

    Args:
        fit: Fit from fit_power_law
        later: (N_k, scalar value) pairs on the same series, N_k beyond the fit
    """
    result = ValidationResult(fit.exponent, fixed_exponent, Verdict.UNRELIABLE)
    last_n = max(fit.meshes)
    later = sorted((int(nk), float(v)) for nk, v in later if nk > last_n)
    for nk, value in later:
        result.discrepancies[nk] = abs(predict(fit, nk) - value)
        distance = abs(value - fit.c0)
        envelope = abs(fit.c1) * float(nk) ** -fit.exponent
        if envelope > 0:
            result.ratios[nk] = distance / envelope
        elif distance == 0:
            result.ratios[nk] = 1.0
        else:
            result.ratios[nk] = float('inf')

    if not fit.reliable or len(later) < 2:
        return result
    decisive = [result.ratios[nk] for nk, _ in later[-2:]]
    if all(r <= 1.0 / FASTER_FACTOR for r in decisive):
        result.verdict = Verdict.FASTER_THAN
    elif all(1.0 / MATCH_BAND <= r <= MATCH_BAND for r in decisive):
        result.verdict = Verdict.MATCHES_POWER_LAW
    logger.debug(f"Validation ratios {result.ratios}: {result.verdict.value}")
    return result


@dataclass
class ExtrapolationReport:
    """Fits and validations of one term's series."""

    term: str
    reference_mode: str
    n_k: List[int]
    series: List[float]
    fits: List[RateFit] = field(default_factory=list)
    validations: List[ValidationResult] = field(default_factory=list)

    @property
    def free_fit(self) -> Optional[RateFit]:
        return self.fits[0] if self.fits else None

    def verdicts(self) -> Dict[str, str]:
        out = {}
        for fit, validation in zip(self.fits, self.validations):
            key = f"s={fit.exponent:.4g}" + (' (fixed)' if validation.fixed_exponent else '')
            out[key] = validation.verdict.value
        return out

    def to_dict(self) -> dict:
        return {
            'term': self.term, 'reference_mode': self.reference_mode,
            'n_k': self.n_k, 'series': self.series,
            'fits': [f.to_dict() for f in self.fits],
            'validations': [v.to_dict() for v in self.validations],
        }


def extrapolate(
    term: str,
    values: Dict[int, complex],
    fit_meshes: Sequence[int],
    validation_meshes: Sequence[int],
    reference_mode: str = 'finest',
    candidate_exponents: Sequence[float] = (),
) -> ExtrapolationReport:
    """
    Free three-point fit plus one fixed-exponent fit per candidate, each
    validated on the validation meshes.

    Args:
        values: mesh size m -> value; N_k = m^3
    """
    meshes = sorted(values)
    finest = values[meshes[-1]] if meshes else None
    n_k = [m ** 3 for m in meshes]
    series = scalar_series([values[m] for m in meshes], reference_mode, finest) if meshes else []
    report = ExtrapolationReport(term, reference_mode, n_k, series)
    if len(fit_meshes) != 3:
        return report

    by_mesh = dict(zip(meshes, series))
    fit_points = [(m ** 3, values[m]) for m in sorted(fit_meshes)]
    later = [(m ** 3, by_mesh[m]) for m in sorted(validation_meshes) if m in by_mesh]
    for exponent in [None] + [float(s) for s in candidate_exponents]:
        fit = fit_power_law(fit_points, reference_mode, finest, exponent)
        report.fits.append(fit)
        report.validations.append(validate_fit(fit, later, fixed_exponent=exponent is not None))
    logger.info(f"{term}: verdicts {report.verdicts()}")
    return report
