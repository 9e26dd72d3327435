"""
Band states at a single k-point and the gauge convention.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..lattice import KPoint
from ..utils.errors import SolverError

logger = logging.getLogger(__name__)

# Relative tolerance for ties between largest-magnitude coefficients.
GAUGE_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class BandStates:
    """Orbital energies (ascending) and planewave coefficients, one column per band."""

    k: KPoint
    energies: np.ndarray = field(compare=False)
    coefficients: np.ndarray = field(compare=False, repr=False)

    def __post_init__(self):
        energies = np.array(self.energies, dtype=float)
        coefficients = np.array(self.coefficients, dtype=complex)
        energies.setflags(write=False)
        coefficients.setflags(write=False)
        object.__setattr__(self, 'energies', energies)
        object.__setattr__(self, 'coefficients', coefficients)

    @property
    def n_bands(self) -> int:
        return self.energies.shape[0]


def fix_gauge(states: BandStates) -> BandStates:
    """
    Rotate each column by a unit phase so that its largest-magnitude
    coefficient is real and positive.

    Ties (within a relative 1e-10) go to the lowest g-vector index.

    Raises:
        SolverError: if a column is identically zero
    """
    coefficients = np.array(states.coefficients, dtype=complex)
    for band in range(coefficients.shape[1]):
        column = coefficients[:, band]
        magnitudes = np.abs(column)
        largest = magnitudes.max()
        if largest == 0.0:
            raise SolverError(f"Band {band} at k={states.k} has a zero coefficient vector")
        anchor = int(np.flatnonzero(magnitudes >= largest * (1.0 - GAUGE_TIE_RTOL))[0])
        phase = np.conj(column[anchor]) / magnitudes[anchor]
        column *= phase
        column[anchor] = magnitudes[anchor]
    return BandStates(states.k, states.energies, coefficients)
