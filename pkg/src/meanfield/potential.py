"""
Gaussian effective potential and the planewave basis.

The potential is the lattice-periodized Gaussian
V(r) = C * sum_R exp(-1/2 (r - r0 - R)^T Sigma^-1 (r - r0 - R)),
whose Fourier coefficients have the closed Gaussian form used below.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft

from ..lattice import UnitCell

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Gaussian well: center r0, covariance Sigma (diagonal), strength C."""

    center: np.ndarray
    covariance: np.ndarray
    strength: float

    def __post_init__(self):
        center = np.array(self.center, dtype=float).reshape(3)
        covariance = np.array(self.covariance, dtype=float)
        if covariance.shape == (3,):
            covariance = np.diag(covariance)
        if covariance.shape != (3, 3):
            raise ValueError(f"covariance must be 3x3 or a diagonal of length 3, got {covariance.shape}")
        if np.count_nonzero(covariance - np.diag(np.diag(covariance))):
            raise ValueError("covariance must be diagonal")
        if np.any(np.diag(covariance) <= 0):
            raise ValueError(f"covariance diagonal must be strictly positive, got {np.diag(covariance)}")
        object.__setattr__(self, 'center', center)
        object.__setattr__(self, 'covariance', covariance)
        object.__setattr__(self, 'strength', float(self.strength))

    @classmethod
    def from_stddev(cls, center: Sequence[float], sigma: Sequence[float], strength: float) -> 'PotentialSpec':
        """Build from per-axis standard deviations (Sigma = diag(sigma^2))."""
        return cls(np.asarray(center, dtype=float), np.diag(np.asarray(sigma, dtype=float) ** 2), strength)


@dataclass(frozen=True, eq=False)
class PlanewaveBasis:
    """
    Full cube of n_pw^3 reciprocal lattice vectors, integers in
    [-(n_pw // 2), n_pw - n_pw // 2 - 1] per axis, ordered lexicographically.
    """

    per_dim: int
    g_vectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.per_dim)
        if n < 1:
            raise ValueError(f"n_pw must be positive, got {n}")
        axis = np.arange(-(n // 2), n - n // 2)
        g_vectors = np.array(list(itertools.product(axis, repeat=3)), dtype=np.int64)
        g_vectors.setflags(write=False)
        object.__setattr__(self, 'per_dim', n)
        object.__setattr__(self, 'g_vectors', g_vectors)

    @property
    def size(self) -> int:
        return self.per_dim ** 3

    @property
    def zero_index(self) -> int:
        return int(np.flatnonzero(~self.g_vectors.any(axis=1))[0])

    def grid_size(self, margin: int = 0) -> int:
        """
        FFT grid edge able to hold any difference of two basis vectors
        (plus `margin` extra shifts) without wrap-around.
        """
        return sfft.next_fast_len(2 * self.per_dim - 1 + 2 * margin)

    def grid_positions(self, grid: int):
        """Index arrays placing basis coefficients on a grid^3 FFT array."""
        wrapped = np.mod(self.g_vectors, grid)
        return wrapped[:, 0], wrapped[:, 1], wrapped[:, 2]


def potential_fourier(spec: PotentialSpec, cell: UnitCell, g_ints) -> np.ndarray:
    """
    Fourier coefficients of the periodized Gaussian.

    Args:
        spec: Potential parameters
        cell: Unit cell (for |Omega| and the reciprocal vectors)
        g_ints: PlanewaveBasis, or integer triples (last axis 3)

    Returns:
        Complex array V(G) with the shape of g_ints minus its last axis
    """
    if isinstance(g_ints, PlanewaveBasis):
        g_ints = g_ints.g_vectors
    g_ints = np.asarray(g_ints)
    g_cart = g_ints @ cell.reciprocal().reciprocal_vectors.T
    prefactor = (
        spec.strength / cell.volume
        * (2.0 * np.pi) ** 1.5
        * np.sqrt(np.linalg.det(spec.covariance))
    )
    quadratic = np.einsum('...i,ij,...j->...', g_cart, spec.covariance, g_cart)
    return prefactor * np.exp(-0.5 * quadratic) * np.exp(-1j * (g_cart @ spec.center))
