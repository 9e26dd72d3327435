"""
Monkhorst-Pack meshes and momentum arithmetic on mesh indices.

Points are ordered lexicographically in fractional coordinates; the flat
index of the point with per-axis integers (j0, j1, j2) is (j0*m + j1)*m + j2.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Tuple

import numpy as np

from .cell import KPoint, ReciprocalCell, UnitCell, fold_to_bz

logger = logging.getLogger(__name__)


class MeshScheme(str, Enum):
    GAMMA_CENTERED = 'gamma_centered'
    MP_OFFSET = 'mp_offset'


@dataclass(frozen=True, eq=False)
class MonkhorstPackMesh:
    """Uniform m x m x m k-point grid with offset delta/m per axis."""

    per_dim: int
    scheme: MeshScheme
    reciprocal: ReciprocalCell
    offset: Fraction
    points: Tuple[KPoint, ...] = field(repr=False)
    ints: np.ndarray = field(repr=False, compare=False)
    _lookup: Dict[Tuple[Fraction, Fraction, Fraction], int] = field(repr=False, compare=False)

    @property
    def n_k(self) -> int:
        return self.per_dim ** 3

    def __len__(self) -> int:
        return self.n_k

    def flat_index(self, ints: np.ndarray) -> np.ndarray:
        """Flat index of integer triples (last axis 3), reduced modulo m."""
        m = self.per_dim
        j = np.mod(ints, m)
        return (j[..., 0] * m + j[..., 1]) * m + j[..., 2]

    def index_of(self, k: KPoint) -> int:
        """
        Exact lookup of a k-point (any periodic image) on the mesh.

        Raises:
            KeyError: if k is not a mesh point
        """
        folded, _ = fold_to_bz(self.reciprocal, k)
        return self._lookup[folded.fractional]

    def contains(self, k: KPoint) -> bool:
        try:
            self.index_of(k)
        except KeyError:
            return False
        return True

    def combine(self, i, j, a) -> np.ndarray:
        """Flat index of fold(k_i + k_j - k_a) for flat mesh indices (broadcasting)."""
        i, j, a = (np.asarray(x) for x in (i, j, a))
        return self.flat_index(self.ints[i] + self.ints[j] - self.ints[a])

    def shift(self, index, q_ints, sign: int = 1) -> Tuple[np.ndarray, np.ndarray]:
        """
        Add sign*q to mesh points, q given by Gamma-mesh integers.

        Returns:
            (flat index of the folded result, reciprocal-lattice integers G
            removed by the fold)
        """
        raw = self.ints[np.asarray(index)] + sign * np.asarray(q_ints)
        return self.flat_index(raw), np.floor_divide(raw, self.per_dim)

    def difference_ints(self, i, j) -> np.ndarray:
        """Gamma-mesh integers of fold(k_i - k_j)."""
        return np.mod(self.ints[np.asarray(i)] - self.ints[np.asarray(j)], self.per_dim)

    def cartesian(self) -> np.ndarray:
        return np.array([p.cartesian for p in self.points])


def _axis_offset(m: int, scheme: MeshScheme) -> Fraction:
    if scheme is MeshScheme.GAMMA_CENTERED:
        return Fraction(0)
    # Standard Monkhorst-Pack points (2r - m - 1)/(2m): shifted by half a step for even m.
    return Fraction(1, 2) if m % 2 == 0 else Fraction(0)


def build_mp_mesh(cell: UnitCell, m: int, scheme='gamma_centered') -> MonkhorstPackMesh:
    """
    Build a uniform Monkhorst-Pack mesh.

    Args:
        cell: Real-space unit cell
        m: Points per reciprocal axis
        scheme: 'gamma_centered' or 'mp_offset'

    Returns:
        Mesh of m^3 points, lexicographic in fractional coordinates
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"Mesh size must be a positive integer, got {m!r}")
    m = int(m)
    scheme = MeshScheme(scheme)
    reciprocal = cell.reciprocal() if isinstance(cell, UnitCell) else cell
    delta = _axis_offset(m, scheme)

    ints = np.array(list(itertools.product(range(m), repeat=3)), dtype=np.int64)
    points: List[KPoint] = []
    lookup: Dict[Tuple[Fraction, Fraction, Fraction], int] = {}
    for idx, triple in enumerate(ints):
        frac = tuple(Fraction(int(j), m) + delta / m for j in triple)
        kpoint = KPoint.from_fractional(frac, reciprocal)
        points.append(kpoint)
        lookup[kpoint.fractional] = idx
    ints.setflags(write=False)

    logger.debug(f"Built {scheme.value} mesh with m={m} ({m ** 3} points)")
    return MonkhorstPackMesh(m, scheme, reciprocal, delta, tuple(points), ints, lookup)


def induced_q_mesh(mesh: MonkhorstPackMesh) -> MonkhorstPackMesh:
    """Mesh of pairwise differences: always Gamma-centered with the same m."""
    if mesh.scheme is MeshScheme.GAMMA_CENTERED:
        return mesh
    return build_mp_mesh(mesh.reciprocal, mesh.per_dim, MeshScheme.GAMMA_CENTERED)
