"""
Unit cell, reciprocal cell and k-point arithmetic.

Lattice vectors are stored as the columns of a 3x3 matrix. Fractional
k-point coordinates are exact rationals so that folding and momentum
conservation never depend on a tolerance.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

RationalLike = Union[Fraction, int, str, float]


@dataclass(frozen=True, eq=False)
class UnitCell:
    """Real-space cell; columns of lattice_vectors are a1, a2, a3."""

    lattice_vectors: np.ndarray

    def __post_init__(self):
        vectors = np.array(self.lattice_vectors, dtype=float)
        if vectors.shape != (3, 3):
            raise ValueError(f"lattice_vectors must be 3x3, got {vectors.shape}")
        vectors.setflags(write=False)
        object.__setattr__(self, 'lattice_vectors', vectors)
        if self.volume <= 0:
            raise ValueError(f"Cell volume must be positive, got {self.volume}")

    @classmethod
    def cubic(cls, length: float = 1.0) -> 'UnitCell':
        return cls(np.eye(3) * length)

    @property
    def volume(self) -> float:
        return float(np.linalg.det(self.lattice_vectors))

    def reciprocal(self) -> 'ReciprocalCell':
        return ReciprocalCell(2.0 * np.pi * np.linalg.inv(self.lattice_vectors).T)


@dataclass(frozen=True, eq=False)
class ReciprocalCell:
    """Reciprocal cell with b_i as columns, so B^T A = 2*pi*I."""

    reciprocal_vectors: np.ndarray

    def __post_init__(self):
        vectors = np.array(self.reciprocal_vectors, dtype=float)
        vectors.setflags(write=False)
        object.__setattr__(self, 'reciprocal_vectors', vectors)

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.reciprocal_vectors)))

    def to_cartesian(self, fractional) -> np.ndarray:
        """Map fractional coordinates (last axis of length 3) to cartesian."""
        frac = np.asarray(fractional, dtype=float)
        return frac @ self.reciprocal_vectors.T

    def kpoint(self, fractional: Iterable[RationalLike]) -> 'KPoint':
        return KPoint.from_fractional(fractional, self)


def _as_fraction(value: RationalLike) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(1 << 40)
    return Fraction(value)


@dataclass(frozen=True)
class KPoint:
    """
    A crystal momentum.

    Equality and hashing use the exact fractional coordinates only; the
    cartesian vector is derived data.
    """

    fractional: Tuple[Fraction, Fraction, Fraction]
    cartesian: np.ndarray = field(compare=False, hash=False, repr=False)

    @classmethod
    def from_fractional(cls, fractional: Iterable[RationalLike], reciprocal: ReciprocalCell) -> 'KPoint':
        frac = tuple(_as_fraction(v) for v in fractional)
        if len(frac) != 3:
            raise ValueError(f"k-point needs 3 fractional coordinates, got {len(frac)}")
        cart = reciprocal.to_cartesian([float(v) for v in frac])
        cart.setflags(write=False)
        return cls(frac, cart)

    def as_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.fractional])

    def is_folded(self) -> bool:
        return all(0 <= v < 1 for v in self.fractional)

    def shifted(self, delta: Sequence[RationalLike], reciprocal: ReciprocalCell) -> 'KPoint':
        return KPoint.from_fractional(
            [a + _as_fraction(b) for a, b in zip(self.fractional, delta)], reciprocal
        )

    def __str__(self) -> str:
        return '(' + ', '.join(str(v) for v in self.fractional) + ')'


def fold_to_bz(cell: ReciprocalCell, k: KPoint) -> Tuple[KPoint, Tuple[int, int, int]]:
    """
    Fold a k-point into the half-open cube [0, 1)^3 of fractional coordinates.

    Args:
        cell: Reciprocal cell used to derive the cartesian vector
        k: Point to fold

    Returns:
        (folded point, integer triple G) with k = folded + G exactly
    """
    shift = tuple(math.floor(v) for v in k.fractional)
    if shift == (0, 0, 0):
        return k, shift
    folded = [v - g for v, g in zip(k.fractional, shift)]
    return KPoint.from_fractional(folded, cell), shift


def conserve_momentum(cell: ReciprocalCell, k_i: KPoint, k_j: KPoint, k_a: KPoint) -> KPoint:
    """Return k_b = fold(k_i + k_j - k_a)."""
    combined = [a + b - c for a, b, c in zip(k_i.fractional, k_j.fractional, k_a.fractional)]
    folded, _ = fold_to_bz(cell, KPoint.from_fractional(combined, cell))
    return folded
