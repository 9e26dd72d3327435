"""
Pair densities and the normalized electron repulsion integral.

For folded k-points the ERI reads

    <n1 k1, n2 k2 | n3 k3, n4 k4>
        = 4 pi / |Omega| * sum'_G  rho_13(G) rho_24(D - G) / |q + G|^2

with q = k3 - k1 and D = k1 + k2 - k3 - k4 (an integer vector), where
rho_{n'k', nk}(G) is the Fourier coefficient of conj(u_{n'k'}) u_{nk}. Terms
with |q + G| below PUNCTURE_TOL are dropped.

Pair densities live on an FFT grid large enough to hold their full support,
so no truncation happens beyond the planewave basis itself.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Tuple

import numpy as np
from scipy import fft as sfft

from ..lattice import KPoint, fold_to_bz
from ..meanfield import ModelSystem
from .lru import ArrayLRU

logger = logging.getLogger(__name__)

PUNCTURE_TOL = 1e-10
GIB = 1 << 30

Label = Tuple[int, KPoint]


@dataclass(frozen=True)
class PairDensity:
    """rho_{bra, ket}(G) stored on a grid^3 FFT array (index = G mod grid)."""

    bra: Label
    ket: Label
    values: np.ndarray = field(compare=False, repr=False)

    @property
    def grid(self) -> int:
        return self.values.shape[0]

    def at(self, g_ints) -> np.ndarray:
        """Values at integer reciprocal vectors (last axis 3)."""
        g = np.mod(np.asarray(g_ints), self.grid)
        return self.values[g[..., 0], g[..., 1], g[..., 2]]


@dataclass(frozen=True)
class EriKey:
    """Four (band, k-point) labels in <12|34> order."""

    labels: Tuple[Label, Label, Label, Label]

    @classmethod
    def of(cls, n1: int, k1: KPoint, n2: int, k2: KPoint, n3: int, k3: KPoint, n4: int, k4: KPoint) -> 'EriKey':
        return cls(((n1, k1), (n2, k2), (n3, k3), (n4, k4)))

    def momentum_mismatch(self) -> Tuple[Fraction, ...]:
        (_, k1), (_, k2), (_, k3), (_, k4) = self.labels
        return tuple(
            a + b - c - d
            for a, b, c, d in zip(k1.fractional, k2.fractional, k3.fractional, k4.fractional)
        )

    def is_conserving(self) -> bool:
        return all(v.denominator == 1 for v in self.momentum_mismatch())

    @property
    def q(self) -> Tuple[Fraction, ...]:
        """Momentum transfer k3 - k1 (fractional)."""
        (_, k1), _, (_, k3), _ = self.labels
        return tuple(c - a for a, c in zip(k1.fractional, k3.fractional))


class EriEngine:
    """
    Evaluates pair densities and ERIs for a ModelSystem.

    Real-space orbitals and pair densities are cached in byte-bounded LRUs;
    ERIs themselves are recomputed on demand.
    """

    def __init__(self, system: ModelSystem, cache_gib: float = 2.0, kernel_scale: float = 1.0):
        self.system = system
        self.kernel_scale = float(kernel_scale)
        self.grid = system.basis.grid_size(margin=2)
        self.prefactor = 4.0 * np.pi / system.cell.volume
        self._positions = system.basis.grid_positions(self.grid)
        self._signed = np.rint(sfft.fftfreq(self.grid, 1.0 / self.grid)).astype(np.int64)
        self._axis = np.arange(self.grid)
        budget = int(cache_gib * GIB)
        self._orbitals = ArrayLRU(budget // 4, 'orbitals')
        self._pairs = ArrayLRU(budget - budget // 4, 'pair densities')
        self._weights = ArrayLRU(max(budget // 16, 1 << 20), 'coulomb weights')
        logger.debug(f"ERI engine on a {self.grid}^3 grid, cache budget {cache_gib} GiB")

    @property
    def reciprocal(self):
        return self.system.reciprocal

    def fold(self, k: KPoint) -> KPoint:
        return fold_to_bz(self.reciprocal, k)[0]

    def orbital(self, n: int, k: KPoint) -> np.ndarray:
        """u_{nk}(r) on the engine grid for a folded k."""
        def compute() -> np.ndarray:
            states = self.system.solve(k)
            grid = np.zeros((self.grid,) * 3, dtype=complex)
            gx, gy, gz = self._positions
            grid[gx, gy, gz] = states.coefficients[:, n]
            return sfft.ifftn(grid) * self.grid ** 3

        return self._orbitals.get_or_compute((n, k.fractional), compute)

    def pair_values(self, bra: Label, ket: Label) -> np.ndarray:
        """Raw rho_{bra,ket} grid for folded labels (cached)."""
        (n_bra, k_bra), (n_ket, k_ket) = bra, ket

        def compute() -> np.ndarray:
            product = np.conj(self.orbital(n_bra, k_bra)) * self.orbital(n_ket, k_ket)
            return sfft.fftn(product) / self.grid ** 3

        return self._pairs.get_or_compute((n_bra, k_bra.fractional, n_ket, k_ket.fractional), compute)

    def pair_density(self, bra: Label, ket: Label) -> PairDensity:
        bra = (bra[0], self.fold(bra[1]))
        ket = (ket[0], self.fold(ket[1]))
        return PairDensity(bra, ket, self.pair_values(bra, ket))

    def coulomb_weights(self, q_fractional: Sequence[float]) -> np.ndarray:
        """1/|q + G|^2 over the signed grid, zero where |q + G| < PUNCTURE_TOL."""
        key = tuple(Fraction(v) if not isinstance(v, Fraction) else v for v in q_fractional)

        def compute() -> np.ndarray:
            q = np.array([float(v) for v in key])
            s = self._signed
            frac = np.stack(np.meshgrid(s, s, s, indexing='ij'), axis=-1) + q
            cart = frac @ self.reciprocal.reciprocal_vectors.T
            norm2 = np.einsum('...i,...i->...', cart, cart)
            weights = np.zeros_like(norm2)
            regular = norm2 >= PUNCTURE_TOL ** 2
            weights[regular] = 1.0 / norm2[regular]
            return weights

        return self._weights.get_or_compute(key, compute)

    def reindexed(self, values: np.ndarray, sign: int, shift) -> np.ndarray:
        """Array R with R[G] = values[sign*G + shift] over the signed grid."""
        ax = self._axis
        idx = [np.mod(sign * ax + int(s), self.grid) for s in shift]
        return values[np.ix_(*idx)]

    def eri(self, key: EriKey) -> complex:
        """
        Normalized ERI for a momentum-conserving key.

        Raises:
            ValueError: if k1 + k2 - k3 - k4 is not a reciprocal lattice vector
        """
        if not key.is_conserving():
            raise ValueError(f"ERI key does not conserve crystal momentum: mismatch {key.momentum_mismatch()}")
        (n1, k1), (n2, k2), (n3, k3), (n4, k4) = ((n, self.fold(k)) for n, k in key.labels)
        q = tuple(c - a for a, c in zip(k1.fractional, k3.fractional))
        umklapp = [int(a + b - c - d) for a, b, c, d in zip(k1.fractional, k2.fractional, k3.fractional, k4.fractional)]

        rho13 = self.pair_values((n1, k1), (n3, k3))
        rho24 = self.reindexed(self.pair_values((n2, k2), (n4, k4)), -1, umklapp)
        weights = self.coulomb_weights(q)
        total = np.sum(rho13 * rho24 * weights)
        return complex(self.kernel_scale * self.prefactor * total)

    def coulomb_bound(self, key: EriKey) -> float:
        """(4 pi / |Omega|) sum' 1/|q+G|^2 over the grid."""
        return float(self.kernel_scale * self.prefactor * np.sum(self.coulomb_weights(key.q)))


def pair_density(engine: EriEngine, bra: Label, ket: Label) -> PairDensity:
    return engine.pair_density(bra, ket)


def eri(engine: EriEngine, key: EriKey) -> complex:
    return engine.eri(key)


def antisymmetrized_eri(
    engine: EriEngine, i: int, k_i: KPoint, j: int, k_j: KPoint, a: int, k_a: KPoint, b: int, k_b: KPoint
) -> complex:
    """W = 2 <i k_i, j k_j | a k_a, b k_b> - <i k_i, j k_j | b k_b, a k_a>."""
    direct = engine.eri(EriKey.of(i, k_i, j, k_j, a, k_a, b, k_b))
    exchange = engine.eri(EriKey.of(i, k_i, j, k_j, b, k_b, a, k_a))
    return 2.0 * direct - exchange
