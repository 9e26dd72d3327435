"""
Mesh-wide ERI blocks, orbital-energy denominators and amplitude tensors.

Every tensor is indexed [k_i, k_j, k_a, i, j, a, b] with k_b fixed by
momentum conservation, and band axes local to the hole/particle spaces.
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..eri import EriEngine, mesh_eri_tensor
from ..eri.integrals import GIB
from ..lattice import KPoint, MonkhorstPackMesh, conserve_momentum
from ..meanfield import ModelSystem
from ..utils.errors import BudgetError, SolverError
from .catalog import OrbitalQuadruple

logger = logging.getLogger(__name__)

MIN_DENOMINATOR = 1e-8


@dataclass(frozen=True, eq=False)
class AmplitudeTensor:
    """Complex amplitudes on a mesh, [k_i, k_j, k_a, i, j, a, b]."""

    mesh: MonkhorstPackMesh
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.data)):
            raise SolverError("Amplitude tensor has non-finite entries")

    @classmethod
    def zeros(cls, mesh: MonkhorstPackMesh, n_occ: int, n_vir: int) -> 'AmplitudeTensor':
        n_k = mesh.n_k
        return cls(mesh, np.zeros((n_k, n_k, n_k, n_occ, n_occ, n_vir, n_vir), dtype=complex))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def entry(self, quadruple: OrbitalQuadruple, n_occ: int, k_i: KPoint, k_j: KPoint, k_a: KPoint) -> complex:
        i, j, a, b = quadruple.bands()
        index = (self.mesh.index_of(k_i), self.mesh.index_of(k_j), self.mesh.index_of(k_a))
        return complex(self.data[index + (i, j, a - n_occ, b - n_occ)])


def amplitude_bytes(n_occ: int, n_vir: int, n_k: int) -> int:
    return 16 * n_occ ** 2 * n_vir ** 2 * n_k ** 3


def check_budget(n_occ: int, n_vir: int, n_k: int, budget_gib: float, term: str = 'amplitude', copies: int = 1) -> None:
    """
    Raises:
        BudgetError: if `copies` amplitude-sized tensors exceed the budget
    """
    needed = copies * amplitude_bytes(n_occ, n_vir, n_k)
    if needed > budget_gib * GIB:
        raise BudgetError(
            f"{term} at N_k={n_k} needs {needed / GIB:.2f} GiB, budget is {budget_gib} GiB",
            term=term, n_k=n_k,
        )


def denominator(system: ModelSystem, quadruple: OrbitalQuadruple, k_i: KPoint, k_j: KPoint, k_a: KPoint) -> float:
    """
    eps_I + eps_J - eps_A - eps_B with k_b from momentum conservation.

    Raises:
        SolverError: if |denominator| <= 1e-8
    """
    k_b = conserve_momentum(system.reciprocal, k_i, k_j, k_a)
    i, j, a, b = quadruple.bands()
    value = (
        system.solve(k_i).energies[i] + system.solve(k_j).energies[j]
        - system.solve(k_a).energies[a] - system.solve(k_b).energies[b]
    )
    if abs(value) <= MIN_DENOMINATOR:
        raise SolverError(f"Vanishing denominator {value:.3e} for {quadruple} at k_i={k_i}, k_j={k_j}, k_a={k_a}")
    return float(value)


@dataclass(frozen=True, eq=False)
class DenominatorTable:
    """eps_IJ^AB on a mesh, [k_i, k_j, k_a, i, j, a, b]."""

    mesh: MonkhorstPackMesh
    values: np.ndarray = field(repr=False)

    @property
    def largest(self) -> float:
        """Entry closest to zero (all entries are negative)."""
        return float(self.values.max())


class MeshIntegrals:
    """
    Lazily built ERI blocks and denominators for one mesh.

    Block names give the hole/particle space of each slot in <12|34>:
    'oovv' = <i j|a b>, 'oooo' = <k l|i j>, 'vvvv' = <a b|c d>,
    'voov' = <a k|i c>, 'vovo' = <a k|c i>.
    """

    def __init__(self, engine: EriEngine, mesh: MonkhorstPackMesh, budget_gib: float = 4.0, threads: int = 1):
        self.engine = engine
        self.system = engine.system
        self.mesh = mesh
        self.budget_gib = budget_gib
        self.threads = threads
        self._blocks: Dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self._denominators = None
        self._exchange = None

    @property
    def n_k(self) -> int:
        return self.mesh.n_k

    @property
    def n_occ(self) -> int:
        return self.system.n_occ

    @property
    def n_vir(self) -> int:
        return self.system.n_vir

    def _space(self, letter: str):
        return list(self.system.occupied) if letter == 'o' else list(self.system.virtual)

    def block(self, name: str) -> np.ndarray:
        with self._lock:
            if name not in self._blocks:
                spaces = [self._space(letter) for letter in name]
                self._blocks[name] = mesh_eri_tensor(
                    self.engine, self.mesh, *spaces, budget_gib=self.budget_gib, threads=self.threads
                )
            return self._blocks[name]

    def combine_all(self) -> np.ndarray:
        """Flat index of k_b for every (k_i, k_j, k_a)."""
        k = np.arange(self.n_k)
        return self.mesh.combine(k[:, None, None], k[None, :, None], k[None, None, :])

    def exchange(self) -> np.ndarray:
        """X[k_i, k_j, k_a, i, j, a, b] = <i k_i, j k_j | b k_b, a k_a>."""
        if self._exchange is None:
            direct = self.block('oovv')
            k = np.arange(self.n_k)
            gathered = direct[k[:, None, None], k[None, :, None], self.combine_all()]
            self._exchange = np.ascontiguousarray(gathered.swapaxes(-1, -2))
        return self._exchange

    def antisymmetrized(self) -> np.ndarray:
        """W = 2 <ij|ab> - <ij|ba> on the mesh."""
        return 2.0 * self.block('oovv') - self.exchange()

    def denominators(self) -> DenominatorTable:
        if self._denominators is None:
            energies = np.array([self.system.solve(k).energies for k in self.mesh.points])
            occ = energies[:, list(self.system.occupied)]
            vir = energies[:, list(self.system.virtual)]
            k = np.arange(self.n_k)
            k_b = self.combine_all()
            values = (
                occ[k][:, None, None, :, None, None, None]
                + occ[k][None, :, None, None, :, None, None]
                - vir[k][None, None, :, None, None, :, None]
                - vir[k_b][:, :, :, None, None, None, :]
            )
            if np.any(np.abs(values) <= MIN_DENOMINATOR):
                raise SolverError("Vanishing orbital-energy denominator on the mesh")
            self._denominators = DenominatorTable(self.mesh, values)
        return self._denominators
