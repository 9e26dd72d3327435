"""
Pointwise-evaluable amplitudes.

The MP2 amplitude t_IJ^AB(k_i, k_j, k_a) = <A B|I J> / eps_IJ^AB is defined
for arbitrary crystal momenta; it doubles as the exact CCD(1) amplitude.
"""

import logging
import threading
from typing import Dict, Optional, Tuple

import numpy as np

from ..eri import EriEngine, EriKey
from ..lattice import KPoint, MonkhorstPackMesh, conserve_momentum, fold_to_bz
from .blocks import AmplitudeTensor, MeshIntegrals, check_budget, denominator
from .catalog import OrbitalQuadruple

logger = logging.getLogger(__name__)


class ExactAmplitudeFunction:
    """
    Contract: amplitude(quadruple, k_i, k_j, k_a) -> complex for any k.

    Values are memoised on the folded k-points, which makes evaluation
    periodic in every argument.
    """

    tag = 'exact'

    def __init__(self, engine: EriEngine):
        self.engine = engine
        self.system = engine.system
        self._memo: Dict[Tuple, complex] = {}
        self._lock = threading.Lock()

    def __call__(self, quadruple: OrbitalQuadruple, k_i: KPoint, k_j: KPoint, k_a: KPoint) -> complex:
        reciprocal = self.system.reciprocal
        k_i, k_j, k_a = (fold_to_bz(reciprocal, k)[0] for k in (k_i, k_j, k_a))
        key = (quadruple, k_i.fractional, k_j.fractional, k_a.fractional)
        value = self._memo.get(key)
        if value is None:
            value = self.evaluate(quadruple, k_i, k_j, k_a)
            with self._lock:
                self._memo.setdefault(key, value)
        return value

    def evaluate(self, quadruple: OrbitalQuadruple, k_i: KPoint, k_j: KPoint, k_a: KPoint) -> complex:
        raise NotImplementedError

    def sample(self, mesh: MonkhorstPackMesh, integrals: Optional[MeshIntegrals] = None) -> np.ndarray:
        """Entrywise evaluation on every mesh triple and band quadruple."""
        system = self.system
        occ, vir = list(system.occupied), list(system.virtual)
        n_k = mesh.n_k
        data = np.zeros((n_k, n_k, n_k, len(occ), len(occ), len(vir), len(vir)), dtype=complex)
        points = mesh.points
        for x in range(n_k):
            for y in range(n_k):
                for z in range(n_k):
                    for i in range(len(occ)):
                        for j in range(len(occ)):
                            for a in range(len(vir)):
                                for b in range(len(vir)):
                                    quad = OrbitalQuadruple.from_bands(occ[i], occ[j], vir[a], vir[b])
                                    data[x, y, z, i, j, a, b] = self(quad, points[x], points[y], points[z])
        return data


class Mp2Amplitude(ExactAmplitudeFunction):
    """MP2 (equivalently CCD(1)) amplitude."""

    tag = 'mp2'

    def evaluate(self, quadruple: OrbitalQuadruple, k_i: KPoint, k_j: KPoint, k_a: KPoint) -> complex:
        k_b = conserve_momentum(self.system.reciprocal, k_i, k_j, k_a)
        i, j, a, b = quadruple.bands()
        numerator = self.engine.eri(EriKey.of(a, k_a, b, k_b, i, k_i, j, k_j))
        return numerator / denominator(self.system, quadruple, k_i, k_j, k_a)

    def sample(self, mesh: MonkhorstPackMesh, integrals: Optional[MeshIntegrals] = None) -> np.ndarray:
        """conj(<ij|ab>) / eps over the mesh, from the blocked ERI tensor."""
        integrals = integrals or MeshIntegrals(self.engine, mesh)
        return np.conj(integrals.block('oovv')) / integrals.denominators().values


def mp2_amplitude(engine: EriEngine, quadruple: OrbitalQuadruple, k_i: KPoint, k_j: KPoint, k_a: KPoint) -> complex:
    """<a k_a, b k_b | i k_i, j k_j> / eps_IJ^AB for arbitrary k-points."""
    return Mp2Amplitude(engine).evaluate(quadruple, k_i, k_j, k_a)


def sample_on_mesh(
    t: ExactAmplitudeFunction,
    mesh: MonkhorstPackMesh,
    integrals: Optional[MeshIntegrals] = None,
    budget_gib: float = 4.0,
) -> AmplitudeTensor:
    """
    Evaluate an exact amplitude on every mesh entry.

    Raises:
        BudgetError: if the tensor exceeds the budget
    """
    check_budget(t.system.n_occ, t.system.n_vir, mesh.n_k, budget_gib, term=f'sample_{t.tag}')
    tensor = AmplitudeTensor(mesh, t.sample(mesh, integrals))
    logger.info(f"Sampled {t.tag} amplitude on {mesh.per_dim}^3 mesh (max |t| = {tensor.max_abs():.3e})")
    return tensor
