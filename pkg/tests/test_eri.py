"""
Unit tests for the eri module.

Tests pair densities, pointwise ERIs, the punctured kernel and the mesh
ERI blocks.
"""

import unittest

import numpy as np

from src.eri import EriKey, mesh_eri_tensor, tensor_bytes
from src.eri.lru import ArrayLRU
from src.lattice import build_mp_mesh, conserve_momentum
from src.utils.errors import BudgetError
from tests.support import shared_engine


class TestPointwiseEri(unittest.TestCase):
    """Test the pointwise ERI."""

    def setUp(self):
        self.engine = shared_engine()
        self.reciprocal = self.engine.reciprocal
        self.gamma = self.reciprocal.kpoint([0, 0, 0])
        self.half = self.reciprocal.kpoint(['1/2', 0, 0])

    def test_self_interaction_real_positive(self):
        """Test that <0G,0G|0G,0G> is real and positive."""
        value = self.engine.eri(EriKey.of(0, self.gamma, 0, self.gamma, 0, self.gamma, 0, self.gamma))
        self.assertGreater(value.real, 0.0)
        self.assertLess(abs(value.imag), 1e-10 * value.real)

    def test_electron_swap_symmetry(self):
        """Test <12|34> = <21|43>."""
        g, h = self.gamma, self.half
        left = self.engine.eri(EriKey.of(0, g, 1, h, 1, h, 0, g))
        right = self.engine.eri(EriKey.of(1, h, 0, g, 0, g, 1, h))
        self.assertAlmostEqual(abs(left - right), 0.0, delta=1e-10 * max(abs(left), 1.0))

    def test_periodic_in_k(self):
        """Test that shifting every label by a lattice vector changes nothing."""
        g, h = self.gamma, self.half
        shifted = self.reciprocal.kpoint(['-1/2', 0, 0])
        a = self.engine.eri(EriKey.of(0, g, 1, h, 1, h, 0, g))
        b = self.engine.eri(EriKey.of(0, g, 1, shifted, 1, shifted, 0, g))
        self.assertAlmostEqual(abs(a - b), 0.0, delta=1e-12 * max(abs(a), 1.0))

    def test_non_conserving_key(self):
        """Test that a non-conserving key raises ValueError."""
        quarter = self.reciprocal.kpoint(['1/4', 0, 0])
        key = EriKey.of(0, self.gamma, 0, self.gamma, 1, quarter, 1, self.gamma)
        self.assertFalse(key.is_conserving())
        with self.assertRaises(ValueError):
            self.engine.eri(key)

    def test_punctured_kernel(self):
        """Test that the G = 0 weight vanishes at q = 0 and only there."""
        weights = self.engine.coulomb_weights([0, 0, 0])
        self.assertEqual(weights[0, 0, 0], 0.0)
        shifted = self.engine.coulomb_weights([0.5, 0, 0])
        self.assertAlmostEqual(shifted[0, 0, 0], 1.0 / np.pi ** 2)

    def test_pair_density_normalisation(self):
        """Test rho_nn(0) = 1 for normalised orbitals."""
        rho = self.engine.pair_density((0, self.gamma), (0, self.gamma))
        self.assertAlmostEqual(rho.at(np.zeros(3, dtype=int)).real, 1.0, places=10)


class TestMeshTensor(unittest.TestCase):
    """Test blocked mesh ERIs against pointwise values."""

    def setUp(self):
        self.engine = shared_engine()
        self.mesh = build_mp_mesh(self.engine.system.cell, 2)

    def test_matches_pointwise(self):
        """Test every k1 and a sample of (k2, k3) entries."""
        tensor = mesh_eri_tensor(self.engine, self.mesh, [0], [0], [1], [1])
        self.assertEqual(tensor.shape, (8, 8, 8, 1, 1, 1, 1))
        points = self.mesh.points
        for x, y, z in [(0, 0, 0), (1, 2, 3), (7, 5, 1), (4, 4, 6)]:
            k4 = conserve_momentum(self.engine.reciprocal, points[x], points[y], points[z])
            expected = self.engine.eri(EriKey.of(0, points[x], 0, points[y], 1, points[z], 1, k4))
            self.assertAlmostEqual(abs(tensor[x, y, z, 0, 0, 0, 0] - expected), 0.0,
                                   delta=1e-10 * max(abs(expected), 1.0))

    def test_budget_rejection(self):
        """Test that an oversized tensor raises BudgetError naming N_k."""
        with self.assertRaises(BudgetError) as ctx:
            mesh_eri_tensor(self.engine, self.mesh, [0], [0], [1], [1], budget_gib=1e-9)
        self.assertEqual(ctx.exception.n_k, 8)

    def test_tensor_bytes(self):
        self.assertEqual(tensor_bytes(8, (1, 1, 2, 2)), 16 * 512 * 4)


class TestArrayLRU(unittest.TestCase):
    """Test the byte-bounded LRU."""

    def test_eviction_order(self):
        cache = ArrayLRU(budget_bytes=3 * 80, name='test')
        for key in range(4):
            cache.get_or_compute(key, lambda: np.zeros(10))
        self.assertEqual(len(cache), 3)
        self.assertLessEqual(cache.nbytes, 240)

    def test_hit_skips_compute(self):
        cache = ArrayLRU(budget_bytes=1 << 20)
        first = cache.get_or_compute('a', lambda: np.ones(4))
        second = cache.get_or_compute('a', lambda: self.fail('recomputed'))
        self.assertIs(first, second)


if __name__ == '__main__':
    unittest.main()
