"""
Unit tests for the lattice module.

Tests cells, exact k-point arithmetic and Monkhorst-Pack meshes.
"""

import unittest
from fractions import Fraction

import numpy as np

from src.lattice import (
    KPoint, UnitCell, build_mp_mesh, conserve_momentum, fold_to_bz, induced_q_mesh,
)


class TestCells(unittest.TestCase):
    """Test unit and reciprocal cells."""

    def test_reciprocal_duality(self):
        """Test B^T A = 2 pi I."""
        cell = UnitCell(np.array([[1.0, 0.2, 0.0], [0.0, 1.5, 0.1], [0.0, 0.0, 0.8]]))
        reciprocal = cell.reciprocal()
        product = reciprocal.reciprocal_vectors.T @ cell.lattice_vectors
        np.testing.assert_allclose(product, 2 * np.pi * np.eye(3), atol=1e-12)

    def test_cubic_volume(self):
        self.assertAlmostEqual(UnitCell.cubic(2.0).volume, 8.0)

    def test_singular_cell_rejected(self):
        """Test that a zero-volume cell raises ValueError."""
        with self.assertRaises(ValueError):
            UnitCell(np.zeros((3, 3)))


class TestKPoints(unittest.TestCase):
    """Test exact k-point arithmetic."""

    def setUp(self):
        self.reciprocal = UnitCell.cubic(1.0).reciprocal()

    def test_equality_uses_fractions(self):
        """Test that strings, fractions and floats give the same point."""
        a = KPoint.from_fractional(['1/2', 0, 0], self.reciprocal)
        b = KPoint.from_fractional([Fraction(1, 2), 0, 0], self.reciprocal)
        c = KPoint.from_fractional([0.5, 0, 0], self.reciprocal)
        self.assertEqual(a, b)
        self.assertEqual(a, c)
        self.assertEqual(hash(a), hash(b))

    def test_cartesian(self):
        k = KPoint.from_fractional([0, 0, '1/2'], self.reciprocal)
        np.testing.assert_allclose(k.cartesian, [0.0, 0.0, np.pi])

    def test_fold_returns_lattice_vector(self):
        """Test k = folded + G exactly."""
        k = KPoint.from_fractional(['5/4', '-1/3', 2], self.reciprocal)
        folded, shift = fold_to_bz(self.reciprocal, k)
        self.assertTrue(folded.is_folded())
        self.assertEqual(shift, (1, -1, 2))
        self.assertEqual(folded.fractional, (Fraction(1, 4), Fraction(2, 3), Fraction(0)))

    def test_conserve_momentum(self):
        """Test k_b = fold(k_i + k_j - k_a)."""
        k_i = self.reciprocal.kpoint(['1/2', 0, 0])
        k_j = self.reciprocal.kpoint(['3/4', 0, 0])
        k_a = self.reciprocal.kpoint([0, 0, '1/2'])
        k_b = conserve_momentum(self.reciprocal, k_i, k_j, k_a)
        self.assertEqual(k_b.fractional, (Fraction(1, 4), Fraction(0), Fraction(1, 2)))

    def test_wrong_length(self):
        with self.assertRaises(ValueError):
            KPoint.from_fractional([0, 0], self.reciprocal)


class TestMeshes(unittest.TestCase):
    """Test Monkhorst-Pack mesh construction and lookup."""

    def setUp(self):
        self.cell = UnitCell.cubic(1.0)

    def test_gamma_centered(self):
        mesh = build_mp_mesh(self.cell, 3)
        self.assertEqual(mesh.n_k, 27)
        self.assertEqual(mesh.points[0].fractional, (0, 0, 0))
        self.assertEqual(mesh.index_of(self.cell.reciprocal().kpoint(['1/3', '2/3', 0])), (1 * 3 + 2) * 3 + 0)

    def test_mp_offset_even(self):
        """Test that even meshes are shifted by half a step."""
        mesh = build_mp_mesh(self.cell, 2, 'mp_offset')
        coords = sorted({p.fractional[0] for p in mesh.points})
        self.assertEqual(coords, [Fraction(1, 4), Fraction(3, 4)])
        self.assertEqual(induced_q_mesh(mesh).scheme.value, 'gamma_centered')

    def test_invalid_size(self):
        """Test that m = 0 raises ValueError."""
        with self.assertRaises(ValueError):
            build_mp_mesh(self.cell, 0)

    def test_index_of_periodic_image(self):
        """Test exact lookup of a shifted image and rejection of off-mesh points."""
        mesh = build_mp_mesh(self.cell, 4)
        reciprocal = self.cell.reciprocal()
        self.assertEqual(mesh.index_of(reciprocal.kpoint(['5/4', 0, -1])), mesh.index_of(reciprocal.kpoint(['1/4', 0, 0])))
        with self.assertRaises(KeyError):
            mesh.index_of(reciprocal.kpoint(['1/3', 0, 0]))
        self.assertFalse(mesh.contains(reciprocal.kpoint(['1/3', 0, 0])))

    def test_combine_matches_conserve_momentum(self):
        """Test vectorised momentum conservation on mesh indices."""
        mesh = build_mp_mesh(self.cell, 3)
        reciprocal = self.cell.reciprocal()
        rng = np.random.default_rng(7)
        for i, j, a in rng.integers(0, mesh.n_k, size=(20, 3)):
            expected = conserve_momentum(reciprocal, mesh.points[i], mesh.points[j], mesh.points[a])
            self.assertEqual(mesh.points[int(mesh.combine(i, j, a))], expected)


if __name__ == '__main__':
    unittest.main()
