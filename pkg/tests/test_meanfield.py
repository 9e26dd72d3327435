"""
Unit tests for the meanfield module.

Tests the Gaussian potential, the planewave solver against the dense
oracle, gauge fixing and the binary band cache.
"""

import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

from src.lattice import UnitCell, build_mp_mesh
from src.meanfield import (
    BandCache, BandStates, EigensolverSettings, PlanewaveBasis, PotentialSpec, apply_hamiltonian,
    dense_hamiltonian, dense_solve, direct_gap, fix_gauge, potential_fourier,
)
from src.utils.errors import SolverError
from tests.support import MODEL_CENTER, MODEL_SIGMA, small_system


class TestPotential(unittest.TestCase):
    """Test the periodized Gaussian and the basis."""

    def test_zero_component(self):
        """Test V(0) = C / |Omega| (2 pi)^(3/2) sqrt(det Sigma)."""
        spec = PotentialSpec.from_stddev(MODEL_CENTER, MODEL_SIGMA, -200.0)
        value = potential_fourier(spec, UnitCell.cubic(1.0), np.zeros((1, 3), dtype=int))[0]
        expected = -200.0 * (2 * np.pi) ** 1.5 * 0.1 * 0.2 * 0.3
        self.assertAlmostEqual(value.real, expected, places=10)
        self.assertAlmostEqual(value.imag, 0.0, places=12)

    def test_non_positive_sigma(self):
        with self.assertRaises(ValueError):
            PotentialSpec.from_stddev(MODEL_CENTER, [0.1, 0.0, 0.3], -200.0)

    def test_basis_layout(self):
        basis = PlanewaveBasis(4)
        self.assertEqual(basis.size, 64)
        self.assertEqual(basis.g_vectors.min(), -2)
        self.assertEqual(basis.g_vectors.max(), 1)
        self.assertFalse(basis.g_vectors[basis.zero_index].any())


class TestSolver(unittest.TestCase):
    """Test the dense and block eigensolvers."""

    def setUp(self):
        self.system = small_system(n_pw=4)

    def test_matches_dense_oracle(self):
        """Test solver eigenvalues against the full dense spectrum."""
        k = self.system.kpoint([0, 0, '1/2'])
        states = self.system.solve(k)
        dense = dense_solve(self.system, k)
        np.testing.assert_allclose(states.energies, dense[:self.system.n_bands], atol=1e-8)

    def test_apply_matches_dense_matrix(self):
        """Test the FFT matvec against the explicit Hamiltonian."""
        k = self.system.kpoint(['1/4', 0, '1/3'])
        rng = np.random.default_rng(3)
        x = rng.standard_normal((64, 2)) + 1j * rng.standard_normal((64, 2))
        np.testing.assert_allclose(
            apply_hamiltonian(self.system, k, x), dense_hamiltonian(self.system, k) @ x, atol=1e-9
        )

    def test_free_electrons(self):
        """Test that C = 0 gives eps_1(Gamma) = 0 and the first shell at (2 pi)^2 / 2."""
        for n_pw in (4, 5, 6):
            with self.subTest(n_pw=n_pw):
                system = small_system(n_pw=n_pw, strength=0.0)
                states = system.solve(system.kpoint([0, 0, 0]))
                np.testing.assert_allclose(
                    states.energies, [0.0, 0.5 * (2 * np.pi) ** 2], atol=1e-8
                )

    def test_block_solver_free_electrons(self):
        """Test that the block solver resolves the degenerate C = 0 shells."""
        system = small_system(
            n_pw=5, strength=0.0, settings=EigensolverSettings(residual_tol=1e-6, dense_limit=0)
        )
        states = system.solve(system.kpoint([0, 0, 0]))
        np.testing.assert_allclose(states.energies, [0.0, 0.5 * (2 * np.pi) ** 2], atol=1e-8)

    def test_block_solver_matches_dense_oracle(self):
        """Test block LOBPCG eigenvalues against dense diagonalisation."""
        system = small_system(n_pw=5, settings=EigensolverSettings(residual_tol=1e-6, dense_limit=0))
        for frac in ([0, 0, 0], [0, 0, '1/2'], ['1/4', '1/3', 0]):
            with self.subTest(k=frac):
                k = system.kpoint(frac)
                states = system.solve(k)
                dense = dense_solve(system, k)
                np.testing.assert_allclose(states.energies, dense[:system.n_bands], atol=1e-8)

    def test_gauge_is_fixed(self):
        """Test that the largest coefficient of each band is real positive."""
        states = self.system.solve(self.system.kpoint([0, 0, 0]))
        for band in range(states.n_bands):
            column = states.coefficients[:, band]
            anchor = int(np.argmax(np.abs(column)))
            self.assertGreater(column[anchor].real, 0.0)
            self.assertAlmostEqual(column[anchor].imag, 0.0, places=12)

    def test_fix_gauge_zero_column(self):
        """Test that an identically zero band raises SolverError."""
        k = self.system.kpoint([0, 0, 0])
        with self.assertRaises(SolverError):
            fix_gauge(BandStates(k, np.zeros(1), np.zeros((64, 1))))

    def test_periodic_images_share_entry(self):
        """Test that k and k + G hit the same cached states."""
        first = self.system.solve(self.system.kpoint(['1/2', 0, 0]))
        second = self.system.solve(self.system.kpoint(['-1/2', 1, 0]))
        self.assertIs(first, second)

    @patch('src.meanfield.solver.lobpcg')
    def test_non_convergence(self, mock_lobpcg):
        """Test that an unconverged block becomes SolverError."""
        system = small_system(n_pw=5, settings=EigensolverSettings(residual_tol=1e-8, dense_limit=0))
        rng = np.random.default_rng(11)
        block = rng.standard_normal((125, 4)) + 1j * rng.standard_normal((125, 4))
        mock_lobpcg.return_value = (np.zeros(4), block)
        with self.assertRaisesRegex(SolverError, 'did not converge'):
            system.solve(system.kpoint(['1/3', 0, 0]))

    @patch('src.meanfield.solver.scipy.linalg.eigh')
    def test_dense_failure(self, mock_eigh):
        """Test that a LinAlgError from the dense path becomes SolverError."""
        mock_eigh.side_effect = np.linalg.LinAlgError('eigh failed')
        with self.assertRaises(SolverError):
            self.system.solve(self.system.kpoint(['1/5', 0, 0]))

    def test_direct_gap_positive(self):
        gap = direct_gap(self.system, build_mp_mesh(self.system.cell, 2))
        self.assertGreater(gap, 0.0)

    def test_too_many_bands(self):
        with self.assertRaises(ValueError):
            small_system(n_pw=2, n_bands=7)


class TestBandCache(unittest.TestCase):
    """Test the binary band cache."""

    def test_round_trip(self):
        """Test that saved states load back bit for bit."""
        system = small_system(n_pw=4)
        states = system.solve(system.kpoint([0, '1/2', 0]))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'bands.bin'
            cache = BandCache(path)
            cache.put(states)
            cache.save(4, system.fingerprint)

            reloaded = BandCache(path)
            self.assertEqual(reloaded.load(system.reciprocal, system.n_bands, 4, system.fingerprint), 1)
            loaded = reloaded.get(states.k)
            np.testing.assert_array_equal(loaded.energies, states.energies)
            np.testing.assert_array_equal(loaded.coefficients, states.coefficients)

    def test_mismatched_basis_ignored(self):
        system = small_system(n_pw=4)
        states = system.solve(system.kpoint([0, 0, 0]))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'bands.bin'
            cache = BandCache(path)
            cache.put(states)
            cache.save(4, system.fingerprint)
            self.assertEqual(BandCache(path).load(system.reciprocal, system.n_bands, 5, system.fingerprint), 0)

    def test_corrupt_file_ignored(self):
        """Test that an unreadable file is a warning, not an error."""
        system = small_system(n_pw=4)
        with tempfile.NamedTemporaryFile(suffix='.bin', delete=False) as tmp:
            tmp.write(b'not a band cache')
        try:
            self.assertEqual(BandCache(Path(tmp.name)).load(system.reciprocal, 2, 4, system.fingerprint), 0)
        finally:
            Path(tmp.name).unlink()

    def test_other_system_ignored(self):
        """Test that a cache written for C = -200 is not loaded into a C = 0 system."""
        bound = small_system(n_pw=4, strength=-200.0)
        free = small_system(n_pw=4, strength=0.0)
        states = bound.solve(bound.kpoint([0, 0, 0]))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'bands.bin'
            cache = BandCache(path)
            cache.put(states)
            cache.save(4, bound.fingerprint)

            reloaded = BandCache(path)
            with self.assertLogs('src.meanfield.cache', level='WARNING'):
                self.assertEqual(reloaded.load(free.reciprocal, free.n_bands, 4, free.fingerprint), 0)
            self.assertEqual(len(reloaded), 0)
            self.assertEqual(reloaded.load(bound.reciprocal, bound.n_bands, 4, bound.fingerprint), 1)

    def test_fingerprint_tracks_system(self):
        """Test that the fingerprint changes with the potential and not between equal systems."""
        self.assertEqual(small_system(strength=-200.0).fingerprint, small_system(strength=-200.0).fingerprint)
        self.assertNotEqual(small_system(strength=-200.0).fingerprint, small_system(strength=0.0).fingerprint)
        self.assertNotEqual(small_system(n_bands=3).fingerprint, small_system().fingerprint)

    def test_first_put_wins(self):
        system = small_system(n_pw=4)
        states = system.solve(system.kpoint([0, 0, 0]))
        cache = BandCache()
        cache.put(states)
        duplicate = BandStates(states.k, states.energies + 1.0, states.coefficients)
        self.assertIs(cache.put(duplicate), states)
        self.assertEqual(len(cache), 1)


if __name__ == '__main__':
    unittest.main()
