"""
Planewave Kohn-Sham solver for the fixed Gaussian potential.

H = -1/2 Laplacian + V(r) in the basis of e^{i(k+G).r}. The potential term is
applied as a zero-padded circular convolution with FFTs, so the block
eigensolver used for large bases only ever sees matrix-vector products.
"""

import hashlib
import logging
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional

import numpy as np
import scipy.linalg
from scipy import fft as sfft
from scipy.sparse.linalg import LinearOperator, lobpcg

from ..lattice import KPoint, MonkhorstPackMesh, UnitCell, fold_to_bz
from ..utils.errors import SolverError
from ..utils.parallel import parallel_map
from .cache import BandCache
from .potential import PlanewaveBasis, PotentialSpec, potential_fourier
from .states import BandStates, fix_gauge

logger = logging.getLogger(__name__)

EDGE_GAP_WARNING = 1e-6
MAX_BLOCK_ITERATIONS = 500


@dataclass
class EigensolverSettings:
    """Iterative eigensolver controls."""

    tol: float = 0.0
    max_iter: Optional[int] = None
    residual_tol: float = 1e-9
    extra_bands: int = 2
    seed: int = 20240229
    # bases up to this many planewaves are diagonalised densely
    dense_limit: int = 1000


class ModelSystem:
    """
    A periodic one-body problem plus the band bookkeeping needed by the
    correlation code: occupied/virtual counts and a band cache.
    """

    def __init__(
        self,
        cell: UnitCell,
        potential: PotentialSpec,
        basis: PlanewaveBasis,
        n_occ: int = 1,
        n_vir: int = 1,
        n_bands: Optional[int] = None,
        settings: Optional[EigensolverSettings] = None,
        cache: Optional[BandCache] = None,
        threads: int = 1,
    ):
        if n_occ < 1 or n_vir < 1:
            raise ValueError(f"n_occ and n_vir must be positive, got {n_occ}, {n_vir}")
        n_bands = n_bands or (n_occ + n_vir)
        if n_occ + n_vir > n_bands:
            raise ValueError(f"n_occ + n_vir = {n_occ + n_vir} exceeds n_bands = {n_bands}")
        if n_bands + (settings or EigensolverSettings()).extra_bands >= basis.size:
            raise ValueError(f"n_bands = {n_bands} too large for a basis of {basis.size} planewaves")

        self.cell = cell
        self.reciprocal = cell.reciprocal()
        self.potential = potential
        self.basis = basis
        self.n_occ = n_occ
        self.n_vir = n_vir
        self.n_bands = n_bands
        self.settings = settings or EigensolverSettings()
        self.cache = cache or BandCache()
        self.threads = threads

        self.grid = basis.grid_size()
        self._positions = basis.grid_positions(self.grid)
        self._g_cart = basis.g_vectors @ self.reciprocal.reciprocal_vectors.T
        self._potential_kernel = self._build_potential_kernel()

        logger.info(
            f"Model system: n_pw={basis.per_dim} ({basis.size} planewaves), "
            f"C={potential.strength}, n_occ={n_occ}, n_vir={n_vir}, FFT grid {self.grid}^3"
        )

    def _build_potential_kernel(self) -> np.ndarray:
        n = self.basis.per_dim
        span = np.arange(-(n - 1), n)
        diffs = np.stack(np.meshgrid(span, span, span, indexing='ij'), axis=-1)
        values = potential_fourier(self.potential, self.cell, diffs)
        kernel = np.zeros((self.grid,) * 3, dtype=complex)
        wrapped = np.mod(span, self.grid)
        kernel[np.ix_(wrapped, wrapped, wrapped)] = values
        return sfft.fftn(kernel)

    @property
    def fingerprint(self) -> bytes:
        """SHA-256 over the cell, potential, basis and band count."""
        digest = hashlib.sha256()
        for array in (self.cell.lattice_vectors, self.potential.center, self.potential.covariance):
            digest.update(np.ascontiguousarray(array, dtype='<f8').tobytes())
        digest.update(np.array([self.potential.strength], dtype='<f8').tobytes())
        digest.update(np.array([self.basis.per_dim, self.n_bands], dtype='<i8').tobytes())
        return digest.digest()

    def kinetic(self, k: KPoint) -> np.ndarray:
        """1/2 |k + G|^2 over the basis."""
        shifted = self._g_cart + k.cartesian
        return 0.5 * np.einsum('ij,ij->i', shifted, shifted)

    def fold(self, k: KPoint) -> KPoint:
        return fold_to_bz(self.reciprocal, k)[0]

    def kpoint(self, fractional) -> KPoint:
        return self.reciprocal.kpoint(fractional)

    @property
    def occupied(self) -> range:
        return range(self.n_occ)

    @property
    def virtual(self) -> range:
        return range(self.n_occ, self.n_occ + self.n_vir)

    def solve(self, k: KPoint) -> BandStates:
        return solve_at_k(self, k)


def apply_hamiltonian(system: ModelSystem, k: KPoint, x: np.ndarray) -> np.ndarray:
    """
    Apply H(k) to one vector or to the columns of a block.

    Args:
        system: Model system
        k: Crystal momentum
        x: Coefficients, shape (basis,) or (basis, nvec)

    Returns:
        H(k) x with the same shape
    """
    x = np.asarray(x)
    if x.shape[0] != system.basis.size:
        raise ValueError(f"Vector dimension {x.shape[0]} does not match basis size {system.basis.size}")
    block = x.reshape(system.basis.size, -1)
    grid = np.zeros((system.grid,) * 3 + (block.shape[1],), dtype=complex)
    gx, gy, gz = system._positions
    grid[gx, gy, gz] = block
    axes = (0, 1, 2)
    convolved = sfft.ifftn(sfft.fftn(grid, axes=axes) * system._potential_kernel[..., None], axes=axes)
    result = system.kinetic(k)[:, None] * block + convolved[gx, gy, gz]
    return result.reshape(x.shape)


def dense_hamiltonian(system: ModelSystem, k: KPoint) -> np.ndarray:
    """Explicit H(k) matrix; only sensible for small bases."""
    g = system.basis.g_vectors
    matrix = potential_fourier(system.potential, system.cell, g[:, None, :] - g[None, :, :])
    matrix[np.diag_indices_from(matrix)] += system.kinetic(k)
    return matrix


def _start_block(system: ModelSystem, n_vectors: int) -> np.ndarray:
    rng = np.random.default_rng(system.settings.seed)
    size = system.basis.size
    block = rng.standard_normal((size, n_vectors)) + 1j * rng.standard_normal((size, n_vectors))
    return np.linalg.qr(block)[0]


def _residuals(system: ModelSystem, k: KPoint, energies: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    hv = apply_hamiltonian(system, k, vectors)
    return np.linalg.norm(hv - vectors * energies[None, :], axis=0)


def _dense_eigenpairs(system: ModelSystem, k: KPoint, n_eig: int):
    return scipy.linalg.eigh(dense_hamiltonian(system, k), subset_by_index=[0, n_eig - 1])


def _block_eigenpairs(system: ModelSystem, k: KPoint, n_eig: int):
    """
    Block LOBPCG with a kinetic-energy preconditioner.

    A block start resolves degenerate shells that a single Krylov vector
    cannot reach (e.g. free electrons, where H is diagonal).
    """
    settings = system.settings
    size = system.basis.size
    operator = LinearOperator(
        (size, size),
        matvec=lambda v: apply_hamiltonian(system, k, v),
        matmat=lambda v: apply_hamiltonian(system, k, v),
        dtype=complex,
    )
    scale = 1.0 / (1.0 + system.kinetic(k))
    preconditioner = LinearOperator(
        (size, size),
        matvec=lambda v: scale * v.reshape(-1),
        matmat=lambda v: scale[:, None] * v,
        dtype=complex,
    )
    with warnings.catch_warnings():
        # non-convergence is caught by the residual check below
        warnings.simplefilter('ignore', UserWarning)
        energies, vectors = lobpcg(
            operator, _start_block(system, n_eig), M=preconditioner, largest=False,
            tol=settings.tol or 0.1 * settings.residual_tol,
            maxiter=settings.max_iter or MAX_BLOCK_ITERATIONS,
        )
    return energies, vectors


def solve_at_k(system: ModelSystem, k: KPoint) -> BandStates:
    """
    Lowest n_bands eigenpairs of H(k), gauge-fixed and cached.

    k is folded into [0, 1)^3 first, so periodic images share one entry.
    Bases up to settings.dense_limit planewaves are diagonalised densely;
    larger ones use block LOBPCG on the FFT matvec.

    Raises:
        SolverError: if the eigensolver fails or a residual exceeds the tolerance
    """
    k = system.fold(k)
    cached = system.cache.get(k)
    if cached is not None:
        return cached

    settings = system.settings
    n_eig = system.n_bands + settings.extra_bands
    try:
        if system.basis.size <= settings.dense_limit:
            energies, vectors = _dense_eigenpairs(system, k, n_eig)
        else:
            energies, vectors = _block_eigenpairs(system, k, n_eig)
    except np.linalg.LinAlgError as e:
        raise SolverError(f"Eigensolver failed at k={k}: {str(e)}") from e
    if not (np.all(np.isfinite(energies)) and np.all(np.isfinite(vectors))):
        raise SolverError(f"Eigensolver returned non-finite eigenpairs at k={k}")

    # Rayleigh-Ritz on the returned span: orthonormal columns even inside degenerate clusters.
    basis, _ = np.linalg.qr(vectors)
    projected = basis.conj().T @ apply_hamiltonian(system, k, basis)
    energies, rotation = scipy.linalg.eigh(0.5 * (projected + projected.conj().T))
    vectors = basis @ rotation

    residuals = _residuals(system, k, energies, vectors)
    if residuals.max() > settings.residual_tol:
        raise SolverError(
            f"Eigensolver did not converge at k={k}: residual {residuals.max():.3e} "
            f"exceeds {settings.residual_tol:.1e}"
        )
    edge_gap = energies[system.n_bands] - energies[system.n_bands - 1]
    if edge_gap < EDGE_GAP_WARNING:
        logger.warning(f"Near-degenerate truncation edge at k={k}: gap {edge_gap:.3e}")

    states = fix_gauge(BandStates(k, energies[:system.n_bands], vectors[:, :system.n_bands]))
    logger.debug(f"Solved k={k}: energies {states.energies}")
    return system.cache.put(states)


def dense_solve(system: ModelSystem, k: KPoint) -> np.ndarray:
    """Dense diagonalization oracle: all eigenvalues of H(k), ascending."""
    return scipy.linalg.eigh(dense_hamiltonian(system, k), eigvals_only=True)


def direct_gap(system: ModelSystem, gap_mesh: MonkhorstPackMesh) -> float:
    """
    Smallest same-k gap between the highest occupied and lowest virtual band.
    """
    if gap_mesh.n_k == 0:
        raise ValueError("Gap mesh is empty")
    states = parallel_map(system.solve, gap_mesh.points, system.threads)
    gaps = [s.energies[system.n_occ] - s.energies[system.n_occ - 1] for s in states]
    gap = float(min(gaps))
    logger.info(f"Direct gap on {gap_mesh.per_dim}^3 gap mesh: {gap:.6f}")
    return gap


def band_path(system: ModelSystem, corners: Iterable[KPoint], points_per_segment: int = 10) -> List[BandStates]:
    """
    Solve along straight segments joining consecutive corner k-points.
    """
    corners = list(corners)
    if len(corners) == 1:
        return [system.solve(corners[0])]
    path: List[KPoint] = []
    for start, end in zip(corners[:-1], corners[1:]):
        for step in range(points_per_segment):
            t = Fraction(step, points_per_segment)
            frac = [a + (b - a) * t for a, b in zip(start.fractional, end.fractional)]
            path.append(system.kpoint(frac))
    path.append(corners[-1])
    return parallel_map(system.solve, path, system.threads)
