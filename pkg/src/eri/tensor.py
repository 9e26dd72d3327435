"""
ERI blocks over a whole Monkhorst-Pack mesh.

For a Gamma-mesh transfer q the integral factorises as

    <n1 k1, n2 k2 | n3 k1+q, n4 k2-q>
        = 4 pi / |Omega| * sum_G' A[k1](G') w_q(G') B[k2](G')

with A[k1](G') = rho_13(G' + Ga(k1)) and B[k2](G') = rho_24(Gb(k2) - G'),
where Ga and Gb are the reciprocal vectors removed when folding k1+q and
k2-q. Each q block is then a single matrix product.
"""

import logging
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import fft as sfft

from ..lattice import MonkhorstPackMesh
from ..utils.errors import BudgetError
from .integrals import GIB, EriEngine

logger = logging.getLogger(__name__)


def tensor_bytes(n_k: int, shape: Sequence[int]) -> int:
    return 16 * n_k ** 3 * int(np.prod(shape))


def _orbital_stack(engine: EriEngine, mesh: MonkhorstPackMesh, bands: Sequence[int]) -> np.ndarray:
    """u_{nk}(r) for every band in `bands` and every mesh point: (band, k, grid^3)."""
    return np.stack([
        np.stack([engine.orbital(n, k) for k in mesh.points])
        for n in bands
    ])


def mesh_eri_tensor(
    engine: EriEngine,
    mesh: MonkhorstPackMesh,
    bands1: Sequence[int],
    bands2: Sequence[int],
    bands3: Sequence[int],
    bands4: Sequence[int],
    budget_gib: float = 4.0,
    threads: int = 1,
) -> np.ndarray:
    """
    All ERIs <n1 k1, n2 k2 | n3 k3, n4 k4> on the mesh, k4 fixed by conservation.

    Args:
        engine: ERI engine of the model system
        mesh: Monkhorst-Pack mesh
        bands1..bands4: Band indices for each slot
        budget_gib: Memory ceiling for the result plus working arrays
        threads: FFT worker count

    Returns:
        Complex array indexed [k1, k2, k3, n1, n2, n3, n4]

    Raises:
        BudgetError: if the tensor does not fit the budget
    """
    n_k = mesh.n_k
    b1, b2, b3, b4 = (list(b) for b in (bands1, bands2, bands3, bands4))
    shape = (len(b1), len(b2), len(b3), len(b4))
    grid = engine.grid
    work = 16 * n_k * grid ** 3 * (len(set(b1 + b3)) + len(set(b2 + b4)) + max(len(b1) * len(b3), len(b2) * len(b4)) * 2)
    needed = tensor_bytes(n_k, shape) + work
    if needed > budget_gib * GIB:
        raise BudgetError(
            f"ERI tensor on a {mesh.per_dim}^3 mesh needs {needed / GIB:.2f} GiB (budget {budget_gib} GiB)",
            term='eri_tensor', n_k=n_k,
        )

    # Warm the band cache for every mesh point before the orbital stacks.
    for k in mesh.points:
        engine.system.solve(k)

    left_bands = sorted(set(b1 + b3))
    right_bands = sorted(set(b2 + b4))
    left = _orbital_stack(engine, mesh, left_bands)
    right = left if right_bands == left_bands else _orbital_stack(engine, mesh, right_bands)
    lpos = {n: i for i, n in enumerate(left_bands)}
    rpos = {n: i for i, n in enumerate(right_bands)}

    result = np.zeros((n_k, n_k, n_k) + shape, dtype=complex)
    k_index = np.arange(n_k)
    axes = (1, 2, 3)
    scale = engine.kernel_scale * engine.prefactor / grid ** 3
    q_mesh_ints = mesh.ints

    for q_index in range(n_k):
        q_ints = q_mesh_ints[q_index]
        k3, g_a = mesh.shift(k_index, q_ints, +1)
        k4, g_b = mesh.shift(k_index, q_ints, -1)
        weights = engine.coulomb_weights([Fraction(int(v), mesh.per_dim) for v in q_ints]).ravel()

        rows = []
        for n1 in b1:
            for n3 in b3:
                rho = sfft.fftn(np.conj(left[lpos[n1]]) * left[lpos[n3]][k3], axes=axes, workers=threads)
                rows.append(np.stack([
                    engine.reindexed(rho[k], +1, g_a[k]).ravel() for k in range(n_k)
                ]))
        cols = []
        for n2 in b2:
            for n4 in b4:
                rho = sfft.fftn(np.conj(right[rpos[n2]]) * right[rpos[n4]][k4], axes=axes, workers=threads)
                cols.append(np.stack([
                    engine.reindexed(rho[k], -1, g_b[k]).ravel() for k in range(n_k)
                ]))

        a_matrix = np.stack(rows, axis=1) * weights  # (k1, n1n3, G)
        b_matrix = np.stack(cols, axis=1)  # (k2, n2n4, G)
        block = np.einsum('xpg,yrg->xypr', a_matrix, b_matrix, optimize=True) * scale
        block = block.reshape(n_k, n_k, len(b1), len(b3), len(b2), len(b4))
        # [k1, k2, n1, n3, n2, n4] -> [k1, k2, n1, n2, n3, n4]
        result[k_index[:, None], k_index[None, :], k3[:, None]] = block.transpose(0, 1, 2, 4, 3, 5)
        logger.debug(f"ERI block for q index {q_index} done")

    logger.info(f"Built ERI tensor {shape} on {mesh.per_dim}^3 mesh")
    return result
