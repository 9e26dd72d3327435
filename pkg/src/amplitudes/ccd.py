"""
Finite-mesh CCD amplitude map, its intermediates, the CCD(n) recursion and
the correlation energy.

Index conventions: amplitudes T[k_i, k_j, k_a, i, j, a, b]; mesh sums carry
1/N_k per summed crystal momentum; P(X)_IJ^AB = X_IJ^AB + X_JI^BA.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from ..utils.errors import SolverError
from ..utils.parallel import pairwise_sum, parallel_map
from .blocks import AmplitudeTensor, MeshIntegrals, check_budget

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CcdIntermediates:
    """
    kappa_vv[k_a, c, a]        kappa_C^A (diagonal in k)
    kappa_oo[k_i, i, k]        kappa_I^K (diagonal in k)
    chi_oooo[k_i, k_j, k_k, k, l, i, j]   chi_IJ^KL, k_l implied
    chi_vvvv[k_a, k_b, k_c, a, b, c, d]   chi_CD^AB = <AB|CD>, k_d implied
    chi_ic[k_i, k_a, k_k, a, k, i, c]     chi_IC^AK, k_c = k_a + k_k - k_i
    chi_ci[k_i, k_a, k_k, a, k, i, c]     chi_CI^AK, same k_c
    """

    kappa_vv: np.ndarray = field(repr=False)
    kappa_oo: np.ndarray = field(repr=False)
    chi_oooo: np.ndarray = field(repr=False)
    chi_vvvv: np.ndarray = field(repr=False)
    chi_ic: np.ndarray = field(repr=False)
    chi_ci: np.ndarray = field(repr=False)


def build_intermediates(integrals: MeshIntegrals, T: AmplitudeTensor, include_quadratic: bool = True) -> CcdIntermediates:
    """
    Assemble the kappa/chi blocks from one amplitude tensor.

    With include_quadratic=False every amplitude-dependent piece is dropped,
    leaving kappa = 0 and bare ERIs in chi.
    """
    mesh = integrals.mesh
    n_k = mesh.n_k
    t = T.data
    K = np.arange(n_k)
    oovv = integrals.block('oovv')
    oooo = integrals.block('oooo')
    voov = integrals.block('voov')
    vovo = integrals.block('vovo')
    n_occ, n_vir = integrals.n_occ, integrals.n_vir

    if include_quadratic:
        w = integrals.antisymmetrized()
        kappa_vv = -np.einsum('xyzklcd,xyzklad->zca', w, t, optimize=True) / n_k ** 2
        kappa_oo = np.einsum('xyzklcd,xyzilcd->xik', w, t, optimize=True) / n_k ** 2
    else:
        kappa_vv = np.zeros((n_k, n_vir, n_vir), dtype=complex)
        kappa_oo = np.zeros((n_k, n_occ, n_occ), dtype=complex)

    chi_oooo = np.empty((n_k, n_k, n_k) + (n_occ,) * 4, dtype=complex)
    for ki in range(n_k):
        for kj in range(n_k):
            kl = mesh.combine(ki, kj, K)
            block = oooo[K, kl, ki]
            if include_quadratic:
                # <k kk, l kl | c kc, d kd> t_ij^cd(ki, kj, kc)
                eri = oovv[K[:, None], kl[:, None], K[None, :]]
                block = block + np.einsum('xzklcd,zijcd->xklij', eri, t[ki, kj], optimize=True) / n_k
            chi_oooo[ki, kj] = block

    chi_ic = np.empty((n_k, n_k, n_k, n_vir, n_occ, n_occ, n_vir), dtype=complex)
    chi_ci = np.empty_like(chi_ic)
    for ki in range(n_k):
        for ka in range(n_k):
            kc = mesh.combine(ka, K, ki)
            bare_ic = voov[ka, K, ki]
            bare_ci = vovo[ka, K, kc].transpose(0, 1, 2, 4, 3)
            if include_quadratic:
                kd = mesh.combine(K, ki, ka)
                # e1[kl, kk, l, k, d, c] = <l kl, k kk | d kd, c kc>
                e1 = oovv[K[:, None], K[None, :], kd[:, None]]
                # e2[kl, kk, l, k, c, d] = <l kl, k kk | c kc, d kd>
                e2 = oovv[K[:, None], K[None, :], kc[None, :]]
                t_ad = t[ki, K, ka]  # t_il^ad(ki, kl, ka)
                t_da = t[ki, K, kd]  # t_il^da(ki, kl, kd)
                scale = 0.5 / n_k
                bare_ic = bare_ic + scale * (
                    2.0 * np.einsum('xylkdc,xilad->yakic', e1, t_ad, optimize=True)
                    - np.einsum('xylkcd,xilad->yakic', e2, t_ad, optimize=True)
                    - np.einsum('xylkdc,xilda->yakic', e1, t_da, optimize=True)
                )
                bare_ci = bare_ci - scale * np.einsum('xylkcd,xilda->yakic', e2, t_da, optimize=True)
            chi_ic[ki, ka] = bare_ic
            chi_ci[ki, ka] = bare_ci

    return CcdIntermediates(kappa_vv, kappa_oo, chi_oooo, integrals.block('vvvv'), chi_ic, chi_ci)


def permute(integrals: MeshIntegrals, X: np.ndarray) -> np.ndarray:
    """(P - 1) X: the (JI, BA) partner X[k_j, k_i, k_b, j, i, b, a]."""
    n_k = integrals.n_k
    K = np.arange(n_k)
    k_b = integrals.combine_all()
    gathered = X[K[None, :, None], K[:, None, None], k_b]
    return gathered.transpose(0, 1, 2, 4, 3, 6, 5)


def ccd_map(integrals: MeshIntegrals, T: AmplitudeTensor, include_quadratic: bool = True) -> AmplitudeTensor:
    """
    One application of the finite-mesh CCD amplitude map.

    With include_quadratic=False and T the sampled MP2 amplitude the result
    is the MP3 amplitude.
    """
    mesh = integrals.mesh
    n_k = mesh.n_k
    K = np.arange(n_k)
    t = T.data
    inter = build_intermediates(integrals, T, include_quadratic)

    constant = np.conj(integrals.block('oovv'))

    # Terms under P: kappa single contractions and the 3h3p ring/exchange block.
    under_p = (
        np.einsum('zca,xyzijcb->xyzijab', inter.kappa_vv, t, optimize=True)
        - np.einsum('xik,xyzkjab->xyzijab', inter.kappa_oo, t, optimize=True)
    )

    def ring_slab(ki: int) -> np.ndarray:
        slab = np.empty((n_k, n_k) + t.shape[3:], dtype=complex)
        for ka in range(n_k):
            kc = mesh.combine(ka, K, ki)          # over k_k
            kb = mesh.combine(ki, K, ka)          # over k_j
            ring = 2.0 * inter.chi_ic[ki, ka] - inter.chi_ci[ki, ka]
            t_cb = t[K[:, None], K[None, :], kc[:, None]]     # t_kj^cb(kk, kj, kc)
            t_bc = t[K[:, None], K[None, :], kb[None, :]]     # t_kj^bc(kk, kj, kb)
            t_ki = t[K[None, :], ki, kb[:, None]]             # t_ki^bc(kk, ki, kb), [kj, kk]
            chi_cj = inter.chi_ci[K, ka]                      # chi_CJ^AK, [kj, kk]
            slab[:, ka] = (
                np.einsum('xakic,xykjcb->yijab', ring, t_cb, optimize=True)
                - np.einsum('xakic,xykjbc->yijab', inter.chi_ic[ki, ka], t_bc, optimize=True)
                - np.einsum('yxakjc,yxkibc->yijab', chi_cj, t_ki, optimize=True)
            ) / n_k
        return slab

    under_p = under_p + np.stack(parallel_map(ring_slab, range(n_k), integrals.threads))

    def ladder_slab(ki: int) -> np.ndarray:
        slab = np.empty((n_k, n_k) + t.shape[3:], dtype=complex)
        for kj in range(n_k):
            kl = mesh.combine(ki, kj, K)          # over k_k
            kb = mesh.combine(ki, kj, K)          # over k_a
            t_kl = t[K[:, None], kl[:, None], K[None, :]]     # t_kl^ab(kk, kl, ka)
            hole = np.einsum('xklij,xzklab->zijab', inter.chi_oooo[ki, kj], t_kl, optimize=True)
            vvvv = inter.chi_vvvv[K[:, None], kb[:, None], K[None, :]]   # <a ka, b kb | c kc, d kd>
            particle = np.einsum('zxabcd,xijcd->zijab', vvvv, t[ki, kj], optimize=True)
            slab[kj] = (hole + particle) / n_k
        return slab

    ladders = np.stack(parallel_map(ladder_slab, range(n_k), integrals.threads))

    numerator = constant + ladders + under_p + permute(integrals, under_p)
    result = AmplitudeTensor(mesh, numerator / integrals.denominators().values)
    logger.debug(f"CCD map applied on {mesh.per_dim}^3 mesh (quadratic={include_quadratic})")
    return result


def mp3_tensor(integrals: MeshIntegrals, mp2: AmplitudeTensor) -> AmplitudeTensor:
    """MP3 amplitude: constant plus linear terms of the map at the MP2 amplitude."""
    return ccd_map(integrals, mp2, include_quadratic=False)


def ccd_solve(integrals: MeshIntegrals, n: int) -> Tuple[AmplitudeTensor, List[float]]:
    """
    CCD(n): n applications of the map starting from zero.

    Returns:
        (T_n, history) with history[m-1] = max |T_m - T_{m-1}|

    Raises:
        ValueError: if n < 1
        BudgetError: if the tensors exceed the budget
        SolverError: if an iteration produces NaN/Inf (message names it)
    """
    if n < 1:
        raise ValueError(f"CCD iteration count must be >= 1, got {n}")
    check_budget(integrals.n_occ, integrals.n_vir, integrals.n_k, integrals.budget_gib, term=f'ccd({n})', copies=8)

    current = AmplitudeTensor.zeros(integrals.mesh, integrals.n_occ, integrals.n_vir)
    history: List[float] = []
    for iteration in range(1, n + 1):
        try:
            updated = ccd_map(integrals, current)
        except SolverError as e:
            raise SolverError(f"CCD iteration {iteration} produced non-finite amplitudes") from e
        change = float(np.max(np.abs(updated.data - current.data)))
        history.append(change)
        logger.debug(f"CCD iteration {iteration}: max |dT| = {change:.3e}")
        current = updated
    logger.info(f"CCD({n}) on {integrals.mesh.per_dim}^3 mesh: final change {history[-1]:.3e}")
    return current, history


def energy(integrals: MeshIntegrals, T) -> complex:
    """
    E = 1/N_k^3 sum_{k_i k_j k_a} sum_{ijab} W_ijab T_ijab.

    T may be an AmplitudeTensor or a raw array of the same layout.
    """
    data = T.data if isinstance(T, AmplitudeTensor) else np.asarray(T)
    products = integrals.antisymmetrized() * data
    return complex(pairwise_sum(products.ravel()) / integrals.n_k ** 3)


def energy_parts(integrals: MeshIntegrals, T) -> Tuple[complex, complex]:
    """(direct, exchange) mesh averages: sum <IJ|AB> t and sum <IJ|BA> t."""
    data = T.data if isinstance(T, AmplitudeTensor) else np.asarray(T)
    n3 = integrals.n_k ** 3
    direct = pairwise_sum((integrals.block('oovv') * data).ravel()) / n3
    exchange = pairwise_sum((integrals.exchange() * data).ravel()) / n3
    return complex(direct), complex(exchange)
