"""
Pointwise evaluation of individual diagram terms.

External crystal momenta are arbitrary; internal momenta run over a mesh
with the dependent ones fixed by momentum conservation. Every amplitude
term is returned already divided by the external denominator and carries
its 1/N_k (linear) or 1/N_k^2 (quadratic) mesh-average factor, but not its
catalog coefficient.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from ..eri import EriEngine, EriKey
from ..lattice import KPoint, MonkhorstPackMesh, conserve_momentum
from ..utils.parallel import pairwise_sum, parallel_map
from .blocks import MeshIntegrals, check_budget, denominator
from .catalog import CATALOG, OrbitalQuadruple, TermId, amplitude_terms, parse_term
from .exact import ExactAmplitudeFunction, Mp2Amplitude

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class External:
    """Global band indices and crystal momenta of the external legs."""

    i: int
    j: int
    a: int
    b: int
    k_i: KPoint
    k_j: KPoint
    k_a: KPoint
    k_b: KPoint


class TermEvaluator:
    """
    Evaluates diagram values for one (engine, amplitude, mesh) triple.

    Each handler receives the externals and one outer internal k-point and
    returns that slice of the internal sum; slices are reduced pairwise in
    mesh order.
    """

    def __init__(self, engine: EriEngine, t: ExactAmplitudeFunction, mesh: MonkhorstPackMesh, threads: int = 1):
        self.engine = engine
        self.system = engine.system
        self.t = t
        self.mesh = mesh
        self.threads = threads
        self.occ = list(self.system.occupied)
        self.vir = list(self.system.virtual)
        self._handlers: Dict[TermId, Callable[[External, KPoint], complex]] = {
            TermId.LIN_4H2P: self._lin_4h2p,
            TermId.LIN_2H4P: self._lin_2h4p,
            TermId.LIN_3H3P_RING: self._lin_ring,
            TermId.LIN_3H3P_XC1: self._lin_xc1,
            TermId.LIN_3H3P_XC2: self._lin_xc2,
            TermId.LIN_3H3P_XC3: self._lin_xc3,
            TermId.QUAD_4H2P: self._quad_4h2p,
            TermId.QUAD_KAPPA_VV_DIRECT: lambda ext, k: self._quad_kappa_vv(ext, k, exchange=False),
            TermId.QUAD_KAPPA_VV_EXCHANGE: lambda ext, k: self._quad_kappa_vv(ext, k, exchange=True),
            TermId.QUAD_KAPPA_OO_DIRECT: lambda ext, k: self._quad_kappa_oo(ext, k, exchange=False),
            TermId.QUAD_KAPPA_OO_EXCHANGE: lambda ext, k: self._quad_kappa_oo(ext, k, exchange=True),
            TermId.QUAD_3H3P_SUPER: lambda ext, k: self._quad_3h3p(ext, k, 'e1', 't1', 'cb'),
            TermId.QUAD_3H3P_CB_2: lambda ext, k: self._quad_3h3p(ext, k, 'e2', 't1', 'cb'),
            TermId.QUAD_3H3P_CB_3: lambda ext, k: self._quad_3h3p(ext, k, 'e1', 't2', 'cb'),
            TermId.QUAD_3H3P_CB_4: lambda ext, k: self._quad_3h3p(ext, k, 'e2', 't2', 'cb'),
            TermId.QUAD_3H3P_BC_1: lambda ext, k: self._quad_3h3p(ext, k, 'e1', 't1', 'bc'),
            TermId.QUAD_3H3P_BC_2: lambda ext, k: self._quad_3h3p(ext, k, 'e2', 't1', 'bc'),
            TermId.QUAD_3H3P_BC_3: lambda ext, k: self._quad_3h3p(ext, k, 'e1', 't2', 'bc'),
            TermId.QUAD_3H3P_KI_4: self._quad_ki_4,
        }

    # small helpers

    def k(self, plus1: KPoint, plus2: KPoint, minus: KPoint) -> KPoint:
        return conserve_momentum(self.system.reciprocal, plus1, plus2, minus)

    def eri(self, n1, k1, n2, k2, n3, k3, n4, k4) -> complex:
        return self.engine.eri(EriKey.of(n1, k1, n2, k2, n3, k3, n4, k4))

    def amp(self, i, j, a, b, k_i, k_j, k_a) -> complex:
        return self.t(OrbitalQuadruple.from_bands(i, j, a, b), k_i, k_j, k_a)

    def external(self, quadruple: OrbitalQuadruple, k_i: KPoint, k_j: KPoint, k_a: KPoint) -> External:
        i, j, a, b = quadruple.bands()
        return External(i, j, a, b, k_i, k_j, k_a, self.k(k_i, k_j, k_a))

    # linear terms

    def _lin_4h2p(self, e: External, k_k: KPoint) -> complex:
        k_l = self.k(e.k_i, e.k_j, k_k)
        return sum(
            self.eri(k, k_k, l, k_l, e.i, e.k_i, e.j, e.k_j) * self.amp(k, l, e.a, e.b, k_k, k_l, e.k_a)
            for k in self.occ for l in self.occ
        )

    def _lin_2h4p(self, e: External, k_c: KPoint) -> complex:
        k_d = self.k(e.k_i, e.k_j, k_c)
        return sum(
            self.eri(e.a, e.k_a, e.b, e.k_b, c, k_c, d, k_d) * self.amp(e.i, e.j, c, d, e.k_i, e.k_j, k_c)
            for c in self.vir for d in self.vir
        )

    def _lin_ring(self, e: External, k_k: KPoint) -> complex:
        k_c = self.k(e.k_a, k_k, e.k_i)
        return sum(
            self.eri(e.a, e.k_a, k, k_k, e.i, e.k_i, c, k_c) * self.amp(k, e.j, c, e.b, k_k, e.k_j, k_c)
            for k in self.occ for c in self.vir
        )

    def _lin_xc1(self, e: External, k_k: KPoint) -> complex:
        k_c = self.k(e.k_a, k_k, e.k_i)
        return sum(
            self.eri(e.a, e.k_a, k, k_k, c, k_c, e.i, e.k_i) * self.amp(k, e.j, c, e.b, k_k, e.k_j, k_c)
            for k in self.occ for c in self.vir
        )

    def _lin_xc2(self, e: External, k_k: KPoint) -> complex:
        k_c = self.k(e.k_a, k_k, e.k_i)
        return sum(
            self.eri(e.a, e.k_a, k, k_k, e.i, e.k_i, c, k_c) * self.amp(k, e.j, e.b, c, k_k, e.k_j, e.k_b)
            for k in self.occ for c in self.vir
        )

    def _lin_xc3(self, e: External, k_k: KPoint) -> complex:
        k_c = self.k(e.k_a, k_k, e.k_j)
        return sum(
            self.eri(e.a, e.k_a, k, k_k, c, k_c, e.j, e.k_j) * self.amp(k, e.i, e.b, c, k_k, e.k_i, e.k_b)
            for k in self.occ for c in self.vir
        )

    # quadratic terms: outer k is summed in parallel, inner k here

    def _quad_4h2p(self, e: External, k_k: KPoint) -> complex:
        k_l = self.k(e.k_i, e.k_j, k_k)
        total = []
        for k_c in self.mesh.points:
            k_d = self.k(e.k_i, e.k_j, k_c)
            total.append(sum(
                self.eri(k, k_k, l, k_l, c, k_c, d, k_d)
                * self.amp(e.i, e.j, c, d, e.k_i, e.k_j, k_c)
                * self.amp(k, l, e.a, e.b, k_k, k_l, e.k_a)
                for k in self.occ for l in self.occ for c in self.vir for d in self.vir
            ))
        return pairwise_sum(np.array(total, dtype=complex))

    def _quad_kappa_vv(self, e: External, k_k: KPoint, exchange: bool) -> complex:
        k_c = e.k_a
        total = []
        for k_l in self.mesh.points:
            k_d = self.k(k_k, k_l, e.k_a)
            terms = []
            for k in self.occ:
                for l in self.occ:
                    for c in self.vir:
                        for d in self.vir:
                            if exchange:
                                v = self.eri(k, k_k, l, k_l, d, k_d, c, k_c)
                            else:
                                v = self.eri(k, k_k, l, k_l, c, k_c, d, k_d)
                            terms.append(
                                v * self.amp(k, l, e.a, d, k_k, k_l, e.k_a)
                                * self.amp(e.i, e.j, c, e.b, e.k_i, e.k_j, k_c)
                            )
            total.append(sum(terms))
        return pairwise_sum(np.array(total, dtype=complex))

    def _quad_kappa_oo(self, e: External, k_l: KPoint, exchange: bool) -> complex:
        k_k = e.k_i
        total = []
        for k_c in self.mesh.points:
            k_d = self.k(e.k_i, k_l, k_c)
            terms = []
            for k in self.occ:
                for l in self.occ:
                    for c in self.vir:
                        for d in self.vir:
                            if exchange:
                                v = self.eri(k, k_k, l, k_l, d, k_d, c, k_c)
                            else:
                                v = self.eri(k, k_k, l, k_l, c, k_c, d, k_d)
                            terms.append(
                                v * self.amp(e.i, l, c, d, e.k_i, k_l, k_c)
                                * self.amp(k, e.j, e.a, e.b, k_k, e.k_j, e.k_a)
                            )
            total.append(sum(terms))
        return pairwise_sum(np.array(total, dtype=complex))

    def _quad_3h3p(self, e: External, k_k: KPoint, eri_kind: str, amp_kind: str, order: str) -> complex:
        k_c = self.k(e.k_a, k_k, e.k_i)
        total = []
        for k_l in self.mesh.points:
            k_d = self.k(k_l, e.k_i, e.k_a)
            terms = []
            for k in self.occ:
                for l in self.occ:
                    for c in self.vir:
                        for d in self.vir:
                            if eri_kind == 'e1':
                                v = self.eri(l, k_l, k, k_k, d, k_d, c, k_c)
                            else:
                                v = self.eri(l, k_l, k, k_k, c, k_c, d, k_d)
                            if amp_kind == 't1':
                                first = self.amp(e.i, l, e.a, d, e.k_i, k_l, e.k_a)
                            else:
                                first = self.amp(e.i, l, d, e.a, e.k_i, k_l, k_d)
                            if order == 'cb':
                                second = self.amp(k, e.j, c, e.b, k_k, e.k_j, k_c)
                            else:
                                second = self.amp(k, e.j, e.b, c, k_k, e.k_j, e.k_b)
                            terms.append(v * first * second)
            total.append(sum(terms))
        return pairwise_sum(np.array(total, dtype=complex))

    def _quad_ki_4(self, e: External, k_k: KPoint) -> complex:
        k_c = self.k(e.k_a, k_k, e.k_j)
        total = []
        for k_l in self.mesh.points:
            k_d = self.k(k_l, e.k_j, e.k_a)
            total.append(sum(
                self.eri(l, k_l, k, k_k, c, k_c, d, k_d)
                * self.amp(e.j, l, d, e.a, e.k_j, k_l, k_d)
                * self.amp(k, e.i, e.b, c, k_k, e.k_i, e.k_b)
                for k in self.occ for l in self.occ for c in self.vir for d in self.vir
            ))
        return pairwise_sum(np.array(total, dtype=complex))

    # drivers

    def amplitude_term(self, term: TermId, quadruple: OrbitalQuadruple, k_i: KPoint, k_j: KPoint, k_a: KPoint) -> complex:
        """Diagram value divided by the external denominator."""
        ext = self.external(quadruple, k_i, k_j, k_a)
        eps = denominator(self.system, quadruple, k_i, k_j, k_a)
        if term is TermId.CONSTANT:
            return self.eri(ext.a, ext.k_a, ext.b, ext.k_b, ext.i, ext.k_i, ext.j, ext.k_j) / eps

        handler = self._handlers[term]
        partials = parallel_map(lambda k: handler(ext, k), self.mesh.points, self.threads)
        value = pairwise_sum(np.array(partials, dtype=complex))
        return complex(value / self.mesh.n_k ** CATALOG[term].order / eps)

    def energy_term(self, term: TermId, integrals: Optional[MeshIntegrals] = None, budget_gib: float = 4.0) -> complex:
        """(1/N_k^3) sum <IJ|AB> t_IJ^AB (direct) or <IJ|BA> t_IJ^AB (exchange)."""
        system = self.system
        check_budget(system.n_occ, system.n_vir, self.mesh.n_k, budget_gib, term=term.value, copies=3)
        integrals = integrals or MeshIntegrals(self.engine, self.mesh, budget_gib=budget_gib, threads=self.threads)
        amplitudes = self.t.sample(self.mesh, integrals)
        if term is TermId.ENERGY_DIRECT:
            weights = integrals.block('oovv')
        else:
            weights = integrals.exchange()
        return complex(pairwise_sum((weights * amplitudes).ravel()) / self.mesh.n_k ** 3)


def term_evaluate(
    engine: EriEngine,
    term,
    t: ExactAmplitudeFunction,
    quadruple: Optional[OrbitalQuadruple],
    k_i: Optional[KPoint],
    k_j: Optional[KPoint],
    k_a: Optional[KPoint],
    mesh: MonkhorstPackMesh,
    permuted: bool = False,
    threads: int = 1,
    budget_gib: float = 4.0,
) -> complex:
    """
    Value of one catalog term.

    Args:
        engine: ERI engine of the model system
        term: TermId or its name
        t: Exact amplitude fed into the term
        quadruple: External bands (ignored for energy terms)
        k_i, k_j, k_a: External crystal momenta, arbitrary (ignored for energy terms)
        mesh: Mesh for the internal sums
        permuted: Evaluate the (JI, BA) partner instead
        threads: Workers over the outer internal k-loop

    Returns:
        Complex term value

    Raises:
        ValueError: for an unknown term name
    """
    term = parse_term(term) if isinstance(term, str) else term
    evaluator = TermEvaluator(engine, t, mesh, threads)
    if CATALOG[term].energy:
        return evaluator.energy_term(term, budget_gib=budget_gib)

    quadruple = OrbitalQuadruple.parse(quadruple)
    quadruple.validate(engine.system.n_occ, engine.system.n_vir)
    if permuted:
        k_b = conserve_momentum(engine.system.reciprocal, k_i, k_j, k_a)
        quadruple, k_i, k_j, k_a = quadruple.swapped(), k_j, k_i, k_b
    return evaluator.amplitude_term(term, quadruple, k_i, k_j, k_a)


def term_contribution(evaluator: TermEvaluator, term: TermId, quadruple: OrbitalQuadruple,
                      k_i: KPoint, k_j: KPoint, k_a: KPoint) -> complex:
    """Coefficient times the term, plus its permuted partner where the map has one."""
    spec = CATALOG[term]
    value = evaluator.amplitude_term(term, quadruple, k_i, k_j, k_a)
    if spec.permuted:
        k_b = conserve_momentum(evaluator.system.reciprocal, k_i, k_j, k_a)
        value += evaluator.amplitude_term(term, quadruple.swapped(), k_j, k_i, k_b)
    return spec.coefficient * value


def map_entry_from_terms(evaluator: TermEvaluator, quadruple: OrbitalQuadruple,
                         k_i: KPoint, k_j: KPoint, k_a: KPoint, max_order: int = 2) -> complex:
    """One entry of the CCD map rebuilt term by term (orders up to max_order)."""
    values = [
        term_contribution(evaluator, term, quadruple, k_i, k_j, k_a)
        for term in amplitude_terms() if CATALOG[term].order <= max_order
    ]
    return complex(pairwise_sum(np.array(values, dtype=complex)))


def mp3_amplitude(
    engine: EriEngine,
    mesh: MonkhorstPackMesh,
    quadruple: OrbitalQuadruple,
    k_i: KPoint,
    k_j: KPoint,
    k_a: KPoint,
    threads: int = 1,
) -> complex:
    """Constant plus every linear term (with P partners) at the MP2 amplitude."""
    quadruple = OrbitalQuadruple.parse(quadruple)
    evaluator = TermEvaluator(engine, Mp2Amplitude(engine), mesh, threads)
    return map_entry_from_terms(evaluator, quadruple, k_i, k_j, k_a, max_order=1)


def mp3_4h2p_amplitude(
    engine: EriEngine,
    mesh: MonkhorstPackMesh,
    quadruple: OrbitalQuadruple,
    k_i: KPoint,
    k_j: KPoint,
    k_a: KPoint,
    threads: int = 1,
) -> complex:
    """MP2 amplitude plus only the hole-hole ladder correction."""
    return Mp3Ladder4h2pAmplitude(engine, mesh, threads).evaluate(OrbitalQuadruple.parse(quadruple), k_i, k_j, k_a)


class Mp3Amplitude(ExactAmplitudeFunction):
    """MP3 amplitude as an exact function; internal sums run over `mesh`."""

    tag = 'mp3'

    def __init__(self, engine: EriEngine, mesh: MonkhorstPackMesh, threads: int = 1):
        super().__init__(engine)
        self._evaluator = TermEvaluator(engine, Mp2Amplitude(engine), mesh, threads)

    def evaluate(self, quadruple: OrbitalQuadruple, k_i: KPoint, k_j: KPoint, k_a: KPoint) -> complex:
        return map_entry_from_terms(self._evaluator, quadruple, k_i, k_j, k_a, max_order=1)


class Mp3Ladder4h2pAmplitude(ExactAmplitudeFunction):
    """MP2 amplitude plus the hole-hole ladder correction."""

    tag = 'mp3_4h2p'

    def __init__(self, engine: EriEngine, mesh: MonkhorstPackMesh, threads: int = 1):
        super().__init__(engine)
        self._evaluator = TermEvaluator(engine, Mp2Amplitude(engine), mesh, threads)

    def evaluate(self, quadruple: OrbitalQuadruple, k_i: KPoint, k_j: KPoint, k_a: KPoint) -> complex:
        return (
            self._evaluator.amplitude_term(TermId.CONSTANT, quadruple, k_i, k_j, k_a)
            + self._evaluator.amplitude_term(TermId.LIN_4H2P, quadruple, k_i, k_j, k_a)
        )
