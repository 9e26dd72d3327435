"""
Orbital labels and the catalog of individual diagram terms.

Every product appearing in the CCD amplitude map is one TermId. Each entry
records the coefficient it carries inside the map, whether it sits under the
pair permutation P (IJ,AB) -> (JI,BA), and its order in the amplitude.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Tuple


@dataclass(frozen=True)
class OrbitalQuadruple:
    """
    Band labels (i, j, a, b), 1-based over the band list: holes are
    1..n_occ and particles n_occ+1..n_occ+n_vir.
    """

    i: int
    j: int
    a: int
    b: int

    @classmethod
    def parse(cls, value) -> 'OrbitalQuadruple':
        if isinstance(value, OrbitalQuadruple):
            return value
        if isinstance(value, str):
            value = [int(v) for v in value.replace(' ', '').split(',')]
        i, j, a, b = (int(v) for v in value)
        return cls(i, j, a, b)

    def validate(self, n_occ: int, n_vir: int) -> None:
        for name, value in (('i', self.i), ('j', self.j)):
            if not 1 <= value <= n_occ:
                raise ValueError(f"Hole index {name}={value} outside [1, {n_occ}]")
        for name, value in (('a', self.a), ('b', self.b)):
            if not n_occ < value <= n_occ + n_vir:
                raise ValueError(f"Particle index {name}={value} outside [{n_occ + 1}, {n_occ + n_vir}]")

    def bands(self) -> Tuple[int, int, int, int]:
        """0-based band indices."""
        return self.i - 1, self.j - 1, self.a - 1, self.b - 1

    @classmethod
    def from_bands(cls, i: int, j: int, a: int, b: int) -> 'OrbitalQuadruple':
        return cls(i + 1, j + 1, a + 1, b + 1)

    def swapped(self) -> 'OrbitalQuadruple':
        """(JI, BA) partner used by the permutation operator."""
        return OrbitalQuadruple(self.j, self.i, self.b, self.a)

    def __str__(self) -> str:
        return f"({self.i},{self.j},{self.a},{self.b})"


class TermId(str, Enum):
    ENERGY_DIRECT = 'energy_direct'
    ENERGY_EXCHANGE = 'energy_exchange'
    CONSTANT = 'constant'
    LIN_4H2P = 'lin_4h2p'
    LIN_2H4P = 'lin_2h4p'
    LIN_3H3P_RING = 'lin_3h3p_ring'
    LIN_3H3P_XC1 = 'lin_3h3p_xc1'
    LIN_3H3P_XC2 = 'lin_3h3p_xc2'
    LIN_3H3P_XC3 = 'lin_3h3p_xc3'
    QUAD_4H2P = 'quad_4h2p'
    QUAD_KAPPA_VV_DIRECT = 'quad_kappa_vv_direct'
    QUAD_KAPPA_VV_EXCHANGE = 'quad_kappa_vv_exchange'
    QUAD_KAPPA_OO_DIRECT = 'quad_kappa_oo_direct'
    QUAD_KAPPA_OO_EXCHANGE = 'quad_kappa_oo_exchange'
    QUAD_3H3P_SUPER = 'quad_3h3p_super'
    QUAD_3H3P_CB_2 = 'quad_3h3p_cb_2'
    QUAD_3H3P_CB_3 = 'quad_3h3p_cb_3'
    QUAD_3H3P_CB_4 = 'quad_3h3p_cb_4'
    QUAD_3H3P_BC_1 = 'quad_3h3p_bc_1'
    QUAD_3H3P_BC_2 = 'quad_3h3p_bc_2'
    QUAD_3H3P_BC_3 = 'quad_3h3p_bc_3'
    QUAD_3H3P_KI_4 = 'quad_3h3p_ki_4'


@dataclass(frozen=True)
class TermSpec:
    """How a term enters the CCD map."""

    coefficient: float
    permuted: bool
    order: int  # power of the amplitude; energies count as 1
    expression: str
    energy: bool = False


CATALOG: Dict[TermId, TermSpec] = {
    TermId.ENERGY_DIRECT: TermSpec(1.0, False, 1, '<IJ|AB> t_IJ^AB', energy=True),
    TermId.ENERGY_EXCHANGE: TermSpec(1.0, False, 1, '<IJ|BA> t_IJ^AB', energy=True),
    TermId.CONSTANT: TermSpec(1.0, False, 0, '<AB|IJ>'),
    TermId.LIN_4H2P: TermSpec(1.0, False, 1, '<KL|IJ> t_KL^AB'),
    TermId.LIN_2H4P: TermSpec(1.0, False, 1, '<AB|CD> t_IJ^CD'),
    TermId.LIN_3H3P_RING: TermSpec(2.0, True, 1, '<AK|IC> t_KJ^CB'),
    TermId.LIN_3H3P_XC1: TermSpec(-1.0, True, 1, '<AK|CI> t_KJ^CB'),
    TermId.LIN_3H3P_XC2: TermSpec(-1.0, True, 1, '<AK|IC> t_KJ^BC'),
    TermId.LIN_3H3P_XC3: TermSpec(-1.0, True, 1, '<AK|CJ> t_KI^BC'),
    TermId.QUAD_4H2P: TermSpec(1.0, False, 2, '<KL|CD> t_IJ^CD t_KL^AB'),
    TermId.QUAD_KAPPA_VV_DIRECT: TermSpec(-2.0, True, 2, '<KL|CD> t_KL^AD t_IJ^CB'),
    TermId.QUAD_KAPPA_VV_EXCHANGE: TermSpec(1.0, True, 2, '<KL|DC> t_KL^AD t_IJ^CB'),
    TermId.QUAD_KAPPA_OO_DIRECT: TermSpec(-2.0, True, 2, '<KL|CD> t_IL^CD t_KJ^AB'),
    TermId.QUAD_KAPPA_OO_EXCHANGE: TermSpec(1.0, True, 2, '<KL|DC> t_IL^CD t_KJ^AB'),
    TermId.QUAD_3H3P_SUPER: TermSpec(2.0, True, 2, '<LK|DC> t_IL^AD t_KJ^CB'),
    TermId.QUAD_3H3P_CB_2: TermSpec(-1.0, True, 2, '<LK|CD> t_IL^AD t_KJ^CB'),
    TermId.QUAD_3H3P_CB_3: TermSpec(-1.0, True, 2, '<LK|DC> t_IL^DA t_KJ^CB'),
    TermId.QUAD_3H3P_CB_4: TermSpec(0.5, True, 2, '<LK|CD> t_IL^DA t_KJ^CB'),
    TermId.QUAD_3H3P_BC_1: TermSpec(-1.0, True, 2, '<LK|DC> t_IL^AD t_KJ^BC'),
    TermId.QUAD_3H3P_BC_2: TermSpec(0.5, True, 2, '<LK|CD> t_IL^AD t_KJ^BC'),
    TermId.QUAD_3H3P_BC_3: TermSpec(0.5, True, 2, '<LK|DC> t_IL^DA t_KJ^BC'),
    TermId.QUAD_3H3P_KI_4: TermSpec(0.5, True, 2, '<LK|CD> t_JL^DA t_KI^BC'),
}


def parse_term(name: str) -> TermId:
    """
    Raises:
        ValueError: for an unknown term name
    """
    try:
        return TermId(name)
    except ValueError:
        known = ', '.join(t.value for t in TermId)
        raise ValueError(f"Unknown term '{name}'. Known terms: {known}") from None


def amplitude_terms():
    """Catalog entries that contribute to the CCD map."""
    return [term for term, spec in CATALOG.items() if not spec.energy]
