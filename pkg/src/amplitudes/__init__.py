"""
MP2/MP3/CCD amplitudes, energies and the individual diagram terms.
"""

from .catalog import OrbitalQuadruple, TermId, TermSpec, CATALOG, parse_term, amplitude_terms
from .blocks import (
    AmplitudeTensor, DenominatorTable, MeshIntegrals,
    amplitude_bytes, check_budget, denominator,
)
from .exact import ExactAmplitudeFunction, Mp2Amplitude, mp2_amplitude, sample_on_mesh
from .ccd import (
    CcdIntermediates, build_intermediates, ccd_map, ccd_solve,
    energy, energy_parts, mp3_tensor,
)
from .terms import (
    TermEvaluator, term_evaluate, term_contribution, map_entry_from_terms,
    mp3_amplitude, mp3_4h2p_amplitude, Mp3Amplitude, Mp3Ladder4h2pAmplitude,
)

__all__ = [
    'OrbitalQuadruple', 'TermId', 'TermSpec', 'CATALOG', 'parse_term', 'amplitude_terms',
    'AmplitudeTensor', 'DenominatorTable', 'MeshIntegrals',
    'amplitude_bytes', 'check_budget', 'denominator',
    'ExactAmplitudeFunction', 'Mp2Amplitude', 'mp2_amplitude', 'sample_on_mesh',
    'CcdIntermediates', 'build_intermediates', 'ccd_map', 'ccd_solve',
    'energy', 'energy_parts', 'mp3_tensor',
    'TermEvaluator', 'term_evaluate', 'term_contribution', 'map_entry_from_terms',
    'mp3_amplitude', 'mp3_4h2p_amplitude', 'Mp3Amplitude', 'Mp3Ladder4h2pAmplitude',
]
