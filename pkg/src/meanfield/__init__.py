"""
Mean-field band structure of the model solid.
"""

from .potential import PotentialSpec, PlanewaveBasis, potential_fourier
from .states import BandStates, fix_gauge
from .cache import BandCache
from .solver import (
    EigensolverSettings, ModelSystem, apply_hamiltonian, dense_hamiltonian,
    dense_solve, solve_at_k, direct_gap, band_path,
)

__all__ = [
    'PotentialSpec', 'PlanewaveBasis', 'potential_fourier',
    'BandStates', 'fix_gauge', 'BandCache',
    'EigensolverSettings', 'ModelSystem', 'apply_hamiltonian', 'dense_hamiltonian',
    'dense_solve', 'solve_at_k', 'direct_gap', 'band_path',
]
