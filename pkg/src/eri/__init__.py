"""
Electron repulsion integrals: pair densities, pointwise ERIs, mesh ERI blocks.
"""

from .integrals import (
    PUNCTURE_TOL, PairDensity, EriKey, EriEngine,
    pair_density, eri, antisymmetrized_eri,
)
from .tensor import mesh_eri_tensor, tensor_bytes

__all__ = [
    'PUNCTURE_TOL', 'PairDensity', 'EriKey', 'EriEngine',
    'pair_density', 'eri', 'antisymmetrized_eri',
    'mesh_eri_tensor', 'tensor_bytes',
]
