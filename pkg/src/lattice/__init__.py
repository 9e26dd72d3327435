"""
Lattice arithmetic: unit cells, k-points, Monkhorst-Pack meshes.
"""

from .cell import UnitCell, ReciprocalCell, KPoint, fold_to_bz, conserve_momentum
from .mesh import MonkhorstPackMesh, MeshScheme, build_mp_mesh, induced_q_mesh

__all__ = [
    'UnitCell', 'ReciprocalCell', 'KPoint', 'fold_to_bz', 'conserve_momentum',
    'MonkhorstPackMesh', 'MeshScheme', 'build_mp_mesh', 'induced_q_mesh',
]
