"""
Small model systems shared by the test modules.
"""

from functools import lru_cache

from src.eri import EriEngine
from src.lattice import UnitCell
from src.meanfield import EigensolverSettings, ModelSystem, PlanewaveBasis, PotentialSpec

MODEL_CENTER = [0.5, 0.5, 0.5]
MODEL_SIGMA = [0.1, 0.2, 0.3]


def small_system(
    n_pw: int = 4,
    strength: float = -200.0,
    n_bands=None,
    n_vir: int = 1,
    settings: EigensolverSettings = None,
) -> ModelSystem:
    """A fresh reduced-basis model system (own band cache)."""
    return ModelSystem(
        UnitCell.cubic(1.0),
        PotentialSpec.from_stddev(MODEL_CENTER, MODEL_SIGMA, strength),
        PlanewaveBasis(n_pw),
        n_occ=1,
        n_vir=n_vir,
        n_bands=n_bands,
        settings=settings or EigensolverSettings(residual_tol=1e-8),
    )


@lru_cache(maxsize=None)
def shared_engine(n_pw: int = 4, n_vir: int = 1) -> EriEngine:
    """ERI engine reused across tests; its caches only ever grow."""
    return EriEngine(small_system(n_pw, n_vir=n_vir), cache_gib=0.25)
