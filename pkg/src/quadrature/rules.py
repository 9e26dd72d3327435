"""
Trapezoidal rules on the periodic unit cube V = [-1/2, 1/2]^d.

A uniform mesh with m points per axis and offset delta has nodes
(j + delta)/m, wrapped into V. Sums use pairwise reduction.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..utils.parallel import pairwise_sum

logger = logging.getLogger(__name__)

PUNCTURE_TOL = 1e-10


def wrap(x: np.ndarray) -> np.ndarray:
    """Periodic image in [-1/2, 1/2)."""
    x = np.asarray(x, dtype=float)
    return x - np.floor(x + 0.5)


def periodic_distance(x: np.ndarray, location) -> np.ndarray:
    """Distance (mod 1 per axis) from points (last axis d) to a location."""
    return np.linalg.norm(wrap(np.asarray(x) - np.asarray(location, dtype=float)), axis=-1)


@dataclass(frozen=True)
class CubeDomain:
    """V = [-1/2, 1/2]^d with |V| = 1."""

    dimension: int

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"Cube dimension must be 1, 2 or 3, got {self.dimension}")

    @property
    def volume(self) -> float:
        return 1.0

    def axis(self, m: int, offset: float = 0.0) -> np.ndarray:
        if m < 1:
            raise ValueError(f"Mesh size must be positive, got {m}")
        return wrap((np.arange(m) + offset) / m)

    def grid(self, m: int, offset: float = 0.0) -> np.ndarray:
        """Nodes as an array of shape (m,)*d + (d,), axis order = index order."""
        axis = self.axis(m, offset)
        return np.stack(np.meshgrid(*([axis] * self.dimension), indexing='ij'), axis=-1)

    def nodes(self, m: int, offset: float = 0.0) -> np.ndarray:
        """Flat (m^d, d) node list."""
        return self.grid(m, offset).reshape(-1, self.dimension)


def trapezoid(f: Callable[[np.ndarray], np.ndarray], m: int, dimension: int = 3, offset: float = 0.0):
    """
    Q_V(f, X) = |V|/|X| sum_{x in X} f(x) on the uniform m^d mesh.

    Args:
        f: Vectorised integrand taking an (n, d) array of points
        m: Points per axis
        dimension: d
        offset: Mesh offset in units of the spacing

    Returns:
        Rule value (real or complex, following f)
    """
    domain = CubeDomain(dimension)
    values = np.asarray(f(domain.nodes(m, offset)))
    return pairwise_sum(values) * domain.volume / m ** dimension


def punctured_trapezoid(integrand, m: int, offset: float = 0.0):
    """
    Trapezoid rule with the integrand set to zero at every node within
    PUNCTURE_TOL (mod 1) of a declared singular point.
    """
    return integrand.rule(m, offset)


def puncture_shift(f: Callable[[np.ndarray], np.ndarray], m: int, dimension: int, location, offset: float = 0.0):
    """
    Change of the rule when the node at `location` is punctured.

    Returns:
        (plain - punctured, |V|/m^d * f(location)); the two agree whenever
        `location` is a mesh node
    """
    domain = CubeDomain(dimension)
    nodes = domain.nodes(m, offset)
    values = np.asarray(f(nodes))
    hit = periodic_distance(nodes, location) <= PUNCTURE_TOL
    punctured = np.where(hit, 0.0, values)
    plain = pairwise_sum(values) / m ** dimension
    reduced = pairwise_sum(punctured) / m ** dimension
    node_value = np.asarray(f(np.asarray(location, dtype=float).reshape(1, dimension)))[0]
    expected = domain.volume * node_value / m ** dimension if hit.any() else 0.0
    return plain - reduced, expected
