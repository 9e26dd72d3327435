"""
Numerical estimate of the algebraic singularity order at a point, and the
partially integrated function check for two-variable products.

The estimator samples finite-difference derivatives of order 0, 1 and 2
along rays x0 + t*u at radii t0 * 2^-j, fits log|D| against log t and
reports gamma = median(slope + order). When no derivative grows as t
shrinks the point is reported smooth and `order` holds the lower bound
MAX_DERIVATIVE + 1.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft

from .integrands import power_profile
from .rules import CubeDomain

logger = logging.getLogger(__name__)

MAX_DERIVATIVE = 2
AMBIGUITY_SPREAD = 0.3
GROWTH_SLOPE = -0.3


@dataclass
class SingularityProfile:
    location: Tuple[float, ...]
    order: float
    singular: bool
    ambiguous: bool = False
    slopes: Dict[Tuple[int, int], float] = field(default_factory=dict)
    per_order: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'location': list(self.location), 'order': self.order, 'singular': self.singular,
            'ambiguous': self.ambiguous,
            'slopes': {f'{d}:{o}': s for (d, o), s in self.slopes.items()},
            'per_order': {str(k): v for k, v in self.per_order.items()},
        }


def default_directions(dimension: int) -> np.ndarray:
    """Coordinate axes plus two skew directions (unit length)."""
    axes = list(np.eye(dimension))
    if dimension > 1:
        skew = np.array([1.0, 0.7, 0.3][:dimension])
        axes.append(skew / np.linalg.norm(skew))
        skew2 = np.array([-0.4, 1.0, 0.6][:dimension])
        axes.append(skew2 / np.linalg.norm(skew2))
    return np.array(axes)


def _perpendicular(u: np.ndarray) -> Optional[np.ndarray]:
    d = len(u)
    if d == 1:
        return None
    if d == 2:
        return np.array([-u[1], u[0]])
    axis = np.eye(3)[int(np.argmin(np.abs(u)))]
    return np.cross(u, axis)


def _derivative(f, points: np.ndarray, w: np.ndarray, h: np.ndarray, order: int) -> np.ndarray:
    """|directional derivative| of the given order with steps h (per point)."""
    if order == 0:
        return np.abs(f(points))
    plus = f(points + h[:, None] * w)
    minus = f(points - h[:, None] * w)
    if order == 1:
        return np.abs(plus - minus) / (2.0 * h)
    return np.abs(plus - 2.0 * f(points) + minus) / h ** 2


def estimate_order(
    f: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    directions: Optional[np.ndarray] = None,
    radii: Optional[Sequence[float]] = None,
    vectorized: bool = True,
) -> SingularityProfile:
    """
    Estimate the order gamma with |d^a f(x)| ~ |x - x0|^(gamma - |a|).

    Args:
        f: Function of points (n, d); scalar functions with vectorized=False
        x0: Candidate singular point
        directions: Ray directions (n_dir, d); need not be unit vectors
        radii: Sample radii along each ray, default 0.1 * 2^-j for j < 6

    Returns:
        SingularityProfile; `ambiguous` when per-order estimates spread
        more than AMBIGUITY_SPREAD
    """
    x0 = np.asarray(x0, dtype=float)
    d = len(x0)
    directions = default_directions(d) if directions is None else np.atleast_2d(np.asarray(directions, dtype=float))
    radii = np.asarray(radii if radii is not None else 0.1 * 2.0 ** -np.arange(6), dtype=float)
    if not vectorized:
        scalar = f
        f = lambda pts: np.array([scalar(p) for p in pts])  # noqa: E731

    slopes: Dict[Tuple[int, int], float] = {}
    for n_dir, u in enumerate(directions):
        steps = [u]
        transverse = _perpendicular(u)
        if transverse is not None:
            steps.append(transverse)
        points = x0 + radii[:, None] * u
        h = radii / 8.0
        for order in range(MAX_DERIVATIVE + 1):
            magnitude = np.zeros(len(radii))
            for w in steps[:1] if order == 0 else steps:
                with np.errstate(all='ignore'):
                    magnitude = magnitude + _derivative(f, points, w, h, order)
            good = np.isfinite(magnitude) & (magnitude > 1e-300)
            if good.sum() < 2:
                continue
            slope = np.polyfit(np.log(radii[good]), np.log(magnitude[good]), 1)[0]
            slopes[(n_dir, order)] = float(slope)

    if not slopes:
        raise ValueError(f"No usable derivative samples near {tuple(x0)}")

    location = tuple(float(v) for v in x0)
    if not any(s < GROWTH_SLOPE for s in slopes.values()):
        logger.info(f"No singularity detected at {location}")
        return SingularityProfile(location, float(MAX_DERIVATIVE + 1), False, False, slopes)

    per_order: Dict[int, float] = {}
    for order in range(MAX_DERIVATIVE + 1):
        estimates = [s + order for (_, o), s in slopes.items() if o == order]
        if estimates:
            per_order[order] = float(np.median(estimates))
    estimate = float(np.median([s + o for (_, o), s in slopes.items()]))
    spread = max(per_order.values()) - min(per_order.values())
    ambiguous = spread > AMBIGUITY_SPREAD
    if ambiguous:
        logger.warning(f"Singularity order at {location} is ambiguous: per-order estimates {per_order}")
    return SingularityProfile(location, estimate, True, ambiguous, slopes, per_order)


def grid_function(values: np.ndarray, m: int) -> Callable[[np.ndarray], np.ndarray]:
    """
    Look up a function tabulated on the Gamma-centred m^d mesh.

    Raises:
        ValueError: if a requested point is not a mesh node
    """
    d = values.ndim

    def lookup(points: np.ndarray) -> np.ndarray:
        scaled = np.asarray(points, dtype=float).reshape(-1, d) * m
        index = np.rint(scaled)
        if np.max(np.abs(scaled - index)) > 1e-6:
            raise ValueError("Requested point is not on the tabulation mesh")
        index = np.mod(index.astype(np.int64), m)
        return values[tuple(index.T)]

    return lookup


def correlated_rule(gamma1: float, gamma2: float, dimension: int, m: int) -> np.ndarray:
    """
    F_m(y) = (1/m^d) sum_x S_g1(x) S_g2(x - y) for every mesh node y, by FFT.
    Both factors are punctured at their singular node.
    """
    domain = CubeDomain(dimension)
    grid = domain.grid(m)
    a = power_profile(grid, gamma1)
    b = power_profile(grid, gamma2)
    origin = (0,) * dimension
    a[origin] = 0.0
    b[origin] = 0.0
    # sum_x a[x] b[x - y] = ifft(fft(a) * conj(fft(b)))[y] for real b
    values = sfft.irfftn(sfft.rfftn(a) * np.conj(sfft.rfftn(b)), s=a.shape)
    return values / m ** dimension


def partially_integrated(
    gamma1: float,
    gamma2: float,
    dimension: int,
    meshes: Sequence[int],
    rates: Sequence[float] = (1.0, 2.0),
) -> Tuple[np.ndarray, int]:
    """
    F(y) = int S_g1(x) S_g2(x - y) dx on the coarsest mesh of `meshes`,
    Richardson-extrapolated in the given error exponents.

    Meshes must double successively, one more mesh than exponents.

    Returns:
        (values on the coarsest m^d mesh, coarsest m)
    """
    meshes = sorted(int(m) for m in meshes)
    if len(meshes) != len(rates) + 1:
        raise ValueError(f"Need {len(rates) + 1} meshes for {len(rates)} Richardson steps, got {len(meshes)}")
    if any(b != 2 * a for a, b in zip(meshes, meshes[1:])):
        raise ValueError(f"Meshes must double successively, got {meshes}")

    coarse = meshes[0]
    levels: List[np.ndarray] = []
    for m in meshes:
        step = m // coarse
        full = correlated_rule(gamma1, gamma2, dimension, m)
        levels.append(full[(slice(None, None, step),) * dimension])
        logger.info(f"Partially integrated function tabulated at m={m}")

    for rate in rates:
        factor = 2.0 ** rate
        levels = [(factor * fine - coarse_level) / (factor - 1.0) for coarse_level, fine in zip(levels, levels[1:])]
    return levels[0], coarse


def nonsmooth_order_check(
    gamma1: float = -1.0,
    gamma2: float = 0.0,
    dimension: int = 2,
    meshes: Sequence[int] = (1024, 2048, 4096),
    offset_cells: Sequence[int] = (64, 32, 16),
) -> SingularityProfile:
    """
    Order of the partially integrated function at y = 0, expected to be
    max(gamma1, gamma2).

    Sample radii are whole multiples of 8 mesh cells so the finite-difference
    steps land on mesh nodes; rays use integer directions.
    """
    values, m = partially_integrated(gamma1, gamma2, dimension, meshes)
    lookup = grid_function(values, m)
    radii = np.array(offset_cells, dtype=float) / m
    if dimension == 1:
        directions = np.array([[1.0], [-1.0]])
    elif dimension == 2:
        directions = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
    else:
        directions = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    profile = estimate_order(lookup, np.zeros(dimension), directions=directions, radii=radii)
    logger.info(f"Partially integrated order at y=0: {profile.order:.3f} (expected {max(gamma1, gamma2)})")
    return profile

