"""
Synthetic periodic integrands realising the five integral classes.

Building blocks are the radial bump eta(r) = exp(-1/(1 - (2r)^2)) on r < 1/2
and the profile

    S_gamma(y) = eta(|y|) * alpha(y/|y|) * |y|^gamma,  alpha(u) = (1 + u_1)^2 / 4,

which has an algebraic singularity of order gamma at y = 0 (the angular
factor keeps order 0 from being smooth). Arguments are wrapped into
[-1/2, 1/2)^d, so every factor is periodic.

Classes:
    1  periodised Gaussian, no singularity
    2  S_gamma(x)
    3  S_gamma(x) S_0(x - z)
    4  S_g1(x1) S_g2(x2) G(x1 - x2)        on V x V
    5  S_g1(x1) S_g2(x2) S_0(x2 +/- x1)    on V x V
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft
from scipy import integrate
from scipy.special import gamma as gamma_function

from ..utils.errors import ConfigError
from ..utils.parallel import pairwise_sum
from .rules import PUNCTURE_TOL, CubeDomain, periodic_distance, wrap

logger = logging.getLogger(__name__)

GAUSSIAN_WIDTH = 0.15


def bump(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 0.5
    out[inside] = np.exp(-1.0 / (1.0 - (2.0 * r[inside]) ** 2))
    return out


def power_profile(y: np.ndarray, order: float) -> np.ndarray:
    """S_gamma on wrapped arguments (last axis d); inf/nan only at y = 0."""
    y = wrap(y)
    r = np.linalg.norm(y, axis=-1)
    with np.errstate(divide='ignore', invalid='ignore'):
        u1 = np.where(r > 0, y[..., 0] / np.where(r > 0, r, 1.0), 0.0)
        radial = np.where(r > 0, r ** order, np.inf if order < 0 else 0.0)
    return bump(r) * (1.0 + u1) ** 2 / 4.0 * radial


def gaussian_profile(y: np.ndarray, width: float = GAUSSIAN_WIDTH) -> np.ndarray:
    """Gaussian periodised over the nearest images."""
    y = wrap(y)
    d = y.shape[-1]
    total = np.zeros(y.shape[:-1])
    for image in itertools.product((-1, 0, 1), repeat=d):
        shifted = y + np.array(image, dtype=float)
        total += np.exp(-np.einsum('...i,...i->...', shifted, shifted) / (2.0 * width ** 2))
    return total


def power_profile_integral(order: float, dimension: int) -> float:
    """Closed form of the integral of S_gamma over V via the radial integral."""
    sphere = 2.0 * np.pi ** (dimension / 2.0) / gamma_function(dimension / 2.0)
    angular = sphere * (1.0 + 1.0 / dimension) / 4.0
    radial, _ = integrate.quad(lambda r: bump(np.array(r)) * r ** (order + dimension - 1), 0.0, 0.5, limit=200)
    return float(angular * radial)


@dataclass(frozen=True)
class Factor:
    """
    One factor h(c . x - location) of an integrand.

    coefficients: integer weight of each variable in the argument
    kind: 'power' (S_order) or 'gaussian'
    """

    coefficients: Tuple[int, ...]
    kind: str
    order: float = 0.0
    location: Tuple[float, ...] = ()

    def argument(self, variables: Sequence[np.ndarray]) -> np.ndarray:
        arg = sum(c * v for c, v in zip(self.coefficients, variables) if c)
        if self.location:
            arg = arg - np.asarray(self.location, dtype=float)
        return arg

    def profile(self, y: np.ndarray) -> np.ndarray:
        if self.kind == 'power':
            return power_profile(y, self.order)
        return gaussian_profile(y)

    @property
    def singular(self) -> bool:
        return self.kind == 'power'

    def values(self, variables: Sequence[np.ndarray], punctured: bool = True) -> np.ndarray:
        y = self.argument(variables)
        out = self.profile(y)
        if punctured and self.singular:
            origin = np.zeros(y.shape[-1])
            out = np.where(periodic_distance(y, origin) <= PUNCTURE_TOL, 0.0, out)
        return out


@dataclass(frozen=True, eq=False)
class SingularIntegrand:
    """
    Product of factors on V^n_vars.

    Points are arrays whose last axis has length n_vars * d (variables
    concatenated).
    """

    integral_class: int
    dimension: int
    n_vars: int
    factors: Tuple[Factor, ...]
    exact: Optional[float] = None
    description: str = ''
    shift: Tuple[float, ...] = field(default=())

    @property
    def singular_points(self) -> List[Tuple[Tuple[int, ...], Tuple[float, ...], float]]:
        """(argument coefficients, location, order) for every singular factor."""
        zero = (0.0,) * self.dimension
        return [(f.coefficients, f.location or zero, f.order) for f in self.factors if f.singular]

    @property
    def expected_rate(self) -> Optional[float]:
        """d + min order over singular factors; None for a smooth integrand."""
        orders = [f.order for f in self.factors if f.singular]
        if not orders:
            return None
        return self.dimension + min(orders)

    def split(self, points: np.ndarray) -> List[np.ndarray]:
        points = np.asarray(points, dtype=float)
        d = self.dimension
        return [points[..., v * d:(v + 1) * d] for v in range(self.n_vars)]

    def __call__(self, points: np.ndarray, punctured: bool = False) -> np.ndarray:
        variables = self.split(points)
        with np.errstate(invalid='ignore'):
            out = np.ones(variables[0].shape[:-1])
            for factor in self.factors:
                out = out * factor.values(variables, punctured=punctured)
        return out

    def factor_function(self, index: int):
        """Profile of one factor as a function of its own argument."""
        return self.factors[index].profile

    def check_mesh(self, m: int) -> None:
        """
        Raises:
            ValueError: if a class-3 shift is closer than 4/m to the origin
        """
        if self.integral_class == 3 and self.shift:
            distance = float(np.linalg.norm(wrap(np.asarray(self.shift))))
            if distance < 4.0 / m:
                raise ValueError(f"Class-3 shift |z| = {distance:.4f} is below 4/m = {4.0 / m:.4f}")

    def rule(self, m: int, offset: float = 0.0) -> float:
        """Punctured trapezoid rule on the m^(n_vars d) product mesh."""
        self.check_mesh(m)
        domain = CubeDomain(self.dimension)
        if self.n_vars == 1:
            nodes = domain.nodes(m, offset)
            return float(pairwise_sum(self(nodes, punctured=True)) / m ** self.dimension)
        return self._product_rule(m, offset)

    def brute_force_rule(self, m: int, offset: float = 0.0) -> float:
        """Direct sum over all m^(2d) node pairs; only for small meshes."""
        domain = CubeDomain(self.dimension)
        nodes = domain.nodes(m, offset)
        n = len(nodes)
        pairs = np.concatenate([np.repeat(nodes, n, axis=0), np.tile(nodes, (n, 1))], axis=1)
        return float(pairwise_sum(self(pairs, punctured=True)) / m ** (self.n_vars * self.dimension))

    def _product_rule(self, m: int, offset: float) -> float:
        """
        Two-variable rule as sum_{x1} A(x1) sum_{x2} B(x2) H(c1 x1 + c2 x2)
        with the inner sum done as a circular convolution.
        """
        d = self.dimension
        domain = CubeDomain(d)
        grid = domain.grid(m, offset)
        a = np.ones((m,) * d)
        b = np.ones((m,) * d)
        coupling = None
        for factor in self.factors:
            c1, c2 = factor.coefficients
            if c1 and c2:
                if coupling is not None or abs(c2) != 1 or abs(c1) != 1:
                    raise ValueError("Product rule supports one coupling factor with unit coefficients")
                coupling = factor
            elif c1:
                a = a * factor.values([grid, None])
            else:
                b = b * factor.values([None, grid])

        axes = tuple(range(d))
        if coupling is None:
            return float(pairwise_sum(a) * pairwise_sum(b) / m ** (2 * d))

        c1, c2 = coupling.coefficients
        # H[n] = h((n + (c1 + c2) offset)/m)
        h_grid = domain.grid(m, (c1 + c2) * offset)
        h = _coupling_values(coupling, h_grid)
        if c2 == 1:
            b_eff = np.roll(np.flip(b, axis=axes), 1, axis=axes)
        else:
            b_eff = b
        inner = sfft.irfftn(sfft.rfftn(b_eff) * sfft.rfftn(h), s=(m,) * d)
        idx = [np.mod(c1 * np.arange(m), m)] * d
        gathered = inner[np.ix_(*idx)]
        return float(pairwise_sum(a * gathered) / m ** (2 * d))


def _coupling_values(factor: Factor, y_grid: np.ndarray) -> np.ndarray:
    """Punctured profile of a coupling factor evaluated directly on its argument grid."""
    y = y_grid - np.asarray(factor.location, dtype=float) if factor.location else y_grid
    out = factor.profile(y)
    if factor.singular:
        out = np.where(periodic_distance(y, np.zeros(y.shape[-1])) <= PUNCTURE_TOL, 0.0, out)
    return out


def synthetic_integrand(
    integral_class: int,
    dimension: int = 3,
    orders: Sequence[float] = (0.0,),
    shift: Optional[Sequence[float]] = None,
    sign: int = 1,
) -> SingularIntegrand:
    """
    Build an integrand of one of the five classes.

    Args:
        integral_class: 1..5
        dimension: d of each variable
        orders: gamma (classes 2, 3) or (gamma_1, gamma_2) (classes 4, 5)
        shift: location z of the order-0 factor (class 3)
        sign: +1 or -1 in the class-5 argument x2 +/- x1

    Raises:
        ConfigError: for an invalid class, order or sign
    """
    if integral_class not in (1, 2, 3, 4, 5):
        raise ConfigError(f"Integral class must be 1..5, got {integral_class}")
    if dimension not in (1, 2, 3):
        raise ConfigError(f"Dimension must be 1, 2 or 3, got {dimension}")
    orders = [float(g) for g in (orders if isinstance(orders, (list, tuple)) else [orders])]
    needed = {1: 0, 2: 1, 3: 1, 4: 2, 5: 2}[integral_class]
    if len(orders) < needed:
        raise ConfigError(f"Class {integral_class} needs {needed} singularity order(s), got {len(orders)}")
    for g in orders[:needed]:
        if g < -dimension + 1:
            raise ConfigError(f"Order {g} is below -d+1 = {-dimension + 1} for class {integral_class}")

    if integral_class == 1:
        width = GAUSSIAN_WIDTH
        exact = float((2.0 * np.pi * width ** 2) ** (dimension / 2.0))
        return SingularIntegrand(1, dimension, 1, (Factor((1,), 'gaussian'),), exact, 'periodised Gaussian')

    if integral_class == 2:
        g = orders[0]
        return SingularIntegrand(
            2, dimension, 1, (Factor((1,), 'power', g),),
            power_profile_integral(g, dimension), f'S_{g:g}(x)',
        )

    if integral_class == 3:
        g = orders[0]
        z = tuple(float(v) for v in (shift if shift is not None else (0.25,) + (0.0,) * (dimension - 1)))
        if len(z) != dimension:
            raise ConfigError(f"Shift has {len(z)} components, expected {dimension}")
        if np.linalg.norm(wrap(np.asarray(z))) <= PUNCTURE_TOL:
            raise ConfigError("Class-3 shift must be away from the origin")
        factors = (Factor((1,), 'power', g), Factor((1,), 'power', 0.0, z))
        return SingularIntegrand(3, dimension, 1, factors, None, f'S_{g:g}(x) S_0(x - z)', shift=z)

    g1, g2 = orders[0], orders[1]
    if integral_class == 4:
        factors = (Factor((1, 0), 'power', g1), Factor((0, 1), 'power', g2), Factor((1, -1), 'gaussian'))
        return SingularIntegrand(4, dimension, 2, factors, None, f'S_{g1:g}(x1) S_{g2:g}(x2) G(x1 - x2)')

    if sign not in (1, -1):
        raise ConfigError(f"Class-5 sign must be +1 or -1, got {sign}")
    factors = (Factor((1, 0), 'power', g1), Factor((0, 1), 'power', g2), Factor((sign, 1), 'power', 0.0))
    symbol = '+' if sign > 0 else '-'
    return SingularIntegrand(5, dimension, 2, factors, None, f'S_{g1:g}(x1) S_{g2:g}(x2) S_0(x2 {symbol} x1)')
