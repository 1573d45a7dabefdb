"""Uniform grid on the transverse axis and the sampled profiles living on it.

The continuum line is replaced by the box ``[-L, L]`` with homogeneous
Dirichlet conditions. The node count is odd so that ``z = 0`` is a node and
every even profile has an exact mirror axis on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import erf

__all__ = [
    "GridSpec",
    "DensityProfile",
    "PotentialProfile",
    "PhysicalParams",
    "integrate",
    "trapezoid",
    "free_gas_density",
    "fermi_level_of_density",
    "trench_defect",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``z_i = -L + i h`` on ``[-L, L]``.

    Parameters
    ----------
    half_length : float
        Half box length ``L`` (> 0).
    n_points : int
        Number of nodes, odd and at least 3.
    boundary_condition : str
        Only ``"dirichlet"`` is supported.
    """

    half_length: float
    n_points: int
    boundary_condition: str = "dirichlet"

    def __post_init__(self):
        if not np.isfinite(self.half_length) or self.half_length <= 0:
            raise ValueError(f"half_length must be > 0, got {self.half_length!r}")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ValueError(f"n_points must be an integer >= 3, got {self.n_points!r}")
        if self.n_points % 2 == 0:
            raise ValueError(f"n_points must be odd so that z=0 is a node, got {self.n_points}")
        if self.boundary_condition != "dirichlet":
            raise ValueError(
                f"unsupported boundary condition {self.boundary_condition!r} (only 'dirichlet')"
            )
        object.__setattr__(self, "half_length", float(self.half_length))
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / (self.n_points - 1)

    @property
    def center(self) -> int:
        return (self.n_points - 1) // 2

    @cached_property
    def nodes(self) -> np.ndarray:
        # Built from the centre outwards so that z[i] == -z[n-1-i] bit for bit.
        c = self.center
        z = self.spacing * (np.arange(self.n_points) - c).astype(float)
        z[0], z[-1] = -self.half_length, self.half_length
        z.flags.writeable = False
        return z

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        w.flags.writeable = False
        return w

    def refined(self) -> "GridSpec":
        """Same box with the spacing halved."""
        return GridSpec(self.half_length, 2 * self.n_points - 1, self.boundary_condition)

    def sample(self, func) -> np.ndarray:
        return np.asarray(func(self.nodes), dtype=float)


def _frozen_values(grid: GridSpec, values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.shape != (grid.n_points,):
        raise ValueError(
            f"profile has shape {arr.shape}, expected ({grid.n_points},) for this grid"
        )
    arr.flags.writeable = False
    return arr


class _Profile:
    grid: GridSpec
    values: np.ndarray

    def _check_same_grid(self, other: "_Profile"):
        if other.grid != self.grid:
            raise ValueError("profiles live on different grids")

    def __add__(self, other):
        self._check_same_grid(other)
        return type(self)(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check_same_grid(other)
        return type(self)(self.grid, self.values - other.values)

    def __neg__(self):
        return type(self)(self.grid, -self.values)

    def __mul__(self, scalar: float):
        return type(self)(self.grid, float(scalar) * self.values)

    __rmul__ = __mul__

    def __len__(self):
        return self.grid.n_points

    def mirror_asymmetry(self) -> float:
        """Sup-norm of ``f(z) - f(-z)``."""
        return float(np.max(np.abs(self.values - self.values[::-1])))


@dataclass(frozen=True, eq=False)
class DensityProfile(_Profile):
    """Signed charge density sampled on a grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_values(self.grid, self.values))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "DensityProfile":
        return cls(grid, np.zeros(grid.n_points))

    def integral(self) -> float:
        return integrate(self)


@dataclass(frozen=True, eq=False)
class PotentialProfile(_Profile):
    """Mean-field potential sampled on a grid; ``sup_norm`` is ``max |V|``."""

    grid: GridSpec
    values: np.ndarray
    sup_norm: float = field(init=False)

    def __post_init__(self):
        vals = _frozen_values(self.grid, self.values)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "sup_norm", float(np.max(np.abs(vals))))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "PotentialProfile":
        return cls(grid, np.zeros(grid.n_points))


def fermi_level_of_density(rho0: float) -> float:
    """Fermi level ``(6 pi^2 rho0)^(2/3) / 2`` of a free electron gas."""
    return 0.5 * (6.0 * np.pi**2 * rho0) ** (2.0 / 3.0)


def free_gas_density(epsilon_F: float) -> float:
    """Bulk density of the free electron gas with Fermi level ``epsilon_F``.

    >>> round(free_gas_density(2.0) * 6 * 3.141592653589793**2, 12)
    8.0
    """
    if not epsilon_F > 0:
        raise ValueError(f"epsilon_F must be > 0, got {epsilon_F!r}")
    return (2.0 * epsilon_F) ** 1.5 / (6.0 * np.pi**2)


@dataclass(frozen=True)
class PhysicalParams:
    """Fermi level ``epsilon_F`` and Yukawa screening ``m`` (``m = 0`` is Coulomb)."""

    epsilon_F: float
    m: float

    def __post_init__(self):
        if not (np.isfinite(self.epsilon_F) and self.epsilon_F > 0):
            raise ValueError(f"epsilon_F must be > 0, got {self.epsilon_F!r}")
        if not (np.isfinite(self.m) and self.m >= 0):
            raise ValueError(f"m must be >= 0, got {self.m!r}")

    @property
    def rho0(self) -> float:
        return free_gas_density(self.epsilon_F)

    def with_m(self, m: float) -> "PhysicalParams":
        return PhysicalParams(self.epsilon_F, m)


def trapezoid(values: np.ndarray, h: float) -> float:
    v = np.asarray(values, dtype=float)
    return float(h * (0.5 * v[0] + np.sum(v[1:-1]) + 0.5 * v[-1]))


def integrate(f: DensityProfile) -> float:
    """Trapezoid rule over the whole box."""
    return trapezoid(f.values, f.grid.spacing)


def trench_defect(
    grid: GridSpec, rho0: float, w: float, mollify_s: float = 0.0
) -> DensityProfile:
    """Jellium trench ``nu(z) = -rho0 * 1_{|z| <= w}``.

    With ``mollify_s > 0`` the indicator is convolved with a unit-mass
    Gaussian of standard deviation ``mollify_s``, which in closed form is
    ``(erf((w - z)/(sqrt(2) s)) + erf((w + z)/(sqrt(2) s))) / 2``.
    """
    if not 0 < w < grid.half_length:
        raise ValueError(
            f"trench half-width w={w!r} must satisfy 0 < w < L={grid.half_length}"
        )
    if mollify_s < 0:
        raise ValueError(f"mollify_s must be >= 0, got {mollify_s!r}")
    z = grid.nodes
    if mollify_s == 0:
        shape = (np.abs(z) <= w).astype(float)
    else:
        s = np.sqrt(2.0) * mollify_s
        shape = 0.5 * (erf((w - z) / s) + erf((w + z) / s))
    return DensityProfile(grid, -rho0 * shape)
