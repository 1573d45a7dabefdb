"""Screened (Yukawa) and bare Coulomb electrostatics on the line.

Potentials solve ``-V'' + m^2 V = 2 rho``; for ``m > 0`` this is the
convolution with ``exp(-m|z|)/m`` and for ``m = 0`` with ``-|z|``. The
pairing ``D_m(rho1, rho2) = int rho1 V[rho2]`` is the interaction energy per
unit area (up to the factor 1/2 for the self energy).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .grid import DensityProfile, GridSpec, PotentialProfile, integrate

__all__ = [
    "InteractionKind",
    "NonNeutralChargeError",
    "coulomb_solve",
    "dm_inner",
    "yukawa_residual",
    "yukawa_solve",
]

# m * L below which a zero Dirichlet value at the box edge is no longer exact
MIN_SCREENING_LENGTHS = 30.0


class NonNeutralChargeError(ValueError):
    def __init__(self, total_charge: float, tol: float):
        self.total_charge = total_charge
        self.tol = tol
        super().__init__(
            f"Coulomb potential needs a neutral density: total charge {total_charge:.6g} "
            f"exceeds tolerance {tol:.3g}"
        )


@dataclass(frozen=True)
class InteractionKind:
    """Yukawa interaction with parameter ``m > 0``, or Coulomb when ``m == 0``."""

    m: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.m) and self.m >= 0):
            raise ValueError(f"interaction parameter m must be >= 0, got {self.m!r}")

    @classmethod
    def yukawa(cls, m: float) -> "InteractionKind":
        if not m > 0:
            raise ValueError(f"Yukawa interaction needs m > 0, got {m!r}")
        return cls(float(m))

    @classmethod
    def coulomb(cls) -> "InteractionKind":
        return cls(0.0)

    @property
    def is_coulomb(self) -> bool:
        return self.m == 0.0

    def potential(self, rho: DensityProfile) -> PotentialProfile:
        return coulomb_solve(rho) if self.is_coulomb else yukawa_solve(rho, self.m)


def _yukawa_bands(grid: GridSpec, m: float) -> np.ndarray:
    """Banded storage of ``-d^2/dz^2 + m^2`` on the interior nodes."""
    h2 = grid.spacing**2
    n_inner = grid.n_points - 2
    ab = np.empty((3, n_inner))
    ab[0, :] = -1.0 / h2
    ab[1, :] = 2.0 / h2 + m * m
    ab[2, :] = -1.0 / h2
    return ab


def yukawa_solve(rho: DensityProfile, m: float) -> PotentialProfile:
    """Solve ``-V'' + m^2 V = 2 rho`` with ``V(+-L) = 0``.

    The zero boundary value is exact to double precision only when
    ``m L >= 30``; smaller boxes trigger a ``RuntimeWarning``.
    """
    if not m > 0:
        raise ValueError(f"yukawa_solve needs m > 0 (got {m!r}); use coulomb_solve for m = 0")
    grid = rho.grid
    if m * grid.half_length < MIN_SCREENING_LENGTHS:
        warnings.warn(
            f"m*L = {m * grid.half_length:.3g} < {MIN_SCREENING_LENGTHS:g}: "
            "zero boundary value of the Yukawa potential is not exact",
            RuntimeWarning,
            stacklevel=2,
        )
    V = np.zeros(grid.n_points)
    if np.any(rho.values):
        V[1:-1] = solve_banded((1, 1), _yukawa_bands(grid, m), 2.0 * rho.values[1:-1])
    return PotentialProfile(grid, V)


def yukawa_residual(V: PotentialProfile, rho: DensityProfile, m: float) -> np.ndarray:
    """Discrete ``-V'' + m^2 V - 2 rho`` on the interior nodes."""
    v = V.values
    h2 = V.grid.spacing**2
    lap = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / h2
    return -lap + m * m * v[1:-1] - 2.0 * rho.values[1:-1]


def coulomb_solve(rho: DensityProfile, neutrality_tol: float | None = None) -> PotentialProfile:
    """``V(z) = -int |z - z'| rho(z') dz'`` by trapezoid quadrature.

    The density must be neutral: ``|int rho| <= neutrality_tol``, by default
    ``1e-6 * int |rho|``.
    """
    grid = rho.grid
    total = integrate(rho)
    if neutrality_tol is None:
        neutrality_tol = 1e-6 * float(grid.weights @ np.abs(rho.values))
    if abs(total) > neutrality_tol:
        raise NonNeutralChargeError(total, neutrality_tol)
    z = grid.nodes
    q = grid.weights * rho.values
    # split |z - z'| into the parts left and right of z, each a prefix sum
    c_left = np.cumsum(q)
    m_left = np.cumsum(q * z)
    c_right = c_left[-1] - c_left
    m_right = m_left[-1] - m_left
    V = -((z * c_left - m_left) + (m_right - z * c_right))
    return PotentialProfile(grid, V)


def _as_kind(kind) -> InteractionKind:
    if isinstance(kind, InteractionKind):
        return kind
    return InteractionKind(float(kind))


def dm_inner(rho1: DensityProfile, rho2: DensityProfile, kind) -> float:
    """Interaction pairing ``D_m(rho1, rho2) = int rho1 * V[rho2] dz``.

    ``kind`` is an :class:`InteractionKind` or a bare ``m`` (0 for Coulomb).
    """
    kind = _as_kind(kind)
    if rho1.grid != rho2.grid:
        raise ValueError("densities live on different grids")
    V = kind.potential(rho2)
    return float(rho1.grid.weights @ (rho1.values * V.values))
