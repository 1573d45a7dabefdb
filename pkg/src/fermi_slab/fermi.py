"""Quasimomentum-integrated densities and kinetic free energy.

A fiber with in-plane momentum ``q`` carries ``H + |q|^2/2``. Integrating the
Fermi projector over ``q`` in polar coordinates and substituting
``mu = eps_F - |q|^2/2`` turns the 2D integral into the occupation weight
``(eps_F - lambda_j)_+ / (2 pi)`` per 1D eigenpair, so the density and the
renormalised kinetic energy are plain sums over the spectrum below ``eps_F``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import DensityProfile, GridSpec, PotentialProfile
from .spectral import SpectralDecomposition, build_hamiltonian, eigendecompose

__all__ = [
    "QFiberSample",
    "assemble_density",
    "free_spectrum",
    "kinetic_free_energy",
    "occupation_weights",
    "oracle_density_quadrature",
    "oracle_kinetic_quadrature",
    "renormalized_density",
    "spectrum_below_fermi",
]


@dataclass(frozen=True)
class QFiberSample:
    """One fiber label ``|q|`` and its effective Fermi level ``eps_F - |q|^2/2``."""

    q_norm: float
    epsilon_F: float

    def __post_init__(self):
        if self.q_norm < 0:
            raise ValueError("q_norm must be >= 0")

    @property
    def effective_fermi(self) -> float:
        return self.epsilon_F - 0.5 * self.q_norm**2

    def in_ball(self, R: float) -> bool:
        """Membership of ``q`` in the open ball ``|q|^2/2 < R``."""
        return 0.5 * self.q_norm**2 < R


def occupation_weights(eigenvalues: np.ndarray, epsilon_F: float) -> np.ndarray:
    return np.maximum(epsilon_F - np.asarray(eigenvalues), 0.0) / (2.0 * np.pi)


def spectrum_below_fermi(V: PotentialProfile, epsilon_F: float) -> SpectralDecomposition:
    return eigendecompose(build_hamiltonian(V.grid, V), epsilon_F)


@lru_cache(maxsize=32)
def free_spectrum(grid: GridSpec, epsilon_F: float) -> SpectralDecomposition:
    """Spectrum of the free fiber operator below ``epsilon_F`` (cached per grid)."""
    return spectrum_below_fermi(PotentialProfile.zeros(grid), epsilon_F)


def assemble_density(spec: SpectralDecomposition, epsilon_F: float) -> DensityProfile:
    """``rho(z) = (1/2pi) sum_j (eps_F - lambda_j)_+ psi_j(z)^2``."""
    if spec.cutoff < epsilon_F:
        raise ValueError(
            f"spectral cutoff {spec.cutoff} is below epsilon_F={epsilon_F}; occupied states missing"
        )
    w = occupation_weights(spec.eigenvalues, epsilon_F)
    if w.size == 0:
        return DensityProfile.zeros(spec.grid)
    return DensityProfile(spec.grid, spec.densities() @ w)


def renormalized_density(V: PotentialProfile, epsilon_F: float) -> DensityProfile:
    """Density of ``Q = 1(T + V <= eps_F) - 1(T <= eps_F)``.

    Both terms use the same grid and boundary condition, so the box-wall
    contributions cancel.
    """
    if V.sup_norm == 0.0:
        return DensityProfile.zeros(V.grid)
    rho = assemble_density(spectrum_below_fermi(V, epsilon_F), epsilon_F)
    rho_free = assemble_density(free_spectrum(V.grid, epsilon_F), epsilon_F)
    return rho - rho_free


def _mean_potential(spec: SpectralDecomposition, V: PotentialProfile) -> np.ndarray:
    """``<psi_j, V psi_j>`` by the trapezoid rule (boundary rows are zero)."""
    return spec.grid.spacing * (V.values @ spec.densities())


def kinetic_free_energy(V: PotentialProfile, epsilon_F: float) -> float:
    """Renormalised kinetic free energy per unit area of the state induced by ``V``.

    The integrand over ``mu`` is piecewise linear between eigenvalues, which
    gives the closed form::

        2pi T = sum_j [(eF - l_j)(t_j - l_j) - (eF - l_j)^2 / 2]
              + sum_k (eF - tau_k)^2 / 2

    with ``l_j`` the eigenvalues of ``T0 + V``, ``t_j = l_j - <psi_j, V psi_j>``
    and ``tau_k`` the free eigenvalues.
    """
    if V.sup_norm == 0.0:
        return 0.0
    spec = spectrum_below_fermi(V, epsilon_F)
    lam = spec.eigenvalues
    occ = epsilon_F - lam
    kinetic = lam - _mean_potential(spec, V)
    perturbed = math.fsum(occ * (kinetic - lam) - 0.5 * occ**2)
    tau = free_spectrum(V.grid, epsilon_F).eigenvalues
    free = math.fsum(0.5 * (epsilon_F - tau) ** 2)
    return (perturbed + free) / (2.0 * np.pi)


def _dense_eigh(V: PotentialProfile) -> tuple[np.ndarray, np.ndarray]:
    H = build_hamiltonian(V.grid, V).to_dense()
    lam, vec = np.linalg.eigh(H)
    full = np.zeros((V.grid.n_points, lam.size))
    full[1:-1] = vec / np.sqrt(V.grid.spacing)
    return lam, full


def oracle_density_quadrature(
    V: PotentialProfile,
    epsilon_F: float,
    n_q: int,
    q_range: tuple[float, float] | None = None,
) -> DensityProfile:
    """Brute-force ``(2pi)^-2 int rho_{gamma_q} dq`` by radial midpoint quadrature.

    Each fiber ``q`` is occupied up to ``eps_F - |q|^2/2`` using a dense
    eigendecomposition (independent of the Sturm/inverse-iteration path).
    The default radial range ``[0, sqrt(2 (eps_F + max|V|))]`` covers every
    fiber that can hold a state. Meant for tests; cost grows with ``n_q``.
    """
    if n_q < 2:
        raise ValueError(f"n_q must be >= 2, got {n_q}")
    if q_range is None:
        q_range = (0.0, math.sqrt(2.0 * (epsilon_F + V.sup_norm)))
    q_lo, q_hi = q_range
    lam, psi = _dense_eigh(V)
    dq = (q_hi - q_lo) / n_q
    q = q_lo + dq * (np.arange(n_q) + 0.5)
    # number of occupied states in each fiber
    counts = np.searchsorted(lam, epsilon_F - 0.5 * q**2, side="right")
    # weight of state j = sum of |q| dq over fibers that occupy it
    per_count = np.bincount(counts, weights=q * dq, minlength=lam.size + 1)
    state_weight = np.cumsum(per_count[::-1])[::-1][1:] / (2.0 * np.pi)
    used = state_weight > 0
    return DensityProfile(V.grid, psi[:, used] ** 2 @ state_weight[used])


def oracle_kinetic_quadrature(V: PotentialProfile, epsilon_F: float, gauss_order: int = 3) -> float:
    """``(1/2pi) int_{-inf}^{eF} Tr[(T0 - mu)(P_V(mu) - P_0(mu))] dmu`` numerically.

    The trace is evaluated with dense matrices and dense eigendecompositions;
    the ``mu`` integral uses Gauss-Legendre on every interval between
    consecutive eigenvalues.
    """
    grid = V.grid
    H = build_hamiltonian(grid, V).to_dense()
    T0 = build_hamiltonian(grid, PotentialProfile.zeros(grid)).to_dense()
    lam, vec = np.linalg.eigh(H)
    tau = np.linalg.eigvalsh(T0)
    t_diag = np.sum(vec * (T0 @ vec), axis=0)

    def integrand(mu: float) -> float:
        occ = lam <= mu
        free_occ = tau <= mu
        return math.fsum(t_diag[occ] - mu) - math.fsum(tau[free_occ] - mu)

    breaks = np.concatenate([lam[lam < epsilon_F], tau[tau < epsilon_F]])
    if breaks.size == 0:
        return 0.0
    breaks = np.unique(np.concatenate([breaks, [epsilon_F]]))
    nodes, weights = np.polynomial.legendre.leggauss(gauss_order)
    total = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        total.extend(half * wi * integrand(mid + half * xi) for xi, wi in zip(nodes, weights))
    return math.fsum(total) / (2.0 * np.pi)
