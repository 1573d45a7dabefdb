"""Built-in self checks run by ``fermi-slab validate``.

Each check compares a production code path against an independent oracle
(dense eigendecomposition, brute-force quadrature, or a manufactured
closed-form solution) and returns a plain dict with the measured value and
the bound it must satisfy.
"""

from __future__ import annotations

import numpy as np

from . import interaction
from .fermi import (
    assemble_density,
    kinetic_free_energy,
    oracle_density_quadrature,
    oracle_kinetic_quadrature,
    renormalized_density,
    spectrum_below_fermi,
    free_spectrum,
)
from .grid import DensityProfile, GridSpec, PotentialProfile, free_gas_density
from .spectral import build_hamiltonian, sturm_count

__all__ = ["random_potential", "manufactured_yukawa_error", "coulomb_bump_error", "run_checks"]

SEED = 20240611


def random_potential(grid: GridSpec, rng: np.random.Generator, amplitude: float = 0.6,
                     n_bumps: int = 4) -> PotentialProfile:
    """Sum of Gaussian bumps of random sign, centre and width, vanishing at the box edge."""
    z = grid.nodes
    L = grid.half_length
    v = np.zeros_like(z)
    for _ in range(n_bumps):
        c = rng.uniform(-0.5 * L, 0.5 * L)
        s = rng.uniform(0.3, 0.12 * L)
        v += rng.uniform(-amplitude, amplitude) * np.exp(-0.5 * ((z - c) / s) ** 2)
    v[0] = v[-1] = 0.0
    return PotentialProfile(grid, v)


def manufactured_yukawa_error(m: float, L: float, n: int) -> float:
    """Max error of the Yukawa solve for ``V = exp(-z^2/2)``."""
    grid = GridSpec(L, n)
    z = grid.nodes
    exact = np.exp(-0.5 * z**2)
    rho = DensityProfile(grid, 0.5 * (1.0 - z**2 + m * m) * exact)
    V = interaction.yukawa_solve(rho, m)
    return float(np.max(np.abs(V.values - exact)))


def coulomb_bump_error(L: float, n: int) -> float:
    """Max error of the Coulomb potential of ``rho = -f''/2`` with ``f = (1 - z^2)^4``.

    The density is neutral with zero dipole, so the potential is ``f`` itself.
    """
    grid = GridSpec(L, n)
    z = grid.nodes
    inside = np.abs(z) < 1.0
    u = np.where(inside, 1.0 - z**2, 0.0)
    f = u**4
    f2 = np.where(inside, -8.0 * u**3 + 48.0 * z**2 * u**2, 0.0)
    V = interaction.coulomb_solve(DensityProfile(grid, -0.5 * f2))
    return float(np.max(np.abs(V.values - f)))


def _check(name, value, bound, passed, **extra) -> dict:
    out = {"name": name, "value": float(value), "bound": bound, "passed": bool(passed)}
    out.update(extra)
    return out


def run_checks(seed: int = SEED) -> list[dict]:
    rng = np.random.default_rng(seed)
    eF = 2.0
    checks = []

    small = GridSpec(8.0, 161)
    V = random_potential(small, rng)
    rho = assemble_density(spectrum_below_fermi(V, eF), eF).values
    ref = oracle_density_quadrature(V, eF, 4000).values
    rel = np.linalg.norm(rho - ref) / np.linalg.norm(ref)
    checks.append(_check("density_vs_q_quadrature", rel, 1e-4, rel <= 1e-4))

    t = kinetic_free_energy(V, eF)
    t_ref = oracle_kinetic_quadrature(V, eF)
    rel = abs(t - t_ref) / max(abs(t_ref), 1e-300)
    checks.append(_check("kinetic_vs_mu_quadrature", rel, 1e-8, rel <= 1e-8))
    checks.append(_check("kinetic_nonnegative", t, ">= 0", t >= -1e-12 * (eF + V.sup_norm)))

    H = build_hamiltonian(small, V)
    spec = spectrum_below_fermi(V, eF)
    count = sturm_count(H.diagonal, H.off_diagonal, eF)
    checks.append(_check("sturm_count", abs(count - spec.eigenvalues.size), 0, count == spec.eigenvalues.size))

    for m in (1.0, 4.0):
        coarse = manufactured_yukawa_error(m, 30.0, 301)
        fine = manufactured_yukawa_error(m, 30.0, 601)
        ratio = coarse / fine if fine > 0 else np.inf
        checks.append(_check(f"yukawa_order_m{m:g}", ratio, [3.5, 4.5],
                             3.5 <= ratio <= 4.5 and fine < 1e-3, error_fine=fine))

    coarse, fine = coulomb_bump_error(4.0, 401), coulomb_bump_error(4.0, 801)
    ratio = coarse / fine if fine > 0 else np.inf
    checks.append(_check("coulomb_bump_order", ratio, [3.5, 4.5],
                         3.5 <= ratio <= 4.5 and fine < 1e-3, error_fine=fine))

    box = GridSpec(60.0, 2001)
    rho0 = free_gas_density(eF)
    plateau = assemble_density(free_spectrum(box, eF), eF).values[np.abs(box.nodes) <= 5.0]
    rel = float(np.max(np.abs(plateau - rho0)) / rho0)
    checks.append(_check("free_gas_plateau", rel, 5e-3, rel <= 5e-3))
    rq = float(np.max(np.abs(renormalized_density(PotentialProfile.zeros(box), eF).values)))
    checks.append(_check("free_rho_Q_zero", rq, 1e-12, rq <= 1e-12))
    return checks
