"""Self-consistent field iteration for the screened defect problem.

The fixed-point variable is the mean-field potential ``V``. One application
of the map builds the Fermi sea of ``T + V``, takes its renormalised density
``rho_Q`` and returns the Yukawa potential of ``rho_Q - nu``.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .fermi import kinetic_free_energy, renormalized_density
from .grid import DensityProfile, PhysicalParams, PotentialProfile, integrate
from .interaction import InteractionKind, dm_inner, yukawa_solve

__all__ = [
    "AndersonMixer",
    "EnergyBreakdown",
    "ScfConfig",
    "ScfNonConvergence",
    "ScfResult",
    "energy_breakdown",
    "scf_map",
    "scf_solve",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScfConfig:
    max_iter: int = 200
    tol: float = 1e-8
    mixing_alpha: float = 0.3
    anderson_depth: int = 5
    initial_potential: PotentialProfile | None = None

    def __post_init__(self):
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter!r}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol!r}")
        if not 0 < self.mixing_alpha <= 1:
            raise ValueError(f"mixing_alpha must lie in (0, 1], got {self.mixing_alpha!r}")
        if int(self.anderson_depth) != self.anderson_depth or self.anderson_depth < 0:
            raise ValueError(f"anderson_depth must be an integer >= 0, got {self.anderson_depth!r}")


@dataclass(frozen=True)
class EnergyBreakdown:
    """Kinetic and interaction parts of the free energy per unit area."""

    t_ren: float
    interaction: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.t_ren + self.interaction)


@dataclass(frozen=True, eq=False)
class ScfResult:
    converged: bool
    iterations: int
    residual_history: tuple[float, ...]
    V_final: PotentialProfile
    rho_Q: DensityProfile
    nu: DensityProfile
    params: PhysicalParams
    energy: EnergyBreakdown | None
    total_defect_charge: float

    @property
    def total_charge_density(self) -> DensityProfile:
        return self.rho_Q - self.nu

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")


class ScfNonConvergence(RuntimeError):
    """Raised when the iteration exhausts ``max_iter``; carries the partial result."""

    def __init__(self, result: ScfResult):
        self.result = result
        self.residual_history = result.residual_history
        super().__init__(
            f"SCF did not converge in {result.iterations} iterations "
            f"(last residual {result.final_residual:.3e})"
        )


class AndersonMixer:
    """Anderson-accelerated linear mixing for ``x = g(x)``.

    With ``depth == 0`` this is plain damped iteration
    ``x + alpha (g(x) - x)``. Otherwise the step is the Walker-Ni type-II
    update over the last ``depth`` differences of iterates and residuals.
    """

    def __init__(self, alpha: float, depth: int):
        self.alpha = alpha
        self.depth = depth
        self._dx = deque(maxlen=depth)
        self._dr = deque(maxlen=depth)
        self._x_prev = None
        self._r_prev = None

    def reset(self):
        self._dx.clear()
        self._dr.clear()
        self._x_prev = self._r_prev = None

    def step(self, x: np.ndarray, r: np.ndarray) -> np.ndarray:
        if self.depth == 0:
            return x + self.alpha * r
        if self._x_prev is not None:
            self._dx.append(x - self._x_prev)
            self._dr.append(r - self._r_prev)
        self._x_prev, self._r_prev = x.copy(), r.copy()
        if not self._dr:
            return x + self.alpha * r
        dX = np.column_stack(self._dx)
        dR = np.column_stack(self._dr)
        gamma, *_ = np.linalg.lstsq(dR, r, rcond=1e-12)
        return x + self.alpha * r - (dX + self.alpha * dR) @ gamma


def _check_params(params: PhysicalParams):
    if not params.m > 0:
        raise ValueError(
            f"the self-consistent iteration needs Yukawa screening m > 0, got m={params.m!r}"
        )


def scf_map(V_in: PotentialProfile, nu: DensityProfile, params: PhysicalParams) -> PotentialProfile:
    """``V -> (exp(-m|.|)/m) * (rho_Q[V] - nu)``."""
    _check_params(params)
    rho_Q = renormalized_density(V_in, params.epsilon_F)
    return yukawa_solve(rho_Q - nu, params.m)


def energy_breakdown(
    V: PotentialProfile, rho_Q: DensityProfile, nu: DensityProfile, params: PhysicalParams
) -> EnergyBreakdown:
    """Free energy per unit area of the state generated by ``V``."""
    sigma = rho_Q - nu
    return EnergyBreakdown(
        t_ren=kinetic_free_energy(V, params.epsilon_F),
        interaction=0.5 * dm_inner(sigma, sigma, InteractionKind(params.m)),
    )


def _check_support(nu: DensityProfile, m: float):
    grid = nu.grid
    amp = np.abs(nu.values)
    if not np.any(amp):
        return
    # Gaussian tails of a mollified trench are negligible; only real mass counts
    heavy = amp > 1e-12 * amp.max()
    margin = grid.half_length - np.abs(grid.nodes[heavy]).max()
    if margin < 10.0 / m:
        raise ValueError(
            f"defect extends to within {margin:.3g} of the box edge; "
            f"need a margin of at least 10/m = {10.0 / m:.3g}"
        )


def scf_solve(
    nu: DensityProfile,
    params: PhysicalParams,
    cfg: ScfConfig | None = None,
    *,
    raise_on_failure: bool = True,
    callback=None,
) -> ScfResult:
    """Iterate ``V_{k+1} = V_k + alpha (F(V_k) - V_k)`` (Anderson accelerated).

    Stops once ``max |F(V_k) - V_k| <= tol``; ``iterations`` counts
    evaluations of ``F``. On failure raises :class:`ScfNonConvergence`
    unless ``raise_on_failure`` is false, in which case the partial result is
    returned with ``converged=False``.
    """
    cfg = cfg or ScfConfig()
    _check_params(params)
    _check_support(nu, params.m)
    grid = nu.grid
    if cfg.initial_potential is None:
        V = np.zeros(grid.n_points)
    else:
        if cfg.initial_potential.grid != grid:
            raise ValueError("initial potential lives on a different grid than the defect")
        V = np.array(cfg.initial_potential.values)

    mixer = AndersonMixer(cfg.mixing_alpha, cfg.anderson_depth)
    history = []
    converged = False
    for it in range(1, cfg.max_iter + 1):
        V_prof = PotentialProfile(grid, V)
        F = scf_map(V_prof, nu, params).values
        r = F - V
        res = float(np.max(np.abs(r)))
        history.append(res)
        if callback is not None:
            callback(it, res)
        log.debug("scf iteration %d residual %.3e", it, res)
        if res <= cfg.tol:
            converged = True
            break
        V = mixer.step(V, r)
        # the boundary values are pinned by the Dirichlet condition
        V[0] = V[-1] = 0.0

    V_final = PotentialProfile(grid, V)
    rho_Q = renormalized_density(V_final, params.epsilon_F)
    energy = energy_breakdown(V_final, rho_Q, nu, params) if converged else None
    result = ScfResult(
        converged=converged,
        iterations=len(history),
        residual_history=tuple(history),
        V_final=V_final,
        rho_Q=rho_Q,
        nu=nu,
        params=params,
        energy=energy,
        total_defect_charge=integrate(rho_Q - nu),
    )
    if not converged and raise_on_failure:
        raise ScfNonConvergence(result)
    return result
