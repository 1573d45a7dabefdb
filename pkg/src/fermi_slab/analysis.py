"""Post-processing: Friedel-oscillation fits, screening sweeps, charge checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .grid import DensityProfile, PhysicalParams, PotentialProfile, fermi_level_of_density, trapezoid
from .scf import ScfConfig, ScfNonConvergence, ScfResult, scf_solve

__all__ = [
    "ChargeReport",
    "FriedelFit",
    "MSweepReport",
    "SweepAborted",
    "SweepEntry",
    "friedel_fit",
    "neutrality_report",
    "richardson_zero_limit",
    "sweep_m",
]

MIN_FIT_SAMPLES = 10


@dataclass(frozen=True)
class FriedelFit:
    """Best fit of ``rho(z) - rho0 = a cos(2 eps z + delta) / |z|^3`` on a window.

    ``rms_residual`` is measured on the ``|z|^3``-weighted data, i.e. in the
    same units as ``a``. ``eps_over_kF`` divides the fitted frequency
    parameter by ``sqrt(2 eps_F)``. ``decay_exponent`` is set only when the
    exponent was freed.
    """

    a: float
    delta: float
    eps: float
    window: tuple[float, float]
    rms_residual: float
    eps_over_kF: float
    n_samples: int
    degenerate: bool = False
    decay_exponent: float | None = None
    decay_exponent_stderr: float | None = None

    def model(self, z: np.ndarray, rho0: float = 0.0) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return rho0 + self.a * np.cos(2.0 * self.eps * z + self.delta) / np.abs(z) ** 3


def _linear_part(eps: float, z: np.ndarray, y: np.ndarray):
    basis = np.column_stack([np.cos(2.0 * eps * z), np.sin(2.0 * eps * z)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    resid = y - basis @ coef
    return coef, float(resid @ resid)


def _envelope_exponent(z: np.ndarray, r: np.ndarray) -> tuple[float, float]:
    """Slope of ``log |r|`` against ``log z`` at the local maxima of ``|r|``."""
    a = np.abs(r)
    inner = np.arange(1, a.size - 1)
    peaks = inner[(a[inner] >= a[inner - 1]) & (a[inner] > a[inner + 1])]
    if peaks.size < 3:
        raise ValueError("too few oscillation extrema in the window to fit a decay exponent")
    # parabolic refinement of each extremum on the sampled grid
    y0, y1, y2 = a[peaks - 1], a[peaks], a[peaks + 1]
    denom = y0 - 2.0 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        shift = np.where(denom != 0, 0.5 * (y0 - y2) / denom, 0.0)
    h = z[1] - z[0]
    zp = z[peaks] + shift * h
    ap = y1 - 0.25 * (y0 - y2) * shift
    X = np.column_stack([np.ones(zp.size), np.log(zp)])
    coef, *_ = np.linalg.lstsq(X, np.log(ap), rcond=None)
    resid = np.log(ap) - X @ coef
    dof = max(zp.size - 2, 1)
    cov = (resid @ resid / dof) * np.linalg.inv(X.T @ X)
    return -float(coef[1]), float(math.sqrt(cov[1, 1]))


def friedel_fit(
    total_density: DensityProfile,
    rho0: float,
    window: tuple[float, float],
    free_exponent: bool = False,
    *,
    defect_half_width: float | None = None,
    eps_range: tuple[float, float] | None = None,
    n_scan: int = 600,
) -> FriedelFit:
    """Fit Friedel oscillations of ``total_density`` on ``z_lo <= z <= z_hi``.

    Variable projection: for each trial ``eps`` the amplitude and phase enter
    linearly, so only ``eps`` is searched (a scan over ``eps_range``, default
    ``[0.5, 1.5] * sqrt(2 eps_F)``, then golden-section refinement). With
    ``free_exponent`` the decay power ``p`` of ``|z|^-p`` is estimated by
    regressing the log of the oscillation extrema on ``log z``.
    """
    grid = total_density.grid
    z_lo, z_hi = map(float, window)
    epsilon_F = fermi_level_of_density(rho0)
    k_F = math.sqrt(2.0 * epsilon_F)
    if not 0 < z_lo < z_hi:
        raise ValueError(f"window must satisfy 0 < z_lo < z_hi, got {window}")
    if z_hi > grid.half_length - 5.0:
        raise ValueError(
            f"window end {z_hi} is within 5 of the box edge L={grid.half_length}"
        )
    if defect_half_width is not None and z_lo < defect_half_width + 2.0:
        raise ValueError(
            f"window start {z_lo} is closer than 2 to the defect edge {defect_half_width}"
        )
    if z_hi - z_lo < 3.0 * math.pi / k_F:
        raise ValueError(
            f"window [{z_lo}, {z_hi}] holds fewer than 3 oscillation periods "
            f"(needs length >= {3.0 * math.pi / k_F:.3g})"
        )
    z_all = grid.nodes
    mask = (z_all >= z_lo) & (z_all <= z_hi)
    if mask.sum() < MIN_FIT_SAMPLES:
        raise ValueError(f"window holds {int(mask.sum())} samples, need at least {MIN_FIT_SAMPLES}")
    z = z_all[mask]
    r = total_density.values[mask] - rho0
    y = r * np.abs(z) ** 3

    lo, hi = eps_range if eps_range is not None else (0.5 * k_F, 1.5 * k_F)
    scan = np.linspace(lo, hi, n_scan)
    rss = np.array([_linear_part(e, z, y)[1] for e in scan])
    i = int(np.argmin(rss))
    step = scan[1] - scan[0]
    bracket_lo, bracket_hi = scan[max(i - 1, 0)], scan[min(i + 1, n_scan - 1)]
    if i in (0, n_scan - 1):
        eps_best = float(scan[i])
    else:
        opt = minimize_scalar(
            lambda e: _linear_part(e, z, y)[1],
            bracket=(bracket_lo, scan[i], bracket_hi),
            method="golden",
            tol=1e-12,
        )
        eps_best = float(opt.x) if opt.fun <= rss[i] else float(scan[i])
        if not bracket_lo - step <= eps_best <= bracket_hi + step:
            eps_best = float(scan[i])

    (c_cos, c_sin), rss_best = _linear_part(eps_best, z, y)
    a = math.hypot(c_cos, c_sin)
    delta = math.atan2(-c_sin, c_cos)
    if delta == -math.pi:
        delta = math.pi
    rms = math.sqrt(rss_best / z.size)
    p = p_err = None
    if free_exponent:
        p, p_err = _envelope_exponent(z, r)
    return FriedelFit(
        a=a,
        delta=delta,
        eps=eps_best,
        window=(z_lo, z_hi),
        rms_residual=rms,
        eps_over_kF=eps_best / k_F,
        n_samples=int(z.size),
        degenerate=bool(a <= rms),
        decay_exponent=p,
        decay_exponent_stderr=p_err,
    )


class ChargeReport(NamedTuple):
    """Total defect charge and a Richardson estimate of its quadrature error."""

    charge: float
    quadrature_error: float


def neutrality_report(result: ScfResult) -> ChargeReport:
    """``int (rho_Q - nu)`` with the error estimate ``|I_h - I_2h| / 3``."""
    sigma = (result.rho_Q - result.nu).values
    h = result.rho_Q.grid.spacing
    fine = trapezoid(sigma, h)
    coarse = trapezoid(sigma[::2], 2.0 * h) if sigma.size >= 5 else fine
    return ChargeReport(fine, abs(fine - coarse) / 3.0)


@dataclass(frozen=True)
class SweepEntry:
    m: float
    energy: float
    charge: float
    iterations: int
    result: ScfResult = field(repr=False)


def richardson_zero_limit(ms, energies) -> float:
    """Value at ``m = 0`` of the quadratic in ``m^2`` through the given points."""
    x = np.asarray(ms, dtype=float) ** 2
    y = np.asarray(energies, dtype=float)
    total = 0.0
    for i in range(x.size):
        others = np.delete(x, i)
        total += y[i] * np.prod(others / (others - x[i]))
    return float(total)


@dataclass(frozen=True)
class MSweepReport:
    """Converged energies and charges along a decreasing list of ``m``."""

    entries: tuple[SweepEntry, ...]
    extrapolated_I0: float | None
    monotonicity_margin: float | None
    complete: bool = True

    SLACK = 1e-10

    @property
    def ms(self) -> np.ndarray:
        return np.array([e.m for e in self.entries])

    @property
    def energies(self) -> np.ndarray:
        return np.array([e.energy for e in self.entries])

    @property
    def charges(self) -> np.ndarray:
        return np.array([e.charge for e in self.entries])

    @property
    def is_monotone(self) -> bool:
        return self.monotonicity_margin is None or self.monotonicity_margin >= -self.SLACK

    @property
    def charge_strictly_decreasing(self) -> bool:
        c = np.abs(self.charges)
        return bool(np.all(np.diff(c) < 0))


class SweepAborted(RuntimeError):
    def __init__(self, report: MSweepReport, failure: ScfNonConvergence):
        self.report = report
        self.failure = failure
        super().__init__(f"sweep aborted after {len(report.entries)} values of m: {failure}")


def _build_report(entries: list[SweepEntry], complete: bool) -> MSweepReport:
    energies = np.array([e.energy for e in entries])
    margin = float(np.min(np.diff(energies))) if len(entries) > 1 else None
    extrap = None
    if len(entries) >= 3:
        last = entries[-3:]
        extrap = richardson_zero_limit([e.m for e in last], [e.energy for e in last])
    elif entries and all(e.energy == 0.0 for e in entries):
        extrap = 0.0
    return MSweepReport(tuple(entries), extrap, margin, complete)


def sweep_m(
    nu: DensityProfile,
    params: PhysicalParams,
    m_list,
    cfg: ScfConfig | None = None,
    callback=None,
) -> MSweepReport:
    """Solve for each ``m`` in a strictly decreasing list, warm-starting each solve.

    The energy should be non-decreasing along the list; the report records
    the smallest consecutive gap as ``monotonicity_margin``. ``extrapolated_I0``
    is the Richardson estimate of the ``m -> 0`` energy from the last three
    points, extrapolated in ``m^2``.
    """
    ms = [float(m) for m in m_list]
    if not ms:
        raise ValueError("m_list is empty")
    if any(m <= 0 for m in ms):
        raise ValueError(f"all m must be > 0, got {ms}")
    if any(b >= a for a, b in zip(ms, ms[1:])):
        raise ValueError(f"m_list must be strictly decreasing, got {ms}")
    cfg = cfg or ScfConfig()
    entries: list[SweepEntry] = []
    V_prev: PotentialProfile | None = cfg.initial_potential
    for m in ms:
        run_cfg = ScfConfig(cfg.max_iter, cfg.tol, cfg.mixing_alpha, cfg.anderson_depth, V_prev)
        try:
            res = scf_solve(nu, params.with_m(m), run_cfg)
        except ScfNonConvergence as exc:
            raise SweepAborted(_build_report(entries, complete=False), exc) from exc
        entries.append(SweepEntry(m, res.energy.total, res.total_defect_charge, res.iterations, res))
        if callback is not None:
            callback(entries[-1])
        V_prev = res.V_final
    return _build_report(entries, complete=True)
