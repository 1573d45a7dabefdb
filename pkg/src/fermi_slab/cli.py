"""Command-line entry point ``fermi-slab``.

Subcommands::

    fermi-slab solve        --config run.ini --out out/
    fermi-slab sweep-m      --config run.ini --out out/
    fermi-slab fit-friedel  --config run.ini --out out/ [--input out/density.csv]
    fermi-slab free-gas     --config run.ini --out out/
    fermi-slab validate     [--out out/]

Exit codes: 0 ok, 1 unexpected error, 2 configuration or input error,
3 SCF non-convergence (partial outputs are still written), 4 validation
failure. Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import SweepAborted, friedel_fit, neutrality_report, sweep_m
from .config import ConfigError, RunConfig, config_hash, load_config
from .grid import DensityProfile, GridSpec, PhysicalParams, PotentialProfile, free_gas_density, trench_defect
from .scf import ScfConfig, ScfResult, scf_solve

log = logging.getLogger("fermi_slab")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_VALIDATION = 4

DENSITY_COLUMNS = ("z", "nu", "rho_Q", "rho_total", "V")


class InputError(ValueError):
    """Input file inconsistent with the configuration (reported with exit code 2)."""


def _fmt(x: float) -> str:
    return format(float(x) + 0.0, ".17g")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _clean(obj):
    """Replace non-finite floats by None so the output stays strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path: Path, payload: dict):
    text = json.dumps(_clean(payload), indent=2, sort_keys=True, default=_json_default)
    path.write_text(text + "\n", encoding="utf-8")


def _header(cfg: RunConfig, m: float | None = None) -> str:
    m = cfg.physics.m if m is None else m
    return (
        f"# fermi_slab {__version__} config_sha256={config_hash(cfg)} "
        f"L={_fmt(cfg.grid.L)} n={cfg.grid.n} epsilon_F={_fmt(cfg.physics.epsilon_F)} m={_fmt(m)}"
    )


def write_csv(path: Path, header: str, columns: tuple[str, ...], rows):
    lines = [header, ",".join(columns)]
    lines.extend(",".join(_fmt(v) if not isinstance(v, (int, np.integer)) else str(v) for v in row)
                 for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _provenance(cfg: RunConfig, command: str) -> dict:
    return {
        "tool": "fermi_slab",
        "version": __version__,
        "command": command,
        "config_sha256": config_hash(cfg),
        "config": cfg.to_dict(),
    }


# -- problem setup ---------------------------------------------------------

def build_grid(cfg: RunConfig) -> GridSpec:
    return GridSpec(cfg.grid.L, cfg.grid.n)


def build_params(cfg: RunConfig, m: float | None = None) -> PhysicalParams:
    return PhysicalParams(cfg.physics.epsilon_F, cfg.physics.m if m is None else m)


def build_defect(cfg: RunConfig, grid: GridSpec) -> DensityProfile:
    """Trench, or a ``z,nu`` CSV interpolated onto the grid (zero outside its range)."""
    d = cfg.defect
    rho0 = free_gas_density(cfg.physics.epsilon_F)
    if d.type == "trench":
        nu = trench_defect(grid, rho0, d.w, d.mollify_s)
        return DensityProfile(grid, d.depth_scale * nu.values)
    try:
        data = np.loadtxt(d.file, delimiter=",", comments="#", ndmin=2,
                          skiprows=_header_rows(Path(d.file)))
    except OSError as exc:
        raise ConfigError(f"cannot read defect file: {exc}", key="defect.file") from exc
    except ValueError as exc:
        raise ConfigError(f"defect file is not numeric 'z,nu' CSV: {exc}", key="defect.file") from exc
    if data.shape[1] < 2 or np.any(np.diff(data[:, 0]) <= 0):
        raise ConfigError("defect file needs columns z,nu with strictly increasing z", key="defect.file")
    nu = np.interp(grid.nodes, data[:, 0], data[:, 1], left=0.0, right=0.0)
    return DensityProfile(grid, d.depth_scale * nu)


def _header_rows(path: Path) -> int:
    """Number of leading non-numeric lines (comments are skipped by loadtxt anyway)."""
    with path.open(encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            s = line.strip()
            if s.startswith("#") or not s:
                continue
            try:
                float(s.split(",")[0])
            except ValueError:
                return i + 1
            return 0
    return 0


def scf_config(cfg: RunConfig, initial: PotentialProfile | None = None) -> ScfConfig:
    s = cfg.scf
    return ScfConfig(s.max_iter, s.tol, s.mixing_alpha, s.anderson_depth, initial)


def _energy_dict(result: ScfResult) -> dict | None:
    if result.energy is None:
        return None
    e = result.energy
    return {"t_ren": e.t_ren, "interaction": e.interaction, "total": e.total}


# -- commands --------------------------------------------------------------

def cmd_solve(cfg: RunConfig, out: Path) -> int:
    grid = build_grid(cfg)
    params = build_params(cfg)
    nu = build_defect(cfg, grid)
    log.info("solving: L=%g n=%d epsilon_F=%g m=%g", grid.half_length, grid.n_points,
             params.epsilon_F, params.m)
    result = scf_solve(
        nu, params, scf_config(cfg), raise_on_failure=False,
        callback=lambda it, r: log.debug("iteration %d residual %.3e", it, r),
    )
    rho_total = params.rho0 + nu.values + result.rho_Q.values
    if "csv" in cfg.output.formats:
        rows = zip(grid.nodes, nu.values, result.rho_Q.values, rho_total, result.V_final.values)
        write_csv(out / "density.csv", _header(cfg), DENSITY_COLUMNS, rows)
    charge = neutrality_report(result)
    summary = _provenance(cfg, "solve")
    summary.update(
        converged=result.converged,
        iterations=result.iterations,
        residual_history=list(result.residual_history),
        final_residual=result.final_residual,
        energy=_energy_dict(result),
        I=result.energy.total if result.energy else None,
        total_defect_charge=result.total_defect_charge,
        charge_quadrature_error=charge.quadrature_error,
        rho0=params.rho0,
        mirror_asymmetry=result.V_final.mirror_asymmetry(),
    )
    if "json" in cfg.output.formats:
        write_json(out / "summary.json", summary)
    if not result.converged:
        log.error("SCF did not converge in %d iterations (residual %.3e)",
                  result.iterations, result.final_residual)
        return EXIT_NONCONVERGED
    log.info("converged in %d iterations, I = %.12g", result.iterations, result.energy.total)
    return EXIT_OK


def cmd_sweep_m(cfg: RunConfig, out: Path) -> int:
    grid = build_grid(cfg)
    params = build_params(cfg)
    nu = build_defect(cfg, grid)
    ms = cfg.analysis.m_sweep
    log.info("sweeping m over %s", list(ms))
    status = EXIT_OK
    failure = None
    try:
        report = sweep_m(nu, params, ms, scf_config(cfg),
                         callback=lambda e: log.info("m=%g I=%.12g charge=%.12g iterations=%d",
                                                     e.m, e.energy, e.charge, e.iterations))
    except SweepAborted as exc:
        report, failure, status = exc.report, exc.failure, EXIT_NONCONVERGED
        log.error("%s", exc)
    rows = [(e.m, e.energy, e.charge, e.iterations) for e in report.entries]
    if "csv" in cfg.output.formats:
        write_csv(out / "msweep.csv", _header(cfg), ("m", "I", "charge", "iterations"), rows)
    summary = _provenance(cfg, "sweep-m")
    summary.update(
        converged=report.complete,
        entries=[{"m": e.m, "I": e.energy, "charge": e.charge, "iterations": e.iterations,
                  "final_residual": e.result.final_residual} for e in report.entries],
        extrapolated_I0=report.extrapolated_I0,
        monotonicity_margin=report.monotonicity_margin,
        energy_non_increasing_in_m=report.is_monotone,
        charge_strictly_decreasing=report.charge_strictly_decreasing if report.entries else None,
    )
    if failure is not None:
        partial = failure.result
        summary["failed_m"] = partial.params.m
        summary["failed_residual_history"] = list(partial.residual_history)
    if "json" in cfg.output.formats:
        write_json(out / "summary.json", summary)
    return status


def read_density_csv(path: Path, cfg: RunConfig) -> tuple[DensityProfile, str | None]:
    """Load ``rho_total`` and the source config hash from a density.csv.

    Raises :class:`InputError` when the header or ``z`` column disagrees with
    the configured grid.
    """
    try:
        with path.open(encoding="utf-8") as fh:
            first = fh.readline().strip()
            columns = fh.readline().strip().split(",")
    except OSError as exc:
        raise InputError(f"cannot read density file {path}: {exc.strerror}") from exc
    if not first.startswith("# fermi_slab"):
        raise InputError(f"{path} has no fermi_slab metadata header")
    meta = dict(tok.split("=", 1) for tok in first.split()[3:] if "=" in tok)
    expected = {"L": cfg.grid.L, "n": cfg.grid.n, "epsilon_F": cfg.physics.epsilon_F}
    for key, want in expected.items():
        if key not in meta:
            raise InputError(f"{path} header lacks {key}")
        if float(meta[key]) != float(want):
            raise InputError(f"{path} was written with {key}={meta[key]}, configuration has {want}")
    if tuple(columns) != DENSITY_COLUMNS:
        raise InputError(f"{path} columns {columns} != {list(DENSITY_COLUMNS)}")
    data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    grid = build_grid(cfg)
    if data.shape != (grid.n_points, len(DENSITY_COLUMNS)):
        raise InputError(f"{path} has shape {data.shape}, expected ({grid.n_points}, 5)")
    if np.max(np.abs(data[:, 0] - grid.nodes)) > 1e-12 * grid.half_length:
        raise InputError(f"z column of {path} does not match the configured grid")
    return DensityProfile(grid, data[:, 3]), meta.get("config_sha256")


def cmd_fit_friedel(cfg: RunConfig, out: Path, input_path: Path | None) -> int:
    path = input_path or out / "density.csv"
    density, source_hash = read_density_csv(path, cfg)
    rho0 = free_gas_density(cfg.physics.epsilon_F)
    edge = cfg.defect.w if cfg.defect.type == "trench" else None
    fit = friedel_fit(density, rho0, cfg.window, cfg.analysis.free_exponent, defect_half_width=edge)
    k_F = math.sqrt(2.0 * cfg.physics.epsilon_F)
    payload = _provenance(cfg, "fit-friedel")
    payload.update(
        input=str(path),
        input_config_sha256=source_hash,
        a=fit.a,
        delta=fit.delta,
        eps=fit.eps,
        eps_over_kF=fit.eps_over_kF,
        k_F=k_F,
        window=list(fit.window),
        rms_residual=fit.rms_residual,
        n_samples=fit.n_samples,
        degenerate=fit.degenerate,
        decay_exponent=fit.decay_exponent,
        decay_exponent_stderr=fit.decay_exponent_stderr,
    )
    write_json(out / "friedel.json", payload)
    log.info("eps = %.6g (eps/k_F = %.4f), a = %.4g, p = %s", fit.eps, fit.eps_over_kF, fit.a,
             "n/a" if fit.decay_exponent is None else f"{fit.decay_exponent:.3f}")
    return EXIT_OK


def cmd_free_gas(cfg: RunConfig, out: Path) -> int:
    from .fermi import assemble_density, free_spectrum, renormalized_density

    grid = build_grid(cfg)
    eF = cfg.physics.epsilon_F
    rho0 = free_gas_density(eF)
    rho = assemble_density(free_spectrum(grid, eF), eF).values
    central = np.abs(grid.nodes) <= min(5.0, grid.half_length / 2)
    rel = np.abs(rho[central] - rho0) / rho0
    rho_Q = renormalized_density(PotentialProfile.zeros(grid), eF).values
    payload = _provenance(cfg, "free-gas")
    payload.update(
        epsilon_F=eF,
        rho0=rho0,
        k_F=math.sqrt(2.0 * eF),
        box_density_center=float(rho[grid.center]),
        max_relative_error_central=float(rel.max()),
        central_half_width=float(min(5.0, grid.half_length / 2)),
        rho_Q_sup=float(np.max(np.abs(rho_Q))),
    )
    write_json(out / "free_gas.json", payload)
    log.info("rho0 = %.12g, box plateau relative error %.3e", rho0, rel.max())
    return EXIT_OK


def cmd_validate(cfg: RunConfig, out: Path) -> int:
    from .validation import run_checks

    checks = run_checks()
    failed = [c for c in checks if not c["passed"]]
    for c in checks:
        log.info("%-28s %s  value=%.3e  bound=%s", c["name"], "PASS" if c["passed"] else "FAIL",
                 c["value"], c["bound"])
    payload = _provenance(cfg, "validate")
    payload.update(checks=checks, passed=not failed)
    write_json(out / "validate.json", payload)
    return EXIT_VALIDATION if failed else EXIT_OK


# -- plumbing --------------------------------------------------------------

def _thread_limit():
    raw = os.environ.get("FERMI_SLAB_THREADS")
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"FERMI_SLAB_THREADS must be a positive integer, got {raw!r}",
                          key="FERMI_SLAB_THREADS", source="environment") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="configuration file (INI sections)")
    common.add_argument("--out", type=Path, default=None, help="output directory (overrides output.directory)")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key, e.g. physics.m=2 (repeatable)")
    common.add_argument("--quiet", action="store_true", help="only report errors")
    common.add_argument("--verbose", action="store_true", help="log every SCF iteration")

    parser = argparse.ArgumentParser(
        prog="fermi-slab",
        description="Planar defects in a screened free electron gas (reduced Hartree-Fock).",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="self-consistent solve; writes density.csv, summary.json")
    sub.add_parser("sweep-m", parents=[common], help="solve along analysis.m_sweep; writes msweep.csv")
    fit = sub.add_parser("fit-friedel", parents=[common], help="fit Friedel oscillations of a density.csv")
    fit.add_argument("--input", type=Path, default=None, help="density.csv (default: <out>/density.csv)")
    sub.add_parser("free-gas", parents=[common], help="free electron gas plateau check")
    sub.add_parser("validate", parents=[common], help="run the built-in oracle checks")
    return parser


def _report(kind: str, exc: BaseException, extra: dict | None = None):
    payload = {"type": kind, "message": str(exc)}
    payload.update(extra or {})
    print(json.dumps({"error": _clean(payload)}, sort_keys=True, default=_json_default), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if args.quiet else (logging.DEBUG if args.verbose else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = load_config(args.config, args.override)
        out = args.out if args.out is not None else Path(cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
        with _thread_limit():
            if args.command == "solve":
                return cmd_solve(cfg, out)
            if args.command == "sweep-m":
                return cmd_sweep_m(cfg, out)
            if args.command == "fit-friedel":
                return cmd_fit_friedel(cfg, out, args.input)
            if args.command == "free-gas":
                return cmd_free_gas(cfg, out)
            return cmd_validate(cfg, out)
    except ConfigError as exc:
        print(json.dumps({"error": exc.as_dict()}, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        _report("input", exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - every failure becomes a JSON error record
        log.debug("unhandled error", exc_info=True)
        _report(type(exc).__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
