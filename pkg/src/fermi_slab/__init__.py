"""Planar defects in a screened free electron gas, reduced Hartree-Fock on a 1D box."""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    ChargeReport,
    FriedelFit,
    MSweepReport,
    SweepAborted,
    friedel_fit,
    neutrality_report,
    richardson_zero_limit,
    sweep_m,
)
from .config import ConfigError, RunConfig, config_hash, load_config, parse_config  # noqa: E402
from .fermi import (  # noqa: E402
    QFiberSample,
    assemble_density,
    kinetic_free_energy,
    oracle_density_quadrature,
    oracle_kinetic_quadrature,
    renormalized_density,
)
from .grid import (  # noqa: E402
    DensityProfile,
    GridSpec,
    PhysicalParams,
    PotentialProfile,
    fermi_level_of_density,
    free_gas_density,
    integrate,
    trench_defect,
)
from .interaction import InteractionKind, NonNeutralChargeError, coulomb_solve, dm_inner, yukawa_solve  # noqa: E402
from .scf import EnergyBreakdown, ScfConfig, ScfNonConvergence, ScfResult, scf_map, scf_solve  # noqa: E402
from .spectral import SpectralDecomposition, build_hamiltonian, eigendecompose, sturm_count  # noqa: E402

__all__ = [
    "ChargeReport", "ConfigError", "DensityProfile", "EnergyBreakdown", "FriedelFit", "GridSpec",
    "InteractionKind", "MSweepReport", "NonNeutralChargeError", "PhysicalParams", "PotentialProfile",
    "QFiberSample", "RunConfig", "ScfConfig", "ScfNonConvergence", "ScfResult", "SpectralDecomposition",
    "SweepAborted", "assemble_density", "build_hamiltonian", "config_hash", "coulomb_solve", "dm_inner",
    "eigendecompose", "fermi_level_of_density", "free_gas_density", "friedel_fit", "integrate",
    "kinetic_free_energy", "load_config", "neutrality_report", "oracle_density_quadrature",
    "oracle_kinetic_quadrature", "parse_config", "renormalized_density", "richardson_zero_limit",
    "scf_map", "scf_solve", "sturm_count", "sweep_m", "trench_defect", "yukawa_solve",
]
