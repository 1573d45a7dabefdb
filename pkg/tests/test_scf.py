import numpy as np
import pytest

from fermi_slab.fermi import oracle_density_quadrature, renormalized_density
from fermi_slab.grid import DensityProfile, GridSpec, PhysicalParams, PotentialProfile, free_gas_density, trench_defect
from fermi_slab.interaction import yukawa_solve
from fermi_slab.scf import AndersonMixer, ScfConfig, ScfNonConvergence, scf_map, scf_solve

EF = 2.0
RHO0 = free_gas_density(EF)


@pytest.fixture(scope="module")
def grid():
    return GridSpec(30.0, 601)


@pytest.fixture(scope="module")
def nu(grid):
    return trench_defect(grid, RHO0, 4.0)


@pytest.fixture(scope="module")
def solved(nu):
    return scf_solve(nu, PhysicalParams(EF, 4.0))


def test_free_gas_is_exact_fixed_point(grid):
    zero = DensityProfile.zeros(grid)
    params = PhysicalParams(EF, 4.0)
    assert not np.any(scf_map(PotentialProfile.zeros(grid), zero, params).values)
    res = scf_solve(zero, params)
    assert res.converged and res.iterations == 1
    assert res.energy.total == 0.0
    assert not np.any(res.rho_Q.values) and not np.any(res.V_final.values)


def test_map_preserves_parity(grid, nu):
    V = PotentialProfile(grid, grid.sample(lambda z: 0.1 * np.exp(-z**2 / 4)))
    assert scf_map(V, nu, PhysicalParams(EF, 2.0)).mirror_asymmetry() <= 1e-10


def test_first_iterate_sign(nu):
    params = PhysicalParams(EF, 4.0)
    V1 = scf_map(PotentialProfile.zeros(nu.grid), nu, params)
    # removing background charge leaves a repulsive potential for the electrons
    assert V1.values[nu.grid.center] > 0
    assert V1.mirror_asymmetry() <= 1e-10
    oracle = oracle_density_quadrature(V1, EF, 4000).values - oracle_density_quadrature(
        PotentialProfile.zeros(nu.grid), EF, 4000
    ).values
    rho_Q = renormalized_density(V1, EF).values
    # and the electrons are pushed out of the trench
    assert oracle[nu.grid.center] < 0 and rho_Q[nu.grid.center] < 0
    # the oracle is a difference of two O(rho0) quadratures with O(1/n_q) error
    assert abs(oracle[nu.grid.center] - rho_Q[nu.grid.center]) <= 2e-2 * abs(rho_Q[nu.grid.center])
    V2 = scf_map(V1, nu, params).values
    from_oracle = yukawa_solve(DensityProfile(nu.grid, oracle) - nu, 4.0).values
    assert np.max(np.abs(V2 - from_oracle)) <= 2e-2 * np.max(np.abs(V2))


def test_converged_state_properties(solved, nu):
    params = solved.params
    V = solved.V_final
    assert solved.converged and solved.iterations <= 200
    residual = np.max(np.abs(scf_map(V, nu, params).values - V.values))
    assert residual <= ScfConfig().tol
    assert solved.final_residual <= ScfConfig().tol
    assert solved.energy.total >= 0 and solved.energy.t_ren >= 0 and solved.energy.interaction >= 0
    assert max(abs(V.values[0]), abs(V.values[-1])) <= 1e-10 * V.sup_norm
    assert V.mirror_asymmetry() <= 1e-9 and solved.rho_Q.mirror_asymmetry() <= 1e-9
    assert solved.total_defect_charge == pytest.approx(float(nu.grid.weights @ (solved.rho_Q - nu).values))


def test_total_density_oscillates_outside_trench(solved, nu):
    z = nu.grid.nodes
    window = (z >= 6.0) & (z <= 20.0)
    dev = solved.rho_Q.values[window] + nu.values[window]
    sign_changes = np.count_nonzero(np.diff(np.sign(dev)) != 0)
    # about 2 k_F / pi = 1.27 sign changes per unit length
    assert sign_changes >= 10
    envelope = np.abs(dev)
    assert envelope[: envelope.size // 3].max() > envelope[-envelope.size // 3:].max()


def test_uniqueness_from_two_initial_guesses(solved, nu):
    params = solved.params
    start = scf_map(PotentialProfile.zeros(nu.grid), nu, params)
    other = scf_solve(nu, params, ScfConfig(initial_potential=start))
    assert np.max(np.abs(other.V_final.values - solved.V_final.values)) <= 10 * ScfConfig().tol


def test_linear_mixing_also_converges(nu):
    res = scf_solve(nu, PhysicalParams(EF, 4.0), ScfConfig(anderson_depth=0, max_iter=400))
    assert res.converged


def test_nonconvergence_carries_history(nu):
    cfg = ScfConfig(max_iter=2)
    with pytest.raises(ScfNonConvergence) as info:
        scf_solve(nu, PhysicalParams(EF, 4.0), cfg)
    assert len(info.value.residual_history) == 2
    partial = scf_solve(nu, PhysicalParams(EF, 4.0), cfg, raise_on_failure=False)
    assert not partial.converged and partial.energy is None and partial.iterations == 2


def test_preconditions(grid, nu):
    with pytest.raises(ValueError):
        scf_solve(nu, PhysicalParams(EF, 0.0))
    near_edge = trench_defect(grid, RHO0, 29.0)
    with pytest.raises(ValueError):
        scf_solve(near_edge, PhysicalParams(EF, 1.0))
    with pytest.raises(ValueError):
        scf_solve(nu, PhysicalParams(EF, 4.0), ScfConfig(initial_potential=PotentialProfile.zeros(GridSpec(30.0, 11))))


@pytest.mark.parametrize("kwargs", [{"max_iter": 0}, {"tol": 0.0}, {"mixing_alpha": 0.0},
                                    {"mixing_alpha": 1.5}, {"anderson_depth": -1}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ScfConfig(**kwargs)


def test_anderson_solves_linear_fixed_point(rng):
    n = 30
    A = rng.normal(size=(n, n))
    A *= 0.9 / np.max(np.abs(np.linalg.eigvals(A)))
    b = rng.normal(size=n)
    exact = np.linalg.solve(np.eye(n) - A, b)

    def run(depth):
        mixer, x = AndersonMixer(0.5, depth), np.zeros(n)
        for k in range(1, 500):
            r = A @ x + b - x
            if np.max(np.abs(r)) < 1e-10:
                return k, x
            x = mixer.step(x, r)
        return k, x

    k_plain, _ = run(0)
    k_anderson, x = run(5)
    assert np.max(np.abs(x - exact)) < 1e-8
    assert k_anderson < k_plain


def test_energy_monotone_and_decaying_in_m(trench_sweep):
    entries, report = trench_sweep
    I = [entries[m].energy for m in (16.0, 4.0, 2.0, 1.0, 0.5)]
    assert np.all(np.diff(I) >= -1e-10)
    assert I[0] < I[1]
    assert report.is_monotone and all(e >= 0 for e in I)
