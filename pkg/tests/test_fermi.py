import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermi_slab.fermi import (
    QFiberSample,
    assemble_density,
    kinetic_free_energy,
    occupation_weights,
    oracle_density_quadrature,
    oracle_kinetic_quadrature,
    renormalized_density,
    spectrum_below_fermi,
)
from fermi_slab.grid import GridSpec, PhysicalParams, PotentialProfile, free_gas_density, integrate, trench_defect
from fermi_slab.scf import scf_solve
from fermi_slab.spectral import build_hamiltonian, eigendecompose
from fermi_slab.validation import SEED, random_potential

EF = 2.0


def _rel_l2(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_fiber_sample():
    s = QFiberSample(1.0, 2.0)
    assert s.effective_fermi == 1.5
    assert s.in_ball(0.6) and not s.in_ball(0.5)
    with pytest.raises(ValueError):
        QFiberSample(-1.0, 2.0)


def test_empty_fermi_sea():
    g = GridSpec(5.0, 101)
    V = PotentialProfile(g, np.full(g.n_points, 3.0))
    assert not np.any(assemble_density(spectrum_below_fermi(V, EF), EF).values)


def test_cutoff_below_fermi_rejected():
    g = GridSpec(5.0, 101)
    spec = eigendecompose(build_hamiltonian(g, PotentialProfile.zeros(g)), 1.0)
    with pytest.raises(ValueError):
        assemble_density(spec, EF)


def test_free_plateau_large_box():
    g = GridSpec(40.0, 1601)
    rho = assemble_density(spectrum_below_fermi(PotentialProfile.zeros(g), EF), EF)
    assert rho.values[g.center] == pytest.approx(free_gas_density(EF), rel=5e-3)


def test_density_matches_q_quadrature():
    g = GridSpec(20.0, 801)
    V = random_potential(g, np.random.default_rng(SEED))
    rho = assemble_density(spectrum_below_fermi(V, EF), EF).values
    assert _rel_l2(oracle_density_quadrature(V, EF, 4000).values, rho) <= 1e-4


def test_q_quadrature_error_is_first_order():
    # the midpoint error per state oscillates with the position of its Fermi
    # radius inside a cell, so the order is read off a log-log fit
    g = GridSpec(10.0, 401)
    V = random_potential(g, np.random.default_rng(SEED + 1))
    rho = assemble_density(spectrum_below_fermi(V, EF), EF).values
    nqs = np.array([500, 1000, 2000, 4000, 8000, 16000])
    errs = [_rel_l2(oracle_density_quadrature(V, EF, int(n)).values, rho) for n in nqs]
    slope = np.polyfit(np.log(nqs), np.log(errs), 1)[0]
    assert -1.3 <= slope <= -0.7


def test_oracle_of_free_gas_converges_to_plateau():
    g = GridSpec(20.0, 801)
    V = PotentialProfile.zeros(g)
    exact = assemble_density(spectrum_below_fermi(V, EF), EF).values[g.center]
    errs = [abs(oracle_density_quadrature(V, EF, n).values[g.center] - exact) for n in (250, 4000)]
    assert errs[1] < errs[0] and errs[1] <= 1e-4 * exact


def test_rho_Q_zero_for_free_gas():
    g = GridSpec(10.0, 201)
    assert not np.any(renormalized_density(PotentialProfile.zeros(g), EF).values)
    assert kinetic_free_energy(PotentialProfile.zeros(g), EF) == 0.0


def test_rho_Q_even_for_even_potential():
    g = GridSpec(15.0, 601)
    V = PotentialProfile(g, g.sample(lambda z: 0.4 * np.exp(-z**2) - 0.2 * np.exp(-z**2 / 9)))
    assert renormalized_density(V, EF).mirror_asymmetry() <= 1e-10


def test_attractive_well_binds_charge():
    g = GridSpec(20.0, 801)
    V = PotentialProfile(g, g.sample(lambda z: -0.5 * np.exp(-z**2)))
    rq = renormalized_density(V, EF)
    charge = integrate(rq)
    assert charge > 0
    oracle = oracle_density_quadrature(V, EF, 4000).values - oracle_density_quadrature(
        PotentialProfile.zeros(g), EF, 4000
    ).values
    # absolute: rho_Q is a difference of two O(1) oracle densities
    assert abs(g.weights @ oracle - charge) <= 1e-4


def test_density_nonnegative(rng):
    g = GridSpec(10.0, 401)
    V = random_potential(g, rng, amplitude=1.5)
    assert np.all(assemble_density(spectrum_below_fermi(V, EF), EF).values >= 0)
    assert np.all(occupation_weights(np.array([-1.0, 1.0, 2.0, 3.0]), EF) >= 0)


def _closed_form_constant_shift(n_inner: int, h: float, c: float) -> float:
    """Renormalised kinetic energy for ``V = c`` from the analytic discrete box spectrum."""
    k = np.arange(1, n_inner + 1)
    tau = (1.0 - np.cos(k * np.pi / (n_inner + 1))) / h**2
    occ = EF - c - tau[tau + c <= EF]
    perturbed = math.fsum(occ * (-c) - 0.5 * occ**2)
    free = math.fsum(0.5 * (EF - tau[tau <= EF]) ** 2)
    return (perturbed + free) / (2 * np.pi)


@pytest.mark.parametrize("c", [0.1, 0.75, 1.5])
def test_kinetic_constant_potential(c):
    g = GridSpec(10.0, 201)
    V = PotentialProfile(g, np.full(g.n_points, c))
    t = kinetic_free_energy(V, EF)
    exact = _closed_form_constant_shift(g.n_points - 2, g.spacing, c)
    assert t == pytest.approx(exact, rel=1e-10)
    assert t == pytest.approx(oracle_kinetic_quadrature(V, EF), rel=1e-8)


def test_kinetic_matches_mu_quadrature(rng):
    g = GridSpec(10.0, 201)
    for _ in range(3):
        V = random_potential(g, rng)
        t = kinetic_free_energy(V, EF)
        assert t >= 0
        assert t == pytest.approx(oracle_kinetic_quadrature(V, EF), rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), amplitude=st.floats(0.01, 3.0), eF=st.floats(0.2, 4.0))
def test_kinetic_nonnegative_property(seed, amplitude, eF):
    g = GridSpec(8.0, 161)
    V = random_potential(g, np.random.default_rng(seed), amplitude=amplitude)
    t = kinetic_free_energy(V, eF)
    assert t >= -1e-12 * (1.0 + abs(t))


def test_fibers_outside_fermi_ball_are_empty():
    g = GridSpec(30.0, 601)
    rho0 = free_gas_density(EF)
    res = scf_solve(trench_defect(g, rho0, 4.0), PhysicalParams(EF, 4.0))
    V = res.V_final
    q_min = math.sqrt(2.0 * (EF + V.sup_norm))
    outside = oracle_density_quadrature(V, EF, 50, q_range=(q_min, q_min + 1.0))
    assert not np.any(outside.values)
