import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from wickscft.functionals import ExternalPotential, FieldSchedule, FunctionalSpec
from wickscft.grid import ComplexField, Grid1D, RealField, UnitsConfig, integrate, normalized
from wickscft.realtime import TimeTable, density_t, propagate_tdks, wick_rotation_check
from wickscft.spectral import eigendecompose, hamiltonian_matrix


def gaussian(grid, x0, sigma, k0=0.0):
    x = grid.r - x0
    psi = np.exp(-(x**2) / (4 * sigma**2) + 1j * k0 * x)
    return normalized(ComplexField(grid, psi))


def test_time_table():
    t = TimeTable(2.0, 200)
    assert t.dt == pytest.approx(0.01)
    assert t.node_of(0.5) == 50
    with pytest.raises(ValueError):
        t.node_of(0.505)
    with pytest.raises(ValueError):
        TimeTable(-1.0, 10)


def test_matches_expm_second_order():
    g = Grid1D(64, 10.0)
    w = ExternalPotential.harmonic(1.0).evaluate(g)
    psi0 = gaussian(g, 6.0, 0.8, 1.0)
    exact = scipy.linalg.expm(-1j * 1.0 * hamiltonian_matrix(w)) @ psi0.values
    errs = []
    for n in (100, 200, 400):
        traj = propagate_tdks([psi0], w, TimeTable(1.0, n), record_every=n)
        errs.append(np.max(np.abs(traj.orbitals[-1, 0] - exact)))
    assert errs[-1] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_eigenstate_only_acquires_phase():
    g = Grid1D(128, 20.0)
    w = ExternalPotential.harmonic(1.0).evaluate(g)
    eig = eigendecompose(w, n_states=2)
    traj = propagate_tdks([eig.orbital(1)], w, TimeTable(1.0, 2000), record_every=2000)
    ratio = traj.orbitals[-1, 0] / eig.orbitals[1]
    mask = np.abs(eig.orbitals[1]) > 1e-3
    np.testing.assert_allclose(ratio[mask], np.exp(-1.5j), atol=1e-6)


@given(seed=st.integers(0, 2**31))
def test_norm_conserved(seed):
    rng = np.random.default_rng(seed)
    g = Grid1D(32, 6.0)
    w = RealField(g, rng.normal(size=32))
    psi = normalized(ComplexField(g, rng.normal(size=32) + 1j * rng.normal(size=32)))
    traj = propagate_tdks([psi], w, TimeTable(1.0, 50))
    np.testing.assert_allclose(traj.norms(), 1.0, atol=1e-12)


def test_time_dependent_field_reversibility():
    # forward then backward through a reversed schedule returns the start state
    g = Grid1D(64, 10.0)
    slices = [RealField(g, 0.5 * np.cos(2 * np.pi * g.r / g.length + 0.1 * m)) for m in range(41)]
    psi0 = gaussian(g, 5.0, 1.0, 0.5)
    table = TimeTable(0.4, 40)
    fwd = propagate_tdks([psi0], FieldSchedule.time_dependent(slices), table, record_every=40)
    from wickscft.realtime import evolve_fixed

    _, back = evolve_fixed(
        fwd.orbitals[-1], FieldSchedule.time_dependent(slices), g, 40, table.dt,
        record_every=40, node_offset=40, backward=True,
    )
    np.testing.assert_allclose(back[-1], psi0.values[None], atol=1e-12)


def test_requires_normalized_initial():
    g = Grid1D(32, 4.0)
    psi = ComplexField(g, np.ones(32) * 2)
    with pytest.raises(ValueError, match="norm"):
        propagate_tdks([psi], RealField.constant(g, 0.0), TimeTable(1.0, 10))


def test_aliasing_guard():
    g = Grid1D(32, 4.0)
    psi = normalized(ComplexField(g, np.ones(32)))
    with pytest.raises(ValueError, match="alias"):
        propagate_tdks([psi], RealField.constant(g, 1000.0), TimeTable(1.0, 10))


def test_record_every_keeps_endpoints():
    g = Grid1D(32, 4.0)
    psi = normalized(ComplexField(g, np.ones(32)))
    traj = propagate_tdks([psi], RealField.constant(g, 0.0), TimeTable(1.0, 10), record_every=4)
    assert list(traj.node_indices) == [0, 4, 8, 10]
    assert traj.times[-1] == pytest.approx(1.0)


def test_self_consistent_ground_state_stationary():
    # a converged self-consistent ground state does not move under its own field
    from wickscft.scft import ScftConfig, solve_scft

    g = Grid1D(64, 12.0)
    spec = FunctionalSpec(ExternalPotential.harmonic(1.0), contact_strength=0.4)
    state = solve_scft(spec, 1.0, g, ScftConfig(beta=30.0, ds=0.01, mixing_alpha=0.5, tolerance=1e-11))
    phi = eigendecompose(state.w, n_states=1).orbital(0)
    traj = propagate_tdks([phi], None, TimeTable(1.0, 500), mode="self-consistent", spec=spec, record_every=500)
    rho0 = density_t([phi]).values
    rho1 = traj.density(1).values
    assert np.max(np.abs(rho1 - rho0)) < 1e-6
    np.testing.assert_allclose(traj.norms(), 1.0, atol=1e-12)


def test_self_consistent_needs_spec():
    g = Grid1D(32, 4.0)
    psi = normalized(ComplexField(g, np.ones(32)))
    with pytest.raises(ValueError):
        propagate_tdks([psi], None, TimeTable(1.0, 10), mode="self-consistent")
    with pytest.raises(ValueError):
        propagate_tdks([psi], None, TimeTable(1.0, 10), mode="bogus")


@pytest.mark.parametrize("kind", ["free", "constant", "harmonic"])
def test_wick_rotation(kind):
    g = Grid1D(128, 20.0)
    w = {
        "free": RealField.constant(g, 0.0),
        "constant": RealField.constant(g, 0.8),
        "harmonic": ExternalPotential.harmonic(1.0).evaluate(g),
    }[kind]
    report = wick_rotation_check(w, 2.0, 400)
    assert report.relative_discrepancy < 1e-12


def test_wick_rotation_units():
    g = Grid1D(64, 10.0)
    units = UnitsConfig(hbar=0.7, mass=1.9)
    report = wick_rotation_check(ExternalPotential.harmonic(1.0).evaluate(g, units), 1.0, 200, units)
    assert report.relative_discrepancy < 1e-12


def test_density_with_occupancies():
    g = Grid1D(32, 4.0)
    a = normalized(ComplexField(g, np.ones(32)))
    b = normalized(ComplexField(g, np.exp(2j * np.pi * g.r / g.length)))
    assert integrate(density_t([a, b], [2.0, 0.5])) == pytest.approx(2.5)
