import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wickscft.functionals import (
    ExternalPotential,
    FieldSchedule,
    FunctionalSpec,
    evaluate_U,
    field_from_density,
    gaussian_kernel,
)
from wickscft.grid import Grid1D, RealField, integrate


def direct_convolution(K, n, h):
    N = n.size
    out = np.zeros(N)
    for i in range(N):
        for j in range(N):
            out[i] += K[(i - j) % N] * n[j] * h
    return out


def random_density(grid, rng):
    n = np.abs(rng.normal(size=grid.n_points)) + 0.1
    return RealField(grid, n)


def test_external_only_field_independent_of_density(grid256, rng):
    spec = FunctionalSpec(ExternalPotential.harmonic())
    v = spec.external.evaluate(grid256).values
    for _ in range(3):
        w = field_from_density(spec, random_density(grid256, rng))
        np.testing.assert_array_equal(w.values, v)


def test_contact_uniform_density():
    g = Grid1D(32, 4.0)
    spec = FunctionalSpec(ExternalPotential.uniform(0.0), contact_strength=0.5)
    w = field_from_density(spec, RealField.constant(g, 2.0))
    np.testing.assert_allclose(w.values, 1.0, rtol=0, atol=1e-15)


def test_hartree_matches_double_sum(rng):
    g = Grid1D(64, 8.0)
    K = gaussian_kernel(g, 0.7)
    spec = FunctionalSpec(ExternalPotential.uniform(0.0), hartree_kernel=K, hartree_strength=1.3)
    n = random_density(g, rng)
    w = field_from_density(spec, n)
    oracle = 1.3 * direct_convolution(K.values, n.values, g.spacing)
    assert np.max(np.abs(w.values - oracle)) < 1e-10


def test_odd_kernel_rejected():
    g = Grid1D(16, 1.0)
    odd = RealField(g, np.sin(2 * np.pi * g.r))
    with pytest.raises(ValueError, match="even"):
        FunctionalSpec(ExternalPotential.uniform(0.0), hartree_kernel=odd, hartree_strength=1.0)


def test_negative_density_rejected(grid256):
    spec = FunctionalSpec(ExternalPotential.uniform(0.0))
    n = np.zeros(grid256.n_points)
    n[5] = -1e-9
    with pytest.raises(ValueError, match="negative"):
        field_from_density(spec, RealField(grid256, n))
    n[5] = -1e-13
    field_from_density(spec, RealField(grid256, n))


def test_U_of_empty_system(grid256):
    spec = FunctionalSpec(ExternalPotential.harmonic(), contact_strength=1.0,
                          hartree_kernel=gaussian_kernel(grid256, 1.0), hartree_strength=0.5)
    assert evaluate_U(spec, RealField.constant(grid256, 0.0)) == 0.0


def test_U_harmonic_gaussian_moment(grid256):
    # <0.5 x^2> for a normalized Gaussian of variance s^2 is 0.5 s^2
    s = 1.3
    x = grid256.r - grid256.length / 2
    n = RealField(grid256, np.exp(-(x**2) / (2 * s**2)) / np.sqrt(2 * np.pi * s**2))
    spec = FunctionalSpec(ExternalPotential.harmonic(1.0))
    assert evaluate_U(spec, n) == pytest.approx(0.5 * s**2, rel=1e-8)


@given(seed=st.integers(0, 2**31))
def test_gradient_check(seed):
    rng = np.random.default_rng(seed)
    g = Grid1D(32, 6.0)
    spec = FunctionalSpec(
        ExternalPotential.harmonic(0.8),
        contact_strength=0.7,
        hartree_kernel=gaussian_kernel(g, 0.9),
        hartree_strength=0.4,
    )
    n = RealField(g, np.abs(rng.normal(size=32)) + 1.0)
    delta = rng.normal(size=32)
    eps = 1e-5
    up = evaluate_U(spec, RealField(g, n.values + eps * delta))
    down = evaluate_U(spec, RealField(g, n.values - eps * delta))
    fd = (up - down) / (2 * eps)
    analytic = integrate(RealField(g, field_from_density(spec, n).values * delta))
    assert abs(fd - analytic) <= 1e-6 * max(1.0, abs(analytic))


@given(seed=st.integers(0, 2**31))
def test_even_density_gives_even_field(seed):
    rng = np.random.default_rng(seed)
    g = Grid1D(32, 6.0)
    raw = np.abs(rng.normal(size=32))
    even = 0.5 * (raw + np.roll(raw[::-1], 1))
    spec = FunctionalSpec(ExternalPotential.harmonic(1.0), contact_strength=0.3,
                          hartree_kernel=gaussian_kernel(g, 1.0), hartree_strength=0.2)
    w = field_from_density(spec, RealField(g, even)).values
    np.testing.assert_allclose(w, np.roll(w[::-1], 1), atol=1e-12)


def test_extra_field_slot(grid256, rng):
    spec = FunctionalSpec(ExternalPotential.uniform(0.0), extra_field=lambda n: -n)
    n = random_density(grid256, rng)
    np.testing.assert_allclose(field_from_density(spec, n).values, -n.values)
    with pytest.raises(ValueError):
        evaluate_U(spec, n)


def test_potential_catalog(grid256):
    box = ExternalPotential.box_cosine(2.0, 3).evaluate(grid256).values
    assert box.min() == pytest.approx(-2.0)
    assert ExternalPotential.uniform(0.3).evaluate(grid256).values[7] == 0.3
    table = RealField(grid256, np.linspace(0, 1, 256))
    np.testing.assert_array_equal(ExternalPotential.tabulated(table).evaluate(grid256).values, table.values)
    with pytest.raises(ValueError):
        ExternalPotential("quartic")


def test_schedule():
    g = Grid1D(8, 1.0)
    slices = [RealField.constant(g, float(i)) for i in range(4)]
    s = FieldSchedule.time_dependent(slices)
    assert len(s) == 4 and not s.is_static
    assert s.reversed().at(0)[0] == 3.0
    with pytest.raises(ValueError):
        s.check_nodes(5)
    static = FieldSchedule.static(slices[1])
    assert static.at(99)[0] == 1.0
    assert static.expand(3).replaced(2, slices[3]).at(2)[0] == 3.0
