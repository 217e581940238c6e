import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import periodic_gf
from floquet_harris.errors import GridMismatchError, NumericalFailure
from floquet_harris.floquet import (
    PropagatorProvider,
    convergence_rate,
    floquet_family,
    normalized_profile,
    power_iterate,
    sample_times,
)
from floquet_harris.growth_fragmentation import floquet_h, perron_floquet
from floquet_harris.measure_space import DiscreteFunction, DiscreteMeasure, SpaceGrid, pairing
from floquet_harris.propagator import Propagator, StepScheme

GRID2 = SpaceGrid(0.0, 1.0, 2)
ONES2 = DiscreteFunction.constant(GRID2, 1.0)


@pytest.fixture(scope="module")
def family():
    m = periodic_gf(n=200)
    prov = PropagatorProvider(m, StepScheme(1.0, "heun"))
    fam, eig = floquet_family(prov, 0.0, 5, m.weight_V(), tol=1e-11)
    return m, prov, fam, eig


def test_power_iteration_two_by_two():
    P = Propagator(GRID2, 0.0, 1.0, np.array([[2.0, 1.0], [1.0, 2.0]]))
    eig = power_iterate(P, ONES2, tol=1e-12)
    assert eig.Lambda == pytest.approx(3.0, abs=1e-10)
    np.testing.assert_allclose(eig.h.values, [1.0, 1.0], atol=1e-10)
    assert pairing(eig.gamma, eig.h) == pytest.approx(1.0)
    np.testing.assert_allclose(eig.gamma.masses, [0.5, 0.5], atol=1e-10)


def test_power_iteration_multiple_of_identity():
    grid = SpaceGrid(0.0, 1.0, 5)
    V = DiscreteFunction(grid, 1.0 + grid.nodes)
    eig = power_iterate(Propagator(grid, 0.0, 1.0, 2.5 * np.eye(5)), V)
    assert eig.Lambda == pytest.approx(2.5)
    assert eig.iterations == 1


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 100.0))
def test_power_iteration_scale_invariance(seed, c):
    grid = SpaceGrid(0.0, 1.0, 6)
    M = np.random.default_rng(seed).random((6, 6)) + 0.05
    V = DiscreteFunction.constant(grid, 1.0)
    e1 = power_iterate(Propagator(grid, 0.0, 1.0, M), V, tol=1e-12)
    e2 = power_iterate(Propagator(grid, 0.0, 1.0, c * M), V, tol=1e-12)
    assert e2.Lambda == pytest.approx(c * e1.Lambda, rel=1e-9)
    np.testing.assert_allclose(e2.h.values, e1.h.values, atol=1e-8)
    assert e1.residual <= 10 * 1e-12 * max(1.0, e1.Lambda)


def test_power_iteration_rejects_bad_input():
    with pytest.raises(NumericalFailure):
        power_iterate(Propagator(GRID2, 0.0, 1.0, np.array([[1.0, -1.0], [0.0, 1.0]])), ONES2)
    with pytest.raises(NumericalFailure):
        power_iterate(Propagator(GRID2, 0.0, 1.0, np.zeros((2, 2))), ONES2)
    with pytest.raises(GridMismatchError):
        power_iterate(Propagator(GRID2, 0.0, 1.0, np.eye(2)),
                      DiscreteFunction.constant(SpaceGrid(0.0, 2.0, 2), 1.0))


def test_sample_times():
    t = sample_times(0.5, 1.0, 5)
    np.testing.assert_allclose(t, [0.5, 0.75, 1.0, 1.25, 1.5])
    assert t[-1] == 1.5
    with pytest.raises(ValueError):
        sample_times(0.0, 1.0, 1)


def test_provider_caches_by_phase(family):
    m, prov, _, _ = family
    before = prov.assemblies
    P1 = prov.get(0.25, 0.5)
    P2 = prov.get(3.25, 3.5)
    np.testing.assert_array_equal(P1.matrix, P2.matrix)
    assert prov.assemblies <= before + 1
    prov.get(-0.75, -0.5)
    assert prov.assemblies <= before + 1


def test_family_closes_over_one_period(family):
    _, _, fam, _ = family
    dh, dg = fam.endpoint_mismatch()
    assert dh <= 1e-10 and dg <= 1e-10
    for h, g in zip(fam.h_samples, fam.gamma_samples):
        assert np.max(h.values / fam.V.values) == pytest.approx(1.0)
        assert pairing(g, h) == pytest.approx(1.0)
        assert np.all(h.values > 0)


def test_family_rate_matches_monodromy(family):
    m, _, fam, eig = family
    assert eig.residual <= 1e-10
    assert abs(fam.lambda_F - perron_floquet(m).lambda_F) <= 5e-3


def test_family_agrees_with_closed_form_profile(family):
    m, _, fam, _ = family
    V = fam.V.values
    for t, h in zip(fam.times, fam.h_samples):
        ref = floquet_h(m, t, m.grid.nodes)
        ref = ref / np.max(ref / V)
        assert np.max(np.abs(h.values - ref) / V) <= 5e-3


def test_family_index_wraps(family):
    _, _, fam, _ = family
    assert fam.index(0.0) == fam.index(1.0) == fam.index(-2.0) == 0
    assert fam.index(1.25) == 1
    assert fam.h_at(2.5) is fam.h_samples[2]


def test_autonomous_family_is_constant():
    from conftest import gf_model

    m = gf_model(n=100)
    prov = PropagatorProvider(m, StepScheme(1.0, "heun"))
    fam, _ = floquet_family(prov, 0.0, 4, m.weight_V())
    for h in fam.h_samples[1:]:
        np.testing.assert_allclose(h.values, fam.h_samples[0].values, rtol=1e-9)
    assert prov.assemblies == 1


def test_convergence_from_the_eigenmeasure_is_immediate(family):
    _, prov, fam, _ = family
    r = convergence_rate(prov, fam, fam.gamma_samples[0], 0.0, 4.0, 4)
    assert np.all(r.distances <= 1e-10)


def test_convergence_from_a_dirac_decays(family):
    m, prov, fam, _ = family
    mu = DiscreteMeasure.dirac(m.grid, 20)
    r = convergence_rate(prov, fam, mu, 0.0, 6.0, 6)
    assert r.omega_hat > 1.0
    assert np.all(np.diff(r.distances) < 0)
    again = convergence_rate(prov, fam, mu, 0.0, 6.0, 6)
    np.testing.assert_array_equal(r.distances, again.distances)
    prof = normalized_profile(r.final_profile, fam.h_at(6.0))
    assert pairing(prof, fam.h_at(6.0)) == pytest.approx(1.0)


def test_convergence_argument_checks(family):
    m, prov, fam, _ = family
    mu = DiscreteMeasure.dirac(m.grid, 3)
    with pytest.raises(ValueError):
        convergence_rate(prov, fam, mu, 0.0, 2.5, 5)
    with pytest.raises(ValueError):
        convergence_rate(prov, fam, mu, 0.0, 2.0, 3)
    with pytest.raises(ValueError):
        convergence_rate(prov, fam, mu, 0.1, 2.0, 4)
    assert math.isfinite(convergence_rate(prov, fam, mu, 0.25, 2.0, 4).omega_hat)
