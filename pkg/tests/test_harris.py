import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import gf_model, sm_model
from floquet_harris.errors import ModelShapeError
from floquet_harris.floquet import PropagatorProvider
from floquet_harris.harris import (
    SIN_PERIOD,
    HarrisReport,
    MinorizationMeasure,
    SinProvider,
    SmallSet,
    b5_sigma,
    check_A1,
    check_A2,
    check_A3,
    check_A4,
    check_assumption_A,
    check_B4,
    check_B_suite,
    doeblin_constant,
    log_trend,
    sin_b4_ratio,
    sin_grid,
    sin_model_exact,
    sin_propagator,
    sin_semiflow,
)
from floquet_harris.measure_space import DiscreteFunction, DiscreteMeasure, SpaceGrid, WeightPair
from floquet_harris.propagator import Propagator, StepScheme
from floquet_harris.selection_mutation import ConstantFitness, MutationKernel, SMModel

GRID = SpaceGrid(0.0, 4.0, 9)


def simple_pair(grid=GRID):
    return WeightPair(DiscreteFunction(grid, 1.0 + grid.nodes), DiscreteFunction.constant(grid, 1.0))


def random_positive(seed, n=9):
    return np.random.default_rng(seed).random((n, n)) + 0.01


# ---------------------------------------------------------------------------
# sets and measures


def test_small_set_and_measure():
    K = SmallSet.from_interval(GRID, 1.0, 2.5)
    assert K.interval == (1.0, 2.5)
    np.testing.assert_array_equal(K.indices, [2, 3, 4, 5])
    nu = MinorizationMeasure.uniform_on(K)
    assert nu.weights.sum() == pytest.approx(1.0)
    assert nu.supported_in(K)
    assert not MinorizationMeasure.uniform_on(SmallSet(GRID, 0, 8)).supported_in(K)
    with pytest.raises(ValueError):
        MinorizationMeasure(GRID, np.full(9, 0.2))
    with pytest.raises(ValueError):
        MinorizationMeasure.from_measure(DiscreteMeasure(GRID, -np.ones(9) / 9 + 2 * np.eye(9)[0]))


def test_sup_V_over_psi():
    K = SmallSet.from_interval(GRID, 0.0, 2.0)
    assert K.sup_V_over_psi(simple_pair()) == pytest.approx(3.0)


# ---------------------------------------------------------------------------
# Assumption A on explicit matrices


def test_multiple_of_identity():
    P = Propagator(GRID, 0.0, 1.0, 0.5 * np.eye(9))
    K = SmallSet.from_interval(GRID, 0.0, 2.0)
    pair = simple_pair()
    a1 = check_A1(P, pair, K)
    assert a1.constants["alpha"] == pytest.approx(0.5) and a1.passed
    a2 = check_A2(P, pair, a1.constants["alpha"])
    assert a2.constants["beta"] == pytest.approx(0.5) and not a2.passed
    # a diagonal operator cannot spread mass, so no minorization by a spread-out measure
    nu = MinorizationMeasure.uniform_on(K)
    assert doeblin_constant(P, pair, K, nu) == 0.0
    assert not check_A3(P, pair, K, nu).passed


def test_identity_has_no_contraction():
    P = Propagator(GRID, 0.0, 1.0, np.eye(9))
    a1 = check_A1(P, simple_pair(), SmallSet.from_interval(GRID, 0.0, 2.0))
    assert a1.constants["alpha"] == pytest.approx(1.0) and not a1.passed


def test_rank_one_operator_is_perfectly_mixing():
    h = 1.0 + GRID.nodes
    nu_w = np.full(9, 1 / 9)
    P = Propagator(GRID, 0.0, 1.0, np.outer(h, nu_w))
    pair = WeightPair(DiscreteFunction.constant(GRID, 1.0), DiscreteFunction.constant(GRID, 1.0))
    K = SmallSet(GRID, 0, 8)
    nu = MinorizationMeasure(GRID, nu_w)
    assert doeblin_constant(P, pair, K, nu) == pytest.approx(1.0)
    a4 = check_A4(P, pair, K, nu, 6)
    assert a4.passed and a4.constants["d_A4"] == pytest.approx(1 / 9 * h.sum() / h.max())


@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_doeblin_constant_is_sound(seed, fseed):
    P = Propagator(GRID, 0.0, 1.0, random_positive(seed))
    pair = simple_pair()
    K = SmallSet.from_interval(GRID, 1.0, 3.0)
    nu = MinorizationMeasure.uniform_on(K)
    c = check_A3(P, pair, K, nu).constants["c_A3"]
    f = np.random.default_rng(fseed).random(9)
    psi = pair.psi.values
    lhs = (P.matrix @ f)[K.indices] / (P.matrix @ psi)[K.indices]
    assert np.all(lhs >= c * nu.pair(f / psi) - 1e-12)


@given(st.integers(0, 2**32 - 1))
def test_certified_constants_leave_nonnegative_slack(seed):
    P = Propagator(GRID, 0.0, 1.0, 0.1 * random_positive(seed))
    pair = simple_pair()
    K = SmallSet.from_interval(GRID, 0.0, 2.0)
    a1 = check_A1(P, pair, K)
    alpha, theta = a1.constants["alpha"], a1.constants["theta"]
    V, psi = pair.V.values, pair.psi.values
    slack = alpha * V + theta * psi * K.mask - P.matrix @ V
    assert slack.min() >= -1e-12
    beta = check_A2(P, pair).constants["beta"]
    assert (P.matrix @ psi - beta * psi).min() >= -1e-12


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_constants_scale_with_the_operator(seed, c):
    M = random_positive(seed)
    pair = simple_pair()
    K = SmallSet.from_interval(GRID, 0.0, 2.0)
    nu = MinorizationMeasure.uniform_on(K)
    P1, P2 = Propagator(GRID, 0.0, 1.0, M), Propagator(GRID, 0.0, 1.0, c * M)
    assert check_A1(P2, pair, K).constants["alpha"] == pytest.approx(c * check_A1(P1, pair, K).constants["alpha"])
    assert check_A3(P2, pair, K, nu).constants["c_A3"] == pytest.approx(check_A3(P1, pair, K, nu).constants["c_A3"])


def test_report_table_and_dict():
    P = Propagator(GRID, 0.0, 1.0, 0.05 * random_positive(1) + 0.3 * np.eye(9))
    K = SmallSet.from_interval(GRID, 0.0, 2.0)
    rep = check_assumption_A(P, simple_pair(), K, MinorizationMeasure.uniform_on(K))
    assert [c.name for c in rep.checks] == ["A1", "A2", "A3", "A4"]
    d = rep.to_dict()
    assert d["verdict"] == rep.verdict == all(c["passed"] for c in d["checks"])
    assert "overall" in rep.table()
    with pytest.raises(KeyError):
        rep.get("B9")
    assert HarrisReport([]).verdict


def test_log_trend():
    assert log_trend(np.exp(0.3 * np.arange(10))) == pytest.approx(0.3)
    assert log_trend([1.0]) == 0.0
    assert log_trend([1.0, 1.0, 0.0, 0.0]) == -math.inf


def test_grid_mismatch_is_rejected():
    P = Propagator(SpaceGrid(0.0, 1.0, 9), 0.0, 1.0, np.eye(9))
    with pytest.raises(Exception):
        check_A1(P, simple_pair(), SmallSet.from_interval(GRID, 0.0, 2.0))


# ---------------------------------------------------------------------------
# Assumption B


def test_ratio_bound_is_one_for_autonomous_models():
    m = gf_model(n=60)
    prov = PropagatorProvider(m, StepScheme(1.0, "heun"))
    pair = WeightPair(m.weight_V(), m.weight_V())
    K = SmallSet.from_interval(m.grid, 0.0, 3.0)
    b4 = check_B4(prov, pair, K, 0.0, 1.0, 5, [0.0, 0.3, 0.6])
    assert b4.constants["C_B4"] == pytest.approx(1.0, abs=1e-12)
    assert b4.passed


def test_b_suite_needs_whole_periods():
    m = sm_model(n=61)
    prov = PropagatorProvider(m, StepScheme(0.05, "heun"))
    pair = WeightPair(DiscreteFunction.constant(m.grid, 1.0), DiscreteFunction.constant(m.grid, 1.0))
    K = SmallSet.from_interval(m.grid, -1.0, 1.0)
    with pytest.raises(ModelShapeError):
        check_B_suite(prov, pair, K, MinorizationMeasure.uniform_on(K), 0.0, 0.5, 3, [0.0])


def test_two_point_measure_depth_zero_without_selection():
    m = SMModel(ConstantFitness(0.0), MutationKernel(eps=1.0, q=1.0), SpaceGrid(-3.0, 3.0, 61))
    out = b5_sigma(m, 0.0, 1.0, 0.0, 1.0, 0)
    assert out.c_xy == pytest.approx(1.0)
    np.testing.assert_array_equal(out.times, [1.0])
    with pytest.raises(ValueError):
        b5_sigma(m, 0.0, 0.5, 0.0, 1.0, 0)
    with pytest.raises(NotImplementedError):
        b5_sigma(m, 0.0, 0.5, 0.0, 1.0, 2)


def test_two_point_measure_depth_one():
    # with a = 0 the density is kappa0 (v - s0) on the admissible times
    m = SMModel(ConstantFitness(0.0), MutationKernel(eps=1.0, q=1.0), SpaceGrid(-3.0, 3.0, 61))
    lattice = np.linspace(0.0, 1.0, 65)
    out = b5_sigma(m, 0.0, 0.2, 0.0, 1.0, 1, lattice=lattice)
    assert out.weights.sum() == pytest.approx(1.0)
    assert out.c_xy == pytest.approx(0.5, rel=1e-3)
    with pytest.raises(ValueError):
        b5_sigma(m, 0.0, 2.5, 0.0, 1.0, 1)


# ---------------------------------------------------------------------------
# the sine model


def test_sine_semiflow_examples():
    f = lambda x: np.ones_like(x)
    op = sin_semiflow(0.0, 1.0)
    assert float(op(f)(math.pi / 2)) == pytest.approx(math.e)
    assert float(op(np.cos)(0.0)) == pytest.approx(math.cos(1.0))
    with pytest.raises(ValueError):
        sin_semiflow(1.0, 0.0)


@given(st.floats(-3, 3), st.floats(0, 2), st.floats(0, 2))
def test_sine_semiflow_composes(s, a, b):
    u, t = s + a, s + a + b
    f = lambda x: 2.0 + np.cos(3 * x)
    x = np.linspace(0, 2 * math.pi, 17)
    direct = sin_semiflow(s, t)(f)(x)
    chained = sin_semiflow(s, u)(sin_semiflow(u, t)(f))(x)
    np.testing.assert_allclose(direct, chained, rtol=1e-12)


def test_sine_ratio_closed_form():
    x = np.array([math.pi / 2])
    u = math.pi
    assert float(sin_b4_ratio(x, 0.0, u, 1)[0]) == pytest.approx(math.exp(4 * math.pi))
    g = sin_grid(64)
    one = np.ones(64)
    for k in (1, 2, 3):
        a = b = np.eye(64)
        for j in range(k):
            a = a @ sin_propagator(g, j * SIN_PERIOD, (j + 1) * SIN_PERIOD).matrix
            b = b @ sin_propagator(g, u + j * SIN_PERIOD, u + (j + 1) * SIN_PERIOD).matrix
        ratio = (a @ one) / (b @ one)
        np.testing.assert_allclose(ratio, sin_b4_ratio(g.nodes, 0.0, u, k), rtol=1e-10)


def test_sine_nodal_and_exact_agree():
    g = sin_grid(32)
    f = DiscreteFunction.from_callable(g, lambda x: 2 + np.sin(x))
    shift = 5 * g.dx
    exact = sin_model_exact(g, 0.3, 0.3 + shift, lambda x: 2 + np.sin(x))
    nodal = sin_model_exact(g, 0.3, 0.3 + shift, f)
    np.testing.assert_allclose(nodal.values, exact.values, rtol=1e-12)
    with pytest.raises(ValueError):
        sin_propagator(g, 0.0, 0.5 * g.dx)
    with pytest.raises(ModelShapeError):
        sin_propagator(SpaceGrid(0.0, 1.0, 8), 0.0, 1.0)


def test_sine_model_violates_ratio_bound_but_not_positivity():
    g = sin_grid(64)
    prov = SinProvider(g)
    one = DiscreteFunction.constant(g, 1.0)
    pair = WeightPair(one, one)
    K = SmallSet(g, 0, 63)
    b4 = check_B4(prov, pair, K, 0.0, SIN_PERIOD, 6, [0.0, math.pi / 2, math.pi])
    assert not b4.passed
    assert b4.notes["log_slope"] == pytest.approx(4 * math.pi, rel=1e-9)
    a4 = check_A4(prov.get(0.0, SIN_PERIOD), pair, K, MinorizationMeasure.uniform_on(K), 10)
    assert not a4.passed
