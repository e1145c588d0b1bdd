import math

import numpy as np
import pytest

from ezcoalition import (
    CoalitionSpec,
    DimensionMismatch,
    MarketParams,
    NonFiniteState,
    StrategyProfile,
    TimeGrid,
    VectorField,
    integrate_terminal,
    observed_order,
)
from ezcoalition.equilibrium import equilibrium_field
from ezcoalition.utility import _linear_field

DECAY = VectorField(1, lambda s, y: -y)


def test_exponential_decay():
    traj = integrate_terminal(DECAY, [1.0], TimeGrid(0.0, 1.0, 100))
    assert traj.values[0, 0] == pytest.approx(math.e, abs=1e-8)
    np.testing.assert_allclose(traj.values[:, 0], np.exp(1.0 - traj.nodes), rtol=1e-9)
    assert traj.values[-1, 0] == 1.0


def test_zero_field_is_constant():
    traj = integrate_terminal(VectorField(2, lambda s, y: np.zeros(2)), [3.5, -1.0], TimeGrid(0.0, 2.0, 7))
    assert np.all(traj.values == np.array([3.5, -1.0]))


def test_linear_bound_field_closed_form():
    # no-source comparison ODE with constant strategy: theta = exp((1-g) r (T-t))
    spec = CoalitionSpec(0.1, 0.3, 1.0, (0.01, 0.2))
    m = MarketParams(0.02, 0.08, 0.15)
    prof = StrategyProfile.constant([2.0, 1.0], [0.3, 0.1])
    field = _linear_field(spec, m, prof, lambda th, c: 0.0)
    grid = TimeGrid(0.0, 1.0, 200)
    traj = integrate_terminal(field, [1.0, 1.0], grid)
    P, C = 3.0, 0.4
    r = m.excess_return * P - C + m.nu - 0.5 * spec.gamma * m.sigma**2 * P**2 - spec.rhos / spec.alpha
    exact = np.exp((1 - spec.gamma) * np.outer(1.0 - grid.nodes, r))
    np.testing.assert_allclose(traj.values, exact, atol=1e-8)


def test_observed_order_decay():
    p = observed_order(DECAY, [1.0], TimeGrid(0.0, 1.0, 10))
    assert 3.8 <= p <= 4.2


def test_observed_order_exact_sentinel():
    assert observed_order(VectorField(1, lambda s, y: np.zeros(1)), [2.0], TimeGrid(0.0, 1.0, 5)) == math.inf


def test_halving_shrinks_error_fourth_order():
    errs = []
    for n in (10, 20, 40):
        v = integrate_terminal(DECAY, [1.0], TimeGrid(0.0, 1.0, n)).values[0, 0]
        errs.append(abs(v - math.e))
    assert errs[0] / errs[1] >= 14 and errs[1] / errs[2] >= 14


def test_equilibrium_field_order():
    spec = CoalitionSpec(0.1, 0.3, 1.0, (0.01, 0.2))
    field = equilibrium_field(spec, MarketParams(0.02, 0.08, 0.15))
    assert observed_order(field, [1.0, 1.0], TimeGrid(0.0, 1.0, 10)) >= 3.8


def test_bitwise_determinism():
    spec = CoalitionSpec(0.1, 0.3, 1.0, (0.01, 0.2))
    field = equilibrium_field(spec, MarketParams(0.02, 0.08, 0.15))
    a = integrate_terminal(field, [1.0, 1.0], TimeGrid(0.0, 1.0, 300)).values
    b = integrate_terminal(field, [1.0, 1.0], TimeGrid(0.0, 1.0, 300)).values
    assert a.tobytes() == b.tobytes()


def test_dense_output():
    grid = TimeGrid(0.0, 1.0, 20)
    traj = integrate_terminal(DECAY, [1.0], grid)
    np.testing.assert_array_equal(traj(grid.nodes), traj.values)
    assert traj(0.5).shape == (1,)
    t = np.linspace(0.0, 1.0, 101)
    np.testing.assert_allclose(traj(t)[:, 0], np.exp(1.0 - t), atol=1e-6)
    with pytest.raises(ValueError):
        traj(1.5)


def test_nonfinite_state_reports_node():
    field = VectorField(1, lambda s, y: np.array([np.nan]) if s < 0.5 else -y)
    with pytest.raises(NonFiniteState) as info:
        integrate_terminal(field, [1.0], TimeGrid(0.0, 1.0, 10))
    assert info.value.time < 0.6


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        integrate_terminal(DECAY, [1.0, 2.0], TimeGrid(0.0, 1.0, 4))
    with pytest.raises(DimensionMismatch):
        integrate_terminal(VectorField(1, lambda s, y: np.zeros(3)), [1.0], TimeGrid(0.0, 1.0, 4))
