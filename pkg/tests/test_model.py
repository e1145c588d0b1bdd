import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ezcoalition import Branch, CoalitionSpec, MarketParams, StrategyProfile, TimeGrid, classify_a1, validate

MARKET = MarketParams(nu=0.02, mu=0.08, sigma=0.15)


def test_valid_parameters_give_no_messages():
    assert validate(CoalitionSpec(0.5, 0.5, 1.0, (0.01,)), MARKET) == []


@pytest.mark.parametrize(
    "spec, market, fragment",
    [
        (CoalitionSpec(1.0, 0.5, 1.0, (0.01,)), MARKET, "gamma must lie in (0,1)"),
        (CoalitionSpec(0.5, 0.5, 1.0, (0.01,)), MarketParams(0.02, 0.08, 0.0), "sigma must be positive"),
        (CoalitionSpec(0.5, 1.2, 1.0, (0.01,)), MARKET, "alpha must lie in (0,1)"),
        (CoalitionSpec(0.5, 0.5, 0.0, (0.01,)), MARKET, "horizon must be positive"),
        (CoalitionSpec(0.5, 0.5, 1.0, (-0.1,)), MARKET, "discount rate 1"),
        (CoalitionSpec(0.5, 0.5, 1.0, ()), MARKET, "at least one discount rate"),
        (CoalitionSpec(0.5, 0.5, 1.0, (0.01,)), MarketParams(0.08, 0.08, 0.15), "mu must exceed nu"),
        (CoalitionSpec(0.5, 0.5, 1.0, (0.0, 0.1), (0.3, 0.7)), MARKET, "uniform Pareto"),
        (CoalitionSpec(0.5, 0.5, 1.0, (0.01,)), MarketParams(math.nan, 0.08, 0.15), "nu must be finite"),
    ],
)
def test_violations_are_reported(spec, market, fragment):
    problems = validate(spec, market)
    assert any(fragment in p for p in problems), problems


def test_every_violation_collected():
    problems = validate(CoalitionSpec(1.5, 0.0, -1.0, (-1.0,)), MarketParams(0.1, 0.05, -1.0))
    assert len(problems) >= 5


def test_uniform_weights_accepted():
    assert validate(CoalitionSpec(0.5, 0.5, 1.0, (0.0, 0.1), (0.5, 0.5)), MARKET) == []


def test_a1_figure2_branch_two():
    st_ = classify_a1(CoalitionSpec(0.8, 0.25, 1.0, (0.0, 0.18)), MarketParams(0.1, 0.2, 0.05))
    assert st_.branch is Branch.BRANCH_TWO and st_.branch_two and st_.holds


def test_a1_figure1_neither_with_sigma():
    spec = CoalitionSpec(0.1, 0.3, 1.0, (0.01, 0.2))
    st_ = classify_a1(spec, MARKET)
    # 0.3*0.02 + 0.06^2 / (2*0.1*0.15) = 0.006 + 0.12
    assert st_.rate_bound == pytest.approx(0.126, abs=1e-12)
    assert st_.branch is Branch.NEITHER and not st_.holds
    assert "0.126" in st_.detail


def test_a1_figure1_sigma_squared_reading():
    st_ = classify_a1(CoalitionSpec(0.1, 0.3, 1.0, (0.01, 0.2)), MARKET, "sigma_squared")
    # 0.006 + 0.0036 / (2*0.1*0.0225) = 0.006 + 0.8
    assert st_.rate_bound == pytest.approx(0.806, abs=1e-12)
    assert st_.branch is Branch.BRANCH_ONE


def test_a1_bad_denominator():
    with pytest.raises(ValueError):
        classify_a1(CoalitionSpec(0.1, 0.3, 1.0, (0.0,)), MARKET, "sigma_cubed")


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_a1_zero_rates_branch_one(gamma, alpha):
    assert classify_a1(CoalitionSpec(gamma, alpha, 1.0, (0.0, 0.0)), MARKET).branch_one


@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_a1_branch_one_monotone_in_rho(r1, r2):
    # lowering the largest discount rate can only help
    lo, hi = sorted((r1, r2))
    spec = CoalitionSpec(0.3, 0.4, 1.0, (hi,))
    if classify_a1(spec, MARKET).branch_one:
        assert classify_a1(spec.with_rates((lo,)), MARKET).branch_one


def test_crra_flag_is_exact():
    assert CoalitionSpec(0.5, 0.5, 1.0, (0.0,)).is_crra
    assert not CoalitionSpec(0.5 + 1e-15, 0.5, 1.0, (0.0,)).is_crra


def test_time_grid():
    g = TimeGrid(0.0, 1.0, 3)
    assert len(g) == 4 and g.dt == pytest.approx(1 / 3)
    assert g.nodes[-1] == 1.0 and g.nodes[0] == 0.0
    assert np.all(np.diff(g.nodes) > 0)
    assert g.refined(2).n_steps == 6
    with pytest.raises(ValueError):
        g.nodes[0] = 5.0
    for bad in ((0.0, 1.0, 0), (1.0, 1.0, 4), (0.0, 1.0, 2.5)):
        with pytest.raises(ValueError):
            TimeGrid(*bad)


def test_piecewise_constant_is_right_continuous():
    prof = StrategyProfile.piecewise([0.0, 0.5, 1.0], [1.0, 2.0, 3.0], [0.1, 0.2, 0.3])
    assert prof.pi(0.49)[0] == 1.0
    assert prof.pi(0.5)[0] == 2.0
    assert prof.c(1.0)[0] == pytest.approx(0.3)
    assert prof.pi(np.array([0.0, 0.7])).shape == (2, 1)


def test_piecewise_linear():
    prof = StrategyProfile.piecewise([0.0, 1.0], [[0.0, 2.0], [1.0, 4.0]], [[0.0, 0.0], [1.0, 1.0]], "linear")
    np.testing.assert_allclose(prof.pi(0.25), [0.25, 2.5])
    assert prof.total_investment(0.25) == pytest.approx(2.75)


def test_admissibility_report():
    grid = TimeGrid(0.0, 1.0, 4)
    assert StrategyProfile.zero(2).check_admissible(grid) == []
    bad = StrategyProfile.constant([1.0, -1.0], [0.0, np.inf])
    msgs = bad.check_admissible(grid)
    assert any("pi has negative" in m for m in msgs) and any("c has non-finite" in m for m in msgs)


def test_constant_shape_mismatch():
    with pytest.raises(ValueError):
        StrategyProfile.constant([1.0, 2.0], [0.0])


@settings(max_examples=50)
@given(
    st.lists(st.floats(0.0, 100.0), min_size=1, max_size=4),
    st.floats(0.0, 1.0),
)
def test_constant_profile_evaluation(pis, t):
    prof = StrategyProfile.constant(pis, [0.5] * len(pis))
    np.testing.assert_array_equal(prof.pi(t), pis)
    assert prof.total_consumption(t) == pytest.approx(0.5 * len(pis))
    assert np.all(np.isfinite(prof.c(np.linspace(0, 1, 7))))
