import numpy as np
import pytest

from ezcoalition import solve_equilibrium
from ezcoalition.config import FIGURE_1, FIGURE_2

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def bernoulli_theta(k, source, gamma_exp, tau):
    """Closed form for theta' + ... that becomes u' = -k u - source after u = theta^(1/gamma_exp).

    u(T) = 1, so u = e^{k tau} + source (e^{k tau} - 1)/k and theta = u^gamma_exp.
    """
    E = np.exp(k * tau)
    u = E + source * (E - 1.0) / k if k != 0 else 1.0 + source * tau
    return u**gamma_exp


@pytest.fixture(scope="session")
def fig1():
    return FIGURE_1


@pytest.fixture(scope="session")
def fig2():
    return FIGURE_2


@pytest.fixture(scope="session")
def fig1_sol():
    return solve_equilibrium(FIGURE_1.spec, FIGURE_1.market, FIGURE_1.grid)


@pytest.fixture(scope="session")
def fig2_sol():
    return solve_equilibrium(FIGURE_2.spec, FIGURE_2.market, FIGURE_2.grid)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
