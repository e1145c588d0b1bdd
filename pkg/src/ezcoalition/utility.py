"""Epstein-Zin aggregator and the value-factor representation of recursive utility.

For a deterministic feedback strategy the utility of agent i is
``Y_i(s) = theta_i(s) X(s)^(1-gamma) / (1-gamma)``, where theta_i solves a
scalar terminal-value ODE driven by the strategy (``theta_for_strategy``).
``theta_bounds`` builds the linear comparison ODEs whose solutions bracket
theta_i from below and above.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError, PositivityLoss
from .model import CoalitionSpec, MarketParams, StrategyProfile, TimeGrid
from .ode import Trajectory, VectorField, integrate_terminal


@dataclass(frozen=True)
class Aggregator:
    """Preference triple of one agent."""

    gamma: float
    alpha: float
    rho: float

    def __call__(self, q, y):
        return aggregator_value(self, q, y)


def aggregator_value(agg: Aggregator, q: ArrayLike, y: ArrayLike):
    """g(q, y) = a^-1 ((1-g) y)^(1 - a/(1-g)) [q^a - rho ((1-g) y)^(a/(1-g))].

    Vectorised over ``q`` and ``y``. Raises DomainError for y <= 0 or q < 0.
    """
    g, a = agg.gamma, agg.alpha
    q = np.asarray(q, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(~(y > 0)):
        raise DomainError("aggregator needs y > 0")
    if np.any(~(q >= 0)):
        raise DomainError("aggregator needs q >= 0")
    log_u = np.log((1.0 - g) * y)
    k = a / (1.0 - g)
    out = (np.exp((1.0 - k) * log_u) * (q**a - agg.rho * np.exp(k * log_u))) / a
    return out[()] if out.ndim == 0 else out


def terminal_reward(x, gamma: float):
    """h(x) = x^(1-gamma) / (1-gamma)."""
    return np.asarray(x, dtype=np.float64) ** (1.0 - gamma) / (1.0 - gamma)


def utility_value(theta: ArrayLike, x: ArrayLike, gamma: float):
    """Recursive utility theta * x^(1-gamma) / (1-gamma) at wealth x."""
    theta = np.asarray(theta, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(theta > 0)) or np.any(~(x > 0)):
        raise DomainError("utility_value needs positive theta and wealth")
    out = theta * x ** (1.0 - gamma) / (1.0 - gamma)
    return out[()] if out.ndim == 0 else out


class Provenance(enum.Enum):
    FOR_STRATEGY = "ForStrategy"
    EQUILIBRIUM = "Equilibrium"
    ONE_AGENT = "OneAgent"
    PRECOMMITTED_CRRA = "PrecommittedCRRA"


@dataclass(frozen=True)
class ThetaSystem:
    """Value factors theta_1..theta_N on a grid, checked positive at every node."""

    trajectory: Trajectory
    spec: CoalitionSpec
    provenance: Provenance

    def __post_init__(self):
        vals = self.trajectory.values
        bad = np.argwhere(~(vals > 0))
        if bad.size:
            node, comp = bad[0]
            t = self.trajectory.grid.nodes[node]
            raise PositivityLoss(
                f"theta_{comp + 1} is not positive at t={t:.6g} (value {vals[node, comp]:.6g})",
                time=float(t),
                component=int(comp),
            )

    @property
    def grid(self) -> TimeGrid:
        return self.trajectory.grid

    @property
    def values(self) -> NDArray[np.float64]:
        return self.trajectory.values

    @property
    def n_agents(self) -> int:
        return self.trajectory.dimension

    def __call__(self, t):
        return self.trajectory(t)


def _require_positive(s, theta):
    if not np.all(theta > 0):
        i = int(np.argmin(theta))
        raise PositivityLoss(
            f"theta_{i + 1} reached {theta[i]:.6g} at t={s:.6g}", time=float(s), component=i
        )


def strategy_field(
    spec: CoalitionSpec, market: MarketParams, strategy: StrategyProfile, rhos=None
) -> VectorField:
    """Right-hand side of the value-factor ODE for a fixed strategy.

    theta_i' = -(1-g) theta_i [(mu-nu) P - C + nu - g sigma^2 P^2 / 2 - rho_i / a]
               - (1-g)/a theta_i^((1-g-a)/(1-g)) c_i^a,
    with P, C the total investment and consumption fractions.
    """
    g, a = spec.gamma, spec.alpha
    rho = spec.rhos if rhos is None else np.asarray(rhos, dtype=np.float64)
    p_src = (1.0 - g - a) / (1.0 - g)

    def f(s, theta):
        _require_positive(s, theta)
        pi = strategy.pi(s)
        c = strategy.c(s)
        P, C = pi.sum(), c.sum()
        rate = market.excess_return * P - C + market.nu - 0.5 * g * market.sigma**2 * P * P - rho / a
        src = (1.0 - g) / a * np.exp(p_src * np.log(theta)) * c**a
        return -(1.0 - g) * theta * rate - src

    return VectorField(spec.n_agents, f)


def theta_for_strategy(
    spec: CoalitionSpec, market: MarketParams, strategy: StrategyProfile, grid: TimeGrid
) -> ThetaSystem:
    """Value factors of every agent's recursive utility under ``strategy``."""
    if strategy.n_agents != spec.n_agents:
        raise ValueError(f"strategy has {strategy.n_agents} agents, spec has {spec.n_agents}")
    traj = integrate_terminal(strategy_field(spec, market, strategy), np.ones(spec.n_agents), grid)
    return ThetaSystem(traj, spec, Provenance.FOR_STRATEGY)


@dataclass(frozen=True)
class BoundPair:
    """Uniform bounds delta <= theta_i(s) <= kappa, plus the per-agent values."""

    delta: float
    kappa: float
    agent_delta: tuple[float, ...] = ()
    agent_kappa: tuple[float, ...] = ()

    def contains(self, values: ArrayLike, slack: float = 0.0) -> bool:
        v = np.asarray(values)
        return bool(np.all(v >= self.delta - slack) and np.all(v <= self.kappa + slack))


def _linear_field(spec, market, strategy, source):
    g, a = spec.gamma, spec.alpha
    rho = spec.rhos

    def f(s, theta):
        pi = strategy.pi(s)
        c = strategy.c(s)
        P, C = pi.sum(), c.sum()
        rate = market.excess_return * P - C + market.nu - 0.5 * g * market.sigma**2 * P * P - rho / a
        return -(1.0 - g) * theta * rate - source(theta, c)

    return VectorField(spec.n_agents, f)


def theta_bounds(
    spec: CoalitionSpec, market: MarketParams, strategy: StrategyProfile, grid: TimeGrid
) -> BoundPair:
    """Comparison bounds for the value factors of ``strategy``.

    delta_i is the grid minimum of the solution with the consumption source
    dropped. kappa_i is the grid maximum of a linear majorant: the source
    with theta^p replaced by 1 + theta when gamma <= 1 - alpha, or by
    delta_i^p when gamma > 1 - alpha (p = (1-g-a)/(1-g)). delta is computed
    before kappa because the second majorant needs it.
    """
    g, a = spec.gamma, spec.alpha
    n = spec.n_agents
    ones = np.ones(n)

    lower = integrate_terminal(
        _linear_field(spec, market, strategy, lambda th, c: 0.0), ones, grid
    )
    delta_i = lower.values.min(axis=0)
    _require_positive(grid.t0, delta_i)

    coef = (1.0 - g) / a
    if g <= 1.0 - a:
        source = lambda th, c: coef * (1.0 + th) * c**a  # noqa: E731
    else:
        cap = delta_i ** ((1.0 - g - a) / (1.0 - g))
        source = lambda th, c: coef * cap * c**a  # noqa: E731
    upper = integrate_terminal(_linear_field(spec, market, strategy, source), ones, grid)
    kappa_i = upper.values.max(axis=0)
    return BoundPair(
        float(delta_i.min()), float(kappa_i.max()), tuple(map(float, delta_i)), tuple(map(float, kappa_i))
    )
