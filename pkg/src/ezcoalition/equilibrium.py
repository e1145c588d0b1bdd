"""Equilibrium value factors, equilibrium strategies and their verification.

The coalition's equilibrium is described by N coupled value factors theta_i
solving a terminal-value ODE. Given theta, the aggregate investment fraction
is the Merton ratio (mu-nu)/(gamma sigma^2) and agent i consumes the fraction

    c_i(t) = S(t)^(1/(alpha-1)) * theta_i(t)^e,   S = sum_j theta_j,
    e = (1-gamma-alpha) / ((1-alpha)(1-gamma)).

``verify_equilibrium`` checks the equilibrium property directly: it splices a
deviation onto [t, t+eps), solves the value factors of the spliced strategy
over that window and confirms the coalition objective does not improve at
first order in eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import BadEpsilon, PositivityLoss
from .model import (
    A1Status,
    CoalitionSpec,
    MarketParams,
    StrategyProfile,
    TimeGrid,
    classify_a1,
    validate,
)
from .ode import VectorField, integrate_terminal
from .utility import Provenance, ThetaSystem, strategy_field, theta_for_strategy

DEFAULT_EPSILONS = (1e-1, 1e-2, 1e-3, 1e-4)
DEFAULT_SLOPE_TOL = 1e-6


def merton_fraction(spec: CoalitionSpec, market: MarketParams) -> float:
    """Aggregate equilibrium investment fraction (mu-nu)/(gamma sigma^2)."""
    return market.excess_return / (spec.gamma * market.sigma**2)


def consumption_from_theta(spec: CoalitionSpec, theta: ArrayLike) -> NDArray[np.float64]:
    """Equilibrium consumption fractions for value factors ``theta`` (last axis = agents)."""
    theta = np.asarray(theta, dtype=np.float64)
    a = spec.alpha
    S = theta.sum(axis=-1, keepdims=True)
    return np.exp(np.log(S) / (a - 1.0) + spec.consumption_exponent * np.log(theta))


def equilibrium_field(spec: CoalitionSpec, market: MarketParams) -> VectorField:
    """Right-hand side of the coupled equilibrium ODE for theta_1..theta_N."""
    g, a = spec.gamma, spec.alpha
    rho = spec.rhos
    e = spec.consumption_exponent
    growth = market.nu + market.excess_return**2 / (2.0 * g * market.sigma**2)

    def f(s, theta):
        if not np.all(theta > 0):
            i = int(np.argmin(theta))
            raise PositivityLoss(
                f"theta_{i + 1} reached {theta[i]:.6g} at t={s:.6g}", time=float(s), component=i
            )
        log_S = np.log(theta.sum())
        pw = np.exp(e * np.log(theta))
        coupling = np.exp(log_S / (a - 1.0)) * pw.sum()
        source = (1.0 - g) / a * pw * np.exp(a / (a - 1.0) * log_S)
        return -(1.0 - g) * theta * (growth - coupling) + (1.0 - g) * rho / a * theta - source

    return VectorField(spec.n_agents, f)


@dataclass(frozen=True)
class EquilibriumSolution:
    """Solved equilibrium: value factors plus the strategies built from them."""

    spec: CoalitionSpec
    market: MarketParams
    theta: ThetaSystem
    a1: A1Status

    @property
    def grid(self) -> TimeGrid:
        return self.theta.grid

    @property
    def nodes(self):
        return self.theta.grid.nodes

    @property
    def total_investment(self) -> float:
        return merton_fraction(self.spec, self.market)

    def total_investment_at(self, t):
        return np.full(np.shape(t), self.total_investment)[()]

    def consumption(self, t) -> NDArray[np.float64]:
        """Equilibrium consumption fractions at time(s) t, using dense theta."""
        return consumption_from_theta(self.spec, self.theta(t))

    @cached_property
    def consumption_values(self) -> NDArray[np.float64]:
        """(n+1, N) consumption fractions at the grid nodes."""
        return consumption_from_theta(self.spec, self.theta.values)

    def value_factor(self, t=None):
        """v = mean of theta_i; at the nodes when ``t`` is None."""
        vals = self.theta.values if t is None else self.theta(t)
        return np.mean(vals, axis=-1)

    @cached_property
    def strategy(self) -> StrategyProfile:
        """Per-agent profile; total investment is split equally across agents."""
        n = self.spec.n_agents
        share = self.total_investment / n
        return StrategyProfile.from_functions(
            n,
            lambda t: np.full((len(t), n), share),
            lambda t: consumption_from_theta(self.spec, self.theta(t)),
        )


@dataclass(frozen=True)
class StrategyEvaluation:
    """An arbitrary strategy together with its value factors.

    Lets ``verify_equilibrium`` run on candidates that are not equilibria.
    """

    spec: CoalitionSpec
    market: MarketParams
    strategy: StrategyProfile
    theta: ThetaSystem


def evaluate_strategy(
    spec: CoalitionSpec, market: MarketParams, strategy: StrategyProfile, grid: TimeGrid
) -> StrategyEvaluation:
    return StrategyEvaluation(spec, market, strategy, theta_for_strategy(spec, market, strategy, grid))


def solve_equilibrium(
    spec: CoalitionSpec,
    market: MarketParams,
    grid: TimeGrid,
    a1_variance_denominator: str = "sigma",
) -> EquilibriumSolution:
    """Integrate the equilibrium ODE backward from theta_i(T) = 1.

    (A1) is not required. If theta loses positivity the raised
    PositivityLoss names the (A1) status of the inputs.
    """
    problems = validate(spec, market)
    if problems:
        raise ValueError("invalid parameters: " + "; ".join(problems))
    a1 = classify_a1(spec, market, a1_variance_denominator)
    try:
        traj = integrate_terminal(equilibrium_field(spec, market), np.ones(spec.n_agents), grid)
        theta = ThetaSystem(traj, spec, Provenance.EQUILIBRIUM)
    except PositivityLoss as exc:
        raise PositivityLoss(
            f"{exc}; (A1) status: {a1.branch.value} ({a1.detail})",
            time=exc.time,
            component=exc.component,
        ) from exc
    return EquilibriumSolution(spec, market, theta, a1)


def hamiltonian_maximizer(
    spec: CoalitionSpec, market: MarketParams, theta: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Pointwise maximiser (pi, c) of the coalition Hamiltonian at value factors ``theta``.

    Investment is the Merton total split equally.
    """
    theta = np.asarray(theta, dtype=np.float64)
    n = spec.n_agents
    pi = np.full(n, merton_fraction(spec, market) / n)
    return pi, consumption_from_theta(spec, theta)


def coalition_hamiltonian(
    spec: CoalitionSpec, market: MarketParams, theta: ArrayLike, pi: ArrayLike, c: ArrayLike
) -> float:
    """Coalition Hamiltonian at unit wealth, without the theta' term."""
    g, a = spec.gamma, spec.alpha
    theta = np.asarray(theta, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    v = theta.mean()
    P = pi.sum()
    drift = market.nu + market.excess_return * P - c.sum() - 0.5 * g * (market.sigma * P) ** 2
    own = (c**a * theta ** (1.0 - a / (1.0 - g)) - spec.rhos * theta).mean() / a
    return float(v * drift + own)


@dataclass(frozen=True)
class PerturbationReport:
    """Objective changes from splicing a deviation onto [t, t + eps)."""

    t: float
    x: float
    base_value: float
    epsilons: tuple[float, ...]
    perturbed_values: tuple[float, ...]
    slopes: tuple[float, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(s <= self.tolerance for s in self.slopes)

    @property
    def max_slope(self) -> float:
        return max(self.slopes)


def _as_profile(perturbation, n) -> StrategyProfile:
    if isinstance(perturbation, StrategyProfile):
        return perturbation
    pi, c = perturbation
    prof = StrategyProfile.constant(pi, c)
    if prof.n_agents != n:
        raise ValueError(f"perturbation has {prof.n_agents} agents, expected {n}")
    return prof


def verify_equilibrium(
    sol,
    t: float,
    perturbation,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    tolerance: float = DEFAULT_SLOPE_TOL,
    x: float = 1.0,
    substeps: int = 32,
) -> PerturbationReport:
    """Finite-eps check of the equilibrium inequality at time ``t``.

    ``sol`` is an EquilibriumSolution or StrategyEvaluation (anything with
    ``spec``, ``market`` and ``theta``). ``perturbation`` is a
    StrategyProfile or a ``(pi, c)`` pair of constant per-agent fractions,
    active on [t, t + eps). On that window the value factors of the spliced
    strategy are solved backward from theta_i(t + eps); beyond it they equal
    the base theta_i. The reported slopes are (J^eps - J) / eps with
    J = mean_i theta_i(t) x^(1-gamma) / (1-gamma).
    """
    spec, market, theta = sol.spec, sol.market, sol.theta
    g = spec.gamma
    T = theta.grid.T
    eps = [float(e) for e in epsilons]
    if any(e <= 0 for e in eps):
        raise BadEpsilon("epsilons must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise BadEpsilon("epsilons must be strictly decreasing")
    if not theta.grid.t0 <= t < T:
        raise BadEpsilon(f"t={t} outside [{theta.grid.t0}, {T})")
    slack = 1e-12 * max(1.0, abs(T))
    if t + eps[0] > T + slack:
        raise BadEpsilon(f"t + eps = {t + eps[0]} exceeds horizon {T}")

    profile = _as_profile(perturbation, spec.n_agents)
    deviation = strategy_field(spec, market, profile)
    scale = x ** (1.0 - g) / (1.0 - g)
    base = float(np.mean(theta(t)) * scale)
    values, slopes = [], []
    for e in eps:
        end = min(t + e, T)
        window = TimeGrid(t, end, substeps)
        traj = integrate_terminal(deviation, theta(end), window)
        ThetaSystem(traj, spec, Provenance.FOR_STRATEGY)  # positivity check
        j_eps = float(np.mean(traj.values[0]) * scale)
        values.append(j_eps)
        slopes.append((j_eps - base) / e)
    return PerturbationReport(float(t), float(x), base, tuple(eps), tuple(values), tuple(slopes), tolerance)


def random_perturbation_sweep(
    sol,
    times: Sequence[float] = (0.1, 0.3, 0.5, 0.7, 0.9),
    n_draws: int = 20,
    seed: int = 0,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    tolerance: float = DEFAULT_SLOPE_TOL,
    max_consumption: float = 2.0,
) -> list[PerturbationReport]:
    """Seeded constant deviations: pi_i ~ U[0, 2*Merton], c_i ~ U[0, max_consumption]."""
    rng = np.random.default_rng(seed)
    n = sol.spec.n_agents
    pi_hi = 2.0 * merton_fraction(sol.spec, sol.market)
    reports = []
    for t in times:
        for _ in range(n_draws):
            pi = rng.uniform(0.0, pi_hi, n)
            c = rng.uniform(0.0, max_consumption, n)
            reports.append(verify_equilibrium(sol, t, (pi, c), epsilons, tolerance))
    return reports


@dataclass(frozen=True)
class OrderingCheck:
    """Result of a pointwise ordering check; counterexamples are (i, j, t, lhs, rhs)."""

    passed: bool
    regime: str
    counterexamples: list = field(default_factory=list)


def _pairwise(values, rhos, nodes, want, slack, limit=20):
    bad = []
    n = len(rhos)
    for i in range(n):
        for j in range(n):
            if i == j or rhos[i] > rhos[j]:
                continue
            vi, vj = values[:, i], values[:, j]
            if want == "ge":
                viol = vi < vj - slack
            elif want == "le":
                viol = vi > vj + slack
            else:
                viol = np.abs(vi - vj) > slack
            for k in np.flatnonzero(viol)[:limit]:
                bad.append((i + 1, j + 1, float(nodes[k]), float(vi[k]), float(vj[k])))
    return bad


def check_theta_monotonicity(sol: EquilibriumSolution, slack: float = 1e-10) -> OrderingCheck:
    """rho_i <= rho_j must give theta_i >= theta_j at every node."""
    bad = _pairwise(sol.theta.values, sol.spec.discount_rates, sol.nodes, "ge", slack)
    return OrderingCheck(not bad, "theta non-increasing in rho", bad)


def check_consumption_ordering(
    sol: EquilibriumSolution, spec: CoalitionSpec | None = None, slack: float = 1e-10
) -> OrderingCheck:
    """Consumption ordering across discount rates, by regime.

    gamma < 1-alpha: lower rho consumes more. gamma > 1-alpha: lower rho
    consumes less. gamma = 1-alpha: all agents consume the same fraction.
    """
    spec = spec or sol.spec
    g, a = spec.gamma, spec.alpha
    if spec.is_crra:
        want, regime = "eq", "gamma = 1-alpha: consumption independent of rho"
    elif g < 1.0 - a:
        want, regime = "ge", "gamma < 1-alpha: lower rho consumes more"
    else:
        want, regime = "le", "gamma > 1-alpha: lower rho consumes less"
    bad = _pairwise(sol.consumption_values, spec.discount_rates, sol.nodes, want, slack)
    return OrderingCheck(not bad, regime, bad)


def equilibrium_lower_bound(spec: CoalitionSpec, market: MarketParams) -> float | None:
    """Lower bound on every theta_i when gamma >= 1-alpha, else None.

    Under that condition the factor with the largest discount rate dominates
    exp((1-g)(nu + (mu-nu)^2/(2 g sigma^2) - rho_max/a)(T - t)), which is at
    least exp(-T (1-g) |nu + (mu-nu)^2/(2 g sigma^2) - rho_max/a|).
    """
    g, a = spec.gamma, spec.alpha
    if g < 1.0 - a:
        return None
    rate = market.nu + market.excess_return**2 / (2 * g * market.sigma**2) - max(spec.discount_rates) / a
    return float(np.exp(-spec.horizon * (1.0 - g) * abs(rate)))
