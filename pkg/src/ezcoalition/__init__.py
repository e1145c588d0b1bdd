"""Equilibrium investment-consumption strategies for a coalition with Epstein-Zin utility."""

from .baselines import (
    OneAgentSolution,
    PrecommittedSolution,
    comparison_table,
    crra_equilibrium,
    one_agent_mc_oracle,
    solve_one_agent,
    solve_precommitted_crra,
)
from .equilibrium import (
    EquilibriumSolution,
    PerturbationReport,
    check_consumption_ordering,
    check_theta_monotonicity,
    evaluate_strategy,
    random_perturbation_sweep,
    solve_equilibrium,
    verify_equilibrium,
)
from .errors import (
    BadEpsilon,
    CoalitionError,
    ConfigError,
    DimensionMismatch,
    DomainError,
    GridMismatch,
    NonFiniteState,
    NonPositiveWealth,
    NotCRRA,
    PositivityLoss,
)
from .model import (
    A1Status,
    Branch,
    CoalitionSpec,
    MarketParams,
    StrategyProfile,
    TimeGrid,
    classify_a1,
    validate,
)
from .montecarlo import (
    PathSet,
    UtilityCheckReport,
    check_utility_representation,
    crra_expectation_check,
    simulate_wealth,
)
from .ode import Trajectory, VectorField, integrate_terminal, observed_order
from .utility import (
    Aggregator,
    BoundPair,
    ThetaSystem,
    aggregator_value,
    theta_bounds,
    theta_for_strategy,
    utility_value,
)

__version__ = "0.1.0"
