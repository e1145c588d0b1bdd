"""Parameter containers, validation, the (A1) classifier, grids and strategies.

Everything here is immutable after construction. ``validate`` reports
problems as a list of messages rather than raising, so configuration front
ends can show every problem at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray


@dataclass(frozen=True)
class MarketParams:
    """One riskless bond and one stock with constant coefficients."""

    nu: float  # riskless rate
    mu: float  # stock appreciation rate
    sigma: float  # stock volatility

    @property
    def excess_return(self) -> float:
        return self.mu - self.nu

    @property
    def sharpe_drift(self) -> float:
        """(mu - nu)^2 / (2 sigma^2); the gain from optimal risk taking at unit risk aversion."""
        return self.excess_return**2 / (2.0 * self.sigma**2)


@dataclass(frozen=True)
class CoalitionSpec:
    """Preferences shared by the coalition plus each agent's discount rate.

    Pareto weights are uniform (1/N). ``pareto_weights`` exists only so that a
    caller passing explicit weights gets a validation error when they are not
    uniform.
    """

    gamma: float
    alpha: float
    horizon: float
    discount_rates: tuple[float, ...]
    pareto_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "discount_rates", tuple(float(r) for r in self.discount_rates))
        if self.pareto_weights is not None:
            object.__setattr__(self, "pareto_weights", tuple(float(w) for w in self.pareto_weights))

    @property
    def n_agents(self) -> int:
        return len(self.discount_rates)

    @property
    def rhos(self) -> NDArray[np.float64]:
        return np.asarray(self.discount_rates, dtype=np.float64)

    @property
    def is_crra(self) -> bool:
        # exact on purpose: near-CRRA inputs take the recursive path
        return self.gamma == 1.0 - self.alpha

    @property
    def consumption_exponent(self) -> float:
        """(1-gamma-alpha) / ((1-alpha)(1-gamma)), the power of theta_i in c_i."""
        g, a = self.gamma, self.alpha
        return (1.0 - g - a) / ((1.0 - a) * (1.0 - g))

    def with_rates(self, rates: Sequence[float]) -> "CoalitionSpec":
        return CoalitionSpec(self.gamma, self.alpha, self.horizon, tuple(rates))


class Branch(enum.Enum):
    BRANCH_ONE = "BranchOne"
    BRANCH_TWO = "BranchTwo"
    NEITHER = "Neither"


@dataclass(frozen=True)
class A1Status:
    """Outcome of checking the two sufficient conditions for well-posedness.

    ``branch`` summarises: BranchTwo when it holds (it needs no market data),
    else BranchOne when it holds, else Neither. ``branch_one`` and
    ``branch_two`` carry the individual verdicts since both may hold.
    """

    branch: Branch
    detail: str
    branch_one: bool = False
    branch_two: bool = False
    rate_bound: float = math.nan

    @property
    def holds(self) -> bool:
        return self.branch_one or self.branch_two


def validate(spec: CoalitionSpec, market: MarketParams) -> list[str]:
    """Return every violated parameter invariant; an empty list means valid."""
    out = []
    for name, value in (
        ("nu", market.nu),
        ("mu", market.mu),
        ("sigma", market.sigma),
        ("gamma", spec.gamma),
        ("alpha", spec.alpha),
        ("horizon", spec.horizon),
    ):
        if not math.isfinite(value):
            out.append(f"{name} must be finite, got {value!r}")
    if not market.mu > market.nu:
        out.append(f"mu must exceed nu (mu={market.mu}, nu={market.nu})")
    if not market.sigma > 0:
        out.append(f"sigma must be positive, got {market.sigma}")
    if not 0 < spec.gamma < 1:
        out.append(f"gamma must lie in (0,1), got {spec.gamma}")
    if not 0 < spec.alpha < 1:
        out.append(f"alpha must lie in (0,1), got {spec.alpha}")
    if not spec.horizon > 0:
        out.append(f"horizon must be positive, got {spec.horizon}")
    if spec.n_agents < 1:
        out.append("at least one discount rate is required")
    for i, rho in enumerate(spec.discount_rates):
        if not (math.isfinite(rho) and rho >= 0):
            out.append(f"discount rate {i + 1} must be finite and >= 0, got {rho}")
    if spec.pareto_weights is not None:
        w = spec.pareto_weights
        n = spec.n_agents
        if len(w) != n or any(abs(x - 1.0 / n) > 1e-12 for x in w):
            out.append("only uniform Pareto weights 1/N are supported")
    return out


def classify_a1(
    spec: CoalitionSpec, market: MarketParams, variance_denominator: str = "sigma"
) -> A1Status:
    """Check the sufficient conditions for a positive equilibrium solution.

    Branch one bounds the largest discount rate by
    ``alpha*nu + (mu-nu)^2 / (2*gamma*s)``, where ``s`` is sigma
    (``variance_denominator="sigma"``, the default) or sigma squared
    (``"sigma_squared"``). Branch two is ``gamma >= 1 - alpha``.
    """
    if variance_denominator == "sigma":
        scale = market.sigma
    elif variance_denominator == "sigma_squared":
        scale = market.sigma**2
    else:
        raise ValueError(f"unknown variance_denominator {variance_denominator!r}")
    g, a = spec.gamma, spec.alpha
    bound = a * market.nu + market.excess_return**2 / (2.0 * g * scale)
    rho_max = max(spec.discount_rates)
    one = 0 < g < 1 and rho_max <= bound
    two = 1.0 - a <= g < 1
    parts = [
        f"branch one {'holds' if one else 'fails'}: max rho = {rho_max:.6g} vs bound {bound:.6g}",
        f"branch two {'holds' if two else 'fails'}: gamma = {g:.6g} vs 1-alpha = {1 - a:.6g}",
    ]
    if two:
        branch = Branch.BRANCH_TWO
    elif one:
        branch = Branch.BRANCH_ONE
    else:
        branch = Branch.NEITHER
    return A1Status(branch, "; ".join(parts), one, two, bound)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t0 = s_0 < ... < s_n = T."""

    t0: float
    T: float
    n_steps: int

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not self.T > self.t0:
            raise ValueError(f"need T > t0, got t0={self.t0}, T={self.T}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.n_steps

    @cached_property
    def nodes(self) -> NDArray[np.float64]:
        s = self.t0 + self.dt * np.arange(self.n_steps + 1)
        s[-1] = self.T
        s.flags.writeable = False
        return s

    def refined(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t0, self.T, self.n_steps * factor)

    def __len__(self):
        return self.n_steps + 1


TimeFn = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def _piecewise(nodes, values, kind) -> TimeFn:
    nodes = np.asarray(nodes, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if kind == "constant":

        def fn(t):
            k = np.searchsorted(nodes, t, side="right") - 1
            return values[np.clip(k, 0, len(nodes) - 1)]

    elif kind == "linear":

        def fn(t):
            return np.stack(
                [np.interp(t, nodes, values[:, i]) for i in range(values.shape[1])], axis=-1
            )

    else:
        raise ValueError(f"unknown interpolation {kind!r}")
    return fn


@dataclass(frozen=True)
class StrategyProfile:
    """Per-agent feedback fractions of wealth: investment pi_i(t), consumption c_i(t).

    Internally each side is a function mapping a 1-d array of times of length
    m to an (m, N) array. Use the constructors rather than building one
    directly.
    """

    n_agents: int
    pi_fn: TimeFn
    c_fn: TimeFn
    interpolation: str = "function"

    @classmethod
    def constant(cls, pi: ArrayLike, c: ArrayLike) -> "StrategyProfile":
        pi = np.atleast_1d(np.asarray(pi, dtype=np.float64)).copy()
        c = np.atleast_1d(np.asarray(c, dtype=np.float64)).copy()
        if pi.shape != c.shape or pi.ndim != 1:
            raise ValueError("pi and c must be 1-d arrays of equal length")
        return cls(
            len(pi),
            lambda t: np.broadcast_to(pi, (len(t), len(pi))),
            lambda t: np.broadcast_to(c, (len(t), len(c))),
            "constant",
        )

    @classmethod
    def zero(cls, n_agents: int) -> "StrategyProfile":
        return cls.constant(np.zeros(n_agents), np.zeros(n_agents))

    @classmethod
    def piecewise(
        cls, nodes: ArrayLike, pi: ArrayLike, c: ArrayLike, kind: str = "constant"
    ) -> "StrategyProfile":
        """Strategy given by node values.

        ``kind="constant"`` holds each value on [s_k, s_{k+1}) (right
        continuous); ``kind="linear"`` interpolates linearly.
        """
        pi = np.asarray(pi, dtype=np.float64)
        c = np.asarray(c, dtype=np.float64)
        if pi.ndim == 1:
            pi = pi[:, None]
        if c.ndim == 1:
            c = c[:, None]
        if pi.shape != c.shape or pi.shape[0] != len(nodes):
            raise ValueError("pi and c must have shape (len(nodes), N)")
        return cls(pi.shape[1], _piecewise(nodes, pi, kind), _piecewise(nodes, c, kind), kind)

    @classmethod
    def from_functions(cls, n_agents: int, pi_fn: TimeFn, c_fn: TimeFn) -> "StrategyProfile":
        return cls(n_agents, pi_fn, c_fn, "function")

    def _eval(self, fn, t):
        arr = np.asarray(t, dtype=np.float64)
        out = np.asarray(fn(np.atleast_1d(arr)), dtype=np.float64)
        return out[0] if arr.ndim == 0 else out

    def pi(self, t):
        """Investment fractions at time(s) t: shape (N,) for scalar t, else (m, N)."""
        return self._eval(self.pi_fn, t)

    def c(self, t):
        """Consumption fractions at time(s) t."""
        return self._eval(self.c_fn, t)

    def total_investment(self, t):
        return np.sum(self.pi(t), axis=-1)

    def total_consumption(self, t):
        return np.sum(self.c(t), axis=-1)

    def check_admissible(self, grid: TimeGrid) -> list[str]:
        """Sample nodes and midpoints; report negative or non-finite values."""
        s = grid.nodes
        t = np.concatenate([s, 0.5 * (s[1:] + s[:-1])])
        out = []
        for name, vals in (("pi", self.pi(t)), ("c", self.c(t))):
            if vals.shape[-1] != self.n_agents:
                out.append(f"{name} has {vals.shape[-1]} components, expected {self.n_agents}")
            if not np.all(np.isfinite(vals)):
                out.append(f"{name} has non-finite values")
            elif np.any(vals < 0):
                out.append(f"{name} has negative values (min {vals.min():.3g})")
        return out
