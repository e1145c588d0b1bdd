"""Monte Carlo simulation of coalition wealth and checks of the utility representation.

Wealth follows dX = X[nu + (mu-nu) P(s) - C(s)] ds + sigma P(s) X dW, where
P and C are the total investment and consumption fractions of a
deterministic feedback strategy. Two schemes are available:

``exact_log``
    log X is Gaussian between nodes, so increments are sampled exactly given
    the drift integral and the integrated variance (both by trapezoid rule
    on the strategy's node values). Wealth stays positive.
``euler_maruyama``
    the explicit scheme on X itself. Paths can cross zero; they are counted
    and left out of utility estimates.

Random numbers come from numpy's counter-based Philox generator. Paths are
grouped in fixed blocks of ``BLOCK_PATHS``; block b uses key ``seed`` and
counter ``(0, 0, b, 0)``, and path p reads row ``p % BLOCK_PATHS`` of its
block. A path's normals therefore depend only on (seed, p, step), not on the
total number of paths or on the order blocks are processed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

import numpy as np
from numpy.typing import NDArray

from .errors import GridMismatch, NonPositiveWealth, NotCRRA
from .model import CoalitionSpec, MarketParams, StrategyProfile, TimeGrid
from .utility import Aggregator, ThetaSystem, aggregator_value, theta_for_strategy, utility_value

BLOCK_PATHS = 4096
SCHEMES = ("exact_log", "euler_maruyama")


def block_normals(seed: int, block: int, rows: int, n_steps: int) -> NDArray[np.float64]:
    """Standard normals for the first ``rows`` paths of ``block``, shape (rows, n_steps)."""
    bitgen = np.random.Philox(key=int(seed) % 2**64, counter=[0, 0, int(block), 0])
    return np.random.Generator(bitgen).standard_normal((rows, n_steps))


def trapezoid_weights(grid: TimeGrid) -> NDArray[np.float64]:
    w = np.full(grid.n_steps + 1, grid.dt)
    w[0] = w[-1] = 0.5 * grid.dt
    return w


@dataclass(frozen=True)
class PathSet:
    """A reproducible ensemble of wealth paths, generated block by block on demand.

    ``wealth`` materialises the full (n_paths, n+1) matrix; the checks below
    stream blocks instead so that 10^5 x 500 ensembles fit in memory.
    """

    market: MarketParams
    strategy: StrategyProfile
    grid: TimeGrid
    x0: float
    n_paths: int
    seed: int
    scheme: str = "exact_log"
    workers: int = 1

    def __post_init__(self):
        if not self.x0 > 0:
            raise ValueError("x0 must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    @cached_property
    def _coefficients(self):
        s = self.grid.nodes
        m = self.market
        P = self.strategy.total_investment(s)
        C = self.strategy.total_consumption(s)
        drift = m.nu + m.excess_return * P - C
        vol = m.sigma * P
        return drift, vol

    @cached_property
    def _log_increments(self):
        drift, vol = self._coefficients
        dt = self.grid.dt
        log_drift = drift - 0.5 * vol**2
        mean = 0.5 * dt * (log_drift[1:] + log_drift[:-1])
        var = 0.5 * dt * (vol[1:] ** 2 + vol[:-1] ** 2)
        return mean, np.sqrt(var)

    def _block(self, b: int) -> tuple[int, NDArray[np.float64]]:
        start = b * BLOCK_PATHS
        rows = min(BLOCK_PATHS, self.n_paths - start)
        n = self.grid.n_steps
        z = block_normals(self.seed, b, rows, n)
        X = np.empty((rows, n + 1))
        X[:, 0] = self.x0
        if self.scheme == "exact_log":
            mean, sd = self._log_increments
            np.cumsum(mean + sd * z, axis=1, out=X[:, 1:])
            X[:, 1:] = self.x0 * np.exp(X[:, 1:])
        else:
            drift, vol = self._coefficients
            dt = self.grid.dt
            factors = 1.0 + drift[:-1] * dt + vol[:-1] * np.sqrt(dt) * z
            np.cumprod(factors, axis=1, out=X[:, 1:])
            X[:, 1:] *= self.x0
            # a path that leaves (0, inf) is marked NaN from that step on
            X[:, 1:][np.logical_or.accumulate(factors <= 0, axis=1)] = np.nan
        return start, X

    @property
    def n_blocks(self) -> int:
        return -(-self.n_paths // BLOCK_PATHS)

    def iter_blocks(self) -> Iterator[tuple[int, NDArray[np.float64]]]:
        """Yield (first path index, wealth block) in path order."""
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                yield from pool.map(self._block, range(self.n_blocks))
        else:
            for b in range(self.n_blocks):
                yield self._block(b)

    @property
    def wealth(self) -> NDArray[np.float64]:
        return np.concatenate([X for _, X in self.iter_blocks()], axis=0)

    def terminal_wealth(self) -> NDArray[np.float64]:
        return np.concatenate([X[:, -1] for _, X in self.iter_blocks()])

    @cached_property
    def alive(self) -> NDArray[np.bool_]:
        """True for paths whose wealth stays positive at every node."""
        return np.concatenate([np.all(X > 0, axis=1) for _, X in self.iter_blocks()])

    @property
    def n_nonpositive(self) -> int:
        return int(self.n_paths - self.alive.sum())


def simulate_wealth(
    market: MarketParams,
    strategy: StrategyProfile,
    x0: float,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    scheme: str = "exact_log",
    workers: int = 1,
) -> PathSet:
    """Build a PathSet; for Euler-Maruyama, fail only if every path dies."""
    bad = strategy.check_admissible(grid)
    if bad:
        raise ValueError("inadmissible strategy: " + "; ".join(bad))
    paths = PathSet(market, strategy, grid, float(x0), int(n_paths), int(seed), scheme, workers)
    if scheme == "euler_maruyama" and paths.n_nonpositive == paths.n_paths:
        raise NonPositiveWealth(f"all {n_paths} Euler-Maruyama paths hit nonpositive wealth")
    return paths


def _summary(samples: NDArray[np.float64]):
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, samples.std(axis=0, ddof=1) / np.sqrt(n)


def _zscore(diff, se, scale):
    # deterministic paths give se = 0; roundoff-sized differences then count as agreement
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.abs(diff) / se
    tiny = np.abs(diff) <= 1e-12 * np.maximum(1.0, np.abs(scale))
    return np.where((se == 0) & tiny, 0.0, z)


@dataclass(frozen=True)
class UtilityCheckReport:
    """Per-agent simulated utility against theta_i(t0) x0^(1-gamma)/(1-gamma)."""

    mc_estimate: NDArray[np.float64]
    analytic: NDArray[np.float64]
    std_error: NDArray[np.float64]
    n_used: int
    n_excluded: int = 0

    @property
    def difference(self):
        return self.mc_estimate - self.analytic

    @property
    def abs_difference(self):
        return np.abs(self.difference)

    @property
    def z_score(self):
        return _zscore(self.difference, self.std_error, self.analytic)

    def passed(self, threshold: float = 3.0) -> bool:
        return bool(np.all(self.z_score <= threshold))

    def rows(self):
        for i in range(len(self.analytic)):
            yield {
                "agent": i + 1,
                "mc_estimate": float(self.mc_estimate[i]),
                "analytic": float(self.analytic[i]),
                "abs_diff": float(self.abs_difference[i]),
                "std_error": float(self.std_error[i]),
                "z_score": float(self.z_score[i]),
            }


def _check_grids(theta: ThetaSystem, paths: PathSet):
    if theta.grid != paths.grid:
        raise GridMismatch(f"theta grid {theta.grid} differs from path grid {paths.grid}")


def pathwise_utility(
    spec: CoalitionSpec,
    strategy: StrategyProfile,
    theta: ThetaSystem,
    paths: PathSet,
    literal: bool = False,
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Per path and agent: trapezoid integral of g_i(c_i X, Y_i) plus X(T)^(1-gamma)/(1-gamma).

    Y_i = theta_i X^(1-gamma)/(1-gamma). The default route uses the degree
    (1-gamma) homogeneity g_i(c X, theta X^(1-gamma)/(1-gamma))
    = X^(1-gamma) g_i(c, theta/(1-gamma)), which turns the integral into one
    matrix product per block. ``literal=True`` evaluates the aggregator on
    every (path, node) pair instead.
    """
    _check_grids(theta, paths)
    g = spec.gamma
    s = paths.grid.nodes
    th = theta.values
    c = strategy.c(s)
    w = trapezoid_weights(paths.grid)
    aggs = [Aggregator(g, spec.alpha, r) for r in spec.discount_rates]
    if not literal:
        unit = np.stack(
            [aggregator_value(aggs[i], c[:, i], th[:, i] / (1.0 - g)) for i in range(spec.n_agents)],
            axis=1,
        )
        weighted = w[:, None] * unit
    out = np.empty((paths.n_paths, spec.n_agents))
    alive = np.empty(paths.n_paths, dtype=bool)
    for start, X in paths.iter_blocks():
        rows = slice(start, start + X.shape[0])
        ok = np.all(X > 0, axis=1)
        alive[rows] = ok
        Xs = np.where(ok[:, None], X, 1.0)
        if literal:
            for i in range(spec.n_agents):
                y = th[:, i] * Xs ** (1.0 - g) / (1.0 - g)
                vals = aggregator_value(aggs[i], c[:, i] * Xs, y)
                out[rows, i] = vals @ w
        else:
            out[rows] = (Xs ** (1.0 - g)) @ weighted
        out[rows] += (Xs[:, -1] ** (1.0 - g) / (1.0 - g))[:, None]
    return out, alive


def check_utility_representation(
    spec: CoalitionSpec,
    market: MarketParams,
    strategy: StrategyProfile,
    theta: ThetaSystem,
    paths: PathSet,
    literal: bool = False,
) -> UtilityCheckReport:
    """Compare the simulated recursive utility with its value-factor representation."""
    samples, alive = pathwise_utility(spec, strategy, theta, paths, literal)
    mean, se = _summary(samples[alive])
    analytic = utility_value(theta.values[0], paths.x0, spec.gamma)
    return UtilityCheckReport(mean, np.atleast_1d(analytic), se, int(alive.sum()), int((~alive).sum()))


@dataclass(frozen=True)
class CRRACheckReport:
    """Direct discounted-CRRA expectation against the value-factor utility."""

    direct_estimate: NDArray[np.float64]
    std_error: NDArray[np.float64]
    representation: NDArray[np.float64]

    @property
    def difference(self):
        return self.direct_estimate - self.representation

    @property
    def z_score(self):
        return _zscore(self.difference, self.std_error, self.representation)

    def passed(self, threshold: float = 3.0) -> bool:
        return bool(np.all(self.z_score <= threshold))


def crra_expectation_check(
    spec: CoalitionSpec,
    market: MarketParams,
    strategy: StrategyProfile,
    paths: PathSet,
    theta: ThetaSystem | None = None,
    discount: str = "aggregator",
) -> CRRACheckReport:
    """alpha^-1 E[int e^{-k rho (r-t0)} (c X)^a dr + e^{-k rho (T-t0)} X(T)^a] per agent.

    Requires gamma == 1 - alpha. ``theta`` defaults to the value factors of
    ``strategy`` solved on the path grid.

    With gamma = 1 - alpha the aggregator is a^-1 q^a - rho y, so the utility
    it generates discounts at rate rho: ``discount="aggregator"`` (k = 1).
    ``discount="alpha_scaled"`` uses k = alpha, which does not match the
    value-factor representation unless every rho is 0.
    """
    if not spec.is_crra:
        raise NotCRRA(f"CRRA expectation needs gamma = 1 - alpha, got {spec.gamma}, {spec.alpha}")
    if discount == "aggregator":
        k = 1.0
    elif discount == "alpha_scaled":
        k = spec.alpha
    else:
        raise ValueError(f"discount must be aggregator or alpha_scaled, got {discount!r}")
    if theta is None:
        theta = theta_for_strategy(spec, market, strategy, paths.grid)
    _check_grids(theta, paths)
    a = spec.alpha
    s = paths.grid.nodes
    t0, T = s[0], s[-1]
    disc = np.exp(-k * np.outer(s - t0, spec.rhos))  # (n+1, N)
    weighted = trapezoid_weights(paths.grid)[:, None] * disc * strategy.c(s) ** a
    end_disc = np.exp(-k * spec.rhos * (T - t0))
    samples = np.empty((paths.n_paths, spec.n_agents))
    alive = np.empty(paths.n_paths, dtype=bool)
    for start, X in paths.iter_blocks():
        rows = slice(start, start + X.shape[0])
        ok = np.all(X > 0, axis=1)
        alive[rows] = ok
        Xa = np.where(ok[:, None], X, 1.0) ** a
        samples[rows] = (Xa @ weighted + Xa[:, -1:] * end_disc) / a
    mean, se = _summary(samples[alive])
    rep = np.atleast_1d(utility_value(theta.values[0], paths.x0, spec.gamma))
    return CRRACheckReport(mean, se, rep)


def terminal_mean(paths: PathSet) -> tuple[float, float]:
    """Mean terminal wealth over surviving paths and its standard error."""
    xt = paths.terminal_wealth()[paths.alive]
    mean, se = _summary(xt[:, None])
    return float(mean[0]), float(se[0])
