"""Fixed-step RK4 for terminal-value problems, with cubic Hermite dense output.

A terminal-value problem y' = f(s, y), y(T) = y_T is solved by stepping
z(tau) = y(T - tau) forward in tau, i.e. z' = -f(T - tau, z), on the uniform
grid. States and derivatives are kept at every node so the trajectory can be
evaluated between nodes to fourth order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatch, NonFiniteState
from .model import TimeGrid


@dataclass(frozen=True)
class VectorField:
    """Right-hand side f(s, y) of a system of dimension ``dimension``."""

    dimension: int
    eval: Callable[[float, NDArray[np.float64]], NDArray[np.float64]]

    def __call__(self, s, y):
        dy = np.asarray(self.eval(s, y), dtype=np.float64)
        if dy.shape != (self.dimension,):
            raise DimensionMismatch(
                f"field returned shape {dy.shape}, expected ({self.dimension},)"
            )
        return dy


@dataclass(frozen=True)
class Trajectory:
    """Solution values and derivatives at every node of ``grid``."""

    grid: TimeGrid
    values: NDArray[np.float64]  # (n+1, d)
    derivatives: NDArray[np.float64]  # (n+1, d)

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def nodes(self):
        return self.grid.nodes

    def __call__(self, t: ArrayLike) -> NDArray[np.float64]:
        """Dense output; exact at node times.

        Scalar ``t`` gives shape (d,); an array of m times gives (m, d).
        """
        arr = np.asarray(t, dtype=np.float64)
        tt = np.atleast_1d(arr)
        s = self.grid.nodes
        lo, hi = s[0], s[-1]
        tol = 1e-12 * max(1.0, abs(hi - lo))
        if np.any(tt < lo - tol) or np.any(tt > hi + tol):
            raise ValueError(f"dense output requested outside [{lo}, {hi}]")
        tt = np.clip(tt, lo, hi)
        k = np.clip(np.searchsorted(s, tt, side="right") - 1, 0, len(s) - 2)
        h = s[k + 1] - s[k]
        u = ((tt - s[k]) / h)[:, None]
        y0, y1 = self.values[k], self.values[k + 1]
        d0, d1 = self.derivatives[k] * h[:, None], self.derivatives[k + 1] * h[:, None]
        u2, u3 = u * u, u * u * u
        out = (
            (2 * u3 - 3 * u2 + 1) * y0
            + (u3 - 2 * u2 + u) * d0
            + (-2 * u3 + 3 * u2) * y1
            + (u3 - u2) * d1
        )
        on_node = tt == s[k]
        out[on_node] = self.values[k[on_node]]
        at_end = tt == s[-1]
        out[at_end] = self.values[-1]
        return out[0] if arr.ndim == 0 else out

    def component(self, i: int) -> NDArray[np.float64]:
        return self.values[:, i]


def integrate_terminal(
    field: VectorField, terminal_state: ArrayLike, grid: TimeGrid
) -> Trajectory:
    """Classical RK4 stepped backward from ``grid.T`` to ``grid.t0``."""
    y = np.array(terminal_state, dtype=np.float64, ndmin=1)
    if y.shape != (field.dimension,):
        raise DimensionMismatch(
            f"terminal state has shape {y.shape}, field dimension is {field.dimension}"
        )
    s = grid.nodes
    n = grid.n_steps
    values = np.empty((n + 1, field.dimension))
    derivs = np.empty_like(values)
    values[n] = y
    derivs[n] = field(s[n], y)
    if not np.all(np.isfinite(derivs[n])):
        raise NonFiniteState(f"non-finite derivative at terminal time {s[n]}", s[n], n)
    # tau = T - s; dz/dtau = -f
    for k in range(n, 0, -1):
        h = s[k] - s[k - 1]
        mid = 0.5 * (s[k] + s[k - 1])
        k1 = derivs[k]
        k2 = field(mid, y - 0.5 * h * k1)
        k3 = field(mid, y - 0.5 * h * k2)
        k4 = field(s[k - 1], y - h * k3)
        y = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"non-finite state at node {k - 1} (t={s[k - 1]:.6g})", s[k - 1], k - 1)
        values[k - 1] = y
        derivs[k - 1] = field(s[k - 1], y)
        if not np.all(np.isfinite(derivs[k - 1])):
            raise NonFiniteState(
                f"non-finite derivative at node {k - 1} (t={s[k - 1]:.6g})", s[k - 1], k - 1
            )
    values.flags.writeable = False
    derivs.flags.writeable = False
    return Trajectory(grid, values, derivs)


def observed_order(field: VectorField, terminal_state: ArrayLike, grid: TimeGrid) -> float:
    """Richardson estimate log2(err(h) / err(h/2)) with an h/4 reference.

    Errors are the max-norm differences over the coarse nodes. Returns
    ``math.inf`` when both errors vanish (the scheme is exact for the field).
    For an order-p method the estimate tends to log2(2^p + 1), about 4.09
    for RK4.
    """
    coarse = integrate_terminal(field, terminal_state, grid).values
    half = integrate_terminal(field, terminal_state, grid.refined(2)).values[::2]
    ref = integrate_terminal(field, terminal_state, grid.refined(4)).values[::4]
    e1 = float(np.max(np.abs(coarse - ref)))
    e2 = float(np.max(np.abs(half - ref)))
    if e1 == 0.0 and e2 == 0.0:
        return math.inf
    if e2 == 0.0:
        return math.inf
    return math.log2(e1 / e2)
