"""Figure datasets and CSV output.

CSV files are UTF-8 with LF line endings, a header row and reals printed
with 12 significant digits. Files are written to a temporary sibling and
renamed, so a failed run never leaves a partial file behind.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .baselines import solve_one_agent
from .config import Scenario
from .equilibrium import EquilibriumSolution, solve_equilibrium


def fmt(x: float) -> str:
    return f"{x:.12g}"


def rho_label(rho: float) -> str:
    return f"rho{rho:g}"


@dataclass(frozen=True)
class FigureDataset:
    columns: tuple[str, ...]
    data: NDArray[np.float64]  # (rows, len(columns)); column 0 is t

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] != len(self.columns):
            raise ValueError("data must be 2-d with one column per name")
        if self.columns[0] != "t":
            raise ValueError("first column must be t")
        if data.shape[0] > 1 and not np.all(np.diff(data[:, 0]) > 0):
            raise ValueError("t column must be strictly increasing")
        if not np.all(np.isfinite(data)):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "data", data)

    def column(self, name: str) -> NDArray[np.float64]:
        return self.data[:, self.columns.index(name)]

    def __len__(self):
        return self.data.shape[0]


def figure_dataset(sol: EquilibriumSolution, one_agent: dict[float, object]) -> FigureDataset:
    """Columns: t, theta_i, theta_one_agent_rho*, c_eq_i, c_one_agent_rho*."""
    n = sol.spec.n_agents
    cols = ["t"] + [f"theta_{i + 1}" for i in range(n)]
    cols += [f"theta_one_agent_{rho_label(r)}" for r in one_agent]
    cols += [f"c_eq_{i + 1}" for i in range(n)]
    cols += [f"c_one_agent_{rho_label(r)}" for r in one_agent]
    parts = [sol.nodes[:, None], sol.theta.values]
    parts += [o.theta.values for o in one_agent.values()]
    parts += [sol.consumption_values]
    parts += [o.c_star_values[:, None] for o in one_agent.values()]
    return FigureDataset(tuple(cols), np.hstack(parts))


def solve_scenario(scenario: Scenario):
    """Equilibrium plus one-agent baselines for each distinct discount rate."""
    grid = scenario.grid
    sol = solve_equilibrium(scenario.spec, scenario.market, grid, scenario.flags.a1_variance_denominator)
    one = {}
    for rho in dict.fromkeys(scenario.spec.discount_rates):
        one[rho] = solve_one_agent(
            scenario.spec.gamma, scenario.spec.alpha, rho, scenario.market, grid, scenario.flags.one_agent_ode_form
        )
    return sol, one


def _atomic_write(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    _atomic_write(Path(path), buf.getvalue())


def write_text(path, text: str):
    _atomic_write(Path(path), text)


def emit_csv(dataset: FigureDataset, path) -> Path:
    write_rows(path, dataset.columns, (list(map(float, r)) for r in dataset.data))
    return Path(path)


def read_csv(path) -> FigureDataset:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return FigureDataset(tuple(rows[0]), np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(rows[0])))
