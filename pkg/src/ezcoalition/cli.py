"""Command line front end.

    ezcoalition <subcommand> --config PATH --out DIR [--steps N] [--paths N] [--seed N]

Subcommands: solve, verify, simulate, figures, report. Exit status is 0 when
every requested check passes, 1 when a check fails, 2 for configuration
errors and 3 when a solver loses positivity.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfg
from .baselines import comparison_table, solve_precommitted_crra
from .datasets import emit_csv, figure_dataset, fmt, solve_scenario, write_rows, write_text
from .equilibrium import (
    check_consumption_ordering,
    check_theta_monotonicity,
    random_perturbation_sweep,
)
from .errors import ConfigError, NonFiniteState, PositivityLoss
from .model import CoalitionSpec, TimeGrid, classify_a1
from .montecarlo import check_utility_representation, simulate_wealth

log = logging.getLogger("ezcoalition")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
VERIFY_TIMES = (0.1, 0.3, 0.5, 0.7, 0.9)


def _scenario(args) -> cfg.Scenario:
    if args.config is None:
        raise ConfigError(f"{args.command} needs --config")
    sc = cfg.load_scenario(args.config)
    return sc.with_overrides(args.steps, args.paths, args.seed)


def _ordering_lines(sol):
    mono = check_theta_monotonicity(sol)
    order = check_consumption_ordering(sol)
    lines = [
        f"theta monotone in rho: {'PASS' if mono.passed else 'FAIL'}",
        f"consumption ordering ({order.regime}): {'PASS' if order.passed else 'FAIL'}",
    ]
    return mono.passed and order.passed, lines, mono, order


def cmd_solve(args) -> int:
    sc = _scenario(args)
    out = Path(args.out)
    sol, one = solve_scenario(sc)
    path = emit_csv(figure_dataset(sol, one), out / f"{sc.name}.csv")
    print(f"wrote {path}")
    print(f"(A1): {sol.a1.branch.value} ({sol.a1.detail})")
    ok = True
    if "monotonicity_report" in sc.outputs:
        ok, lines, mono, order = _ordering_lines(sol)
        print("\n".join(lines))
        rows = [("theta_monotone", mono.passed, len(mono.counterexamples)), (order.regime, order.passed, len(order.counterexamples))]
        write_rows(out / f"{sc.name}_monotonicity.csv", ("check", "passed", "counterexamples"), rows)
    if "precommitted_curves" in sc.outputs:
        crra = CoalitionSpec(1.0 - sc.spec.alpha, sc.spec.alpha, sc.spec.horizon, sc.spec.discount_rates)
        pre = solve_precommitted_crra(crra, sc.market, sc.t0, sc.grid)
        n = crra.n_agents
        header = ["t", "theta_t"] + [f"c_pre_{i + 1}" for i in range(n)]
        rows = (
            [float(t), float(th)] + list(map(float, c))
            for t, th, c in zip(pre.theta_t.nodes, pre.theta_t.values[:, 0], pre.consumption_values)
        )
        write_rows(out / f"{sc.name}_precommitted.csv", header, rows)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_verify(args) -> int:
    sc = _scenario(args)
    sol, _ = solve_scenario(sc)
    span = sc.spec.horizon - sc.t0
    times = [sc.t0 + f * span for f in VERIFY_TIMES]
    reports = random_perturbation_sweep(sol, times, n_draws=20, seed=sc.mc.seed)
    rows = []
    for k, r in enumerate(reports):
        for e, je, sl in zip(r.epsilons, r.perturbed_values, r.slopes):
            rows.append((float(r.t), k % 20, float(e), float(r.base_value), float(je), float(sl), int(sl <= r.tolerance)))
    path = Path(args.out) / f"{sc.name}_verification.csv"
    write_rows(path, ("t", "draw", "epsilon", "J", "J_eps", "slope", "pass"), rows)
    ok = all(r.passed for r in reports)
    worst = max(r.max_slope for r in reports)
    print(f"wrote {path}")
    print(f"{len(reports)} perturbations, max slope {worst:.3e}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    grid = sc.grid
    sol, _ = solve_scenario(sc)
    paths = simulate_wealth(sc.market, sol.strategy, 1.0, grid, sc.mc.paths, sc.mc.seed, sc.mc.scheme, args.workers)
    rep = check_utility_representation(sc.spec, sc.market, sol.strategy, sol.theta, paths)
    header = ("agent", "mc_estimate", "analytic", "abs_diff", "std_error", "z_score")
    path = Path(args.out) / f"{sc.name}_utility_check.csv"
    write_rows(path, header, ([row[h] for h in header] for row in rep.rows()))
    print(f"wrote {path}")
    for row in rep.rows():
        print(f"agent {row['agent']}: MC {row['mc_estimate']:.6g} vs {row['analytic']:.6g}, z = {row['z_score']:.3f}")
    if rep.n_excluded:
        print(f"{rep.n_excluded} paths excluded (nonpositive wealth)")
    return EXIT_OK if rep.passed() else EXIT_CHECK


def cmd_figures(args) -> int:
    out = Path(args.out)
    ok = True
    if args.config is not None:
        scenarios = [_scenario(args)]
    else:
        scenarios = [s.with_overrides(args.steps) for s in cfg.BUILTIN.values()]
    for sc in scenarios:
        sol, one = solve_scenario(sc)
        path = emit_csv(figure_dataset(sol, one), out / f"{sc.name}.csv")
        good, lines, _, _ = _ordering_lines(sol)
        c_one = np.column_stack([o.c_star_values for o in one.values()])
        rates = list(one)
        idx = np.argsort(rates)
        one_ok = bool(np.all(np.diff(c_one[:, idx], axis=1) >= -1e-10))
        lines.append(f"one-agent consumption non-decreasing in rho: {'PASS' if one_ok else 'FAIL'}")
        ok &= good and one_ok
        print(f"wrote {path}")
        print("  " + "\n  ".join(lines))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_report(args) -> int:
    sc = _scenario(args)
    sol, one = solve_scenario(sc)
    a1 = classify_a1(sc.spec, sc.market, sc.flags.a1_variance_denominator)
    rows = comparison_table(sc.spec, sc.market, sc.n_steps)
    ok, lines, _, _ = _ordering_lines(sol)
    text = [f"scenario {sc.name}", f"(A1): {a1.branch.value} ({a1.detail})", ""]
    text.append(f"{'consumption strategy':34s} {'time-consistent':16s} {'heterogeneous':14s} evidence")
    for r in rows:
        text.append(
            f"{r.strategy:34s} {('Yes' if r.time_consistent else 'No'):16s} "
            f"{('Yes' if r.heterogeneous else 'No'):14s} {r.evidence}"
        )
    text.append("")
    rates = list(one)
    c_one = {r: one[r].c_star_values for r in rates}
    for i, ri in enumerate(sc.spec.discount_rates):
        for j, rj in enumerate(sc.spec.discount_rates):
            if ri < rj:
                one_rel = "<=" if np.all(c_one[ri] <= c_one[rj] + 1e-10) else "not <="
                ci, cj = sol.consumption_values[:, i], sol.consumption_values[:, j]
                if np.all(ci >= cj - 1e-10):
                    co_rel = ">="
                elif np.all(ci <= cj + 1e-10):
                    co_rel = "<="
                else:
                    co_rel = "mixed"
                text.append(
                    f"rho {fmt(ri)} vs {fmt(rj)}: one-agent c* {one_rel}; coalition c_eq {co_rel}"
                )
    text += lines
    path = Path(args.out) / f"{sc.name}_report.txt"
    write_text(path, "\n".join(text) + "\n")
    print("\n".join(text))
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "figures": cmd_figures,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ezcoalition", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="scenario JSON file")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--steps", type=int, help="override grid.n_steps")
    p.add_argument("--paths", type=int, help="override mc.paths")
    p.add_argument("--seed", type=int, help="override mc.seed")
    p.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo blocks")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PositivityLoss, NonFiniteState) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
