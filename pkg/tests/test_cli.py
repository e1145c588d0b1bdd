import copy
import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from ezcoalition import CoalitionSpec, ConfigError, MarketParams, TimeGrid, solve_equilibrium, solve_one_agent
from ezcoalition.cli import main
from ezcoalition.config import FIGURE_1, Scenario, load_scenario, scenario_from_dict
from ezcoalition.datasets import FigureDataset, emit_csv, figure_dataset, read_csv, solve_scenario

BASE = {
    "name": "small",
    "market": {"nu": 0.02, "mu": 0.08, "sigma": 0.15},
    "coalition": {"gamma": 0.1, "alpha": 0.3, "horizon": 1.0, "rhos": [0.01, 0.2]},
    "grid": {"t0": 0.0, "n_steps": 200},
    "mc": {"paths": 2000, "seed": 1, "scheme": "exact_log"},
    "outputs": ["theta_curves", "monotonicity_report", "precommitted_curves"],
}


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_scenario_parsing(tmp_path):
    sc = load_scenario(write_config(tmp_path, BASE))
    assert sc.name == "small" and sc.n_steps == 200 and sc.spec.discount_rates == (0.01, 0.2)
    assert sc.flags.a1_variance_denominator == "sigma"
    data = copy.deepcopy(BASE)
    del data["name"]
    assert load_scenario(write_config(tmp_path, data, "other.json")).name == "other"


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d.update(extra=1), "unknown top-level"),
        (lambda d: d["market"].update(kappa=1), "unknown keys in 'market'"),
        (lambda d: d.pop("coalition"), "missing section"),
        (lambda d: d["market"].pop("sigma"), "missing keys"),
        (lambda d: d["market"].update(sigma="x"), "must be a number"),
        (lambda d: d["coalition"].update(gamma=1.5), "gamma must lie"),
        (lambda d: d["grid"].update(n_steps=10.5), "integer"),
        (lambda d: d["mc"].update(scheme="milstein"), "mc.scheme"),
        (lambda d: d.update(outputs=[]), "at least one output"),
        (lambda d: d.update(outputs=["plots"]), "unknown outputs"),
        (lambda d: d.update(name=""), "nonempty"),
        (lambda d: d.update(flags={"one_agent_ode_form": "typo"}), "one_agent_ode_form"),
    ],
)
def test_config_errors(mutate, fragment):
    data = copy.deepcopy(BASE)
    mutate(data)
    with pytest.raises(ConfigError, match=fragment):
        scenario_from_dict(data)


def test_overrides():
    sc = FIGURE_1.with_overrides(steps=10, paths=7, seed=3)
    assert (sc.n_steps, sc.mc.paths, sc.mc.seed) == (10, 7, 3)
    assert FIGURE_1.with_overrides().n_steps == 1000


def test_two_node_file(tmp_path):
    sol = solve_equilibrium(CoalitionSpec(0.5, 0.5, 1.0, (0.1,)), MarketParams(0.02, 0.08, 0.15), TimeGrid(0, 1, 1))
    one = {0.1: solve_one_agent(0.5, 0.5, 0.1, sol.market, TimeGrid(0, 1, 1))}
    path = emit_csv(figure_dataset(sol, one), tmp_path / "tiny.csv")
    raw = path.read_bytes()
    assert raw.count(b"\n") == 3 and b"\r" not in raw
    assert raw.splitlines()[0] == b"t,theta_1,theta_one_agent_rho0.1,c_eq_1,c_one_agent_rho0.1"


def test_round_trip(tmp_path):
    sol, one = solve_scenario(FIGURE_1)
    ds = figure_dataset(sol, one)
    back = read_csv(emit_csv(ds, tmp_path / "fig1.csv"))
    assert back.columns == ds.columns and len(back) == 1001
    np.testing.assert_allclose(back.data, ds.data, rtol=1e-11, atol=0)


def test_dataset_invariants():
    with pytest.raises(ValueError):
        FigureDataset(("t", "x"), np.array([[0.0, 1.0], [0.0, 2.0]]))
    with pytest.raises(ValueError):
        FigureDataset(("t", "x"), np.array([[0.0, np.nan]]))
    with pytest.raises(ValueError):
        FigureDataset(("s", "x"), np.array([[0.0, 1.0]]))


def read_columns(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_figures_command(tmp_path, capsys):
    assert main(["figures", "--out", str(tmp_path)]) == 0
    f1 = read_columns(tmp_path / "fig1.csv")
    f2 = read_columns(tmp_path / "fig2.csv")
    assert np.all(f1["theta_1"] >= f1["theta_2"] - 1e-10)
    assert np.all(f1["c_eq_1"] >= f1["c_eq_2"] - 1e-10)
    assert np.all(f1["c_one_agent_rho0.01"] <= f1["c_one_agent_rho0.2"] + 1e-10)
    assert np.all(f2["c_eq_1"] <= f2["c_eq_2"] + 1e-10)
    assert np.all(f2["c_one_agent_rho0"] <= f2["c_one_agent_rho0.18"] + 1e-10)
    first = (tmp_path / "fig1.csv").read_bytes()
    assert main(["figures", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig1.csv").read_bytes() == first
    assert "FAIL" not in capsys.readouterr().out


def test_solve_command(tmp_path):
    cfg = write_config(tmp_path, BASE)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "small.csv").exists()
    assert (tmp_path / "o" / "small_monotonicity.csv").exists()
    assert (tmp_path / "o" / "small_precommitted.csv").exists()


def test_verify_command(tmp_path):
    cfg = write_config(tmp_path, BASE)
    assert main(["verify", "--config", cfg, "--out", str(tmp_path)]) == 0
    cols = read_columns(tmp_path / "small_verification.csv")
    assert len(cols["slope"]) == 5 * 20 * 4
    assert np.all(cols["slope"] <= 1e-6)


def test_simulate_command(tmp_path):
    cfg = write_config(tmp_path, BASE)
    code = main(["simulate", "--config", cfg, "--out", str(tmp_path), "--paths", "3000", "--steps", "100"])
    cols = read_columns(tmp_path / "small_utility_check.csv")
    assert code == (0 if np.all(cols["z_score"] <= 3) else 1)
    assert list(cols["agent"]) == [1, 2]


def test_report_command(tmp_path, capsys):
    cfg = write_config(tmp_path, BASE)
    assert main(["report", "--config", cfg, "--out", str(tmp_path), "--steps", "200"]) == 0
    text = (tmp_path / "small_report.txt").read_text()
    assert "Pre-committed, CRRA utility" in text and "Equilibrium, recursive utility" in text
    assert "one-agent c* <=" in text and "coalition c_eq >=" in text


def test_config_error_exit_code(tmp_path, capsys):
    bad = copy.deepcopy(BASE)
    bad["unexpected"] = True
    assert main(["solve", "--config", write_config(tmp_path, bad), "--out", str(tmp_path / "x")]) == 2
    assert not (tmp_path / "x").exists()
    assert main(["solve", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    assert main(["solve", "--out", str(tmp_path)]) == 2
    empty = copy.deepcopy(BASE)
    empty["outputs"] = []
    assert main(["solve", "--config", write_config(tmp_path, empty), "--out", str(tmp_path / "y")]) == 2
    assert not (tmp_path / "y").exists()
    assert "config error" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path, capsys):
    bad = copy.deepcopy(BASE)
    bad["coalition"]["rhos"] = [0.0, 1000.0]
    bad["grid"]["n_steps"] = 100
    assert main(["solve", "--config", write_config(tmp_path, bad), "--out", str(tmp_path / "z")]) == 3
    assert "(A1) status" in capsys.readouterr().err
    assert not any((tmp_path / "z").glob("*.csv")) if (tmp_path / "z").exists() else True


def test_check_failure_exit_code(tmp_path, monkeypatch):
    import ezcoalition.cli as cli
    from ezcoalition.equilibrium import OrderingCheck

    monkeypatch.setattr(cli, "check_theta_monotonicity", lambda sol: OrderingCheck(False, "forced", [(0.0, 1, 2)]))
    assert main(["solve", "--config", write_config(tmp_path, BASE), "--out", str(tmp_path)]) == 1


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "ezcoalition", "solve", "--config", write_config(tmp_path, BASE), "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and "wrote" in res.stdout
