"""Scenario files (JSON) and the two built-in figure scenarios."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .model import CoalitionSpec, MarketParams, TimeGrid, validate

OUTPUTS = (
    "theta_curves",
    "consumption_curves",
    "one_agent_curves",
    "precommitted_curves",
    "equilibrium_verification",
    "monotonicity_report",
    "mc_validation",
    "comparison_table",
)

_SECTIONS = {
    "market": {"nu", "mu", "sigma"},
    "coalition": {"gamma", "alpha", "horizon", "rhos"},
    "grid": {"t0", "n_steps"},
    "mc": {"paths", "seed", "scheme"},
    "flags": {"a1_variance_denominator", "one_agent_ode_form"},
}
_REQUIRED = ("market", "coalition")
_TOP_EXTRA = {"name", "outputs"}


@dataclass(frozen=True)
class MCSettings:
    paths: int = 100_000
    seed: int = 0
    scheme: str = "exact_log"


@dataclass(frozen=True)
class Flags:
    a1_variance_denominator: str = "sigma"
    one_agent_ode_form: str = "derived"


@dataclass(frozen=True)
class Scenario:
    name: str
    market: MarketParams
    spec: CoalitionSpec
    t0: float = 0.0
    n_steps: int = 1000
    mc: MCSettings = field(default_factory=MCSettings)
    flags: Flags = field(default_factory=Flags)
    outputs: tuple[str, ...] = ("theta_curves", "consumption_curves", "one_agent_curves")

    def __post_init__(self):
        if not self.name:
            raise ConfigError("scenario name must be nonempty")
        if not self.outputs:
            raise ConfigError("scenario must request at least one output")
        unknown = set(self.outputs) - set(OUTPUTS)
        if unknown:
            raise ConfigError(f"unknown outputs {sorted(unknown)}; choose from {OUTPUTS}")
        problems = validate(self.spec, self.market)
        if problems:
            raise ConfigError("; ".join(problems))
        if self.mc.scheme not in ("exact_log", "euler_maruyama"):
            raise ConfigError(f"mc.scheme must be exact_log or euler_maruyama, got {self.mc.scheme!r}")
        if self.mc.paths < 1:
            raise ConfigError("mc.paths must be positive")
        if not 0 <= self.mc.seed < 2**64:
            raise ConfigError("mc.seed must be a 64-bit unsigned integer")
        if self.flags.a1_variance_denominator not in ("sigma", "sigma_squared"):
            raise ConfigError("flags.a1_variance_denominator must be sigma or sigma_squared")
        if self.flags.one_agent_ode_form not in ("derived", "as_printed"):
            raise ConfigError("flags.one_agent_ode_form must be derived or as_printed")
        if not self.t0 < self.spec.horizon:
            raise ConfigError("grid.t0 must be below the horizon")
        if self.n_steps < 1:
            raise ConfigError("grid.n_steps must be positive")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.t0, self.spec.horizon, self.n_steps)

    def with_overrides(self, steps=None, paths=None, seed=None) -> "Scenario":
        mc = self.mc
        if paths is not None:
            mc = replace(mc, paths=paths)
        if seed is not None:
            mc = replace(mc, seed=seed)
        return replace(self, n_steps=self.n_steps if steps is None else steps, mc=mc)


def _number(section, key, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def scenario_from_dict(data: dict, default_name: str = "scenario") -> Scenario:
    """Build a Scenario, rejecting unknown or missing keys."""
    if not isinstance(data, dict):
        raise ConfigError("top level of the config must be an object")
    unknown = set(data) - set(_SECTIONS) - _TOP_EXTRA
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    for sec in _REQUIRED:
        if sec not in data:
            raise ConfigError(f"missing section {sec!r}")
    for sec, allowed in _SECTIONS.items():
        body = data.get(sec, {})
        if not isinstance(body, dict):
            raise ConfigError(f"section {sec!r} must be an object")
        extra = set(body) - allowed
        if extra:
            raise ConfigError(f"unknown keys in {sec!r}: {sorted(extra)}")

    mk = data["market"]
    co = data["coalition"]
    for sec, body, keys in (("market", mk, ("nu", "mu", "sigma")), ("coalition", co, ("gamma", "alpha", "horizon", "rhos"))):
        missing = [k for k in keys if k not in body]
        if missing:
            raise ConfigError(f"missing keys in {sec!r}: {missing}")
    market = MarketParams(*(_number("market", k, mk[k]) for k in ("nu", "mu", "sigma")))
    rhos = co["rhos"]
    if not isinstance(rhos, list) or not rhos:
        raise ConfigError("coalition.rhos must be a nonempty list")
    spec = CoalitionSpec(
        _number("coalition", "gamma", co["gamma"]),
        _number("coalition", "alpha", co["alpha"]),
        _number("coalition", "horizon", co["horizon"]),
        tuple(_number("coalition", "rhos", r) for r in rhos),
    )
    gr = data.get("grid", {})
    mc = data.get("mc", {})
    fl = data.get("flags", {})
    outputs = data.get("outputs", list(Scenario.__dataclass_fields__["outputs"].default))
    if not isinstance(outputs, list) or not all(isinstance(o, str) for o in outputs):
        raise ConfigError("outputs must be a list of strings")
    name = data.get("name", default_name)
    if not isinstance(name, str):
        raise ConfigError("name must be a string")
    return Scenario(
        name=name,
        market=market,
        spec=spec,
        t0=_number("grid", "t0", gr.get("t0", 0.0)),
        n_steps=_number("grid", "n_steps", gr.get("n_steps", 1000), int),
        mc=MCSettings(
            _number("mc", "paths", mc.get("paths", 100_000), int),
            _number("mc", "seed", mc.get("seed", 0), int),
            str(mc.get("scheme", "exact_log")),
        ),
        flags=Flags(
            str(fl.get("a1_variance_denominator", "sigma")),
            str(fl.get("one_agent_ode_form", "derived")),
        ),
        outputs=tuple(outputs),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return scenario_from_dict(data, default_name=path.stem)


FIGURE_1 = Scenario(
    name="fig1",
    market=MarketParams(nu=0.02, mu=0.08, sigma=0.15),
    spec=CoalitionSpec(gamma=0.1, alpha=0.3, horizon=1.0, discount_rates=(0.01, 0.2)),
)
FIGURE_2 = Scenario(
    name="fig2",
    market=MarketParams(nu=0.1, mu=0.2, sigma=0.05),
    spec=CoalitionSpec(gamma=0.8, alpha=0.25, horizon=1.0, discount_rates=(0.0, 0.18)),
)
BUILTIN = {"fig1": FIGURE_1, "fig2": FIGURE_2}
