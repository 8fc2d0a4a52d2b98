"""Flat key-value run configuration.

One ``key = value`` per line, ``#`` comments, dotted section keys
(``model.copula.theta = 1.0``).  Unknown keys are hard errors; every key
has a documented default, so the empty config is valid.  The environment
variable LEVYFILTER_SEED overrides the default seed when ``sim.seed`` is
not given explicitly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .copulas import (
    ClaytonCopula,
    CompleteDependenceCopula,
    IndependenceCopula,
)
from .errors import ConfigError
from .measures import ExponentialMeasure, TemperedStableMeasure
from .simulate import DriftSpec, L0Spec, ModelSpec, SensorSpec, X0Law

SEED_ENV_VAR = "LEVYFILTER_SEED"

# key -> (type tag, default); types: f float, i int, b bool, s string, fl float list
DEFAULTS = {
    "model.drift.kind": ("s", "linear"),
    "model.drift.a": ("f", 0.0),
    "model.drift.b": ("f", -1.0),
    "model.sensor.kind": ("s", "gauss_bump"),
    "model.sensor.amplitude": ("f", 1.0),
    "model.sensor.center": ("f", 0.0),
    "model.sensor.width": ("f", 1.0),
    "model.sensor.delta_g": ("f", 2.0),
    "model.nu1.family": ("s", "exponential"),
    "model.nu1.rate": ("f", 2.0),
    "model.nu1.scale": ("f", 1.0),
    "model.nu1.stability": ("f", 0.5),
    "model.nu1.tempering": ("f", 1.0),
    "model.nu1.prefactor": ("f", 1.0),
    "model.nu2.family": ("s", "exponential"),
    "model.nu2.rate": ("f", 2.0),
    "model.nu2.scale": ("f", 1.0),
    "model.nu2.stability": ("f", 0.5),
    "model.nu2.tempering": ("f", 1.0),
    "model.nu2.prefactor": ("f", 1.0),
    "model.copula.family": ("s", "clayton"),
    "model.copula.theta": ("f", 2.0),
    "model.copula.half_weights": ("b", True),
    "model.copula.beta_sign": ("f", 1.0),
    "model.l0.kind": ("s", "tempered"),
    "model.l0.alpha": ("f", 1.5),
    "model.epsilon": ("f", 0.05),
    "model.x0.kind": ("s", "gaussian"),
    "model.x0.mean": ("f", 0.0),
    "model.x0.sd": ("f", 1.0),
    "model.rho": ("f", 0.5),
    "model.rho0": ("f", 0.0),
    "sim.T": ("f", 1.0),
    "sim.dt": ("f", 1e-3),
    "sim.seed": ("i", None),  # default from env or 0
    "sim.paths": ("i", 1),
    "grid.n": ("i", 1024),
    "grid.l": ("f", 20.0),
    "pf.particles": ("i", 10000),
    "pf.resample_threshold": ("f", 0.5),
    "pf.replicates": ("i", 8),
    "thresholds": ("fl", (0.5,)),
    "output.path": ("s", "path.csv"),
    "output.filter": ("s", "filter.csv"),
    "output.metrics": ("s", "metrics.csv"),
}

_CHOICES = {
    "model.drift.kind": {"none", "const", "linear"},
    "model.sensor.kind": {"zero", "const", "linear", "gauss_bump"},
    "model.nu1.family": {"exponential", "tempered_stable"},
    "model.nu2.family": {"exponential", "tempered_stable"},
    "model.copula.family": {"clayton", "independence", "complete_dependence"},
    "model.l0.kind": {"tempered", "none"},
    "model.x0.kind": {"gaussian"},
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def get(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        s = self.values["sim.seed"]
        if s is not None:
            return int(s)
        return int(os.environ.get(SEED_ENV_VAR, "0"))

    def build_model(self) -> ModelSpec:
        v = self.values
        drift = DriftSpec(v["model.drift.kind"], v["model.drift.a"], v["model.drift.b"])
        sensor = SensorSpec(
            v["model.sensor.kind"],
            v["model.sensor.amplitude"],
            v["model.sensor.center"],
            v["model.sensor.width"],
            v["model.sensor.delta_g"],
        )
        nus = []
        for tag in ("nu1", "nu2"):
            if v[f"model.{tag}.family"] == "exponential":
                nus.append(
                    ExponentialMeasure(v[f"model.{tag}.rate"], v[f"model.{tag}.scale"])
                )
            else:
                nus.append(
                    TemperedStableMeasure(
                        v[f"model.{tag}.stability"],
                        v[f"model.{tag}.tempering"],
                        v[f"model.{tag}.prefactor"],
                    )
                )
        fam = v["model.copula.family"]
        if fam == "clayton":
            copula = ClaytonCopula(
                v["model.copula.theta"],
                v["model.copula.half_weights"],
                v["model.copula.beta_sign"],
            )
        elif fam == "independence":
            copula = IndependenceCopula()
        else:
            copula = CompleteDependenceCopula()
        x0 = X0Law(v["model.x0.kind"], v["model.x0.mean"], v["model.x0.sd"])
        return ModelSpec(
            drift=drift,
            sensor=sensor,
            nu1=nus[0],
            nu2=nus[1],
            copula=copula,
            l0=L0Spec(v["model.l0.kind"], v["model.l0.alpha"]),
            eps=v["model.epsilon"],
            x0=x0,
            rho=v["model.rho"],
            rho0=v["model.rho0"],
        )


def _parse_value(key: str, raw: str, line_no: int):
    kind = DEFAULTS[key][0]
    raw = raw.strip()
    try:
        if kind == "f":
            return float(raw)
        if kind == "i":
            return int(raw)
        if kind == "b":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "fl":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigError(
            f"cannot parse value {raw!r} as {kind}", key=key, line=line_no
        ) from None


def _validate(values: dict) -> None:
    def err(key, msg):
        raise ConfigError(msg, key=key)

    v = values
    for key, choices in _CHOICES.items():
        if v[key] not in choices:
            err(key, f"must be one of {sorted(choices)}")
    if v["model.copula.family"] == "clayton" and v["model.copula.theta"] <= 0:
        err("model.copula.theta", "theta must be > 0")
    if not 0.0 <= v["model.copula.beta_sign"] <= 1.0:
        err("model.copula.beta_sign", "must lie in [0, 1]")
    for tag in ("nu1", "nu2"):
        if v[f"model.{tag}.rate"] <= 0:
            err(f"model.{tag}.rate", "must be > 0")
        if not 0.0 < v[f"model.{tag}.stability"] < 2.0:
            err(f"model.{tag}.stability", "must lie in (0, 2)")
    if v["model.l0.kind"] == "tempered" and not 1.0 < v["model.l0.alpha"] < 2.0:
        err("model.l0.alpha", "must lie in (1, 2)")
    sigma_finite = "tempered_stable" in (v["model.nu1.family"], v["model.nu2.family"])
    if v["model.epsilon"] < 0 or (v["model.epsilon"] == 0 and sigma_finite):
        err("model.epsilon", "must be > 0 (sigma-finite margins need a cutoff)")
    if v["model.x0.sd"] <= 0:
        err("model.x0.sd", "must be > 0")
    if v["sim.T"] <= 0:
        err("sim.T", "must be > 0")
    if v["sim.dt"] <= 0:
        err("sim.dt", "must be > 0")
    n_steps = v["sim.T"] / v["sim.dt"]
    if abs(n_steps - round(n_steps)) > 1e-9 * max(n_steps, 1.0):
        err("sim.dt", "must divide sim.T")
    if v["sim.paths"] < 1:
        err("sim.paths", "must be >= 1")
    n = v["grid.n"]
    if n < 8 or (n & (n - 1)) != 0:
        err("grid.n", "must be a power of two")
    if v["grid.l"] <= 0:
        err("grid.l", "must be > 0")
    if v["pf.particles"] < 2:
        err("pf.particles", "must be >= 2")
    if not 0.0 <= v["pf.resample_threshold"] <= 1.0:
        err("pf.resample_threshold", "must lie in [0, 1]")
    if v["pf.replicates"] < 1:
        err("pf.replicates", "must be >= 1")


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text; unknown keys are hard errors."""
    values = {k: d for k, (_, d) in DEFAULTS.items()}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", line=line_no)
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError("unknown key", key=key, line=line_no)
        values[key] = _parse_value(key, raw, line_no)
    _validate(values)
    return RunConfig(values=values)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())
