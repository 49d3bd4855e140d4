"""Scenario configuration: flat ``key = value`` lines with dotted sections.

Example::

    # comments start with '#'
    grid.n = 128
    params.epsilon = 0.1
    init.profile = combined
    sweep.epsilons = 0.2, 0.1, 0.05

Unknown keys and malformed values raise :class:`ConfigError`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from .solver import SYSTEMS, SimulationParams
from .spectral import Grid2D

PROFILES = ("gaussian_irrotational", "gaussian_vortex", "combined")
TARGETS = ("y_norm", "h3_norm")


class ConfigError(ValueError):
    pass


def _positive_int(v):
    n = int(v)
    if n <= 0:
        raise ValueError("must be a positive integer")
    return n


def _float(v):
    x = float(v)
    if not np.isfinite(x):
        raise ValueError("must be finite")
    return x


def _seed(v):
    n = int(v)
    if not 0 <= n < 2 ** 64:
        raise ValueError("must fit in an unsigned 64-bit integer")
    return n


def _choice(options):
    def parse(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v
    return parse


def _float_list(v):
    vals = tuple(float(x) for x in v.split(",") if x.strip())
    if not vals:
        raise ValueError("needs at least one value")
    return vals


# key -> (parser, default)
SCHEMA = {
    "grid.n": (_positive_int, 128),
    "grid.length": (_float, 64 * np.pi),
    "grid.dealias": (_float, 2.0 / 3.0),
    "params.epsilon": (_float, 0.1),
    "params.kappa0": (_float, 1.0 / 200.0),
    "params.dt": (_float, 0.05),
    "params.t_end": (_float, 1.0),
    "params.theta": (_float, 0.1),
    "params.delta": (_float, 1.0 / 1000.0),
    "params.sigma": (int, 0),
    "init.profile": (_choice(PROFILES), "combined"),
    "init.target": (_choice(TARGETS), "y_norm"),
    "init.seed": (_seed, 0),
    "init.width": (_float, 4.0),
    "init.constant": (_float, 10.0),
    "output.dir": (str, "."),
    "output.sample_every": (_positive_int, 10),
    "output.snapshot_every": (int, 0),
    "run.system": (_choice(SYSTEMS), "low"),
    "sweep.epsilons": (_float_list, (0.2, 0.1, 0.05)),
    "sweep.t_cap_factor": (_float, 4.0),
    "sweep.check_every": (_positive_int, 10),
    "sweep.workers": (_positive_int, 1),
}


@dataclass(frozen=True)
class ScenarioConfig:
    values: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        merged = {k: d for k, (_, d) in SCHEMA.items()}
        merged.update(self.values)
        object.__setattr__(self, "values", merged)
        try:
            self.grid()
            self.params()
        except ValueError as err:
            raise ConfigError(str(err)) from None
        if self["init.width"] <= 0:
            raise ConfigError("init.width must be positive")
        if self["init.constant"] <= 0:
            raise ConfigError("init.constant must be positive")
        if self["output.snapshot_every"] < 0:
            raise ConfigError("output.snapshot_every must be >= 0")
        if any(not 0 < e <= 1 for e in self["sweep.epsilons"]):
            raise ConfigError("sweep.epsilons must lie in (0, 1]")

    def __getitem__(self, key):
        return self.values[key]

    def grid(self) -> Grid2D:
        return Grid2D(self["grid.n"], self["grid.length"], self["grid.dealias"])

    def params(self, **override) -> SimulationParams:
        kw = dict(epsilon=self["params.epsilon"], kappa0=self["params.kappa0"],
                  dt=self["params.dt"], t_end=self["params.t_end"],
                  theta=self["params.theta"], delta=self["params.delta"],
                  sigma=self["params.sigma"])
        kw.update(override)
        return SimulationParams(**kw)

    def replace(self, **changes) -> "ScenarioConfig":
        vals = dict(self.values)
        for k, v in changes.items():
            vals[k.replace("__", ".")] = v
        return ScenarioConfig(vals)


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(val)
        except ValueError as err:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {val!r} ({err})") from None
    return ScenarioConfig(values)


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(), str(p))


def format_config(cfg: ScenarioConfig) -> str:
    lines = []
    for key in SCHEMA:
        v = cfg[key]
        if isinstance(v, tuple):
            v = ", ".join(repr(x) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def window(text: str) -> Tuple[float, float]:
    a, b = (float(x) for x in text.split(","))
    if not b > a:
        raise ValueError(f"window must satisfy a < b, got {text!r}")
    return a, b
