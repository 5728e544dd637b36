"""Run configuration: structured-text (TOML) parsing and overrides.

A config file drives every CLI experiment. The reaction term comes from a
``nonlinearity`` block, the radial discretization from ``grid``, run horizons
and initial data from ``run``, and optional blocks configure levels, the
planar solver, and the comparison audit. All numeric knobs the algorithms
expose are overridable here or with ``--override key=value`` flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from terracelab.errors import ConfigError
from terracelab.nonlinearity import Nonlinearity
from terracelab.radial_pde import RadialGrid

EXPERIMENTS = ("analyze", "terrace", "simulate", "levels", "fit", "supersub",
               "planar2d", "pipeline")


@dataclass
class RunConfig:
    nonlinearity: dict
    grid: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    levels: dict = field(default_factory=dict)
    planar2d: dict = field(default_factory=dict)
    supersub: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def build_nonlinearity(self) -> Nonlinearity:
        block = self.nonlinearity
        kind = block.get("kind")
        interval = block.get("search_interval")
        try:
            if kind == "poly":
                return Nonlinearity.from_poly(block["coeffs"], interval)
            if kind == "nodes":
                return Nonlinearity.from_nodes(block["points"], interval)
        except KeyError as exc:
            raise ConfigError(f"nonlinearity block misses {exc}") from None
        raise ConfigError(f"nonlinearity kind must be 'poly' or 'nodes', got {kind!r}")

    def build_grid(self) -> RadialGrid:
        g = self.grid
        try:
            return RadialGrid(
                N=int(g.get("N", 2)),
                R_max=float(g["R_max"]),
                dr=float(g["dr"]),
                dt=float(g["dt"]) if "dt" in g else None,
                scheme=g.get("scheme", "rk4"),
                cfl=float(g.get("cfl", 0.2)),
            )
        except KeyError as exc:
            raise ConfigError(f"grid block misses {exc}") from None

    def validate(self):
        if "kind" not in self.nonlinearity:
            raise ConfigError("nonlinearity.kind is required")
        levels = self.levels.get("values", [])
        if levels and not all(isinstance(x, (int, float)) for x in levels):
            raise ConfigError("levels.values must be numbers")
        initial = self.run.get("initial", "terrace-seed")
        if initial not in ("terrace-seed", "bump", "custom"):
            raise ConfigError(f"unknown initial kind {initial!r}")
        for key in ("T_final", "theta", "R", "eps"):
            if key in self.run and not isinstance(self.run[key], (int, float)):
                raise ConfigError(f"run.{key} must be a number")
        return self


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("inf", "+inf"):
        return math.inf
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.startswith("["):
        try:
            body = tomllib.loads(f"x = {text}")
            return body["x"]
        except tomllib.TOMLDecodeError:
            raise ConfigError(f"cannot parse override value {text!r}") from None
    return text


def apply_overrides(data: dict, overrides) -> dict:
    """Apply dotted-path key=value strings onto the parsed config dict."""
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        node = data
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {path!r} crosses a non-table")
        node[keys[-1]] = _coerce(raw.strip())
    return data


def load_config(path, overrides=None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    data = apply_overrides(data, overrides)
    known = {"nonlinearity", "grid", "run", "levels", "planar2d", "supersub",
             "tolerances", "output"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config blocks: {sorted(unknown)}")
    if "nonlinearity" not in data:
        raise ConfigError("config misses the nonlinearity block")
    return RunConfig(**{k: data.get(k, {}) for k in known}).validate()
