"""YAML experiment configuration with strict keys and dotted-path overrides."""

from __future__ import annotations

import copy
import inspect
from pathlib import Path

import yaml

from . import density
from .agents import ControlParams
from .diffusion import DiffusionParams, method_from_name
from .sim import SimConfig

__all__ = ["ConfigError", "DEFAULTS", "default_config", "dump_config", "load_config",
           "apply_override", "build_sim_config", "build_methods"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


DEFAULTS = {
    "grid": {"nx": 64, "ny": 64, "lx": 64.0, "ly": 64.0},
    "scenario": {"name": "circle_square", "params": {}},
    "method": "pm",
    "hedac": {"beta": 1.0},
    "smc": {"weight_exponent": 1.5, "n_modes": 25},
    "diffusion": {"K": 0.1, "alpha": 0.5, "dt": 0.05, "tau": 0.9},
    "control": {"v_m": 1.0, "dt_control": 1.0, "eps_grad": 1e-12},
    "agents": {"n_agents": 10, "initial_positions": None, "init_margin": 0.05},
    "run": {"n_steps": 1000, "seed": 0, "normalize_potential": True, "warm_start": False, "store_every": 1},
    "compare": {"methods": ["pm", "hedac", "smc"], "n_runs": 5, "shared_initial_positions": True},
    "sweep": {"parameter": None, "values": []},
    "snapshot": {"steps": [0]},
    "output": {"out_dir": "results", "write_fields": True},
}

# free-form mappings whose contents are checked elsewhere
_OPEN = {"scenario.params"}


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False, default_flow_style=False)


def _merge(base: dict, user: dict, prefix: str = "") -> dict:
    for key, value in user.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(path, "unknown key")
        if path in _OPEN:
            if value is None:
                value = {}
            if not isinstance(value, dict):
                raise ConfigError(path, "expected a mapping")
            base[key] = copy.deepcopy(value)
        elif isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(path, "expected a mapping")
            _merge(base[key], value, path + ".")
        else:
            base[key] = value
    return base


def apply_override(cfg: dict, override: str) -> dict:
    """Apply ``a.b.c=value``; the value is parsed as YAML."""
    if "=" not in override:
        raise ConfigError("", f"override {override!r} is not of the form key=value")
    path, raw = override.split("=", 1)
    path = path.strip()
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(path, f"cannot parse value {raw!r}: {exc}") from None
    if path.startswith("scenario.params."):
        key = path[len("scenario.params."):]
        if not key or "." in key:
            raise ConfigError(path, "scenario parameters must be a single key")
        cfg["scenario"]["params"][key] = value
        return cfg
    node = cfg
    parts = path.split(".")
    for i, part in enumerate(parts):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(".".join(parts[: i + 1]), "unknown key")
        if i < len(parts) - 1:
            node = node[part]
    if isinstance(node[parts[-1]], dict):
        raise ConfigError(path, "cannot override a whole section")
    node[parts[-1]] = value
    return cfg


def load_config(path=None, overrides=()) -> dict:
    cfg = default_config()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("", f"cannot read config {path}: {exc}") from None
        try:
            user = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("", f"{path} is not valid YAML: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("", f"{path}: top level must be a mapping")
        _merge(cfg, user)
    for ov in overrides:
        apply_override(cfg, ov)
    return cfg


def _section(section: str, fn, *args, **kwargs):
    """Build a sub-config, prefixing validation messages with the section name."""
    try:
        return fn(*args, **kwargs)
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        field = msg.split(" ", 1)[0]
        if field in kwargs:
            raise ConfigError(f"{section}.{field}", msg.split(" ", 1)[1]) from None
        raise ConfigError(section, msg) from None


def _number(cfg: dict, section: str, *keys, kind=float):
    out = {}
    for k in keys:
        v = cfg[section][k]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{section}.{k}", f"expected a number, got {v!r}")
        if kind is int:
            if int(v) != v:
                raise ConfigError(f"{section}.{k}", f"expected an integer, got {v!r}")
            v = int(v)
        out[k] = kind(v)
    return out


def _flag(cfg: dict, section: str, key: str) -> bool:
    v = cfg[section][key]
    if not isinstance(v, bool):
        raise ConfigError(f"{section}.{key}", f"expected true/false, got {v!r}")
    return v


def build_methods(cfg: dict, names=None) -> list:
    names = names if names is not None else [cfg["method"]]
    if isinstance(names, str):
        names = [n.strip() for n in names.split(",") if n.strip()]
    params = {
        "pm": {},
        "hedac": _number(cfg, "hedac", "beta"),
        "smc": {**_number(cfg, "smc", "weight_exponent"), **_number(cfg, "smc", "n_modes", kind=int)},
    }
    out = []
    for n in names:
        if not isinstance(n, str) or n.lower() not in params:
            raise ConfigError("method", f"unknown method {n!r}; expected one of pm, hedac, smc")
        section = n.lower() if params[n.lower()] else "method"
        out.append(_section(section, method_from_name, n.lower(), **params[n.lower()]))
    return out


def _check_scenario_params(name: str, params: dict):
    if name == "file":
        if set(params) != {"path"}:
            raise ConfigError("scenario.params", "a 'file' scenario takes exactly one parameter: path")
        return
    if name not in density.SCENARIOS:
        raise ConfigError("scenario.name", f"unknown scenario {name!r}; expected one of "
                          f"{sorted(density.SCENARIOS)} or 'file'")
    allowed = set(inspect.signature(density.SCENARIOS[name]).parameters) - {"grid"}
    for k in params:
        if k not in allowed:
            raise ConfigError(f"scenario.params.{k}", f"unknown parameter for {name}; allowed: {sorted(allowed)}")


def build_sim_config(cfg: dict) -> SimConfig:
    grid = {**_number(cfg, "grid", "nx", "ny", kind=int), **_number(cfg, "grid", "lx", "ly")}
    name = cfg["scenario"]["name"]
    params = cfg["scenario"]["params"] or {}
    _check_scenario_params(name, params)
    diffusion = _section("diffusion", DiffusionParams, **_number(cfg, "diffusion", "K", "alpha", "dt", "tau"))
    control = _section("control", ControlParams, **_number(cfg, "control", "v_m", "dt_control", "eps_grad"))
    agents = cfg["agents"]
    init = agents["initial_positions"]
    if init is not None:
        try:
            init = tuple(tuple(float(c) for c in p) for p in init)
        except (TypeError, ValueError):
            raise ConfigError("agents.initial_positions", "expected a list of [x, y] pairs") from None
    kwargs = dict(
        **grid,
        scenario=name,
        scenario_params=params,
        method=build_methods(cfg)[0],
        diffusion=diffusion,
        control=control,
        **_number(cfg, "agents", "n_agents", kind=int),
        **_number(cfg, "run", "n_steps", "seed", "store_every", kind=int),
        initial_positions=init,
        **_number(cfg, "agents", "init_margin"),
        normalize_potential=_flag(cfg, "run", "normalize_potential"),
        warm_start=_flag(cfg, "run", "warm_start"),
    )
    sections = {"nx": "grid", "ny": "grid", "lx": "grid", "ly": "grid", "n_agents": "agents",
                "initial_positions": "agents", "init_margin": "agents", "n_steps": "run", "seed": "run",
                "store_every": "run"}
    try:
        sim = SimConfig(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        field = msg.split(" ", 1)[0]
        if field in sections:
            raise ConfigError(f"{sections[field]}.{field}", msg.split(" ", 1)[1]) from None
        raise ConfigError("grid", msg) from None
    # build the density once so geometry errors surface as config errors
    try:
        density.make_scenario(name, sim.grid, **params)
    except (TypeError, ValueError, OSError) as exc:
        raise ConfigError("scenario", str(exc)) from None
    return sim
