"""Simulation loop, multi-run experiments and result serialization.

One control step is

    empirical density -> deficit mu - c -> potential -> heading -> Euler move -> deposit

and ``E`` is recorded after every deposit, including the initial one at step 0.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import density as density_mod
from .agents import AgentState, ControlParams, control, sample_gradient, step
from .coverage import CoverageAccumulator, empirical_density, error_field, global_error
from .diffusion import (
    DiffusionParams,
    Hedac,
    Method,
    PeronaMalik,
    Smc,
    SmcBasis,
    SolverInstability,
    diffuse,
    hedac_potential,
    method_from_name,
)
from .gridio import write_grid
from .spectral import Grid2D, SpectralWorkspace, gradient, make_workspace

log = logging.getLogger(__name__)

__all__ = [
    "SimConfig",
    "RunResult",
    "ExperimentSummary",
    "SimulationError",
    "PotentialField",
    "splitmix64",
    "derive_seed",
    "run",
    "experiment",
    "config_hash",
    "write_run_outputs",
    "write_summary",
]

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(base_seed: int, *indices: int) -> int:
    """Hash ``(base_seed, *indices)`` into an independent 64-bit stream seed."""
    h = splitmix64(int(base_seed) & _MASK64)
    for i in indices:
        h = splitmix64(h ^ (int(i) & _MASK64))
    return h


class SimulationError(RuntimeError):
    def __init__(self, message, step=None, diagnostics=None):
        super().__init__(message)
        self.step = step
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class SimConfig:
    nx: int = 64
    ny: int = 64
    lx: float = 64.0
    ly: float = 64.0
    scenario: str = "circle_square"
    scenario_params: dict = field(default_factory=dict)
    method: Method = field(default_factory=PeronaMalik)
    diffusion: DiffusionParams = field(default_factory=DiffusionParams)
    control: ControlParams = field(default_factory=lambda: ControlParams(v_m=1.0, dt_control=1.0))
    n_agents: int = 10
    n_steps: int = 1000
    seed: int = 0
    initial_positions: Optional[tuple] = None
    init_margin: float = 0.05
    normalize_potential: bool = True
    warm_start: bool = False
    store_every: int = 1

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError(f"n_agents must be >= 1, got {self.n_agents}")
        if self.n_steps < 0:
            raise ValueError(f"n_steps must be >= 0, got {self.n_steps}")
        if self.store_every < 1:
            raise ValueError(f"store_every must be >= 1, got {self.store_every}")
        if not 0 <= self.init_margin < 0.5:
            raise ValueError(f"init_margin must be in [0, 0.5), got {self.init_margin}")
        grid = self.grid  # validates dimensions
        if self.initial_positions is not None:
            pos = np.asarray(self.initial_positions, dtype=float)
            if pos.shape != (self.n_agents, 2):
                raise ValueError(f"initial_positions must have shape ({self.n_agents}, 2), got {pos.shape}")
            if np.any(pos < 0) or np.any(pos[:, 0] > grid.lx) or np.any(pos[:, 1] > grid.ly):
                raise ValueError("initial_positions must lie inside the domain")

    @property
    def grid(self) -> Grid2D:
        return Grid2D(self.nx, self.ny, self.lx, self.ly)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        m = self.method
        return {
            "grid": {"nx": self.nx, "ny": self.ny, "lx": self.lx, "ly": self.ly},
            "scenario": {"name": self.scenario, "params": _plain(self.scenario_params)},
            "method": {"name": m.name, **dataclasses.asdict(m)},
            "diffusion": dataclasses.asdict(self.diffusion),
            "control": dataclasses.asdict(self.control),
            "agents": {
                "n_agents": self.n_agents,
                "initial_positions": None if self.initial_positions is None
                else [list(map(float, p)) for p in self.initial_positions],
                "init_margin": self.init_margin,
            },
            "run": {
                "n_steps": self.n_steps,
                "seed": self.seed,
                "normalize_potential": self.normalize_potential,
                "warm_start": self.warm_start,
                "store_every": self.store_every,
            },
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def config_hash(config: SimConfig) -> str:
    """Short digest of everything except the seed."""
    d = config.to_dict()
    d["run"].pop("seed")
    blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:10]


class PotentialField:
    """Computes the steering field for one method on a fixed grid.

    ``gradient_fields`` returns the two components of the direction agents
    ascend. For SMC that is minus the gradient of the mismatch potential.
    """

    def __init__(self, method: Method, diffusion: DiffusionParams, grid: Grid2D, mu: np.ndarray,
                 normalize: bool = True, warm_start: bool = False):
        self.method = method
        self.params = diffusion
        self.grid = grid
        self.mu = mu
        self.ws: SpectralWorkspace = make_workspace(grid)
        # PM thresholds K against the error in units of the peak target density
        self.scale = 1.0 / float(mu.max()) if normalize else 1.0
        self.warm_start = warm_start
        self._prev_g = None
        self._prev_e = None
        self.basis = SmcBasis(grid, method.n_modes, method.weight_exponent) if isinstance(method, Smc) else None

    def potential(self, e: np.ndarray, c: np.ndarray) -> np.ndarray:
        if isinstance(self.method, Smc):
            return -self.basis.potential(self.mu, c)[0]
        src = e * self.scale
        if self.warm_start and self._prev_g is not None:
            src = self._prev_g + (src - self._prev_e)
        if isinstance(self.method, PeronaMalik):
            g = diffuse(src, self.params, self.ws)
        elif isinstance(self.method, Hedac):
            g = hedac_potential(src, self.method.beta, self.params, self.ws)
        else:
            raise TypeError(f"unsupported method {self.method!r}")
        if self.warm_start:
            self._prev_g = g
            self._prev_e = e * self.scale
        return g

    def gradient_fields(self, e: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(g, dg/dx, dg/dy)``."""
        if isinstance(self.method, Smc):
            phi, dx, dy = self.basis.potential(self.mu, c)
            return -phi, -dx, -dy
        g = self.potential(e, c)
        gx, gy = gradient(g, self.ws)
        return g, gx, gy


@dataclass
class RunResult:
    config: SimConfig
    error_series: np.ndarray
    times: np.ndarray
    trajectory_steps: np.ndarray
    trajectories: np.ndarray  # (n_stored, n_agents, 2)
    final_fields: dict
    snapshots: dict
    wall_time: float

    @property
    def final_error(self) -> float:
        return float(self.error_series[-1])


def _initial_state(config: SimConfig, grid: Grid2D, rng: np.random.Generator) -> AgentState:
    if config.initial_positions is not None:
        return AgentState.at(config.initial_positions, rng)
    return AgentState.random(config.n_agents, grid, rng, config.init_margin)


def run(config: SimConfig, snapshot_steps=(), mu: Optional[density_mod.TargetDensity] = None) -> RunResult:
    """Simulate one team for ``config.n_steps`` control steps."""
    t_start = time.perf_counter()
    grid = config.grid
    if mu is None:
        mu = density_mod.make_scenario(config.scenario, grid, **config.scenario_params)
    mu_v = np.asarray(mu.values)
    snapshot_steps = sorted(set(int(s) for s in snapshot_steps))
    if snapshot_steps and (snapshot_steps[0] < 0 or snapshot_steps[-1] > config.n_steps):
        raise ValueError(f"snapshot steps must lie in [0, {config.n_steps}], got {snapshot_steps}")

    rng = np.random.Generator(np.random.PCG64(config.seed))
    state = _initial_state(config, grid, rng)
    cp = config.control
    field_ = PotentialField(config.method, config.diffusion, grid, mu_v,
                            config.normalize_potential, config.warm_start)

    acc = CoverageAccumulator(grid, config.n_agents)
    acc.deposit(state.positions, cp.dt_control)

    n_stored = config.n_steps // config.store_every + 1
    traj_steps = np.arange(n_stored) * config.store_every
    traj = np.empty((n_stored, config.n_agents, 2))
    traj[0] = state.positions
    errors = np.empty(config.n_steps + 1)
    snapshots = {}

    c = empirical_density(acc)
    e = error_field(c, mu_v)
    errors[0] = global_error(e, grid.cell_area)

    for s in range(1, config.n_steps + 2):
        try:
            g, gx, gy = field_.gradient_fields(e, c)
        except SolverInstability as exc:
            raise SimulationError(
                f"potential solve failed at control step {s - 1}: {exc}", step=s - 1,
                diagnostics={"max_abs_e": float(np.abs(e).max()), "E": float(errors[s - 1])},
            ) from exc
        if s - 1 in snapshot_steps:
            snapshots[s - 1] = {"mu": mu_v.copy(), "c": c.copy(), "e": e.copy(), "g": g.copy(),
                                "positions": state.positions.copy()}
        if s > config.n_steps:
            break
        grad = sample_gradient(gx, gy, state.positions, grid)
        u = control(state, grad, cp)
        state = step(state, u, cp.dt_control, grid)
        acc.deposit(state.positions, cp.dt_control)
        c = empirical_density(acc)
        e = error_field(c, mu_v)
        errors[s] = global_error(e, grid.cell_area)
        if not np.isfinite(errors[s]):
            raise SimulationError(f"non-finite coverage error at step {s}", step=s)
        if s % config.store_every == 0:
            traj[s // config.store_every] = state.positions

    times = np.arange(config.n_steps + 1) * cp.dt_control
    return RunResult(
        config=config,
        error_series=errors,
        times=times,
        trajectory_steps=traj_steps,
        trajectories=traj,
        final_fields={"mu": mu_v.copy(), "c": c, "e": e, "g": g},
        snapshots=snapshots,
        wall_time=time.perf_counter() - t_start,
    )


@dataclass
class ExperimentSummary:
    methods: list
    n_runs: int
    times: np.ndarray
    runs: dict  # method name -> list of RunResult or error message
    mean_E: dict
    std_E: dict

    def final_means(self) -> dict:
        return {m: float(self.mean_E[m][-1]) for m in self.mean_E}


def _run_job(args):
    config = args
    try:
        return run(config)
    except (SimulationError, ValueError) as exc:
        return f"{type(exc).__name__}: {exc}"


def experiment(base_config: SimConfig, methods, n_runs: int, shared_initial_positions: bool = True,
               workers: int = 1) -> ExperimentSummary:
    """Run every method ``n_runs`` times and aggregate ``E(t)``.

    With shared initial positions, run ``r`` of every method uses the seed
    ``derive_seed(base_seed, r)``, hence the same starting team.
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    methods = [method_from_name(m) if isinstance(m, str) else m for m in methods]
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate methods in {names}")

    jobs = []
    for mi, m in enumerate(methods):
        for r in range(n_runs):
            seed = derive_seed(base_config.seed, r) if shared_initial_positions \
                else derive_seed(base_config.seed, r, mi + 1)
            jobs.append(base_config.replace(method=m, seed=seed))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]

    runs, mean_E, std_E = {}, {}, {}
    for mi, name in enumerate(names):
        rs = results[mi * n_runs:(mi + 1) * n_runs]
        runs[name] = rs
        ok = [r.error_series for r in rs if isinstance(r, RunResult)]
        for r in rs:
            if not isinstance(r, RunResult):
                log.warning("method %s: run failed: %s", name, r)
        if ok:
            stack = np.vstack(ok)
            mean_E[name] = stack.mean(axis=0)
            std_E[name] = stack.std(axis=0)
        else:
            mean_E[name] = np.full(base_config.n_steps + 1, np.nan)
            std_E[name] = np.full(base_config.n_steps + 1, np.nan)
    times = np.arange(base_config.n_steps + 1) * base_config.control.dt_control
    return ExperimentSummary(names, n_runs, times, runs, mean_E, std_E)


def _fmt(x: float) -> str:
    return repr(float(x))


def run_dir_name(config: SimConfig) -> str:
    return f"{config.method.name}-{config_hash(config)}-seed{config.seed}"


def write_run_outputs(result: RunResult, out_dir, fields: bool = True) -> Path:
    """Write ``errors.csv``, ``trajectory.csv`` and grid dumps under a per-run directory."""
    config = result.config
    d = Path(out_dir) / run_dir_name(config)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "errors.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "time", "E"])
        for k, (t, e) in enumerate(zip(result.times, result.error_series)):
            w.writerow([k, _fmt(t), _fmt(e)])
    with open(d / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "agent", "x", "y"])
        for k, pos in zip(result.trajectory_steps, result.trajectories):
            for a, (x, y) in enumerate(pos):
                w.writerow([int(k), a, _fmt(x), _fmt(y)])
    if fields:
        grid = config.grid
        for name, values in result.final_fields.items():
            write_grid(d / f"{name}_final.grid", values, grid)
    (d / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    return d


def write_summary(summary: ExperimentSummary, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "time", "method", "mean_E", "std_E"])
        for name in summary.methods:
            for k, t in enumerate(summary.times):
                w.writerow([k, _fmt(t), name, _fmt(summary.mean_E[name][k]), _fmt(summary.std_E[name][k])])
    return path
