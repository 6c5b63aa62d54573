"""Empirical time-averaged coverage, the coverage-error field and the ergodicity metric."""

from __future__ import annotations

import numpy as np

from .spectral import Grid2D

__all__ = [
    "CoverageAccumulator",
    "cell_index",
    "empirical_density",
    "error_field",
    "global_error",
]


def cell_index(pos: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Index of the cell containing each point of ``pos`` (shape ``(n, 2)``).

    A point exactly on a shared cell edge goes to the lower-index cell.
    """
    pos = np.atleast_2d(np.asarray(pos, dtype=float))
    ix = np.ceil(pos[:, 0] / grid.dx).astype(np.int64) - 1
    iy = np.ceil(pos[:, 1] / grid.dy).astype(np.int64) - 1
    return np.clip(ix, 0, grid.nx - 1), np.clip(iy, 0, grid.ny - 1)


class CoverageAccumulator:
    """Per-cell dwell time of all agents under a Dirac footprint."""

    def __init__(self, grid: Grid2D, n_agents: int):
        if n_agents < 1:
            raise ValueError(f"n_agents must be >= 1, got {n_agents}")
        self.grid = grid
        self.n_agents = int(n_agents)
        self.visit_time = grid.zeros()
        self.total_time = 0.0

    def deposit(self, positions, dt: float) -> "CoverageAccumulator":
        if not dt > 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        pos = np.atleast_2d(np.asarray(positions, dtype=float))
        if pos.shape != (self.n_agents, 2):
            raise ValueError(f"expected positions of shape ({self.n_agents}, 2), got {pos.shape}")
        g = self.grid
        outside = (pos[:, 0] < 0) | (pos[:, 0] > g.lx) | (pos[:, 1] < 0) | (pos[:, 1] > g.ly)
        if np.any(outside) or not np.all(np.isfinite(pos)):
            raise ValueError(f"agent position outside the domain: {pos[outside].tolist()}")
        ix, iy = cell_index(pos, g)
        np.add.at(self.visit_time, (ix, iy), dt)
        self.total_time += dt
        return self

    def copy(self) -> "CoverageAccumulator":
        other = CoverageAccumulator(self.grid, self.n_agents)
        other.visit_time = self.visit_time.copy()
        other.total_time = self.total_time
        return other


def empirical_density(acc: CoverageAccumulator) -> np.ndarray:
    if acc.total_time <= 0:
        raise ValueError("empirical density is undefined before any deposit (total_time = 0)")
    return acc.visit_time / (acc.n_agents * acc.total_time * acc.grid.cell_area)


def error_field(c: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Coverage deficit ``mu - c``; positive where coverage is lacking."""
    c = np.asarray(c, dtype=float)
    mu = np.asarray(getattr(mu, "values", mu), dtype=float)
    if c.shape != mu.shape:
        raise ValueError(f"grid mismatch: coverage {c.shape} vs target {mu.shape}")
    return mu - c


def global_error(e: np.ndarray, cell_area: float) -> float:
    """Discrete L2 norm ``sqrt(sum e^2 * cell_area)``."""
    e = np.asarray(e, dtype=float)
    return float(np.sqrt(np.sum(e * e) * cell_area))
