"""Single-integrator agents steered at constant speed along a potential gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid2D

__all__ = ["AgentState", "ControlParams", "sample_gradient", "control", "step", "reflect"]


@dataclass(frozen=True)
class ControlParams:
    v_m: float = 1.0
    dt_control: float = 0.05
    eps_grad: float = 1e-12

    def __post_init__(self):
        if not self.v_m > 0:
            raise ValueError(f"v_m must be > 0, got {self.v_m}")
        if not self.dt_control > 0:
            raise ValueError(f"dt_control must be > 0, got {self.dt_control}")
        if not self.eps_grad > 0:
            raise ValueError(f"eps_grad must be > 0, got {self.eps_grad}")


@dataclass
class AgentState:
    """Positions and last headings of a team, arrays of shape ``(n, 2)``."""

    positions: np.ndarray
    headings: np.ndarray

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.headings = np.atleast_2d(np.asarray(self.headings, dtype=float))
        if self.positions.shape != self.headings.shape or self.positions.shape[1] != 2:
            raise ValueError("positions and headings must both have shape (n, 2)")
        norms = np.linalg.norm(self.headings, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("headings must be unit vectors")

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def random(cls, n: int, grid: Grid2D, rng: np.random.Generator, margin: float = 0.0) -> "AgentState":
        lo = np.array([margin * grid.lx, margin * grid.ly])
        hi = np.array([(1 - margin) * grid.lx, (1 - margin) * grid.ly])
        pos = lo + (hi - lo) * rng.random((n, 2))
        theta = rng.uniform(0.0, 2 * np.pi, n)
        return cls(pos, np.column_stack([np.cos(theta), np.sin(theta)]))

    @classmethod
    def at(cls, positions, rng: np.random.Generator) -> "AgentState":
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        theta = rng.uniform(0.0, 2 * np.pi, positions.shape[0])
        return cls(positions, np.column_stack([np.cos(theta), np.sin(theta)]))

    def copy(self) -> "AgentState":
        return AgentState(self.positions.copy(), self.headings.copy())


def sample_gradient(gx: np.ndarray, gy: np.ndarray, points, grid: Grid2D) -> np.ndarray:
    """Bilinear interpolation of ``(gx, gy)`` at ``points``, nodes at cell centres.

    Indices wrap periodically, matching the spectral discretization.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    sx = p[:, 0] / grid.dx - 0.5
    sy = p[:, 1] / grid.dy - 0.5
    i0 = np.floor(sx)
    j0 = np.floor(sy)
    fx = sx - i0
    fy = sy - j0
    i0 = i0.astype(np.int64) % grid.nx
    j0 = j0.astype(np.int64) % grid.ny
    i1 = (i0 + 1) % grid.nx
    j1 = (j0 + 1) % grid.ny
    w00 = (1 - fx) * (1 - fy)
    w10 = fx * (1 - fy)
    w01 = (1 - fx) * fy
    w11 = fx * fy
    out = np.empty((p.shape[0], 2))
    for k, f in enumerate((gx, gy)):
        out[:, k] = w00 * f[i0, j0] + w10 * f[i1, j0] + w01 * f[i0, j1] + w11 * f[i1, j1]
    return out


def control(state: AgentState, grad: np.ndarray, params: ControlParams) -> np.ndarray:
    """Constant-speed ascent ``v_m * grad / |grad|``.

    Agents whose gradient norm is at most ``eps_grad`` keep their last
    heading. Headings of the others are updated in place.
    """
    grad = np.atleast_2d(np.asarray(grad, dtype=float))
    norm = np.linalg.norm(grad, axis=1)
    ok = norm > params.eps_grad
    state.headings[ok] = grad[ok] / norm[ok, None]
    return params.v_m * state.headings


def reflect(x: np.ndarray, length: float) -> tuple[np.ndarray, np.ndarray]:
    """Fold coordinates into ``[0, length]`` by specular reflection.

    Returns the folded coordinates and a boolean mask of odd reflection count.
    """
    m = np.floor(x / length)
    r = x - m * length
    odd = (m.astype(np.int64) % 2) == 1
    r = np.where(odd, length - r, r)
    return np.clip(r, 0.0, length), odd


def step(state: AgentState, u: np.ndarray, dt_control: float, grid: Grid2D) -> AgentState:
    """Forward Euler move with reflecting walls. Returns a new state."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    target = state.positions + u * dt_control
    x, flip_x = reflect(target[:, 0], grid.lx)
    y, flip_y = reflect(target[:, 1], grid.ly)
    speed = np.linalg.norm(u, axis=1, keepdims=True)
    heading = np.where(speed > 0, u / np.where(speed > 0, speed, 1.0), state.headings)
    heading[flip_x, 0] *= -1
    heading[flip_y, 1] *= -1
    return AgentState(np.column_stack([x, y]), heading)
