"""Slow reference implementations used to cross-check the fast path in tests.

Nothing here imports the spectral or coverage modules: index arithmetic, the
diffusivity and the norms are written out again on purpose.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["FdField", "fd_pm_step", "fd_stability_bound", "brute_force_E"]


class FdField:
    """Dense periodic field with explicit wrap-around indexing."""

    def __init__(self, values, h: float = 1.0):
        self.values = np.array(values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("FdField needs a 2-D array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("FdField values must be finite")
        self.h = float(h)

    @property
    def shape(self):
        return self.values.shape

    def shifted(self, di: int, dj: int) -> np.ndarray:
        """``out[i, j] = values[(i + di) % nx, (j + dj) % ny]``."""
        nx, ny = self.values.shape
        ii = (np.arange(nx) + di) % nx
        jj = (np.arange(ny) + dj) % ny
        return self.values[np.ix_(ii, jj)]


def fd_stability_bound(h: float, alpha: float) -> float:
    return h * h / (4.0 * (1.0 + alpha))


def fd_pm_step(g: FdField, K: float, dt: float, alpha: float) -> FdField:
    """One fully explicit Euler step of ``div(D grad g) + alpha lap g``.

    Gradient and divergence use second-order central differences at the
    nodes (the same "gradient, then divergence" structure as the spectral
    path); the alpha term uses the 5-point Laplacian.
    """
    h = g.h
    bound = fd_stability_bound(h, alpha)
    if dt > bound:
        raise ValueError(f"dt={dt} exceeds the explicit stability bound {bound:.6g}")
    gx = (g.shifted(1, 0) - g.shifted(-1, 0)) / (2 * h)
    gy = (g.shifted(0, 1) - g.shifted(0, -1)) / (2 * h)
    mag2 = gx * gx + gy * gy
    d = 1.0 / (1.0 + mag2 / (K * K))
    fx = FdField(d * gx, h)
    fy = FdField(d * gy, h)
    div = (fx.shifted(1, 0) - fx.shifted(-1, 0)) / (2 * h) + (fy.shifted(0, 1) - fy.shifted(0, -1)) / (2 * h)
    lap = (g.shifted(1, 0) + g.shifted(-1, 0) + g.shifted(0, 1) + g.shifted(0, -1) - 4 * g.values) / (h * h)
    out = g.values + dt * (div + alpha * lap)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("finite-difference step produced non-finite values")
    return FdField(out, h)


def brute_force_E(trajectories, mu, nx: int, ny: int, lx: float, ly: float) -> float:
    """Coverage error recomputed from raw positions in one pass.

    ``trajectories`` has shape ``(n_samples, n_agents, 2)`` and holds every
    deposited position (the initial one included); each sample carries equal
    dwell time, so that time cancels from the normalized density.
    """
    traj = np.asarray(trajectories, dtype=float)
    mu = np.asarray(mu, dtype=float)
    n_samples, n_agents, _ = traj.shape
    dx, dy = lx / nx, ly / ny
    counts = [[0] * ny for _ in range(nx)]
    for k in range(n_samples):
        for a in range(n_agents):
            x, y = traj[k, a]
            # lower cell wins on a shared edge
            i = min(max(math.ceil(x / dx) - 1, 0), nx - 1)
            j = min(max(math.ceil(y / dy) - 1, 0), ny - 1)
            counts[i][j] += 1
    total = n_samples * n_agents
    area = dx * dy
    acc = 0.0
    for i in range(nx):
        for j in range(ny):
            c = counts[i][j] / (total * area)
            diff = mu[i, j] - c
            acc += diff * diff
    return math.sqrt(acc * area)
