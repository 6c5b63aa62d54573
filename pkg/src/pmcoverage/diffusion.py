"""Potential fields for coverage: Perona-Malik, linear heat (HEDAC) and SMC.

The Perona-Malik potential evolves the coverage error ``e`` under

    dg/dtau = div(D(|grad g|) grad g),   D(s) = 1 / (1 + (s/K)^2)

with a semi-implicit spectral step in which the nonlinear flux is explicit
and a stabilizing ``alpha * lap(g)`` term is implicit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from .spectral import Grid2D, SpectralWorkspace, check_field, fft, ifft

log = logging.getLogger(__name__)

__all__ = [
    "DiffusionParams",
    "PeronaMalik",
    "Hedac",
    "Smc",
    "Method",
    "method_from_name",
    "SolverInstability",
    "diffusivity",
    "pm_rhs",
    "semi_implicit_step",
    "diffuse",
    "hedac_potential",
    "SmcBasis",
    "smc_weights",
    "smc_potential",
]


class SolverInstability(RuntimeError):
    """The semi-implicit stepper produced non-finite values."""


@dataclass(frozen=True)
class DiffusionParams:
    K: float = 0.1
    alpha: float = 0.5
    dt: float = 0.05
    tau: float = 0.9

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError(f"K must be > 0, got {self.K}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.tau >= self.dt:
            raise ValueError(f"tau must be >= dt, got tau={self.tau}, dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.tau / self.dt)))


@dataclass(frozen=True)
class PeronaMalik:
    name = "pm"


@dataclass(frozen=True)
class Hedac:
    beta: float = 1.0
    name = "hedac"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class Smc:
    weight_exponent: float = 1.5
    n_modes: int = 25
    name = "smc"

    def __post_init__(self):
        if not self.weight_exponent > 0:
            raise ValueError(f"weight_exponent must be > 0, got {self.weight_exponent}")
        if self.n_modes < 2:
            raise ValueError(f"n_modes must be >= 2, got {self.n_modes}")


Method = Union[PeronaMalik, Hedac, Smc]


def method_from_name(name: str, **params) -> Method:
    table = {"pm": PeronaMalik, "hedac": Hedac, "smc": Smc}
    try:
        cls = table[name.lower()]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; expected one of {sorted(table)}") from None
    return cls(**params)


def diffusivity(grad_mag: np.ndarray, K: float) -> np.ndarray:
    """Perona-Malik edge-stopping function ``1 / (1 + (s/K)^2)``."""
    return 1.0 / (1.0 + (np.asarray(grad_mag) / K) ** 2)


def _rhs_hat(g_hat: np.ndarray, K: float, ws: SpectralWorkspace) -> np.ndarray:
    # gradient in spectral space, diffusivity in physical space, divergence back in spectral
    grad = ifft(np.stack([ws.ikx * g_hat, ws.iky * g_hat]), ws)
    grad *= diffusivity(np.hypot(grad[0], grad[1]), K)
    flux_hat = fft(grad)
    return ws.ikx * flux_hat[0] + ws.iky * flux_hat[1]


def pm_rhs(g: np.ndarray, K: float, ws: SpectralWorkspace) -> np.ndarray:
    """The flux divergence ``div(D(|grad g|) grad g)``."""
    return ifft(_rhs_hat(fft(check_field(g, ws)), K, ws), ws)


def semi_implicit_step(g: np.ndarray, params: DiffusionParams, ws: SpectralWorkspace) -> np.ndarray:
    g_hat = fft(check_field(g, ws))
    g_hat = (g_hat + params.dt * _rhs_hat(g_hat, params.K, ws)) / (1.0 + params.dt * params.alpha * ws.k_sq)
    out = ifft(g_hat, ws)
    if not np.all(np.isfinite(out)):
        raise SolverInstability("semi-implicit step produced non-finite values")
    return out


def diffuse(e: np.ndarray, params: DiffusionParams, ws: SpectralWorkspace) -> np.ndarray:
    """Apply ``round(tau/dt)`` semi-implicit Perona-Malik steps to ``e``."""
    g_hat = fft(check_field(e, ws, "error field"))
    denom = 1.0 + params.dt * params.alpha * ws.k_sq
    for n in range(params.n_steps):
        g_hat = (g_hat + params.dt * _rhs_hat(g_hat, params.K, ws)) / denom
        if not np.all(np.isfinite(g_hat)):
            raise SolverInstability(f"diffusion blew up at inner step {n} of {params.n_steps}")
    return ifft(g_hat, ws)


def hedac_potential(e: np.ndarray, beta: float, params: DiffusionParams, ws: SpectralWorkspace) -> np.ndarray:
    """Exact linear diffusion of ``e`` for ``params.tau`` with diffusivity ``beta``."""
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    e_hat = fft(check_field(e, ws, "error field"))
    return ifft(e_hat * np.exp(-beta * ws.k_sq * params.tau), ws)


def smc_weights(n_modes: int, weight_exponent: float) -> np.ndarray:
    """Sobolev weights ``(1 + |k|^2)^-s`` over integer index pairs ``0 <= k < n_modes``."""
    k = np.arange(n_modes)
    return (1.0 + k[:, None] ** 2 + k[None, :] ** 2) ** (-weight_exponent)


class SmcBasis:
    """Cosine basis ``prod_i cos(k_i pi x_i / L_i) / h_k`` sampled on the grid.

    This is the classic spectral multiscale coverage basis on a rectangle.
    Its derivative vanishes on the walls, which suits reflecting agents.
    """

    def __init__(self, grid: Grid2D, n_modes: int = 25, weight_exponent: float = 1.5):
        self.grid = grid
        self.n_modes = n_modes
        self.weight_exponent = weight_exponent
        k = np.arange(n_modes)
        x, y = grid.cell_centers()
        self.wx = k * np.pi / grid.lx
        self.wy = k * np.pi / grid.ly
        # separable factors, shape (n_modes, n_points)
        self.cx = np.cos(self.wx[:, None] * x[None, :])
        self.cy = np.cos(self.wy[:, None] * y[None, :])
        self.sx = -self.wx[:, None] * np.sin(self.wx[:, None] * x[None, :])
        self.sy = -self.wy[:, None] * np.sin(self.wy[:, None] * y[None, :])
        # h_k normalizes each basis function to unit L2 norm on the continuous domain
        hx = np.where(k == 0, 1.0, np.sqrt(0.5))
        hy = np.where(k == 0, 1.0, np.sqrt(0.5))
        self.h = np.outer(hx, hy) * np.sqrt(grid.area)
        self.weights = smc_weights(n_modes, weight_exponent)

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        """Midpoint-rule inner products of ``f`` with each basis function."""
        return (self.cx @ f @ self.cy.T) * self.grid.cell_area / self.h

    def potential(self, mu: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(phi, dphi/dx, dphi/dy)`` for ``phi = sum_k w_k (c_k - mu_k) f_k``."""
        a = self.weights * (self.coefficients(c) - self.coefficients(mu)) / self.h
        a[0, 0] = 0.0
        phi = self.cx.T @ a @ self.cy
        dx = self.sx.T @ a @ self.cy
        dy = self.cx.T @ a @ self.sy
        return phi, dx, dy


def smc_potential(
    mu: np.ndarray, c: np.ndarray, weight_exponent: float = 1.5, ws: SpectralWorkspace | None = None,
    n_modes: int = 25, basis: SmcBasis | None = None,
) -> np.ndarray:
    """SMC mismatch potential; agents descend it."""
    if basis is None:
        if ws is None:
            raise ValueError("smc_potential needs either a workspace or a prebuilt basis")
        basis = SmcBasis(ws.grid, n_modes, weight_exponent)
    mu = np.asarray(mu, dtype=float)
    c = np.asarray(c, dtype=float)
    if mu.shape != c.shape or mu.shape != basis.grid.shape:
        raise ValueError(f"shape mismatch: mu {mu.shape}, c {c.shape}, grid {basis.grid.shape}")
    return basis.potential(mu, c)[0]
