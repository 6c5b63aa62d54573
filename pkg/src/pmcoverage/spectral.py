"""Periodic 2-D grid and FFT-based differential operators.

Fields are plain ``float64`` arrays of shape ``(nx, ny)``; ``f[i, j]`` is the
sample at the centre of cell ``(i, j)``, i.e. at ``((i + 1/2) dx, (j + 1/2) dy)``.
Transforms use the ``"forward"`` normalization so the zero mode of a field's
spectrum equals the field mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid2D",
    "SpectralWorkspace",
    "make_workspace",
    "fft",
    "ifft",
    "gradient",
    "divergence",
    "laplacian",
    "check_field",
]


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n:
                raise ValueError(f"{name} must be an integer, got {n!r}")
            if n < 8:
                raise ValueError(f"{name} must be >= 8, got {n}")
            if n % 2:
                raise ValueError(f"{name} must be even, got {n}")
        for name in ("lx", "ly"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.lx * self.ly / (self.nx * self.ny)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """1-D arrays of cell-centre coordinates along x and y."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return x, y

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.cell_centers()
        return np.meshgrid(x, y, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


@dataclass(frozen=True)
class SpectralWorkspace:
    """Wavenumbers for a real-to-complex transform on ``grid``.

    ``kx`` has shape ``(nx, 1)`` (full signed range), ``ky`` has shape
    ``(1, ny // 2 + 1)`` (non-negative half spectrum). ``ikx``/``iky`` are
    the derivative multipliers with the unmatched Nyquist entries zeroed.
    """

    grid: Grid2D
    kx: np.ndarray
    ky: np.ndarray
    k_sq: np.ndarray
    ikx: np.ndarray = field(repr=False)
    iky: np.ndarray = field(repr=False)


def make_workspace(grid: Grid2D) -> SpectralWorkspace:
    if not isinstance(grid, Grid2D):
        raise TypeError("make_workspace expects a Grid2D")
    kx = 2.0 * np.pi * np.fft.fftfreq(grid.nx, d=grid.dx)
    ky = 2.0 * np.pi * np.fft.rfftfreq(grid.ny, d=grid.dy)
    kx = kx[:, None]
    ky = ky[None, :]
    k_sq = kx**2 + ky**2

    ikx = 1j * kx.copy()
    ikx[grid.nx // 2, 0] = 0.0
    iky = 1j * ky.copy()
    iky[0, grid.ny // 2] = 0.0

    for arr in (kx, ky, k_sq, ikx, iky):
        arr.setflags(write=False)
    return SpectralWorkspace(grid=grid, kx=kx, ky=ky, k_sq=k_sq, ikx=ikx, iky=iky)


def fft(f: np.ndarray) -> np.ndarray:
    """Half-spectrum transform over the last two axes (leading axes are batched)."""
    return sfft.rfft2(f, norm="forward")


def ifft(f_hat: np.ndarray, ws: SpectralWorkspace) -> np.ndarray:
    return sfft.irfft2(f_hat, s=ws.grid.shape, norm="forward")


def check_field(f: np.ndarray, ws: SpectralWorkspace, name: str = "field") -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != ws.grid.shape:
        raise ValueError(f"{name} has shape {f.shape}, grid expects {ws.grid.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} contains non-finite values")
    return f


def gradient(f: np.ndarray, ws: SpectralWorkspace) -> tuple[np.ndarray, np.ndarray]:
    """Spectral (d/dx, d/dy) of a periodic field."""
    f_hat = fft(check_field(f, ws))
    return ifft(ws.ikx * f_hat, ws), ifft(ws.iky * f_hat, ws)


def divergence(vx: np.ndarray, vy: np.ndarray, ws: SpectralWorkspace) -> np.ndarray:
    vx = check_field(vx, ws, "vx")
    vy = check_field(vy, ws, "vy")
    return ifft(ws.ikx * fft(vx) + ws.iky * fft(vy), ws)


def laplacian(f: np.ndarray, ws: SpectralWorkspace) -> np.ndarray:
    """Laplacian through the -|k|^2 symbol.

    Unlike ``divergence(*gradient(f))`` this keeps the Nyquist modes, so the
    two routes agree only for fields without Nyquist content.
    """
    return ifft(-ws.k_sq * fft(check_field(f, ws)), ws)
