"""Target densities for the three benchmark scenarios, plus loading from grid dumps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gridio import read_grid
from .spectral import Grid2D

__all__ = [
    "TargetDensity",
    "normalize",
    "circle_square",
    "gaussian_stripe",
    "bimodal_gaussian",
    "load_density",
    "SCENARIOS",
    "make_scenario",
]


@dataclass(frozen=True)
class TargetDensity:
    values: np.ndarray
    grid: Grid2D
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)


def normalize(values: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Scale a non-negative field to unit mass."""
    values = np.array(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"density shape {values.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("density contains non-finite values")
    if np.any(values < 0):
        raise ValueError("density has negative values")
    total = values.sum() * grid.cell_area
    if total <= 0:
        raise ValueError("density is identically zero and cannot be normalized")
    values /= total
    # second pass removes the last-ulp mass error of the first division
    values /= values.sum() * grid.cell_area
    return values


def _gauss(x, y, mean, cov):
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = np.eye(2) * float(cov)
    if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
        raise ValueError(f"covariance must be a symmetric 2x2 matrix, got {cov.tolist()}")
    if np.any(np.linalg.eigvalsh(cov) <= 0):
        raise ValueError("covariance must be positive definite")
    inv = np.linalg.inv(cov)
    dx = x - mean[0]
    dy = y - mean[1]
    q = inv[0, 0] * dx * dx + 2 * inv[0, 1] * dx * dy + inv[1, 1] * dy * dy
    return np.exp(-0.5 * q) / (2 * np.pi * np.sqrt(np.linalg.det(cov)))


def circle_square(grid: Grid2D, square_half_width=None, ring_inner_radius=None,
                  ring_outer_radius=None, center=None) -> TargetDensity:
    """Uniform density on a centred square plus a surrounding annulus."""
    hw = 0.1 * grid.lx if square_half_width is None else float(square_half_width)
    r_in = 0.3 * grid.lx if ring_inner_radius is None else float(ring_inner_radius)
    r_out = 0.35 * grid.lx if ring_outer_radius is None else float(ring_outer_radius)
    cx, cy = (0.5 * grid.lx, 0.5 * grid.ly) if center is None else map(float, center)
    if hw <= 0:
        raise ValueError(f"square half width must be positive, got {hw}")
    if not 0 <= r_in < r_out:
        raise ValueError(f"ring radii must satisfy 0 <= inner < outer, got {r_in}, {r_out}")
    reach = max(r_out, hw)
    if cx - reach < 0 or cx + reach > grid.lx or cy - reach < 0 or cy + reach > grid.ly:
        raise ValueError("circle-square geometry does not fit inside the domain")

    x, y = grid.mesh()
    square = (np.abs(x - cx) <= hw) & (np.abs(y - cy) <= hw)
    r = np.hypot(x - cx, y - cy)
    ring = (r >= r_in) & (r <= r_out)
    values = normalize((square | ring).astype(float), grid)
    desc = dict(scenario="circle_square", square_half_width=hw, ring_inner_radius=r_in,
                ring_outer_radius=r_out, center=[cx, cy])
    return TargetDensity(values, grid, desc)


def gaussian_stripe(grid: Grid2D, mean=None, covariance=None, stripe_axis: str = "y",
                    stripe_half_width=None) -> TargetDensity:
    """Gaussian with a zero-density band through its mean.

    ``stripe_axis`` is the direction the band runs along: ``"y"`` gives a
    vertical band ``|x - mean_x| <= half width``.
    """
    mean = np.array([0.5 * grid.lx, 0.5 * grid.ly] if mean is None else mean, dtype=float)
    cov = (0.15 * grid.lx) ** 2 if covariance is None else covariance
    if stripe_axis not in ("x", "y"):
        raise ValueError(f"stripe_axis must be 'x' or 'y', got {stripe_axis!r}")
    hw = 0.05 * grid.ly if stripe_half_width is None else float(stripe_half_width)
    if hw < 0:
        raise ValueError(f"stripe half width must be >= 0, got {hw}")

    x, y = grid.mesh()
    values = _gauss(x, y, mean, cov)
    band = np.abs(x - mean[0]) <= hw if stripe_axis == "y" else np.abs(y - mean[1]) <= hw
    values[band] = 0.0
    if not np.any(values > 0):
        raise ValueError("stripe covers the whole domain; density is identically zero")
    desc = dict(scenario="gaussian_stripe", mean=mean.tolist(), covariance=np.asarray(cov).tolist(),
                stripe_axis=stripe_axis, stripe_half_width=hw)
    return TargetDensity(normalize(values, grid), grid, desc)


def bimodal_gaussian(grid: Grid2D, means=None, covariances=None) -> TargetDensity:
    """Equal-weight mixture of two Gaussians."""
    if means is None:
        means = [[0.3 * grid.lx, 0.3 * grid.ly], [0.7 * grid.lx, 0.7 * grid.ly]]
    means = np.asarray(means, dtype=float)
    if means.shape != (2, 2):
        raise ValueError(f"expected two 2-D means, got shape {means.shape}")
    if covariances is None:
        covariances = [(0.1 * grid.lx) ** 2] * 2
    if len(covariances) != 2:
        raise ValueError("expected two covariances")

    x, y = grid.mesh()
    values = 0.5 * _gauss(x, y, means[0], covariances[0]) + 0.5 * _gauss(x, y, means[1], covariances[1])
    desc = dict(scenario="bimodal_gaussian", means=means.tolist(),
                covariances=[np.asarray(c).tolist() for c in covariances])
    return TargetDensity(normalize(values, grid), grid, desc)


def load_density(path, grid: Grid2D | None = None) -> TargetDensity:
    """Read a grid dump and renormalize it.

    If ``grid`` is given the file must match its dimensions.
    """
    values, file_grid = read_grid(path)
    if grid is not None and file_grid != grid:
        raise ValueError(f"{path}: file grid {file_grid} does not match expected {grid}")
    return TargetDensity(normalize(values, file_grid), file_grid, dict(scenario="file", path=str(path)))


SCENARIOS = {
    "circle_square": circle_square,
    "gaussian_stripe": gaussian_stripe,
    "bimodal_gaussian": bimodal_gaussian,
}


def make_scenario(name: str, grid: Grid2D, **params) -> TargetDensity:
    if name == "file":
        return load_density(params["path"], grid)
    try:
        ctor = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIOS)} or 'file'") from None
    return ctor(grid, **params)
