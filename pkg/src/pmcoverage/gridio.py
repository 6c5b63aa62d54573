"""Flat binary grid dump.

Layout (all little-endian)::

    magic    6 bytes   b"PMGRID"
    version  uint8     1
    nx, ny   uint32
    lx, ly   float64
    values   nx*ny float64, row-major over (x index, y index)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral import Grid2D

MAGIC = b"PMGRID"
VERSION = 1
_HEADER = struct.Struct("<6sBIIdd")

__all__ = ["GridFormatError", "write_grid", "read_grid", "MAGIC", "VERSION"]


class GridFormatError(ValueError):
    pass


def write_grid(path, values: np.ndarray, grid: Grid2D) -> Path:
    values = np.asarray(values, dtype="<f8")
    if values.shape != grid.shape:
        raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, grid.nx, grid.ny, grid.lx, grid.ly))
        fh.write(np.ascontiguousarray(values).tobytes(order="C"))
    return path


def read_grid(path) -> tuple[np.ndarray, Grid2D]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise GridFormatError(f"cannot read grid file {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise GridFormatError(f"{path}: truncated header")
    magic, version, nx, ny, lx, ly = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise GridFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise GridFormatError(f"{path}: unsupported version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * nx * ny:
        raise GridFormatError(f"{path}: expected {nx}x{ny} values, found {len(body) // 8} float64 words")
    try:
        grid = Grid2D(nx, ny, lx, ly)
    except ValueError as exc:
        raise GridFormatError(f"{path}: {exc}") from exc
    values = np.frombuffer(body, dtype="<f8").reshape(nx, ny).astype(float)
    return values, grid
