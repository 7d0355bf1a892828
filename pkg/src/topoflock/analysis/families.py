"""Seeded test families of band-limited real fields."""

from __future__ import annotations

import numpy as np

from ..grid import Grid, ifft


def single_mode(grid: Grid, k, kind: str = "cos") -> np.ndarray:
    """cos(k . x) or sin(k . x) sampled on the grid."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    phase = sum(kk * x for kk, x in zip(k, grid.coords))
    return np.cos(phase) if kind == "cos" else np.sin(phase)


def random_trig_polynomials(grid: Grid, count: int, max_mode: int, rng: np.random.Generator, min_mode: float = 1.0) -> np.ndarray:
    """``count`` unit-L2 real trig polynomials with min_mode <= |k| and |k_i| <= max_mode.

    Returns an array of shape (count, *grid.shape).
    """
    if not 1 <= max_mode < grid.n_points // 2:
        raise ValueError(f"max_mode must lie in [1, N/2), got {max_mode}")
    band = np.ones(grid.shape, dtype=bool)
    for idx in grid.mode_index:
        band &= np.abs(idx) <= max_mode
    band &= grid.k_abs >= min_mode
    if not band.any():
        raise ValueError("empty mode band")
    shape = (count,) + grid.shape
    modes = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * band
    values = ifft(modes, grid)
    rms = np.sqrt(np.mean(values.reshape(count, -1) ** 2, axis=1))
    return values / rms.reshape((count,) + (1,) * grid.dim)
