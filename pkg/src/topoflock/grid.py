"""Uniform periodic grids on T^n, spectral calculus and field snapshots.

Fourier coefficients use the mean-normalised convention

    f(x) = sum_k fhat(k) exp(i k.x),    fhat = fftn(f) / N^n,

so that the Hdot^0 seminorm squared is the mean square of f minus its mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft

HEADER_MAGIC = "TOPOFLOCK-FIELD v1"


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``n_points`` nodes per axis on [0, period)^dim."""

    dim: int
    n_points: int
    period: float = 2 * np.pi

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        n = self.n_points
        if n < 8 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 8, got {n}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def spacing(self) -> float:
        return self.period / self.n_points

    @property
    def shape(self) -> tuple:
        return (self.n_points,) * self.dim

    @property
    def size(self) -> int:
        return self.n_points**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @cached_property
    def coords(self) -> tuple:
        """Meshgrid of node coordinates, one array per axis (``indexing='ij'``)."""
        x = np.arange(self.n_points) * self.spacing
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def mode_index(self) -> tuple:
        """Integer mode numbers per axis, broadcast to ``shape``."""
        k = np.fft.fftfreq(self.n_points, d=1.0 / self.n_points)
        return tuple(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple:
        scale = 2 * np.pi / self.period
        return tuple(scale * k for k in self.mode_index)

    @cached_property
    def k_abs(self) -> np.ndarray:
        return np.sqrt(sum(k**2 for k in self.wavenumbers))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep modes with |index| < N/3 on every axis."""
        keep = np.ones(self.shape, dtype=bool)
        for k in self.mode_index:
            keep &= np.abs(k) < self.n_points / 3
        return keep


@dataclass(frozen=True, eq=False)
class Field:
    """Grid function with ``components`` channels; ``values`` has shape (c, *grid.shape)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape == self.grid.shape:
            vals = vals[None]
        if vals.ndim != self.grid.dim + 1 or vals.shape[1:] != self.grid.shape:
            raise ValueError(
                f"values of shape {np.shape(self.values)} do not fit grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_function(cls, grid: Grid, *funcs) -> "Field":
        """Sample one callable per component at the grid nodes."""
        vals = [np.broadcast_to(f(*grid.coords), grid.shape) for f in funcs]
        return cls(grid, np.array(vals, dtype=float))

    @classmethod
    def constant(cls, grid: Grid, value=0.0, components: int = 1) -> "Field":
        return cls(grid, np.full((components,) + grid.shape, float(value)))

    def mean(self) -> np.ndarray:
        axes = tuple(range(1, self.grid.dim + 1))
        return self.values.mean(axis=axes)

    def __add__(self, other):
        return Field(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return Field(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return Field(self.grid, self.values * _vals(other))

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, Field) else x


@dataclass(frozen=True, eq=False)
class SpectralCoefficients:
    grid: Grid
    modes: np.ndarray = field(repr=False)


def _axes(grid: Grid) -> tuple:
    return tuple(range(-grid.dim, 0))


def fft(values: np.ndarray, grid: Grid) -> np.ndarray:
    return scipy.fft.fftn(values, axes=_axes(grid), norm="forward")


def ifft(modes: np.ndarray, grid: Grid) -> np.ndarray:
    return scipy.fft.ifftn(modes, axes=_axes(grid), norm="forward").real


def transform(f: Field) -> SpectralCoefficients:
    return SpectralCoefficients(f.grid, fft(f.values, f.grid))


def inverse(c: SpectralCoefficients) -> Field:
    return Field(c.grid, ifft(c.modes, c.grid))


def derivative_values(values: np.ndarray, grid: Grid, axis: int, order: int = 1) -> np.ndarray:
    """Array-level spectral derivative; ``values`` carries the grid axes last."""
    k = grid.wavenumbers[axis]
    mult = (1j * k) ** order
    if order % 2:
        mult = np.where(grid.mode_index[axis] == -grid.n_points // 2, 0.0, mult)
    return ifft(fft(values, grid) * mult, grid)


def spectral_derivative(f: Field, axis: int, order: int = 1) -> Field:
    """Order-th partial derivative along ``axis`` via the multiplier (i k)^order.

    The Nyquist mode is dropped for odd orders so the result stays real.
    """
    if not 0 <= axis < f.grid.dim:
        raise ValueError(f"axis {axis} out of range for a {f.grid.dim}-d grid")
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    return Field(f.grid, derivative_values(f.values, f.grid, axis, order))


def divergence_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral divergence of an (n, *shape) vector array, dropping Nyquist."""
    out = np.zeros(grid.shape)
    for axis in range(grid.dim):
        out += derivative_values(values[axis], grid, axis, 1)
    return out


def dealias_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    return ifft(fft(values, grid) * grid.dealias_mask, grid)


def sobolev_seminorm(f: Field, s: float) -> float:
    """Homogeneous Hdot^s seminorm, summed over components."""
    if s < 0:
        raise ValueError("negative smoothness is not supported")
    return float(np.sqrt(sobolev_seminorm_sq(f.values, f.grid, s)))


def sobolev_seminorm_sq(values: np.ndarray, grid: Grid, s: float) -> float:
    modes = fft(values, grid)
    kabs = grid.k_abs
    weight = np.where(kabs > 0, kabs ** (2 * s) if s else 1.0, 0.0)
    return float(np.sum(weight * np.abs(modes) ** 2))


def fractional_laplacian(f: Field, alpha: float) -> Field:
    """Apply the multiplier -|k|^alpha (dissipative sign)."""
    if not 0 < alpha < 2:
        raise ValueError(f"alpha must lie in (0,2), got {alpha}")
    g = f.grid
    return Field(g, ifft(-(g.k_abs**alpha) * fft(f.values, g), g))


def heat_multiplier(grid: Grid, nu: float, t: float) -> np.ndarray:
    return np.exp(-nu * grid.k_abs**2 * t)


def heat_semigroup(f: Field, nu: float, dt: float) -> Field:
    """exp(nu * dt * Laplacian) applied mode by mode."""
    if nu < 0 or dt < 0:
        raise ValueError("heat semigroup needs nu >= 0 and dt >= 0")
    if nu == 0 or dt == 0:
        return f
    g = f.grid
    return Field(g, ifft(fft(f.values, g) * heat_multiplier(g, nu, dt), g))


def shift_values(values: np.ndarray, grid: Grid, shift) -> np.ndarray:
    """Exact trigonometric interpolation of ``values`` at x + shift."""
    modes = fft(values, grid)
    phase = sum(k * a for k, a in zip(grid.wavenumbers, np.atleast_1d(shift)))
    return ifft(modes * np.exp(1j * phase), grid)


# --- snapshot files -------------------------------------------------------


def write_snapshot(f: Field, path) -> Path:
    """Write the binary snapshot format (text header + little-endian float64)."""
    g = f.grid
    path = Path(path)
    header = (
        f"{HEADER_MAGIC}; dim={g.dim}; N={g.n_points}; L={g.period!r}; "
        f"components={f.components}\n"
    )
    body = np.moveaxis(f.values, 0, -1).astype("<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(body)
    return path


def read_snapshot(path) -> Field:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        body = fh.read()
    parts = [p.strip() for p in header.split(";")]
    if parts[0] != HEADER_MAGIC:
        raise ValueError(f"not a field snapshot: {header!r}")
    meta = dict(p.split("=", 1) for p in parts[1:])
    grid = Grid(int(meta["dim"]), int(meta["N"]), float(meta["L"]))
    c = int(meta["components"])
    arr = np.frombuffer(body, dtype="<f8")
    if arr.size != grid.size * c:
        raise ValueError(f"snapshot body has {arr.size} values, expected {grid.size * c}")
    vals = np.moveaxis(arr.reshape(grid.shape + (c,)), -1, 0)
    return Field(grid, vals.astype(float))
