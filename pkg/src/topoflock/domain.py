"""Communication domains Omega(x, y) and the topological quasi-distance.

The reference body Omega_0 has its tips at -e1 and e1.  A pair (x, y) gets
the copy

    Omega(x, y) = (x + y)/2 + (|x - y|/2) U Omega_0,

with U the rotation taking e1 to (y - x)/|y - x|.  In 1D this is simply the
arc between x and y.  In 2D Omega_0 is a circular lens: the intersection of
two disks of radius 1/sin(beta) centred at (0, +-cot(beta)), whose boundary
meets the tips at half-angle beta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePairError, VacuumError
from .grid import Field, Grid

DEFAULT_RHO_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class DomainShape:
    dim: int
    kind: str
    lens_half_angle: float | None
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    reference_area: float
    exact_interval: bool = False

    @property
    def quadrature_area(self) -> float:
        return float(self.weights.sum())

    @property
    def volume_ratio(self) -> float:
        """|Omega_0| / 2^n: the mass of Omega(x, y) per |x - y|^n at unit density."""
        return self.reference_area / 2**self.dim

    def boundary_point(self, angle: float) -> np.ndarray:
        """Point of the boundary of Omega_0 seen from the origin at ``angle``."""
        if self.dim == 1:
            return np.array([1.0 if np.cos(angle) >= 0 else -1.0])
        c = 1.0 / np.tan(self.lens_half_angle)
        s = abs(np.sin(angle))
        t = -c * s + np.sqrt(c * c * s * s + 1.0)
        return t * np.array([np.cos(angle), np.sin(angle)])


def lens_area(beta: float) -> float:
    """Closed-form area of the lens with tip half-angle ``beta`` and tips at +-e1."""
    return 2.0 * (beta / np.sin(beta) ** 2 - 1.0 / np.tan(beta))


def make_domain_shape(dim: int, lens_half_angle: float = np.pi / 4, quad_points: int = 16) -> DomainShape:
    """Reference body and its negation-symmetric tensor Gauss rule."""
    if quad_points < 16:
        raise ValueError(f"quad_points must be >= 16, got {quad_points}")
    x, wx = np.polynomial.legendre.leggauss(quad_points)
    if dim == 1:
        return DomainShape(1, "interval", None, x[:, None], wx, 2.0, exact_interval=True)
    if dim != 2:
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    beta = float(lens_half_angle)
    if not 0 < beta < np.pi / 2:
        raise ValueError(f"lens_half_angle must lie in (0, pi/2), got {beta}")
    c = 1.0 / np.tan(beta)
    radius = 1.0 / np.sin(beta)
    half_height = np.sqrt(radius**2 - x**2) - c
    X = np.repeat(x, quad_points)
    Y = (half_height[:, None] * x[None, :]).ravel()
    W = (wx[:, None] * wx[None, :] * half_height[:, None]).ravel()
    area = lens_area(beta)
    if abs(W.sum() - area) > 1e-8 * area:
        raise ValueError(
            f"{quad_points} quadrature points cannot resolve the lens at beta={beta}; increase quad_points"
        )
    return DomainShape(2, "lens", beta, np.column_stack([X, Y]), W, area)


def minimal_image(d: np.ndarray, period: float) -> np.ndarray:
    return d - period * np.round(d / period)


def _rotation(direction: np.ndarray) -> np.ndarray:
    c, s = direction
    return np.array([[c, -s], [s, c]])


class DensityAccumulator:
    """Frozen snapshot of rho supporting mass queries over Omega(x, y).

    In 1D the density is read as piecewise constant on node-centred cells and
    integrated through a prefix array.  In 2D it is sampled by periodic
    bilinear interpolation.
    """

    def __init__(self, rho: Field, floor: float = DEFAULT_RHO_FLOOR):
        if rho.components != 1:
            raise ValueError("density must be a scalar field")
        vals = rho.values[0]
        if vals.min() <= floor:
            raise VacuumError(f"density minimum {vals.min():.3e} is at or below the vacuum floor {floor:.1e}")
        self.grid = rho.grid
        self.floor = floor
        self.values = vals.copy()
        self.values.setflags(write=False)
        if self.grid.dim == 1:
            h = self.grid.spacing
            prefix = np.empty(self.grid.n_points + 1)
            prefix[0] = 0.0
            # F(x_i) - F(x_0) = h (rho_0/2 + rho_1 + ... + rho_{i-1} + rho_i/2)
            ext = np.append(vals, vals[0])
            prefix[1:] = np.cumsum(0.5 * h * (ext[:-1] + ext[1:]))
            self.prefix = prefix
            self.total = prefix[-1]

    def cumulative(self, x: float) -> float:
        """Periodically extended antiderivative F(x) of the cell-wise density (1D)."""
        g = self.grid
        h, n = g.spacing, g.n_points
        wraps = np.floor(x / g.period)
        xr = x - wraps * g.period
        cell = int(np.floor(xr / h + 0.5))
        cell = min(cell, n)
        return wraps * self.total + self.prefix[cell] + self.values[cell % n] * (xr - cell * h)

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Bilinear periodic interpolation at ``points`` of shape (m, 2)."""
        g = self.grid
        u = np.asarray(points, dtype=float) / g.spacing
        i0 = np.floor(u).astype(int)
        fr = u - i0
        n = g.n_points
        ia, ja = i0[:, 0] % n, i0[:, 1] % n
        ib, jb = (ia + 1) % n, (ja + 1) % n
        v = self.values
        fx, fy = fr[:, 0], fr[:, 1]
        return (
            (1 - fx) * (1 - fy) * v[ia, ja]
            + fx * (1 - fy) * v[ib, ja]
            + (1 - fx) * fy * v[ia, jb]
            + fx * fy * v[ib, jb]
        )


def _canonical_pair(x, y, period):
    """Order (x, y) so symmetric queries hit the identical floating-point path."""
    xm = tuple(np.mod(x, period))
    ym = tuple(np.mod(y, period))
    return (x, y) if xm <= ym else (y, x)


def omega_mass(acc: DensityAccumulator, shape: DomainShape, x, y) -> float:
    """Integral of rho over Omega(x, y) using the minimal periodic image of y - x."""
    g = acc.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x, y = _canonical_pair(x, y, g.period)
    diff = minimal_image(y - x, g.period)
    dist = float(np.linalg.norm(diff))
    if dist == 0.0:
        raise DegeneratePairError("Omega(x, y) is undefined for x = y")
    if g.dim == 1:
        a, b = sorted((x[0], x[0] + diff[0]))
        mass = acc.cumulative(b) - acc.cumulative(a)
    else:
        scale = 0.5 * dist
        pts = x + 0.5 * diff + scale * shape.nodes @ _rotation(diff / dist).T
        rho = acc.sample(pts)
        if rho.min() <= acc.floor:
            raise VacuumError("interpolated density fell below the vacuum floor")
        mass = scale**2 * float(np.dot(shape.weights, rho))
    return mass


def topo_distance(acc: DensityAccumulator, shape: DomainShape, x, y) -> float:
    mass = omega_mass(acc, shape, x, y)
    if mass <= 0:
        raise VacuumError(f"nonpositive mass {mass:.3e} in the communication domain")
    return mass ** (1.0 / shape.dim)


# --- grid-offset mass stencils used by the kernel cache ---------------------


def lens_offset_stencil(grid: Grid, shape: DomainShape, offset) -> tuple:
    """Integer shifts and weights with mass(x_i, x_i + z) = sum_w w * rho[i + shift].

    Obtained by pushing every lens quadrature node through the bilinear
    interpolation weights; it reproduces ``omega_mass`` up to summation order.
    """
    h = grid.spacing
    z = np.asarray(offset, dtype=float) * h
    dist = float(np.linalg.norm(z))
    scale = 0.5 * dist
    pts = (0.5 * z + scale * shape.nodes @ _rotation(z / dist).T) / h
    i0 = np.floor(pts).astype(int)
    fx, fy = (pts - i0).T
    w = shape.weights * scale**2
    acc = {}
    for dx, dy, bw in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)), (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        for (a, b), val in zip(zip(i0[:, 0] + dx, i0[:, 1] + dy), w * bw):
            acc[(a, b)] = acc.get((a, b), 0.0) + val
    shifts = np.array(sorted(acc), dtype=int)
    weights = np.array([acc[tuple(s)] for s in shifts])
    return shifts, weights


def offset_masses(rho_vals: np.ndarray, grid: Grid, shape: DomainShape, half_offsets: np.ndarray, stencils=None) -> np.ndarray:
    """Mass of Omega(x_i, x_i + z_j) for every node and every offset in the positive half.

    Returns an array of shape (J/2, *grid.shape).
    """
    n = grid.n_points
    if grid.dim == 1:
        h = grid.spacing
        ext = np.concatenate([rho_vals, rho_vals, rho_vals[:1]])
        cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (ext[:-1] + ext[1:]))])
        windows = np.lib.stride_tricks.sliding_window_view(cum, n)
        return windows[half_offsets[:, 0]] - cum[:n]
    out = np.empty((len(half_offsets),) + grid.shape)
    for row, (shifts, weights) in enumerate(stencils):
        acc = np.zeros(grid.shape)
        for (a, b), w in zip(shifts, weights):
            acc += w * np.roll(rho_vals, (-a, -b), axis=(0, 1))
        out[row] = acc
    return out
