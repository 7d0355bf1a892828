"""Topological communication kernel

    phi(x, y) = h(|x - y|) / (|x - y|^(n + alpha - tau) * d(x, y)^tau)

and the per-stage table of its values on the grid stencil.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .domain import (
    DEFAULT_RHO_FLOOR,
    DensityAccumulator,
    DomainShape,
    minimal_image,
    offset_masses,
    topo_distance,
)
from .errors import SingularPointError, StaleCacheError, VacuumError
from .grid import Field, Grid

BUMP_PROFILES = ("mollifier",)


@dataclass(frozen=True)
class KernelParams:
    alpha: float = 1.0
    tau: float = 1.0
    r0: float = np.pi / 4
    bump: str = "mollifier"

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (0,2), got {self.alpha}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0}")
        if self.bump not in BUMP_PROFILES:
            raise ValueError(f"unknown bump profile {self.bump!r}")

    def check_grid(self, grid: Grid):
        if self.r0 > grid.period / 4:
            raise ValueError(f"r0 = {self.r0} exceeds L/4 = {grid.period / 4}")


def bump_h(r, params: KernelParams):
    """Smooth radial cutoff exp(1 - 1/(1 - (r/r0)^2)) on r < r0, zero beyond."""
    r = np.asarray(r, dtype=float)
    q = (r / params.r0) ** 2
    inside = q < 1
    out = np.zeros_like(q)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - q[inside]))
    return out if out.ndim else float(out)


def phi(x, y, acc: DensityAccumulator, shape: DomainShape, params: KernelParams) -> float:
    g = acc.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.linalg.norm(minimal_image(y - x, g.period)))
    if r == 0.0:
        raise SingularPointError("phi is singular on the diagonal")
    if r >= params.r0:
        return 0.0
    n = g.dim
    d = topo_distance(acc, shape, x, y)
    return bump_h(r, params) / (r ** (n + params.alpha - params.tau) * d**params.tau)


def fingerprint(values: np.ndarray) -> str:
    return hashlib.blake2b(np.ascontiguousarray(values, dtype=float).tobytes(), digest_size=16).hexdigest()


@dataclass(frozen=True, eq=False)
class KernelCache:
    """phi(x_i, x_i + z_j) for every node i and stencil offset j.

    ``weighted`` holds w_j * phi with shape (J, N^n), rows in the stencil
    order; ``table`` is the unweighted view with shape (J, *grid.shape).
    """

    grid: Grid
    weighted: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    rho_fingerprint: str
    params: KernelParams
    memo: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def table(self) -> np.ndarray:
        return (self.weighted / self.weights[:, None]).reshape((len(self.weights),) + self.grid.shape)

    def check(self, rho):
        vals = rho.values if isinstance(rho, Field) else rho
        if fingerprint(vals) != self.rho_fingerprint:
            raise StaleCacheError("kernel cache was built from a different density")


def metric_profile(radii: np.ndarray, params: KernelParams, n: int) -> np.ndarray:
    """h(|z|) |z|^(tau - n - alpha); the density-free factor of phi on the stencil."""
    return bump_h(radii, params) * radii ** (params.tau - n - params.alpha)


def _inverse_power(x: np.ndarray, p: float) -> np.ndarray:
    return 1.0 / x if p == 1 else x ** (-p)


def build_kernel_cache(rho: Field, shape: DomainShape, params: KernelParams, stencil, floor: float = DEFAULT_RHO_FLOOR) -> KernelCache:
    """Tabulate phi over the stencil for the current density.

    Only the positive half of the offsets is evaluated; the negative half is
    filled by phi(x, x - z) = phi(x - z, x), so the table is exactly symmetric.
    """
    g = rho.grid
    vals = rho.values[0]
    if vals.min() <= floor:
        raise VacuumError(f"density minimum {vals.min():.3e} is at or below the vacuum floor {floor:.1e}")
    half = stencil.n_pairs
    n = g.dim
    masses = offset_masses(vals, g, shape, stencil.offsets[:half], stencil.mass_stencils)
    if masses.min() <= 0:
        raise VacuumError("nonpositive communication-domain mass")
    prof = (stencil.weights[:half] * stencil.profile(params)[:half])[:, None]
    masses = masses.reshape(half, -1)
    pos = prof * _inverse_power(masses, params.tau / n) if params.tau else np.broadcast_to(prof, masses.shape)
    # phi(x_i, x_i - z_j) = phi(x_i - z_j, x_i): read the positive row at x_i - z_j
    weighted = np.empty((2 * half, pos.shape[1]))
    weighted[:half] = pos
    if n == 1:
        size = g.n_points
        doubled = np.concatenate([pos, pos], axis=1)
        starts = size + stencil.offsets[half:, 0]
        weighted[half:] = _row_windows(doubled, size)[np.arange(half), starts]
    else:
        weighted[half:] = np.take_along_axis(pos, stencil.gather[half:], axis=1)
    frozen = vals.copy()
    frozen.setflags(write=False)
    return KernelCache(g, weighted, stencil.weights, frozen, fingerprint(vals), params)


def _row_windows(a: np.ndarray, width: int) -> np.ndarray:
    """Read-only view v[..., s, i] = a[..., s + i] (a cheaper sliding window)."""
    *lead, n = a.shape
    strides = a.strides
    return as_strided(a, (*lead, n - width + 1, width), (*strides[:-1], strides[-1], strides[-1]), writeable=False)
