"""Discrete alignment operator L_phi and the alignment force C_phi(u, rho).

Quadrature nodes in z are the grid translates 0 < |z| <= r0.  Offsets come in
+-z pairs and each pair is summed before it is accumulated, which turns the
uniform-density part of the integrand into a second difference and keeps the
|z|^(-n-alpha) singularity under control.  The zero cell is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import DomainShape, lens_offset_stencil
from .grid import Field, Grid
from .kernel import KernelCache, KernelParams, _row_windows, metric_profile


@dataclass(frozen=True, eq=False)
class StencilRule:
    grid: Grid
    offsets: np.ndarray = field(repr=False)  # (J, n) integer, first half positive, second half negated
    weights: np.ndarray = field(repr=False)
    radii: np.ndarray = field(repr=False)
    gather: np.ndarray = field(repr=False)  # (J, N^n) flat node indices of x_i + z_j
    mass_stencils: list | None = field(default=None, repr=False)
    _profiles: dict = field(default_factory=dict, repr=False)

    @property
    def n_pairs(self) -> int:
        return len(self.offsets) // 2

    @property
    def vectors(self) -> np.ndarray:
        return self.offsets * self.grid.spacing

    def profile(self, params: KernelParams) -> np.ndarray:
        cached = self._profiles.get(params)
        if cached is None:
            cached = self._profiles[params] = metric_profile(self.radii, params, self.grid.dim)
        return cached


def make_stencil(grid: Grid, r0: float, shape: DomainShape | None = None) -> StencilRule:
    """Grid offsets inside the closed r0-ball, ordered as (positive half, negated half)."""
    h = grid.spacing
    m = int(np.floor(r0 / h))
    if grid.dim == 1:
        pos = np.arange(1, m + 1)[:, None]
    else:
        a, b = np.meshgrid(np.arange(-m, m + 1), np.arange(-m, m + 1), indexing="ij")
        a, b = a.ravel(), b.ravel()
        keep = ((a > 0) | ((a == 0) & (b > 0))) & (h * np.hypot(a, b) <= r0 * (1 + 1e-14))
        pos = np.column_stack([a[keep], b[keep]])
    if len(pos) == 0:
        raise ValueError(f"r0 = {r0} does not reach the nearest grid neighbour (h = {h})")
    offsets = np.concatenate([pos, -pos]).astype(int)
    radii = h * np.linalg.norm(offsets, axis=1)
    weights = np.full(len(offsets), grid.cell_volume)
    n = grid.n_points
    idx = np.indices(grid.shape)
    gather = np.empty((len(offsets), grid.size), dtype=np.intp)
    for j, off in enumerate(offsets):
        shifted = tuple((idx[ax] + off[ax]) % n for ax in range(grid.dim))
        gather[j] = np.ravel_multi_index(shifted, grid.shape).ravel()
    stencils = None
    if grid.dim == 2:
        if shape is None:
            raise ValueError("a 2D stencil needs the domain shape for its mass stencils")
        stencils = [lens_offset_stencil(grid, shape, off) for off in pos]
    return StencilRule(grid, offsets, weights, radii, gather, stencils)


def _flat(values: np.ndarray) -> np.ndarray:
    return values.reshape(values.shape[0], -1)


def neighbours(flat: np.ndarray, stencil: StencilRule) -> np.ndarray:
    """Values at x_i + z_j for (..., N^n) input, shape (..., J, N^n)."""
    if stencil.grid.dim != 1:
        return flat[..., stencil.gather]
    # contiguous row copies from a padded window view beat a general gather
    m = stencil.n_pairs
    n = flat.shape[-1]
    ext = np.concatenate([flat[..., n - m :], flat, flat[..., :m]], axis=-1)
    rows = m + stencil.offsets[:, 0]
    return _row_windows(ext, n)[..., rows, :]


def _flux_weights(cache: KernelCache, stencil: StencilRule) -> np.ndarray:
    """w_j phi(x_i, x_i + z_j) rho(x_i + z_j), memoised on the cache."""
    out = cache.memo.get("flux")
    if out is None:
        out = cache.memo["flux"] = cache.weighted * neighbours(cache.rho.reshape(-1), stencil)
    return out


def _pair_sum(terms: np.ndarray, half: int) -> np.ndarray:
    """Sum +z and -z contributions first, then accumulate over pairs."""
    return (terms[..., :half, :] + terms[..., half:, :]).sum(axis=-2)


def apply_L_phi_values(values: np.ndarray, cache: KernelCache, stencil: StencilRule) -> np.ndarray:
    f = _flat(values)
    wphi = cache.weighted
    diff = neighbours(f, stencil) - f[:, None, :]
    out = _pair_sum(wphi[None] * diff, stencil.n_pairs)
    return out.reshape(values.shape)


def apply_L_phi(f: Field, cache: KernelCache, stencil: StencilRule, rho: Field | None = None) -> Field:
    """(L_phi f)(x_i) = sum_j w_j phi(x_i, x_i + z_j) (f(x_i + z_j) - f(x_i)).

    Pass ``rho`` to verify that the cache matches the active density.
    """
    if rho is not None:
        cache.check(rho)
    return Field(f.grid, apply_L_phi_values(f.values, cache, stencil))


def apply_C_phi_values(u: np.ndarray, rho: np.ndarray, cache: KernelCache, stencil: StencilRule) -> np.ndarray:
    uf = _flat(u)
    if rho is cache.rho or np.array_equal(rho, cache.rho):
        wphi = _flux_weights(cache, stencil)
    else:
        wphi = cache.weighted * neighbours(rho.reshape(-1), stencil)
    diff = neighbours(uf, stencil) - uf[:, None, :]
    return _pair_sum(wphi[None] * diff, stencil.n_pairs).reshape(u.shape)


def apply_C_phi(u: Field, rho: Field, cache: KernelCache, stencil: StencilRule) -> Field:
    """Alignment force sum_j w_j phi(x, x + z_j) (u(x + z_j) - u(x)) rho(x + z_j)."""
    cache.check(rho)
    return Field(u.grid, apply_C_phi_values(u.values, rho.values[0], cache, stencil))


def apply_C_phi_identity(u: Field, rho: Field, cache: KernelCache, stencil: StencilRule) -> Field:
    """The same force through L_phi(u rho) - u L_phi(rho), for cross-checks."""
    cache.check(rho)
    l_urho = apply_L_phi_values(u.values * rho.values, cache, stencil)
    l_rho = apply_L_phi_values(rho.values, cache, stencil)
    return Field(u.grid, l_urho - u.values * l_rho)


def dirichlet_form(f: Field, cache: KernelCache, stencil: StencilRule) -> float:
    """(1/2) sum_{i,j} w_j phi_ij |f(x_i + z_j) - f(x_i)|^2 h^n, summed over components."""
    fv = _flat(f.values)
    wphi = cache.weighted
    diff = neighbours(fv, stencil) - fv[:, None, :]
    return 0.5 * float(np.sum(wphi[None] * diff**2)) * f.grid.cell_volume


def inner_product(f: Field, g: Field) -> float:
    return float(np.sum(f.values * g.values)) * f.grid.cell_volume


def row_sums(rho: np.ndarray, cache: KernelCache, stencil: StencilRule) -> np.ndarray:
    """sum_j w_j phi(x_i, x_i + z_j) rho(x_i + z_j) at every node."""
    if rho is cache.rho or np.array_equal(rho, cache.rho):
        wphi = _flux_weights(cache, stencil)
    else:
        wphi = cache.weighted * neighbours(rho.reshape(-1), stencil)
    return wphi.sum(axis=0).reshape(cache.grid.shape)
