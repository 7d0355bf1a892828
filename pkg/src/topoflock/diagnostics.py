"""Monitored quantities along a trajectory.

Norms follow the mean-normalised convention of :mod:`topoflock.grid`:
``||f||_{L2}^2`` is the spatial mean of |f|^2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import UnsupportedDimensionError, VacuumError
from .grid import Field, derivative_values, divergence_values, sobolev_seminorm_sq
from .operator import apply_L_phi_values, dirichlet_form

MACHINE_FLOOR = np.finfo(float).tiny


@dataclass(frozen=True, eq=False)
class SimState:
    rho: Field
    u: Field
    t: float = 0.0

    @property
    def grid(self):
        return self.rho.grid


def _rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(values**2)))


def e_field_values(rho: np.ndarray, u: np.ndarray, grid, cache, stencil) -> np.ndarray:
    return divergence_values(u, grid) + apply_L_phi_values(rho[None], cache, stencil)[0]


def e_field(state: SimState, cache, stencil) -> Field:
    """e = div u + L_phi rho for the current density."""
    cache.check(state.rho)
    g = state.grid
    return Field(g, e_field_values(state.rho.values[0], state.u.values, g, cache, stencil))


def _three_point_weights(times, at: float) -> np.ndarray:
    """Derivative weights at ``at`` of the quadratic through three samples."""
    t0, t1, t2 = times
    return np.array(
        [
            (2 * at - t1 - t2) / ((t0 - t1) * (t0 - t2)),
            (2 * at - t0 - t2) / ((t1 - t0) * (t1 - t2)),
            (2 * at - t0 - t1) / ((t2 - t0) * (t2 - t1)),
        ]
    )


def transport_residual_values(times, e_list, u: np.ndarray, e: np.ndarray, at: float, grid) -> float:
    w = _three_point_weights(times, at)
    e_t = w[0] * e_list[0] + w[1] * e_list[1] + w[2] * e_list[2]
    flux = derivative_values(u[0] * e, grid, 0, 1)
    return _rms(e_t + flux) / (_rms(e) + MACHINE_FLOOR)


def e_transport_residual(states, e_fields, dt) -> float:
    """Normalised residual of e_t + (u e)_x = 0 at the middle of three states.

    ``dt`` is the uniform spacing; a pair ``(dt_prev, dt_next)`` is accepted
    for slightly nonuniform steps and uses the second-order three-point
    derivative.
    """
    if len(states) != 3 or len(e_fields) != 3:
        raise ValueError("need exactly three consecutive states and e fields")
    mid = states[1]
    g = mid.grid
    if g.dim != 1:
        raise UnsupportedDimensionError("the e transport law is only checked in one dimension")
    dt_prev, dt_next = (dt, dt) if np.isscalar(dt) else dt
    times = (-dt_prev, 0.0, dt_next)
    es = [f.values[0] for f in e_fields]
    return transport_residual_values(times, es, mid.u.values, es[1], 0.0, g)


def grand_quantity(state: SimState, e: Field, m: int) -> float:
    """Y_m = ||u||^2_{H^(m+1)} + ||e||^2_{H^m} + ||rho||^2_{H^m} + max rho + 1/min rho."""
    if m < 0:
        raise ValueError("m must be >= 0")
    rho = state.rho.values
    lo = rho.min()
    if lo <= 0:
        raise VacuumError("grand quantity needs a strictly positive density")
    g = state.grid
    return (
        sobolev_seminorm_sq(state.u.values, g, m + 1)
        + sobolev_seminorm_sq(e.values, g, m)
        + sobolev_seminorm_sq(rho, g, m)
        + float(rho.max())
        + 1.0 / float(lo)
    )


def alignment_metrics(state: SimState) -> tuple:
    """Mean velocity ubar = int rho u / int rho, sup |u - ubar| and per-component max - min."""
    rho = state.rho.values[0]
    u = state.u.values
    axes = tuple(range(1, u.ndim))
    ubar = (u * rho).sum(axis=axes) / rho.sum()
    dev = u - ubar.reshape((-1,) + (1,) * (u.ndim - 1))
    sup = float(np.sqrt((dev**2).sum(axis=0)).max())
    amp = u.max(axis=axes) - u.min(axis=axes)
    return ubar, sup, amp


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    momentum: tuple
    rho_min: float
    rho_max: float
    amplitude: tuple
    u_max: tuple
    u_min: tuple
    alignment_sup: float
    e_l2: float
    e_transport_residual: float
    grand: tuple  # Y_m values in the order of the configured m list
    dirichlet_u: float
    connectivity: float  # min rho * (1 + t)

    @staticmethod
    def header(dim: int, m_list) -> list:
        cols = ["t", "mass"]
        cols += [f"momentum_{i}" for i in range(dim)]
        cols += ["rho_min", "rho_max"]
        cols += [f"amplitude_{i}" for i in range(dim)]
        cols += [f"u_max_{i}" for i in range(dim)]
        cols += [f"u_min_{i}" for i in range(dim)]
        cols += ["alignment_sup", "e_l2", "e_transport_residual"]
        cols += [f"Y_{m}" for m in m_list]
        cols += ["dirichlet_u", "connectivity"]
        return cols

    def values(self) -> list:
        return [
            self.t,
            self.mass,
            *self.momentum,
            self.rho_min,
            self.rho_max,
            *self.amplitude,
            *self.u_max,
            *self.u_min,
            self.alignment_sup,
            self.e_l2,
            self.e_transport_residual,
            *self.grand,
            self.dirichlet_u,
            self.connectivity,
        ]

    def with_residual(self, value: float) -> "DiagnosticsRecord":
        return replace(self, e_transport_residual=float(value))


def make_record(state: SimState, cache, stencil, m_list, e: Field | None = None, residual: float = float("nan")) -> DiagnosticsRecord:
    g = state.grid
    if e is None:
        e = e_field(state, cache, stencil)
    rho = state.rho.values[0]
    vol = g.cell_volume
    mass = float(rho.sum() * vol)
    axes = tuple(range(1, g.dim + 1))
    momentum = tuple(float(v) for v in (state.u.values * rho).sum(axis=axes) * vol)
    _, sup, amp = alignment_metrics(state)
    return DiagnosticsRecord(
        t=float(state.t),
        mass=mass,
        momentum=momentum,
        rho_min=float(rho.min()),
        rho_max=float(rho.max()),
        amplitude=tuple(float(a) for a in amp),
        u_max=tuple(float(v) for v in state.u.values.max(axis=axes)),
        u_min=tuple(float(v) for v in state.u.values.min(axis=axes)),
        alignment_sup=sup,
        e_l2=_rms(e.values),
        e_transport_residual=float(residual),
        grand=tuple(grand_quantity(state, e, m) for m in m_list),
        dirichlet_u=dirichlet_form(state.u, cache, stencil),
        connectivity=float(rho.min() * (1 + state.t)),
    )


def format_row(values) -> str:
    return ",".join(format(float(v), ".17g") for v in values)
