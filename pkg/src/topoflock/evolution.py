"""Time integration of the (optionally viscous) topological Euler-alignment system

    rho_t + div(rho u) = eps Lap rho
    u_t + u . grad u   = C_phi(u, rho) + eps Lap u

Transport and alignment are advanced with the three-stage SSP Runge-Kutta
scheme in Shu-Osher form; eps Lap enters exactly as an integrating factor.
The kernel cache is rebuilt from every stage density.
"""

from __future__ import annotations

import ctypes
import logging
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .config import SimConfig, initial_fields
from .diagnostics import (
    SimState,
    e_field_values,
    make_record,
    transport_residual_values,
)
from .domain import make_domain_shape
from .errors import BlowUpError, VacuumError
from .grid import Field, derivative_values, fft, ifft, write_snapshot
from .kernel import build_kernel_cache
from .operator import apply_C_phi_values, make_stencil, row_sums

log = logging.getLogger(__name__)

__all__ = ["SimState", "Solver", "rhs", "cfl_dt", "step", "run", "RunResult"]


_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3


@lru_cache(maxsize=1)
def _keep_temporaries_on_heap() -> bool:
    """Stop glibc from returning each large stage temporary to the OS.

    The per-stage stencil arrays sit just above the default mmap threshold,
    so every allocation would otherwise page-fault afresh.  No-op elsewhere.
    """
    if not sys.platform.startswith("linux"):
        return False
    try:
        libc = ctypes.CDLL("libc.so.6")
        ok = libc.mallopt(_M_MMAP_THRESHOLD, 32 * 2**20) and libc.mallopt(_M_TRIM_THRESHOLD, 256 * 2**20)
    except (OSError, AttributeError):
        return False
    return bool(ok)


class Solver:
    """Geometry, stencil and spectral multipliers shared by every step of a run."""

    def __init__(self, config: SimConfig):
        _keep_temporaries_on_heap()
        self.config = config
        self.grid = config.grid
        self.params = config.kernel
        self.params.check_grid(self.grid)
        self.shape = make_domain_shape(self.grid.dim, config.domain.lens_half_angle, config.domain.quad_points)
        self.stencil = make_stencil(self.grid, self.params.r0, self.shape)
        self.epsilon = config.evolution.epsilon
        self.floor = config.evolution.rho_floor
        g = self.grid
        self._ik = [1j * k for k in g.wavenumbers]
        self._ik_odd = [np.where(m == -g.n_points // 2, 0.0, ik) for m, ik in zip(g.mode_index, self._ik)]
        self._mask = g.dealias_mask
        self._k2 = g.k_abs**2
        self._heat = {}

    # -- building blocks ---------------------------------------------------

    def cache(self, rho: np.ndarray):
        return build_kernel_cache(Field(self.grid, rho[None]), self.shape, self.params, self.stencil, self.floor)

    def tendencies(self, rho: np.ndarray, u: np.ndarray, cache) -> tuple:
        g = self.grid
        n = g.dim
        flux_hat = fft(rho[None] * u, g) * self._mask
        drho = -ifft(sum(self._ik_odd[a] * flux_hat[a] for a in range(n)), g)
        u_hat = fft(u, g)
        adv = np.zeros_like(u)
        for a in range(n):
            adv += u[a] * ifft(self._ik_odd[a] * u_hat, g)
        adv = ifft(fft(adv, g) * self._mask, g)
        du = -adv + apply_C_phi_values(u, rho, cache, self.stencil)
        return drho, du

    def heat(self, values: np.ndarray, t: float) -> np.ndarray:
        if self.epsilon == 0 or t == 0:
            return values
        mult = self._heat.get(t)
        if mult is None:
            mult = np.exp(-self.epsilon * self._k2 * t)
            if len(self._heat) > 16:
                self._heat.clear()
            self._heat[t] = mult
        return ifft(fft(values, self.grid) * mult, self.grid)

    def max_rate(self, rho: np.ndarray, cache) -> float:
        return float(row_sums(rho, cache, self.stencil).max())

    def stable_dt(self, rho: np.ndarray, u: np.ndarray, cache) -> float:
        h = self.grid.spacing
        umax = float(np.sqrt((u**2).sum(axis=0)).max())
        adv = h / (umax + 1e-12)
        diss = h**self.params.alpha / self.max_rate(rho, cache)
        return self.config.evolution.cfl * min(adv, diss)

    # -- one step ----------------------------------------------------------

    def _stack(self, rho, u):
        return np.concatenate([rho[None], u])

    def _check(self, y: np.ndarray, t: float):
        if not np.all(np.isfinite(y)):
            name = "rho" if not np.all(np.isfinite(y[0])) else "u"
            raise BlowUpError(f"non-finite values in {name} at t = {t:.6g}", t=t, field=name)
        lo = float(y[0].min())
        if lo <= self.floor:
            raise VacuumError(f"density minimum {lo:.3e} reached the vacuum floor at t = {t:.6g}")

    def _F(self, y: np.ndarray, cache=None) -> np.ndarray:
        rho, u = y[0], y[1:]
        if cache is None:
            cache = self.cache(rho)
        drho, du = self.tendencies(rho, u, cache)
        return self._stack(drho, du)

    def advance(self, rho: np.ndarray, u: np.ndarray, t: float, dt: float, cache0=None) -> tuple:
        """Integrating-factor SSP-RK3 step; returns the new (rho, u) arrays."""
        E = self.heat
        y0 = self._stack(rho, u)
        try:
            y1 = E(y0 + dt * self._F(y0, cache0), dt)
            self._check(y1, t + dt)
            y2 = 0.75 * E(y0, 0.5 * dt) + 0.25 * E(y1 + dt * self._F(y1), -0.5 * dt)
            self._check(y2, t + 0.5 * dt)
            y3 = E(y0, dt) / 3.0 + (2.0 / 3.0) * E(y2 + dt * self._F(y2), 0.5 * dt)
            self._check(y3, t + dt)
        except FloatingPointError as exc:
            raise BlowUpError(f"floating point failure at t = {t:.6g}: {exc}", t=t) from None
        return y3[0], y3[1:]


@lru_cache(maxsize=8)
def _solver(config: SimConfig) -> Solver:
    return Solver(config)


def rhs(state: SimState, cache, stencil) -> tuple:
    """Inviscid tendencies (d rho/dt, du/dt); the eps Lap terms are left to ``step``."""
    g = state.grid
    rho = state.rho.values[0]
    if rho.min() <= 0:
        raise VacuumError("density has a vacuum")
    cache.check(state.rho)
    u = state.u.values
    ik = [np.where(m == -g.n_points // 2, 0.0, 1j * k) for m, k in zip(g.mode_index, g.wavenumbers)]
    flux_hat = fft(rho[None] * u, g) * g.dealias_mask
    drho = -ifft(sum(ik[a] * flux_hat[a] for a in range(g.dim)), g)
    adv = sum(u[a] * derivative_values(u, g, a, 1) for a in range(g.dim))
    adv = ifft(fft(adv, g) * g.dealias_mask, g)
    du = -adv + apply_C_phi_values(u, rho, cache, stencil)
    return Field(g, drho[None]), Field(g, du)


def cfl_dt(state: SimState, config: SimConfig, cache) -> float:
    """cfl * min(h / max|u|, h^alpha / Lambda) with Lambda the largest alignment row sum."""
    solver = _solver(config)
    return solver.stable_dt(state.rho.values[0], state.u.values, cache)


def step(state: SimState, dt: float, config: SimConfig) -> SimState:
    solver = _solver(config)
    rho, u = solver.advance(state.rho.values[0], state.u.values, state.t, dt)
    g = state.grid
    return SimState(Field(g, rho[None]), Field(g, u), state.t + dt)


# -- driver ------------------------------------------------------------------


@dataclass
class RunResult:
    final: SimState
    records: list = field(default_factory=list)
    status: str = "completed"  # completed | max_steps | blowup | vacuum
    message: str = ""
    steps: int = 0
    snapshots: list = field(default_factory=list)


class _ResidualTracker:
    """Holds rows until the neighbouring e fields needed for e_t are available."""

    def __init__(self, grid, enabled: bool):
        self.grid = grid
        self.enabled = enabled
        self.history = []  # (step, t, u, e)
        self.pending = []  # (step, record)

    def push(self, k, t, u, e):
        if self.enabled:
            self.history.append((k, t, u, e))
            if len(self.history) > 3:
                self.history.pop(0)

    def residual_at(self, k, allow_backward=False):
        h = self.history
        if len(h) < 3:
            return None
        steps = [item[0] for item in h]
        if k == steps[1] or (k == steps[0] and steps[0] == 0) or (allow_backward and k == steps[2]):
            times = [item[1] for item in h]
            at = times[steps.index(k)]
            _, _, u, e = h[steps.index(k)]
            return transport_residual_values(times, [item[3] for item in h], u, e, at, self.grid)
        return None

    def ready(self, final=False):
        out, keep = [], []
        for k, rec in self.pending:
            val = self.residual_at(k, allow_backward=final) if self.enabled else None
            if val is not None:
                out.append(rec.with_residual(val))
            elif final or not self.enabled or (self.history and k < self.history[0][0]):
                out.append(rec)
            else:
                keep.append((k, rec))
        self.pending = keep
        return out


def run(config: SimConfig, initial: SimState | None = None, sink=None, snapshot_dir=None) -> RunResult:
    """Advance ``initial`` (default: the configured initial data) to ``t_final``.

    ``sink(record)`` receives every diagnostics row as soon as it is final.
    Breakdown (vacuum or non-finite values) stops the run; the last valid
    state is returned and, with ``snapshot_dir``, written to disk.
    """
    solver = _solver(config)
    g = solver.grid
    evo, out = config.evolution, config.output
    if initial is None:
        rho0, u0 = initial_fields(config)
        initial = SimState(rho0, u0, 0.0)
    rho, u, t = initial.rho.values[0].copy(), initial.u.values.copy(), float(initial.t)
    if rho.min() <= evo.rho_floor:
        raise VacuumError(f"initial density minimum {rho.min():.3e} is at or below the vacuum floor")

    records = []
    snapshots = []
    tracker = _ResidualTracker(g, enabled=g.dim == 1)

    def emit(rec):
        records.append(rec)
        if sink is not None:
            sink(rec)

    def snapshot(tag, rho_v, u_v):
        if snapshot_dir is None:
            return
        d = Path(snapshot_dir)
        snapshots.append(write_snapshot(Field(g, rho_v[None]), d / f"rho_{tag}.field"))
        snapshots.append(write_snapshot(Field(g, u_v), d / f"u_{tag}.field"))

    def state_of(rho_v, u_v, t_v):
        return SimState(Field(g, rho_v[None]), Field(g, u_v), t_v)

    cache = solver.cache(rho)
    e = e_field_values(rho, u, g, cache, solver.stencil)
    tracker.push(0, t, u, e)
    rows = 0
    tracker.pending.append((0, make_record(state_of(rho, u, t), cache, solver.stencil, out.m_list, Field(g, e[None]))))
    rows += 1
    k = 0
    status, message = "completed", ""
    t_end = evo.t_final
    while t < t_end and k < evo.max_steps:
        dt = evo.dt if evo.dt > 0 else solver.stable_dt(rho, u, cache)
        last = t + dt >= t_end * (1 - 1e-14)
        if last:
            dt = t_end - t
        try:
            rho_new, u_new = solver.advance(rho, u, t, dt, cache)
            t_new = t_end if last else t + dt
            cache_new = solver.cache(rho_new)
        except (BlowUpError, VacuumError) as exc:
            status = "vacuum" if isinstance(exc, VacuumError) else "blowup"
            message = str(exc)
            log.warning("run stopped: %s", message)
            break
        rho, u, t, cache = rho_new, u_new, t_new, cache_new
        k += 1
        e = e_field_values(rho, u, g, cache, solver.stencil)
        tracker.push(k, t, u, e)
        for rec in tracker.ready():
            emit(rec)
        if k % out.output_every == 0 or last:
            state = state_of(rho, u, t)
            tracker.pending.append((k, make_record(state, cache, solver.stencil, out.m_list, Field(g, e[None]))))
            rows += 1
            if out.snapshot_every and rows % out.snapshot_every == 0:
                snapshot(f"{k:08d}", rho, u)
    if status == "completed" and t < t_end:
        status, message = "max_steps", f"stopped after max_steps = {evo.max_steps} at t = {t:.6g}"
    for rec in tracker.ready(final=True):
        emit(rec)
    snapshot("final", rho, u)
    return RunResult(state_of(rho, u, t), records, status, message, k, snapshots)
