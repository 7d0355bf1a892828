"""Intrinsic Sobolev-type quantities built from boundary directions of Omega_0.

For theta on the boundary of Omega_0 and z = r w (|w| = 1), the displaced
point is x + r U_z theta, where U_z rotates e1 onto w.  Two quantities are
evaluated in two independent ways:

* the direction-averaged seminorm
      D_s(g) = mean_x int h(|z|) |g(x + |z| U_z theta) - g(x)|^2 / |z|^(n+s) dz,
* the second-difference field
      T_ijk g(x) = int [g(x + |z| U_z theta) + g(x - |z| U_z theta) - 2 g(x)]
                   h(|z|) z_i U_z^jk / |z|^(n+alpha+1) dz.

The quadrature path uses Gauss-Jacobi nodes in r (the weight r^(1-s)
absorbs the singularity), the trapezoid rule in the angle of w, and exact
trigonometric interpolation for the displaced values.  The oracle path
integrates the closed-form single-mode symbol (Bessel functions in 2D)
adaptively.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from ..domain import DomainShape, make_domain_shape
from ..grid import Field, Grid, fft, ifft, sobolev_seminorm_sq
from ..kernel import KernelParams, bump_h
from .families import random_trig_polynomials, single_mode
from .report import FAIL, PASS, CheckReport

RADIAL_POINTS = 64
ANGLE_POINTS = 64
DUAL_PATH_TOL = 1e-6

# (c0, c2, s2) with z_i U_z^jk = c0 + c2 cos(2 psi) + s2 sin(2 psi), z = r (cos psi, sin psi)
SECOND_DIFF_COEFFS = {
    (0, 0, 0): (0.5, 0.5, 0.0),
    (0, 0, 1): (0.0, 0.0, -0.5),
    (0, 1, 0): (0.0, 0.0, 0.5),
    (0, 1, 1): (0.5, 0.5, 0.0),
    (1, 0, 0): (0.0, 0.0, 0.5),
    (1, 0, 1): (-0.5, 0.5, 0.0),
    (1, 1, 0): (0.5, -0.5, 0.0),
    (1, 1, 1): (0.0, 0.0, 0.5),
}


def theta_directions(shape: DomainShape, samples: int) -> np.ndarray:
    """theta = +-1 in 1D; ``samples`` equally spaced boundary points of the lens in 2D."""
    if shape.dim == 1:
        return np.array([[1.0], [-1.0]])
    if samples < 1:
        raise ValueError("need at least one theta sample")
    angles = 2 * np.pi * np.arange(samples) / samples
    return np.array([shape.boundary_point(a) for a in angles])


@dataclass(frozen=True, eq=False)
class DisplacementRule:
    """Nodes v = r U_z theta for one theta, with weights h(r) r^(-1-s) dr dpsi / r^(1-s)."""

    vectors: np.ndarray = field(repr=False)  # (V, n)
    weights: np.ndarray = field(repr=False)  # (V,)
    psi: np.ndarray = field(repr=False)  # (V,) angle of z (2D) or sign of z (1D)


def _radial_rule(params: KernelParams, s: float, points: int) -> tuple:
    x, w = special.roots_jacobi(points, 0.0, 1.0 - s)
    r = 0.5 * params.r0 * (1.0 + x)
    weight = w * (0.5 * params.r0) ** (2.0 - s) * bump_h(r, params) / r**2
    return r, weight


def displacement_rule(theta: np.ndarray, params: KernelParams, s: float, radial_points: int = RADIAL_POINTS, angle_points: int = ANGLE_POINTS) -> DisplacementRule:
    r, wr = _radial_rule(params, s, radial_points)
    theta = np.asarray(theta, dtype=float)
    if theta.size == 1:
        sign = np.array([1.0, -1.0])
        vec = (sign[:, None] * r[None, :] * theta[0]).reshape(-1, 1)
        return DisplacementRule(vec, np.tile(wr, 2), np.repeat(sign, len(r)))
    psi = 2 * np.pi * np.arange(angle_points) / angle_points
    c, s_ = np.cos(psi), np.sin(psi)
    rot = np.stack([c * theta[0] - s_ * theta[1], s_ * theta[0] + c * theta[1]], axis=-1)  # (P, 2)
    vec = (r[:, None, None] * rot[None, :, :]).reshape(-1, 2)
    weights = (wr[:, None] * np.full(angle_points, 2 * np.pi / angle_points)[None, :]).ravel()
    return DisplacementRule(vec, weights, np.tile(psi, len(r)))


def _active_modes(modes: np.ndarray, grid: Grid) -> tuple:
    """Wavevectors (K, n) carrying energy in any family member, and their flat indices."""
    energy = np.abs(modes.reshape(modes.shape[0], -1)) ** 2
    scale = energy.max() if energy.size else 0.0
    idx = np.flatnonzero(energy.max(axis=0) > 1e-28 * max(scale, 1e-300))
    kv = np.stack([k.ravel()[idx] for k in grid.wavenumbers], axis=1)
    return kv, idx


def _cos_matrix(kvecs: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    return np.cos(kvecs @ vectors.T)


def _family_values(g, grid: Grid) -> np.ndarray:
    if isinstance(g, Field):
        return g.values[0][None]
    arr = np.asarray(g, dtype=float)
    return arr[None] if arr.shape == grid.shape else arr


# -- D_s -----------------------------------------------------------------------


def ds_seminorm(g, s: float, shape: DomainShape, theta_samples: int = 16, params: KernelParams | None = None, grid: Grid | None = None, radial_points: int = RADIAL_POINTS, angle_points: int = ANGLE_POINTS):
    """D_s(g) averaged over the theta directions; a float for one field, an array for a batch."""
    if not 0 < s < 2:
        raise ValueError(f"s must lie in (0,2), got {s}")
    grid = g.grid if isinstance(g, Field) else grid
    if grid is None:
        raise ValueError("pass a Field or the grid of the value array")
    params = params or KernelParams(r0=grid.period / 8)
    values = _family_values(g, grid)
    modes = fft(values, grid)
    kvecs, idx = _active_modes(modes, grid)
    energy = np.abs(modes.reshape(len(values), -1)[:, idx]) ** 2
    thetas = theta_directions(shape, theta_samples)
    mult = np.zeros(len(kvecs))
    for theta in thetas:
        rule = displacement_rule(theta, params, s, radial_points, angle_points)
        mult += (2.0 - 2.0 * _cos_matrix(kvecs, rule.vectors)) @ rule.weights
    mult /= len(thetas)
    out = energy @ mult
    return float(out[0]) if isinstance(g, Field) or np.ndim(g) == grid.dim else out


def _j0_minus_one(a):
    a = np.asarray(a, dtype=float)
    small = a < 1e-3
    series = -(a**2) / 4 + a**4 / 64
    return np.where(small, series, special.j0(a) - 1.0)


def _quad_alg(func, r0: float, power: float) -> float:
    """int_0^r0 func(r) r^power dr with the algebraic endpoint weight handled exactly."""
    val, _ = integrate.quad(func, 0.0, r0, weight="alg", wvar=(power, 0.0), epsabs=0.0, epsrel=1e-11, limit=400)
    return val


def ds_fourier_multiplier(kvec, s: float, theta: np.ndarray, params: KernelParams) -> float:
    """int h(|z|) |e^{i k.|z| U_z theta} - 1|^2 / |z|^(n+s) dz for one theta, by adaptive quadrature."""
    kvec = np.atleast_1d(np.asarray(kvec, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    kt = float(np.linalg.norm(kvec) * np.linalg.norm(theta))
    if kt == 0:
        return 0.0
    if len(kvec) == 1:
        # both signs of z: 2 int h (2 - 2 cos(k r theta)) r^(-1-s) dr
        def f(r):
            return 2.0 * bump_h(r, params) * (2.0 * np.sin(0.5 * kt * r) / r) ** 2 if r > 0 else 2.0 * kt**2
    else:
        def f(r):
            return 2 * np.pi * bump_h(r, params) * (-2.0 * _j0_minus_one(kt * r)) / r**2 if r > 0 else np.pi * kt**2
    return _quad_alg(f, params.r0, 1.0 - s)


def ds_symbol(kvec, s: float, thetas: np.ndarray, params: KernelParams) -> float:
    return float(np.mean([ds_fourier_multiplier(kvec, s, th, params) for th in thetas]))


def _distinct_norms(grid: Grid, kmax: float) -> np.ndarray:
    k = grid.k_abs.ravel()
    return np.unique(np.round(k[(k > 0) & (k <= kmax)], 12))


def ds_constant(grid: Grid, s: float, thetas: np.ndarray, params: KernelParams) -> tuple:
    """C_s = max over the tabulated |k| (<= N/2) of the oracle symbol / |k|^s, and its argmax."""
    best, arg = 0.0, 0.0
    for kn in _distinct_norms(grid, grid.n_points // 2):
        kv = np.zeros(grid.dim)
        kv[0] = kn
        val = ds_symbol(kv, s, thetas, params) / kn**s
        if val > best:
            best, arg = val, kn
    return best, arg


# -- second differences ----------------------------------------------------------


def _index_choices(dim: int) -> list:
    return [(0, 0, 0)] if dim == 1 else sorted(SECOND_DIFF_COEFFS)


def _angular_weight(index, psi: np.ndarray, dim: int) -> np.ndarray:
    if dim == 1:
        return np.ones_like(psi)
    c0, c2, s2 = SECOND_DIFF_COEFFS[tuple(index)]
    return c0 + c2 * np.cos(2 * psi) + s2 * np.sin(2 * psi)


def second_difference_multipliers(kvecs: np.ndarray, theta: np.ndarray, alpha: float, params: KernelParams, indices, radial_points: int = RADIAL_POINTS, angle_points: int = ANGLE_POINTS) -> np.ndarray:
    """Quadrature symbols T_ijk(k) for one theta; shape (len(indices), K)."""
    rule = displacement_rule(theta, params, alpha, radial_points, angle_points)
    bracket = 2.0 * _cos_matrix(kvecs, rule.vectors) - 2.0
    dim = kvecs.shape[1]
    ang = np.stack([_angular_weight(ix, rule.psi, dim) for ix in indices], axis=1)
    return (bracket @ (rule.weights[:, None] * ang)).T


def second_difference_field(g, alpha: float, shape: DomainShape, theta: np.ndarray, index=(0, 0, 0), params: KernelParams | None = None, grid: Grid | None = None) -> np.ndarray:
    """T_ijk g on the grid: the displaced values are summed through exact interpolation."""
    grid = g.grid if isinstance(g, Field) else grid
    params = params or KernelParams(r0=grid.period / 8)
    values = _family_values(g, grid)
    modes = fft(values, grid)
    kvecs, idx = _active_modes(modes, grid)
    mult = second_difference_multipliers(kvecs, theta, alpha, params, [index])[0]
    flat = np.zeros(modes.reshape(len(values), -1).shape, dtype=complex)
    flat[:, idx] = modes.reshape(len(values), -1)[:, idx] * mult
    return ifft(flat.reshape(modes.shape), grid)


def second_difference_symbol(kvec, theta: np.ndarray, alpha: float, params: KernelParams, index=(0, 0, 0)) -> float:
    """Oracle symbol of T_ijk by adaptive quadrature of the closed-form angular integral."""
    kvec = np.atleast_1d(np.asarray(kvec, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    kt = float(np.linalg.norm(kvec) * np.linalg.norm(theta))
    if kt == 0:
        return 0.0
    if len(kvec) == 1:
        def f(r):
            return -2.0 * bump_h(r, params) * (2.0 * np.sin(0.5 * kt * r) / r) ** 2 if r > 0 else -2.0 * kt**2
    else:
        c0, c2, s2 = SECOND_DIFF_COEFFS[tuple(index)]
        beta = np.arctan2(kvec[1], kvec[0]) - np.arctan2(theta[1], theta[0])
        mix = c2 * np.cos(2 * beta) + s2 * np.sin(2 * beta)

        def f(r):
            if r == 0:
                return 4 * np.pi * (-c0 / 4 - mix / 8) * kt**2
            a = kt * r
            return 4 * np.pi * bump_h(r, params) * (c0 * _j0_minus_one(a) - special.jv(2, a) * mix) / r**2
    return _quad_alg(f, params.r0, 1.0 - alpha)


def second_difference_bound(grid: Grid, alpha: float, params: KernelParams) -> tuple:
    """C = max_k |S^(n-1)| int h min{4, r^2 |k|^2} r^(-1-alpha) dr / |k|^alpha over |k| <= N/2."""
    sphere = 2.0 if grid.dim == 1 else 2 * np.pi
    best, arg = 0.0, 0.0
    for kn in _distinct_norms(grid, grid.n_points // 2):
        def f(r, kn=kn):
            return bump_h(r, params) * min(4.0 / r**2, kn**2) if r > 0 else kn**2
        knee = min(2.0 / kn, params.r0)
        val = sphere * (_quad_alg(f, knee, 1.0 - alpha) + (_quad_piece(f, knee, params.r0, alpha) if knee < params.r0 else 0.0))
        if val / kn**alpha > best:
            best, arg = val / kn**alpha, kn
    return best, arg


def _quad_piece(f, a: float, b: float, alpha: float) -> float:
    val, _ = integrate.quad(lambda r: f(r) * r ** (1.0 - alpha), a, b, epsabs=0.0, epsrel=1e-12, limit=400)
    return val


# -- checks ------------------------------------------------------------------------


def _single_mode_vectors(grid: Grid, count: int = 8) -> list:
    if grid.dim == 1:
        return [np.array([k]) for k in range(1, count + 1)]
    return [np.array(v, dtype=float) for v in [(1, 0), (0, 2), (3, 1), (2, -3), (4, 4), (5, -2), (1, 6), (7, 3)][:count]]


def ds_checks(grid: Grid, s: float, params: KernelParams, shape: DomainShape, theta_samples: int, family: np.ndarray) -> list:
    """Dual-path agreement on single modes and D_s <= C_s ||g||^2_{s/2} over ``family``."""
    thetas = theta_directions(shape, theta_samples)
    dual = CheckReport("ds_dual_path", f"s={s:g}: quadrature vs Fourier-side D_s of sin(k.x), tol {DUAL_PATH_TOL:g}")
    for kv in _single_mode_vectors(grid):
        g = single_mode(grid, kv, "sin")
        quad = ds_seminorm(g, s, shape, theta_samples, params, grid)
        oracle = 0.5 * ds_symbol(kv, s, thetas, params)  # |g^(+-k)|^2 = 1/4 each
        err = abs(quad - oracle) / oracle
        dual.add(case=f"k={tuple(int(x) for x in kv)}", param=s, lhs=quad, upper=oracle, ratio=err, margin=DUAL_PATH_TOL - err, status=PASS if err <= DUAL_PATH_TOL else FAIL)
    C, karg = ds_constant(grid, s, thetas, params)
    ineq = CheckReport("ds_inequality", f"s={s:g}: D_s(g) <= C_s ||g||^2_(s/2), C_s={C:.12g} attained at |k|={karg:.6g}")
    values = ds_seminorm(family, s, shape, theta_samples, params, grid)
    for i, (g, d) in enumerate(zip(family, np.atleast_1d(values))):
        rhs = C * sobolev_seminorm_sq(g, grid, s / 2)
        ineq.add(case=f"poly{i}", param=s, lhs=d, upper=rhs, ratio=d / rhs, margin=1 - d / rhs, status=PASS if d <= rhs else FAIL)
    return [dual, ineq]


def second_difference_checks(grid: Grid, alpha: float, params: KernelParams, shape: DomainShape, theta_samples: int, family: np.ndarray) -> list:
    """Dual-path agreement on single modes and ||T_ijk g|| <= C ||g||_alpha for every theta and index."""
    thetas = theta_directions(shape, theta_samples)
    indices = _index_choices(grid.dim)
    dual = CheckReport("sob2_dual_path", f"alpha={alpha:g}: quadrature vs Fourier-side ||T g|| for sin(k.x), tol {DUAL_PATH_TOL:g}")
    for kv in _single_mode_vectors(grid):
        g = single_mode(grid, kv, "sin")
        worst = 0.0
        for theta in thetas[: min(len(thetas), 4)]:
            oracle = np.array([abs(second_difference_symbol(kv, theta, alpha, params, ix)) for ix in indices]) / np.sqrt(2.0)
            top = oracle.max()
            for ix, o in zip(indices, oracle):
                field_ = second_difference_field(g, alpha, shape, theta, ix, params, grid)[0]
                quad = float(np.sqrt(np.mean(field_**2)))
                # symbols that vanish by symmetry are compared on the scale of the largest one
                scale = o if o > 1e-8 * top else top
                worst = max(worst, abs(quad - o) / scale)
        dual.add(case=f"k={tuple(int(x) for x in kv)}", param=alpha, ratio=worst, margin=DUAL_PATH_TOL - worst, status=PASS if worst <= DUAL_PATH_TOL else FAIL)

    C, karg = second_difference_bound(grid, alpha, params)
    ineq = CheckReport("sob2_inequality", f"alpha={alpha:g}: ||T_ijk g||_2 <= C ||g||_alpha, C={C:.12g} attained at |k|={karg:.6g}")
    modes = fft(family, grid)
    kvecs, idx = _active_modes(modes, grid)
    coeff = modes.reshape(len(family), -1)[:, idx]
    worst = np.zeros(len(family))
    for theta in thetas:
        mult = second_difference_multipliers(kvecs, theta, alpha, params, indices)  # (I, K)
        for row in mult:
            flat = np.zeros(modes.reshape(len(family), -1).shape, dtype=complex)
            flat[:, idx] = coeff * row
            tg = ifft(flat.reshape(modes.shape), grid)
            lhs = np.sqrt(np.mean(tg.reshape(len(family), -1) ** 2, axis=1))
            worst = np.maximum(worst, lhs)
    for i, g in enumerate(family):
        rhs = C * np.sqrt(sobolev_seminorm_sq(g, grid, alpha))
        ineq.add(case=f"poly{i}", param=alpha, lhs=worst[i], upper=rhs, ratio=worst[i] / rhs, margin=1 - worst[i] / rhs, status=PASS if worst[i] <= rhs else FAIL)
    return [dual, ineq]


def appendix_checks(grid: Grid, params: KernelParams, shape: DomainShape | None = None, n_polys: int = 50, max_mode: int = 8, theta_samples: int = 16, seed: int = 0, s: float | None = None) -> list:
    """Both appendix lemmas on ``n_polys`` seeded random trig polynomials."""
    shape = shape or make_domain_shape(grid.dim)
    rng = np.random.default_rng(seed)
    family = random_trig_polynomials(grid, n_polys, max_mode, rng)
    s = params.alpha if s is None else s
    return ds_checks(grid, s, params, shape, theta_samples, family) + second_difference_checks(grid, params.alpha, params, shape, theta_samples, family)
