"""Frozen-coefficient multiplier oracle and the two-sided coercivity checks.

At uniform density the discrete operator is a Fourier multiplier,

    L_phi cos(k.x) = -c_1 m(k) cos(k.x),
    m(k) = sum_z w h(|z|) (1 - cos(k.z)) / |z|^(n+alpha),

with c_1 = (|Omega_0|/2^n)^(-tau/n) (equal to 1 in one dimension).  The
band constants c_*, C_* bracket c_1 m(k)/|k|^alpha over 4 <= |k| <= N/8 and
stand in for the unspecified absolute constants of the coercivity bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..domain import DomainShape, make_domain_shape
from ..grid import Field, Grid, derivative_values, sobolev_seminorm_sq
from ..kernel import KernelParams, bump_h, build_kernel_cache
from ..operator import apply_L_phi_values, make_stencil
from .families import single_mode
from .report import FAIL, INFO, PASS, WARN, CheckReport

LOWER_SLACK = 0.8
UPPER_SLACK = 1.2
HIGH_ORDER_FACTOR = 3.0


def band_limits(grid: Grid) -> tuple:
    return 4, grid.n_points // 8


@dataclass(frozen=True, eq=False)
class MultiplierOracle:
    params: KernelParams
    grid: Grid
    k: np.ndarray = field(repr=False)  # tabulated |k| along the first axis
    m: np.ndarray = field(repr=False)  # bare sums m(k)
    unit_factor: float  # c_1, the uniform-density normalisation of d^tau
    c_star: float
    C_star: float

    @property
    def symbol(self) -> np.ndarray:
        """-(L_phi e^{ikx}) / e^{ikx} at rho = 1."""
        return self.unit_factor * self.m

    def at(self, k) -> float:
        hit = np.flatnonzero(self.k == k)
        if hit.size == 0:
            raise KeyError(f"k = {k} not tabulated")
        return float(self.symbol[hit[0]])

    @property
    def band_ratio(self) -> float:
        return self.C_star / self.c_star


def _ball_offsets(grid: Grid, r0: float) -> np.ndarray:
    """All nonzero integer offsets with |z| <= r0, enumerated independently of the stencil."""
    h = grid.spacing
    m = int(np.floor(r0 / h))
    axes = [np.arange(-m, m + 1)] * grid.dim
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.dim)
    dist = h * np.linalg.norm(pts, axis=1)
    keep = (dist > 0) & (dist <= r0 * (1 + 1e-14))
    return pts[keep] * h


def multiplier_sum(params: KernelParams, grid: Grid, kvecs: np.ndarray) -> np.ndarray:
    """m(k) for an array of wavevectors of shape (K, n)."""
    z = _ball_offsets(grid, params.r0)
    r = np.linalg.norm(z, axis=1)
    w = grid.cell_volume * bump_h(r, params) / r ** (grid.dim + params.alpha)
    kvecs = np.atleast_2d(np.asarray(kvecs, dtype=float))
    out = np.empty(len(kvecs))
    for i, kv in enumerate(kvecs):
        out[i] = np.sum(w * (1.0 - np.cos(z @ kv)))
    return out


def unit_density_factor(grid: Grid, params: KernelParams, shape: DomainShape | None = None) -> float:
    if grid.dim == 1 or params.tau == 0:
        return 1.0
    shape = shape or make_domain_shape(grid.dim)
    return (shape.quadrature_area / 2**grid.dim) ** (-params.tau / grid.dim)


def multiplier_oracle(params: KernelParams, grid: Grid, K: int | None = None, shape: DomainShape | None = None) -> MultiplierOracle:
    """Tabulate m(k), k = 0..K along the first axis, and the band constants."""
    K = grid.n_points // 2 if K is None else K
    if not 0 < K <= grid.n_points // 2:
        raise ValueError(f"K must lie in (0, N/2], got {K}")
    ks = np.arange(K + 1)
    kvecs = np.zeros((K + 1, grid.dim))
    kvecs[:, 0] = ks
    m = multiplier_sum(params, grid, kvecs)
    m[0] = 0.0
    factor = unit_density_factor(grid, params, shape)
    lo, hi = band_limits(grid)
    band = (ks >= lo) & (ks <= min(hi, K))
    if not band.any():
        raise ValueError(f"tabulation K = {K} does not reach the band [{lo}, {hi}]")
    ratio = factor * m[band] / ks[band] ** params.alpha
    return MultiplierOracle(params, grid, ks.astype(float), m, factor, float(ratio.min()), float(ratio.max()))


# -- coercivity ----------------------------------------------------------------


def _density_data(rho: Field) -> tuple:
    g = rho.grid
    vals = rho.values[0]
    grad = np.sqrt(sum(derivative_values(vals, g, a, 1) ** 2 for a in range(g.dim)))
    return float(vals.max()), float(vals.min()), float(grad.max())


def _operator(rho: Field, params: KernelParams, shape: DomainShape | None, floor: float):
    g = rho.grid
    shape = shape or make_domain_shape(g.dim)
    stencil = make_stencil(g, params.r0, shape)
    cache = build_kernel_cache(rho, shape, params, stencil, floor)
    return lambda vals: apply_L_phi_values(vals[None], cache, stencil)[0]


def _as_family(family, grid: Grid) -> tuple:
    """(values array (F, *shape), labels) from Fields, arrays or (label, values) pairs."""
    labels, arrays = [], []
    for i, item in enumerate(family):
        label = f"f{i}"
        if isinstance(item, tuple):
            label, item = item
        vals = item.values[0] if isinstance(item, Field) else np.asarray(item, dtype=float)
        if vals.shape != grid.shape:
            raise ValueError(f"family member {label} has shape {vals.shape}, expected {grid.shape}")
        labels.append(str(label))
        arrays.append(vals)
    return np.array(arrays), labels


def single_mode_family(grid: Grid, ks) -> list:
    """(label, cos(k x_1)) pairs; in 2D the diagonal cos(k(x_1 + x_2)) is added for each k."""
    out = []
    for k in ks:
        kv = np.zeros(grid.dim)
        kv[0] = k
        out.append((f"cos(k={k})", single_mode(grid, kv)))
        if grid.dim == 2:
            out.append((f"cos(k=({k},{k}))", single_mode(grid, (k, k))))
    return out


def basic_coercivity_check(
    rho: Field,
    family,
    params: KernelParams,
    shape: DomainShape | None = None,
    oracle: MultiplierOracle | None = None,
    floor: float = 1e-8,
    name: str = "basic_coercivity",
) -> CheckReport:
    """Two-sided L2 bounds for L_phi f against ||f||_{Hdot^alpha}.

    upper: ||L f||^2 <= (1.2 C_*)^2 rho_min^(-2 tau/n) ||f||^2_{alpha} + S
    lower: ||L f||^2 >= (0.8 c_*)^2 rho_max^(-2 tau/n) ||f||^2_{alpha} - S
    S = rho_max^(2 tau/n) rho_min^(-2 - 4 tau/n) |grad rho|_inf^2 ||f||^2_{alpha/2}
    """
    g = rho.grid
    n = g.dim
    oracle = oracle or multiplier_oracle(params, g, shape=shape)
    apply = _operator(rho, params, shape, floor)
    rmax, rmin, grad = _density_data(rho)
    p = params.tau / n
    values, labels = _as_family(family, g)
    report = CheckReport(
        name,
        f"alpha={params.alpha:g} tau={params.tau:g}; c*={oracle.c_star:.6g} C*={oracle.C_star:.6g}; "
        f"rho in [{rmin:.6g}, {rmax:.6g}], |grad rho|_inf={grad:.6g}",
    )
    for label, f in zip(labels, values):
        Lf = apply(f)
        lhs = float(np.mean(Lf**2))
        top = sobolev_seminorm_sq(f, g, params.alpha)
        half = sobolev_seminorm_sq(f, g, params.alpha / 2)
        if top == 0:
            report.add(case=label, lhs=lhs, status=INFO)
            continue
        slack = rmax ** (2 * p) * rmin ** (-2 - 4 * p) * grad**2 * half
        upper = (UPPER_SLACK * oracle.C_star) ** 2 * rmin ** (-2 * p) * top + slack
        lower = (LOWER_SLACK * oracle.c_star) ** 2 * rmax ** (-2 * p) * top - slack
        ok = lower <= lhs <= upper
        margin = min(lhs - lower, upper - lhs) / lhs if lhs > 0 else -np.inf
        report.add(
            case=label,
            param=params.tau,
            lhs=lhs,
            lower=lower,
            upper=upper,
            ratio=np.sqrt(lhs / top),
            env_lo=oracle.c_star * rmax ** (-p),
            env_hi=oracle.C_star * rmin ** (-p),
            slack=slack,
            margin=margin,
            status=PASS if ok else FAIL,
        )
    return report


def scaling_check(
    rho: Field,
    family,
    params: KernelParams,
    factor: float = 2.0,
    shape: DomainShape | None = None,
    tol: float = 1e-12,
    floor: float = 1e-8,
) -> CheckReport:
    """||L_phi f|| under rho -> c rho must scale by exactly c^(-tau/n)."""
    g = rho.grid
    expected = factor ** (-params.tau / g.dim)
    base = _operator(rho, params, shape, floor)
    scaled = _operator(Field(g, factor * rho.values), params, shape, floor)
    values, labels = _as_family(family, g)
    report = CheckReport("density_scaling", f"rho -> {factor:g} rho, expected factor {expected:.17g}")
    for label, f in zip(labels, values):
        a = float(np.sqrt(np.mean(base(f) ** 2)))
        b = float(np.sqrt(np.mean(scaled(f) ** 2)))
        if a == 0:
            report.add(case=label, lhs=b, status=INFO)
            continue
        err = abs(b / a - expected) / expected
        report.add(case=label, param=factor, lhs=b / a, lower=expected, upper=expected, ratio=err, margin=tol - err, status=PASS if err <= tol else FAIL)
    return report


def high_order_coercivity_check(
    rho: Field,
    family,
    m: int,
    params: KernelParams,
    shape: DomainShape | None = None,
    oracle: MultiplierOracle | None = None,
    floor: float = 1e-8,
) -> CheckReport:
    """WARN-level scan of ||L f||_{Hdot^m} / ||f||_{Hdot^(m+alpha)} against the calibrated envelope.

    A member whose modes all lie below the calibration band is reported as INFO.
    """
    if m not in (1, 2):
        raise ValueError(f"m must be 1 or 2, got {m}")
    g = rho.grid
    n = g.dim
    oracle = oracle or multiplier_oracle(params, g, shape=shape)
    apply = _operator(rho, params, shape, floor)
    rmax, rmin, _ = _density_data(rho)
    p = params.tau / n
    env_lo = oracle.c_star * rmax ** (-p)
    env_hi = oracle.C_star * rmin ** (-p)
    lo_band = band_limits(g)[0]
    values, labels = _as_family(family, g)
    report = CheckReport(
        f"coercivity_m{m}",
        f"ratio envelope [{env_lo:.6g}, {env_hi:.6g}] widened by x{HIGH_ORDER_FACTOR:g}",
        hard=False,
    )
    for label, f in zip(labels, values):
        modes = np.abs(np.fft.fftn(f)) > 1e-12 * np.abs(f).max() * f.size
        top = sobolev_seminorm_sq(f, g, m + params.alpha)
        if top == 0:
            report.add(case=label, param=m, status=INFO)
            continue
        ratio = float(np.sqrt(sobolev_seminorm_sq(apply(f), g, m) / top))
        lo, hi = env_lo / HIGH_ORDER_FACTOR, env_hi * HIGH_ORDER_FACTOR
        margin = min(ratio - lo, hi - ratio) / ratio
        if g.k_abs[modes].max() < lo_band:
            status = INFO
        else:
            status = PASS if lo <= ratio <= hi else WARN
        report.add(case=label, param=m, lhs=ratio, lower=lo, upper=hi, ratio=ratio, env_lo=env_lo, env_hi=env_hi, margin=margin, status=status)
    return report


def metric_reduction_check(
    params: KernelParams,
    grid: Grid,
    ks=range(1, 9),
    shape: DomainShape | None = None,
    oracle: MultiplierOracle | None = None,
    tol: float = 1e-12,
) -> CheckReport:
    """At rho = 1 the operator must act on cos(k x_1) as multiplication by the oracle symbol."""
    ks = list(ks)
    oracle = oracle or multiplier_oracle(params, grid, K=max(max(ks), band_limits(grid)[1]), shape=shape)
    rho = Field.constant(grid, 1.0)
    apply = _operator(rho, params, shape, 1e-8)
    report = CheckReport("metric_reduction", f"rho = 1, alpha={params.alpha:g}, tol {tol:g}")
    for label, f in single_mode_family(grid, ks):
        if label.startswith("cos(k=("):
            continue
        k = int(label[len("cos(k=") : -1])
        sym = oracle.at(k)
        err = float(np.max(np.abs(apply(f) + sym * f))) / (sym * float(np.max(np.abs(f))))
        report.add(case=label, param=params.alpha, lhs=sym, ratio=err, margin=tol - err, status=PASS if err <= tol else FAIL)
    return report
