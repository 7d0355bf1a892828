"""Vanishing-viscosity study: distances between eps-regularised runs at a common time."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from ..config import SimConfig, initial_fields
from ..errors import ConfigError
from ..evolution import run
from ..grid import fft, heat_multiplier
from .report import FAIL, INFO, PASS, CheckReport

ORDER_WINDOW = (0.7, 1.3)


@dataclass
class ViscosityStudy:
    eps: list
    states: dict = field(repr=False)  # eps -> (rho, u) value arrays, or None when the run aborted
    statuses: dict = field(default_factory=dict)
    pairs: list = field(default_factory=list)  # (eps_a, eps_b, dist_u, dist_rho)
    order_u: float = float("nan")
    order_rho: float = float("nan")

    def distance(self, a: float, b: float) -> tuple:
        for ea, eb, du, dr in self.pairs:
            if (ea, eb) == (a, b) or (eb, ea) == (a, b):
                return du, dr
        raise KeyError((a, b))


def _l2_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Mean-normalised L2 distance, summed over components."""
    d = (x - y).reshape(x.shape[0], -1)
    return float(np.sqrt(np.sum(np.mean(d**2, axis=1))))


def fit_order(eps, dist) -> float:
    """Least-squares slope of log(dist) against log(eps) over positive pairs."""
    pts = [(math.log(e), math.log(d)) for e, d in zip(eps, dist) if e > 0 and d > 0 and np.isfinite(d)]
    if len(pts) < 2:
        return float("nan")
    x, y = np.array(pts).T
    if np.ptp(x) == 0:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


def viscosity_convergence_study(config: SimConfig, eps_list, horizon: float | None = None) -> ViscosityStudy:
    """Run every eps in ``eps_list`` (plus eps = 0) to ``horizon`` and compare final states.

    Pairs are the consecutive entries of the list and every positive eps
    against eps = 0.  Aborted runs leave NaN distances.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2:
        raise ConfigError("the viscosity study needs at least two eps values", key="analysis.eps_list")
    if any(e < 0 for e in eps_list):
        raise ConfigError("eps values must be >= 0", key="analysis.eps_list")
    horizon = config.analysis.visc_horizon if horizon is None else horizon
    runs = list(dict.fromkeys(eps_list + [0.0]))
    states, statuses = {}, {}
    for eps in runs:
        evo = dataclasses.replace(config.evolution, epsilon=eps, t_final=horizon)
        res = run(config.replace(evolution=evo))
        statuses[eps] = res.status
        states[eps] = (res.final.rho.values, res.final.u.values) if res.status == "completed" else None

    def dist(a, b):
        if states[a] is None or states[b] is None:
            return float("nan"), float("nan")
        (ra, ua), (rb, ub) = states[a], states[b]
        return _l2_distance(ua, ub), _l2_distance(ra, rb)

    keys = list(zip(eps_list, eps_list[1:])) + [(a, 0.0) for a in eps_list if a > 0]
    keys = list(dict.fromkeys(keys))
    pairs = [(a, b, *dist(a, b)) for a, b in keys]
    positive = [p for p in pairs if p[1] == 0.0]
    study = ViscosityStudy(eps_list, states, statuses, pairs)
    study.order_u = fit_order([p[0] for p in positive], [p[2] for p in positive])
    study.order_rho = fit_order([p[0] for p in positive], [p[3] for p in positive])
    return study


def heat_only_distance(config: SimConfig, eps: float, horizon: float) -> tuple:
    """Numerical and closed-form ||rho_eps - rho_(eps/2)|| at ``horizon`` with u = 0.

    With zero velocity both equations reduce to rho_t = eps Lap rho, so every
    mode decays by exp(-eps |k|^2 t) exactly.
    """
    g = config.grid
    base = dataclasses.replace(config.evolution, u0="0" if g.dim == 1 else "0; 0", t_final=horizon)
    finals = []
    for e in (eps, eps / 2):
        res = run(config.replace(evolution=dataclasses.replace(base, epsilon=e)))
        if res.status != "completed":
            raise RuntimeError(f"heat-only run at eps={e} stopped: {res.message}")
        finals.append(res.final.rho.values[0])
    numeric = float(np.sqrt(np.mean((finals[0] - finals[1]) ** 2)))
    rho0, _ = initial_fields(config.replace(evolution=base))
    modes = fft(rho0.values[0], g)
    diff = heat_multiplier(g, eps, horizon) - heat_multiplier(g, eps / 2, horizon)
    closed = float(np.sqrt(np.sum(np.abs(modes * diff) ** 2)))
    return numeric, closed


def study_report(study: ViscosityStudy, heat: tuple | None = None, heat_tol: float = 1e-10) -> list:
    """Distance table, monotonicity and order checks, and the closed-form heat subcase."""
    table = CheckReport("visc_distances", "L2 distances between final states at the study horizon", hard=False)
    for a, b, du, dr in study.pairs:
        ok = np.isfinite(du) and np.isfinite(dr)
        table.add(case=f"eps={a:g} vs eps={b:g}", param=a, lhs=du, upper=dr, status=INFO if ok else FAIL)
    for eps, status in study.statuses.items():
        if status != "completed":
            table.notes.append(f"run at eps={eps:g} aborted ({status})")

    checks = CheckReport("visc_convergence", f"order window {ORDER_WINDOW}")
    ref = sorted((p for p in study.pairs if p[1] == 0.0), key=lambda p: -p[0])
    # halving steps only: the final step to eps = 0 is a full distance, not a gap
    positive = [e for e in study.eps if e > 0]
    consecutive = set(zip(positive, positive[1:]))
    cons = [p for p in study.pairs if (p[0], p[1]) in consecutive]
    for name, seq in (("against eps=0", ref), ("consecutive", cons)):
        for col, label in ((2, "u"), (3, "rho")):
            vals = [p[col] for p in seq]
            if len(vals) < 2:
                continue
            mono = all(x > y for x, y in zip(vals, vals[1:]))
            checks.add(case=f"monotone {label} {name}", lhs=vals[-1], upper=vals[0], status=PASS if mono else FAIL)
    for label, order in (("u", study.order_u), ("rho", study.order_rho)):
        if np.isnan(order):
            checks.add(case=f"order {label}", ratio=order, status=INFO)
            continue
        lo, hi = ORDER_WINDOW
        ok = lo <= order <= hi
        checks.add(case=f"order {label}", lower=lo, upper=hi, ratio=order, margin=min(order - lo, hi - order), status=PASS if ok else FAIL)
    reports = [table, checks]
    if heat is not None:
        numeric, closed = heat
        err = abs(numeric - closed)
        heat_rep = CheckReport("visc_heat_only", f"closed-form heat subcase, tol {heat_tol:g}")
        heat_rep.add(case="||rho_eps - rho_eps/2||", lhs=numeric, upper=closed, ratio=err, margin=heat_tol - err, status=PASS if err <= heat_tol else FAIL)
        reports.append(heat_rep)
    return reports
