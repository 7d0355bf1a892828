"""Acceptance criteria 1-9, one PASS/FAIL line each.

Lines are written straight to the terminal so they survive output capture.
"""

import time

import numpy as np
import pytest

from topoflock.analysis import (
    appendix_checks,
    basic_coercivity_check,
    heat_only_distance,
    metric_reduction_check,
    multiplier_oracle,
    scaling_check,
    single_mode_family,
    study_report,
    viscosity_convergence_study,
)
from topoflock.analysis.coercivity import band_limits
from topoflock.cli import main
from topoflock.config import initial_fields, parse_config
from topoflock.diagnostics import DiagnosticsRecord, SimState, e_transport_residual
from topoflock.domain import make_domain_shape
from topoflock.evolution import _solver, run
from topoflock.grid import Field, Grid, shift_values
from topoflock.kernel import KernelParams

GOLDEN = "tests/data/flagship_diagnostics.csv"
ROUND_OFF = 1e-13


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail, seconds):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} ({seconds:.1f} s) {detail}")
        assert ok, detail

    return emit


def _read_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


@pytest.fixture(scope="module")
def flagship(tmp_path_factory):
    """The flagship run through the CLI; reused by criteria 2, 3 and 9."""
    out = tmp_path_factory.mktemp("flagship") / "run"
    t0 = time.perf_counter()
    code = main(["simulate", "--out", str(out), "--seed", "1"])
    elapsed = time.perf_counter() - t0
    header, rows = _read_csv(out / "diagnostics.csv")
    return {"code": code, "out": out, "header": header, "rows": rows, "seconds": elapsed}


def _col(run_, name):
    return run_["rows"][:, run_["header"].index(name)]


def _momentum_scale(cfg):
    rho, u = initial_fields(cfg)
    return float(np.sum(rho.values[0] * np.abs(u.values).sum(axis=0)) * cfg.grid.cell_volume)


def _momentum_drift(cfg):
    res = run(cfg)
    assert res.status == "completed"
    p = np.array([r.momentum for r in res.records])
    return float(np.max(np.abs(p - p[0]))) / _momentum_scale(cfg)


class TestAcceptance:
    def test_1_metric_reduction(self, verdict):
        t0 = time.perf_counter()
        g = Grid(1, 512)
        worst, ok = 0.0, True
        for alpha in (0.5, 1.0, 1.5):
            rep = metric_reduction_check(KernelParams(alpha=alpha), g, range(1, 9))
            worst = max(worst, max(r["ratio"] for r in rep.rows))
            ok &= rep.passed and rep.count("PASS") == 8
        dt = time.perf_counter() - t0
        verdict(1, ok and dt < 5, f"max rel err {worst:.2e} <= 1e-12 over alpha in {{0.5,1,1.5}}, k=1..8", dt)

    def test_2_conservation(self, verdict, flagship):
        t0 = time.perf_counter()
        cfg = parse_config()
        mass = _col(flagship, "mass")
        mass_drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
        mom = _col(flagship, "momentum_0")
        mom_drift = float(np.max(np.abs(mom - mom[0]))) / _momentum_scale(cfg)
        fine = _momentum_drift(parse_config(overrides=["grid.n_points=512", "output.output_every=1000000"]))
        # flagship momentum is zero by parity at every N, so both drifts sit at round-off;
        # refinement is then measured on non-symmetric data where the drift is resolvable
        variant = ["evolution.rho0=1+0.5*cos(x)+0.2*sin(2*x)", "evolution.u0=0.05+0.2*sin(x)+0.1*cos(3*x)", "output.output_every=1000000"]
        coarse_v = _momentum_drift(parse_config(overrides=["grid.n_points=32", *variant]))
        fine_v = _momentum_drift(parse_config(overrides=["grid.n_points=64", *variant]))
        dt = time.perf_counter() - t0 + flagship["seconds"]
        degenerate = max(mom_drift, fine) <= ROUND_OFF
        shrink = coarse_v / fine_v if degenerate else mom_drift / max(fine, 1e-300)
        ok = flagship["code"] == 0 and mass_drift <= 1e-10 and mom_drift <= 1e-6 and shrink >= 4 and dt < 120
        detail = (
            f"mass drift {mass_drift:.2e}; momentum drift {mom_drift:.2e} (N=256), {fine:.2e} (N=512)"
            + (f"; flagship drift is round-off, non-symmetric data shrinks {shrink:.1f}x (N=32->64)" if degenerate else f"; shrink {shrink:.1f}x")
        )
        verdict(2, ok, detail, dt)

    def test_3_maximum_principle(self, verdict, flagship):
        t = _col(flagship, "t")
        umax, umin = _col(flagship, "u_max_0"), _col(flagship, "u_min_0")
        sup = _col(flagship, "alignment_sup")
        slack = 1e-7 * _col(flagship, "amplitude_0")[0] * np.diff(t)
        ok_max = bool(np.all(np.diff(umax) <= slack))
        ok_min = bool(np.all(np.diff(umin) >= -slack))
        ok_sup = bool(np.all(np.diff(sup) < 0))
        detail = f"max u {umax[0]:.4f}->{umax[-1]:.4f}, min u {umin[0]:.4f}->{umin[-1]:.4f}, sup|u-ubar| strictly decreasing over {len(t)} samples: {ok_sup}"
        verdict(3, ok_max and ok_min and ok_sup, detail, 0.0)

    def test_4_e_transport(self, verdict):
        t0 = time.perf_counter()
        base = parse_config()
        solver = _solver(base)
        rho, u = initial_fields(base)
        dt = solver.stable_dt(rho.values[0], u.values, solver.cache(rho.values[0]))
        window = 0.05
        means = {}
        for n, step_ in ((256, dt), (512, dt / 2)):
            cfg = parse_config(overrides=[f"grid.n_points={n}", f"evolution.dt={step_!r}", f"evolution.t_final={window!r}", "output.output_every=1"])
            res = run(cfg)
            rows = res.records if n == 256 else res.records[::2]
            means[n] = float(np.mean([r.e_transport_residual for r in rows]))
        order = float(np.log2(means[256] / means[512]))
        # frozen translation: u = c, e(x, t) = e0(x - c t) sampled exactly on the grid
        g = Grid(1, 256)
        c, h = 0.7, 1e-4
        e0 = np.cos(g.coords[0]) + 0.3 * np.sin(2 * g.coords[0])
        states, es = [], []
        for s in (-h, 0.0, h):
            states.append(SimState(Field.constant(g, 1.0), Field.constant(g, c), s))
            es.append(Field(g, shift_values(e0, g, -c * s)))
        manufactured = e_transport_residual(states, es, h)
        dt_ = time.perf_counter() - t0
        ok = order >= 1 and manufactured <= 1e-8 and dt_ < 300
        verdict(4, ok, f"mean residual {means[256]:.3e} (N=256) -> {means[512]:.3e} (N=512, dt/2), order {order:.2f}; manufactured {manufactured:.1e}", dt_)

    def test_5_basic_coercivity(self, verdict):
        t0 = time.perf_counter()
        g = Grid(1, 256)
        rho = Field.from_function(g, lambda x: 1 + 0.3 * np.sin(x))
        lo, hi = band_limits(g)
        fam = single_mode_family(g, range(lo, hi + 1))
        ok, worst, worst_scale = True, np.inf, 0.0
        for tau in (0.0, 1.0):
            p = KernelParams(tau=tau)
            rep = basic_coercivity_check(rho, fam, p, oracle=multiplier_oracle(p, g))
            sc = scaling_check(rho, fam, p, factor=2.0, tol=1e-12)
            ok &= rep.passed and rep.count("PASS") == len(fam) and sc.passed
            worst = min(worst, rep.worst_margin())
            worst_scale = max(worst_scale, max(r["ratio"] for r in sc.rows))
        dt = time.perf_counter() - t0
        verdict(5, ok and dt < 60, f"{2 * len(fam)} mode/tau pairs in bounds, worst relative margin {worst:.3f}; scaling rel err {worst_scale:.1e}", dt)

    def test_6_appendix(self, verdict):
        t0 = time.perf_counter()
        reports = appendix_checks(Grid(1, 256), KernelParams(r0=np.pi / 4), n_polys=50, seed=0)
        reports += appendix_checks(Grid(2, 64), KernelParams(tau=2.0, r0=np.pi / 4), make_domain_shape(2), n_polys=50, seed=0)
        dt = time.perf_counter() - t0
        ineq = [r for r in reports if r.name.endswith("inequality")]
        dual = [r for r in reports if r.name.endswith("dual_path")]
        violations = sum(r.failures for r in ineq)
        dual_err = max(max(row["ratio"] for row in r.rows) for r in dual)
        ok = all(r.passed for r in reports) and all(r.count("PASS") == 50 for r in ineq) and dt < 600
        verdict(6, ok, f"{violations} violations over 4x50 polynomials (n=1, n=2); worst dual-path rel err {dual_err:.1e}", dt)

    def test_7_viscosity(self, verdict):
        t0 = time.perf_counter()
        cfg = parse_config(overrides=["output.output_every=1000000"])
        study = viscosity_convergence_study(cfg, [1e-2, 5e-3, 2.5e-3, 0.0], horizon=0.5)
        heat = heat_only_distance(cfg, 1e-2, 0.5)
        reports = study_report(study, heat, heat_tol=1e-10)
        dt = time.perf_counter() - t0
        ok = all(r.passed for r in reports if r.hard) and dt < 600
        d = [f"{study.distance(e, 0.0)[0]:.2e}" for e in (1e-2, 5e-3, 2.5e-3)]
        verdict(7, ok, f"|u_eps-u_0| = {', '.join(d)}; order u {study.order_u:.3f}, rho {study.order_rho:.3f}; heat mismatch {abs(heat[0] - heat[1]):.1e}", dt)

    def test_8_two_dimensional_symmetry(self, verdict):
        t0 = time.perf_counter()
        cfg = parse_config(
            overrides=[
                "grid.dim=2",
                "grid.n_points=32",
                "domain.lens_half_angle=pi/4",
                "evolution.rho0=1+0.3*cos(x)*cos(y)+0.2*sin(x)",
                "evolution.u0=0.2*sin(x)+0.1*cos(y); 0.2*sin(y)",
                "evolution.max_steps=50",
                "evolution.t_final=10",
                "output.output_every=1",
            ]
        )
        res = run(cfg)

        def mirror(a):
            return np.roll(a[..., ::-1], 1, axis=-1)

        rho, u = res.final.rho.values[0], res.final.u.values
        asym = max(np.abs(rho - mirror(rho)).max(), np.abs(u[0] - mirror(u[0])).max(), np.abs(u[1] + mirror(u[1])).max())
        mass = np.array([r.mass for r in res.records])
        drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
        floor = min(r.rho_min for r in res.records)
        dt = time.perf_counter() - t0
        ok = res.steps == 50 and res.status in ("completed", "max_steps") and asym <= 1e-8 and drift <= 1e-9 and floor > cfg.evolution.rho_floor and dt < 600
        verdict(8, ok, f"{res.steps} steps; mirror defect {asym:.1e}; mass drift {drift:.1e}; min rho {floor:.3f}", dt)

    def test_9_determinism_and_golden(self, verdict, flagship, tmp_path):
        t0 = time.perf_counter()
        again = tmp_path / "again"
        code = main(["simulate", "--out", str(again), "--seed", "1"])
        same = (again / "diagnostics.csv").read_bytes() == (flagship["out"] / "diagnostics.csv").read_bytes()
        header, gold = _read_csv(GOLDEN)
        shape_ok = header == flagship["header"] == DiagnosticsRecord.header(1, (0, 1)) and gold.shape == flagship["rows"].shape
        err = np.inf
        if shape_ok:
            diff = np.abs(flagship["rows"] - gold)
            both_nan = np.isnan(flagship["rows"]) & np.isnan(gold)
            err = float(np.max(np.where(both_nan, 0.0, diff / np.maximum(1.0, np.abs(gold)))))
        dt = time.perf_counter() - t0
        ok = code == 0 and same and shape_ok and err <= 1e-8
        verdict(9, ok, f"byte-identical rerun: {same}; max golden deviation {err:.1e} over {gold.size} entries", dt)
