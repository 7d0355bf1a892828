"""Command-line entry point: simulate, coercivity, appendix-checks, visc-study.

Every command writes into ``--out`` exactly: ``manifest.json``, ``config.ini``
(the resolved configuration), one CSV (``diagnostics.csv`` or ``report.csv``)
and, for ``simulate``, zero or more ``*.field`` snapshots.

Exit codes: 0 success, 1 misuse, 2 blow-up or vacuum during a run, 3 a hard
check failed.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    appendix_checks,
    basic_coercivity_check,
    heat_only_distance,
    high_order_coercivity_check,
    metric_reduction_check,
    multiplier_oracle,
    random_trig_polynomials,
    scaling_check,
    single_mode_family,
    study_report,
    viscosity_convergence_study,
    write_reports,
)
from .analysis.coercivity import band_limits
from .config import SimConfig, echo_config, evaluate_expression, parse_config
from .diagnostics import DiagnosticsRecord, format_row
from .domain import make_domain_shape
from .errors import ConfigError, TopoflockError, VacuumError
from .evolution import run
from .grid import Field

log = logging.getLogger("topoflock")

EXIT_OK, EXIT_MISUSE, EXIT_BREAKDOWN, EXIT_CHECK_FAILED = 0, 1, 2, 3
COMMANDS = ("simulate", "coercivity", "appendix-checks", "visc-study")
MAX_SEED = 2**64 - 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="topoflock", description="Topological Euler-alignment simulator and verification suite.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="INI file; omit for all defaults")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override section.key (repeatable)")
    p.add_argument("--out", type=Path, required=True, help="run directory (created; must be empty)")
    p.add_argument("--seed", default="0", help="unsigned 64-bit seed for random test families")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _seed(raw: str) -> int:
    try:
        value = int(raw, 0)
    except ValueError:
        raise UsageError(f"--seed must be an unsigned 64-bit integer, got {raw!r}") from None
    if not 0 <= value <= MAX_SEED:
        raise UsageError(f"--seed must lie in [0, 2^64 - 1], got {value}")
    return value


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _prepare_out(out: Path) -> None:
    if out.exists() and (not out.is_dir() or any(out.iterdir())):
        raise UsageError(f"output directory {out} must be new or empty")
    out.mkdir(parents=True, exist_ok=True)


def write_manifest(out: Path, command: str, seed, started: str, status: int, message: str, config_text: str | None) -> Path:
    files = sorted(p for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "started": started,
        "finished": _now(),
        "exit_status": status,
        "message": message,
        "config": config_text,
        "files": [{"path": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size} for p in files],
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8", newline="\n")
    return path


def _print_reports(reports) -> bool:
    ok = True
    for rep in reports:
        print(rep.summary())
        for note in rep.notes:
            print(f"  note: {note}")
        ok &= rep.passed
    print("overall:", "PASS" if ok else "FAIL")
    return ok


# -- commands -----------------------------------------------------------------


def cmd_simulate(cfg: SimConfig, out: Path, seed: int) -> tuple:
    header = DiagnosticsRecord.header(cfg.grid.dim, cfg.output.m_list)
    with open(out / "diagnostics.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")

        def sink(rec):
            fh.write(format_row(rec.values()) + "\n")

        try:
            result = run(cfg, sink=sink, snapshot_dir=out if cfg.output.snapshot_every else None)
        except VacuumError as exc:
            print(f"topoflock: error: invalid initial data: {exc}", file=sys.stderr)
            return EXIT_MISUSE, f"invalid initial data: {exc}"
    print(f"simulate: {result.status} after {result.steps} steps at t={result.final.t:.6g}")
    if result.status == "max_steps":
        print(f"note: {result.message}")
        return EXIT_OK, result.message
    if result.status != "completed":
        print(f"breakdown: {result.message}")
        return EXIT_BREAKDOWN, f"{result.status}: {result.message}"
    return EXIT_OK, "completed"


def coercivity_reports(cfg: SimConfig, seed: int) -> list:
    g, params = cfg.grid, cfg.kernel
    shape = make_domain_shape(g.dim, cfg.domain.lens_half_angle, cfg.domain.quad_points)
    oracle = multiplier_oracle(params, g, shape=shape)
    reports = [metric_reduction_check(params, g, range(1, min(8, g.n_points // 2) + 1), shape, oracle)]
    rho = Field(g, evaluate_expression(cfg.analysis.coercivity_rho, g)[None])
    if rho.values.min() <= cfg.evolution.rho_floor:
        raise ConfigError("analysis.coercivity_rho must stay above the vacuum floor", key="analysis.coercivity_rho")
    lo, hi = band_limits(g)
    modes = single_mode_family(g, range(lo, hi + 1))
    reports.append(basic_coercivity_check(rho, modes, params, shape, oracle, cfg.evolution.rho_floor))
    reports.append(scaling_check(rho, modes, params, 2.0, shape, floor=cfg.evolution.rho_floor))
    rng = np.random.default_rng(seed)
    polys = random_trig_polynomials(g, cfg.analysis.n_polys, min(cfg.analysis.max_mode, g.n_points // 3), rng)
    family = modes + [(f"poly{i}", p) for i, p in enumerate(polys)]
    for m in cfg.analysis.coercivity_m:
        if m == 0:
            continue
        reports.append(high_order_coercivity_check(rho, family, m, params, shape, oracle, cfg.evolution.rho_floor))
    return reports


def appendix_reports(cfg: SimConfig, seed: int) -> list:
    shape = make_domain_shape(cfg.grid.dim, cfg.domain.lens_half_angle, cfg.domain.quad_points)
    a = cfg.analysis
    return appendix_checks(cfg.grid, cfg.kernel, shape, a.n_polys, a.max_mode, a.theta_samples, seed)


def visc_reports(cfg: SimConfig, seed: int) -> list:
    eps = cfg.analysis.eps_list
    if len(eps) < 2:
        raise ConfigError("the viscosity study needs at least two eps values", key="analysis.eps_list")
    horizon = cfg.analysis.visc_horizon
    study = viscosity_convergence_study(cfg, eps, horizon)
    heat = heat_only_distance(cfg, max(eps), horizon) if max(eps) > 0 else None
    return study_report(study, heat)


_REPORTERS = {"coercivity": coercivity_reports, "appendix-checks": appendix_reports, "visc-study": visc_reports}


def cmd_report(command: str, cfg: SimConfig, out: Path, seed: int) -> tuple:
    reports = _REPORTERS[command](cfg, seed)
    write_reports(reports, out / "report.csv")
    ok = _print_reports(reports)
    return (EXIT_OK, "all hard checks passed") if ok else (EXIT_CHECK_FAILED, "a hard check failed")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    started = _now()
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"topoflock: error: {exc}", file=sys.stderr)
        return EXIT_MISUSE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        seed = _seed(args.seed)
        _prepare_out(args.out)
    except UsageError as exc:
        print(f"topoflock: error: {exc}", file=sys.stderr)
        return EXIT_MISUSE

    config_text = None
    try:
        cfg = parse_config(args.config, args.set)
        config_text = echo_config(cfg)
        (args.out / "config.ini").write_text(config_text, encoding="utf-8", newline="\n")
        if args.command == "simulate":
            status, message = cmd_simulate(cfg, args.out, seed)
        else:
            status, message = cmd_report(args.command, cfg, args.out, seed)
    except (ConfigError, TopoflockError, ValueError) as exc:
        status, message = EXIT_MISUSE, str(exc)
        print(f"topoflock: error: {exc}", file=sys.stderr)
    write_manifest(args.out, args.command, seed, started, status, message, config_text)
    return status


if __name__ == "__main__":
    sys.exit(main())
