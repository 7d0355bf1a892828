"""Run configuration: flat INI sections, defaults, validation and echo.

Sections and keys (all optional; an empty file gives the flagship 1D run):

    [grid]       dim, n_points, period
    [kernel]     alpha, tau, r0, bump
    [domain]     lens_half_angle, quad_points
    [evolution]  epsilon, cfl, t_final, dt, rho_floor, rho0, u0, max_steps
    [output]     output_every, snapshot_every, m_list
    [analysis]   seed-independent study settings for the harness commands

Initial data are expressions in ``x`` (and ``y`` in 2D) using numpy
functions; vector components of ``u0`` are separated by ``;``.  ``r0``
defaults to L/8 and ``tau`` to the grid dimension.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import Field, Grid
from .kernel import BUMP_PROFILES, KernelParams


@dataclass(frozen=True)
class DomainSpec:
    lens_half_angle: float = math.pi / 4
    quad_points: int = 16


@dataclass(frozen=True)
class EvolutionSpec:
    epsilon: float = 0.0
    cfl: float = 1.0
    t_final: float = 1.0
    dt: float = 0.0  # 0 selects the adaptive CFL step
    rho_floor: float = 1e-8
    rho0: str = "1 + 0.5*cos(x)"
    u0: str = "0.2*sin(x)"
    max_steps: int = 10_000_000


@dataclass(frozen=True)
class OutputSpec:
    output_every: int = 100
    snapshot_every: int = 0
    m_list: tuple = (0, 1)


@dataclass(frozen=True)
class AnalysisSpec:
    eps_list: tuple = (1e-2, 5e-3, 2.5e-3, 0.0)
    visc_horizon: float = 0.5
    n_polys: int = 50
    max_mode: int = 8
    theta_samples: int = 16
    coercivity_rho: str = "1"
    coercivity_m: tuple = (1, 2)


@dataclass(frozen=True)
class SimConfig:
    grid: Grid = Grid(1, 256)
    kernel: KernelParams = KernelParams()
    domain: DomainSpec = DomainSpec()
    evolution: EvolutionSpec = EvolutionSpec()
    output: OutputSpec = OutputSpec()
    analysis: AnalysisSpec = AnalysisSpec()

    def replace(self, **sections) -> "SimConfig":
        return dataclasses.replace(self, **sections)


SECTIONS = ("grid", "kernel", "domain", "evolution", "output", "analysis")

_KEYS = {
    "grid": {"dim": int, "n_points": int, "period": float},
    "kernel": {"alpha": float, "tau": float, "r0": float, "bump": str},
    "domain": {"lens_half_angle": float, "quad_points": int},
    "evolution": {
        "epsilon": float,
        "cfl": float,
        "t_final": float,
        "dt": float,
        "rho_floor": float,
        "rho0": str,
        "u0": str,
        "max_steps": int,
    },
    "output": {"output_every": int, "snapshot_every": int, "m_list": "ints"},
    "analysis": {
        "eps_list": "floats",
        "visc_horizon": float,
        "n_polys": int,
        "max_mode": int,
        "theta_samples": int,
        "coercivity_rho": str,
        "coercivity_m": "ints",
    },
}


def _convert(kind, raw: str, key: str):
    try:
        if kind == "ints":
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if kind == "floats":
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if kind is float:
            return float(_eval_scalar(raw))
        return kind(raw)
    except (ValueError, SyntaxError, NameError, TypeError) as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}: {exc}", key=key) from None


def _eval_scalar(raw: str):
    try:
        return float(raw)
    except ValueError:
        return float(eval(raw, {"__builtins__": {}}, {"pi": math.pi, "sqrt": math.sqrt}))


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _read_ini(text: str, source: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"{source}: parse error at line {lineno}: {exc.errors[0][1].strip() if exc.errors else exc}", lineno=lineno) from None
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        raise ConfigError(f"{source}: {exc}", lineno=lineno) from None
    values = {}
    for section in parser.sections():
        if section not in _KEYS:
            raise ConfigError(f"unknown section [{section}]", key=section)
        for key, raw in parser.items(section):
            if key not in _KEYS[section]:
                raise ConfigError(f"unknown key {section}.{key}", key=f"{section}.{key}")
            values[f"{section}.{key}"] = raw
    return values


def parse_overrides(pairs) -> dict:
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        section, _, name = key.partition(".")
        if section not in _KEYS or name not in _KEYS[section]:
            raise ConfigError(f"unknown key {key}", key=key)
        out[key] = raw.strip()
    return out


def resolve(values: dict) -> SimConfig:
    """Apply defaults and validate a flat ``section.key -> raw string`` mapping."""
    got = {k: _convert(_KEYS[k.split(".")[0]][k.split(".")[1]], v, k) for k, v in values.items()}

    def pick(section):
        return {k.split(".")[1]: v for k, v in got.items() if k.split(".")[0] == section}

    gkw = pick("grid")
    try:
        grid = Grid(gkw.get("dim", 1), gkw.get("n_points", 256), gkw.get("period", 2 * math.pi))
    except ValueError as exc:
        raise ConfigError(str(exc), key="grid") from None

    kkw = pick("kernel")
    kkw.setdefault("tau", float(grid.dim))
    kkw.setdefault("r0", grid.period / 8)
    if not 0 < kkw.get("alpha", 1.0) < 2:
        raise ConfigError("kernel.alpha: alpha must lie in (0,2)", key="kernel.alpha")
    if kkw["tau"] < 0:
        raise ConfigError("kernel.tau: tau must be >= 0", key="kernel.tau")
    if not 0 < kkw["r0"] <= grid.period / 4:
        raise ConfigError("kernel.r0: r0 must lie in (0, L/4]", key="kernel.r0")
    if kkw.get("bump", "mollifier") not in BUMP_PROFILES:
        raise ConfigError(f"kernel.bump: unknown profile {kkw['bump']!r}", key="kernel.bump")
    if kkw["r0"] < grid.spacing:
        raise ConfigError("kernel.r0: r0 must be at least one grid spacing", key="kernel.r0")
    kernel = KernelParams(**kkw)

    dkw = pick("domain")
    domain = DomainSpec(**dkw)
    if grid.dim == 2 and not 0 < domain.lens_half_angle < math.pi / 2:
        raise ConfigError("domain.lens_half_angle must lie in (0, pi/2)", key="domain.lens_half_angle")
    if domain.quad_points < 16:
        raise ConfigError("domain.quad_points must be >= 16", key="domain.quad_points")

    ekw = pick("evolution")
    if "u0" not in ekw and grid.dim == 2:
        ekw["u0"] = "0.2*sin(x); 0.2*sin(y)"
    if "rho0" not in ekw and grid.dim == 2:
        ekw["rho0"] = "1 + 0.5*cos(x)*cos(y)"
    evo = EvolutionSpec(**ekw)
    if not 0 < evo.cfl <= 1:
        raise ConfigError("evolution.cfl must lie in (0, 1]", key="evolution.cfl")
    if evo.epsilon < 0:
        raise ConfigError("evolution.epsilon must be >= 0", key="evolution.epsilon")
    if evo.t_final < 0:
        raise ConfigError("evolution.t_final must be >= 0", key="evolution.t_final")
    if evo.dt < 0:
        raise ConfigError("evolution.dt must be >= 0", key="evolution.dt")
    if not evo.rho_floor > 0:
        raise ConfigError("evolution.rho_floor must be positive", key="evolution.rho_floor")
    if len(_split_components(evo.u0)) != grid.dim:
        raise ConfigError(f"evolution.u0 needs {grid.dim} component(s)", key="evolution.u0")

    okw = pick("output")
    out = OutputSpec(**okw)
    if out.output_every < 1:
        raise ConfigError("output.output_every must be >= 1", key="output.output_every")
    if any(m < 0 for m in out.m_list):
        raise ConfigError("output.m_list entries must be >= 0", key="output.m_list")

    akw = pick("analysis")
    ana = AnalysisSpec(**akw)
    if any(e < 0 for e in ana.eps_list):
        raise ConfigError("analysis.eps_list entries must be >= 0", key="analysis.eps_list")
    return SimConfig(grid, kernel, domain, evo, out, ana)


def parse_config(path=None, overrides=None, text: str | None = None) -> SimConfig:
    """Read an INI file (or ``text``), apply ``--set`` overrides (which win), resolve."""
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    if text is not None:
        values.update(_read_ini(text, str(path or "<config>")))
    values.update(parse_overrides(overrides))
    return resolve(values)


def echo_config(cfg: SimConfig) -> str:
    """Fully resolved INI text; parsing it back yields an identical config."""
    g, k, d, e, o, a = cfg.grid, cfg.kernel, cfg.domain, cfg.evolution, cfg.output, cfg.analysis
    sections = {
        "grid": {"dim": g.dim, "n_points": g.n_points, "period": float(g.period)},
        "kernel": dataclasses.asdict(k),
        "domain": dataclasses.asdict(d),
        "evolution": dataclasses.asdict(e),
        "output": dataclasses.asdict(o),
        "analysis": dataclasses.asdict(a),
    }
    buf = io.StringIO()
    for name, items in sections.items():
        buf.write(f"[{name}]\n")
        for key, value in items.items():
            buf.write(f"{key} = {_fmt(value)}\n")
        buf.write("\n")
    return buf.getvalue()


# --- initial data ----------------------------------------------------------

_NAMESPACE = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "cosh", "sinh", "abs", "pi", "where", "minimum", "maximum")
}


def _split_components(expr: str) -> list:
    return [p.strip() for p in expr.split(";") if p.strip()]


def evaluate_expression(expr: str, grid: Grid) -> np.ndarray:
    env = dict(_NAMESPACE)
    env["x"] = grid.coords[0]
    if grid.dim == 2:
        env["y"] = grid.coords[1]
    try:
        val = eval(expr, {"__builtins__": {}}, env)
    except Exception as exc:  # noqa: BLE001 - user expression
        raise ConfigError(f"cannot evaluate {expr!r}: {exc}") from None
    return np.broadcast_to(np.asarray(val, dtype=float), grid.shape).copy()


def initial_fields(cfg: SimConfig) -> tuple:
    g = cfg.grid
    rho = Field(g, evaluate_expression(cfg.evolution.rho0, g)[None])
    u = Field(g, np.array([evaluate_expression(p, g) for p in _split_components(cfg.evolution.u0)]))
    return rho, u
