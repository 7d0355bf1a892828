"""Simulator and verification suite for the topological Euler-alignment model."""

__version__ = "0.1.0"

from .config import SimConfig, echo_config, initial_fields, parse_config
from .diagnostics import DiagnosticsRecord, SimState
from .domain import DensityAccumulator, DomainShape, make_domain_shape, omega_mass, topo_distance
from .errors import (
    BlowUpError,
    ConfigError,
    DegeneratePairError,
    SingularPointError,
    StaleCacheError,
    TopoflockError,
    UnsupportedDimensionError,
    VacuumError,
)
from .evolution import RunResult, Solver, run, step
from .grid import Field, Grid, fractional_laplacian, sobolev_seminorm, spectral_derivative
from .kernel import KernelCache, KernelParams, build_kernel_cache, phi
from .operator import apply_C_phi, apply_L_phi, dirichlet_form, make_stencil

__all__ = [name for name in dir() if not name.startswith("_")]
