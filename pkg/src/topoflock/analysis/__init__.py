"""Verification harness: multiplier oracle, coercivity, appendix lemmas, viscosity study."""

from .appendix import (
    appendix_checks,
    ds_constant,
    ds_fourier_multiplier,
    ds_seminorm,
    ds_symbol,
    second_difference_bound,
    second_difference_field,
    second_difference_symbol,
    theta_directions,
)
from .coercivity import (
    MultiplierOracle,
    basic_coercivity_check,
    high_order_coercivity_check,
    metric_reduction_check,
    multiplier_oracle,
    scaling_check,
    single_mode_family,
)
from .families import random_trig_polynomials, single_mode
from .report import FAIL, INFO, PASS, WARN, CheckReport, CoercivityReport, write_reports
from .viscosity import ViscosityStudy, fit_order, heat_only_distance, study_report, viscosity_convergence_study

__all__ = [name for name in dir() if not name.startswith("_")]
