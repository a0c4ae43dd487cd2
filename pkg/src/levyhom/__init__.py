"""Numerical homogenization of symmetric jump processes with densities ``a(h/delta) nu(h)``."""
from .errors import (DomainError, ExponentOutOfRange, LevyHomError, NormalizationMismatch,
                     NotLevyMeasureError, QuadratureFailure, TableBuildFailure, UnsupportedDimension,
                     ValidationError)
from .exponent import ExponentSpec, exponent_convergence_scan, psi, psi_homogenized
from .forms import (FormValue, PairDomain, TestFunction, corollary2_check, form_direct, form_spectral,
                    lp_bound_check, m1_necessary_check, mosco_m2_check, spectral_constant,
                    spectral_identity_check, vague_convergence_check, weak_lp_check)
from .measure import (INCONCLUSIVE, LEVY, NOT_LEVY, IntegrabilityReport, LevyDensitySpec, ModulatedMeasure,
                      check_levy_integrability, example1_constants, example1_matrix, modulated_density)
from .periodic import UNBOUNDED, PeriodicCoefficient, eval_periodic, mean_value, shifted_coefficient
from .quadrature import (QuadratureConfig, QuadratureOutcome, integrate_singular, periodic_tail_sum,
                         periodic_tail_sum_with_error)
from .report import SCHEMA_VERSION, ConvergenceReport
from .simulate import (CFCheckResult, IncrementSample, SimulationPlan, empirical_cf,
                       fdd_convergence_experiment, rescaling_identity_check, sample_increments)

__version__ = "0.1.0"

__all__ = [
    "CFCheckResult", "ConvergenceReport", "DomainError", "ExponentOutOfRange", "ExponentSpec", "FormValue",
    "INCONCLUSIVE", "IncrementSample", "IntegrabilityReport", "LEVY", "LevyDensitySpec", "LevyHomError",
    "ModulatedMeasure", "NOT_LEVY", "NormalizationMismatch", "NotLevyMeasureError", "PairDomain",
    "PeriodicCoefficient", "QuadratureConfig", "QuadratureFailure", "QuadratureOutcome", "SCHEMA_VERSION",
    "SimulationPlan", "TableBuildFailure", "TestFunction", "UNBOUNDED", "UnsupportedDimension",
    "ValidationError", "check_levy_integrability", "corollary2_check", "empirical_cf", "eval_periodic",
    "example1_constants", "example1_matrix", "exponent_convergence_scan", "fdd_convergence_experiment",
    "form_direct", "form_spectral", "integrate_singular", "lp_bound_check", "m1_necessary_check",
    "mean_value", "modulated_density", "mosco_m2_check", "periodic_tail_sum", "periodic_tail_sum_with_error",
    "psi", "psi_homogenized", "rescaling_identity_check", "sample_increments", "shifted_coefficient",
    "spectral_constant", "spectral_identity_check", "vague_convergence_check", "weak_lp_check",
]
