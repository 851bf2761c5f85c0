"""Numerical laboratory for projected Gaussian state ensembles and equilibration bounds.

The package has three layers: samplers for the Gaussian, adjusted, and
projected ensembles attached to a density matrix (`sampling`), exact
spectral and moment machinery (`spectra`, `moments`, `dynamics`), and a
scenario driver that verifies every implemented bound by Monte Carlo and
writes deterministic JSON reports (`scenarios`, `runner`, `cli`).
"""

from .dynamics import (
    BoundInputs,
    MomentBounds,
    bound_inputs,
    concentration_tail_bound,
    diagonal_ensemble_expectation,
    equilibration_bound_finite_time,
    equilibration_bound_infinite_time,
    evolve,
    expectation_curve,
    expectation_curve_variance,
    expectation_curve_variance_infinite,
    finite_time_branches,
    gap_phase_matrix,
    infinite_time_average,
    mixture_curve_deviation,
    mixture_expectation_curve,
    moment_bounds,
    phase_matrix_norm_bound,
)
from .linalg import hermitian_eigendecomposition, operator_norm, trace_norm
from .moments import (
    KIntegralTable,
    VarianceReport,
    gap_expectation,
    gap_variance_bound,
    gap_variance_exact,
    k_integral,
    k_pair_integral,
    k_product_bound,
    k_table,
)
from .runner import CheckRecord, Report, run_scenario, verify_concentration, verify_equilibration
from .sampling import (
    DensityMatrix,
    derive_rng,
    empirical_density_matrix,
    sample_gap,
    sample_gap_resampling_oracle,
    sample_gaussian,
)
from .scenarios import ConfigError, Scenario, ScenarioConfig, build_scenario, load_scenario
from .spectra import (
    ContributingSet,
    SpectralDecomposition,
    SpectralStats,
    contributing_set,
    gap_count,
    group_eigenvalues,
    spectral_stats,
)

__version__ = "0.1.0"

__all__ = [
    "BoundInputs",
    "CheckRecord",
    "ConfigError",
    "ContributingSet",
    "DensityMatrix",
    "KIntegralTable",
    "MomentBounds",
    "Report",
    "Scenario",
    "ScenarioConfig",
    "SpectralDecomposition",
    "SpectralStats",
    "VarianceReport",
    "bound_inputs",
    "build_scenario",
    "concentration_tail_bound",
    "contributing_set",
    "derive_rng",
    "diagonal_ensemble_expectation",
    "empirical_density_matrix",
    "equilibration_bound_finite_time",
    "equilibration_bound_infinite_time",
    "evolve",
    "expectation_curve",
    "expectation_curve_variance",
    "expectation_curve_variance_infinite",
    "finite_time_branches",
    "gap_count",
    "gap_expectation",
    "gap_phase_matrix",
    "gap_variance_bound",
    "gap_variance_exact",
    "group_eigenvalues",
    "hermitian_eigendecomposition",
    "infinite_time_average",
    "k_integral",
    "k_pair_integral",
    "k_product_bound",
    "k_table",
    "load_scenario",
    "mixture_curve_deviation",
    "mixture_expectation_curve",
    "moment_bounds",
    "operator_norm",
    "phase_matrix_norm_bound",
    "run_scenario",
    "sample_gap",
    "sample_gap_resampling_oracle",
    "sample_gaussian",
    "spectral_stats",
    "trace_norm",
    "verify_concentration",
    "verify_equilibration",
    "__version__",
]
