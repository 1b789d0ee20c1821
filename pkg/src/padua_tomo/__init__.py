"""Quasi-probability interpolation at Padua points and direct density-matrix estimation."""

__version__ = "0.1.0"

from .estimator import Estimate, EstimateResult, estimate_with_errors, rho_element, rho_matrix, sigma_bound
from .experiments import (
    StudyConfig,
    StudyResult,
    convergence_study,
    equidistant_comparison_study,
    noise_study,
    sample_state,
    threshold_equidistant,
    threshold_padua,
    threshold_study,
)
from .padua import (
    ChebCoeffs,
    MeasurementRecord,
    PhaseGrid,
    equidistant_grid,
    eval_cheb,
    eval_grid,
    interpolate,
    interpolate_padua,
    interpolate_tensor,
    lebesgue_estimate,
    padua_points,
)
from .polar import PolarPoly, cheb_to_monomial_truncated, monomial_to_polar, polar_from_cheb, polar_from_record
from .states import (
    DensityMatrix,
    FockState,
    PhasePoint,
    coherent_state,
    fock_state,
    q_function,
    test_state,
    wigner_function,
)
