//! Numerical checks of the estimates behind the solver: each check produces
//! [`EstimateReport`] rows `lhs <= rhs` with an explicit tolerance.

mod derivative;
mod psiest;
mod recovery;
mod report;
mod suites;
mod trace;

pub use derivative::{
    derivative_bound_suite, derivative_bounds, hessian_samples, kernel_gradient_l1, library_integrands,
    radial_sweep, trailing_slope, HESSIAN_SAMPLES, SWEEP_DIRS, SWEEP_RADII,
};
pub use psiest::{
    check_psiest, lshape_demonstration, psiest_suite, psiest_tolerance, standard_scenarios, standard_weights,
    PsiestScenario, TOL_REL,
};
pub use recovery::{
    discrete_target, recovery_for_bv, recovery_for_field, recovery_sequence, recovery_suite, standard_epsilons,
    FnSampler, PointSampler, RecoveryOptions, RecoveryReport, RecoveryStage,
};
pub use report::{write_reports_csv, EstimateReport};
pub use suites::{
    adjointness_defect, continuation_bound_reports, dsuest_suite, extracted_jump, flow_suite, gamma_gaps,
    gamma_reports, gamma_suite, limit_energy, minimality_margin, random_piecewise, step_jump_height,
    step_minimizer, structure_suite,
};
pub use trace::{random_instance, trace_acbc, trace_scale, trace_suite};
