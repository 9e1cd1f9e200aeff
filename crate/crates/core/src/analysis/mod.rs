//! Quantitative checks on simulated fields: `mu`-Hölder norms, power-law
//! fits, condition checkers and the intermediate estimate.

mod chart;
mod conditions;
mod fit;
mod holder;
mod intermediate;
mod metric;
mod report;
mod suite;

pub use chart::{ChartSlice, InterfaceChart};
pub use conditions::{
    check_degenerate_operator_hypotheses, check_initial_conditions, check_matrix_pinch,
    check_transversality, three_point_curvature, CoefficientPoint, InitialCheckOptions,
    OperatorCheckOptions, TransversalityOptions,
};
pub use fit::{fit_line, fit_power_law, ExponentFit, MIN_FIT_SAMPLES};
pub use holder::{
    holder_norm_c2alpha_mu, holder_norm_higher, sample_pairs, term_names, DerivedField,
    DifferenceSteps, FnField, HigherComponent, HigherHolderReport, HolderOptions, HolderReport,
    HolderTerm, MuCylinder, MuField, MuJet, DEFAULT_ALPHA, DEFAULT_PAIRS,
};
pub use intermediate::{
    derivative_stencil, intermediate_estimate_sup, IntermediateEstimate, IntermediateOptions,
};
pub use metric::{mu_distance, MuPoint};
pub use report::{
    Check, ConditionReport, HolderEntry, NamedFit, ResidualSummary, VerificationReport,
};
pub use suite::{
    collar_residuals, dual_fits, exponent_fit, holder_report, interface_distance_samples,
    interface_kinematics, pinch_and_drift, pressure_anchor, verify_trajectory, Analysis,
    SuiteOptions,
};
