//! Numerical verification machinery: singular-perturbation fast variables
//! and their decay, the quasi-steady compensation and its sector condition,
//! the reduced-model identity, and the robust-maneuver checks.

pub mod fast;
pub mod maneuver;

pub use fast::{
    fast_decay_fit, fast_variables, gamma_sector_check, quasi_steady_ustar,
    reduced_model_residual, DecayFit, FastVars, SectorReport, UstarReport, WpMismatchContext,
};
pub use maneuver::{
    build_coverage_set, check_approach_maneuver, check_single_maneuver,
    check_transition_maneuver, nominal_actual_deviation, ManeuverMetric, ManeuverReport,
    ManeuverVerdict,
};
