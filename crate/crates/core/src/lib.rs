//! Nehari extension and restricted Hankel problems for rational symbols
//! given by state-space realizations.

pub mod analysis;
pub mod error;
pub mod hankel;
pub mod json;
pub mod linalg;
pub mod realization;
pub mod solver;
pub mod subspace;

pub use error::{Error, ErrorClass, Result};
pub use hankel::{check_conditions, hankel_norm, rate_predictor, HankelReport, RatePredictor};
pub use linalg::{CMat, C64};
pub use realization::{gramians, GramianPair, Realization};
pub use subspace::{build_ladder, restricted_norm, w_on_basis, LadderBasis};
pub use solver::{
    aak_quotient_full, aak_quotient_restricted, lambda_matrix, solve_full_nehari, solve_restricted,
    AakQuotient, AnalyticRealization, CentralSolution, SolutionKind,
};
pub use analysis::{convergence_sweep, supnorm_on_circle, SweepOptions, SweepReport};
