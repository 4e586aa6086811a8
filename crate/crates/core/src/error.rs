use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes. The CLI maps these onto its exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or out-of-contract input.
    Input,
    /// A structural hypothesis (minimality, uniqueness condition) does not hold.
    Condition,
    /// A numerical guard tripped (singular or ill-conditioned operator).
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("state matrix is not stable (spectral radius {radius:.6} >= 1)")]
    NotStable { radius: f64 },

    #[error("root {root} does not lie strictly inside the unit disk")]
    RootOutsideDisk { root: Complex64 },

    #[error("resolvent is singular at lambda = {lambda} (condition {cond:.3e})")]
    SingularResolvent { lambda: Complex64, cond: f64 },

    #[error("Stein solve failed: {0}")]
    Stein(String),

    #[error("realization is not minimal: {0}")]
    NonMinimal(String),

    #[error("Hankel operator is (numerically) zero: norm {0:.3e}")]
    DegenerateHankel(f64),

    #[error("subspace dimension {m} exceeds the cap {cap}; reduce k")]
    BasisTooLarge { m: usize, cap: usize },

    #[error(
        "defect operator D° is singular on the subspace (min eigenvalue {min_eig:.3e}): \
         a maximizing vector of the restricted Hankel operator lies in S·H²"
    )]
    DefectSingular { min_eig: f64 },

    #[error("small-k guard: Delta_k is singular (condition {cond:.3e}) for k = {k}")]
    DeltaSingular { k: usize, cond: f64 },

    #[error("uniqueness condition fails: {0}")]
    ConditionFailure(String),

    #[error("matrix square-root argument is indefinite (eigenvalue {0:.3e})")]
    Indefinite(f64),

    #[error("maximizing vector vanishes on the unit circle near t = {t:.6}")]
    PsiZeroOnCircle { t: f64 },

    #[error("M(lambda) is singular at lambda = {lambda} (condition {cond:.3e})")]
    SingularDenominator { lambda: Complex64, cond: f64 },

    #[error("inconsistent state: {0}")]
    Inconsistent(String),

    #[error("evaluation failed at lambda = {lambda}: {source}")]
    AtPoint {
        lambda: Complex64,
        #[source]
        source: Box<Error>,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Dimension(_)
            | Error::InvalidInput(_)
            | Error::NotStable { .. }
            | Error::RootOutsideDisk { .. }
            | Error::BasisTooLarge { .. }
            | Error::Json(_) => ErrorClass::Input,
            Error::NonMinimal(_)
            | Error::DegenerateHankel(_)
            | Error::ConditionFailure(_)
            | Error::PsiZeroOnCircle { .. } => ErrorClass::Condition,
            Error::AtPoint { source, .. } => source.class(),
            _ => ErrorClass::Numerical,
        }
    }

    pub(crate) fn at(self, lambda: Complex64) -> Error {
        match self {
            e @ Error::AtPoint { .. } => e,
            e => Error::AtPoint {
                lambda,
                source: Box::new(e),
            },
        }
    }
}
