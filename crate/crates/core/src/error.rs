use num_complex::Complex64;
use thiserror::Error;

/// Every failure mode the library reports. `kind` gives the stable
/// machine-readable name; `class` buckets the kinds for exit-code mapping.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("input rejected: {0}")]
    InvalidInput(String),

    #[error("polynomial degree too low for this operation: {0}")]
    DegreeTooLow(String),

    #[error("numerator and denominator share a root near {root}")]
    NotCoprime { root: Complex64 },

    #[error("iteration cap reached before convergence: {0}")]
    NonConvergence(String),

    #[error("evaluation at a pole: z = {z}")]
    PoleHit { z: Complex64 },

    #[error("Moebius transform is singular (|ad - bc| = {det_abs:.3e})")]
    SingularMoebius { det_abs: f64 },

    #[error("Cauchy transform evaluated within {tol:.1e} of the atom at {atom}")]
    AtomHit { atom: Complex64, tol: f64 },

    #[error("point {z} sits inside the quadrature validity zone of a curve")]
    TooCloseToSupport { z: Complex64 },

    #[error("sample {x} is within tolerance of a critical value")]
    CriticalValue { x: Complex64 },

    #[error("field undefined at fiber point {w}")]
    UndefinedAtPreimage { w: Complex64 },

    #[error("fiber contains infinity and the field does not decay like z^-2")]
    InfinitePreimageUnhandled,

    #[error("every sample was rejected: {0}")]
    AllSamplesInvalid(String),

    #[error("field magnitude at {x} is below the quotient floor")]
    ZeroDenominator { x: Complex64 },

    #[error("field undefined at {z}")]
    Undefined { z: Complex64 },

    #[error("point {z} is outside the map's domain")]
    OutsideDomain { z: Complex64 },

    #[error("quadrature refinement did not converge: {0}")]
    QuadratureFailure(String),

    #[error("{c} is not a critical point (|f'(c)| = {deriv_abs:.3e})")]
    NotCritical { c: Complex64, deriv_abs: f64 },

    #[error("critical point is degenerate: |f''(c)| = {second_abs:.3e}")]
    DegenerateCritical { second_abs: f64 },

    #[error("annulus model rejected: {0}")]
    InvalidModel(String),

    #[error("chart inversion failed at z = {z}")]
    InversionFailure { z: Complex64 },

    #[error("chart derivative vanishes on a sampled circle (|psi'| = {min_abs:.3e})")]
    DerivativeVanishes { min_abs: f64 },

    #[error("boundary-integral ladder is unbounded; refusing to build the measure")]
    HardyUnbounded,
}

/// Exit-code bucket for a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input: files, flags, schemas.
    Input,
    /// The computation is well-posed but the request leaves the domain.
    Domain,
    /// An iterative scheme failed to settle.
    Convergence,
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::DegreeTooLow(_) => "DegreeTooLow",
            Error::NotCoprime { .. } => "NotCoprime",
            Error::NonConvergence(_) => "NonConvergence",
            Error::PoleHit { .. } => "PoleHit",
            Error::SingularMoebius { .. } => "SingularMoebius",
            Error::AtomHit { .. } => "AtomHit",
            Error::TooCloseToSupport { .. } => "TooCloseToSupport",
            Error::CriticalValue { .. } => "CriticalValue",
            Error::UndefinedAtPreimage { .. } => "UndefinedAtPreimage",
            Error::InfinitePreimageUnhandled => "InfinitePreimageUnhandled",
            Error::AllSamplesInvalid(_) => "AllSamplesInvalid",
            Error::ZeroDenominator { .. } => "ZeroDenominator",
            Error::Undefined { .. } => "Undefined",
            Error::OutsideDomain { .. } => "OutsideDomain",
            Error::QuadratureFailure(_) => "QuadratureFailure",
            Error::NotCritical { .. } => "NotCritical",
            Error::DegenerateCritical { .. } => "DegenerateCritical",
            Error::InvalidModel(_) => "InvalidModel",
            Error::InversionFailure { .. } => "InversionFailure",
            Error::DerivativeVanishes { .. } => "DerivativeVanishes",
            Error::HardyUnbounded => "HardyUnbounded",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_) => ErrorClass::Input,
            Error::NonConvergence(_)
            | Error::QuadratureFailure(_)
            | Error::InversionFailure { .. } => ErrorClass::Convergence,
            _ => ErrorClass::Domain,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
