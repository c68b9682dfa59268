//! Numerical laboratory for the pushforward operator of rational maps.
//!
//! The library evaluates the weighted preimage-sum operator
//! `(T_f g)(x) = sum over f(w) = x of g(w) / f'(w)^2` on concretely
//! representable fields (Cauchy transforms of discrete and curve-supported
//! measures, rotation-annulus model fields) and packages the diagnostics
//! around it: fixed-point residuals, multiplier and line-field checks,
//! invariant region masses, critical-orbit summability, parameter-derivative
//! limits, and boundary-measure reconstruction on annuli.

pub mod critdiag;
pub mod error;
pub mod hermanmodel;
pub mod measure;
pub mod poly;
pub mod quad;
pub mod ratmap;
pub mod sample;
pub mod spec;
pub mod transfer;
pub mod transversal;
pub mod tolerances;

pub use error::{Error, ErrorClass, Result};
