//! Numerical tolerances shared across the library.
//!
//! Every threshold that decides success, failure, or a verdict lives here so
//! the choices are auditable in one place. Reports echo the constants they
//! used, which keeps command output self-describing.

/// Scaled residual bound for a converged simple root:
/// |p(z)| <= RESIDUAL_TOL * max|coeff| * max(1, |z|)^deg.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;

/// Iteration cap for the simultaneous root refinement.
pub const ROOT_ITERATION_CAP: usize = 200;

/// Roots closer than CLUSTER_RADIUS_FACTOR * max(1, |root|) merge into one
/// root whose multiplicity is the cluster size.
pub const CLUSTER_RADIUS_FACTOR: f64 = 1e-7;

/// A point z counts as a pole when |q(z)| <= POLE_TOL * max|q coeffs| * max(1, |z|)^deg(q).
pub const POLE_TOL: f64 = 1e-13;

/// Numerator and denominator must not share a root within this distance.
pub const COPRIME_TOL: f64 = 1e-9;

/// Orbits are truncated once a point leaves this disc.
pub const DEFAULT_ESCAPE_RADIUS: f64 = 1e6;

/// A Moebius transform with |ad - bc| at or below this is rejected as singular.
pub const MOEBIUS_DET_TOL: f64 = 1e-12;

/// Leading fiber-polynomial coefficients below this relative size are treated
/// as exact cancellation, i.e. a preimage at infinity.
pub const FIBER_CANCEL_RTOL: f64 = 1e-12;

/// Cauchy transform of a discrete measure is undefined within this distance
/// of an atom.
pub const ATOM_HIT_TOL: f64 = 1e-12;

/// Curve-measure transforms are trusted only at points farther than this many
/// node spacings from every curve.
pub const VALIDITY_ZONE_SPACINGS: f64 = 5.0;

/// Operator samples are rejected when some fiber point w has
/// |f'(w)| < CRITICAL_VALUE_TOL * (1 + |w|).
pub const CRITICAL_VALUE_TOL: f64 = 1e-6;

/// Fixed-point verdict: FIXED when max residual <= FIXED_TOL * (1 + sup|H|).
pub const FIXED_TOL: f64 = 1e-8;

/// NOT_FIXED when some residual exceeds NOT_FIXED_FACTOR * FIXED_TOL, scaled
/// the same way; the band between the two is INCONCLUSIVE.
pub const NOT_FIXED_FACTOR: f64 = 1e3;

/// Tolerated negative slack in the triangle-gap diagnostic.
pub const TRIANGLE_SLACK: f64 = 1e-10;

/// |H(x)| at or below this rejects the multiplier quotient as 0/0.
pub const MULTIPLIER_ZERO_TOL: f64 = 1e-12;

/// Relative target for the region-mass quadrature refinement.
pub const MASS_QUADRATURE_RTOL: f64 = 1e-8;

/// A critical point must satisfy |f'(c)| <= CRITICAL_POINT_TOL * (1 + |c|).
pub const CRITICAL_POINT_TOL: f64 = 1e-8;

/// Summable evidence: the last ten terms add at most this fraction of the
/// final partial sum.
pub const SUMMABLE_DECADE_RTOL: f64 = 1e-10;

/// Divergent evidence: every term in the last ten stays at or above this.
pub const DIVERGENT_TERM_FLOOR: f64 = 1e-3;

/// Parameter-derivative limits settle when this many consecutive terms move
/// the estimate by less than CONVERGENCE_RTOL relatively.
pub const CONVERGENCE_WINDOW: usize = 5;
pub const CONVERGENCE_RTOL: f64 = 1e-9;

/// A settled limit counts as nonzero only with this margin over the
/// convergence tolerance.
pub const NONZERO_MARGIN_FACTOR: f64 = 10.0;

/// Singular values above RANK_RTOL * sigma_max count toward the rank.
pub const RANK_RTOL: f64 = 1e-6;

/// Tracking a critical point requires |f''(c)| > DEGENERATE_CRITICAL_TOL * (1 + |c|).
pub const DEGENERATE_CRITICAL_TOL: f64 = 1e-8;

/// Rotation numbers are accepted as unimodular within this.
pub const UNIMODULAR_TOL: f64 = 1e-12;

/// An annulus model needs outer radius > 1 + MIN_ANNULUS_GAP.
pub const MIN_ANNULUS_GAP: f64 = 1e-6;

/// Resonant Laurent exponents satisfy |lambda^(n+2) - 1| <= EIGENSPACE_TOL.
pub const EIGENSPACE_TOL: f64 = 1e-10;

/// Newton inversion of the model chart targets this scaled residual.
pub const INVERSION_TOL: f64 = 1e-12;

/// All boundary-measure verification checks run at this tolerance, except
/// the linearity-in-scale check which runs at SCALING_TOL.
pub const VERIFY_TOL: f64 = 1e-7;
pub const SCALING_TOL: f64 = 1e-12;

/// Boundedness of the boundary-integral ladder: fitted growth exponents must
/// stay below HARDY_EXPONENT_BOUND and the last rung must change the integral
/// by less than HARDY_INCREMENT_BOUND relatively.
pub const HARDY_EXPONENT_BOUND: f64 = 0.05;
pub const HARDY_INCREMENT_BOUND: f64 = 0.01;
