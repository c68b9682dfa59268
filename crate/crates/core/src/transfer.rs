//! The pushforward operator T_f g(x) = sum over f(w) = x of g(w)/f'(w)^2,
//! with the diagnostics built on it: fixed-point residuals, the multiplier
//! relation, the invariant line-field defect, and the invariant mass
//! functional over annular sectors.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{CurveMeasure, DiscreteMeasure};
use crate::quad::legendre_rule_on;
use crate::ratmap::RationalMap;
use crate::tolerances::{
    CRITICAL_VALUE_TOL, FIXED_TOL, MASS_QUADRATURE_RTOL, MULTIPLIER_ZERO_TOL, NOT_FIXED_FACTOR,
};

const TAU: f64 = std::f64::consts::TAU;

/// Where a field lives; informational except that the operator consults the
/// decay declaration when a fiber reaches infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportHint {
    Atoms,
    Curves,
    Annulus { r_inner: f64, r_outer: f64 },
    WholePlane,
}

impl fmt::Display for SupportHint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupportHint::Atoms => write!(f, "atoms"),
            SupportHint::Curves => write!(f, "curves"),
            SupportHint::Annulus { r_inner, r_outer } => {
                write!(f, "annulus {r_inner}..{r_outer}")
            }
            SupportHint::WholePlane => write!(f, "whole-plane"),
        }
    }
}

/// A pointwise-evaluable complex field. Evaluation is partial: the closure
/// signals errors on its declared singular set and nowhere else.
#[derive(Clone)]
pub struct EvaluableField {
    eval: Arc<dyn Fn(Complex64) -> Result<Complex64> + Send + Sync>,
    support: SupportHint,
    vanishes_like_inverse_square: bool,
    label: String,
}

impl fmt::Debug for EvaluableField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvaluableField")
            .field("label", &self.label)
            .field("support", &self.support)
            .field("vanishes_like_inverse_square", &self.vanishes_like_inverse_square)
            .finish()
    }
}

impl EvaluableField {
    pub fn new(
        label: impl Into<String>,
        support: SupportHint,
        vanishes_like_inverse_square: bool,
        eval: impl Fn(Complex64) -> Result<Complex64> + Send + Sync + 'static,
    ) -> Self {
        EvaluableField {
            eval: Arc::new(eval),
            support,
            vanishes_like_inverse_square,
            label: label.into(),
        }
    }

    /// g = 1 everywhere. Does not decay at infinity.
    pub fn constant_one() -> Self {
        EvaluableField::new("one", SupportHint::WholePlane, false, |_| Ok(Complex64::new(1.0, 0.0)))
    }

    /// g = 0 everywhere; a fixed point of every pushforward.
    pub fn zero() -> Self {
        EvaluableField::new("zero", SupportHint::WholePlane, true, |_| Ok(Complex64::new(0.0, 0.0)))
    }

    /// g(w) = w^-2, undefined at the origin.
    pub fn inverse_square() -> Self {
        EvaluableField::new("w^-2", SupportHint::WholePlane, true, |w| {
            if w.norm() == 0.0 {
                Err(Error::Undefined { z: w })
            } else {
                Ok(1.0 / (w * w))
            }
        })
    }

    /// The Cauchy transform of an atomic measure. It decays like z^-2
    /// exactly when the total mass A vanishes.
    pub fn from_discrete_measure(mu: &DiscreteMeasure) -> Self {
        let decays =
            mu.moments().a.norm() <= 1e-12 * mu.total_variation().max(1.0);
        let owned = mu.clone();
        EvaluableField::new("measure cauchy transform", SupportHint::Atoms, decays, move |z| {
            owned.cauchy(z)
        })
    }

    /// The Cauchy transform of a curve measure, with the same decay rule.
    pub fn from_curve_measure(nu: &CurveMeasure) -> Self {
        let variation: f64 = nu
            .curves
            .iter()
            .flat_map(|c| c.density.iter().zip(&c.tangents).map(|(g, dz)| g.norm() * dz.norm()))
            .sum();
        let decays = nu.moments().a.norm() <= 1e-12 * variation.max(1.0);
        let owned = nu.clone();
        EvaluableField::new("curve cauchy transform", SupportHint::Curves, decays, move |z| {
            owned.cauchy(z)
        })
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        (self.eval)(z)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support_hint(&self) -> SupportHint {
        self.support
    }

    pub fn vanishes_like_inverse_square(&self) -> bool {
        self.vanishes_like_inverse_square
    }
}

/// One preimage of x: the point, its multiplicity in the fiber, and f' there.
#[derive(Debug, Clone, Copy)]
pub struct FiberPoint {
    pub point: Complex64,
    pub multiplicity: usize,
    pub derivative: Complex64,
}

#[derive(Debug, Clone)]
pub struct FiberData {
    pub points: Vec<FiberPoint>,
    pub infinity_multiplicity: usize,
}

/// A map whose fibers can be enumerated with derivatives. Rational maps
/// implement it by root finding; conjugated model maps implement it with a
/// single analytic branch.
pub trait FiberedMap: Sync {
    fn forward(&self, z: Complex64) -> Result<Complex64>;
    fn forward_derivative(&self, z: Complex64) -> Result<Complex64>;
    fn fiber_data(&self, x: Complex64) -> Result<FiberData>;
}

impl FiberedMap for RationalMap {
    fn forward(&self, z: Complex64) -> Result<Complex64> {
        self.eval(z)
    }

    fn forward_derivative(&self, z: Complex64) -> Result<Complex64> {
        self.derivative_at(z)
    }

    fn fiber_data(&self, x: Complex64) -> Result<FiberData> {
        let fiber = self.preimages(x)?;
        let mut points = Vec::with_capacity(fiber.finite.roots.len());
        for (&w, &m) in fiber.finite.roots.iter().zip(&fiber.finite.multiplicities) {
            points.push(FiberPoint { point: w, multiplicity: m, derivative: self.derivative_at(w)? });
        }
        Ok(FiberData { points, infinity_multiplicity: fiber.infinity_multiplicity })
    }
}

/// The operator value together with its term list and the triangle majorant
/// sum of |g(w)|/|f'(w)|^2.
#[derive(Debug, Clone)]
pub struct ApplyBreakdown {
    pub value: Complex64,
    pub terms: Vec<Complex64>,
    pub majorant: f64,
}

/// T_f g(x). Rejects x whose fiber touches a critical point (the 1/f'^2
/// weight is then meaningless) and fibers through infinity unless g declares
/// inverse-square decay, in which case that branch contributes zero.
pub fn apply(f: &impl FiberedMap, g: &EvaluableField, x: Complex64) -> Result<Complex64> {
    Ok(apply_detailed(f, g, x)?.value)
}

pub fn apply_detailed(
    f: &impl FiberedMap,
    g: &EvaluableField,
    x: Complex64,
) -> Result<ApplyBreakdown> {
    let fiber = f.fiber_data(x)?;
    if fiber.infinity_multiplicity > 0 && !g.vanishes_like_inverse_square {
        return Err(Error::InfinitePreimageUnhandled);
    }
    for p in &fiber.points {
        if p.multiplicity >= 2 || p.derivative.norm() < CRITICAL_VALUE_TOL * (1.0 + p.point.norm())
        {
            return Err(Error::CriticalValue { x });
        }
    }
    let mut value = Complex64::new(0.0, 0.0);
    let mut terms = Vec::with_capacity(fiber.points.len());
    let mut majorant = 0.0;
    for p in &fiber.points {
        let gw = g.eval(p.point).map_err(|_| Error::UndefinedAtPreimage { w: p.point })?;
        let term = gw / (p.derivative * p.derivative);
        terms.push(term);
        majorant += term.norm();
        value += term;
    }
    Ok(ApplyBreakdown { value, terms, majorant })
}

fn summarize_drops(dropped: &[(Complex64, &'static str)]) -> String {
    let mut kinds: Vec<&str> = dropped.iter().map(|&(_, k)| k).collect();
    kinds.sort_unstable();
    kinds.dedup();
    format!("{} samples dropped ({})", dropped.len(), kinds.join(", "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedVerdict {
    Fixed,
    NotFixed,
    Inconclusive,
}

impl FixedVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            FixedVerdict::Fixed => "FIXED",
            FixedVerdict::NotFixed => "NOT_FIXED",
            FixedVerdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Per-sample residuals |T_f H(z) - H(z)| and triangle gaps
/// (majorant - |T_f H(z)|, nonnegative up to rounding; zero characterizes
/// alignment of the fiber terms). Samples on critical values or singular
/// sets are dropped and listed with the error kind that removed them.
#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub sample_points: Vec<Complex64>,
    pub residuals: Vec<f64>,
    pub triangle_gaps: Vec<f64>,
    pub dropped: Vec<(Complex64, &'static str)>,
    pub max_residual: f64,
    pub scale: f64,
    pub verdict: FixedVerdict,
}

pub fn fixed_point_residual(
    f: &impl FiberedMap,
    h: &EvaluableField,
    samples: &[Complex64],
) -> Result<FixedPointReport> {
    enum Outcome {
        Kept { z: Complex64, residual: f64, gap: f64, h_abs: f64 },
        Dropped { z: Complex64, kind: &'static str },
    }
    let outcomes: Vec<Outcome> = samples
        .par_iter()
        .map(|&z| {
            let hz = match h.eval(z) {
                Ok(v) => v,
                Err(e) => return Outcome::Dropped { z, kind: e.kind() },
            };
            match apply_detailed(f, h, z) {
                Ok(bd) => Outcome::Kept {
                    z,
                    residual: (bd.value - hz).norm(),
                    gap: bd.majorant - bd.value.norm(),
                    h_abs: hz.norm(),
                },
                Err(e) => Outcome::Dropped { z, kind: e.kind() },
            }
        })
        .collect();

    let mut report = FixedPointReport {
        sample_points: Vec::new(),
        residuals: Vec::new(),
        triangle_gaps: Vec::new(),
        dropped: Vec::new(),
        max_residual: 0.0,
        scale: 1.0,
        verdict: FixedVerdict::Inconclusive,
    };
    let mut max_h = 0.0f64;
    for o in outcomes {
        match o {
            Outcome::Kept { z, residual, gap, h_abs } => {
                report.sample_points.push(z);
                report.residuals.push(residual);
                report.triangle_gaps.push(gap);
                max_h = max_h.max(h_abs);
            }
            Outcome::Dropped { z, kind } => report.dropped.push((z, kind)),
        }
    }
    if report.sample_points.is_empty() {
        return Err(Error::AllSamplesInvalid(summarize_drops(&report.dropped)));
    }
    report.scale = 1.0 + max_h;
    report.max_residual = report.residuals.iter().fold(0.0, |a, &b| a.max(b));
    report.verdict = if report.max_residual <= FIXED_TOL * report.scale {
        FixedVerdict::Fixed
    } else if report.max_residual > NOT_FIXED_FACTOR * FIXED_TOL * report.scale {
        FixedVerdict::NotFixed
    } else {
        FixedVerdict::Inconclusive
    };
    Ok(report)
}

/// L_x = H(f(x)) f'(x)^2 / H(x) and how far it is from being real.
#[derive(Debug, Clone, Copy)]
pub struct MultiplierReport {
    pub value: Complex64,
    pub realness_deviation: f64,
}

pub fn multiplier_relation(
    f: &impl FiberedMap,
    h: &EvaluableField,
    x: Complex64,
) -> Result<MultiplierReport> {
    let hx = h.eval(x)?;
    if hx.norm() <= MULTIPLIER_ZERO_TOL {
        return Err(Error::ZeroDenominator { x });
    }
    let d = f.forward_derivative(x)?;
    if d.norm() <= 1e-12 * (1.0 + x.norm()) {
        return Err(Error::DerivativeVanishes { min_abs: d.norm() });
    }
    let fx = f.forward(x)?;
    let hfx = h.eval(fx)?;
    let value = hfx * d * d / hx;
    let realness_deviation = if value.norm() > 0.0 { value.im.abs() / value.norm() } else { 0.0 };
    Ok(MultiplierReport { value, realness_deviation })
}

/// Defects |l(f(z)) conj(f'(z))/f'(z) - l(z)| of the unit line field
/// l = conj(H)/|H| at the kept samples.
#[derive(Debug, Clone)]
pub struct LineFieldReport {
    pub defects: Vec<(Complex64, f64)>,
    pub dropped: Vec<(Complex64, &'static str)>,
    pub max_defect: f64,
}

pub fn line_field_defect(
    f: &impl FiberedMap,
    h: &EvaluableField,
    samples: &[Complex64],
) -> Result<LineFieldReport> {
    let unit = |v: Complex64| v.conj() / v.norm();
    enum Outcome {
        Kept(Complex64, f64),
        Dropped(Complex64, &'static str),
    }
    let outcomes: Vec<Outcome> = samples
        .par_iter()
        .map(|&z| {
            let hz = match h.eval(z) {
                Ok(v) if v.norm() > MULTIPLIER_ZERO_TOL => v,
                Ok(_) => return Outcome::Dropped(z, Error::ZeroDenominator { x: z }.kind()),
                Err(e) => return Outcome::Dropped(z, e.kind()),
            };
            let d = match f.forward_derivative(z) {
                Ok(v) if v.norm() > 1e-12 * (1.0 + z.norm()) => v,
                Ok(v) => {
                    return Outcome::Dropped(z, Error::DerivativeVanishes { min_abs: v.norm() }.kind())
                }
                Err(e) => return Outcome::Dropped(z, e.kind()),
            };
            let fz = match f.forward(z) {
                Ok(v) => v,
                Err(e) => return Outcome::Dropped(z, e.kind()),
            };
            let hfz = match h.eval(fz) {
                Ok(v) if v.norm() > MULTIPLIER_ZERO_TOL => v,
                Ok(_) => return Outcome::Dropped(z, Error::ZeroDenominator { x: fz }.kind()),
                Err(e) => return Outcome::Dropped(z, e.kind()),
            };
            let defect = (unit(hfz) * d.conj() / d - unit(hz)).norm();
            Outcome::Kept(z, defect)
        })
        .collect();

    let mut defects = Vec::new();
    let mut dropped = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Kept(z, d) => defects.push((z, d)),
            Outcome::Dropped(z, k) => dropped.push((z, k)),
        }
    }
    if defects.is_empty() {
        return Err(Error::AllSamplesInvalid(summarize_drops(&dropped)));
    }
    let max_defect = defects.iter().fold(0.0f64, |a, &(_, d)| a.max(d));
    Ok(LineFieldReport { defects, dropped, max_defect })
}

/// An annular sector about `center` in polar coordinates; a disc is the
/// degenerate case r_inner = 0 over a full turn.
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub center: Complex64,
    pub r_inner: f64,
    pub r_outer: f64,
    pub theta0: f64,
    pub theta1: f64,
}

impl Region {
    pub fn annular_sector(
        center: Complex64,
        r_inner: f64,
        r_outer: f64,
        theta0: f64,
        theta1: f64,
    ) -> Result<Region> {
        if !(r_inner >= 0.0 && r_outer > r_inner && r_outer.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "radii must satisfy 0 <= {r_inner} < {r_outer}"
            )));
        }
        if !(theta1 > theta0 && theta1 - theta0 <= TAU + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "angles must satisfy {theta0} < {theta1} within one turn"
            )));
        }
        Ok(Region { center, r_inner, r_outer, theta0, theta1 })
    }

    pub fn annulus(center: Complex64, r_inner: f64, r_outer: f64) -> Result<Region> {
        Region::annular_sector(center, r_inner, r_outer, 0.0, TAU)
    }

    pub fn disc(center: Complex64, radius: f64) -> Result<Region> {
        Region::annular_sector(center, 0.0, radius, 0.0, TAU)
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.theta1 - self.theta0) * (self.r_outer * self.r_outer - self.r_inner * self.r_inner)
    }

    /// Tensor-product Gauss-Legendre nodes in polar coordinates with the
    /// area element r dr dtheta folded into the weights.
    fn grid(&self, n: usize) -> Vec<(Complex64, f64)> {
        let (rs, wr) = legendre_rule_on(n, self.r_inner, self.r_outer);
        let (ts, wt) = legendre_rule_on(n, self.theta0, self.theta1);
        let mut nodes = Vec::with_capacity(n * n);
        for (&r, &wri) in rs.iter().zip(&wr) {
            for (&t, &wti) in ts.iter().zip(&wt) {
                nodes.push((self.center + Complex64::from_polar(r, t), wri * wti * r));
            }
        }
        nodes
    }
}

/// Mass of |H| over a region and over its full preimage, with the relative
/// gap between them. Agreement is the signature of an invariant density.
#[derive(Debug, Clone, Copy)]
pub struct MassReport {
    pub lambda_a: f64,
    pub lambda_preimage: f64,
    pub rel_gap: f64,
}

/// Integrates `integrand` over the region on a doubling ladder of tensor
/// grids until two consecutive levels agree.
fn refine_integral(
    region: &Region,
    integrand: impl Fn(Complex64) -> Result<f64> + Sync,
) -> Result<f64> {
    let mut prev: Option<f64> = None;
    for n in [16usize, 24, 32, 48, 64, 96, 128] {
        let grid = region.grid(n);
        let value = grid
            .par_iter()
            .map(|&(x, w)| integrand(x).map(|v| v * w))
            .try_reduce(|| 0.0, |a, b| Ok(a + b))?;
        if let Some(p) = prev {
            if (value - p).abs() <= MASS_QUADRATURE_RTOL * value.abs() + 1e-13 {
                return Ok(value);
            }
        }
        prev = Some(value);
    }
    Err(Error::QuadratureFailure("refinement ladder exhausted without two agreeing levels".into()))
}

/// Lambda(A) = integral of |H| over A, and Lambda(f^-1 A) written through the
/// change of variables as the integral over A of
/// sum over the fiber of |H(w)|/|f'(w)|^2, which avoids tracing preimage
/// region boundaries. The identity is exact: |f'|^2 is the area Jacobian.
pub fn invariant_mass(
    f: &impl FiberedMap,
    h: &EvaluableField,
    region: &Region,
) -> Result<MassReport> {
    let lambda_a = refine_integral(region, |x| h.eval(x).map(|v| v.norm()))?;
    let lambda_preimage = refine_integral(region, |x| {
        let fiber = f.fiber_data(x)?;
        // An infinite preimage over a decaying field carries zero density in
        // this chart; it occurs on at most one x, which no open node hits.
        let mut s = 0.0;
        for p in &fiber.points {
            let j = p.derivative.norm_sqr();
            if j == 0.0 {
                return Err(Error::QuadratureFailure(format!(
                    "fiber of {x} touches a critical point"
                )));
            }
            s += h.eval(p.point)?.norm() * p.multiplicity as f64 / j;
        }
        Ok(s)
    })?;
    let denom = lambda_a.max(lambda_preimage);
    let rel_gap = if denom > 0.0 { (lambda_a - lambda_preimage).abs() / denom } else { 0.0 };
    Ok(MassReport { lambda_a, lambda_preimage, rel_gap })
}
