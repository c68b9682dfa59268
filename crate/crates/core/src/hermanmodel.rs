//! An exactly solvable rotation model on an annulus: the map
//! f = psi o (lambda .) o psi^{-1} for a conformal chart psi on
//! Delta = {1 < |w| < R} and a unimodular lambda. On this model the
//! pushforward fixed-point equation, its Laurent eigenspace, the boundary
//! measure whose Cauchy transform realizes the fixed field, and the Hardy
//! boundedness of 1/psi' are all machine-checkable.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measure::{CurveComponent, CurveMeasure};
use crate::tolerances::{
    EIGENSPACE_TOL, HARDY_EXPONENT_BOUND, HARDY_INCREMENT_BOUND, INVERSION_TOL, MIN_ANNULUS_GAP,
    SCALING_TOL, UNIMODULAR_TOL, VERIFY_TOL,
};
use crate::transfer::{
    apply, EvaluableField, FiberData, FiberPoint, FiberedMap, SupportHint,
};

const TAU: f64 = std::f64::consts::TAU;

/// A Laurent polynomial sum of a_n w^n over a finite exponent window.
#[derive(Debug, Clone)]
pub struct LaurentPoly {
    min_deg: i32,
    coeffs: Vec<Complex64>,
}

impl LaurentPoly {
    /// Coefficients ascending from exponent `min_deg`; zero fringes trimmed.
    pub fn new(min_deg: i32, coeffs: Vec<Complex64>) -> Self {
        let mut min_deg = min_deg;
        let mut coeffs = coeffs;
        while coeffs.first().is_some_and(|c| c.norm() == 0.0) {
            coeffs.remove(0);
            min_deg += 1;
        }
        while coeffs.last().is_some_and(|c| c.norm() == 0.0) {
            coeffs.pop();
        }
        LaurentPoly { min_deg, coeffs }
    }

    pub fn identity() -> Self {
        LaurentPoly { min_deg: 1, coeffs: vec![Complex64::new(1.0, 0.0)] }
    }

    pub fn from_terms(terms: &[(i32, Complex64)]) -> Self {
        if terms.is_empty() {
            return LaurentPoly { min_deg: 0, coeffs: Vec::new() };
        }
        let lo = terms.iter().map(|t| t.0).min().unwrap();
        let hi = terms.iter().map(|t| t.0).max().unwrap();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); (hi - lo + 1) as usize];
        for &(n, a) in terms {
            coeffs[(n - lo) as usize] += a;
        }
        LaurentPoly::new(lo, coeffs)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.coeffs.iter().enumerate().map(|(k, &a)| (self.min_deg + k as i32, a))
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Horner on the nonnegative part plus Horner in 1/w on the negative
    /// part; exact for w != 0.
    pub fn eval(&self, w: Complex64) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        if self.coeffs.is_empty() {
            return zero;
        }
        let max_deg = self.min_deg + self.coeffs.len() as i32 - 1;
        let coeff = |n: i32| {
            if n < self.min_deg || n > max_deg {
                zero
            } else {
                self.coeffs[(n - self.min_deg) as usize]
            }
        };
        let mut pos = zero;
        if max_deg >= 0 {
            for n in (0..=max_deg).rev() {
                pos = pos * w + coeff(n);
            }
        }
        let mut neg = zero;
        if self.min_deg < 0 {
            let v = w.inv();
            for n in self.min_deg..=-1 {
                neg = neg * v + coeff(n);
            }
            neg *= v;
        }
        pos + neg
    }

    pub fn derivative(&self) -> LaurentPoly {
        LaurentPoly::from_terms(
            &self
                .terms()
                .filter(|&(n, _)| n != 0)
                .map(|(n, a)| (n - 1, a * n as f64))
                .collect::<Vec<_>>(),
        )
    }
}

/// Indices n in [-n_max, n_max] with lambda^(n+2) = 1: the Laurent modes a
/// rotation by lambda leaves available to a solution of
/// H(lambda w) lambda^2 = H(w).
pub fn rotation_eigenspace(lambda: Complex64, n_max: i32) -> Result<Vec<i32>> {
    if (lambda.norm() - 1.0).abs() > UNIMODULAR_TOL {
        return Err(Error::InvalidInput(format!(
            "rotation multiplier must be unimodular (|lambda| = {})",
            lambda.norm()
        )));
    }
    if n_max < 2 {
        return Err(Error::InvalidInput("eigenspace window must reach at least 2".into()));
    }
    let theta = lambda.arg();
    Ok((-n_max..=n_max)
        .filter(|&n| {
            let d = 2.0 * ((n + 2) as f64 * theta / 2.0).sin().abs();
            d <= EIGENSPACE_TOL
        })
        .collect())
}

/// Boundary sampling of the chart image plus a Newton inverter. Built once
/// per model; winding numbers against the sampled image boundary decide
/// membership before Newton runs.
#[derive(Debug)]
struct Inverter {
    psi: LaurentPoly,
    dpsi: LaurentPoly,
    r: f64,
    // zeta = psi(node), dzeta = psi'(node) * i node dtheta, per circle.
    outer: Vec<(Complex64, Complex64)>,
    inner: Vec<(Complex64, Complex64)>,
    starts: Vec<Complex64>,
    near_zone: f64,
}

const BOUNDARY_NODES: usize = 1024;

impl Inverter {
    fn new(psi: LaurentPoly, r: f64) -> Self {
        let dpsi = psi.derivative();
        let sample = |rho: f64| -> Vec<(Complex64, Complex64)> {
            (0..BOUNDARY_NODES)
                .map(|j| {
                    let w = Complex64::from_polar(rho, TAU * j as f64 / BOUNDARY_NODES as f64);
                    let dz = dpsi.eval(w) * Complex64::new(0.0, 1.0) * w
                        * (TAU / BOUNDARY_NODES as f64);
                    (psi.eval(w), dz)
                })
                .collect()
        };
        let outer = sample(r);
        let inner = sample(1.0);
        let spacing = |curve: &[(Complex64, Complex64)]| {
            (0..curve.len())
                .map(|j| (curve[(j + 1) % curve.len()].0 - curve[j].0).norm())
                .fold(0.0, f64::max)
        };
        let near_zone = 3.0 * spacing(&outer).max(spacing(&inner));
        let mut starts = Vec::new();
        for k in 1..=6 {
            let rho = 1.0 + (r - 1.0) * k as f64 / 7.0;
            for l in 0..12 {
                starts.push(Complex64::from_polar(rho, TAU * l as f64 / 12.0));
            }
        }
        Inverter { psi, dpsi, r, outer, inner, starts, near_zone }
    }

    /// Winding of the image boundary around z; 1 inside the image annulus,
    /// 0 in both complementary components.
    fn winding(&self, z: Complex64) -> f64 {
        let sum = |curve: &[(Complex64, Complex64)]| -> Complex64 {
            curve.iter().map(|&(zeta, dzeta)| dzeta / (zeta - z)).sum()
        };
        ((sum(&self.outer) - sum(&self.inner)) / Complex64::new(0.0, TAU)).re
    }

    fn min_boundary_distance(&self, z: Complex64) -> f64 {
        self.outer
            .iter()
            .chain(&self.inner)
            .map(|&(zeta, _)| (zeta - z).norm())
            .fold(f64::INFINITY, f64::min)
    }

    fn newton(&self, z: Complex64, start: Complex64) -> Option<Complex64> {
        let mut w = start;
        for _ in 0..60 {
            let fw = self.psi.eval(w) - z;
            if fw.norm() <= INVERSION_TOL * (1.0 + z.norm()) {
                let m = w.norm();
                if m >= 1.0 - 1e-7 && m <= self.r * (1.0 + 1e-7) {
                    return Some(w);
                }
                return None;
            }
            let d = self.dpsi.eval(w);
            if d.norm() == 0.0 {
                return None;
            }
            w -= fw / d;
            if !w.is_finite() || w.norm() > 4.0 * self.r || w.norm() < 0.2 {
                return None;
            }
        }
        None
    }

    fn newton_multi(&self, z: Complex64) -> Option<Complex64> {
        // Cheap first guesses: z pulled radially into the annulus, then the
        // preimage node of the nearest boundary sample, then the grid.
        let clamped = if z.norm() > 0.0 {
            z / z.norm() * z.norm().clamp(1.0, self.r)
        } else {
            Complex64::new(1.0, 0.0)
        };
        if let Some(w) = self.newton(z, clamped) {
            return Some(w);
        }
        let nearest = self
            .outer
            .iter()
            .enumerate()
            .map(|(j, &(zeta, _))| (Complex64::from_polar(self.r, TAU * j as f64 / BOUNDARY_NODES as f64), (zeta - z).norm()))
            .chain(self.inner.iter().enumerate().map(|(j, &(zeta, _))| {
                (Complex64::from_polar(1.0, TAU * j as f64 / BOUNDARY_NODES as f64), (zeta - z).norm())
            }))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(w, _)| w);
        if let Some(w0) = nearest {
            if let Some(w) = self.newton(z, w0) {
                return Some(w);
            }
        }
        self.starts.iter().find_map(|&w0| self.newton(z, w0))
    }

    /// Ok(Some(w)) with psi(w) = z for z in the closed image annulus,
    /// Ok(None) outside, Err(InversionFailure) when membership says inside
    /// but no Newton start lands.
    fn invert(&self, z: Complex64) -> Result<Option<Complex64>> {
        if self.min_boundary_distance(z) > self.near_zone {
            let wind = self.winding(z);
            if wind.abs() < 0.25 {
                return Ok(None);
            }
            if (wind - 1.0).abs() < 0.25 {
                return match self.newton_multi(z) {
                    Some(w) => Ok(Some(w)),
                    None => Err(Error::InversionFailure { z }),
                };
            }
        }
        // Near the sampled boundary (or ambiguous winding): let Newton
        // decide; landing in the closed annulus is the membership call.
        Ok(self.newton_multi(z))
    }
}

/// The rotation model: Delta = {1 < |w| < R}, multiplier lambda, chart psi,
/// and the field constant C.
#[derive(Debug, Clone)]
pub struct AnnulusModel {
    r: f64,
    lambda: Complex64,
    c: Complex64,
    psi: LaurentPoly,
    inverter: Arc<Inverter>,
}

impl AnnulusModel {
    /// Validates |lambda| = 1, R > 1, and injectivity of psi on the closed
    /// annulus: the image boundary must wind exactly once around psi(w0) for
    /// a grid of interior probes (argument principle). Charts that fail the
    /// probe are rejected even if injective; the check is conservative.
    pub fn new(r: f64, lambda: Complex64, psi: LaurentPoly, c: Complex64) -> Result<Self> {
        if (lambda.norm() - 1.0).abs() > UNIMODULAR_TOL {
            return Err(Error::InvalidModel(format!(
                "|lambda| = {} is not 1 within {UNIMODULAR_TOL:.0e}",
                lambda.norm()
            )));
        }
        if !(r > 1.0 + MIN_ANNULUS_GAP) || !r.is_finite() {
            return Err(Error::InvalidModel(format!("R = {r} leaves no annulus")));
        }
        if psi.is_empty() {
            return Err(Error::InvalidModel("chart is identically zero".into()));
        }
        let inverter = Arc::new(Inverter::new(psi.clone(), r));
        for k in 1..=3 {
            let rho = 1.0 + (r - 1.0) * k as f64 / 4.0;
            for l in 0..3 {
                let w0 = Complex64::from_polar(rho, TAU * l as f64 / 3.0 + 0.17);
                let z0 = psi.eval(w0);
                let wind = inverter.winding(z0);
                if (wind - 1.0).abs() > 0.1 {
                    return Err(Error::InvalidModel(format!(
                        "chart is not injective: image boundary winds {wind:.3} times around \
                         the image of {w0}"
                    )));
                }
            }
        }
        Ok(AnnulusModel { r, lambda, c, psi, inverter })
    }

    pub fn identity(r: f64, lambda: Complex64, c: Complex64) -> Result<Self> {
        AnnulusModel::new(r, lambda, LaurentPoly::identity(), c)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn constant(&self) -> Complex64 {
        self.c
    }

    pub fn psi(&self) -> &LaurentPoly {
        &self.psi
    }
}

/// H(z) = C (phi'(z)/phi(z))^2 for phi = psi^{-1}: in the w-chart,
/// C / (w psi'(w))^2. Undefined outside the closed image annulus.
pub fn model_fixed_field(model: &AnnulusModel) -> EvaluableField {
    let inv = Arc::clone(&model.inverter);
    let c = model.c;
    let hint = SupportHint::Annulus { r_inner: 1.0, r_outer: model.r };
    EvaluableField::new("model fixed field", hint, false, move |z| {
        let w = inv.invert(z)?.ok_or(Error::Undefined { z })?;
        let d = w * inv.dpsi.eval(w);
        if d.norm() == 0.0 {
            return Err(Error::DerivativeVanishes { min_abs: 0.0 });
        }
        Ok(c / (d * d))
    })
}

/// The conjugated rotation as a fibered map on the image annulus. Fibers are
/// single points: psi(lambda^{-1} psi^{-1}(x)).
#[derive(Debug, Clone)]
pub struct ModelMap {
    lambda: Complex64,
    inverter: Arc<Inverter>,
}

pub fn model_map(model: &AnnulusModel) -> ModelMap {
    ModelMap { lambda: model.lambda, inverter: Arc::clone(&model.inverter) }
}

impl ModelMap {
    fn chart(&self, z: Complex64) -> Result<Complex64> {
        self.inverter.invert(z)?.ok_or(Error::OutsideDomain { z })
    }
}

impl FiberedMap for ModelMap {
    fn forward(&self, z: Complex64) -> Result<Complex64> {
        let w = self.chart(z)?;
        Ok(self.inverter.psi.eval(self.lambda * w))
    }

    fn forward_derivative(&self, z: Complex64) -> Result<Complex64> {
        let w = self.chart(z)?;
        let denom = self.inverter.dpsi.eval(w);
        if denom.norm() == 0.0 {
            return Err(Error::DerivativeVanishes { min_abs: 0.0 });
        }
        Ok(self.inverter.dpsi.eval(self.lambda * w) * self.lambda / denom)
    }

    fn fiber_data(&self, x: Complex64) -> Result<FiberData> {
        let w = self.chart(x)?;
        let wpre = w / self.lambda;
        let denom = self.inverter.dpsi.eval(wpre);
        if denom.norm() == 0.0 {
            return Err(Error::DerivativeVanishes { min_abs: 0.0 });
        }
        let point = self.inverter.psi.eval(wpre);
        let derivative = self.inverter.dpsi.eval(w) * self.lambda / denom;
        Ok(FiberData {
            points: vec![FiberPoint { point, multiplicity: 1, derivative }],
            infinity_multiplicity: 0,
        })
    }
}

/// Hardy-ladder integrals of |dw|/|psi'(w)| on circles approaching both
/// boundary components, with log-log growth exponents fitted on the last six
/// rungs. Bounded means: both exponents small and the last rung barely moved
/// the integral.
#[derive(Debug, Clone)]
pub struct HardyReport {
    pub epsilons: Vec<f64>,
    pub inner_integrals: Vec<f64>,
    pub outer_integrals: Vec<f64>,
    pub inner_exponent: f64,
    pub outer_exponent: f64,
    pub inner_last_increment: f64,
    pub outer_last_increment: f64,
    pub bounded_verdict: bool,
}

/// Adaptive periodic trapezoid of `integrand` over |w| = rho, doubling the
/// node count until two levels agree to 1e-9 relative.
fn circle_integral(rho: f64, integrand: &dyn Fn(Complex64) -> f64) -> f64 {
    let eval = |m: usize| -> f64 {
        (0..m)
            .map(|j| integrand(Complex64::from_polar(rho, TAU * j as f64 / m as f64)))
            .sum::<f64>()
            * (TAU * rho / m as f64)
    };
    let mut m = 2048;
    let mut prev = eval(m);
    while m < (1 << 21) {
        m *= 2;
        let next = eval(m);
        if (next - prev).abs() <= 1e-9 * next.abs().max(1e-300) {
            return next;
        }
        prev = next;
    }
    prev
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().map(|x| x.ln()).sum();
    let sy: f64 = ys.iter().map(|y| y.ln()).sum();
    let sxx: f64 = xs.iter().map(|x| x.ln() * x.ln()).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x.ln() * y.ln()).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// The ladder machinery on raw data: circles |w| = 1 + eps and |w| = r_outer
/// - eps for eps = 2^-j, j = 4..=14 (clipped to keep the circles ordered),
/// integrating |dw|/|psi_prime|.
pub fn hardy_ladder(
    r_inner: f64,
    r_outer: f64,
    psi_prime: &dyn Fn(Complex64) -> Complex64,
) -> Result<HardyReport> {
    let gap = r_outer - r_inner;
    if !(gap > 0.0) {
        return Err(Error::InvalidInput("empty annulus".into()));
    }
    let epsilons: Vec<f64> =
        (4..=14).map(|j| 2.0f64.powi(-j)).filter(|&e| 2.0 * e < gap).collect();
    if epsilons.len() < 7 {
        return Err(Error::InvalidInput("annulus too thin for the ladder".into()));
    }
    let integrand = |w: Complex64| 1.0 / psi_prime(w).norm();
    let inner_integrals: Vec<f64> =
        epsilons.iter().map(|&e| circle_integral(r_inner + e, &integrand)).collect();
    let outer_integrals: Vec<f64> =
        epsilons.iter().map(|&e| circle_integral(r_outer - e, &integrand)).collect();

    // Growth exponent of I(eps) ~ eps^-b, fitted where the asymptotics live:
    // the six smallest eps.
    let tail = epsilons.len() - 6;
    let inv_eps: Vec<f64> = epsilons[tail..].iter().map(|&e| 1.0 / e).collect();
    let inner_exponent = loglog_slope(&inv_eps, &inner_integrals[tail..]);
    let outer_exponent = loglog_slope(&inv_eps, &outer_integrals[tail..]);
    let last_increment = |v: &[f64]| {
        let n = v.len();
        (v[n - 1] - v[n - 2]).abs() / v[n - 1].abs().max(1e-300)
    };
    let inner_last_increment = last_increment(&inner_integrals);
    let outer_last_increment = last_increment(&outer_integrals);
    let bounded_verdict = inner_exponent.abs() < HARDY_EXPONENT_BOUND
        && outer_exponent.abs() < HARDY_EXPONENT_BOUND
        && inner_last_increment < HARDY_INCREMENT_BOUND
        && outer_last_increment < HARDY_INCREMENT_BOUND;
    Ok(HardyReport {
        epsilons,
        inner_integrals,
        outer_integrals,
        inner_exponent,
        outer_exponent,
        inner_last_increment,
        outer_last_increment,
        bounded_verdict,
    })
}

/// The ladder for a model's chart, with a vanishing-derivative precheck on
/// the sampled circles.
pub fn hardy_estimate(model: &AnnulusModel) -> Result<HardyReport> {
    let dpsi = model.psi.derivative();
    let mut min_abs = f64::INFINITY;
    for &rho in &[1.0 + 1.0 / 16.0, model.r - 1.0 / 16.0, (1.0 + model.r) / 2.0] {
        for j in 0..512 {
            let w = Complex64::from_polar(rho, TAU * j as f64 / 512.0);
            min_abs = min_abs.min(dpsi.eval(w).norm());
        }
    }
    if min_abs <= 1e-12 {
        return Err(Error::DerivativeVanishes { min_abs });
    }
    hardy_ladder(1.0, model.r, &|w| dpsi.eval(w))
}

/// The boundary measure whose Cauchy transform realizes the model field:
/// density H(z)/(2 pi i) per dz on both image boundary curves, the outer
/// taken positively and the inner negatively. Components: [outer, inner].
/// Refuses charts whose Hardy ladder is unbounded.
pub fn plemelj_measure(model: &AnnulusModel, nodes: usize) -> Result<CurveMeasure> {
    let hardy = hardy_estimate(model)?;
    if !hardy.bounded_verdict {
        return Err(Error::HardyUnbounded);
    }
    let dpsi = model.psi.derivative();
    let two_pi_i = Complex64::new(0.0, TAU);
    let component = |rho: f64, orientation: i8| -> Result<CurveComponent> {
        let mut nodes_v = Vec::with_capacity(nodes);
        let mut tangents = Vec::with_capacity(nodes);
        let mut density = Vec::with_capacity(nodes);
        for j in 0..nodes {
            let w = Complex64::from_polar(rho, TAU * j as f64 / nodes as f64);
            let dw = Complex64::new(0.0, 1.0) * w * (TAU / nodes as f64);
            let d = w * dpsi.eval(w);
            if d.norm() == 0.0 {
                return Err(Error::DerivativeVanishes { min_abs: 0.0 });
            }
            nodes_v.push(model.psi.eval(w));
            tangents.push(dpsi.eval(w) * dw);
            density.push(model.c / (d * d) / two_pi_i);
        }
        Ok(CurveComponent { nodes: nodes_v, tangents, density, orientation })
    };
    CurveMeasure::new(vec![component(model.r, 1)?, component(1.0, -1)?])
}

/// Outcome of the four boundary-measure checks: the transform reproduces the
/// field inside, vanishes on both complementary regions, is itself fixed by
/// the model pushforward, and scales linearly with the measure.
#[derive(Debug, Clone, Copy)]
pub struct Part2Report {
    pub interior_max_gap: f64,
    pub exterior_max_abs: f64,
    pub operator_max_residual: f64,
    pub scaling_max_gap: f64,
    pub interior_samples: usize,
    pub exterior_samples: usize,
    pub operator_samples: usize,
    pub all_pass: bool,
}

pub fn verify_part2(model: &AnnulusModel, nodes: usize) -> Result<Part2Report> {
    let measure = plemelj_measure(model, nodes)?;
    let field = model_fixed_field(model);
    let map = model_map(model);

    // 3 interior rings + 2 complementary rings at 40 angles each: 200
    // validity-zone samples per verification.
    const ANGLES: usize = 40;
    let interior: Vec<Complex64> = {
        let g = model.r - 1.0;
        let mut v = Vec::new();
        for &frac in &[0.3, 0.5, 0.7] {
            for l in 0..ANGLES {
                let w = Complex64::from_polar(1.0 + frac * g, TAU * l as f64 / ANGLES as f64 + 0.03);
                v.push(model.psi.eval(w));
            }
        }
        v
    };
    let mut interior_max_gap = 0.0f64;
    for &z in &interior {
        let gap = (measure.cauchy(z)? - field.eval(z)?).norm();
        interior_max_gap = interior_max_gap.max(gap);
    }

    // Complementary samples sit well clear of both curves.
    let inner_scale = measure.curves[1].nodes.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let outer_scale = measure.curves[0].nodes.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut exterior = Vec::new();
    for l in 0..ANGLES {
        let theta = TAU * l as f64 / ANGLES as f64 + 0.07;
        exterior.push(Complex64::from_polar(0.45 * inner_scale, theta));
        exterior.push(Complex64::from_polar(1.9 * outer_scale, theta));
    }
    let mut exterior_max_abs = 0.0f64;
    for &z in &exterior {
        exterior_max_abs = exterior_max_abs.max(measure.cauchy(z)?.norm());
    }

    let transform = EvaluableField::from_curve_measure(&measure);
    let operator: Vec<Complex64> = interior.iter().copied().step_by(3).collect();
    let mut operator_max_residual = 0.0f64;
    for &z in &operator {
        let residual = (apply(&map, &transform, z)? - transform.eval(z)?).norm();
        operator_max_residual = operator_max_residual.max(residual);
    }

    let doubled = measure.scaled(Complex64::new(2.0, 0.0));
    let mut scaling_max_gap = 0.0f64;
    for &z in interior.iter().step_by(5) {
        let gap = (doubled.cauchy(z)? - 2.0 * measure.cauchy(z)?).norm();
        scaling_max_gap = scaling_max_gap.max(gap);
    }

    let all_pass = interior_max_gap <= VERIFY_TOL
        && exterior_max_abs <= VERIFY_TOL
        && operator_max_residual <= VERIFY_TOL
        && scaling_max_gap <= SCALING_TOL;
    Ok(Part2Report {
        interior_max_gap,
        exterior_max_abs,
        operator_max_residual,
        scaling_max_gap,
        interior_samples: interior.len(),
        exterior_samples: exterior.len(),
        operator_samples: operator.len(),
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::{fixed_point_residual, FixedVerdict};

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn golden_lambda() -> Complex64 {
        Complex64::from_polar(1.0, TAU * (5.0f64.sqrt() - 1.0) / 2.0)
    }

    fn perturbed_psi() -> LaurentPoly {
        LaurentPoly::from_terms(&[(1, c64(1.0, 0.0)), (-1, c64(0.01, 0.0))])
    }

    fn ring_samples(radius: f64, n: usize) -> Vec<Complex64> {
        (0..n).map(|j| Complex64::from_polar(radius, TAU * j as f64 / n as f64 + 0.02)).collect()
    }

    #[test]
    fn laurent_evaluation_and_derivative() {
        let psi = perturbed_psi();
        assert!((psi.eval(c64(2.0, 0.0)) - c64(2.005, 0.0)).norm() < 1e-15);
        let d = psi.derivative();
        // psi' = 1 - 0.01 w^-2.
        assert!((d.eval(c64(2.0, 0.0)) - c64(0.9975, 0.0)).norm() < 1e-15);
        let w = c64(1.3, -0.7);
        assert!((psi.eval(w) - (w + 0.01 / w)).norm() < 1e-15);
    }

    #[test]
    fn eigenspace_of_golden_rotation_is_minimal() {
        let modes = rotation_eigenspace(golden_lambda(), 50).unwrap();
        assert_eq!(modes, vec![-2]);
        // Margin: the nearest near-resonance within the window stays far
        // from the acceptance tolerance.
        let theta = golden_lambda().arg();
        let closest = (-50i32..=50)
            .filter(|&n| n != -2)
            .map(|n| 2.0 * ((n + 2) as f64 * theta / 2.0).sin().abs())
            .fold(f64::INFINITY, f64::min);
        assert!(closest > 0.05, "margin {closest}");
    }

    #[test]
    fn eigenspace_of_quarter_rotation() {
        let modes = rotation_eigenspace(c64(0.0, 1.0), 6).unwrap();
        assert_eq!(modes, vec![-6, -2, 2, 6]);
    }

    #[test]
    fn eigenspace_of_identity_rotation_is_everything() {
        let modes = rotation_eigenspace(c64(1.0, 0.0), 3).unwrap();
        assert_eq!(modes, vec![-3, -2, -1, 0, 1, 2, 3]);
    }

    #[test]
    fn eigenspace_of_seventh_root() {
        let lambda = Complex64::from_polar(1.0, TAU * 3.0 / 7.0);
        let modes = rotation_eigenspace(lambda, 20).unwrap();
        assert_eq!(modes, vec![-16, -9, -2, 5, 12, 19]);
    }

    #[test]
    fn eigenspace_input_validation() {
        assert!(rotation_eigenspace(c64(1.1, 0.0), 10).is_err());
        assert!(rotation_eigenspace(c64(1.0, 0.0), 1).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(AnnulusModel::identity(2.0, golden_lambda(), c64(1.0, 0.0)).is_ok());
        assert!(AnnulusModel::identity(1.0, golden_lambda(), c64(1.0, 0.0)).is_err());
        assert!(AnnulusModel::identity(2.0, c64(0.9, 0.0), c64(1.0, 0.0)).is_err());
        // w^2 doubles angles: not injective on any annulus around 0.
        let sq = LaurentPoly::from_terms(&[(2, c64(1.0, 0.0))]);
        match AnnulusModel::new(2.0, golden_lambda(), sq, c64(1.0, 0.0)) {
            Err(Error::InvalidModel(_)) => {}
            other => panic!("expected InvalidModel, got {other:?}"),
        }
    }

    #[test]
    fn identity_field_values() {
        let model = AnnulusModel::identity(2.0, golden_lambda(), c64(1.0, 0.0)).unwrap();
        let field = model_fixed_field(&model);
        let v = field.eval(c64(1.5, 0.0)).unwrap();
        assert!((v - c64(1.0 / 2.25, 0.0)).norm() < 1e-12);
        match field.eval(c64(0.5, 0.0)) {
            Err(Error::Undefined { .. }) => {}
            other => panic!("expected Undefined inside the hole, got {other:?}"),
        }
        match field.eval(c64(3.0, 0.0)) {
            Err(Error::Undefined { .. }) => {}
            other => panic!("expected Undefined outside, got {other:?}"),
        }
    }

    #[test]
    fn perturbed_chart_inversion_round_trip() {
        let model =
            AnnulusModel::new(2.0, golden_lambda(), perturbed_psi(), c64(1.0, 0.0)).unwrap();
        for &w in &[c64(1.3, 0.4), c64(-1.1, 0.9), c64(0.0, 1.7)] {
            let z = model.psi().eval(w);
            let back = model.inverter.invert(z).unwrap().unwrap();
            assert!((back - w).norm() < 1e-10, "{w} -> {z} -> {back}");
        }
    }

    #[test]
    fn identity_model_field_is_fixed_point() {
        let model = AnnulusModel::identity(2.0, golden_lambda(), c64(1.0, 0.0)).unwrap();
        let field = model_fixed_field(&model);
        let map = model_map(&model);
        let report = fixed_point_residual(&map, &field, &ring_samples(1.5, 100)).unwrap();
        assert_eq!(report.verdict, FixedVerdict::Fixed);
        assert!(report.max_residual <= 1e-12, "residual {}", report.max_residual);
    }

    #[test]
    fn perturbed_model_field_is_fixed_point() {
        let model =
            AnnulusModel::new(2.0, golden_lambda(), perturbed_psi(), c64(1.0, 0.0)).unwrap();
        let field = model_fixed_field(&model);
        let map = model_map(&model);
        let report = fixed_point_residual(&map, &field, &ring_samples(1.5, 100)).unwrap();
        assert_eq!(report.verdict, FixedVerdict::Fixed);
        assert!(report.max_residual <= 1e-6, "residual {}", report.max_residual);
    }

    #[test]
    fn model_map_conjugation_identity() {
        let model =
            AnnulusModel::new(2.0, golden_lambda(), perturbed_psi(), c64(1.0, 0.0)).unwrap();
        let map = model_map(&model);
        let w = Complex64::from_polar(1.3, 0.4);
        let z = model.psi().eval(w);
        let fz = map.forward(z).unwrap();
        let want = model.psi().eval(golden_lambda() * w);
        assert!((fz - want).norm() < 1e-10);
        // The fiber of f(z) recovers z with the chain-rule derivative.
        let fiber = map.fiber_data(fz).unwrap();
        assert_eq!(fiber.points.len(), 1);
        assert!((fiber.points[0].point - z).norm() < 1e-10);
        let dpsi = model.psi().derivative();
        let want_d = dpsi.eval(golden_lambda() * w) * golden_lambda() / dpsi.eval(w);
        assert!((fiber.points[0].derivative - want_d).norm() < 1e-9);
    }

    #[test]
    fn plemelj_identity_reconstruction() {
        let model = AnnulusModel::identity(2.0, golden_lambda(), c64(1.0, 0.0)).unwrap();
        let measure = plemelj_measure(&model, 256).unwrap();
        let inside = measure.cauchy(c64(1.5, 0.0)).unwrap();
        assert!((inside - c64(1.0 / 2.25, 0.0)).norm() < 1e-8, "{inside}");
        assert!(measure.cauchy(c64(0.5, 0.0)).unwrap().norm() < 1e-8);
        assert!(measure.cauchy(c64(3.0, 0.0)).unwrap().norm() < 1e-8);
        // Total mass vanishes: both circle integrals of w^-2 are zero.
        assert!(measure.moments().a.norm() < 1e-12);
    }

    #[test]
    fn plemelj_zero_constant_gives_zero_measure() {
        let model = AnnulusModel::identity(2.0, golden_lambda(), c64(0.0, 0.0)).unwrap();
        let measure = plemelj_measure(&model, 256).unwrap();
        assert!(measure.cauchy(c64(1.5, 0.2)).unwrap().norm() == 0.0);
    }

    #[test]
    fn hardy_rejects_boundary_derivative_zero() {
        // psi = w + w^2/4 is injective on the open annulus but psi' dies at
        // w = -2 on the outer boundary; the ladder grows like log(1/eps).
        let psi = LaurentPoly::from_terms(&[(1, c64(1.0, 0.0)), (2, c64(0.25, 0.0))]);
        let model = AnnulusModel::new(2.0, golden_lambda(), psi, c64(1.0, 0.0)).unwrap();
        let hardy = hardy_estimate(&model).unwrap();
        assert!(!hardy.bounded_verdict);
        assert!(hardy.outer_exponent > HARDY_EXPONENT_BOUND || hardy.outer_last_increment > HARDY_INCREMENT_BOUND);
        match plemelj_measure(&model, 128) {
            Err(Error::HardyUnbounded) => {}
            other => panic!("expected HardyUnbounded, got {other:?}"),
        }
    }

    #[test]
    fn verify_identity_model() {
        let model = AnnulusModel::identity(2.0, golden_lambda(), c64(1.0, 0.0)).unwrap();
        let report = verify_part2(&model, 512).unwrap();
        assert!(report.all_pass, "{report:?}");
        assert!(report.interior_max_gap <= 1e-7);
        assert!(report.exterior_max_abs <= 1e-7);
        assert!(report.operator_max_residual <= 1e-7);
        assert!(report.scaling_max_gap <= 1e-12);
    }

    #[test]
    fn flipped_inner_orientation_breaks_the_transform() {
        // With both circles positively oriented the transform becomes -z^-2
        // inside the annulus and -2 z^-2 beyond the outer curve, while the
        // inner disc still reads zero: the failure surfaces in the interior
        // and outer checks, not inside the hole.
        let model = AnnulusModel::identity(2.0, golden_lambda(), c64(1.0, 0.0)).unwrap();
        let good = plemelj_measure(&model, 256).unwrap();
        let mut curves = good.curves.clone();
        curves[1].orientation = 1;
        let bad = CurveMeasure::new(curves).unwrap();
        let field = model_fixed_field(&model);

        let z_in = c64(1.5, 0.0);
        let interior_gap = (bad.cauchy(z_in).unwrap() - field.eval(z_in).unwrap()).norm();
        assert!(interior_gap > 0.5, "interior gap {interior_gap}");
        let z_beyond = c64(3.0, 0.0);
        assert!(bad.cauchy(z_beyond).unwrap().norm() > 0.1);
        let z_hole = c64(0.5, 0.0);
        assert!(bad.cauchy(z_hole).unwrap().norm() < 1e-8);
    }

    #[test]
    fn hardy_identity_ladder() {
        let model = AnnulusModel::identity(2.0, golden_lambda(), c64(1.0, 0.0)).unwrap();
        let report = hardy_estimate(&model).unwrap();
        assert!(report.bounded_verdict);
        // Integrals are exactly the circle lengths.
        assert!((report.inner_integrals[0] - TAU * (1.0 + 0.0625)).abs() < 1e-9);
        assert!((report.outer_integrals[0] - TAU * (2.0 - 0.0625)).abs() < 1e-9);
        assert!(report.inner_exponent.abs() < 1e-3, "{}", report.inner_exponent);
        assert!(report.outer_exponent.abs() < 1e-3, "{}", report.outer_exponent);
        // The ladder is linear in the radius: slope 2 pi in eps.
        let n = report.epsilons.len();
        for j in 0..n - 1 {
            let slope = (report.inner_integrals[j] - report.inner_integrals[j + 1])
                / (report.epsilons[j] - report.epsilons[j + 1]);
            assert!((slope - TAU).abs() < 1e-6, "rung {j}: slope {slope}");
        }
    }

    #[test]
    fn hardy_perturbed_ladder_stays_near_circle_length() {
        let model =
            AnnulusModel::new(2.0, golden_lambda(), perturbed_psi(), c64(1.0, 0.0)).unwrap();
        let report = hardy_estimate(&model).unwrap();
        assert!(report.bounded_verdict);
        for (j, &eps) in report.epsilons.iter().enumerate() {
            let inner_len = TAU * (1.0 + eps);
            let outer_len = TAU * (2.0 - eps);
            assert!((report.inner_integrals[j] - inner_len).abs() < 0.05 * inner_len);
            assert!((report.outer_integrals[j] - outer_len).abs() < 0.05 * outer_len);
        }
    }

    /// AGM evaluation of the complete elliptic integral K(m), parameter
    /// convention m = k^2.
    fn elliptic_k(m: f64) -> f64 {
        let mut a = 1.0f64;
        let mut b = (1.0 - m).sqrt();
        for _ in 0..60 {
            if (a - b).abs() <= 1e-16 * a {
                break;
            }
            let an = 0.5 * (a + b);
            b = (a * b).sqrt();
            a = an;
        }
        std::f64::consts::PI / (2.0 * a)
    }

    #[test]
    fn engineered_boundary_zero_is_unbounded() {
        // psi'(w) = w - a with a just inside the unit circle: the inner
        // ladder integral is 4 rho K(4 a rho/(rho+a)^2)/(rho+a), which grows
        // like log(1/eps) and trips both unboundedness triggers.
        let a = 1.0 - 2.0f64.powi(-16);
        let report = hardy_ladder(1.0, 2.0, &|w| w - a).unwrap();
        assert!(!report.bounded_verdict);
        assert!(
            report.inner_exponent > HARDY_EXPONENT_BOUND
                || report.inner_last_increment > HARDY_INCREMENT_BOUND,
            "exponent {} increment {}",
            report.inner_exponent,
            report.inner_last_increment
        );
        // Cross-check one rung against the closed form.
        let j = 2; // eps = 2^-6
        let rho = 1.0 + report.epsilons[j];
        let m = 4.0 * a * rho / (rho + a).powi(2);
        let want = 4.0 * rho * elliptic_k(m) / (rho + a);
        let got = report.inner_integrals[j];
        assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
        // Monotone growth toward the boundary.
        for w in report.inner_integrals.windows(2) {
            assert!(w[1] > w[0]);
        }
    }
}
