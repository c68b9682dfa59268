//! One-parameter families f_t = f + t u, first-order motion of critical
//! orbits via dual numbers, the transversality quotient/series pair, and the
//! rank of the matrix coupling critical points to family directions.

use std::ops::{Add, Div, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::ratmap::{wronskian, RationalMap};
use crate::tolerances::{
    CONVERGENCE_RTOL, CONVERGENCE_WINDOW, CRITICAL_POINT_TOL, DEGENERATE_CRITICAL_TOL,
    NONZERO_MARGIN_FACTOR, POLE_TOL, RANK_RTOL,
};

/// First-order jet a + eps b with eps^2 = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualComplex {
    pub value: Complex64,
    pub deriv: Complex64,
}

impl DualComplex {
    pub fn constant(value: Complex64) -> Self {
        DualComplex { value, deriv: Complex64::new(0.0, 0.0) }
    }

    pub fn new(value: Complex64, deriv: Complex64) -> Self {
        DualComplex { value, deriv }
    }
}

impl Add for DualComplex {
    type Output = DualComplex;
    fn add(self, rhs: DualComplex) -> DualComplex {
        DualComplex::new(self.value + rhs.value, self.deriv + rhs.deriv)
    }
}

impl Sub for DualComplex {
    type Output = DualComplex;
    fn sub(self, rhs: DualComplex) -> DualComplex {
        DualComplex::new(self.value - rhs.value, self.deriv - rhs.deriv)
    }
}

impl Mul for DualComplex {
    type Output = DualComplex;
    fn mul(self, rhs: DualComplex) -> DualComplex {
        DualComplex::new(
            self.value * rhs.value,
            self.value * rhs.deriv + self.deriv * rhs.value,
        )
    }
}

impl Div for DualComplex {
    type Output = DualComplex;
    fn div(self, rhs: DualComplex) -> DualComplex {
        let v = self.value / rhs.value;
        DualComplex::new(v, (self.deriv - v * rhs.deriv) / rhs.value)
    }
}

/// A rational direction u = num/den. Unlike a RationalMap it may be constant
/// or identically zero; it is only ever evaluated, never iterated.
#[derive(Debug, Clone)]
pub struct Direction {
    num: Poly,
    den: Poly,
}

impl Direction {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput("direction denominator is zero".into()));
        }
        Ok(Direction { num, den })
    }

    pub fn polynomial(num: Poly) -> Self {
        Direction { num, den: Poly::one() }
    }

    pub fn zero() -> Self {
        Direction { num: Poly::zero(), den: Poly::one() }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let qz = self.den.eval(z);
        let scale = self.den.max_coeff_abs()
            * self.den.degree().map_or(1.0, |d| z.norm().max(1.0).powi(d as i32));
        if qz.norm() <= POLE_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::PoleHit { z });
        }
        Ok(self.num.eval(z) / qz)
    }

    pub fn derivative_at(&self, z: Complex64) -> Result<Complex64> {
        let qz = self.den.eval(z);
        let scale = self.den.max_coeff_abs()
            * self.den.degree().map_or(1.0, |d| z.norm().max(1.0).powi(d as i32));
        if qz.norm() <= POLE_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::PoleHit { z });
        }
        Ok(wronskian(&self.num, &self.den).eval(z) / (qz * qz))
    }
}

/// The affine family f_t = base + t * direction, t complex near 0.
#[derive(Debug, Clone)]
pub struct Family {
    pub base: RationalMap,
    pub direction: Direction,
}

impl Family {
    pub fn new(base: RationalMap, direction: Direction) -> Self {
        Family { base, direction }
    }

    /// f_t(z), evaluated pointwise.
    pub fn eval_at(&self, t: Complex64, z: Complex64) -> Result<Complex64> {
        Ok(self.base.eval(z)? + t * self.direction.eval(z)?)
    }
}

/// c(t) = c + t cdot + O(t^2) for the critical point continuing c, from
/// differentiating f_t'(c(t)) = 0: cdot = -u'(c)/f''(c).
pub fn track_critical_point(family: &Family, c: Complex64) -> Result<DualComplex> {
    let f = &family.base;
    let dc = f.derivative_at(c)?;
    if dc.norm() > CRITICAL_POINT_TOL * (1.0 + c.norm()) {
        return Err(Error::NotCritical { c, deriv_abs: dc.norm() });
    }
    let second = f.second_derivative_at(c)?;
    if second.norm() <= DEGENERATE_CRITICAL_TOL * (1.0 + c.norm()) {
        return Err(Error::DegenerateCritical { second_abs: second.norm() });
    }
    let cdot = -family.direction.derivative_at(c)? / second;
    Ok(DualComplex::new(c, cdot))
}

/// d/dt at t = 0 of f_t^m(c(t)) for m = 1..=m_max, one dual sweep. Each step
/// transports the jet by z -> f(z) + eps (u(z) + f'(z) z_eps): the epsilon
/// part collects the explicit t-dependence through u and the implicit one
/// through the moving point.
pub fn orbit_derivative_sequence(
    family: &Family,
    c: Complex64,
    m_max: usize,
) -> Result<Vec<DualComplex>> {
    let seed = track_critical_point(family, c)?;
    let f = &family.base;
    let mut jets = Vec::with_capacity(m_max);
    let mut z = seed;
    for _ in 0..m_max {
        let fz = f.eval(z.value)?;
        let dfz = f.derivative_at(z.value)?;
        let uz = family.direction.eval(z.value)?;
        z = DualComplex::new(fz, uz + dfz * z.deriv);
        jets.push(z);
    }
    Ok(jets)
}

/// The jet of f_t^m(c(t)) at t = 0.
pub fn orbit_derivative(family: &Family, c: Complex64, m: usize) -> Result<DualComplex> {
    if m == 0 {
        return track_critical_point(family, c);
    }
    Ok(*orbit_derivative_sequence(family, c, m)?.last().unwrap())
}

/// Quotients Q_m = (d/dt f_t^m(c(t))) / (f^{m-1})'(f(c)) against the series
/// partials S_M = sum over n <= M of u(f^n(c)) / (f^n)'(f(c)). Both are
/// reported verbatim; `gap` measures their agreement and arbitrates the
/// index conventions.
#[derive(Debug, Clone)]
pub struct TransversalityReport {
    pub quotients: Vec<Complex64>,
    pub series_partials: Vec<Complex64>,
    pub limit_estimate: Complex64,
    pub series_estimate: Complex64,
    pub gap: f64,
    pub quotients_converged: bool,
    pub series_converged: bool,
    pub nonzero_verdict: bool,
    pub margin: f64,
}

/// A sequence has settled when its last `CONVERGENCE_WINDOW` steps each move
/// it by at most CONVERGENCE_RTOL relative to the final value.
fn settled(seq: &[Complex64]) -> bool {
    if seq.len() < CONVERGENCE_WINDOW + 1 {
        return false;
    }
    let last = seq.last().unwrap().norm();
    seq.windows(2)
        .rev()
        .take(CONVERGENCE_WINDOW)
        .all(|w| (w[1] - w[0]).norm() <= CONVERGENCE_RTOL * last.max(1e-300))
        && seq.iter().rev().take(CONVERGENCE_WINDOW + 1).all(|z| z.is_finite())
}

pub fn transversality(
    family: &Family,
    c: Complex64,
    m_max: usize,
) -> Result<TransversalityReport> {
    let f = &family.base;
    let jets = orbit_derivative_sequence(family, c, m_max)?;
    let v = f.eval(c)?;

    // Orbit of c for the series numerators and the derivative products
    // (f^n)'(v) shared by both sequences.
    let mut c_orbit = Vec::with_capacity(m_max);
    let mut derivs_at_v = Vec::with_capacity(m_max);
    let mut z = c;
    let mut w = v;
    let mut d = Complex64::new(1.0, 0.0);
    for _ in 0..m_max {
        c_orbit.push(z);
        derivs_at_v.push(d);
        z = f.eval(z)?;
        d *= f.derivative_at(w)?;
        w = f.eval(w)?;
    }

    let mut quotients = Vec::with_capacity(m_max);
    for (m, jet) in jets.iter().enumerate() {
        // Q_{m+1} divides by (f^m)'(v); a vanishing product means the orbit
        // met a critical point and the sequence stops there.
        if derivs_at_v[m].norm() == 0.0 {
            break;
        }
        quotients.push(jet.deriv / derivs_at_v[m]);
    }
    let mut series_partials = Vec::with_capacity(m_max);
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..m_max {
        if derivs_at_v[n].norm() == 0.0 {
            break;
        }
        acc += family.direction.eval(c_orbit[n])? / derivs_at_v[n];
        series_partials.push(acc);
    }

    let quotients_converged = settled(&quotients);
    let series_converged = settled(&series_partials);
    if !quotients_converged && !series_converged {
        return Err(Error::NonConvergence(format!(
            "neither the quotient sequence nor the series settled within {m_max} iterates"
        )));
    }
    let limit_estimate = quotients.last().copied().unwrap_or(Complex64::new(0.0, 0.0));
    let series_estimate = series_partials.last().copied().unwrap_or(Complex64::new(0.0, 0.0));
    let primary = if quotients_converged { limit_estimate } else { series_estimate };
    let margin = primary.norm();
    Ok(TransversalityReport {
        gap: (limit_estimate - series_estimate).norm(),
        quotients,
        series_partials,
        limit_estimate,
        series_estimate,
        quotients_converged,
        series_converged,
        nonzero_verdict: margin > NONZERO_MARGIN_FACTOR * CONVERGENCE_RTOL,
        margin,
    })
}

/// Matrix of transversality limits, rows indexed by critical points and
/// columns by family directions, with singular values and the numerical rank
/// at the relative threshold.
#[derive(Debug, Clone)]
pub struct LMatrix {
    pub entries: Vec<Vec<Complex64>>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

pub fn l_matrix(families: &[Family], crits: &[Complex64], m_max: usize) -> Result<LMatrix> {
    let mut entries = Vec::with_capacity(crits.len());
    for &c in crits {
        let mut row = Vec::with_capacity(families.len());
        for fam in families {
            let report = transversality(fam, c, m_max)?;
            let value = if report.quotients_converged {
                report.limit_estimate
            } else {
                report.series_estimate
            };
            row.push(value);
        }
        entries.push(row);
    }
    let singular_values = singular_values(&entries);
    let top = singular_values.first().copied().unwrap_or(0.0);
    let rank = singular_values.iter().filter(|&&s| s > RANK_RTOL * top).count();
    Ok(LMatrix { entries, singular_values, rank })
}

/// Singular values of a small complex matrix via the Hermitian eigenproblem
/// of the Gram matrix, solved by cyclic Jacobi rotations.
fn singular_values(a: &[Vec<Complex64>]) -> Vec<f64> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    // Gram matrix G = A^H A (cols x cols), Hermitian positive semidefinite.
    let mut g = vec![vec![Complex64::new(0.0, 0.0); cols]; cols];
    for (i, gi) in g.iter_mut().enumerate() {
        for j in 0..cols {
            let mut s = Complex64::new(0.0, 0.0);
            for row in a {
                s += row[i].conj() * row[j];
            }
            gi[j] = s;
        }
    }
    let eigs = hermitian_eigenvalues(&mut g);
    let mut svs: Vec<f64> = eigs.iter().map(|&l| l.max(0.0).sqrt()).collect();
    svs.sort_by(|x, y| y.partial_cmp(x).unwrap());
    // At most min(rows, cols) singular values are meaningful.
    svs.truncate(rows.min(cols));
    svs
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi sweeps with complex
/// rotations. The matrix is consumed.
fn hermitian_eigenvalues(h: &mut [Vec<Complex64>]) -> Vec<f64> {
    let n = h.len();
    if n == 1 {
        return vec![h[0][0].re];
    }
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += h[p][q].norm_sqr();
            }
        }
        let scale: f64 = (0..n).map(|i| h[i][i].re.abs()).fold(1e-300, f64::max);
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let hpq = h[p][q];
                if hpq.norm() <= 1e-300 {
                    continue;
                }
                // Phase out the pivot, then a real Jacobi rotation.
                let phase = hpq / hpq.norm();
                let app = h[p][p].re;
                let aqq = h[q][q].re;
                let tau = (aqq - app) / (2.0 * hpq.norm());
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cth = 1.0 / (1.0 + t * t).sqrt();
                let sth = t * cth;
                let s = phase * sth;
                // Columns p and q of the rotation: e_p -> c e_p + s^* e_q is
                // applied on both sides.
                for i in 0..n {
                    let hip = h[i][p];
                    let hiq = h[i][q];
                    h[i][p] = hip * cth - hiq * s.conj();
                    h[i][q] = hip * s + hiq * cth;
                }
                for i in 0..n {
                    let hpi = h[p][i];
                    let hqi = h[q][i];
                    h[p][i] = hpi * cth - hqi * s;
                    h[q][i] = hpi * s.conj() + hqi * cth;
                }
            }
        }
    }
    (0..n).map(|i| h[i][i].re).collect()
}
