//! Rational maps p/q in lowest terms, their fibers, critical points, orbits,
//! and Moebius conjugation.
//!
//! Degree means max(deg p, deg q) throughout. Points at infinity are never
//! stored as coordinates; they appear as explicit multiplicity bookkeeping
//! wherever a polynomial degree falls short of the map degree.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::{Poly, RootSet};
use crate::tolerances::{
    COPRIME_TOL, DEFAULT_ESCAPE_RADIUS, FIBER_CANCEL_RTOL, MOEBIUS_DET_TOL, POLE_TOL,
};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone)]
pub struct RationalMap {
    num: Poly,
    den: Poly,
    degree: usize,
}

/// A fiber f^{-1}(x): finite points as a RootSet plus the multiplicity of
/// infinity, which together always carry `degree` preimages.
#[derive(Debug, Clone)]
pub struct Fiber {
    pub finite: RootSet,
    pub infinity_multiplicity: usize,
}

/// Critical points of f: zeros of p'q - pq' plus the criticality of infinity
/// read off the degree deficiency of that polynomial.
#[derive(Debug, Clone)]
pub struct CriticalPoints {
    pub finite: RootSet,
    pub infinity_multiplicity: usize,
}

impl CriticalPoints {
    pub fn infinity_is_critical(&self) -> bool {
        self.infinity_multiplicity > 0
    }
}

/// Forward orbit with the cumulative derivative along it.
/// derivs[n] is the derivative of the n-th iterate at the starting point.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub points: Vec<Complex64>,
    pub derivs: Vec<Complex64>,
    pub escaped: bool,
    pub escape_index: Option<usize>,
    pub pole_index: Option<usize>,
}

/// The expansion f(z) = sigma z + b + O(1/z), defined when deg p = deg q + 1.
#[derive(Debug, Clone, Copy)]
pub struct InfinityForm {
    pub sigma: Complex64,
    pub b: Complex64,
}

#[derive(Debug, Clone, Copy)]
pub struct Moebius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Moebius {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det_abs = (a * d - b * c).norm();
        if det_abs <= MOEBIUS_DET_TOL {
            return Err(Error::SingularMoebius { det_abs });
        }
        Ok(Moebius { a, b, c, d })
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }
}

/// Wronskian numerator p'q - pq' computed coefficient-wise as
/// sum over i+j = k+1 of (i - j) p_i q_j, so the structural cancellation of
/// the top coefficient when deg p = deg q is exact in floating point.
pub fn wronskian(p: &Poly, q: &Poly) -> Poly {
    if p.is_zero() || q.is_zero() {
        return Poly::zero();
    }
    let (dp, dq) = (p.degree().unwrap(), q.degree().unwrap());
    let top = dp + dq; // coefficient index k+1 runs up to dp+dq
    let mut coeffs = vec![Complex64::new(0.0, 0.0); top.max(1)];
    for i in 0..=dp {
        for j in 0..=dq {
            if i + j == 0 {
                continue;
            }
            let k = i + j - 1;
            let w = i as f64 - j as f64;
            if w != 0.0 {
                coeffs[k] += Complex64::new(w, 0.0) * p.coeff(i) * q.coeff(j);
            }
        }
    }
    Poly::new(coeffs)
}

impl RationalMap {
    /// Builds p/q, requiring deg >= 1, a nonzero denominator, and no shared
    /// roots between p and q within the coprimality tolerance.
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput("denominator is identically zero".into()));
        }
        let dp = num.degree();
        let dq = den.degree().unwrap();
        let degree = dp.map_or(0, |d| d).max(dq);
        if degree == 0 {
            return Err(Error::DegreeTooLow(
                "constant maps are excluded; degree >= 1 required".into(),
            ));
        }
        // Root cross-check: no root of one polynomial within COPRIME_TOL of a
        // root of the other. Constants have no roots, so only the d >= 1 pair
        // needs the check.
        if dp.unwrap_or(0) >= 1 && dq >= 1 {
            let rp = num.find_roots()?;
            let rq = den.find_roots()?;
            for &zq in &rq.roots {
                for &zp in &rp.roots {
                    if (zq - zp).norm() <= COPRIME_TOL {
                        return Err(Error::NotCoprime { root: zq });
                    }
                }
            }
        }
        Ok(RationalMap { num, den, degree })
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn pole_threshold(&self, z: Complex64) -> f64 {
        let dq = self.den.degree().unwrap() as i32;
        POLE_TOL * self.den.max_coeff_abs() * z.norm().max(1.0).powi(dq)
    }

    pub fn is_pole(&self, z: Complex64) -> bool {
        self.den.eval(z).norm() <= self.pole_threshold(z)
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let qv = self.den.eval(z);
        if qv.norm() <= self.pole_threshold(z) {
            return Err(Error::PoleHit { z });
        }
        Ok(self.num.eval(z) / qv)
    }

    /// f'(z) = (p'q - pq') / q^2.
    pub fn derivative_at(&self, z: Complex64) -> Result<Complex64> {
        let qv = self.den.eval(z);
        if qv.norm() <= self.pole_threshold(z) {
            return Err(Error::PoleHit { z });
        }
        let w = wronskian(&self.num, &self.den).eval(z);
        Ok(w / (qv * qv))
    }

    /// f''(z) = (W'q - 2Wq') / q^3 with W = p'q - pq'.
    pub fn second_derivative_at(&self, z: Complex64) -> Result<Complex64> {
        let qv = self.den.eval(z);
        if qv.norm() <= self.pole_threshold(z) {
            return Err(Error::PoleHit { z });
        }
        let w = wronskian(&self.num, &self.den);
        let top = &(&w.derivative() * &self.den) - &(&w.scale(Complex64::new(2.0, 0.0)) * &self.den.derivative());
        Ok(top.eval(z) / (qv * qv * qv))
    }

    /// The polynomial whose roots are the finite points of f^{-1}(x), namely
    /// p - x q with data-dependent leading cancellation trimmed: a top
    /// coefficient tiny against |p_k| + |x||q_k| is an exact cancellation for
    /// fiber purposes and surfaces as preimages at infinity.
    fn fiber_poly(&self, x: Complex64) -> Poly {
        let n = self.degree;
        let mut coeffs: Vec<Complex64> = (0..=n).map(|k| self.num.coeff(k) - x * self.den.coeff(k)).collect();
        for k in (0..=n).rev() {
            let scale = self.num.coeff(k).norm() + x.norm() * self.den.coeff(k).norm();
            if coeffs[k].norm() <= FIBER_CANCEL_RTOL * scale {
                coeffs[k] = Complex64::new(0.0, 0.0);
                coeffs.pop();
            } else {
                break;
            }
        }
        Poly::new(coeffs)
    }

    /// All preimages of a finite point x, with infinity bookkeeping: the
    /// degree deficiency of p - xq is the multiplicity of infinity in the
    /// fiber. Finite multiplicities plus that deficiency always sum to the
    /// map degree.
    pub fn preimages(&self, x: Complex64) -> Result<Fiber> {
        let fp = self.fiber_poly(x);
        let fp_deg = match fp.degree() {
            Some(d) => d,
            None => {
                return Err(Error::InvalidInput(
                    "fiber polynomial vanished identically; the map data is degenerate".into(),
                ))
            }
        };
        let infinity_multiplicity = self.degree - fp_deg;
        let finite = if fp_deg == 0 {
            RootSet { roots: vec![], multiplicities: vec![], residuals: vec![], converged: true }
        } else {
            let set = fp.find_roots()?;
            if !set.converged {
                return Err(Error::NonConvergence(format!(
                    "fiber of x = {x} did not settle to residual tolerance"
                )));
            }
            set
        };
        Ok(Fiber { finite, infinity_multiplicity })
    }

    /// Critical points: roots of the Wronskian numerator, plus the degree
    /// deficiency of that polynomial relative to 2 deg - 2, which is the
    /// multiplicity of infinity as a critical point.
    pub fn critical_points(&self) -> Result<CriticalPoints> {
        if self.degree < 2 {
            return Err(Error::DegreeTooLow(
                "critical points need degree >= 2; a degree-1 map has none".into(),
            ));
        }
        let w = wronskian(&self.num, &self.den);
        let expected = 2 * self.degree - 2;
        let wd = match w.degree() {
            Some(d) => d,
            None => {
                return Err(Error::InvalidInput(
                    "derivative numerator vanished identically; the map data is degenerate".into(),
                ))
            }
        };
        let infinity_multiplicity = expected - wd.min(expected);
        let finite = if wd == 0 {
            RootSet { roots: vec![], multiplicities: vec![], residuals: vec![], converged: true }
        } else {
            let set = w.find_roots()?;
            if !set.converged {
                return Err(Error::NonConvergence(
                    "critical points did not settle to residual tolerance".into(),
                ));
            }
            set
        };
        Ok(CriticalPoints { finite, infinity_multiplicity })
    }

    /// Forward orbit of z0 for at most m steps, carrying the cumulative
    /// derivative. Stops at the first point beyond the escape radius (kept,
    /// flagged) or at a pole (orbit truncated there, flagged in-band).
    pub fn orbit(&self, z0: Complex64, m: usize, escape_radius: f64) -> Orbit {
        let mut points = vec![z0];
        let mut derivs = vec![ONE];
        let orbit = |points: &mut Vec<Complex64>, derivs: &mut Vec<Complex64>| -> (bool, Option<usize>, Option<usize>) {
            if z0.norm() > escape_radius {
                return (true, Some(0), None);
            }
            for _ in 0..m {
                let z = *points.last().unwrap();
                let fz = match self.eval(z) {
                    Ok(v) => v,
                    Err(_) => return (false, None, Some(points.len() - 1)),
                };
                let dz = match self.derivative_at(z) {
                    Ok(v) => v,
                    Err(_) => return (false, None, Some(points.len() - 1)),
                };
                derivs.push(dz * derivs.last().unwrap());
                points.push(fz);
                if fz.norm() > escape_radius {
                    return (true, Some(points.len() - 1), None);
                }
            }
            (false, None, None)
        };
        let (escaped, escape_index, pole_index) = orbit(&mut points, &mut derivs);
        Orbit { points, derivs, escaped, escape_index, pole_index }
    }

    pub fn orbit_default_escape(&self, z0: Complex64, m: usize) -> Orbit {
        self.orbit(z0, m, DEFAULT_ESCAPE_RADIUS)
    }

    /// sigma and b of f(z) = sigma z + b + O(1/z); None unless
    /// deg p = deg q + 1. b is the constant coefficient of the division
    /// quotient of p by q.
    pub fn infinity_form(&self) -> Option<InfinityForm> {
        let dp = self.num.degree()?;
        let dq = self.den.degree().unwrap();
        if dp != dq + 1 {
            return None;
        }
        let sigma = self.num.leading() / self.den.leading();
        let (quo, _) = self.num.divrem(&self.den).ok()?;
        Some(InfinityForm { sigma, b: quo.coeff(0) })
    }

    /// M o f o M^{-1} in lowest terms. Common roots of the raw numerator and
    /// denominator (within the coprimality tolerance) are cancelled by root
    /// matching before reconstruction.
    pub fn moebius_conjugate(&self, m: &Moebius) -> Result<RationalMap> {
        let n = self.degree;
        // z = M^{-1}(w) = (d w - b) / (-c w + a); clearing the common power
        // (-c w + a)^n turns p(M^{-1}) and q(M^{-1}) into polynomials.
        let up = Poly::new(vec![-m.b, m.d]); // d w - b
        let dn = Poly::new(vec![m.a, -m.c]); // -c w + a
        let mut up_pows = vec![Poly::one()];
        let mut dn_pows = vec![Poly::one()];
        for k in 1..=n {
            up_pows.push(&up_pows[k - 1] * &up);
            dn_pows.push(&dn_pows[k - 1] * &dn);
        }
        let lift = |poly: &Poly| -> Poly {
            let mut acc = Poly::zero();
            for k in 0..=n {
                let c = poly.coeff(k);
                if c.norm() != 0.0 {
                    acc = &acc + &(&up_pows[k] * &dn_pows[n - k]).scale(c);
                }
            }
            acc
        };
        let p_lift = lift(&self.num);
        let q_lift = lift(&self.den);
        let raw_num = &p_lift.scale(m.a) + &q_lift.scale(m.b);
        let raw_den = &p_lift.scale(m.c) + &q_lift.scale(m.d);
        let (num, den) = cancel_common_roots(raw_num, raw_den)?;
        RationalMap::new(num, den)
    }
}

/// Divides out shared roots by root matching and rebuilds both polynomials
/// from their surviving roots and leading coefficients.
fn cancel_common_roots(num: Poly, den: Poly) -> Result<(Poly, Poly)> {
    let dn = num.degree().unwrap_or(0);
    let dd = den.degree().unwrap_or(0);
    if num.is_zero() || den.is_zero() || dn == 0 || dd == 0 {
        return Ok((num, den));
    }
    let rn = num.find_roots()?;
    let rd = den.find_roots()?;
    let mut num_roots = expand(&rn);
    let mut den_roots = expand(&rd);
    let mut cancelled = false;
    let mut i = 0;
    while i < den_roots.len() {
        let r = den_roots[i];
        let tol = COPRIME_TOL * r.norm().max(1.0);
        if let Some(j) = num_roots.iter().position(|&s| (s - r).norm() <= tol) {
            num_roots.swap_remove(j);
            den_roots.swap_remove(i);
            cancelled = true;
        } else {
            i += 1;
        }
    }
    if !cancelled {
        return Ok((num, den));
    }
    Ok((
        Poly::from_roots(num.leading(), &num_roots),
        Poly::from_roots(den.leading(), &den_roots),
    ))
}

fn expand(set: &RootSet) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(set.total_multiplicity());
    for (&r, &m) in set.roots.iter().zip(&set.multiplicities) {
        out.extend(std::iter::repeat(r).take(m));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn joukowski() -> RationalMap {
        // (z^2 + 1) / (2z)
        RationalMap::new(Poly::from_real(&[1.0, 0.0, 1.0]), Poly::from_real(&[0.0, 2.0])).unwrap()
    }

    fn square() -> RationalMap {
        RationalMap::new(Poly::from_real(&[0.0, 0.0, 1.0]), Poly::one()).unwrap()
    }

    #[test]
    fn joukowski_critical_points() {
        let cp = joukowski().critical_points().unwrap();
        assert_eq!(cp.finite.roots.len(), 2);
        assert!(!cp.infinity_is_critical());
        let mut roots = cp.finite.roots.clone();
        roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((roots[0] - c(-1.0, 0.0)).norm() < 1e-10);
        assert!((roots[1] - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn cube_has_double_critical_origin_and_infinity() {
        let f = RationalMap::new(Poly::from_real(&[0.0, 0.0, 0.0, 1.0]), Poly::one()).unwrap();
        let cp = f.critical_points().unwrap();
        assert_eq!(cp.finite.roots.len(), 1);
        assert_eq!(cp.finite.multiplicities, vec![2]);
        assert_eq!(cp.finite.roots[0], c(0.0, 0.0));
        assert_eq!(cp.infinity_multiplicity, 2);
    }

    #[test]
    fn joukowski_fiber_of_critical_value() {
        let fiber = joukowski().preimages(c(1.0, 0.0)).unwrap();
        assert_eq!(fiber.infinity_multiplicity, 0);
        assert_eq!(fiber.finite.roots.len(), 1);
        assert_eq!(fiber.finite.multiplicities, vec![2]);
        assert!((fiber.finite.roots[0] - c(1.0, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn fiber_multiplicity_conservation() {
        let f = joukowski();
        for &x in &[c(0.3, 0.7), c(-2.0, 0.1), c(5.0, -3.0)] {
            let fiber = f.preimages(x).unwrap();
            assert_eq!(fiber.finite.total_multiplicity() + fiber.infinity_multiplicity, 2);
            for &w in &fiber.finite.roots {
                assert!((f.eval(w).unwrap() - x).norm() <= 1e-8 * x.norm().max(1.0));
            }
        }
    }

    #[test]
    fn same_degree_map_sends_infinity_into_fiber() {
        // f = (z^2 + 1) / z^2 maps infinity to 1; the fiber of 1 is all at
        // infinity (p - q is constant).
        let f = RationalMap::new(Poly::from_real(&[1.0, 0.0, 1.0]), Poly::from_real(&[0.0, 0.0, 1.0]))
            .unwrap();
        let fiber = f.preimages(c(1.0, 0.0)).unwrap();
        assert_eq!(fiber.infinity_multiplicity, 2);
        assert!(fiber.finite.is_empty());
        // A generic value has two finite preimages.
        let fiber = f.preimages(c(3.0, 1.0)).unwrap();
        assert_eq!(fiber.infinity_multiplicity, 0);
        assert_eq!(fiber.finite.total_multiplicity(), 2);
    }

    #[test]
    fn orbit_of_basilica_tip() {
        let f = RationalMap::new(Poly::from_real(&[-2.0, 0.0, 1.0]), Poly::one()).unwrap();
        let orbit = f.orbit_default_escape(c(-2.0, 0.0), 3);
        let pts: Vec<f64> = orbit.points.iter().map(|z| z.re).collect();
        assert_eq!(pts, vec![-2.0, 2.0, 2.0, 2.0]);
        let ds: Vec<f64> = orbit.derivs.iter().map(|z| z.re).collect();
        assert_eq!(ds, vec![1.0, -4.0, -16.0, -64.0]);
        assert!(!orbit.escaped);
        assert_eq!(orbit.pole_index, None);
    }

    #[test]
    fn orbit_escape_truncates() {
        let orbit = square().orbit(c(2.0, 0.0), 10, 100.0);
        assert!(orbit.escaped);
        assert_eq!(orbit.escape_index, Some(3));
        assert_eq!(orbit.points.len(), 4);
        assert_eq!(orbit.points[3], c(256.0, 0.0));
        assert_eq!(orbit.derivs.len(), 4);
    }

    #[test]
    fn orbit_hits_pole() {
        let orbit = joukowski().orbit_default_escape(c(0.0, 0.0), 5);
        assert_eq!(orbit.pole_index, Some(0));
        assert_eq!(orbit.points.len(), 1);
    }

    #[test]
    fn infinity_form_examples() {
        let f = RationalMap::new(Poly::from_real(&[1.0, 0.0, 1.0]), Poly::from_real(&[3.0, 1.0]))
            .unwrap();
        let form = f.infinity_form().unwrap();
        assert!((form.sigma - ONE).norm() < 1e-15);
        assert!((form.b - c(-3.0, 0.0)).norm() < 1e-15);

        assert!(square().infinity_form().is_none());

        let rot = RationalMap::new(Poly::new(vec![c(0.0, 0.0), c(0.0, 1.0)]), Poly::one()).unwrap();
        let form = rot.infinity_form().unwrap();
        assert!((form.sigma - c(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(form.b, c(0.0, 0.0));
    }

    #[test]
    fn moebius_conjugation_by_shift() {
        let f = RationalMap::new(Poly::from_real(&[1.0, 0.0, 1.0]), Poly::one()).unwrap();
        let m = Moebius::new(ONE, ONE, c(0.0, 0.0), ONE).unwrap(); // z + 1
        let g = f.moebius_conjugate(&m).unwrap();
        // w^2 - 2w + 3 over 1.
        let want = Poly::from_real(&[3.0, -2.0, 1.0]);
        let lead = g.den().coeff(0);
        for k in 0..=2 {
            assert!((g.num().coeff(k) / lead - want.coeff(k)).norm() < 1e-12);
        }
        assert_eq!(g.den().degree(), Some(0));
        assert_eq!(g.degree(), 2);
    }

    #[test]
    fn moebius_conjugation_by_inversion() {
        let m = Moebius::new(c(0.0, 0.0), ONE, ONE, c(0.0, 0.0)).unwrap(); // 1/z
        let g = square().moebius_conjugate(&m).unwrap();
        assert_eq!(g.degree(), 2);
        // 1 / f(1/w) = w^2.
        let z = c(1.3, -0.4);
        assert!((g.eval(z).unwrap() - z * z).norm() < 1e-12);
    }

    #[test]
    fn moebius_covariance_pointwise() {
        let f = joukowski();
        let m = Moebius::new(c(1.0, 0.5), c(0.0, -1.0), c(0.2, 0.0), ONE).unwrap();
        let g = f.moebius_conjugate(&m).unwrap();
        for &z in &[c(0.7, 0.2), c(-1.4, 1.1), c(2.0, -0.3)] {
            let lhs = g.eval(m.apply(z)).unwrap();
            let rhs = m.apply(f.eval(z).unwrap());
            assert!((lhs - rhs).norm() < 1e-9, "covariance off at {z}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn singular_moebius_rejected() {
        match Moebius::new(ONE, ONE, ONE, ONE) {
            Err(Error::SingularMoebius { .. }) => {}
            other => panic!("expected SingularMoebius, got {other:?}"),
        }
    }

    #[test]
    fn pole_evaluation_rejected() {
        match joukowski().eval(c(0.0, 0.0)) {
            Err(Error::PoleHit { .. }) => {}
            other => panic!("expected PoleHit, got {other:?}"),
        }
    }

    #[test]
    fn shared_root_rejected() {
        // (z^2 - 1) / (z - 1) shares the root 1.
        let res = RationalMap::new(Poly::from_real(&[-1.0, 0.0, 1.0]), Poly::from_real(&[-1.0, 1.0]));
        match res {
            Err(Error::NotCoprime { .. }) => {}
            other => panic!("expected NotCoprime, got {other:?}"),
        }
    }

    #[test]
    fn degree_one_admitted() {
        let lambda = Complex64::from_polar(1.0, 2.0);
        let f = RationalMap::new(Poly::new(vec![c(0.0, 0.0), lambda]), Poly::one()).unwrap();
        assert_eq!(f.degree(), 1);
        let fiber = f.preimages(c(1.0, 1.0)).unwrap();
        assert_eq!(fiber.finite.roots.len(), 1);
        assert!((fiber.finite.roots[0] - c(1.0, 1.0) / lambda).norm() < 1e-14);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let f = joukowski();
        let z = c(0.8, 0.3);
        let h = 1e-5;
        let fd = (f.derivative_at(z + c(h, 0.0)).unwrap() - f.derivative_at(z - c(h, 0.0)).unwrap())
            / c(2.0 * h, 0.0);
        let exact = f.second_derivative_at(z).unwrap();
        assert!((fd - exact).norm() < 1e-7 * exact.norm().max(1.0));
    }
}
