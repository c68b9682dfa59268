//! Dense polynomials over the complex numbers and a simultaneous root solver.
//!
//! Coefficients are stored in ascending order. The zero polynomial is the
//! empty coefficient list; `degree()` returns `None` for it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerances::{
    CLUSTER_RADIUS_FACTOR, ROOT_ITERATION_CAP, ROOT_RESIDUAL_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

/// Roots with multiplicities. `converged` certifies that the refinement froze
/// before the iteration cap and that every reported root passes the scaled
/// residual test; callers that need trustworthy fibers check it.
#[derive(Debug, Clone)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    pub multiplicities: Vec<usize>,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    fn empty() -> Self {
        RootSet { roots: Vec::new(), multiplicities: Vec::new(), residuals: Vec::new(), converged: true }
    }

    /// Deterministic ordering for reports: lexicographic by (re, im).
    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.roots.len()).collect();
        idx.sort_by(|&a, &b| {
            let (x, y) = (self.roots[a], self.roots[b]);
            (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap_or(std::cmp::Ordering::Equal)
        });
        self.roots = idx.iter().map(|&i| self.roots[i]).collect();
        self.multiplicities = idx.iter().map(|&i| self.multiplicities[i]).collect();
        self.residuals = idx.iter().map(|&i| self.residuals[i]).collect();
    }
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl Poly {
    /// Builds a polynomial, trimming exactly-zero leading coefficients.
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Poly { coeffs: vec![ONE] }
    }

    pub fn constant(c: Complex64) -> Self {
        Poly::new(vec![c])
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Monic product of (z - r) over the given roots, scaled by `lead`.
    pub fn from_roots(lead: Complex64, roots: &[Complex64]) -> Self {
        let mut p = Poly::constant(lead);
        for &r in roots {
            p = &p * &Poly::new(vec![-r, ONE]);
        }
        p
    }

    fn trim(&mut self) {
        while let Some(last) = self.coeffs.last() {
            if last.re == 0.0 && last.im == 0.0 {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// None for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() { None } else { Some(self.coeffs.len() - 1) }
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    pub fn max_coeff_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Evaluates p(z) together with sum_k |c_k| |z|^k, the natural scale of
    /// rounding noise in the Horner recurrence.
    pub fn eval_with_scale(&self, z: Complex64) -> (Complex64, f64) {
        let r = z.norm();
        let mut acc = ZERO;
        let mut scale = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
            scale = scale * r + c.norm();
        }
        (acc, scale)
    }

    /// Residual |p(z)| / (max|coeff| * max(1, |z|)^deg); the convergence
    /// currency of the root solver.
    pub fn scaled_residual(&self, z: Complex64) -> f64 {
        let deg = match self.degree() {
            Some(d) => d as i32,
            None => return 0.0,
        };
        let denom = self.max_coeff_abs() * z.norm().max(1.0).powi(deg);
        if denom == 0.0 { 0.0 } else { self.eval(z).norm() / denom }
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        let coeffs = self.coeffs[1..]
            .iter()
            .enumerate()
            .map(|(i, &c)| c * Complex64::new((i + 1) as f64, 0.0))
            .collect();
        Poly::new(coeffs)
    }

    /// self(other(z)) by Horner over polynomials.
    pub fn compose(&self, other: &Poly) -> Poly {
        let mut acc = Poly::zero();
        for &c in self.coeffs.iter().rev() {
            acc = &(&acc * other) + &Poly::constant(c);
        }
        acc
    }

    pub fn scale(&self, k: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    /// Quotient and remainder of self / divisor.
    pub fn divrem(&self, divisor: &Poly) -> Result<(Poly, Poly)> {
        let dd = divisor
            .degree()
            .ok_or_else(|| Error::DegreeTooLow("division by the zero polynomial".into()))?;
        let nd = match self.degree() {
            Some(d) => d,
            None => return Ok((Poly::zero(), Poly::zero())),
        };
        if nd < dd {
            return Ok((Poly::zero(), self.clone()));
        }
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quo = vec![ZERO; nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let q = rem[k + dd] / lead;
            quo[k] = q;
            for j in 0..=dd {
                let t = q * divisor.coeff(j);
                rem[k + j] -= t;
            }
        }
        rem.truncate(dd);
        Ok((Poly::new(quo), Poly::new(rem)))
    }

    /// All complex roots with multiplicities.
    ///
    /// Exact zero roots are deflated first; the rest go through an
    /// Ehrlich-Aberth sweep from a perturbed circle. A root freezes when its
    /// correction stagnates or its value sinks into evaluation noise. Roots
    /// closer than the cluster radius merge, and the cluster size is the
    /// reported multiplicity.
    pub fn find_roots(&self) -> Result<RootSet> {
        let deg = self
            .degree()
            .ok_or_else(|| Error::DegreeTooLow("cannot solve the zero polynomial".into()))?;
        if deg == 0 {
            return Err(Error::DegreeTooLow(
                "a nonzero constant has no roots; degree >= 1 required".into(),
            ));
        }
        for (k, c) in self.coeffs.iter().enumerate() {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite coefficient at index {k}")));
            }
        }

        // Deflate z^k exactly.
        let zero_mult = self.coeffs.iter().take_while(|c| c.re == 0.0 && c.im == 0.0).count();
        let reduced = Poly { coeffs: self.coeffs[zero_mult..].to_vec() };
        let m = reduced.degree().unwrap();

        let mut approx: Vec<Complex64> = Vec::with_capacity(deg);
        approx.extend(std::iter::repeat(ZERO).take(zero_mult));

        let mut cap_hit = false;
        if m == 1 {
            approx.push(-reduced.coeff(0) / reduced.coeff(1));
        } else if m == 2 {
            approx.extend(quadratic_roots(reduced.coeff(0), reduced.coeff(1), reduced.coeff(2)));
        } else if m > 2 {
            let (roots, frozen_all) = aberth(&reduced);
            cap_hit = !frozen_all;
            approx.extend(roots);
        }

        let mut set = merge_clusters(&approx);
        for (i, &r) in set.roots.iter().enumerate() {
            set.residuals[i] = self.scaled_residual(r);
        }
        set.converged = !cap_hit && set.residuals.iter().all(|&r| r <= ROOT_RESIDUAL_TOL);
        set.sort();
        Ok(set)
    }
}

impl std::ops::Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect();
        Poly::new(coeffs)
    }
}

impl std::ops::Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect();
        Poly::new(coeffs)
    }
}

impl std::ops::Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Poly::new(coeffs)
    }
}

/// Numerically stable quadratic formula: the large root first, the other by
/// Vieta, which avoids cancellation in b +/- sqrt(disc).
fn quadratic_roots(c0: Complex64, c1: Complex64, c2: Complex64) -> [Complex64; 2] {
    let disc = (c1 * c1 - 4.0 * c2 * c0).sqrt();
    // Pick the sign that enlarges |c1 + s*disc|.
    let s = if (c1 + disc).norm() >= (c1 - disc).norm() { disc } else { -disc };
    let q = -0.5 * (c1 + s);
    if q.norm() == 0.0 {
        // c1 = disc = 0: double root at 0 shifted by nothing.
        let r = (-c0 / c2).sqrt();
        return [r, -r];
    }
    [q / c2, c0 / q]
}

/// Ehrlich-Aberth simultaneous iteration. Returns the approximations and
/// whether every root froze before the iteration cap.
fn aberth(p: &Poly) -> (Vec<Complex64>, bool) {
    let m = p.degree().unwrap();
    let dp = p.derivative();
    let lead = p.leading();

    // Perturbed circle around the root centroid; the radius is a Cauchy-type
    // bound so every root lies inside.
    let center = -p.coeff(m - 1) / (Complex64::new(m as f64, 0.0) * lead);
    let radius = 1.0
        + p.coeffs[..m]
            .iter()
            .map(|c| (c / lead).norm())
            .fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..m)
        .map(|i| {
            let theta = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / m as f64 + 0.437;
            center + Complex64::from_polar(0.9 * radius, theta)
        })
        .collect();

    let mut frozen = vec![false; m];
    let eps = f64::EPSILON;
    for _ in 0..ROOT_ITERATION_CAP {
        if frozen.iter().all(|&f| f) {
            return (z, true);
        }
        for i in 0..m {
            if frozen[i] {
                continue;
            }
            let (pv, scale) = p.eval_with_scale(z[i]);
            if pv.norm() <= 4.0 * eps * scale {
                frozen[i] = true;
                continue;
            }
            let dv = dp.eval(z[i]);
            if dv.norm() == 0.0 {
                let bump = Complex64::new(1e-8 * (1.0 + z[i].norm()), 1e-8);
                z[i] += bump;
                continue;
            }
            let newton = pv / dv;
            let mut s = ZERO;
            for j in 0..m {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > 1e-300 {
                        s += ONE / d;
                    }
                }
            }
            let denom = ONE - newton * s;
            let w = if denom.norm() > 1e-12 { newton / denom } else { newton };
            z[i] -= w;
            if w.norm() <= 1e-14 * (1.0 + z[i].norm()) {
                frozen[i] = true;
            }
        }
    }
    (z, frozen.iter().all(|&f| f))
}

/// Groups approximations into clusters of mutual distance below the merge
/// radius; each cluster becomes one root at the cluster mean.
fn merge_clusters(points: &[Complex64]) -> RootSet {
    if points.is_empty() {
        return RootSet::empty();
    }
    let n = points.len();
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(comp: &mut Vec<usize>, i: usize) -> usize {
        if comp[i] != i {
            let r = find(comp, comp[i]);
            comp[i] = r;
        }
        comp[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            let r = CLUSTER_RADIUS_FACTOR * points[i].norm().max(points[j].norm()).max(1.0);
            if (points[i] - points[j]).norm() <= r {
                let (a, b) = (find(&mut comp, i), find(&mut comp, j));
                if a != b {
                    comp[a] = b;
                }
            }
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, Vec<Complex64>> = Default::default();
    for i in 0..n {
        let r = find(&mut comp, i);
        clusters.entry(r).or_default().push(points[i]);
    }
    let mut set = RootSet::empty();
    for (_, members) in clusters {
        let mean = members.iter().sum::<Complex64>() / members.len() as f64;
        set.roots.push(mean);
        set.multiplicities.push(members.len());
        set.residuals.push(0.0);
    }
    set
}
