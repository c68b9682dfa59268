//! Discrete and curve-supported measures and their Cauchy transforms
//! mu_hat(z) = integral of d mu(w) / (w - z).
//!
//! Curve measures store one sampled period of each closed curve: nodes z_j,
//! complex line elements dz_j, and density samples g_j, so the transform is
//! the plain quadrature sum of g_j dz_j / (z_j - z) weighted by the curve
//! orientation. That sum is trustworthy only outside a validity zone of a few
//! node spacings around each curve.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ratmap::RationalMap;
use crate::tolerances::{ATOM_HIT_TOL, SUMMABLE_DECADE_RTOL, VALIDITY_ZONE_SPACINGS};

const TAU: f64 = std::f64::consts::TAU;

/// Atoms (position b, weight alpha); duplicates are allowed and add.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    atoms: Vec<(Complex64, Complex64)>,
    /// Evaluation order: decreasing |alpha|, so large kernels accumulate first.
    order: Vec<usize>,
    total_variation: f64,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(Complex64, Complex64)>) -> Self {
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&i, &j| {
            atoms[j].1.norm().partial_cmp(&atoms[i].1.norm()).unwrap_or(std::cmp::Ordering::Equal)
        });
        let total_variation = atoms.iter().map(|(_, a)| a.norm()).sum();
        DiscreteMeasure { atoms, order, total_variation }
    }

    pub fn atoms(&self) -> &[(Complex64, Complex64)] {
        &self.atoms
    }

    pub fn total_variation(&self) -> f64 {
        self.total_variation
    }

    /// sum of alpha_k / (b_k - z), largest weights first. Undefined within
    /// ATOM_HIT_TOL of any atom position.
    pub fn cauchy(&self, z: Complex64) -> Result<Complex64> {
        for &(b, _) in &self.atoms {
            if (b - z).norm() <= ATOM_HIT_TOL {
                return Err(Error::AtomHit { atom: b, tol: ATOM_HIT_TOL });
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for &i in &self.order {
            let (b, a) = self.atoms[i];
            acc += a / (b - z);
        }
        Ok(acc)
    }

    pub fn moments(&self) -> Moments {
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        let mut tail = 0.0;
        for &(pos, w) in &self.atoms {
            a += w;
            b += w * pos;
            tail += w.norm() * (1.0 + pos.norm_sqr());
        }
        Moments { a, b, tail_s: Some(tail) }
    }

    pub fn scaled(&self, k: Complex64) -> DiscreteMeasure {
        DiscreteMeasure::new(self.atoms.iter().map(|&(b, a)| (b, a * k)).collect())
    }
}

/// A = total mass, B = first moment. tail_s carries
/// sum |alpha| (1 + |b|^2) for discrete measures and is absent for curves.
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    pub a: Complex64,
    pub b: Complex64,
    pub tail_s: Option<f64>,
}

/// One closed sampled curve. `tangents[j]` is the line element dz_j of the
/// counterclockwise parametrization; `orientation` multiplies the curve's
/// contribution, so a -1 curve subtracts.
#[derive(Debug, Clone)]
pub struct CurveComponent {
    pub nodes: Vec<Complex64>,
    pub tangents: Vec<Complex64>,
    pub density: Vec<Complex64>,
    pub orientation: i8,
}

impl CurveComponent {
    /// Largest node-to-node gap, wraparound included.
    pub fn node_spacing(&self) -> f64 {
        let n = self.nodes.len();
        (0..n)
            .map(|j| (self.nodes[(j + 1) % n] - self.nodes[j]).norm())
            .fold(0.0, f64::max)
    }

    pub fn min_distance(&self, z: Complex64) -> f64 {
        self.nodes.iter().map(|&w| (w - z).norm()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct CurveMeasure {
    pub curves: Vec<CurveComponent>,
}

fn valid_node_count(n: usize) -> bool {
    n >= 64 && n.is_power_of_two()
}

impl CurveMeasure {
    pub fn new(curves: Vec<CurveComponent>) -> Result<Self> {
        for c in &curves {
            let n = c.nodes.len();
            if !valid_node_count(n) {
                return Err(Error::InvalidInput(format!(
                    "curve node count {n} must be a power of two and at least 64"
                )));
            }
            if c.tangents.len() != n || c.density.len() != n {
                return Err(Error::InvalidInput(
                    "curve nodes, tangents and density must have equal length".into(),
                ));
            }
            if c.orientation != 1 && c.orientation != -1 {
                return Err(Error::InvalidInput("curve orientation must be +1 or -1".into()));
            }
        }
        Ok(CurveMeasure { curves })
    }

    /// A circle |w - center| = radius sampled counterclockwise at n nodes
    /// with density g(w) per dz.
    pub fn circle(
        center: Complex64,
        radius: f64,
        n: usize,
        orientation: i8,
        density: impl Fn(Complex64) -> Complex64,
    ) -> Result<CurveComponent> {
        if !valid_node_count(n) {
            return Err(Error::InvalidInput(format!(
                "curve node count {n} must be a power of two and at least 64"
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidInput("circle radius must be positive".into()));
        }
        let mut nodes = Vec::with_capacity(n);
        let mut tangents = Vec::with_capacity(n);
        let mut dens = Vec::with_capacity(n);
        let step = TAU / n as f64;
        for j in 0..n {
            let w = center + Complex64::from_polar(radius, step * j as f64);
            nodes.push(w);
            // dz = i (w - center) dtheta
            tangents.push(Complex64::new(0.0, 1.0) * (w - center) * step);
            dens.push(density(w));
        }
        Ok(CurveComponent { nodes, tangents, density: dens, orientation })
    }

    /// Quadrature Cauchy transform; rejects points inside the validity zone
    /// of any curve (five node spacings).
    pub fn cauchy(&self, z: Complex64) -> Result<Complex64> {
        for c in &self.curves {
            if c.min_distance(z) < VALIDITY_ZONE_SPACINGS * c.node_spacing() {
                return Err(Error::TooCloseToSupport { z });
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for c in &self.curves {
            let mut part = Complex64::new(0.0, 0.0);
            for j in 0..c.nodes.len() {
                part += c.density[j] * c.tangents[j] / (c.nodes[j] - z);
            }
            acc += part * c.orientation as f64;
        }
        Ok(acc)
    }

    /// A = contour integral of g dz, B = contour integral of z g dz.
    pub fn moments(&self) -> Moments {
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        for c in &self.curves {
            let mut pa = Complex64::new(0.0, 0.0);
            let mut pb = Complex64::new(0.0, 0.0);
            for j in 0..c.nodes.len() {
                let gdz = c.density[j] * c.tangents[j];
                pa += gdz;
                pb += c.nodes[j] * gdz;
            }
            a += pa * c.orientation as f64;
            b += pb * c.orientation as f64;
        }
        Moments { a, b, tail_s: None }
    }

    pub fn scaled(&self, k: Complex64) -> CurveMeasure {
        CurveMeasure {
            curves: self
                .curves
                .iter()
                .map(|c| CurveComponent {
                    nodes: c.nodes.clone(),
                    tangents: c.tangents.clone(),
                    density: c.density.iter().map(|&g| g * k).collect(),
                    orientation: c.orientation,
                })
                .collect(),
        }
    }
}

/// Convergence evidence for the weighted tail sum of an orbit measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailVerdict {
    Converging,
    Diverging,
    Inconclusive,
}

/// Partial sums of sum |alpha_n| (1 + |b_n|^2) and how the last ten terms
/// moved them.
#[derive(Debug, Clone)]
pub struct TailReport {
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub last_decade_increment: f64,
    pub verdict: TailVerdict,
}

pub(crate) fn tail_diagnostic(terms: &[f64]) -> TailReport {
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for &t in terms {
        acc += t;
        partial_sums.push(acc);
    }
    let n = terms.len();
    let decade = n.min(10);
    let last_decade_increment = if n == 0 {
        0.0
    } else if n <= decade {
        partial_sums[n - 1]
    } else {
        partial_sums[n - 1] - partial_sums[n - 1 - decade]
    };
    let last = partial_sums.last().copied().unwrap_or(0.0);
    let decade_min = terms[n.saturating_sub(decade)..].iter().fold(f64::INFINITY, |m, &t| m.min(t));
    let verdict = if n == 0 {
        TailVerdict::Inconclusive
    } else if terms.iter().any(|t| !t.is_finite()) || decade_min >= 1e-3 {
        TailVerdict::Diverging
    } else if last.is_finite() && last_decade_increment <= SUMMABLE_DECADE_RTOL * last {
        TailVerdict::Converging
    } else {
        TailVerdict::Inconclusive
    };
    TailReport { terms: terms.to_vec(), partial_sums, last_decade_increment, verdict }
}

/// Atoms (f^n(v), alpha_n) for n < len, with the tail diagnostic for
/// sum |alpha_n| (1 + |f^n(v)|^2). Escaping orbits are kept (the diagnostic
/// is the point); the iteration stops early only at poles, which surface as
/// the error.
pub fn truncate_orbit_measure(
    f: &RationalMap,
    v: Complex64,
    weight: impl Fn(usize) -> Complex64,
    len: usize,
) -> Result<(DiscreteMeasure, TailReport)> {
    let mut atoms = Vec::with_capacity(len);
    let mut terms = Vec::with_capacity(len);
    let mut z = v;
    for n in 0..len {
        let alpha = weight(n);
        atoms.push((z, alpha));
        terms.push(alpha.norm() * (1.0 + z.norm_sqr()));
        if n + 1 < len {
            z = f.eval(z)?;
            if !z.is_finite() {
                // Overflowed iterates carry no position information; record
                // the remaining weights as infinite-tail terms and stop.
                for k in n + 1..len {
                    let a = weight(k);
                    atoms.push((z, a));
                    terms.push(f64::INFINITY);
                }
                break;
            }
        }
    }
    let report = tail_diagnostic(&terms);
    Ok((DiscreteMeasure::new(atoms), report))
}
