//! Critical-orbit diagnostics: the summability sequence
//! t_n = (1 + |f^n(v)|^2) / ((1 + |v|^2) |(f^n)'(v)|) along the orbit of a
//! critical value v = f(c), and omega-limit sampling with box-counting
//! heuristics.
//!
//! Verdicts are labeled "evidence": a finite prefix can never prove the
//! infinite sum converges, so the thresholds are set where the standard
//! examples become decisive.

use std::collections::HashSet;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measure::{tail_diagnostic, TailVerdict};
use crate::ratmap::RationalMap;
use crate::tolerances::CRITICAL_POINT_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummabilityVerdict {
    SummableEvidence,
    DivergentEvidence,
    Inconclusive,
}

impl SummabilityVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            SummabilityVerdict::SummableEvidence => "SUMMABLE_EVIDENCE",
            SummabilityVerdict::DivergentEvidence => "DIVERGENT_EVIDENCE",
            SummabilityVerdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// The first N summability terms with their partial sums. Infinite terms
/// (superattracting orbits) stay in-band and force the divergent verdict.
/// `escaped` marks a truncation at the escape radius; the reported prefix is
/// still genuine.
#[derive(Debug, Clone)]
pub struct SummabilityReport {
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub last_decade_increment: f64,
    pub verdict: SummabilityVerdict,
    pub escaped: bool,
}

/// Summability diagnostics at the critical point c, following the orbit of
/// v = f(c) for n steps.
pub fn summability(f: &RationalMap, c: Complex64, n: usize) -> Result<SummabilityReport> {
    let dc = f.derivative_at(c)?;
    if dc.norm() > CRITICAL_POINT_TOL * (1.0 + c.norm()) {
        return Err(Error::NotCritical { c, deriv_abs: dc.norm() });
    }
    if n == 0 {
        return Ok(SummabilityReport {
            terms: Vec::new(),
            partial_sums: Vec::new(),
            last_decade_increment: 0.0,
            verdict: SummabilityVerdict::Inconclusive,
            escaped: false,
        });
    }
    let v = f.eval(c)?;
    let orbit = f.orbit_default_escape(v, n - 1);
    if let Some(i) = orbit.pole_index {
        return Err(Error::PoleHit { z: orbit.points[i] });
    }
    let base = 1.0 + v.norm_sqr();
    let terms: Vec<f64> = orbit
        .points
        .iter()
        .zip(&orbit.derivs)
        .map(|(z, d)| (1.0 + z.norm_sqr()) / (base * d.norm()))
        .collect();
    let tail = tail_diagnostic(&terms);
    let verdict = match tail.verdict {
        TailVerdict::Converging => SummabilityVerdict::SummableEvidence,
        TailVerdict::Diverging => SummabilityVerdict::DivergentEvidence,
        TailVerdict::Inconclusive => SummabilityVerdict::Inconclusive,
    };
    Ok(SummabilityReport {
        terms: tail.terms,
        partial_sums: tail.partial_sums,
        last_decade_increment: tail.last_decade_increment,
        verdict,
        escaped: orbit.escaped,
    })
}

/// Least-squares slope of log t_n over n in [from, to), returned as the
/// geometric ratio exp(slope). None when fewer than two terms in the window
/// are positive and finite.
pub fn fitted_decay_rate(terms: &[f64], from: usize, to: usize) -> Option<f64> {
    let to = to.min(terms.len());
    if from >= to {
        return None;
    }
    let pairs: Vec<(f64, f64)> = (from..to)
        .filter(|&i| terms[i].is_finite() && terms[i] > 0.0)
        .map(|i| (i as f64, terms[i].ln()))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Some(slope.exp())
}

/// Box-occupancy count at one scale.
#[derive(Debug, Clone, Copy)]
pub struct CoveringEstimate {
    pub scale: f64,
    pub boxes: usize,
}

/// Orbit tail after burn-in, with nearest-neighbor spacings and occupancy
/// counts at two scales an octave of 8 apart. Linear growth of the counts in
/// 1/scale points at a curve-like (nowhere dense) tail; quadratic growth at
/// an area-filling one. Heuristic only; no verdict.
#[derive(Debug, Clone)]
pub struct OmegaLimitReport {
    pub cloud: Vec<Complex64>,
    pub nn_spacings: Vec<f64>,
    pub covering: Vec<CoveringEstimate>,
    pub escaped: bool,
    pub truncated_at_pole: bool,
}

pub fn omega_limit_sample(
    f: &RationalMap,
    x: Complex64,
    burn_in: usize,
    keep: usize,
) -> Result<OmegaLimitReport> {
    if keep == 0 {
        return Ok(OmegaLimitReport {
            cloud: Vec::new(),
            nn_spacings: Vec::new(),
            covering: Vec::new(),
            escaped: false,
            truncated_at_pole: false,
        });
    }
    let orbit = f.orbit_default_escape(x, burn_in + keep - 1);
    let cloud: Vec<Complex64> =
        orbit.points.iter().skip(burn_in).take(keep).copied().collect();
    let nn_spacings = nearest_neighbor_spacings(&cloud);
    let covering = covering_estimates(&cloud);
    Ok(OmegaLimitReport {
        cloud,
        nn_spacings,
        covering,
        escaped: orbit.escaped,
        truncated_at_pole: orbit.pole_index.is_some(),
    })
}

fn nearest_neighbor_spacings(cloud: &[Complex64]) -> Vec<f64> {
    if cloud.len() < 2 {
        return Vec::new();
    }
    cloud
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            cloud
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &w)| (w - z).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn covering_estimates(cloud: &[Complex64]) -> Vec<CoveringEstimate> {
    if cloud.is_empty() {
        return Vec::new();
    }
    let min_x = cloud.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let min_y = cloud.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
    let max_x = cloud.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let max_y = cloud.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
    let diameter = ((max_x - min_x).powi(2) + (max_y - min_y).powi(2)).sqrt();
    if diameter < 1e-12 {
        // A (numerically) single point occupies one box at any scale.
        return vec![CoveringEstimate { scale: 0.0, boxes: 1 }, CoveringEstimate {
            scale: 0.0,
            boxes: 1,
        }];
    }
    [diameter / 16.0, diameter / 128.0]
        .iter()
        .map(|&scale| {
            let occupied: HashSet<(i64, i64)> = cloud
                .iter()
                .map(|z| (((z.re - min_x) / scale).floor() as i64, ((z.im - min_y) / scale).floor() as i64))
                .collect();
            CoveringEstimate { scale, boxes: occupied.len() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    const TAU: f64 = std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn basilica() -> RationalMap {
        RationalMap::new(Poly::from_real(&[-2.0, 0.0, 1.0]), Poly::one()).unwrap()
    }

    #[test]
    fn basilica_terms_are_quarter_powers() {
        // v = f(0) = -2 lands on the fixed point 2 with |f'| = 4 along the
        // tail, so t_n = 4^-n exactly in floating point.
        let report = summability(&basilica(), c(0.0, 0.0), 40).unwrap();
        assert_eq!(report.terms[0], 1.0);
        assert_eq!(report.terms[1], 0.25);
        assert_eq!(report.terms[2], 0.0625);
        assert_eq!(report.terms[3], 0.015625);
        assert_eq!(report.verdict, SummabilityVerdict::SummableEvidence);
        let total = report.partial_sums.last().copied().unwrap();
        assert!((total - 4.0 / 3.0).abs() < 1e-10, "{total}");
        assert!(!report.escaped);
    }

    #[test]
    fn fitted_rate_of_basilica_tail() {
        let report = summability(&basilica(), c(0.0, 0.0), 31).unwrap();
        let rate = fitted_decay_rate(&report.terms, 5, 30).unwrap();
        assert!((rate - 0.25).abs() < 1e-6, "{rate}");
    }

    #[test]
    fn term_recurrence_consistency() {
        let f = basilica();
        let report = summability(&f, c(0.0, 0.0), 20).unwrap();
        let orbit = f.orbit_default_escape(c(-2.0, 0.0), 19);
        for n in 0..19 {
            let ratio = report.terms[n + 1] / report.terms[n];
            let want = (1.0 + orbit.points[n + 1].norm_sqr())
                / ((1.0 + orbit.points[n].norm_sqr())
                    * f.derivative_at(orbit.points[n]).unwrap().norm());
            assert!((ratio - want).abs() < 1e-10 * want.max(1.0), "n={n}");
        }
    }

    #[test]
    fn superattracting_orbit_diverges() {
        let f = RationalMap::new(Poly::from_real(&[0.0, 0.0, 1.0]), Poly::one()).unwrap();
        let report = summability(&f, c(0.0, 0.0), 10).unwrap();
        assert!(report.terms[1..].iter().all(|t| t.is_infinite()));
        assert_eq!(report.verdict, SummabilityVerdict::DivergentEvidence);
    }

    #[test]
    fn non_critical_point_rejected() {
        match summability(&basilica(), c(1.0, 0.0), 10) {
            Err(Error::NotCritical { .. }) => {}
            other => panic!("expected NotCritical, got {other:?}"),
        }
    }

    #[test]
    fn empty_window_is_inconclusive() {
        let report = summability(&basilica(), c(0.0, 0.0), 0).unwrap();
        assert!(report.terms.is_empty());
        assert_eq!(report.verdict, SummabilityVerdict::Inconclusive);
    }

    #[test]
    fn critical_value_at_pole_is_reported() {
        // 1/z^2 has its only finite critical point at 0, which is the pole.
        let f = RationalMap::new(Poly::one(), Poly::from_real(&[0.0, 0.0, 1.0])).unwrap();
        match summability(&f, c(0.0, 0.0), 10) {
            Err(Error::PoleHit { .. }) => {}
            other => panic!("expected PoleHit, got {other:?}"),
        }
    }

    #[test]
    fn eventually_fixed_orbit_has_singleton_cloud() {
        let report = omega_limit_sample(&basilica(), c(-2.0, 0.0), 1, 5).unwrap();
        assert_eq!(report.cloud.len(), 5);
        assert!(report.cloud.iter().all(|&z| z == c(2.0, 0.0)));
        assert_eq!(report.covering[0].boxes, 1);
        assert!(report.nn_spacings.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn irrational_rotation_fills_circle_linearly() {
        let golden = (5.0f64.sqrt() - 1.0) / 2.0;
        let lambda = Complex64::from_polar(1.0, TAU * golden);
        let f = RationalMap::new(Poly::new(vec![c(0.0, 0.0), lambda]), Poly::one()).unwrap();
        let report = omega_limit_sample(&f, c(1.0, 0.0), 0, 1024).unwrap();
        assert!(report.cloud.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        let coarse = report.covering[0].boxes;
        let fine = report.covering[1].boxes;
        let ratio = fine as f64 / coarse as f64;
        // The scales differ by a factor of 8: a curve multiplies its count
        // by about 8, an area-filling cloud by about 64.
        assert!(ratio > 4.0 && ratio < 16.0, "ratio {ratio} ({coarse} -> {fine})");
        // Spacings concentrate near the three-gap values around tau/1024.
        let mut spacings = report.nn_spacings.clone();
        spacings.sort_by(f64::total_cmp);
        let median = spacings[spacings.len() / 2];
        assert!(median > 0.002 && median < 0.02, "median {median}");
    }

    #[test]
    fn empty_keep_gives_empty_report() {
        let report = omega_limit_sample(&basilica(), c(0.5, 0.5), 10, 0).unwrap();
        assert!(report.cloud.is_empty());
        assert!(report.covering.is_empty());
    }

    #[test]
    fn escape_is_flagged() {
        let f = RationalMap::new(Poly::from_real(&[0.0, 0.0, 1.0]), Poly::one()).unwrap();
        let report = omega_limit_sample(&f, c(2.0, 0.0), 0, 40).unwrap();
        assert!(report.escaped);
        assert!(report.cloud.len() < 40);
    }
}
