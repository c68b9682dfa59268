//! JSON input formats. Complex numbers travel as [re, im] pairs, polynomial
//! coefficients in ascending degree order, and unknown keys are rejected so
//! a typo'd field never silently defaults.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermanmodel::{AnnulusModel, LaurentPoly};
use crate::measure::{CurveMeasure, DiscreteMeasure};
use crate::poly::Poly;
use crate::ratmap::RationalMap;
use crate::transversal::{Direction, Family};

/// Coefficient-count ceiling for file inputs; root finding past this degree
/// is outside the tested envelope.
pub const MAX_DEGREE: usize = 64;

fn c64(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn check_finite(name: &str, pairs: &[[f64; 2]]) -> Result<()> {
    for p in pairs {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::InvalidInput(format!("{name} contains a non-finite entry")));
        }
    }
    Ok(())
}

fn check_degree(name: &str, coeffs: &[[f64; 2]]) -> Result<()> {
    if coeffs.is_empty() {
        return Err(Error::InvalidInput(format!("{name} has no coefficients")));
    }
    if coeffs.len() > MAX_DEGREE + 1 {
        return Err(Error::InvalidInput(format!(
            "{name} degree {} exceeds the supported maximum {MAX_DEGREE}",
            coeffs.len() - 1
        )));
    }
    check_finite(name, coeffs)
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str, what: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("malformed {what} spec: {e}")))
}

/// {"num": [[re,im],...], "den": [[re,im],...]}, ascending degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub num: Vec<[f64; 2]>,
    pub den: Vec<[f64; 2]>,
}

impl MapSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: MapSpec = parse_json(text, "map")?;
        check_degree("num", &spec.num)?;
        check_degree("den", &spec.den)?;
        Ok(spec)
    }

    pub fn to_map(&self) -> Result<RationalMap> {
        RationalMap::new(
            Poly::new(self.num.iter().copied().map(c64).collect()),
            Poly::new(self.den.iter().copied().map(c64).collect()),
        )
    }

    /// Perturbation directions share the shape but may be constant or zero.
    pub fn to_direction(&self) -> Result<Direction> {
        Direction::new(
            Poly::new(self.num.iter().copied().map(c64).collect()),
            Poly::new(self.den.iter().copied().map(c64).collect()),
        )
    }

    pub fn from_map(f: &RationalMap) -> Self {
        MapSpec {
            num: f.num().coeffs().iter().copied().map(pair).collect(),
            den: f.den().coeffs().iter().copied().map(pair).collect(),
        }
    }
}

/// {"atoms": [[[re,im],[re,im]], ...]}: (position, weight) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub atoms: Vec<([f64; 2], [f64; 2])>,
}

impl MeasureSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: MeasureSpec = parse_json(text, "measure")?;
        for &(b, a) in &spec.atoms {
            check_finite("atoms", &[b, a])?;
        }
        Ok(spec)
    }

    pub fn to_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::new(self.atoms.iter().map(|&(b, a)| (c64(b), c64(a))).collect())
    }

    pub fn from_measure(mu: &DiscreteMeasure) -> Self {
        MeasureSpec { atoms: mu.atoms().iter().map(|&(b, a)| (pair(b), pair(a))).collect() }
    }
}

/// Either a named density or one inline sample per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensitySpec {
    Preset(String),
    Samples(Vec<[f64; 2]>),
}

/// One sampled circle: {"center":[re,im], "radius": r, "density": ...,
/// "orientation": 1 | -1, "nodes": N}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub density: DensitySpec,
    pub orientation: i8,
    pub nodes: usize,
}

/// A curve file holds one circle or {"curves": [...]} for several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveFileSpec {
    Single(CurveSpec),
    Many {
        curves: Vec<CurveSpec>,
    },
}

const INVERSE_SQUARE_DENSITY: &str = "w^-2/(2 pi i)";

impl CurveSpec {
    fn component(&self) -> Result<crate::measure::CurveComponent> {
        check_finite("center", &[self.center])?;
        if !self.radius.is_finite() {
            return Err(Error::InvalidInput("curve radius is not finite".into()));
        }
        if self.nodes > (1 << 20) {
            return Err(Error::InvalidInput("curve node count is unreasonably large".into()));
        }
        let mut component = match &self.density {
            DensitySpec::Preset(name) => {
                if name != INVERSE_SQUARE_DENSITY {
                    return Err(Error::InvalidInput(format!(
                        "unknown density preset {name:?}; the only named density is \
                         {INVERSE_SQUARE_DENSITY:?}"
                    )));
                }
                let two_pi_i = Complex64::new(0.0, std::f64::consts::TAU);
                CurveMeasure::circle(c64(self.center), self.radius, self.nodes, self.orientation, |w| {
                    1.0 / (w * w) / two_pi_i
                })?
            }
            DensitySpec::Samples(samples) => {
                check_finite("density", samples)?;
                if samples.len() != self.nodes {
                    return Err(Error::InvalidInput(format!(
                        "density holds {} samples for {} nodes",
                        samples.len(),
                        self.nodes
                    )));
                }
                let mut c = CurveMeasure::circle(
                    c64(self.center),
                    self.radius,
                    self.nodes,
                    self.orientation,
                    |_| Complex64::new(0.0, 0.0),
                )?;
                c.density = samples.iter().copied().map(c64).collect();
                c
            }
        };
        if component.orientation != 1 && component.orientation != -1 {
            return Err(Error::InvalidInput("orientation must be 1 or -1".into()));
        }
        component.orientation = self.orientation;
        Ok(component)
    }
}

impl CurveFileSpec {
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text, "curve")
    }

    pub fn to_measure(&self) -> Result<CurveMeasure> {
        let specs: Vec<&CurveSpec> = match self {
            CurveFileSpec::Single(c) => vec![c],
            CurveFileSpec::Many { curves } => curves.iter().collect(),
        };
        if specs.is_empty() {
            return Err(Error::InvalidInput("curve file lists no curves".into()));
        }
        CurveMeasure::new(specs.into_iter().map(|c| c.component()).collect::<Result<Vec<_>>>()?)
    }
}

/// {"base": mapspec, "direction": mapspec-shaped u}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub base: MapSpec,
    pub direction: MapSpec,
}

impl FamilySpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: FamilySpec = parse_json(text, "family")?;
        check_degree("base num", &spec.base.num)?;
        check_degree("base den", &spec.base.den)?;
        check_degree("direction num", &spec.direction.num)?;
        check_degree("direction den", &spec.direction.den)?;
        Ok(spec)
    }

    pub fn to_family(&self) -> Result<Family> {
        Ok(Family::new(self.base.to_map()?, self.direction.to_direction()?))
    }
}

/// {"R": 2.0, "lambda": [re,im], "psi": [[n,[re,im]],...], "C": [re,im]}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "R")]
    pub r: f64,
    pub lambda: [f64; 2],
    pub psi: Vec<(i32, [f64; 2])>,
    #[serde(rename = "C")]
    pub c: [f64; 2],
}

impl ModelSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: ModelSpec = parse_json(text, "model")?;
        check_finite("lambda", &[spec.lambda])?;
        check_finite("C", &[spec.c])?;
        if !spec.r.is_finite() {
            return Err(Error::InvalidInput("R is not finite".into()));
        }
        for &(n, a) in &spec.psi {
            if n.unsigned_abs() as usize > MAX_DEGREE {
                return Err(Error::InvalidInput(format!(
                    "psi exponent {n} exceeds the supported window [-{MAX_DEGREE}, {MAX_DEGREE}]"
                )));
            }
            check_finite("psi", &[a])?;
        }
        Ok(spec)
    }

    pub fn to_model(&self) -> Result<AnnulusModel> {
        let terms: Vec<(i32, Complex64)> =
            self.psi.iter().map(|&(n, a)| (n, c64(a))).collect();
        AnnulusModel::new(self.r, c64(self.lambda), LaurentPoly::from_terms(&terms), c64(self.c))
    }
}
