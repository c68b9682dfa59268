//! Batch command surface over the pushforward-operator laboratory. Every
//! subcommand reads JSON specs, delegates to one library operation, and
//! writes a deterministic JSON or CSV report to stdout (or --out). Exit
//! codes: 0 success, 1 input errors, 2 domain errors, 3 convergence
//! failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use ruelle_core::critdiag::{fitted_decay_rate, omega_limit_sample, summability};
use ruelle_core::error::{Error, ErrorClass, Result};
use ruelle_core::hermanmodel::{
    hardy_estimate, model_fixed_field, model_map, rotation_eigenspace, verify_part2, AnnulusModel,
    ModelMap,
};
use ruelle_core::measure::{CurveMeasure, DiscreteMeasure, Moments};
use ruelle_core::poly::Poly;
use ruelle_core::ratmap::{Moebius, RationalMap};
use ruelle_core::sample;
use ruelle_core::spec::{CurveFileSpec, FamilySpec, MapSpec, MeasureSpec, ModelSpec};
use ruelle_core::tolerances;
use ruelle_core::transfer::{
    apply_detailed, fixed_point_residual, invariant_mass, line_field_defect, multiplier_relation,
    EvaluableField, FiberData, FiberedMap, Region,
};
use ruelle_core::transversal::{l_matrix, transversality, Family};

#[derive(Parser)]
#[command(
    name = "ruelle-lab",
    version,
    about = "Numerical laboratory for the pushforward operator of rational maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichPoly {
    Num,
    Den,
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct Output {
    /// Report format: json carries the full report, csv one row per
    /// sample or term.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Sampling {
    /// Number of quasi-random sample points.
    #[arg(long, default_value_t = 256)]
    samples: usize,
    /// Seed for the shifted low-discrepancy grid.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Roots of the map's numerator or denominator, with multiplicities.
    Roots {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_enum, default_value = "num")]
        which: WhichPoly,
        #[command(flatten)]
        output: Output,
    },
    /// The fiber f^-1(x): finite preimages plus the multiplicity at infinity.
    Preimages {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        x: Complex64,
        #[command(flatten)]
        output: Output,
    },
    /// Critical points with multiplicities, including infinity.
    CriticalPoints {
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Forward orbit of z0 with cumulative derivatives.
    Orbit {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z0: Complex64,
        #[arg(long)]
        n: usize,
        /// Escape radius; the orbit stops once |z| exceeds it.
        #[arg(long, default_value_t = tolerances::DEFAULT_ESCAPE_RADIUS)]
        escape: f64,
        #[command(flatten)]
        output: Output,
    },
    /// The expansion f(z) = sigma z + b + O(1/z) at infinity, if defined.
    InfinityForm {
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Conjugate the map by a Moebius transformation; emits a map spec.
    Conjugate {
        #[arg(long)]
        map: PathBuf,
        /// Four complex entries "a;b;c;d" of (az+b)/(cz+d), each "re,im".
        #[arg(long, allow_hyphen_values = true)]
        moebius: String,
        #[command(flatten)]
        output: Output,
    },
    /// Cauchy transform of a measure at a point.
    Cauchy {
        /// Field registry entry: "measure:FILE" or "curve:FILE".
        #[arg(long)]
        g: String,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: Complex64,
        #[command(flatten)]
        output: Output,
    },
    /// Moments A, B and the spherical tail weight of a measure.
    Moments {
        #[arg(long)]
        g: String,
        #[command(flatten)]
        output: Output,
    },
    /// T_f g at one point, with the fiber term breakdown.
    TransferApply {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// "one", "w-2", "measure:FILE", "curve:FILE", or "model:FILE".
        #[arg(long)]
        g: String,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        x: Complex64,
        #[command(flatten)]
        output: Output,
    },
    /// Max |T_f H - H| over a sampled region, with a FIXED/NOT_FIXED verdict.
    FixedResidual {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        g: String,
        /// "annulus:cx,cy,r1,r2", "rect:x0,y0,x1,y1", or "circle:cx,cy,r".
        #[arg(long)]
        region: String,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        output: Output,
    },
    /// The local multiplier H(f(x)) f'(x)^2 / H(x).
    Multiplier {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        g: String,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        x: Complex64,
        #[command(flatten)]
        output: Output,
    },
    /// Invariance defect of the unit line field conj(H)/|H|.
    LineField {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        g: String,
        #[arg(long)]
        region: String,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        output: Output,
    },
    /// |H|-mass of a region versus its preimage.
    InvariantMass {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        g: String,
        /// "annulus:cx,cy,r1,r2", "sector:cx,cy,r1,r2,t0,t1", or
        /// "disc:cx,cy,r".
        #[arg(long)]
        region: String,
        #[command(flatten)]
        output: Output,
    },
    /// Summability diagnostics of the critical orbit at c.
    Summability {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        c: Complex64,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Omega-limit point cloud with spacing and covering statistics.
    OmegaLimit {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        x: Complex64,
        #[arg(long, default_value_t = 100)]
        burn_in: usize,
        #[arg(long, default_value_t = 512)]
        keep: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Derivative-quotient and series transversality estimates for a family.
    Transversality {
        #[arg(long)]
        family: PathBuf,
        /// Override the constant coefficient of the base map's numerator.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        v0: Option<Complex64>,
        /// Critical point; defaults to the map's single finite critical
        /// point when that is unambiguous.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        crit: Option<Complex64>,
        #[arg(long, default_value_t = 40)]
        mmax: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Matrix of transversality limits over families and critical points.
    LMatrix {
        /// Family spec file; repeat for each column.
        #[arg(long, required = true)]
        family: Vec<PathBuf>,
        /// Critical point; repeat for each row.
        #[arg(long, required = true, value_parser = parse_complex, allow_hyphen_values = true)]
        crit: Vec<Complex64>,
        #[arg(long, default_value_t = 40)]
        mmax: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Laurent modes n with lambda^(n+2) = 1 in [-nmax, nmax].
    HermanEigenspace {
        /// Rotation multiplier: "golden", "p/q" (turns), or literal "re,im".
        #[arg(long, value_parser = parse_rotation, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long, default_value_t = 50)]
        nmax: i32,
        #[command(flatten)]
        output: Output,
    },
    /// Boundary-measure verification for an annulus rotation model.
    HermanVerify {
        #[arg(long)]
        model: PathBuf,
        /// Curve resolution (power of two).
        #[arg(long, default_value_t = 512)]
        nodes: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Hardy ladder of boundary integrals of 1/|psi'|.
    Hardy {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let parse = |t: &str| -> std::result::Result<f64, String> {
        t.trim().parse::<f64>().map_err(|_| format!("\"{t}\" is not a real number"))
    };
    let z = match parts.as_slice() {
        [re] => Complex64::new(parse(re)?, 0.0),
        [re, im] => Complex64::new(parse(re)?, parse(im)?),
        _ => return Err(format!("\"{s}\" is not \"re\" or \"re,im\"")),
    };
    if !z.is_finite() {
        return Err(format!("\"{s}\" is not finite"));
    }
    Ok(z)
}

/// Rotation multipliers: "golden" and "p/q" as angles in turns, or a literal "re,im".
fn parse_rotation(s: &str) -> std::result::Result<Complex64, String> {
    let turns = if s.trim() == "golden" {
        Some((5.0_f64.sqrt() - 1.0) / 2.0)
    } else if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().map_err(|_| format!("\"{s}\" is not a rational p/q"))?;
        let q: f64 = q.trim().parse().map_err(|_| format!("\"{s}\" is not a rational p/q"))?;
        if q == 0.0 {
            return Err(format!("\"{s}\" divides by zero"));
        }
        Some(p / q)
    } else {
        None
    };
    match turns {
        Some(t) => Ok(Complex64::from_polar(1.0, std::f64::consts::TAU * t)),
        None => parse_complex(s),
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn load_map(path: &Path) -> Result<RationalMap> {
    MapSpec::parse(&read_file(path)?)?.to_map()
}

fn load_model(path: &Path) -> Result<AnnulusModel> {
    ModelSpec::parse(&read_file(path)?)?.to_model()
}

fn load_family(path: &Path) -> Result<Family> {
    FamilySpec::parse(&read_file(path)?)?.to_family()
}

/// Either kind of fibered map a transfer command can act on.
enum AnyMap {
    Rat(RationalMap),
    Model(ModelMap),
}

impl FiberedMap for AnyMap {
    fn forward(&self, z: Complex64) -> Result<Complex64> {
        match self {
            AnyMap::Rat(f) => f.forward(z),
            AnyMap::Model(f) => f.forward(z),
        }
    }
    fn forward_derivative(&self, z: Complex64) -> Result<Complex64> {
        match self {
            AnyMap::Rat(f) => f.forward_derivative(z),
            AnyMap::Model(f) => f.forward_derivative(z),
        }
    }
    fn fiber_data(&self, x: Complex64) -> Result<FiberData> {
        match self {
            AnyMap::Rat(f) => f.fiber_data(x),
            AnyMap::Model(f) => f.fiber_data(x),
        }
    }
}

fn load_any_map(map: &Option<PathBuf>, model: &Option<PathBuf>) -> Result<AnyMap> {
    match (map, model) {
        (Some(p), None) => Ok(AnyMap::Rat(load_map(p)?)),
        (None, Some(p)) => Ok(AnyMap::Model(model_map(&load_model(p)?))),
        _ => Err(Error::InvalidInput("pass exactly one of --map or --model".into())),
    }
}

/// The measure behind "measure:FILE" or "curve:FILE".
enum LoadedMeasure {
    Atoms(DiscreteMeasure),
    Curve(CurveMeasure),
}

fn load_measure_arg(g: &str) -> Result<LoadedMeasure> {
    if let Some(path) = g.strip_prefix("measure:") {
        Ok(LoadedMeasure::Atoms(MeasureSpec::parse(&read_file(Path::new(path))?)?.to_measure()))
    } else if let Some(path) = g.strip_prefix("curve:") {
        Ok(LoadedMeasure::Curve(CurveFileSpec::parse(&read_file(Path::new(path))?)?.to_measure()?))
    } else {
        Err(Error::InvalidInput(format!(
            "\"{g}\" is not a measure; expected measure:FILE or curve:FILE"
        )))
    }
}

fn resolve_field(g: &str) -> Result<EvaluableField> {
    match g {
        "one" => Ok(EvaluableField::constant_one()),
        "w-2" => Ok(EvaluableField::inverse_square()),
        _ => {
            if let Some(path) = g.strip_prefix("model:") {
                Ok(model_fixed_field(&load_model(Path::new(path))?))
            } else {
                match load_measure_arg(g)? {
                    LoadedMeasure::Atoms(mu) => Ok(EvaluableField::from_discrete_measure(&mu)),
                    LoadedMeasure::Curve(nu) => Ok(EvaluableField::from_curve_measure(&nu)),
                }
            }
        }
    }
}

fn parse_parts(spec: &str, prefix: &str, n: usize) -> Result<Vec<f64>> {
    let body = spec.strip_prefix(prefix).and_then(|s| s.strip_prefix(':')).ok_or_else(|| {
        Error::InvalidInput(format!("region \"{spec}\" does not start with \"{prefix}:\""))
    })?;
    let parts: Vec<f64> = body
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidInput(format!("region \"{spec}\" has a non-numeric part")))?;
    if parts.len() != n {
        return Err(Error::InvalidInput(format!(
            "region \"{spec}\" needs {n} numbers, got {}",
            parts.len()
        )));
    }
    if parts.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("region \"{spec}\" has a non-finite part")));
    }
    Ok(parts)
}

/// Sampling domains for residual-style commands.
fn sample_region(spec: &str, seed: u64, n: usize) -> Result<Vec<Complex64>> {
    if spec.starts_with("annulus") {
        let p = parse_parts(spec, "annulus", 4)?;
        Ok(sample::annulus(Complex64::new(p[0], p[1]), p[2], p[3], seed, n))
    } else if spec.starts_with("rect") {
        let p = parse_parts(spec, "rect", 4)?;
        Ok(sample::rectangle(Complex64::new(p[0], p[1]), Complex64::new(p[2], p[3]), seed, n))
    } else if spec.starts_with("circle") {
        let p = parse_parts(spec, "circle", 3)?;
        Ok(sample::circle(Complex64::new(p[0], p[1]), p[2], seed, n))
    } else {
        Err(Error::InvalidInput(format!(
            "region \"{spec}\" is not annulus:..., rect:..., or circle:..."
        )))
    }
}

/// Quadrature regions for mass comparison.
fn quad_region(spec: &str) -> Result<Region> {
    if spec.starts_with("annulus") {
        let p = parse_parts(spec, "annulus", 4)?;
        Region::annulus(Complex64::new(p[0], p[1]), p[2], p[3])
    } else if spec.starts_with("sector") {
        let p = parse_parts(spec, "sector", 6)?;
        Region::annular_sector(Complex64::new(p[0], p[1]), p[2], p[3], p[4], p[5])
    } else if spec.starts_with("disc") {
        let p = parse_parts(spec, "disc", 3)?;
        Region::disc(Complex64::new(p[0], p[1]), p[2])
    } else {
        Err(Error::InvalidInput(format!(
            "region \"{spec}\" is not annulus:..., sector:..., or disc:..."
        )))
    }
}

fn parse_moebius(spec: &str) -> Result<Moebius> {
    let entries: Vec<&str> = spec.split(';').collect();
    if entries.len() != 4 {
        return Err(Error::InvalidInput(format!("moebius \"{spec}\" needs four entries a;b;c;d")));
    }
    let mut v = Vec::with_capacity(4);
    for e in entries {
        v.push(parse_complex(e).map_err(Error::InvalidInput)?);
    }
    Moebius::new(v[0], v[1], v[2], v[3])
}

fn cpx(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn cpx_list(zs: &[Complex64]) -> Value {
    Value::Array(zs.iter().map(|&z| cpx(z)).collect())
}

fn dropped_list(dropped: &[(Complex64, &'static str)]) -> Value {
    Value::Array(dropped.iter().map(|&(z, kind)| json!({"z": cpx(z), "kind": kind})).collect())
}

fn moments_json(m: &Moments) -> Value {
    json!({
        "a": cpx(m.a),
        "b": cpx(m.b),
        "tail_s": m.tail_s,
    })
}

/// One finished report: a JSON body plus flat CSV rows.
struct Report {
    command: &'static str,
    inputs: Value,
    tolerances: Value,
    body: Value,
    csv_header: Vec<&'static str>,
    csv_rows: Vec<Vec<String>>,
    exit: ExitCode,
}

impl Report {
    fn new(command: &'static str) -> Self {
        Report {
            command,
            inputs: json!({}),
            tolerances: json!({}),
            body: json!({}),
            csv_header: Vec::new(),
            csv_rows: Vec::new(),
            exit: ExitCode::SUCCESS,
        }
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let doc = json!({
                    "command": self.command,
                    "inputs": self.inputs,
                    "tolerances": self.tolerances,
                    "report": self.body,
                });
                let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
                text.push('\n');
                text
            }
            Format::Csv => {
                let mut text = self.csv_header.join(",");
                text.push('\n');
                for row in &self.csv_rows {
                    text.push_str(&row.join(","));
                    text.push('\n');
                }
                text
            }
        }
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

/// key,value rows for reports without a natural per-sample table.
fn scalar_rows(body: &Value) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let mut rows = Vec::new();
    if let Value::Object(map) = body {
        for (k, v) in map {
            let rendered = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            rows.push(vec![k.clone(), rendered]);
        }
    }
    (vec!["key", "value"], rows)
}

fn run(command: &Command) -> Result<Report> {
    match command {
        Command::Roots { map, which, .. } => {
            let f = load_map(map)?;
            let poly: &Poly = match which {
                WhichPoly::Num => f.num(),
                WhichPoly::Den => f.den(),
            };
            let roots = poly.find_roots()?;
            let mut r = Report::new("roots");
            r.inputs = json!({"map": map.display().to_string()});
            r.tolerances = json!({"root_residual": tolerances::ROOT_RESIDUAL_TOL});
            r.body = json!({
                "roots": cpx_list(&roots.roots),
                "multiplicities": roots.multiplicities,
                "residuals": roots.residuals,
                "converged": roots.converged,
            });
            r.csv_header = vec!["root_re", "root_im", "multiplicity", "residual"];
            r.csv_rows = roots
                .roots
                .iter()
                .zip(&roots.multiplicities)
                .zip(&roots.residuals)
                .map(|((z, m), res)| vec![fmt_f(z.re), fmt_f(z.im), m.to_string(), fmt_f(*res)])
                .collect();
            Ok(r)
        }
        Command::Preimages { map, x, .. } => {
            let f = load_map(map)?;
            let fiber = f.preimages(*x)?;
            let mut r = Report::new("preimages");
            r.inputs = json!({"map": map.display().to_string(), "x": cpx(*x)});
            r.tolerances = json!({"root_residual": tolerances::ROOT_RESIDUAL_TOL});
            r.body = json!({
                "points": cpx_list(&fiber.finite.roots),
                "multiplicities": fiber.finite.multiplicities,
                "residuals": fiber.finite.residuals,
                "converged": fiber.finite.converged,
                "infinity_multiplicity": fiber.infinity_multiplicity,
            });
            r.csv_header = vec!["point_re", "point_im", "multiplicity", "residual"];
            r.csv_rows = fiber
                .finite
                .roots
                .iter()
                .zip(&fiber.finite.multiplicities)
                .zip(&fiber.finite.residuals)
                .map(|((z, m), res)| vec![fmt_f(z.re), fmt_f(z.im), m.to_string(), fmt_f(*res)])
                .collect();
            Ok(r)
        }
        Command::CriticalPoints { map, .. } => {
            let f = load_map(map)?;
            let crit = f.critical_points()?;
            let mut r = Report::new("critical-points");
            r.inputs = json!({"map": map.display().to_string()});
            r.tolerances = json!({"root_residual": tolerances::ROOT_RESIDUAL_TOL});
            r.body = json!({
                "points": cpx_list(&crit.finite.roots),
                "multiplicities": crit.finite.multiplicities,
                "residuals": crit.finite.residuals,
                "converged": crit.finite.converged,
                "infinity_multiplicity": crit.infinity_multiplicity,
            });
            r.csv_header = vec!["point_re", "point_im", "multiplicity", "residual"];
            r.csv_rows = crit
                .finite
                .roots
                .iter()
                .zip(&crit.finite.multiplicities)
                .zip(&crit.finite.residuals)
                .map(|((z, m), res)| vec![fmt_f(z.re), fmt_f(z.im), m.to_string(), fmt_f(*res)])
                .collect();
            Ok(r)
        }
        Command::Orbit { map, z0, n, escape, .. } => {
            let f = load_map(map)?;
            let orbit = f.orbit(*z0, *n, *escape);
            let mut r = Report::new("orbit");
            r.inputs = json!({
                "map": map.display().to_string(),
                "z0": cpx(*z0),
                "n": n,
                "escape_radius": escape,
            });
            r.body = json!({
                "points": cpx_list(&orbit.points),
                "derivatives": cpx_list(&orbit.derivs),
                "escaped": orbit.escaped,
                "escape_index": orbit.escape_index,
                "pole_index": orbit.pole_index,
            });
            r.csv_header = vec!["n", "z_re", "z_im", "deriv_re", "deriv_im"];
            r.csv_rows = orbit
                .points
                .iter()
                .zip(&orbit.derivs)
                .enumerate()
                .map(|(k, (z, d))| {
                    vec![k.to_string(), fmt_f(z.re), fmt_f(z.im), fmt_f(d.re), fmt_f(d.im)]
                })
                .collect();
            Ok(r)
        }
        Command::InfinityForm { map, .. } => {
            let f = load_map(map)?;
            let mut r = Report::new("infinity-form");
            r.inputs = json!({"map": map.display().to_string()});
            r.body = match f.infinity_form() {
                Some(form) => json!({
                    "defined": true,
                    "sigma": cpx(form.sigma),
                    "b": cpx(form.b),
                }),
                None => json!({"defined": false, "sigma": null, "b": null}),
            };
            let (h, rows) = scalar_rows(&r.body);
            r.csv_header = h;
            r.csv_rows = rows;
            Ok(r)
        }
        Command::Conjugate { map, moebius, .. } => {
            let f = load_map(map)?;
            let m = parse_moebius(moebius)?;
            let conjugated = f.moebius_conjugate(&m)?;
            let spec = MapSpec::from_map(&conjugated);
            let mut r = Report::new("conjugate");
            r.inputs = json!({"map": map.display().to_string(), "moebius": moebius});
            r.body = serde_json::to_value(&spec).expect("map spec serializes");
            let (h, rows) = scalar_rows(&r.body);
            r.csv_header = h;
            r.csv_rows = rows;
            Ok(r)
        }
        Command::Cauchy { g, z, .. } => {
            let value = match load_measure_arg(g)? {
                LoadedMeasure::Atoms(mu) => mu.cauchy(*z)?,
                LoadedMeasure::Curve(nu) => nu.cauchy(*z)?,
            };
            let mut r = Report::new("cauchy");
            r.inputs = json!({"g": g, "z": cpx(*z)});
            r.tolerances = json!({
                "atom_hit": tolerances::ATOM_HIT_TOL,
                "validity_zone_spacings": tolerances::VALIDITY_ZONE_SPACINGS,
            });
            r.body = json!({"value": cpx(value)});
            r.csv_header = vec!["z_re", "z_im", "value_re", "value_im"];
            r.csv_rows = vec![vec![fmt_f(z.re), fmt_f(z.im), fmt_f(value.re), fmt_f(value.im)]];
            Ok(r)
        }
        Command::Moments { g, .. } => {
            let m = match load_measure_arg(g)? {
                LoadedMeasure::Atoms(mu) => mu.moments(),
                LoadedMeasure::Curve(nu) => nu.moments(),
            };
            let mut r = Report::new("moments");
            r.inputs = json!({"g": g});
            r.body = moments_json(&m);
            let (h, rows) = scalar_rows(&r.body);
            r.csv_header = h;
            r.csv_rows = rows;
            Ok(r)
        }
        Command::TransferApply { map, model, g, x, .. } => {
            let f = load_any_map(map, model)?;
            let field = resolve_field(g)?;
            let breakdown = apply_detailed(&f, &field, *x)?;
            let mut r = Report::new("transfer-apply");
            r.inputs = json!({
                "map": map.as_ref().map(|p| p.display().to_string()),
                "model": model.as_ref().map(|p| p.display().to_string()),
                "g": g,
                "x": cpx(*x),
            });
            r.tolerances = json!({"critical_value": tolerances::CRITICAL_VALUE_TOL});
            r.body = json!({
                "value": cpx(breakdown.value),
                "terms": cpx_list(&breakdown.terms),
                "majorant": breakdown.majorant,
            });
            r.csv_header = vec!["term_re", "term_im"];
            r.csv_rows =
                breakdown.terms.iter().map(|t| vec![fmt_f(t.re), fmt_f(t.im)]).collect();
            Ok(r)
        }
        Command::FixedResidual { map, model, g, region, sampling, .. } => {
            let f = load_any_map(map, model)?;
            let field = resolve_field(g)?;
            let samples = sample_region(region, sampling.seed, sampling.samples)?;
            let report = fixed_point_residual(&f, &field, &samples)?;
            let mut r = Report::new("fixed-residual");
            r.inputs = json!({
                "map": map.as_ref().map(|p| p.display().to_string()),
                "model": model.as_ref().map(|p| p.display().to_string()),
                "g": g,
                "region": region,
                "samples": sampling.samples,
                "seed": sampling.seed,
            });
            r.tolerances = json!({
                "fixed": tolerances::FIXED_TOL,
                "not_fixed_factor": tolerances::NOT_FIXED_FACTOR,
                "triangle_slack": tolerances::TRIANGLE_SLACK,
                "critical_value": tolerances::CRITICAL_VALUE_TOL,
            });
            r.body = json!({
                "verdict": report.verdict.as_str(),
                "max_residual": report.max_residual,
                "scale": report.scale,
                "kept": report.sample_points.len(),
                "dropped": dropped_list(&report.dropped),
                "sample_points": cpx_list(&report.sample_points),
                "residuals": report.residuals,
                "triangle_gaps": report.triangle_gaps,
            });
            r.csv_header = vec!["z_re", "z_im", "residual", "triangle_gap"];
            r.csv_rows = report
                .sample_points
                .iter()
                .zip(&report.residuals)
                .zip(&report.triangle_gaps)
                .map(|((z, res), gap)| vec![fmt_f(z.re), fmt_f(z.im), fmt_f(*res), fmt_f(*gap)])
                .collect();
            Ok(r)
        }
        Command::Multiplier { map, model, g, x, .. } => {
            let f = load_any_map(map, model)?;
            let field = resolve_field(g)?;
            let report = multiplier_relation(&f, &field, *x)?;
            let mut r = Report::new("multiplier");
            r.inputs = json!({
                "map": map.as_ref().map(|p| p.display().to_string()),
                "model": model.as_ref().map(|p| p.display().to_string()),
                "g": g,
                "x": cpx(*x),
            });
            r.tolerances = json!({"multiplier_zero": tolerances::MULTIPLIER_ZERO_TOL});
            r.body = json!({
                "value": cpx(report.value),
                "realness_deviation": report.realness_deviation,
            });
            let (h, rows) = scalar_rows(&r.body);
            r.csv_header = h;
            r.csv_rows = rows;
            Ok(r)
        }
        Command::LineField { map, model, g, region, sampling, .. } => {
            let f = load_any_map(map, model)?;
            let field = resolve_field(g)?;
            let samples = sample_region(region, sampling.seed, sampling.samples)?;
            let report = line_field_defect(&f, &field, &samples)?;
            let mut r = Report::new("line-field");
            r.inputs = json!({
                "map": map.as_ref().map(|p| p.display().to_string()),
                "model": model.as_ref().map(|p| p.display().to_string()),
                "g": g,
                "region": region,
                "samples": sampling.samples,
                "seed": sampling.seed,
            });
            r.tolerances = json!({"critical_value": tolerances::CRITICAL_VALUE_TOL});
            r.body = json!({
                "max_defect": report.max_defect,
                "kept": report.defects.len(),
                "dropped": dropped_list(&report.dropped),
                "defects": Value::Array(
                    report.defects.iter().map(|&(z, d)| json!({"z": cpx(z), "defect": d})).collect()
                ),
            });
            r.csv_header = vec!["z_re", "z_im", "defect"];
            r.csv_rows = report
                .defects
                .iter()
                .map(|&(z, d)| vec![fmt_f(z.re), fmt_f(z.im), fmt_f(d)])
                .collect();
            Ok(r)
        }
        Command::InvariantMass { map, model, g, region, .. } => {
            let f = load_any_map(map, model)?;
            let field = resolve_field(g)?;
            let reg = quad_region(region)?;
            let report = invariant_mass(&f, &field, &reg)?;
            let mut r = Report::new("invariant-mass");
            r.inputs = json!({
                "map": map.as_ref().map(|p| p.display().to_string()),
                "model": model.as_ref().map(|p| p.display().to_string()),
                "g": g,
                "region": region,
            });
            r.tolerances = json!({"mass_quadrature_rtol": tolerances::MASS_QUADRATURE_RTOL});
            r.body = json!({
                "lambda_a": report.lambda_a,
                "lambda_preimage": report.lambda_preimage,
                "rel_gap": report.rel_gap,
            });
            let (h, rows) = scalar_rows(&r.body);
            r.csv_header = h;
            r.csv_rows = rows;
            Ok(r)
        }
        Command::Summability { map, c, n, .. } => {
            let f = load_map(map)?;
            let report = summability(&f, *c, *n)?;
            let fitted = fitted_decay_rate(&report.terms, report.terms.len() / 4, report.terms.len());
            let partial_total = report.partial_sums.last().copied();
            let mut r = Report::new("summability");
            r.inputs = json!({"map": map.display().to_string(), "c": cpx(*c), "n": n});
            r.tolerances = json!({
                "critical_point": tolerances::CRITICAL_POINT_TOL,
                "summable_decade_rtol": tolerances::SUMMABLE_DECADE_RTOL,
            });
            r.body = json!({
                "verdict": report.verdict.as_str(),
                "terms": report.terms,
                "partial_sums": report.partial_sums,
                "total": partial_total,
                "last_decade_increment": report.last_decade_increment,
                "fitted_decay_rate": fitted,
                "escaped": report.escaped,
            });
            r.csv_header = vec!["n", "term", "partial_sum"];
            r.csv_rows = report
                .terms
                .iter()
                .zip(&report.partial_sums)
                .enumerate()
                .map(|(k, (t, s))| vec![k.to_string(), fmt_f(*t), fmt_f(*s)])
                .collect();
            Ok(r)
        }
        Command::OmegaLimit { map, x, burn_in, keep, .. } => {
            let f = load_map(map)?;
            let report = omega_limit_sample(&f, *x, *burn_in, *keep)?;
            let mut r = Report::new("omega-limit");
            r.inputs = json!({
                "map": map.display().to_string(),
                "x": cpx(*x),
                "burn_in": burn_in,
                "keep": keep,
            });
            r.body = json!({
                "cloud": cpx_list(&report.cloud),
                "nn_spacings": report.nn_spacings,
                "covering": Value::Array(
                    report
                        .covering
                        .iter()
                        .map(|c| json!({"scale": c.scale, "boxes": c.boxes}))
                        .collect()
                ),
                "escaped": report.escaped,
                "truncated_at_pole": report.truncated_at_pole,
            });
            r.csv_header = vec!["z_re", "z_im"];
            r.csv_rows = report.cloud.iter().map(|z| vec![fmt_f(z.re), fmt_f(z.im)]).collect();
            Ok(r)
        }
        Command::Transversality { family, v0, crit, mmax, .. } => {
            let mut fam = load_family(family)?;
            if let Some(v0) = v0 {
                fam = reparametrize_base(&fam, *v0)?;
            }
            let c = match crit {
                Some(c) => *c,
                None => single_finite_critical_point(&fam.base)?,
            };
            let report = transversality(&fam, c, *mmax)?;
            let mut r = Report::new("transversality");
            r.inputs = json!({
                "family": family.display().to_string(),
                "v0": v0.map(cpx),
                "crit": cpx(c),
                "mmax": mmax,
            });
            r.tolerances = json!({
                "convergence_rtol": tolerances::CONVERGENCE_RTOL,
                "convergence_window": tolerances::CONVERGENCE_WINDOW,
                "nonzero_margin_factor": tolerances::NONZERO_MARGIN_FACTOR,
            });
            r.body = json!({
                "limit_estimate": cpx(report.limit_estimate),
                "series_estimate": cpx(report.series_estimate),
                "gap": report.gap,
                "quotients_converged": report.quotients_converged,
                "series_converged": report.series_converged,
                "nonzero_verdict": report.nonzero_verdict,
                "margin": report.margin,
                "quotients": cpx_list(&report.quotients),
                "series_partials": cpx_list(&report.series_partials),
            });
            r.csv_header = vec!["m", "quotient_re", "quotient_im", "series_re", "series_im"];
            r.csv_rows = report
                .quotients
                .iter()
                .zip(&report.series_partials)
                .enumerate()
                .map(|(k, (q, s))| {
                    vec![(k + 1).to_string(), fmt_f(q.re), fmt_f(q.im), fmt_f(s.re), fmt_f(s.im)]
                })
                .collect();
            Ok(r)
        }
        Command::LMatrix { family, crit, mmax, .. } => {
            let families =
                family.iter().map(|p| load_family(p)).collect::<Result<Vec<Family>>>()?;
            let matrix = l_matrix(&families, crit, *mmax)?;
            let mut r = Report::new("l-matrix");
            r.inputs = json!({
                "families": family.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                "crits": cpx_list(crit),
                "mmax": mmax,
            });
            r.tolerances = json!({"rank_rtol": tolerances::RANK_RTOL});
            r.body = json!({
                "entries": Value::Array(matrix.entries.iter().map(|row| cpx_list(row)).collect()),
                "singular_values": matrix.singular_values,
                "rank": matrix.rank,
            });
            r.csv_header = vec!["row", "col", "entry_re", "entry_im"];
            r.csv_rows = matrix
                .entries
                .iter()
                .enumerate()
                .flat_map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(move |(j, e)| {
                            vec![i.to_string(), j.to_string(), fmt_f(e.re), fmt_f(e.im)]
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            Ok(r)
        }
        Command::HermanEigenspace { lambda, nmax, .. } => {
            let modes = rotation_eigenspace(*lambda, *nmax)?;
            let mut r = Report::new("herman-eigenspace");
            r.inputs = json!({"lambda": cpx(*lambda), "nmax": nmax});
            r.tolerances = json!({"eigenspace": tolerances::EIGENSPACE_TOL});
            r.body = json!({"modes": modes, "count": modes.len()});
            r.csv_header = vec!["mode"];
            r.csv_rows = modes.iter().map(|n| vec![n.to_string()]).collect();
            Ok(r)
        }
        Command::HermanVerify { model, nodes, .. } => {
            let m = load_model(model)?;
            let report = verify_part2(&m, *nodes)?;
            let mut r = Report::new("herman-verify");
            r.inputs = json!({"model": model.display().to_string(), "nodes": nodes});
            r.tolerances = json!({
                "verify": tolerances::VERIFY_TOL,
                "scaling": tolerances::SCALING_TOL,
            });
            r.body = json!({
                "all_pass": report.all_pass,
                "interior_max_gap": report.interior_max_gap,
                "exterior_max_abs": report.exterior_max_abs,
                "operator_max_residual": report.operator_max_residual,
                "scaling_max_gap": report.scaling_max_gap,
                "interior_samples": report.interior_samples,
                "exterior_samples": report.exterior_samples,
                "operator_samples": report.operator_samples,
            });
            let (h, rows) = scalar_rows(&r.body);
            r.csv_header = h;
            r.csv_rows = rows;
            if !report.all_pass {
                r.exit = ExitCode::from(2);
            }
            Ok(r)
        }
        Command::Hardy { model, .. } => {
            let m = load_model(model)?;
            let report = hardy_estimate(&m)?;
            let mut r = Report::new("hardy");
            r.inputs = json!({"model": model.display().to_string()});
            r.tolerances = json!({
                "exponent_bound": tolerances::HARDY_EXPONENT_BOUND,
                "increment_bound": tolerances::HARDY_INCREMENT_BOUND,
            });
            r.body = json!({
                "bounded_verdict": report.bounded_verdict,
                "epsilons": report.epsilons,
                "inner_integrals": report.inner_integrals,
                "outer_integrals": report.outer_integrals,
                "inner_exponent": report.inner_exponent,
                "outer_exponent": report.outer_exponent,
                "inner_last_increment": report.inner_last_increment,
                "outer_last_increment": report.outer_last_increment,
            });
            r.csv_header = vec!["epsilon", "inner_integral", "outer_integral"];
            r.csv_rows = report
                .epsilons
                .iter()
                .zip(&report.inner_integrals)
                .zip(&report.outer_integrals)
                .map(|((e, i), o)| vec![fmt_f(*e), fmt_f(*i), fmt_f(*o)])
                .collect();
            Ok(r)
        }
    }
}

/// --v0 reparametrization: replace the constant coefficient of the base
/// numerator, the parameter slot of unicritical-style families.
fn reparametrize_base(fam: &Family, v0: Complex64) -> Result<Family> {
    let mut coeffs: Vec<Complex64> = fam.base.num().coeffs().to_vec();
    if coeffs.is_empty() {
        coeffs.push(v0);
    } else {
        coeffs[0] = v0;
    }
    let base = RationalMap::new(Poly::new(coeffs), fam.base.den().clone())?;
    Ok(Family::new(base, fam.direction.clone()))
}

/// The default critical point when the base map has exactly one finite one.
fn single_finite_critical_point(f: &RationalMap) -> Result<Complex64> {
    let crit = f.critical_points()?;
    if crit.finite.roots.len() == 1 {
        Ok(crit.finite.roots[0])
    } else {
        Err(Error::InvalidInput(format!(
            "the base map has {} finite critical points; pass --crit",
            crit.finite.roots.len()
        )))
    }
}

fn output_flags(command: &Command) -> &Output {
    match command {
        Command::Roots { output, .. }
        | Command::Preimages { output, .. }
        | Command::CriticalPoints { output, .. }
        | Command::Orbit { output, .. }
        | Command::InfinityForm { output, .. }
        | Command::Conjugate { output, .. }
        | Command::Cauchy { output, .. }
        | Command::Moments { output, .. }
        | Command::TransferApply { output, .. }
        | Command::FixedResidual { output, .. }
        | Command::Multiplier { output, .. }
        | Command::LineField { output, .. }
        | Command::InvariantMass { output, .. }
        | Command::Summability { output, .. }
        | Command::OmegaLimit { output, .. }
        | Command::Transversality { output, .. }
        | Command::LMatrix { output, .. }
        | Command::HermanEigenspace { output, .. }
        | Command::HermanVerify { output, .. }
        | Command::Hardy { output, .. } => output,
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display()))),
        None => {
            write_stdout(text);
            Ok(())
        }
    }
}

/// Writes to stdout without panicking when the reader closes the pipe early;
/// a broken pipe ends the process quietly with success.
fn write_stdout(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        note_stderr(&format!("error: cannot write report: {e}"));
        std::process::exit(1);
    }
}

/// Stderr diagnostics are best effort; a closed stderr never changes the
/// outcome of the run.
fn note_stderr(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr(), "{text}");
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("RUELLE_LAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                note_stderr(e.to_string().trim_end());
                return ExitCode::from(1);
            }
            // --help and --version land here.
            write_stdout(&e.to_string());
            return ExitCode::SUCCESS;
        }
    };
    let output = output_flags(&cli.command);
    match run(&cli.command) {
        Ok(report) => {
            let text = report.render(output.format);
            match emit(&text, &output.out) {
                Ok(()) => report.exit,
                Err(e) => fail(&e),
            }
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    let doc = json!({"error": {"kind": e.kind(), "detail": e.to_string()}});
    let body = serde_json::to_string_pretty(&doc).expect("error serializes");
    write_stdout(&format!("{body}\n"));
    note_stderr(&format!("error: {e}"));
    ExitCode::from(match e.class() {
        ErrorClass::Input => 1,
        ErrorClass::Domain => 2,
        ErrorClass::Convergence => 3,
    })
}
