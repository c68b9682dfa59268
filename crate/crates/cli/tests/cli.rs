use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ruelle-lab")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn roots_of_shifted_square_are_plus_minus_sqrt_two() {
    let f = fixture("cheb.json");
    let out = run(&["roots", "--map", f.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let roots = v["report"]["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 2);
    let r0 = roots[0][0].as_f64().unwrap();
    let r1 = roots[1][0].as_f64().unwrap();
    assert!((r0 + 2.0_f64.sqrt()).abs() < 1e-12);
    assert!((r1 - 2.0_f64.sqrt()).abs() < 1e-12);
    assert_eq!(v["report"]["converged"], Value::Bool(true));
    // reports echo the tolerances they used
    assert!(v["tolerances"]["root_residual"].as_f64().unwrap() > 0.0);
}

#[test]
fn transfer_apply_at_critical_value_exits_2_with_machine_readable_error() {
    let f = fixture("sq.json");
    let out = run(&["transfer-apply", "--map", f.to_str().unwrap(), "--g", "one", "--x", "0"]);
    assert_eq!(code(&out), 2);
    let v = stdout_json(&out);
    assert_eq!(v["error"]["kind"], Value::String("CriticalValue".into()));
    assert!(v["error"]["detail"].as_str().unwrap().contains("critical"));
    // diagnostics also land on stderr
    assert!(!out.stderr.is_empty());
}

#[test]
fn transfer_apply_of_constant_one_under_square_map() {
    // sum over w = ±1 of 1/(2w)^2 = 1/4 + 1/4
    let f = fixture("sq.json");
    let out = run(&["transfer-apply", "--map", f.to_str().unwrap(), "--g", "one", "--x", "1"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let val = &v["report"]["value"];
    assert!((val[0].as_f64().unwrap() - 0.5).abs() < 1e-14);
    assert!(val[1].as_f64().unwrap().abs() < 1e-14);
}

#[test]
fn transversality_series_for_unicritical_family_settles_at_two_thirds() {
    let f = fixture("unicrit.json");
    let out = run(&[
        "transversality",
        "--family",
        f.to_str().unwrap(),
        "--v0",
        "-2",
        "--mmax",
        "40",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let series = v["report"]["series_estimate"][0].as_f64().unwrap();
    assert!((series - 2.0 / 3.0).abs() < 1e-9, "series {series}");
    assert_eq!(v["report"]["nonzero_verdict"], Value::Bool(true));
}

#[test]
fn herman_verify_identity_chart_passes_and_exits_0() {
    let f = fixture("annulus.json");
    let out = run(&["herman-verify", "--model", f.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["all_pass"], Value::Bool(true));
    assert!(v["report"]["interior_max_gap"].as_f64().unwrap() < 1e-10);
}

#[test]
fn herman_eigenspace_golden_rotation_keeps_only_mode_minus_two() {
    let out = run(&["herman-eigenspace", "--lambda", "golden", "--nmax", "50"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["modes"], serde_json::json!([-2]));
}

#[test]
fn herman_eigenspace_rational_rotation_lists_the_residue_class() {
    let out = run(&["herman-eigenspace", "--lambda", "3/7", "--nmax", "20"]);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["modes"], serde_json::json!([-16, -9, -2, 5, 12, 19]));
}

#[test]
fn summability_for_shifted_square_at_origin() {
    // orbit 0 -> -2 -> 2 -> 2: derivatives give sum_{n>=1} 4^-n * 4 = 4/3
    let f = fixture("cheb.json");
    let out = run(&["summability", "--map", f.to_str().unwrap(), "--c", "0", "--n", "40"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!((v["report"]["total"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-9);
    assert!((v["report"]["fitted_decay_rate"].as_f64().unwrap() - 0.25).abs() < 1e-6);
}

#[test]
fn invariant_mass_gap_for_square_map_is_one_half() {
    // area mass of |z|^-4 over 1<|z|<2 is 2 pi ln 2; preimage region carries pi ln 2
    let f = fixture("sq.json");
    let out = run(&[
        "invariant-mass",
        "--map",
        f.to_str().unwrap(),
        "--g",
        "w-2",
        "--region",
        "annulus:0,0,1,2",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!((v["report"]["rel_gap"].as_f64().unwrap() - 0.5).abs() < 1e-3);
}

#[test]
fn same_seed_gives_byte_identical_reports() {
    let map = fixture("cheb.json");
    let atoms = fixture("atoms.json");
    let args = [
        "fixed-residual",
        "--map",
        map.to_str().unwrap(),
        "--g",
        &format!("measure:{}", atoms.display()),
        "--region",
        "annulus:0,0,0.5,3",
        "--samples",
        "64",
        "--seed",
        "7",
    ]
    .map(String::from);
    let a = run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let b = run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn different_seed_changes_the_sample_cloud() {
    let map = fixture("cheb.json");
    let atoms = fixture("atoms.json");
    let g = format!("measure:{}", atoms.display());
    let base = [
        "fixed-residual",
        "--map",
        map.to_str().unwrap(),
        "--g",
        &g,
        "--region",
        "annulus:0,0,0.5,3",
        "--samples",
        "64",
    ];
    let a = run(&[&base[..], &["--seed", "1"]].concat());
    let b = run(&[&base[..], &["--seed", "2"]].concat());
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn conjugate_report_reparses_as_a_map_spec() {
    let f = fixture("newton2.json");
    let out = run(&["conjugate", "--map", f.to_str().unwrap(), "--moebius", "1;1;0;1"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let spec = serde_json::to_string(&v["report"]).unwrap();
    let dir = std::env::temp_dir().join("conjugate_roundtrip.json");
    std::fs::write(&dir, &spec).unwrap();
    // the emitted spec must load as a map again
    let again = run(&["critical-points", "--map", dir.to_str().unwrap()]);
    assert_eq!(code(&again), 0);
}

#[test]
fn csv_output_has_header_and_one_row_per_preimage() {
    let f = fixture("sq.json");
    let out = run(&["preimages", "--map", f.to_str().unwrap(), "--x", "4", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines[0], "point_re,point_im,multiplicity,residual");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("-2.0,"));
    assert!(lines[2].starts_with("2.0,"));
}

#[test]
fn missing_file_is_an_input_error_with_exit_1() {
    let out = run(&["roots", "--map", "/nonexistent/nowhere.json"]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["error"]["kind"], Value::String("InvalidInput".into()));
}

#[test]
fn malformed_spec_is_an_input_error_with_exit_1() {
    let dir = std::env::temp_dir().join("bad_map_spec.json");
    std::fs::write(&dir, r#"{"num": [[1.0, 0.0]], "den": [[1.0, 0.0]], "extra": 3}"#).unwrap();
    let out = run(&["roots", "--map", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["error"]["kind"], Value::String("InvalidInput".into()));
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let out = run(&["roots", "--no-such-flag"]);
    assert_eq!(code(&out), 1);
    let help = run(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("transfer-apply"));
}

#[test]
fn too_few_iterations_is_a_convergence_error_with_exit_3() {
    let f = fixture("unicrit.json");
    let out = run(&[
        "l-matrix",
        "--family",
        f.to_str().unwrap(),
        "--crit",
        "0",
        "--mmax",
        "3",
    ]);
    assert_eq!(code(&out), 3);
    let v = stdout_json(&out);
    assert_eq!(v["error"]["kind"], Value::String("NonConvergence".into()));
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let f = fixture("sq.json");
    let path = std::env::temp_dir().join("roots_report.json");
    let _ = std::fs::remove_file(&path);
    let out = run(&["roots", "--map", f.to_str().unwrap(), "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["command"], Value::String("roots".into()));
}

#[test]
fn moments_of_two_point_measure() {
    // masses 1/2 at -2 and -1/2 at 2: a = 0, b = -2
    let f = fixture("atoms.json");
    let g = format!("measure:{}", f.display());
    let out = run(&["moments", "--g", &g]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!(v["report"]["a"][0].as_f64().unwrap().abs() < 1e-15);
    assert!((v["report"]["b"][0].as_f64().unwrap() + 2.0).abs() < 1e-15);
}

#[test]
fn cauchy_of_inverse_square_circle_density() {
    // integral of w^-2/(2 pi i) dw / (w - z) over |w|=1.5 is -1/z^2 for |z|>1.5
    let f = fixture("circle.json");
    let g = format!("curve:{}", f.display());
    let out = run(&["cauchy", "--g", &g, "--z", "2"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!((v["report"]["value"][0].as_f64().unwrap() + 0.25).abs() < 1e-9);
}

#[test]
fn hardy_report_for_identity_chart_is_bounded() {
    let f = fixture("annulus.json");
    let out = run(&["hardy", "--model", f.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["bounded_verdict"], Value::Bool(true));
    assert!(v["report"]["inner_exponent"].as_f64().unwrap().abs() < 1e-3);
}

#[test]
fn multiplier_of_model_fixed_field_is_real_one() {
    let f = fixture("annulus_perturbed.json");
    let m = f.to_str().unwrap();
    let g = format!("model:{m}");
    let out = run(&["multiplier", "--model", m, "--g", &g, "--x", "1.4,0.2"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!((v["report"]["value"][0].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!(v["report"]["realness_deviation"].as_f64().unwrap() < 1e-12);
}
