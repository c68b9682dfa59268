use num_complex::Complex64;
use proptest::prelude::*;
use ruelle_core::measure::{CurveMeasure, DiscreteMeasure};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn atoms_strategy(max_atoms: usize) -> impl Strategy<Value = Vec<(Complex64, Complex64)>> {
    prop::collection::vec(
        ((-2.0..2.0f64, -2.0..2.0f64), (-1.0..1.0f64, -1.0..1.0f64)),
        1..=max_atoms,
    )
    .prop_map(|v| {
        v.into_iter().map(|((pre, pim), (wre, wim))| (c(pre, pim), c(wre, wim))).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    // the transform is linear in the measure: combining atom lists with
    // scalar weights combines the transforms the same way
    #[test]
    fn cauchy_is_linear(
        mu in atoms_strategy(5),
        nu in atoms_strategy(5),
        (are, aim) in (-2.0..2.0f64, -2.0..2.0f64),
        (bre, bim) in (-2.0..2.0f64, -2.0..2.0f64),
        (zre, zim) in (2.5..4.0f64, -1.0..1.0f64),
    ) {
        let alpha = c(are, aim);
        let beta = c(bre, bim);
        let z = c(zre, zim); // to the right of every atom cloud
        let m1 = DiscreteMeasure::new(mu.clone());
        let m2 = DiscreteMeasure::new(nu.clone());
        let mut combined = Vec::new();
        combined.extend(mu.iter().map(|&(p, w)| (p, alpha * w)));
        combined.extend(nu.iter().map(|&(p, w)| (p, beta * w)));
        let m12 = DiscreteMeasure::new(combined);
        let lhs = m12.cauchy(z).unwrap();
        let rhs = alpha * m1.cauchy(z).unwrap() + beta * m2.cauchy(z).unwrap();
        let scale = 1.0 + rhs.norm();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
    }

    // the transform is holomorphic off the atoms: the Cauchy-Riemann
    // residual of a centered stencil vanishes to stencil accuracy
    #[test]
    fn cauchy_is_holomorphic_off_the_atoms(
        mu in atoms_strategy(6),
        (zre, zim) in (-3.0..3.0f64, -3.0..3.0f64),
    ) {
        let z = c(zre, zim);
        for &(p, _) in &mu {
            prop_assume!((z - p).norm() >= 0.1);
        }
        let m = DiscreteMeasure::new(mu);
        let h = 1e-5;
        let fxp = m.cauchy(z + c(h, 0.0)).unwrap();
        let fxm = m.cauchy(z - c(h, 0.0)).unwrap();
        let fyp = m.cauchy(z + c(0.0, h)).unwrap();
        let fym = m.cauchy(z - c(0.0, h)).unwrap();
        let dx = (fxp - fxm) / (2.0 * h);
        let dy = (fyp - fym) / (2.0 * h);
        // d/dx + i d/dy annihilates holomorphic functions
        let residual = (dx + c(0.0, 1.0) * dy).norm();
        let scale = 1.0 + dx.norm() + dy.norm();
        prop_assert!(residual <= 1e-6 * scale, "CR residual {residual:e}");
    }

    // scaling the measure scales the transform
    #[test]
    fn scaled_measure_scales_the_transform(
        mu in atoms_strategy(5),
        (kre, kim) in (-3.0..3.0f64, -3.0..3.0f64),
        (zre, zim) in (2.5..4.0f64, -1.0..1.0f64),
    ) {
        let k = c(kre, kim);
        let z = c(zre, zim);
        let m = DiscreteMeasure::new(mu);
        let lhs = m.scaled(k).cauchy(z).unwrap();
        let rhs = k * m.cauchy(z).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }
}

/// Doubling the node count of an adequately resolved curve moves the
/// transform by no more than the trapezoid tail, for analytic densities.
#[test]
fn quadrature_has_converged_by_256_nodes() {
    let probes =
        [c(0.2, 0.1), c(0.5, -0.4), c(-0.7, 0.2), c(2.4, 0.0), c(0.0, -2.9), c(-2.2, 1.1)];
    for density in [
        (|w: Complex64| w.powi(-2)) as fn(Complex64) -> Complex64,
        (|w: Complex64| w.powi(3)) as fn(Complex64) -> Complex64,
    ] {
        let coarse = CurveMeasure::new(vec![
            CurveMeasure::circle(c(0.0, 0.0), 1.5, 256, 1, density).unwrap()
        ])
        .unwrap();
        let fine = CurveMeasure::new(vec![
            CurveMeasure::circle(c(0.0, 0.0), 1.5, 512, 1, density).unwrap()
        ])
        .unwrap();
        for &z in &probes {
            let a = coarse.cauchy(z).unwrap();
            let b = fine.cauchy(z).unwrap();
            assert!(
                (a - b).norm() <= 1e-9,
                "doubling moved the value by {:e} at {z}",
                (a - b).norm()
            );
        }
    }
}

/// Two circles carrying w^-2/(2 pi i), the inner one subtracted, rebuild
/// z^-2 on the annulus between them and zero elsewhere.
#[test]
fn two_circle_layer_rebuilds_inverse_square() {
    let tau = std::f64::consts::TAU;
    let density = move |w: Complex64| w.powi(-2) / c(0.0, tau);
    let neg_density = move |w: Complex64| -w.powi(-2) / c(0.0, tau);
    let nu = CurveMeasure::new(vec![
        CurveMeasure::circle(c(0.0, 0.0), 2.0, 1024, 1, density).unwrap(),
        CurveMeasure::circle(c(0.0, 0.0), 1.0, 1024, 1, neg_density).unwrap(),
    ])
    .unwrap();
    // inside the annulus: z^-2
    for &z in &[c(1.3, 0.2), c(-1.5, 0.3), c(0.0, 1.7), c(1.2, -1.2)] {
        let got = nu.cauchy(z).unwrap();
        let want = z.powi(-2);
        assert!((got - want).norm() <= 1e-8, "at {z}: {got} vs {want}");
    }
    // inside the hole and beyond the outer circle: zero
    for &z in &[c(0.2, 0.1), c(-0.4, 0.3), c(2.6, 0.0), c(0.0, -3.0)] {
        let got = nu.cauchy(z).unwrap();
        assert!(got.norm() <= 1e-8, "at {z}: {got}");
    }
}

/// Points within five node spacings of a curve are refused rather than
/// silently mis-quadratured.
#[test]
fn validity_zone_is_enforced() {
    let tau = std::f64::consts::TAU;
    let nu = CurveMeasure::new(vec![CurveMeasure::circle(
        c(0.0, 0.0),
        1.0,
        64,
        1,
        move |w| w.powi(-2) / c(0.0, tau),
    )
    .unwrap()])
    .unwrap();
    // spacing = 2 pi / 64, zone = 5 spacings ~ 0.49
    assert!(nu.cauchy(c(1.2, 0.0)).is_err());
    assert!(nu.cauchy(c(1.6, 0.0)).is_ok());
}
