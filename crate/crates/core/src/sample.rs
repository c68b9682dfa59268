//! Reproducible low-discrepancy point sets. Verdicts quantified over
//! "almost every z" are checked on finite grids; Halton sequences shifted by
//! a seeded offset make those grids well spread and byte-reproducible.

use num_complex::Complex64;

const TAU: f64 = std::f64::consts::TAU;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

/// Digit-reversal radical inverse of k in the given base.
fn radical_inverse(base: u64, mut k: u64) -> f64 {
    let mut scale = 1.0 / base as f64;
    let mut r = 0.0;
    while k > 0 {
        r += (k % base) as f64 * scale;
        k /= base;
        scale /= base as f64;
    }
    r
}

/// Halton (2,3) points in the unit square, shifted modulo 1 by a seeded
/// offset so distinct seeds give distinct grids with the same spread.
pub fn unit_square(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut state = seed;
    let su = unit_from_bits(splitmix64(&mut state));
    let sv = unit_from_bits(splitmix64(&mut state));
    (0..n)
        .map(|k| {
            let u = (radical_inverse(2, k as u64 + 1) + su).fract();
            let v = (radical_inverse(3, k as u64 + 1) + sv).fract();
            (u, v)
        })
        .collect()
}

/// Area-uniform points in an annulus (or disc, with r_inner = 0).
pub fn annulus(center: Complex64, r_inner: f64, r_outer: f64, seed: u64, n: usize) -> Vec<Complex64> {
    unit_square(seed, n)
        .into_iter()
        .map(|(u, v)| {
            let r = (r_inner * r_inner + u * (r_outer * r_outer - r_inner * r_inner)).sqrt();
            center + Complex64::from_polar(r, TAU * v)
        })
        .collect()
}

/// Uniform points in an axis-aligned rectangle given by opposite corners.
pub fn rectangle(lo: Complex64, hi: Complex64, seed: u64, n: usize) -> Vec<Complex64> {
    unit_square(seed, n)
        .into_iter()
        .map(|(u, v)| Complex64::new(lo.re + u * (hi.re - lo.re), lo.im + v * (hi.im - lo.im)))
        .collect()
}

/// Equally spaced points on a circle, rotated by a seeded phase.
pub fn circle(center: Complex64, radius: f64, seed: u64, n: usize) -> Vec<Complex64> {
    let mut state = seed;
    let phase = TAU * unit_from_bits(splitmix64(&mut state));
    (0..n)
        .map(|k| center + Complex64::from_polar(radius, phase + TAU * k as f64 / n as f64))
        .collect()
}
