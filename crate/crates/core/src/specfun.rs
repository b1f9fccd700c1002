//! Bessel and Hankel functions of integer order and real positive argument.
//!
//! `J_n` comes from Miller's backward recurrence normalized with
//! `J_0 + 2 sum J_2k = 1`. `Y_0`, `Y_1` come from Neumann series in the `J`
//! values for small arguments and from the Hankel asymptotic expansion for
//! large ones; higher orders use forward recurrence. The scaled Hankel
//! function `e^{-ix} H_n(x)` stays finite for arguments far beyond the range
//! where `e^{ix}` could be formed accurately, which the layer oracle needs.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest order any sequence routine will produce.
pub const MAX_ORDER: usize = 2000;

/// Magnitudes below this are flushed to zero and reported as underflow.
pub const UNDERFLOW: f64 = 1e-300;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// At and above this argument the Hankel asymptotic series is used for the seeds.
const ASYMPTOTIC_X: f64 = 25.0;
/// Above this argument `J` also comes from the asymptotic seeds.
const MILLER_MAX_X: f64 = 1e5;

/// `J_n(x)` and `Y_n(x)` at one order and argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub order: usize,
    pub x: f64,
    pub j: f64,
    pub y: f64,
}

impl BesselEval {
    pub fn hankel1(&self) -> Complex64 {
        Complex64::new(self.j, self.y)
    }
}

/// `J_0(x) ..= J_{n_max}(x)` plus a flag set when tiny values were flushed to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct JSequence {
    pub values: Vec<f64>,
    pub underflow: bool,
}

fn check_args(n_max: usize, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Bessel argument must be positive and finite, got {x}")));
    }
    if n_max > MAX_ORDER {
        return Err(Error::Capacity { requested: n_max, max: MAX_ORDER });
    }
    Ok(())
}

/// Starting order for the backward recurrence.
fn miller_start(n_max: usize, x: f64) -> usize {
    let n = n_max as f64;
    let by_order = n + 10.0 + 2.0 * (n * x).sqrt();
    let by_arg = x + 16.0 * x.cbrt() + 30.0;
    let s = by_order.max(by_arg).ceil() as usize;
    s + (s & 1)
}

/// Normalized `J_0 ..= J_start` by backward recurrence. Valid for `0 < x <= MILLER_MAX_X`.
fn miller_all(n_max: usize, x: f64) -> Vec<f64> {
    let start = miller_start(n_max, x);
    let mut f = vec![0.0; start + 1];
    f[start] = 1e-30;
    let mut next = 0.0;
    for k in (1..=start).rev() {
        let prev = (2.0 * k as f64 / x) * f[k] - next;
        next = f[k];
        f[k - 1] = prev;
        if prev.abs() > 1e250 {
            for v in &mut f[k - 1..] {
                *v *= 1e-250;
            }
            next *= 1e-250;
        }
    }
    let mut norm = f[0];
    for k in (2..=start).step_by(2) {
        norm += 2.0 * f[k];
    }
    for v in &mut f {
        *v /= norm;
    }
    f
}

/// `e^{-ix} H_n(x)` for `n = 0, 1` from the Hankel asymptotic expansion.
fn hankel_scaled_asymptotic(nu: u32, x: f64) -> Complex64 {
    let mu = 4.0 * (nu as f64).powi(2);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for m in 1..200 {
        let odd = (2 * m - 1) as f64;
        term *= Complex64::new(0.0, (mu - odd * odd) / (8.0 * m as f64 * x));
        let size = term.norm();
        if size > last {
            break;
        }
        sum += term;
        if size < 1e-17 * sum.norm() {
            break;
        }
        last = size;
    }
    let phase = -(nu as f64) * PI / 2.0 - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * Complex64::from_polar(1.0, phase) * sum
}

/// `H_n(x)` for `n = 0, 1` from the asymptotic expansion, with `e^{ix}` restored.
fn hankel_asymptotic(nu: u32, x: f64) -> Complex64 {
    hankel_scaled_asymptotic(nu, x) * Complex64::from_polar(1.0, x)
}

/// `Y_0(x)`, `Y_1(x)` from Neumann series over a normalized `J` sequence.
fn y01_neumann(j: &[f64], x: f64) -> (f64, f64) {
    let lg = (x / 2.0).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut k = 1;
    while 2 * k < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        k += 1;
    }
    let y0 = (2.0 / PI) * lg * j[0] - (4.0 / PI) * s0;

    let mut s1 = 0.0;
    let mut m = 1;
    while 2 * m + 1 < j.len() {
        let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
        let mf = m as f64;
        s1 += sign * (2.0 * mf + 1.0) / (2.0 * mf * (mf + 1.0)) * j[2 * m + 1];
        m += 1;
    }
    let y1 = (2.0 / PI) * (lg - 1.0) * j[1] - (2.0 / PI) * j[0] / x + (4.0 / PI) * s1;
    (y0, y1)
}

fn flush(values: &mut [f64]) -> bool {
    let mut underflow = false;
    for v in values {
        if v.abs() < UNDERFLOW && *v != 0.0 {
            *v = 0.0;
            underflow = true;
        }
    }
    underflow
}

/// `J_0(x) ..= J_{n_max}(x)`.
pub fn bessel_j_sequence(n_max: usize, x: f64) -> Result<JSequence> {
    check_args(n_max, x)?;
    let mut values = if x <= MILLER_MAX_X {
        let mut all = miller_all(n_max, x);
        all.truncate(n_max + 1);
        all
    } else {
        let mut v = Vec::with_capacity(n_max + 1);
        v.push(hankel_asymptotic(0, x).re);
        if n_max >= 1 {
            v.push(hankel_asymptotic(1, x).re);
        }
        for n in 1..n_max {
            let next = (2.0 * n as f64 / x) * v[n] - v[n - 1];
            v.push(next);
        }
        v
    };
    let underflow = flush(&mut values);
    Ok(JSequence { values, underflow })
}

fn y_seeds(x: f64) -> (f64, f64) {
    if x < ASYMPTOTIC_X {
        let j = miller_all(1, x);
        y01_neumann(&j, x)
    } else {
        (hankel_asymptotic(0, x).im, hankel_asymptotic(1, x).im)
    }
}

fn forward<T>(n_max: usize, x: f64, h0: T, h1: T, finite: impl Fn(&T) -> bool) -> Result<Vec<T>>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T>,
{
    let mut v = Vec::with_capacity(n_max + 1);
    v.push(h0);
    if n_max >= 1 {
        v.push(h1);
    }
    for n in 1..n_max {
        let next = v[n] * (2.0 * n as f64 / x) - v[n - 1];
        if !finite(&next) {
            return Err(Error::Overflow { order: n + 1, x });
        }
        v.push(next);
    }
    Ok(v)
}

/// `Y_0(x) ..= Y_{n_max}(x)`. Fails with [`Error::Overflow`] when a value leaves the `f64` range.
pub fn bessel_y_sequence(n_max: usize, x: f64) -> Result<Vec<f64>> {
    check_args(n_max, x)?;
    let (y0, y1) = y_seeds(x);
    forward(n_max, x, y0, y1, |v: &f64| v.is_finite() && v.abs() < 1e300)
}

/// `H_0^(1)(x) ..= H_{n_max}^(1)(x)`.
pub fn hankel1_sequence(n_max: usize, x: f64) -> Result<Vec<Complex64>> {
    let j = bessel_j_sequence(n_max, x)?;
    let y = bessel_y_sequence(n_max, x)?;
    Ok(j.values.iter().zip(&y).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

/// `e^{-ix} H_n^(1)(x)` for `n = 0 ..= n_max`. Finite for any positive `x` below the overflow order.
pub fn hankel1_scaled_sequence(n_max: usize, x: f64) -> Result<Vec<Complex64>> {
    check_args(n_max, x)?;
    if x < ASYMPTOTIC_X {
        let rot = Complex64::from_polar(1.0, -x);
        return Ok(hankel1_sequence(n_max, x)?.into_iter().map(|h| h * rot).collect());
    }
    let h0 = hankel_scaled_asymptotic(0, x);
    let h1 = hankel_scaled_asymptotic(1, x);
    forward(n_max, x, h0, h1, |v: &Complex64| v.is_finite() && v.norm() < 1e300)
}

/// `H_n^(1)(x)`.
pub fn hankel1(n: usize, x: f64) -> Result<Complex64> {
    Ok(hankel1_sequence(n, x)?[n])
}

/// `e^{-ix} H_n^(1)(x)`.
pub fn hankel1_scaled(n: usize, x: f64) -> Result<Complex64> {
    Ok(hankel1_scaled_sequence(n, x)?[n])
}

/// `J_n(x)` and `Y_n(x)` together.
pub fn bessel_eval(n: usize, x: f64) -> Result<BesselEval> {
    let j = bessel_j_sequence(n, x)?;
    let y = bessel_y_sequence(n, x)?;
    Ok(BesselEval { order: n, x, j: j.values[n], y: y[n] })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trapezoid rule on `(1/pi) int_0^pi cos(n t - x sin t) dt`, exponentially accurate.
    fn j_integral(n: usize, x: f64) -> f64 {
        let m = 2 * (n + x.ceil() as usize + 60);
        let h = PI / m as f64;
        let mut s = 0.0;
        for i in 0..=m {
            let t = i as f64 * h;
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            s += w * (n as f64 * t - x * t.sin()).cos();
        }
        s * h / PI
    }

    fn j_power_series(n: usize, x: f64) -> f64 {
        j_power_series_with_scale(n, x).0
    }

    /// Power series and its largest term, which bounds the cancellation error.
    fn j_power_series_with_scale(n: usize, x: f64) -> (f64, f64) {
        let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(|i| i as f64).product::<f64>();
        let mut sum = term;
        let mut biggest = term.abs();
        for m in 1..200 {
            term *= -(x / 2.0).powi(2) / (m as f64 * (m + n) as f64);
            sum += term;
            biggest = biggest.max(term.abs());
        }
        (sum, biggest)
    }

    #[test]
    fn j_matches_power_series_for_small_arguments() {
        for &x in &[1e-3, 0.3, 1.0, 4.5, 9.0] {
            let seq = bessel_j_sequence(30, x).unwrap();
            for n in 0..=30 {
                let want = j_power_series(n, x);
                let got = seq.values[n];
                assert!((got - want).abs() <= 1e-13 * want.abs() + 5e-14, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn j_matches_integral_representation() {
        for &x in &[12.5, 25.0, 50.0, 150.0, 640.0] {
            let seq = bessel_j_sequence(220, x).unwrap();
            for n in (0..=220).step_by(7) {
                let want = j_integral(n, x);
                assert!((seq.values[n] - want).abs() < 2e-14, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn j_tail_decays_below_cutoff() {
        let seq = bessel_j_sequence(40, 12.5).unwrap();
        assert!(seq.values[25].abs() >= 1e-12);
        assert!(seq.values[40].abs() < 1e-12);
    }

    #[test]
    fn large_argument_branch_matches_miller() {
        let x = 9.0e4;
        let a = bessel_j_sequence(50, x).unwrap();
        let b = bessel_j_sequence(50, 1.0e5 + 1e-6).unwrap();
        for n in 0..=50 {
            assert!((a.values[n] - j_integral(n, x)).abs() < 1e-13);
            assert!((b.values[n] - j_integral(n, 1.0e5 + 1e-6)).abs() < 1e-12);
        }
    }

    #[test]
    fn y0_y1_known_values() {
        let cases = [
            (0.1, -1.534_238_651_350_366_7, -6.458_951_094_702_027),
            (1.0, 0.088_256_964_215_676_97, -0.781_212_821_300_288_8),
            (10.0, 0.055_671_167_283_599_61, 0.249_015_424_206_953_88),
            (24.9, -0.136_499_183_996_765_3, -0.086_002_557_595_554_4),
            (25.0, -0.127_249_432_268_006_25, -0.098_829_964_783_237_55),
            (300.0, -0.031_831_889_730_002_54, 0.033_245_548_121_310_864),
        ];
        for &(x, y0, y1) in &cases {
            let y = bessel_y_sequence(1, x).unwrap();
            assert!((y[0] - y0).abs() < 1e-14, "Y0({x})");
            assert!((y[1] - y1).abs() < 1e-14, "Y1({x})");
        }
    }

    #[test]
    fn wronskian_holds() {
        for &x in &[0.05, 0.7, 3.0, 24.99, 25.0, 80.0, 1e3, 2e5] {
            let j = bessel_j_sequence(60, x).unwrap().values;
            let y = bessel_y_sequence(60, x).unwrap();
            for n in 0..60 {
                let w = j[n + 1] * y[n] - j[n] * y[n + 1];
                let want = 2.0 / (PI * x);
                let scale = (j[n + 1] * y[n]).abs().max((j[n] * y[n + 1]).abs()).max(want);
                assert!((w - want).abs() <= 1e-12 * scale, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn scaled_hankel_matches_unscaled() {
        for &x in &[3.0, 24.0, 26.0, 300.0, 5e3] {
            let h = hankel1_sequence(80, x).unwrap();
            let hs = hankel1_scaled_sequence(80, x).unwrap();
            let rot = Complex64::from_polar(1.0, -x);
            for n in 0..=80 {
                let d = (h[n] * rot - hs[n]).norm();
                assert!(d <= 1e-12 * hs[n].norm(), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn scaled_hankel_finite_at_huge_argument() {
        let hs = hankel1_scaled_sequence(200, 5e25).unwrap();
        let amp = (2.0 / (PI * 5e25)).sqrt();
        for h in hs {
            assert!((h.norm() - amp).abs() < 1e-12 * amp);
        }
    }

    #[test]
    fn y_overflow_is_reported() {
        assert!(matches!(bessel_y_sequence(400, 1.0), Err(Error::Overflow { .. })));
    }

    #[test]
    fn domain_and_capacity_errors() {
        assert!(matches!(bessel_j_sequence(3, 0.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_j_sequence(3, -1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_j_sequence(MAX_ORDER + 1, 1.0), Err(Error::Capacity { .. })));
    }

    #[test]
    fn underflow_is_flagged() {
        let s = bessel_j_sequence(200, 1e-3).unwrap();
        assert!(s.underflow);
        assert_eq!(s.values[200], 0.0);
    }

    #[test]
    fn j_sequence_sum_rule() {
        let s = bessel_j_sequence(400, 123.4).unwrap();
        let mut sum = s.values[0];
        for k in (2..=400).step_by(2) {
            sum += 2.0 * s.values[k];
        }
        assert!((sum - 1.0).abs() < 1e-13);
    }

    #[test]
    fn j1_at_one() {
        let want = j_power_series(1, 1.0);
        assert!((want - 0.440_050_585_744_933_5).abs() < 1e-16);
        assert!((bessel_j_sequence(1, 1.0).unwrap().values[1] - want).abs() < 1e-15);
        assert!((bessel_j_sequence(0, 1e-9).unwrap().values[0] - 1.0).abs() < 1e-16);
    }

    #[test]
    fn scaled_modulus_is_decreasing() {
        for n in [1usize, 2, 5, 20] {
            let mut prev = f64::INFINITY;
            for i in 0..400 {
                let x = 0.5 + 0.25 * i as f64;
                let h = hankel1(n, x).unwrap();
                let v = x * h.norm_sqr();
                assert!(v <= prev * (1.0 + 1e-14), "n={n} x={x}");
                prev = v;
            }
        }
        let y1: Vec<f64> = [1.0, 2.0, 5.0, 10.0, 50.0].iter().map(|&x| x * hankel1(1, x).unwrap().norm_sqr()).collect();
        assert!(y1.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn ratio_bounds_at_reference_point() {
        let (k, a, rho) = (10.0, 1.0, 4.0);
        let bound = (a / rho as f64).sqrt();
        let h0 = hankel1(0, k * rho).unwrap().norm() / hankel1(0, k * a).unwrap().norm();
        assert!(h0 <= 4.0 * bound);
        for n in 1..=60 {
            let r = hankel1(n, k * rho).unwrap().norm() / hankel1(n, k * a).unwrap().norm();
            assert!(r <= bound, "n={n}");
        }
    }

    proptest::proptest! {
        #[test]
        fn wronskian_on_random_grid(n in 0usize..300, x in 0.5f64..500.0) {
            // Orders where Y_n overflows are reported as errors, tested separately.
            let y = bessel_y_sequence(n + 1, x);
            proptest::prop_assume!(y.is_ok());
            let y = y.unwrap();
            let j = bessel_j_sequence(n + 1, x).unwrap().values;
            let w = j[n + 1] * y[n] - j[n] * y[n + 1];
            let want = 2.0 / (PI * x);
            let scale = (j[n + 1] * y[n]).abs().max((j[n] * y[n + 1]).abs()).max(want);
            proptest::prop_assert!((w - want).abs() <= 1e-12 * scale);
        }

        #[test]
        fn ratio_bounds_hold(n in 0usize..=200, a in 1.0f64..100.0, t in 0.0f64..1.0, k in 0.05f64..20.0) {
            let rho = a + t * (100.0 - a);
            proptest::prop_assume!(k * a > 1.0 && rho > a);
            let (num, den) = (hankel1(n, k * rho), hankel1(n, k * a));
            proptest::prop_assume!(num.is_ok() && den.is_ok());
            let r = num.unwrap().norm() / den.unwrap().norm();
            let bound = (a / rho).sqrt();
            if n == 0 {
                proptest::prop_assert!(r <= 4.0 * bound);
            } else {
                proptest::prop_assert!(r <= bound * (1.0 + 1e-12));
            }
        }

        #[test]
        fn order_zero_is_smallest(x in 1e-3f64..1e3) {
            let h = hankel1_sequence(1, x).unwrap();
            proptest::prop_assert!(h[0].norm() <= h[1].norm());
        }

        #[test]
        fn matches_power_series(n in 0usize..=30, x in 0.01f64..20.0) {
            let (want, biggest) = j_power_series_with_scale(n, x);
            let got = bessel_j_sequence(n, x).unwrap().values[n];
            proptest::prop_assert!((got - want).abs() <= 1e-12 * want.abs() + 1e-15 * biggest);
        }
    }
}
