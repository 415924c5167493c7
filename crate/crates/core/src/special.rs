//! Complex gamma, reciprocal gamma, digamma and Pochhammer symbols.
//!
//! The gamma function uses the Lanczos approximation with `g = 7` and nine
//! coefficients, applied to `ln Γ` and exponentiated. Arguments with
//! `Re z < 1/2` go through the reflection formula
//!
//! ```text
//! Γ(z) Γ(1 - z) = π / sin(π z)
//! ```
//!
//! The digamma function shifts the argument to `|z| ≥ 10` with the
//! recurrence `ψ(z + 1) = ψ(z) + 1/z` and then sums the Bernoulli asymptotic
//! series.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{CrownError, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `B_{2k} / (2k)` for k = 1..=8.
const DIGAMMA_ASYMPTOTIC: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
    -3_617.0 / 8_160.0,
];

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// True when `z` sits exactly on a pole of Γ.
pub fn is_gamma_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

fn ln_gamma_lanczos(z: Complex64) -> Complex64 {
    // Valid for Re z >= 1/2.
    let z = z - 1.0;
    let mut acc = Complex64::new(LANCZOS_COEFFS[0], 0.0);
    for (k, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += *c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Γ(z) for complex `z`.
pub fn gamma(z: Complex64) -> Result<Complex64> {
    if is_gamma_pole(z) {
        return Err(CrownError::GammaPole(z.re));
    }
    Ok(gamma_unchecked(z))
}

fn gamma_unchecked(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let s = (PI * z).sin();
        PI / (s * ln_gamma_lanczos(1.0 - z).exp())
    } else {
        ln_gamma_lanczos(z).exp()
    }
}

/// Real-argument convenience wrapper around [`gamma`].
pub fn gamma_real(x: f64) -> Result<f64> {
    gamma(Complex64::new(x, 0.0)).map(|g| g.re)
}

/// 1/Γ(z), entire; exactly zero at the poles of Γ.
pub fn rgamma(z: Complex64) -> Complex64 {
    if is_gamma_pole(z) {
        return Complex64::new(0.0, 0.0);
    }
    if z.re < 0.5 {
        // 1/Γ(z) = sin(πz) Γ(1-z) / π
        (PI * z).sin() * ln_gamma_lanczos(1.0 - z).exp() / PI
    } else {
        (-ln_gamma_lanczos(z)).exp()
    }
}

/// ψ(z) = Γ'(z)/Γ(z).
pub fn digamma(z: Complex64) -> Result<Complex64> {
    if is_gamma_pole(z) {
        return Err(CrownError::GammaPole(z.re));
    }
    if z.re < 0.5 {
        let reflected = digamma(1.0 - z)?;
        let cot = (PI * z).cos() / (PI * z).sin();
        return Ok(reflected - PI * cot);
    }
    let mut z = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.norm() < 10.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv2;
    for c in DIGAMMA_ASYMPTOTIC {
        series += c * pow;
        pow *= inv2;
    }
    Ok(acc + z.ln() - 0.5 / z - series)
}

/// Rising factorial (a)_k = a (a+1) ... (a+k-1).
pub fn pochhammer(a: Complex64, k: usize) -> Complex64 {
    (0..k).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (a + j as f64))
}

/// k! as a float.
pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn classical_values() {
        assert!(rel(gamma(c(1.0, 0.0)).unwrap(), c(1.0, 0.0)) < 1e-14);
        assert!(rel(gamma(c(0.5, 0.0)).unwrap(), c(PI.sqrt(), 0.0)) < 1e-14);
        assert!(rel(gamma(c(5.0, 0.0)).unwrap(), c(24.0, 0.0)) < 1e-14);
        assert!(rel(gamma(c(-0.5, 0.0)).unwrap(), c(-2.0 * PI.sqrt(), 0.0)) < 1e-14);
        assert!(gamma(c(-2.0, 0.0)).is_err());
        assert_eq!(rgamma(c(0.0, 0.0)), c(0.0, 0.0));
        assert_eq!(rgamma(c(-3.0, 0.0)), c(0.0, 0.0));
    }

    #[test]
    fn imaginary_axis_modulus() {
        // |Γ(iy)|² = π / (y sinh(πy))
        for y in [0.3, 1.2, 4.0] {
            let g = gamma(c(0.0, y)).unwrap();
            let expect = PI / (y * (PI * y).sinh());
            assert!((g.norm_sqr() - expect).abs() / expect < 1e-13);
        }
        // |Γ(1/2 + iy)|² = π / cosh(πy)
        for y in [0.3, 1.2, 4.0] {
            let g = gamma(c(0.5, y)).unwrap();
            let expect = PI / (PI * y).cosh();
            assert!((g.norm_sqr() - expect).abs() / expect < 1e-13);
        }
    }

    #[test]
    fn digamma_at_one_matches_series_for_gamma_constant() {
        // γ = lim (H_N - ln N); with the 1/(2N) correction the error is O(N^-2).
        let n = 1_000_000usize;
        let harmonic: f64 = (1..=n).rev().map(|k| 1.0 / k as f64).sum();
        let nf = n as f64;
        let gamma_const = harmonic - nf.ln() - 0.5 / nf + 1.0 / (12.0 * nf * nf);
        let psi1 = digamma(c(1.0, 0.0)).unwrap();
        assert!((psi1.re + gamma_const).abs() < 1e-13);
        assert!(psi1.im.abs() < 1e-15);
        assert!((gamma_const - EULER_GAMMA).abs() < 1e-13);
    }

    #[test]
    fn digamma_half_and_reflection() {
        let psi_half = digamma(c(0.5, 0.0)).unwrap();
        assert!((psi_half.re - (-EULER_GAMMA - 2.0 * 2f64.ln())).abs() < 1e-13);
        let z = c(0.3, 0.7);
        let lhs = digamma(1.0 - z).unwrap() - digamma(z).unwrap();
        let rhs = PI * (PI * z).cos() / (PI * z).sin();
        assert!(rel(lhs, rhs) < 1e-13);
    }

    #[test]
    fn digamma_matches_log_derivative() {
        let z = c(1.7, -0.4);
        let h = 1e-5;
        let lg = |w: Complex64| ln_gamma_lanczos(w);
        let fd = (lg(z + h) - lg(z - h)) / (2.0 * h);
        assert!(rel(digamma(z).unwrap(), fd) < 1e-9);
    }

    #[test]
    fn pochhammer_basics() {
        assert_eq!(pochhammer(c(3.0, 0.0), 0), c(1.0, 0.0));
        assert_eq!(pochhammer(c(1.0, 0.0), 5), c(120.0, 0.0));
        assert_eq!(factorial(6), 720.0);
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn gamma_recurrence(re in -8.0f64..12.0, im in -6.0f64..6.0) {
            let z = c(re, im);
            prop_assume!((z - z.re.round()).norm() > 1e-3);
            let lhs = gamma(z + 1.0).unwrap();
            let rhs = z * gamma(z).unwrap();
            prop_assert!(rel(lhs, rhs) < 1e-12);
        }

        #[test]
        fn rgamma_inverts_gamma(re in -8.0f64..12.0, im in -6.0f64..6.0) {
            let z = c(re, im);
            prop_assume!((z - z.re.round()).norm() > 1e-3);
            prop_assert!(rel(rgamma(z) * gamma(z).unwrap(), c(1.0, 0.0)) < 1e-12);
        }

        #[test]
        fn digamma_recurrence(re in -8.0f64..12.0, im in -6.0f64..6.0) {
            let z = c(re, im);
            prop_assume!((z - z.re.round()).norm() > 1e-3);
            let lhs = digamma(z + 1.0).unwrap();
            let rhs = digamma(z).unwrap() + 1.0 / z;
            prop_assert!((lhs - rhs).norm() <= 1e-11 * (1.0 + lhs.norm()));
        }
    }
}
