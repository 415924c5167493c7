//! Extended-precision reference values for `₂F₁` inside the unit disk.
//!
//! Complex numbers are held in binary fixed point with [`FRACTION_BITS`]
//! fractional bits (about 77 decimal digits) on top of arbitrary-size
//! integers. The Maclaurin series is summed until a term falls below the
//! resolution, which for `|z| ≤ 0.9` happens after at most a few thousand
//! terms. Inputs are converted from `f64` exactly.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{CrownError, Result};
use crate::hyp2f1::HypTriple;

/// Fractional bits of the fixed-point representation.
pub const FRACTION_BITS: u32 = 256;
/// Largest `|z|` the oracle accepts.
pub const ORACLE_RADIUS: f64 = 0.9;
const MAX_ORACLE_TERMS: usize = 20_000;

#[derive(Clone, Debug, PartialEq)]
struct Fixed {
    re: BigInt,
    im: BigInt,
}

fn from_f64(x: f64) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let exponent = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp2) = if exponent == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1u64 << 52), exponent - 1075)
    };
    let m = BigInt::from(mantissa);
    let shift = exp2 + FRACTION_BITS as i64;
    let v = if shift >= 0 { m << (shift as usize) } else { m >> ((-shift) as usize) };
    if negative {
        -v
    } else {
        v
    }
}

fn to_f64(x: &BigInt) -> f64 {
    // keep 64 significant bits before converting, then rescale
    let bits = x.bits() as i64;
    let drop = (bits - 64).max(0);
    let head = (x >> (drop as usize)).to_f64().unwrap_or(f64::NAN);
    head * 2f64.powi((drop - FRACTION_BITS as i64) as i32)
}

impl Fixed {
    fn from_complex(z: Complex64) -> Self {
        Self {
            re: from_f64(z.re),
            im: from_f64(z.im),
        }
    }

    fn one() -> Self {
        Self {
            re: BigInt::one() << FRACTION_BITS as usize,
            im: BigInt::zero(),
        }
    }

    fn to_complex(&self) -> Complex64 {
        Complex64::new(to_f64(&self.re), to_f64(&self.im))
    }

    fn add(&self, o: &Self) -> Self {
        Self {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    fn add_int(&self, k: usize) -> Self {
        Self {
            re: &self.re + (BigInt::from(k) << FRACTION_BITS as usize),
            im: self.im.clone(),
        }
    }

    fn mul(&self, o: &Self) -> Self {
        let p = FRACTION_BITS as usize;
        Self {
            re: (&self.re * &o.re - &self.im * &o.im) >> p,
            im: (&self.re * &o.im + &self.im * &o.re) >> p,
        }
    }

    fn div(&self, o: &Self) -> Self {
        let p = FRACTION_BITS as usize;
        let den = (&o.re * &o.re + &o.im * &o.im) >> p;
        let num_re = (&self.re * &o.re + &self.im * &o.im) >> p;
        let num_im = (&self.im * &o.re - &self.re * &o.im) >> p;
        Self {
            re: (num_re << p) / &den,
            im: (num_im << p) / &den,
        }
    }

    fn mag_bits(&self) -> u64 {
        self.re.abs().bits().max(self.im.abs().bits())
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

/// `₂F₁(a, b; c; z)` for `|z| ≤ 0.9` in extended precision, rounded to `f64`.
pub fn oracle_2f1(p: &HypTriple, z: Complex64) -> Result<Complex64> {
    if z.norm() > ORACLE_RADIUS + 1e-15 {
        return Err(CrownError::OutOfDisk);
    }
    if p.c.im == 0.0 && p.c.re <= 0.0 && p.c.re == p.c.re.round() {
        return Err(CrownError::InvalidParameter("c is a non-positive integer".into()));
    }
    let (a, b, c, zf) = (
        Fixed::from_complex(p.a),
        Fixed::from_complex(p.b),
        Fixed::from_complex(p.c),
        Fixed::from_complex(z),
    );
    let mut term = Fixed::one();
    let mut sum = Fixed::one();
    // stop once terms sit 200 bits below the running sum
    let mut quiet = 0;
    for k in 0..MAX_ORACLE_TERMS {
        let num = a.add_int(k).mul(&b.add_int(k)).mul(&zf);
        let den = c.add_int(k).mul(&Fixed::one().add_int(k));
        term = term.mul(&num).div(&den);
        sum = sum.add(&term);
        if term.is_zero() || term.mag_bits() < sum.mag_bits().saturating_sub(200).max(16) {
            quiet += 1;
            if quiet >= 4 || term.is_zero() {
                return Ok(sum.to_complex());
            }
        } else {
            quiet = 0;
        }
    }
    Err(CrownError::NonConvergent {
        what: "extended-precision series",
        terms: MAX_ORACLE_TERMS,
    })
}

/// Polar grid of `n_radii × n_angles` points with radii up to `0.9`.
pub fn oracle_grid(n_radii: usize, n_angles: usize) -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(n_radii * n_angles);
    for i in 0..n_radii {
        let r = ORACLE_RADIUS * (i + 1) as f64 / n_radii as f64;
        for j in 0..n_angles {
            let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_angles as f64;
            pts.push(Complex64::from_polar(r, th));
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exact_conversion_round_trips() {
        for x in [0.0, 1.0, -0.3, 1e-30, 123.456, -7.25e5] {
            assert_eq!(to_f64(&from_f64(x)), x);
        }
    }

    #[test]
    fn log_identity_to_full_precision() {
        // F(1,1;2;z) = -ln(1-z)/z
        let p = HypTriple::new(c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0));
        for z in [c(0.5, 0.0), c(-0.9, 0.0), c(0.3, 0.8)] {
            let v = oracle_2f1(&p, z).unwrap();
            let expect = -(1.0 - z).ln() / z;
            assert!((v - expect).norm() < 4e-16 * expect.norm(), "{z}: {v} vs {expect}");
        }
        let p = HypTriple::new(c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0));
        let v = oracle_2f1(&p, c(0.5, 0.0)).unwrap();
        assert!((v.re - 2f64.sqrt()).abs() < 3e-16);
    }

    #[test]
    fn rejects_outside_disk() {
        let p = HypTriple::new(c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0));
        assert!(matches!(oracle_2f1(&p, c(0.95, 0.0)), Err(CrownError::OutOfDisk)));
    }

    #[test]
    fn grid_shape() {
        let g = oracle_grid(8, 25);
        assert_eq!(g.len(), 200);
        assert!(g.iter().all(|z| z.norm() <= 0.9 + 1e-15));
        assert!(g.iter().all(|z| (z - 1.0).norm() >= 0.1 - 1e-15));
    }
}
