//! One-dimensional model distributions: regularized powers `x_±^λ`,
//! boundary powers `(x ± i0)^λ`, `ln(x ± i0)`, `δ^{(k)}`, the Heaviside
//! function and `e^{-1/x}`, paired against smooth compactly supported test
//! functions, plus a windowed Fourier decay probe.
//!
//! Regularized pairing of `x_+^λ` with `m = max(0, ⌊-Re λ⌋)` subtractions:
//!
//! ```text
//! ⟨x_+^λ, φ⟩ = ∫_0^L x^λ [φ(x) - Σ_{j<m} φ^{(j)}(0) x^j / j!] dx
//!            + Σ_{j<m} φ^{(j)}(0) / j! · L^{λ+j+1} / (λ+j+1)
//! ```
//!
//! Homogeneous `x^{-k}` (principal value for `k = 1`):
//!
//! ```text
//! ⟨x^{-k}, φ⟩ = ∫_0^∞ x^{-k} [φ(x) + (-1)^k φ(-x) - 2 Σ_{j ≤ k-2, j ≡ k (2)} φ^{(j)}(0) x^j / j!] dx
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{CrownError, Result};
use crate::hyp2f1::CutSide;
use crate::quad::{adaptive, richardson, Extrapolation, EPS_GRID, EPS_ORDER};
use crate::special::factorial;

/// Highest derivative order of the mollifier profile kept in the table.
pub const MAX_DERIVATIVE: usize = 24;
const PAIR_ABS_TOL: f64 = 1e-13;
const PAIR_REL_TOL: f64 = 1e-13;
/// Extra Taylor terms used next to the origin.
const TAYLOR_EXTRA: usize = 12;

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Polynomials `P_k` with `(d/ds)^k exp(-1/(1-s²)) = P_k(s) / (1-s²)^{2k} · exp(-1/(1-s²))`.
fn profile_polys() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut out: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..MAX_DERIVATIVE {
            let p = &out[k];
            let kf = k as f64;
            // P' (1-s²)² + 4k s P (1-s²) - 2 s P
            let dp: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
            let mut next = vec![0.0; p.len() + 3];
            let one_m_s2_sq = [1.0, 0.0, -2.0, 0.0, 1.0];
            for (i, a) in dp.iter().enumerate() {
                for (j, b) in one_m_s2_sq.iter().enumerate() {
                    next[i + j] += a * b;
                }
            }
            for (i, a) in p.iter().enumerate() {
                next[i + 1] += 4.0 * kf * a - 2.0 * a;
                next[i + 3] -= 4.0 * kf * a;
            }
            while next.len() > 1 && *next.last().unwrap() == 0.0 {
                next.pop();
            }
            out.push(next);
        }
        out
    })
}

/// `k`-th derivative of `exp(-1/(1-s²))` (zero for `|s| ≥ 1`).
pub fn profile_derivative(k: usize, s: f64) -> f64 {
    assert!(k <= MAX_DERIVATIVE, "profile derivatives are tabulated up to order {MAX_DERIVATIVE}");
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - s * s;
    let poly = &profile_polys()[k];
    let p = poly.iter().rev().fold(0.0, |acc, c| acc * s + c);
    p * (-1.0 / q - 2.0 * k as f64 * q.ln()).exp()
}

/// Smooth test function on the line with exact derivatives.
pub trait TestFunction {
    fn value(&self, x: f64) -> Complex64;
    /// `k`-th derivative at `x`.
    fn derivative(&self, k: usize, x: f64) -> Complex64;
    /// Closed interval containing the support.
    fn support(&self) -> (f64, f64);
    /// Radius around the origin where the Taylor polynomial from
    /// [`TestFunction::derivative`] is used instead of direct evaluation.
    fn taylor_radius(&self) -> f64;
    /// Longest panel length for oscillatory integrands.
    fn panel_length(&self) -> f64 {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Mollifier,
    /// `x^k` times the mollifier, `x` the global coordinate.
    MollifierMonomial(usize),
}

/// `exp(-1/(1-s²))` with `s = (x - center)/halfwidth`, optionally times `x^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFn1D {
    pub kind: TestKind,
    pub center: f64,
    pub halfwidth: f64,
}

impl TestFn1D {
    pub fn mollifier(center: f64, halfwidth: f64) -> Result<Self> {
        Self::new(TestKind::Mollifier, center, halfwidth)
    }

    pub fn new(kind: TestKind, center: f64, halfwidth: f64) -> Result<Self> {
        if !(halfwidth > 0.0 && halfwidth.is_finite() && center.is_finite()) {
            return Err(CrownError::InvalidParameter(format!(
                "test function needs a positive finite halfwidth, got {halfwidth}"
            )));
        }
        Ok(Self { kind, center, halfwidth })
    }

    fn profile(&self, k: usize, x: f64) -> f64 {
        profile_derivative(k, (x - self.center) / self.halfwidth) / self.halfwidth.powi(k as i32)
    }
}

impl TestFunction for TestFn1D {
    fn value(&self, x: f64) -> Complex64 {
        self.derivative(0, x)
    }

    fn derivative(&self, k: usize, x: f64) -> Complex64 {
        let v = match self.kind {
            TestKind::Mollifier => self.profile(k, x),
            TestKind::MollifierMonomial(p) => {
                // Leibniz over x^p
                let mut acc = 0.0;
                let mut binom = 1.0;
                for i in 0..=k.min(p) {
                    let falling = (0..i).fold(1.0, |a, t| a * (p - t) as f64);
                    acc += binom * falling * x.powi((p - i) as i32) * self.profile(k - i, x);
                    binom = binom * (k - i) as f64 / (i + 1) as f64;
                }
                acc
            }
        };
        Complex64::new(v, 0.0)
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.halfwidth, self.center + self.halfwidth)
    }

    fn taylor_radius(&self) -> f64 {
        0.02 * self.halfwidth.min((self.center.abs() - self.halfwidth).abs().max(0.0) + self.halfwidth)
    }
}

/// `x ↦ φ(-x)`.
pub struct Reflected<'a, F: TestFunction + ?Sized>(pub &'a F);

impl<F: TestFunction + ?Sized> TestFunction for Reflected<'_, F> {
    fn value(&self, x: f64) -> Complex64 {
        self.0.value(-x)
    }

    fn derivative(&self, k: usize, x: f64) -> Complex64 {
        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
        s * self.0.derivative(k, -x)
    }

    fn support(&self) -> (f64, f64) {
        let (a, b) = self.0.support();
        (-b, -a)
    }

    fn taylor_radius(&self) -> f64 {
        self.0.taylor_radius()
    }

    fn panel_length(&self) -> f64 {
        self.0.panel_length()
    }
}

/// `x ↦ window(x) e^{-2πiτx}`.
pub struct Windowed<'a, F: TestFunction + ?Sized> {
    pub window: &'a F,
    pub tau: f64,
}

impl<F: TestFunction + ?Sized> TestFunction for Windowed<'_, F> {
    fn value(&self, x: f64) -> Complex64 {
        self.window.value(x) * Complex64::from_polar(1.0, -2.0 * PI * self.tau * x)
    }

    fn derivative(&self, k: usize, x: f64) -> Complex64 {
        let w = Complex64::new(0.0, -2.0 * PI * self.tau);
        let e = Complex64::from_polar(1.0, -2.0 * PI * self.tau * x);
        let mut acc = c0();
        let mut binom = 1.0;
        for i in 0..=k {
            acc += binom * self.window.derivative(k - i, x) * w.powi(i as i32);
            binom = binom * (k - i) as f64 / (i + 1) as f64;
        }
        acc * e
    }

    fn support(&self) -> (f64, f64) {
        self.window.support()
    }

    fn taylor_radius(&self) -> f64 {
        let osc = if self.tau == 0.0 {
            f64::INFINITY
        } else {
            0.05 / (2.0 * PI * self.tau.abs())
        };
        self.window.taylor_radius().min(osc)
    }

    fn panel_length(&self) -> f64 {
        if self.tau == 0.0 {
            self.window.panel_length()
        } else {
            (0.5 / self.tau.abs()).min(self.window.panel_length())
        }
    }
}

/// Model distributions on the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelDist1D {
    XPlusPow {
        lambda: Complex64,
    },
    XMinusPow {
        lambda: Complex64,
    },
    I0Pow {
        lambda: Complex64,
        side: CutSide,
    },
    LogI0 {
        side: CutSide,
    },
    DeltaDeriv {
        k: usize,
    },
    Heaviside,
    ExpInv,
    /// Homogeneous `x^{-k}`; the principal value for `k = 1`.
    XPowPv {
        k: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMethod {
    Direct,
    Regularized,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub value: Complex64,
    pub err_est: f64,
    pub method: PairMethod,
}

fn residue_point(lambda: Complex64) -> bool {
    lambda.im == 0.0 && lambda.re <= -1.0 && lambda.re == lambda.re.round()
}

fn integrate<G: Fn(f64) -> Complex64>(g: &G, a: f64, b: f64, panel: f64) -> (Complex64, f64) {
    if b <= a {
        return (c0(), 0.0);
    }
    let pieces = if panel.is_finite() {
        ((b - a) / panel).ceil().max(1.0) as usize
    } else {
        1
    };
    let h = (b - a) / pieces as f64;
    let mut value = c0();
    let mut err = 0.0;
    for i in 0..pieces {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == pieces { b } else { a + (i + 1) as f64 * h };
        let r = adaptive(g, lo, hi, PAIR_ABS_TOL, PAIR_REL_TOL);
        value += r.value;
        err += r.err;
    }
    (value, err)
}

/// `x^λ` on `x > 0` via the principal logarithm.
fn xpow(x: f64, lambda: Complex64) -> Complex64 {
    (lambda * x.ln()).exp()
}

/// `⟨x_+^λ, φ⟩`.
fn pair_xplus<F: TestFunction + ?Sized>(lambda: Complex64, phi: &F) -> Result<PairingResult> {
    if residue_point(lambda) {
        return Err(CrownError::ResiduePoint(lambda.re));
    }
    let (lo, hi) = phi.support();
    if hi <= 0.0 {
        return Ok(PairingResult {
            value: c0(),
            err_est: 0.0,
            method: PairMethod::Exact,
        });
    }
    let panel = phi.panel_length();
    if lo > 0.0 {
        let (v, e) = integrate(&|x: f64| xpow(x, lambda) * phi.value(x), lo, hi, panel);
        return Ok(PairingResult {
            value: v,
            err_est: e,
            method: PairMethod::Direct,
        });
    }
    let m = if lambda.re > -1.0 { 0 } else { (-lambda.re).floor() as usize };
    let big_l = hi;
    let order = m + TAYLOR_EXTRA;
    if order > MAX_DERIVATIVE {
        return Err(CrownError::Unsupported(format!(
            "regularization needs derivatives beyond order {MAX_DERIVATIVE}"
        )));
    }
    let coeffs: Vec<Complex64> = (0..=order).map(|j| phi.derivative(j, 0.0) / factorial(j)).collect();
    let rt = phi.taylor_radius().min(big_l);
    let remainder = |x: f64| -> Complex64 {
        if x < rt {
            let mut acc = c0();
            let mut xp = x.powi(m as i32);
            for c in &coeffs[m..] {
                acc += c * xp;
                xp *= x;
            }
            acc
        } else {
            let mut t = c0();
            let mut xp = 1.0;
            for c in &coeffs[..m] {
                t += c * xp;
                xp *= x;
            }
            phi.value(x) - t
        }
    };
    let g = |x: f64| if x == 0.0 { c0() } else { xpow(x, lambda) * remainder(x) };
    let (v1, e1) = integrate(&g, 0.0, rt, panel);
    let (v2, e2) = integrate(&g, rt, big_l, panel);
    let mut value = v1 + v2;
    for (j, c) in coeffs[..m].iter().enumerate() {
        let s = lambda + (j as f64 + 1.0);
        value += c * xpow(big_l, s) / s;
    }
    let method = if m == 0 { PairMethod::Direct } else { PairMethod::Regularized };
    Ok(PairingResult {
        value,
        err_est: e1 + e2,
        method,
    })
}

/// Derivative orders subtracted in the homogeneous `x^{-k}` pairing.
pub fn pv_subtraction_orders(k: usize) -> Vec<usize> {
    (0..k.saturating_sub(1)).filter(|j| (k - j) % 2 == 0).collect()
}

/// `⟨x^{-k}, φ⟩`, homogeneous regularization.
fn pair_pv<F: TestFunction + ?Sized>(k: usize, phi: &F) -> Result<PairingResult> {
    if k == 0 {
        return Err(CrownError::InvalidParameter("x^{-k} needs k >= 1".into()));
    }
    let order = k + TAYLOR_EXTRA;
    if order > MAX_DERIVATIVE {
        return Err(CrownError::Unsupported(format!("x^-{k} needs derivatives beyond order {MAX_DERIVATIVE}")));
    }
    let (lo, hi) = phi.support();
    let big_l = hi.max(-lo).max(1e-300);
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let coeffs: Vec<Complex64> = (0..=order).map(|j| phi.derivative(j, 0.0) / factorial(j)).collect();
    let subtract = pv_subtraction_orders(k);
    let rt = phi.taylor_radius().min(big_l);
    let kf = k as i32;
    let g = |x: f64| -> Complex64 {
        if x == 0.0 {
            return c0();
        }
        let bracket = if x < rt {
            // 2 Σ_{j ≥ k, j ≡ k} c_j x^j
            let mut acc = c0();
            let mut j = k;
            while j <= order {
                acc += 2.0 * coeffs[j] * x.powi(j as i32);
                j += 2;
            }
            acc
        } else {
            let mut t = c0();
            for &j in &subtract {
                t += 2.0 * coeffs[j] * x.powi(j as i32);
            }
            phi.value(x) + sign * phi.value(-x) - t
        };
        bracket * x.powi(-kf)
    };
    let panel = phi.panel_length();
    let (v1, e1) = integrate(&g, 0.0, rt, panel);
    let (v2, e2) = integrate(&g, rt, big_l, panel);
    let mut value = v1 + v2;
    for &j in &subtract {
        let s = j as f64 - k as f64 + 1.0;
        value += 2.0 * coeffs[j] * big_l.powf(s) / s;
    }
    Ok(PairingResult {
        value,
        err_est: e1 + e2,
        method: PairMethod::Regularized,
    })
}

/// `⟨dist, φ⟩`.
pub fn pair<F: TestFunction + ?Sized>(dist: &ModelDist1D, phi: &F) -> Result<PairingResult> {
    let panel = phi.panel_length();
    match *dist {
        ModelDist1D::XPlusPow { lambda } => pair_xplus(lambda, phi),
        ModelDist1D::XMinusPow { lambda } => pair_xplus(lambda, &Reflected(phi)),
        ModelDist1D::XPowPv { k } => pair_pv(k, phi),
        ModelDist1D::I0Pow { lambda, side } => {
            let mut value = c0();
            let mut err = 0.0;
            let mut method = PairMethod::Direct;
            for (coef, d) in i0_decompose(lambda, side)? {
                let r = pair(&d, phi)?;
                value += coef * r.value;
                err += coef.norm() * r.err_est;
                if r.method == PairMethod::Regularized {
                    method = PairMethod::Regularized;
                }
            }
            Ok(PairingResult { value, err_est: err, method })
        }
        ModelDist1D::LogI0 { side } => Ok(PairingResult {
            value: log_i0_pair(side, phi),
            err_est: 0.0,
            method: PairMethod::Direct,
        })
        .map(|mut r| {
            r.err_est = 1e-12 * (1.0 + r.value.norm());
            r
        }),
        ModelDist1D::DeltaDeriv { k } => {
            if k > MAX_DERIVATIVE {
                return Err(CrownError::Unsupported(format!("delta derivative order {k}")));
            }
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            Ok(PairingResult {
                value: s * phi.derivative(k, 0.0),
                err_est: 0.0,
                method: PairMethod::Exact,
            })
        }
        ModelDist1D::Heaviside => {
            let (lo, hi) = phi.support();
            let (v, e) = integrate(&|x: f64| phi.value(x), lo.max(0.0), hi, panel);
            Ok(PairingResult {
                value: v,
                err_est: e,
                method: PairMethod::Direct,
            })
        }
        ModelDist1D::ExpInv => {
            let (lo, hi) = phi.support();
            let g = |x: f64| if x <= 0.0 { c0() } else { (-1.0 / x).exp() * phi.value(x) };
            let (v, e) = integrate(&g, lo.max(0.0), hi, panel);
            Ok(PairingResult {
                value: v,
                err_est: e,
                method: PairMethod::Direct,
            })
        }
    }
}

/// Splits `(x ± i0)^λ` into regularized pieces:
/// non-integer `λ` gives `x_+^λ + e^{±iπλ} x_-^λ`; `λ = -k` gives
/// `x^{-k} ∓ iπ (-1)^{k-1}/(k-1)! δ^{(k-1)}`; `λ = k ≥ 0` gives
/// `x_+^k + (-1)^k x_-^k`.
pub fn i0_decompose(lambda: Complex64, side: CutSide) -> Result<Vec<(Complex64, ModelDist1D)>> {
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(CrownError::InvalidParameter("non-finite exponent".into()));
    }
    let s = side.sign();
    if residue_point(lambda) {
        let k = (-lambda.re) as usize;
        if k > MAX_DERIVATIVE - TAYLOR_EXTRA {
            return Err(CrownError::Unsupported(format!("(x ± i0)^-{k}")));
        }
        let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let coef = Complex64::new(0.0, -s * PI * sign / factorial(k - 1));
        return Ok(vec![
            (Complex64::new(1.0, 0.0), ModelDist1D::XPowPv { k }),
            (coef, ModelDist1D::DeltaDeriv { k: k - 1 }),
        ]);
    }
    let phase = (Complex64::new(0.0, s * PI) * lambda).exp();
    Ok(vec![
        (Complex64::new(1.0, 0.0), ModelDist1D::XPlusPow { lambda }),
        (phase, ModelDist1D::XMinusPow { lambda }),
    ])
}

/// `∫ ln|x| φ + (±iπ) ∫_{x<0} φ`.
pub fn log_i0_pair<F: TestFunction + ?Sized>(side: CutSide, phi: &F) -> Complex64 {
    let (lo, hi) = phi.support();
    let panel = phi.panel_length();
    // u² substitution removes the logarithmic endpoint singularity
    let log_part = |a: f64, b: f64, reflect: bool| -> Complex64 {
        if b <= a {
            return c0();
        }
        let g = |u: f64| {
            if u == 0.0 {
                return c0();
            }
            let x = u * u;
            let xv = if reflect { -x } else { x };
            2.0 * u * x.ln() * phi.value(xv)
        };
        integrate(
            &g,
            a.sqrt(),
            b.sqrt(),
            if panel.is_finite() { panel.sqrt().min(panel * 4.0) } else { panel },
        )
        .0
    };
    let pos = log_part(lo.max(0.0), hi.max(0.0), false);
    let neg = log_part((-hi).max(0.0), (-lo).max(0.0), true);
    let mass_neg = integrate(&|x: f64| phi.value(x), lo, hi.min(0.0), panel).0;
    pos + neg + Complex64::new(0.0, side.sign() * PI) * mass_neg
}

/// Smooth families whose `ε → 0` limits define the boundary distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsFamily {
    /// `(x ± iε)^λ` with the principal branch.
    Pow(Complex64),
    /// `ln(x ± iε)`.
    Log,
}

/// `∫ f(x ± iε) φ(x) dx` for one `ε > 0`.
pub fn eps_pairing<F: TestFunction + ?Sized>(family: EpsFamily, side: CutSide, eps: f64, phi: &F) -> Complex64 {
    let (lo, hi) = phi.support();
    let s = side.sign();
    let f = move |x: f64| {
        let w = Complex64::new(x, s * eps);
        match family {
            EpsFamily::Pow(l) => (l * w.ln()).exp(),
            EpsFamily::Log => w.ln(),
        }
    };
    let g = |x: f64| f(x) * phi.value(x);
    let mut breaks = vec![lo];
    for b in [-100.0 * eps, -10.0 * eps, -eps, 0.0, eps, 10.0 * eps, 100.0 * eps] {
        if b > lo && b < hi {
            breaks.push(b);
        }
    }
    breaks.push(hi);
    let panel = phi.panel_length();
    let mut acc = c0();
    for w in breaks.windows(2) {
        acc += integrate(&g, w[0], w[1], panel).0;
    }
    acc
}

/// Richardson limit of [`eps_pairing`] along the project ε-grid.
pub fn eps_limit_pairing<F: TestFunction + ?Sized>(family: EpsFamily, side: CutSide, phi: &F) -> Extrapolation {
    let vals: Vec<Complex64> = EPS_GRID.iter().map(|&e| eps_pairing(family, side, e, phi)).collect();
    richardson(&EPS_GRID, &vals, EPS_ORDER)
}

/// Pointwise value of a distribution that is a function near `x ≠ 0`.
pub fn pointwise(dist: &ModelDist1D, x: f64) -> Option<Complex64> {
    if x == 0.0 {
        return None;
    }
    let one = Complex64::new(1.0, 0.0);
    match *dist {
        ModelDist1D::XPlusPow { lambda } => Some(if x > 0.0 { xpow(x, lambda) } else { c0() }),
        ModelDist1D::XMinusPow { lambda } => Some(if x < 0.0 { xpow(-x, lambda) } else { c0() }),
        ModelDist1D::I0Pow { lambda, side } => Some(if x > 0.0 {
            xpow(x, lambda)
        } else {
            (Complex64::new(0.0, side.sign() * PI) * lambda).exp() * xpow(-x, lambda)
        }),
        ModelDist1D::LogI0 { side } => Some(if x > 0.0 {
            Complex64::new(x.ln(), 0.0)
        } else {
            Complex64::new((-x).ln(), side.sign() * PI)
        }),
        ModelDist1D::DeltaDeriv { .. } => Some(c0()),
        ModelDist1D::Heaviside => Some(if x > 0.0 { one } else { c0() }),
        ModelDist1D::ExpInv => Some(if x > 0.0 { Complex64::new((-1.0 / x).exp(), 0.0) } else { c0() }),
        ModelDist1D::XPowPv { k } => Some(Complex64::new(x.powi(-(k as i32)), 0.0)),
    }
}

/// Fitted exponent at or below which decay counts as rapid.
pub const RAPID_EXPONENT: f64 = -6.0;
/// Magnitudes below this fraction of the window mass are numerical noise.
pub const NOISE_FLOOR: f64 = 1e-11;
/// Largest `|τ|` handled by the oscillatory quadrature.
pub const MAX_TAU: f64 = 512.0;

/// Windowed Fourier magnitudes for `τ > 0` (`plus`) and `τ < 0` (`minus`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub tau: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub exponent_plus: f64,
    pub exponent_minus: f64,
    pub rapid_plus: bool,
    pub rapid_minus: bool,
}

impl DecayTable {
    /// CSV rows `tau,abs_ft_plus,abs_ft_minus` with a header.
    pub fn csv_rows(&self) -> Vec<[String; 3]> {
        let mut rows = vec![["tau".to_string(), "abs_ft_plus".to_string(), "abs_ft_minus".to_string()]];
        for i in 0..self.tau.len() {
            rows.push([format!("{}", self.tau[i]), format!("{:e}", self.plus[i]), format!("{:e}", self.minus[i])]);
        }
        rows
    }
}

/// `τ = 2^{j/4}` for `j = 0..=36` (`1 … 512`).
pub fn default_tau_grid() -> Vec<f64> {
    (0..=36).map(|j| 2f64.powf(j as f64 / 4.0)).collect()
}

/// Least-squares slope of `ln|F|` against `ln τ` over `[τ_max/2, τ_max]`,
/// plus the rapid-decay verdict. Magnitudes at or below `floor` count as
/// numerical zero: they are left out of the verdict fit, and fewer than two
/// points above the floor means rapid decay.
pub fn fit_decay(tau: &[f64], mag: &[f64], floor: f64) -> (f64, bool) {
    let tmax = tau.iter().cloned().fold(0.0, f64::max);
    let top: Vec<(f64, f64)> = tau
        .iter()
        .zip(mag)
        .filter(|(t, _)| **t >= 0.5 * tmax - 1e-12)
        .map(|(t, m)| (*t, *m))
        .collect();
    let slope = log_slope(&top);
    let above: Vec<(f64, f64)> = top.iter().copied().filter(|(_, m)| *m > floor).collect();
    if above.len() < 2 {
        return (slope, true);
    }
    let fitted = log_slope(&above);
    (slope, fitted <= RAPID_EXPONENT)
}

fn log_slope(pts: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = pts.iter().map(|(t, m)| (t.ln(), m.max(1e-300).ln())).collect();
    let nf = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / nf, sy / nf);
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// `|⟨dist, window · e^{-2πiτx}⟩|` on `±τ` and fitted decay per sign.
pub fn windowed_fourier<F: TestFunction + ?Sized>(dist: &ModelDist1D, window: &F, taus: &[f64]) -> Result<DecayTable> {
    windowed_fourier_with(|tau| pair(dist, &Windowed { window, tau }).map(|r| r.value), window, taus)
}

/// [`windowed_fourier`] for a sampled function given as `f(x - c)` about
/// the window center `c`, integrated directly. An integrable singularity
/// at the center is allowed.
pub fn windowed_fourier_fn<F: TestFunction + ?Sized, G: Fn(f64) -> Complex64>(f: G, window: &F, taus: &[f64]) -> Result<DecayTable> {
    let (lo, hi) = window.support();
    let mid = 0.5 * (lo + hi);
    windowed_fourier_with(
        |tau| {
            let w = Windowed { window, tau };
            let r = (0.5 * (hi - lo)).sqrt();
            let panel = w.panel_length() / (2.0 * r);
            let right = |u: f64| f(u * u) * w.value(mid + u * u) * (2.0 * u);
            let left = |u: f64| f(-u * u) * w.value(mid - u * u) * (2.0 * u);
            Ok(integrate(&right, 0.0, r, panel).0 + integrate(&left, 0.0, r, panel).0)
        },
        window,
        taus,
    )
}

fn windowed_fourier_with<F: TestFunction + ?Sized, P: Fn(f64) -> Result<Complex64>>(ft: P, window: &F, taus: &[f64]) -> Result<DecayTable> {
    if taus.iter().any(|t| !(*t > 0.0 && *t <= MAX_TAU)) {
        return Err(CrownError::InvalidParameter(format!("tau grid must lie in (0, {MAX_TAU}]")));
    }
    let mut plus = Vec::with_capacity(taus.len());
    let mut minus = Vec::with_capacity(taus.len());
    for &t in taus {
        plus.push(ft(t)?.norm());
        minus.push(ft(-t)?.norm());
    }
    let (lo, hi) = window.support();
    let mass = integrate(&|x: f64| Complex64::new(window.value(x).norm(), 0.0), lo, hi, f64::INFINITY)
        .0
        .re;
    let floor = NOISE_FLOOR * mass.max(1e-300);
    let (ep, rp) = fit_decay(taus, &plus, floor);
    let (em, rm) = fit_decay(taus, &minus, floor);
    Ok(DecayTable {
        tau: taus.to_vec(),
        plus,
        minus,
        exponent_plus: ep,
        exponent_minus: em,
        rapid_plus: rp,
        rapid_minus: rm,
    })
}

/// `ln max_{0 < x ≤ ε} |D^N e^{-1/x}|`, using `D^N e^{-1/x} = P_N(1/x) e^{-1/x}`
/// with `P_{N+1}(u) = u² (P_N(u) - P_N'(u))`.
pub fn exp_inv_log_max_derivative(order: usize, eps: f64) -> f64 {
    let mut p = vec![1.0f64];
    for _ in 0..order {
        let mut next = vec![0.0; p.len() + 2];
        for (i, c) in p.iter().enumerate() {
            next[i + 2] += c;
        }
        for i in 1..p.len() {
            next[i + 1] -= i as f64 * p[i];
        }
        p = next;
    }
    let u_min = 1.0 / eps;
    let u_max = u_min.max(20.0 * (order as f64 + 1.0));
    let samples = 4000;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=samples {
        let u = u_min * (u_max / u_min).powf(i as f64 / samples as f64);
        let val = p.iter().rev().fold(0.0, |acc, c| acc * u + c);
        if val != 0.0 {
            best = best.max(val.abs().ln() - u);
        }
    }
    best
}

/// Whether `max |D^N e^{-1/x}|` over `(0, ε]` exceeds `C^{N+1} N^N`.
pub fn exp_inv_growth_exceeds(order: usize, eps: f64, c: f64) -> bool {
    let nf = order as f64;
    exp_inv_log_max_derivative(order, eps) > (nf + 1.0) * c.ln() + nf * nf.ln()
}
