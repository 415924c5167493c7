//! Gauss hypergeometric function `₂F₁(a, b; c; z)` on `ℂ ∖ [1, ∞)` together
//! with side-resolved boundary values on the cut.
//!
//! Region strategy for [`gauss_2f1`]:
//!
//! | region                              | method                        |
//! |-------------------------------------|-------------------------------|
//! | `a` or `b` a non-positive integer   | terminating series            |
//! | `|z| ≤ 1/2`                         | Maclaurin series              |
//! | `|1 - z| < 3/4`                     | `1 - z` connection            |
//! | `Re z < 1/2`                        | Pfaff, `z ↦ z/(z-1)`          |
//! | `|z| ≥ 4/3`, `a - b ∉ ℤ`            | `1/z` connection              |
//! | otherwise                           | Taylor continuation of the ODE|
//!
//! The `1 - z` connection switches to the logarithmic form whenever
//! `c - a - b` is an integer. Every branch of `(1 - z)^μ`, `ln(1 - z)` and
//! `(-z)^{-a}` is routed through an explicit logarithm, which is how the cut
//! values `x ± i0` are produced.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{CrownError, Result};
use crate::lorentz::ModelDims;
use crate::special::{digamma, gamma, pochhammer, rgamma};

/// Maximum number of terms of any series before giving up.
pub const MAX_TERMS: usize = 10_000;
/// Distance from `[1, ∞)` below which an unsided evaluation is refused.
pub const CUT_GUARD: f64 = 1e-13;
/// Boundary values need `x > 1 + BOUNDARY_MIN_GAP`.
pub const BOUNDARY_MIN_GAP: f64 = 1e-10;

const SERIES_RADIUS: f64 = 0.5;
const CONNECTION_RADIUS: f64 = 0.75;
const RECIPROCAL_RADIUS: f64 = 4.0 / 3.0;
const INTEGER_TOL: f64 = 1e-9;
const RECIPROCAL_DEGENERACY_GAP: f64 = 0.05;

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn c1() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Spectral parameter `λ ∈ i[0, ∞) ∪ [0, ρ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParam {
    lambda: Complex64,
}

impl SpectralParam {
    pub fn new(lambda: Complex64, dims: ModelDims) -> Result<Self> {
        let imaginary = lambda.re == 0.0 && lambda.im >= 0.0;
        let real = lambda.im == 0.0 && lambda.re >= 0.0 && lambda.re < dims.rho();
        if imaginary || real {
            Ok(Self { lambda })
        } else {
            Err(CrownError::InadmissibleLambda(format!(
                "{}{:+}i (rho = {})",
                lambda.re,
                lambda.im,
                dims.rho()
            )))
        }
    }

    /// Skips the admissibility check (degenerate test cases such as `λ = ρ`).
    pub fn unchecked(lambda: Complex64) -> Self {
        Self { lambda }
    }

    pub fn value(&self) -> Complex64 {
        self.lambda
    }
}

/// Parses `"a+bi"`, `"0.3i"`, `"-1.5"`, `"2-0.5i"`.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || CrownError::InvalidParameter(format!("cannot parse complex number '{text}'"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some(body) = s.strip_suffix('i') {
        // find the split between real and imaginary parts
        let bytes = body.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            let ch = bytes[k] as char;
            if (ch == '+' || ch == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
                split = Some(k);
                break;
            }
        }
        let parse_im = |t: &str| -> Result<f64> {
            match t {
                "" | "+" => Ok(1.0),
                "-" => Ok(-1.0),
                _ => t.parse::<f64>().map_err(|_| bad()),
            }
        };
        match split {
            Some(k) => {
                let re = body[..k].parse::<f64>().map_err(|_| bad())?;
                Ok(Complex64::new(re, parse_im(&body[k..])?))
            }
            None => Ok(Complex64::new(0.0, parse_im(body)?)),
        }
    } else {
        s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad())
    }
}

/// Hypergeometric parameters `(a, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypTriple {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl HypTriple {
    pub fn new(a: Complex64, b: Complex64, c: Complex64) -> Self {
        Self { a, b, c }
    }

    /// `(ρ + λ, ρ - λ, n/2)`.
    pub fn family(dims: ModelDims, lambda: SpectralParam) -> Self {
        let rho = Complex64::new(dims.rho(), 0.0);
        let l = lambda.value();
        Self {
            a: rho + l,
            b: rho - l,
            c: Complex64::new(dims.n() as f64 / 2.0, 0.0),
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            a: self.b,
            b: self.a,
            c: self.c,
        }
    }

    /// `(a + k, b + k, c + k)`.
    pub fn shifted(&self, k: f64) -> Self {
        Self {
            a: self.a + k,
            b: self.b + k,
            c: self.c + k,
        }
    }
}

/// Which side of the cut `[1, ∞)` a boundary value is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CutSide {
    /// `x + i0`
    Plus,
    /// `x - i0`
    Minus,
}

impl CutSide {
    /// `+1` for [`CutSide::Plus`], `-1` for [`CutSide::Minus`].
    pub fn sign(self) -> f64 {
        match self {
            CutSide::Plus => 1.0,
            CutSide::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            CutSide::Plus => CutSide::Minus,
            CutSide::Minus => CutSide::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Series,
    Pfaff,
    ConnectionNoninteger,
    ConnectionLogseries,
    Reciprocal,
    TaylorContinuation,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Series => "series",
            Method::Pfaff => "pfaff",
            Method::ConnectionNoninteger => "connection_noninteger",
            Method::ConnectionLogseries => "connection_logseries",
            Method::Reciprocal => "reciprocal",
            Method::TaylorContinuation => "taylor_continuation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: Complex64,
    pub method: Method,
    pub err_est: f64,
}

/// Forces a particular evaluation route (cross-checks and diagnostics).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Auto,
    Series,
    Pfaff,
    Connection,
    Reciprocal,
    Taylor,
}

fn nonpositive_integer(z: Complex64) -> Option<usize> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        Some((-z.re) as usize)
    } else {
        None
    }
}

fn near_integer(z: Complex64, tol: f64) -> Option<i64> {
    let r = z.re.round();
    if z.im.abs() <= tol && (z.re - r).abs() <= tol {
        Some(r as i64)
    } else {
        None
    }
}

fn check_c(p: &HypTriple) -> Result<()> {
    if nonpositive_integer(p.c).is_some() {
        return Err(CrownError::InvalidParameter(format!("c = {} is a non-positive integer", p.c.re)));
    }
    Ok(())
}

/// Plain Maclaurin series; returns value and last-term error estimate.
pub fn series(p: &HypTriple, z: Complex64) -> Result<(Complex64, f64)> {
    check_c(p)?;
    if z.norm() >= 1.0 {
        return Err(CrownError::OutOfDisk);
    }
    let mut term = c1();
    let mut sum = c1();
    let mut biggest = 1.0f64;
    let mut small = 0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (p.a + kf) * (p.b + kf) / ((p.c + kf) * (kf + 1.0)) * z;
        sum += term;
        biggest = biggest.max(term.norm());
        if term.norm() <= 1e-17 * sum.norm() || term == c0() {
            small += 1;
            if small >= 3 || term == c0() {
                return Ok((sum, term.norm() + 1e-16 * biggest));
            }
        } else {
            small = 0;
        }
    }
    Err(CrownError::NonConvergent {
        what: "hypergeometric series",
        terms: MAX_TERMS,
    })
}

fn polynomial(p: &HypTriple, z: Complex64, degree: usize) -> Result<(Complex64, f64)> {
    check_c(p)?;
    let mut term = c1();
    let mut sum = c1();
    let mut scale = 1.0f64;
    for k in 0..degree {
        let kf = k as f64;
        term *= (p.a + kf) * (p.b + kf) / ((p.c + kf) * (kf + 1.0)) * z;
        sum += term;
        scale = scale.max(term.norm());
    }
    Ok((sum, 1e-16 * scale * (degree as f64 + 1.0)))
}

/// `1 - z` connection with an explicit branch of `ln(1 - z)`.
fn connection(p: &HypTriple, w: Complex64, ln_w: Complex64) -> Result<(Complex64, f64, Method)> {
    let m = p.c - p.a - p.b;
    if let Some(mi) = near_integer(m, INTEGER_TOL) {
        if mi >= 0 {
            let (v, e) = connection_log(p, mi as usize, w, ln_w)?;
            Ok((v, e, Method::ConnectionLogseries))
        } else {
            // Euler: F(a,b;c;z) = (1-z)^{c-a-b} F(c-a, c-b; c; z), integer power.
            let q = HypTriple::new(p.c - p.a, p.c - p.b, p.c);
            let (v, e) = connection_log(&q, (-mi) as usize, w, ln_w)?;
            let pow = w.powi(mi as i32);
            Ok((v * pow, e * pow.norm(), Method::ConnectionLogseries))
        }
    } else {
        let g = gamma(p.c)?;
        let t1c = g * gamma(m)? * rgamma(p.c - p.a) * rgamma(p.c - p.b);
        let t2c = g * gamma(-m)? * rgamma(p.a) * rgamma(p.b);
        let mut value = c0();
        let mut err = 0.0;
        if t1c != c0() {
            let (f1, e1) = series(&HypTriple::new(p.a, p.b, 1.0 - m), w)?;
            value += t1c * f1;
            err += t1c.norm() * e1;
        }
        if t2c != c0() {
            let (f2, e2) = series(&HypTriple::new(p.c - p.a, p.c - p.b, 1.0 + m), w)?;
            let pow = (m * ln_w).exp();
            value += t2c * pow * f2;
            err += (t2c * pow).norm() * e2;
        }
        Ok((value, err, Method::ConnectionNoninteger))
    }
}

/// Degenerate connection for `c = a + b + m`, `m = 0, 1, 2, …`.
///
/// ```text
/// F(a,b;a+b+m;z) = Γ(c)/(Γ(a+m)Γ(b+m)) Σ_{k<m} (a)_k (b)_k (m-k-1)!/k! (z-1)^k
///   - Γ(c) (z-1)^m/(Γ(a)Γ(b)) Σ_k (a+m)_k (b+m)_k/(k!(k+m)!) (1-z)^k
///       · [ln(1-z) - ψ(k+1) - ψ(k+m+1) + ψ(a+k+m) + ψ(b+k+m)]
/// ```
fn connection_log(p: &HypTriple, m: usize, w: Complex64, ln_w: Complex64) -> Result<(Complex64, f64)> {
    let (a, b, c) = (p.a, p.b, p.c);
    if let Some(d) = nonpositive_integer(a).or_else(|| nonpositive_integer(b)) {
        return polynomial(p, 1.0 - w, d);
    }
    let gc = gamma(c)?;
    let zm1 = -w;
    let mut finite = c0();
    if m > 0 {
        let pref = gc * rgamma(a + m as f64) * rgamma(b + m as f64);
        let mut fact_mk1 = crate::special::factorial(m - 1);
        let mut poch = c1();
        let mut zpow = c1();
        let mut kfact = 1.0;
        for k in 0..m {
            finite += poch * fact_mk1 / kfact * zpow;
            let kf = k as f64;
            poch *= (a + kf) * (b + kf);
            kfact *= kf + 1.0;
            zpow *= zm1;
            if k + 1 < m {
                fact_mk1 /= (m - k - 1) as f64;
            }
        }
        finite *= pref;
    }
    let pref = gc * zm1.powi(m as i32) * rgamma(a) * rgamma(b);
    if pref == c0() {
        return Ok((finite, 1e-16 * finite.norm()));
    }
    let mf = m as f64;
    let mut psi_k1 = digamma(c1())?;
    let mut psi_km1 = digamma(Complex64::new(mf + 1.0, 0.0))?;
    let mut psi_a = digamma(a + mf)?;
    let mut psi_b = digamma(b + mf)?;
    let mut coef = Complex64::new(1.0 / crate::special::factorial(m), 0.0);
    let mut wpow = c1();
    let mut sum = c0();
    let mut biggest = 0.0f64;
    let mut small = 0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let bracket = ln_w - psi_k1 - psi_km1 + psi_a + psi_b;
        let term = coef * wpow * bracket;
        sum += term;
        biggest = biggest.max(term.norm());
        if term.norm() <= 1e-17 * sum.norm() {
            small += 1;
            if small >= 3 {
                let value = finite - pref * sum;
                return Ok((value, pref.norm() * (term.norm() + 1e-16 * biggest) + 1e-16 * value.norm()));
            }
        } else {
            small = 0;
        }
        coef *= (a + mf + kf) * (b + mf + kf) / ((kf + 1.0) * (kf + mf + 1.0));
        wpow *= w;
        psi_k1 += 1.0 / (kf + 1.0);
        psi_km1 += 1.0 / (kf + mf + 1.0);
        psi_a += 1.0 / (a + mf + kf);
        psi_b += 1.0 / (b + mf + kf);
    }
    Err(CrownError::NonConvergent {
        what: "logarithmic connection series",
        terms: MAX_TERMS,
    })
}

/// `1/z` connection with an explicit branch of `ln(-z)`; needs `a - b ∉ ℤ`.
fn reciprocal(p: &HypTriple, z: Complex64, ln_mz: Complex64) -> Result<(Complex64, f64)> {
    let (a, b, c) = (p.a, p.b, p.c);
    let g = gamma(c)?;
    let inv = 1.0 / z;
    let mut value = c0();
    let mut err = 0.0;
    let c_a = g * gamma(b - a)? * rgamma(b) * rgamma(c - a);
    if c_a != c0() {
        let (f, e) = series(&HypTriple::new(a, a - c + 1.0, a - b + 1.0), inv)?;
        let pow = (-a * ln_mz).exp();
        value += c_a * pow * f;
        err += (c_a * pow).norm() * e;
    }
    let c_b = g * gamma(a - b)? * rgamma(a) * rgamma(c - b);
    if c_b != c0() {
        let (f, e) = series(&HypTriple::new(b, b - c + 1.0, b - a + 1.0), inv)?;
        let pow = (-b * ln_mz).exp();
        value += c_b * pow * f;
        err += (c_b * pow).norm() * e;
    }
    Ok((value, err))
}

/// Value inside the unit disk without using Pfaff (avoids ping-pong).
fn disk_eval(p: &HypTriple, w: Complex64) -> Result<(Complex64, f64, Method)> {
    if w.norm() <= SERIES_RADIUS {
        let (v, e) = series(p, w)?;
        return Ok((v, e, Method::Series));
    }
    let one_minus = 1.0 - w;
    if one_minus.norm() < CONNECTION_RADIUS {
        return connection(p, one_minus, one_minus.ln());
    }
    if w.norm() <= CONNECTION_RADIUS {
        let (v, e) = series(p, w)?;
        return Ok((v, e, Method::Series));
    }
    let (v, e) = taylor_continuation(p, &plan_path(w, None))?;
    Ok((v, e, Method::TaylorContinuation))
}

fn pfaff(p: &HypTriple, z: Complex64) -> Result<(Complex64, f64)> {
    let w = z / (z - 1.0);
    let q = HypTriple::new(p.a, p.c - p.b, p.c);
    let (v, e, _) = disk_eval(&q, w)?;
    let pow = (-p.a * (1.0 - z).ln()).exp();
    Ok((pow * v, pow.norm() * e))
}

fn reciprocal_ok(p: &HypTriple) -> bool {
    let d = p.a - p.b;
    let gap = ((d.re - d.re.round()).powi(2) + d.im.powi(2)).sqrt();
    gap > RECIPROCAL_DEGENERACY_GAP
}

/// Waypoints for analytic continuation from the series disk to `target`.
/// `side` forces the half plane used when `target` sits on or near the cut.
fn plan_path(target: Complex64, side: Option<CutSide>) -> Vec<Complex64> {
    let near_cut = target.re > 1.0 && target.im.abs() < 0.5;
    if near_cut || side.is_some() {
        let s = match side {
            Some(sd) => sd.sign(),
            None => {
                if target.im >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        let start = 0.5 * Complex64::from_polar(1.0, s * PI / 4.0);
        let mid = Complex64::new(target.re.max(1.5), 0.5 * s);
        vec![start, mid, target]
    } else {
        let theta = target.arg();
        vec![0.5 * Complex64::from_polar(1.0, theta), target]
    }
}

/// Taylor continuation of the hypergeometric ODE along `path`. The first
/// waypoint must lie inside the series disk.
fn taylor_continuation(p: &HypTriple, path: &[Complex64]) -> Result<(Complex64, f64)> {
    check_c(p)?;
    let scale = taylor_scale(p);
    let mut start = path[0];
    if scale < 1.0 {
        start *= scale;
    }
    let (mut y, mut err) = series(p, start)?;
    let (d, de) = series(&p.shifted(1.0), start)?;
    let fac = p.a * p.b / p.c;
    let mut dy = fac * d;
    err += fac.norm() * de;
    let mut here = start;
    for &target in &path[1..] {
        let mut guard = 0;
        while (target - here).norm() > 0.0 {
            guard += 1;
            if guard > 2_000 {
                return Err(CrownError::NonConvergent {
                    what: "Taylor continuation",
                    terms: guard,
                });
            }
            let radius = here.norm().min((here - 1.0).norm()) * scale.min(1.0);
            let dist = (target - here).norm();
            let next = if dist <= 0.5 * radius {
                target
            } else {
                here + (target - here) * (0.5 * radius / dist)
            };
            let (ny, ndy, e) = taylor_step(p, here, y, dy, next - here)?;
            y = ny;
            dy = ndy;
            err += e;
            here = next;
        }
    }
    Ok((y, err + 1e-15 * y.norm()))
}

/// Shrink factor for Taylor steps when `|ab|` is large; local series with
/// large parameters otherwise lose digits to cancellation.
fn taylor_scale(p: &HypTriple) -> f64 {
    let big = (p.a * p.b).norm().max((p.a + p.b).norm().powi(2) / 4.0);
    (4.0 / big.sqrt()).min(1.0)
}

fn taylor_step(p: &HypTriple, z0: Complex64, y0: Complex64, y1: Complex64, h: Complex64) -> Result<(Complex64, Complex64, f64)> {
    let ab = p.a * p.b;
    let p0 = z0 * (1.0 - z0);
    let p1 = 1.0 - 2.0 * z0;
    let q0 = p.c - (p.a + p.b + 1.0) * z0;
    let q1 = -(p.a + p.b + 1.0);
    let (mut ykm1, mut yk) = (y0, y1);
    let mut hp = h;
    let mut val = y0 + y1 * h;
    let mut der = y1;
    let mut small = 0;
    let mut biggest = val.norm().max((y1 * h).norm());
    for k in 0..600usize {
        let kf = k as f64;
        let next = -((p1 * (kf * (kf + 1.0)) + q0 * (kf + 1.0)) * yk + (-(kf * (kf - 1.0)) + q1 * kf - ab) * ykm1) / (p0 * ((kf + 1.0) * (kf + 2.0)));
        let order = kf + 2.0;
        let dterm = next * hp * order;
        hp *= h;
        let term = next * hp;
        val += term;
        der += dterm;
        ykm1 = yk;
        yk = next;
        biggest = biggest.max(term.norm());
        if term.norm() <= 1e-17 * val.norm() && dterm.norm() <= 1e-17 * der.norm() {
            small += 1;
            if small >= 4 && k > 6 {
                return Ok((val, der, term.norm() + 1e-16 * biggest));
            }
        } else {
            small = 0;
        }
    }
    Err(CrownError::NonConvergent {
        what: "Taylor step",
        terms: 600,
    })
}

fn on_cut(z: Complex64) -> bool {
    z.re >= 1.0 && z.im.abs() <= CUT_GUARD * z.norm().max(1.0)
}

/// `₂F₁(a, b; c; z)` for `z ∉ [1, ∞)`.
pub fn gauss_2f1(p: &HypTriple, z: Complex64) -> Result<EvalResult> {
    eval_with(p, z, Route::Auto)
}

/// [`gauss_2f1`] with an optional forced route.
pub fn eval_with(p: &HypTriple, z: Complex64, route: Route) -> Result<EvalResult> {
    check_c(p)?;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(CrownError::InvalidParameter("non-finite argument".into()));
    }
    if let Some(d) = nonpositive_integer(p.a).or_else(|| nonpositive_integer(p.b)) {
        let (v, e) = polynomial(p, z, d)?;
        return Ok(EvalResult {
            value: v,
            method: Method::Series,
            err_est: e,
        });
    }
    if on_cut(z) {
        return Err(CrownError::OnCut { re: z.re, im: z.im });
    }
    let pack = |(v, e): (Complex64, f64), m| {
        Ok(EvalResult {
            value: v,
            method: m,
            err_est: e,
        })
    };
    match route {
        Route::Series => return pack(series(p, z)?, Method::Series),
        Route::Pfaff => return pack(pfaff(p, z)?, Method::Pfaff),
        Route::Connection => {
            let w = 1.0 - z;
            let (v, e, m) = connection(p, w, w.ln())?;
            return pack((v, e), m);
        }
        Route::Reciprocal => return pack(reciprocal(p, z, (-z).ln())?, Method::Reciprocal),
        Route::Taylor => return pack(taylor_continuation(p, &plan_path(z, None))?, Method::TaylorContinuation),
        Route::Auto => {}
    }
    let first = auto_route(p, z)?;
    if first.method == Method::TaylorContinuation || first.err_est <= CANCELLATION_TOL * first.value.norm() {
        return Ok(first);
    }
    let (v, e) = taylor_continuation(p, &plan_path(z, None))?;
    if e < first.err_est {
        Ok(EvalResult {
            value: v,
            method: Method::TaylorContinuation,
            err_est: e,
        })
    } else {
        Ok(first)
    }
}

/// Relative error estimate above which the Taylor route is tried as well.
const CANCELLATION_TOL: f64 = 1e-13;

fn auto_route(p: &HypTriple, z: Complex64) -> Result<EvalResult> {
    let pack = |(v, e): (Complex64, f64), m| {
        Ok(EvalResult {
            value: v,
            method: m,
            err_est: e,
        })
    };
    if z.norm() <= SERIES_RADIUS {
        return pack(series(p, z)?, Method::Series);
    }
    let w = 1.0 - z;
    if w.norm() < CONNECTION_RADIUS {
        let (v, e, m) = connection(p, w, w.ln())?;
        return pack((v, e), m);
    }
    if z.re < 0.5 {
        return pack(pfaff(p, z)?, Method::Pfaff);
    }
    if z.norm() >= RECIPROCAL_RADIUS && reciprocal_ok(p) {
        return pack(reciprocal(p, z, (-z).ln())?, Method::Reciprocal);
    }
    pack(taylor_continuation(p, &plan_path(z, None))?, Method::TaylorContinuation)
}

/// `₂F₁(x ± i0)` for `x > 1 + 1e-10`.
pub fn boundary_2f1(p: &HypTriple, x: f64, side: CutSide) -> Result<Complex64> {
    if x <= 1.0 + BOUNDARY_MIN_GAP {
        return Err(CrownError::TooCloseToOne(x));
    }
    boundary_unchecked(p, x, side).map(|r| r.value)
}

/// Boundary value without the distance-to-one precondition; any `x > 1`.
pub fn boundary_unchecked(p: &HypTriple, x: f64, side: CutSide) -> Result<EvalResult> {
    boundary_with_gap(p, x, x - 1.0, side)
}

/// `₂F₁(1 - y)` for real `y ≠ 0` given to full relative precision, on the
/// side `side` of the cut when `y < 0`.
pub fn eval_one_minus(p: &HypTriple, y: f64, side: CutSide) -> Result<EvalResult> {
    if y < 0.0 {
        return boundary_with_gap(p, 1.0 - y, -y, side);
    }
    if y == 0.0 || !y.is_finite() {
        return Err(CrownError::InvalidParameter(format!("eval_one_minus needs a finite y != 0, got {y}")));
    }
    check_c(p)?;
    let z = 1.0 - y;
    let polynomial_case = nonpositive_integer(p.a).or_else(|| nonpositive_integer(p.b)).is_some();
    if polynomial_case || z <= SERIES_RADIUS || y >= CONNECTION_RADIUS {
        return gauss_2f1(p, Complex64::new(z, 0.0));
    }
    let w = Complex64::new(y, 0.0);
    let (v, e, m) = connection(p, w, Complex64::new(y.ln(), 0.0))?;
    Ok(EvalResult {
        value: v,
        method: m,
        err_est: e,
    })
}

fn boundary_with_gap(p: &HypTriple, x: f64, gap: f64, side: CutSide) -> Result<EvalResult> {
    check_c(p)?;
    if !(gap > 0.0) {
        return Err(CrownError::InvalidParameter(format!("boundary value needs x > 1, got {x}")));
    }
    let z = Complex64::new(x, 0.0);
    if let Some(d) = nonpositive_integer(p.a).or_else(|| nonpositive_integer(p.b)) {
        let (v, e) = polynomial(p, z, d)?;
        return Ok(EvalResult {
            value: v,
            method: Method::Series,
            err_est: e,
        });
    }
    // x + i0 puts 1 - z just below the negative axis; x - i0 just above.
    let s = side.sign();
    let first = if x < 2.0 {
        let w = Complex64::new(-gap, 0.0);
        let ln_w = Complex64::new(gap.ln(), -s * PI);
        let (v, e, m) = connection(p, w, ln_w)?;
        EvalResult {
            value: v,
            method: m,
            err_est: e,
        }
    } else if reciprocal_ok(p) {
        let ln_mz = Complex64::new(x.ln(), -s * PI);
        let (v, e) = reciprocal(p, z, ln_mz)?;
        EvalResult {
            value: v,
            method: Method::Reciprocal,
            err_est: e,
        }
    } else {
        let (v, e) = taylor_continuation(p, &plan_path(z, Some(side)))?;
        return Ok(EvalResult {
            value: v,
            method: Method::TaylorContinuation,
            err_est: e,
        });
    };
    if first.err_est <= CANCELLATION_TOL * first.value.norm() {
        return Ok(first);
    }
    let (v, e) = taylor_continuation(p, &plan_path(z, Some(side)))?;
    if e < first.err_est {
        Ok(EvalResult {
            value: v,
            method: Method::TaylorContinuation,
            err_est: e,
        })
    } else {
        Ok(first)
    }
}

/// Boundary value obtained purely by continuation of the ODE along a path in
/// the chosen half plane (independent cross-check route).
pub fn boundary_by_continuation(p: &HypTriple, x: f64, side: CutSide) -> Result<Complex64> {
    taylor_continuation(p, &plan_path(Complex64::new(x, 0.0), Some(side))).map(|r| r.0)
}

/// `₂F₁(x - i0) - ₂F₁(x + i0)`.
pub fn jump_across_cut(p: &HypTriple, x: f64) -> Result<Complex64> {
    Ok(boundary_2f1(p, x, CutSide::Minus)? - boundary_2f1(p, x, CutSide::Plus)?)
}

/// Closed form of the jump for the kernel family, `x > 1`.
///
/// Odd `n`:
/// ```text
/// 2i sin(π(2-n)/2) (x-1)^{(2-n)/2} Γ(n/2)Γ((n-2)/2)/(Γ(ρ+λ)Γ(ρ-λ))
///     · ₂F₁(1/2-λ, 1/2+λ; (4-n)/2; 1-x)
/// ```
/// Even `n`, `m = (n-2)/2`:
/// ```text
/// -(-1)^m 2πi Γ(n/2)/(Γ(1/2+λ)Γ(1/2-λ))
///     · Σ_k (ρ+λ)_k (ρ-λ)_k/(k!(m+k)!) (1-x)^k
/// ```
pub fn family_jump_closed_form(dims: ModelDims, lambda: SpectralParam, x: f64) -> Result<Complex64> {
    if !(x > 1.0 && x.is_finite()) {
        return Err(CrownError::InvalidParameter(format!("closed-form jump needs x > 1, got {x}")));
    }
    family_jump_at_gap(dims, lambda, x - 1.0)
}

/// [`family_jump_closed_form`] at `x = 1 + gap`, with `gap > 0` given to
/// full relative precision.
pub fn family_jump_at_gap(dims: ModelDims, lambda: SpectralParam, gap: f64) -> Result<Complex64> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(CrownError::InvalidParameter(format!("closed-form jump needs a positive gap, got {gap}")));
    }
    let n = dims.n();
    let nf = n as f64;
    let l = lambda.value();
    let rho = dims.rho();
    let i = Complex64::new(0.0, 1.0);
    if n % 2 == 1 {
        let mu = (2.0 - nf) / 2.0;
        let constant = gamma(Complex64::new(nf / 2.0, 0.0))? * gamma(Complex64::new((nf - 2.0) / 2.0, 0.0))? * rgamma(rho + l) * rgamma(rho - l);
        let q = HypTriple::new(0.5 - l, 0.5 + l, Complex64::new((4.0 - nf) / 2.0, 0.0));
        let f = if constant == c0() {
            c0()
        } else {
            gauss_2f1(&q, Complex64::new(-gap, 0.0))?.value
        };
        Ok(2.0 * i * (PI * mu).sin() * gap.powf(mu) * constant * f)
    } else {
        let m = (n - 2) / 2;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let constant = gamma(Complex64::new(nf / 2.0, 0.0))? * rgamma(0.5 + l) * rgamma(0.5 - l);
        Ok(-sign * 2.0 * PI * i * constant * family_even_series(dims, lambda, -gap)?)
    }
}

/// `Σ_k (ρ+λ)_k (ρ-λ)_k / (k! (m+k)!) u^k = ₂F₁(ρ+λ, ρ-λ; m+1; u)/m!` with
/// `m = (n-2)/2`, for real `u < 1`.
pub fn family_even_series(dims: ModelDims, lambda: SpectralParam, u: f64) -> Result<Complex64> {
    let m = (dims.n() - 2) / 2;
    let rho = dims.rho();
    let l = lambda.value();
    let (a, b) = (rho + l, rho - l);
    if u.abs() > 0.5 {
        let q = HypTriple::new(a, b, Complex64::new(m as f64 + 1.0, 0.0));
        return Ok(gauss_2f1(&q, Complex64::new(u, 0.0))?.value / crate::special::factorial(m));
    }
    let mut coef = Complex64::new(1.0 / crate::special::factorial(m), 0.0);
    let mut sum = c0();
    let mut small = 0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let term = coef * u.powi(k as i32);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm().max(1e-300) {
            small += 1;
            if small >= 3 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
        coef *= (a + kf) * (b + kf) / ((kf + 1.0) * (m as f64 + kf + 1.0));
    }
    Err(CrownError::NonConvergent {
        what: "even jump series",
        terms: MAX_TERMS,
    })
}

/// Leading behaviour of `₂F₁` at `z → 1` inside `0 < |1 - z| < 0.1`.
///
/// * `Re(c-a-b) < 0`: `Γ(c)Γ(a+b-c)/(Γ(a)Γ(b)) (1-z)^{c-a-b}`
/// * `c-a-b = 0`: `-Γ(c)/(Γ(a)Γ(b)) ln(1-z)`
/// * `Re(c-a-b) > 0`: the finite value `Γ(c)Γ(c-a-b)/(Γ(c-a)Γ(c-b))`
pub fn near_one_expansion(p: &HypTriple, z: Complex64) -> Result<Complex64> {
    let w = 1.0 - z;
    if !(w.norm() > 0.0 && w.norm() < 0.1) {
        return Err(CrownError::OutOfDisk);
    }
    if on_cut(z) {
        return Err(CrownError::OnCut { re: z.re, im: z.im });
    }
    near_one_with_log(p, w.ln())
}

/// [`near_one_expansion`] on the cut, `x ± i0`.
pub fn near_one_boundary(p: &HypTriple, x: f64, side: CutSide) -> Result<Complex64> {
    if !(x > 1.0 && x < 1.1) {
        return Err(CrownError::OutOfDisk);
    }
    near_one_with_log(p, Complex64::new((x - 1.0).ln(), -side.sign() * PI))
}

fn near_one_with_log(p: &HypTriple, ln_w: Complex64) -> Result<Complex64> {
    let m = p.c - p.a - p.b;
    let g = gamma(p.c)?;
    if m.norm() <= INTEGER_TOL {
        Ok(-g * rgamma(p.a) * rgamma(p.b) * ln_w)
    } else if m.re < 0.0 {
        Ok(g * gamma(-m)? * rgamma(p.a) * rgamma(p.b) * (m * ln_w).exp())
    } else {
        Ok(g * gamma(m)? * rgamma(p.c - p.a) * rgamma(p.c - p.b))
    }
}

/// Residual of the hypergeometric equation written through contiguous
/// functions, as used for the Laplacian of the kernel:
///
/// ```text
/// (ab/c) [ w(1-w) (a+1)(b+1)/(c+1) F(a+2,b+2;c+2;w)
///          + (n/2 - n w) F(a+1,b+1;c+1;w) - c F(a,b;c;w) ]
/// ```
pub fn contiguity_residual(dims: ModelDims, lambda: SpectralParam, w: Complex64) -> Result<Complex64> {
    let p = HypTriple::family(dims, lambda);
    let nf = dims.n() as f64;
    let f0 = gauss_2f1(&p, w)?.value;
    let f1 = gauss_2f1(&p.shifted(1.0), w)?.value;
    let f2 = gauss_2f1(&p.shifted(2.0), w)?.value;
    let (a, b, c) = (p.a, p.b, p.c);
    Ok(a * b / c * (w * (1.0 - w) * (a + 1.0) * (b + 1.0) / (c + 1.0) * f2 + (nf / 2.0 - nf * w) * f1 - c * f0))
}

/// Richardson limit of `gauss_2f1(x ± iε)` along `ε = 10^{-2} … 10^{-5}`.
pub fn eps_limit(p: &HypTriple, x: f64, side: CutSide) -> Result<crate::quad::Extrapolation> {
    let hs: Vec<f64> = crate::quad::EPS_GRID.to_vec();
    let mut vals = Vec::with_capacity(hs.len());
    for &e in &hs {
        vals.push(gauss_2f1(p, Complex64::new(x, side.sign() * e))?.value);
    }
    Ok(crate::quad::richardson(&hs, &vals, crate::quad::EPS_ORDER))
}

/// Pochhammer-based helper exported for oracles: `(a)_k (b)_k / ((c)_k k!)`.
pub fn series_coefficient(p: &HypTriple, k: usize) -> Complex64 {
    pochhammer(p.a, k) * pochhammer(p.b, k) / (pochhammer(p.c, k) * crate::special::factorial(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    fn dims(n: usize) -> ModelDims {
        ModelDims::new(n).unwrap()
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_complex("0.3i").unwrap(), c(0.0, 0.3));
        assert_eq!(parse_complex("-1.5").unwrap(), c(-1.5, 0.0));
        assert_eq!(parse_complex("2-0.5i").unwrap(), c(2.0, -0.5));
        assert_eq!(parse_complex("1e-3+2e+1i").unwrap(), c(1e-3, 20.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn admissibility() {
        let d = dims(3);
        assert!(SpectralParam::new(c(0.0, 2.0), d).is_ok());
        assert!(SpectralParam::new(c(0.5, 0.0), d).is_ok());
        assert!(SpectralParam::new(c(1.0, 0.0), d).is_err());
        assert!(SpectralParam::new(c(0.3, 0.3), d).is_err());
        assert!(SpectralParam::new(c(0.0, -1.0), d).is_err());
    }

    #[test]
    fn elementary_closed_forms() {
        let log_case = HypTriple::new(c1(), c1(), c(2.0, 0.0));
        for z in [c(0.3, 0.0), c(-4.0, 1.0), c(0.9, 0.3), c(3.0, 2.0), c(1.2, -0.1), c(0.6, 0.6)] {
            let expect = -(1.0 - z).ln() / z;
            assert!(rel(gauss_2f1(&log_case, z).unwrap().value, expect) < 1e-13, "z={z}");
        }
        let power = HypTriple::new(c(0.7, 0.2), c(1.3, 0.0), c(1.3, 0.0));
        for z in [c(0.4, 0.1), c(-7.0, 0.0), c(2.0, 3.0), c(0.98, 0.05)] {
            let expect = (-c(0.7, 0.2) * (1.0 - z).ln()).exp();
            assert!(rel(gauss_2f1(&power, z).unwrap().value, expect) < 1e-13, "z={z}");
        }
        let asin = HypTriple::new(c(0.5, 0.0), c(0.5, 0.0), c(1.5, 0.0));
        for s in [c(0.3, 0.0), c(0.9, 0.1), c(0.2, 0.8)] {
            let expect = s.asin() / s;
            assert!(rel(gauss_2f1(&asin, s * s).unwrap().value, expect) < 1e-13, "s={s}");
        }
    }

    #[test]
    fn log_boundary_values() {
        // F(1,1;2;x±i0) = -(ln(x-1) ∓ iπ)/x
        let p = HypTriple::new(c1(), c1(), c(2.0, 0.0));
        for x in [1.001, 1.5, 2.0, 7.0] {
            let plus = boundary_2f1(&p, x, CutSide::Plus).unwrap();
            let minus = boundary_2f1(&p, x, CutSide::Minus).unwrap();
            assert!(rel(plus, -c((x - 1.0).ln(), -PI) / x) < 1e-13);
            assert!(rel(minus, -c((x - 1.0).ln(), PI) / x) < 1e-13);
        }
        assert!(matches!(boundary_2f1(&p, 1.0 + 1e-12, CutSide::Plus), Err(CrownError::TooCloseToOne(_))));
        assert!(matches!(gauss_2f1(&p, c(3.0, 0.0)), Err(CrownError::OnCut { .. })));
    }

    #[test]
    fn terminating_and_invalid() {
        let p = HypTriple::new(c(-3.0, 0.0), c(0.5, 0.0), c(1.5, 0.0));
        let z = c(5.0, 0.0);
        let expect: Complex64 = (0..=3).map(|k| series_coefficient(&p, k) * z.powi(k as i32)).sum();
        assert!(rel(gauss_2f1(&p, z).unwrap().value, expect) < 1e-14);
        let bad = HypTriple::new(c1(), c1(), c(-2.0, 0.0));
        assert!(gauss_2f1(&bad, c(0.1, 0.0)).is_err());
    }

    #[test]
    fn routes_agree() {
        let p = HypTriple::new(c(0.8, 0.6), c(0.8, -0.6), c(1.5, 0.0));
        for z in [c(0.45, 0.3), c(-0.6, 0.2), c(0.55, -0.35)] {
            let reference = eval_with(&p, z, Route::Series).unwrap().value;
            for r in [Route::Pfaff, Route::Connection, Route::Taylor, Route::Auto] {
                if r == Route::Connection && (1.0 - z).norm() >= 1.0 {
                    assert!(matches!(eval_with(&p, z, r), Err(CrownError::OutOfDisk)));
                    continue;
                }
                let v = eval_with(&p, z, r).unwrap().value;
                assert!(rel(v, reference) < 1e-12, "route {r:?} at {z}: {v} vs {reference}");
            }
        }
        for z in [c(2.5, 1.0), c(-3.0, -2.0), c(1.6, 0.4)] {
            let a = eval_with(&p, z, Route::Reciprocal).unwrap().value;
            let b = eval_with(&p, z, Route::Taylor).unwrap().value;
            assert!(rel(a, b) < 1e-11, "z={z}");
        }
    }

    #[test]
    fn boundary_routes_agree() {
        for n in 2..=5 {
            for l in [c(0.0, 0.4), c(0.0, 2.5), c(0.2, 0.0)] {
                let Ok(lam) = SpectralParam::new(l, dims(n)) else { continue };
                let p = HypTriple::family(dims(n), lam);
                for x in [1.05, 1.7, 2.6, 9.0] {
                    for side in [CutSide::Plus, CutSide::Minus] {
                        let direct = boundary_2f1(&p, x, side).unwrap();
                        let cont = boundary_by_continuation(&p, x, side).unwrap();
                        assert!(rel(cont, direct) < 1e-10, "n={n} λ={l} x={x} {side:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn eps_limit_matches_boundary() {
        for n in 2..=5 {
            let lam = SpectralParam::new(c(0.0, 0.7), dims(n)).unwrap();
            let p = HypTriple::family(dims(n), lam);
            for x in [1.3, 2.4] {
                for side in [CutSide::Plus, CutSide::Minus] {
                    let lim = eps_limit(&p, x, side).unwrap();
                    let direct = boundary_2f1(&p, x, side).unwrap();
                    assert!(rel(lim.value, direct) < 1e-9, "n={n} x={x} {side:?}");
                }
            }
        }
    }

    #[test]
    fn schwarz_reflection_for_real_parameters() {
        let p = HypTriple::new(c(0.3, 0.0), c(1.7, 0.0), c(1.5, 0.0));
        for x in [1.2, 3.0] {
            let plus = boundary_2f1(&p, x, CutSide::Plus).unwrap();
            let minus = boundary_2f1(&p, x, CutSide::Minus).unwrap();
            assert!(rel(minus, plus.conj()) < 1e-13);
        }
        // λ imaginary: a = conj b, so the family is also real on the real axis.
        let lam = SpectralParam::new(c(0.0, 1.1), dims(3)).unwrap();
        let p = HypTriple::family(dims(3), lam);
        let plus = boundary_2f1(&p, 1.4, CutSide::Plus).unwrap();
        let minus = boundary_2f1(&p, 1.4, CutSide::Minus).unwrap();
        assert!(rel(minus, plus.conj()) < 1e-13);
    }

    #[test]
    fn family_jump_closed_form_matches() {
        for n in 2..=7 {
            for l in [c(0.0, 0.0), c(0.0, 0.9), c(0.0, 3.0), c(0.25, 0.0)] {
                let Ok(lam) = SpectralParam::new(l, dims(n)) else { continue };
                let p = HypTriple::family(dims(n), lam);
                for x in [1.01, 1.3, 1.8, 2.5, 4.0] {
                    let jump = jump_across_cut(&p, x).unwrap();
                    let closed = family_jump_closed_form(dims(n), lam, x).unwrap();
                    assert!(
                        (jump - closed).norm() <= 1e-10 * (1.0 + jump.norm()),
                        "n={n} λ={l} x={x}: {jump} vs {closed}"
                    );
                }
            }
        }
    }

    #[test]
    fn two_dimensional_log_law() {
        let lam = SpectralParam::new(c(0.0, 0.6), dims(2)).unwrap();
        let p = HypTriple::family(dims(2), lam);
        let pref = -rgamma(p.a) * rgamma(p.b);
        for side in [CutSide::Plus, CutSide::Minus] {
            let mut prev = f64::INFINITY;
            for k in 3..8 {
                let x = 1.0 + 10f64.powi(-k);
                let f = boundary_2f1(&p, x, side).unwrap();
                let lead = near_one_boundary(&p, x, side).unwrap();
                assert!(rel(lead, pref * c((x - 1.0).ln(), -side.sign() * PI)) < 1e-14);
                let constant = pref * (-2.0 * digamma(c1()).unwrap() + digamma(p.a).unwrap() + digamma(p.b).unwrap());
                let resid = (f - lead - constant).norm();
                assert!(resid < prev && resid < 50.0 * (x - 1.0) * (x - 1.0).ln().abs());
                prev = resid;
            }
        }
    }

    #[test]
    fn near_one_leading_terms() {
        // n = 4: c - a - b = -1, pole of order one
        let lam = SpectralParam::new(c(0.0, 0.3), dims(4)).unwrap();
        let p = HypTriple::family(dims(4), lam);
        let z = c(1.0 - 1e-6, 1e-6);
        let f = gauss_2f1(&p, z).unwrap().value;
        let lead = near_one_expansion(&p, z).unwrap();
        assert!(rel(f, lead) < 1e-4);
        assert!(matches!(near_one_expansion(&p, c(0.5, 0.0)), Err(CrownError::OutOfDisk)));
    }

    #[test]
    fn contiguity_vanishes() {
        for n in 2..=5 {
            let lam = SpectralParam::new(c(0.0, 0.8), dims(n)).unwrap();
            for w in [c(0.3, 0.2), c(-2.0, 0.5), c(0.9, -0.4), c(3.0, 1.0)] {
                let r = contiguity_residual(dims(n), lam, w).unwrap();
                let scale = gauss_2f1(&HypTriple::family(dims(n), lam).shifted(2.0), w).unwrap().value.norm() + 1.0;
                assert!(r.norm() < 1e-10 * scale, "n={n} w={w}: {r}");
            }
        }
    }

    proptest! {
        #[test]
        fn symmetric_in_a_and_b(ar in -2.0f64..3.0, ai in -2.0f64..2.0, br in -2.0f64..3.0, cr in 0.2f64..3.0,
                                zr in -5.0f64..5.0, zi in -5.0f64..5.0) {
            let z = c(zr, zi);
            prop_assume!(!(zr >= 1.0 && zi.abs() < 1e-3));
            let p = HypTriple::new(c(ar, ai), c(br, 0.0), c(cr, 0.0));
            let f = gauss_2f1(&p, z).unwrap().value;
            let g = gauss_2f1(&p.swapped(), z).unwrap().value;
            prop_assert!((f - g).norm() <= 1e-9 * (1.0 + f.norm()));
        }

        #[test]
        fn satisfies_the_ode(lr in 0.0f64..4.0, n in 2usize..6, zr in -3.0f64..3.0, zi in 0.2f64..3.0) {
            let lam = SpectralParam::new(c(0.0, lr), dims(n)).unwrap();
            let p = HypTriple::family(dims(n), lam);
            let z = c(zr, zi);
            let f = gauss_2f1(&p, z).unwrap().value;
            let ab = p.a * p.b;
            let f1 = ab / p.c * gauss_2f1(&p.shifted(1.0), z).unwrap().value;
            let f2 = ab * (p.a + 1.0) * (p.b + 1.0) / (p.c * (p.c + 1.0)) * gauss_2f1(&p.shifted(2.0), z).unwrap().value;
            let r = z * (1.0 - z) * f2 + (p.c - (p.a + p.b + 1.0) * z) * f1 - ab * f;
            let scale = (z * (1.0 - z) * f2).norm() + (ab * f).norm() + 1.0;
            prop_assert!(r.norm() <= 1e-10 * scale);
        }
    }
}
