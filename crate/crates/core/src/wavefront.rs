//! Analytic wavefront sets of the boundary kernels.
//!
//! Membership predicates work in chart coordinates `(v, ξ)` at the base
//! point of a kernel: `v` is the chart position and `ξ` a covector in the
//! dual basis. The predicted sets are closed-form sign predicates; the
//! assembled sets come from pulling back the one-dimensional model sets
//! through `f(v) = (1 + C([v,v]))/2` on each cone half and closing the
//! result at the apex with the bicharacteristic flow of the wave symbol.
//!
//! The decay probe measures windowed Fourier transforms of the pointwise
//! kernel in a plane through the time axis, where the kernel depends only
//! on `v_0² - v_1²` after integrating out the transverse coordinate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist1d::{default_tau_grid, fit_decay, windowed_fourier, windowed_fourier_fn, DecayTable, ModelDist1D, TestFn1D, MAX_TAU};
use crate::error::{CrownError, Result};
use crate::hyp2f1::{eval_one_minus, CutSide};
use crate::kernels::{boundary_side, chart_value, singular_rule, KernelParams, SphericalDist, SphericalKind};
use crate::lorentz::{cs_real, form, ChartBound};
use crate::{Chart, DeSitterPoint};

/// Angular tolerance shared by every membership predicate.
pub const ANGULAR_TOL: f64 = 1e-9;
/// Half-width of the probe window in chart units.
pub const PROBE_HALFWIDTH: f64 = 0.15;
/// Window half-width of the one-dimensional reference probes.
pub const PROBE_1D_HALFWIDTH: f64 = 0.5;
pub const PROBE_TAUS: [f64; 4] = [32.0, 64.0, 128.0, 256.0];
/// Probe magnitudes at or below this fraction of `∫|K χ|` count as zero;
/// the systematic error of the planar quadrature sits near `3e-11`.
pub const PROBE_FLOOR: f64 = 1e-9;
/// Agreement required between the closed-form strip and RK4.
pub const RK4_TOL: f64 = 1e-10;

const CHEB_NODES: usize = 24;
const TABLE_LEVELS: usize = 46;
const INNER_CAP: f64 = 0.005;
const TRANSVERSE_CAP: f64 = 0.005;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn unit(a: &[f64]) -> Option<Vec<f64>> {
    let r = norm(a);
    (r > 0.0 && r.is_finite()).then(|| a.iter().map(|x| x / r).collect())
}

fn negated(a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| -x).collect()
}

/// A point of the cotangent bundle in chart coordinates, with `|ξ| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotangentDir {
    pub base: Vec<f64>,
    pub xi: Vec<f64>,
}

impl CotangentDir {
    pub fn new(base: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if base.len() != xi.len() {
            return Err(CrownError::DimensionMismatch {
                expected: base.len(),
                got: xi.len(),
            });
        }
        if base.len() < 2 {
            return Err(CrownError::InvalidDimension(base.len()));
        }
        let xi = unit(&xi).ok_or(CrownError::ZeroCovector)?;
        Ok(Self { base, xi })
    }

    pub fn n(&self) -> usize {
        self.base.len()
    }

    /// `(v, -ξ)`.
    pub fn antipode(&self) -> Self {
        Self {
            base: self.base.clone(),
            xi: negated(&self.xi),
        }
    }
}

/// `P(ξ) = ξ_0² - Σ_{i≥1} ξ_i²`.
pub fn principal_symbol(xi: &[f64]) -> Result<f64> {
    if xi.iter().all(|x| *x == 0.0) {
        return Err(CrownError::ZeroCovector);
    }
    Ok(xi[0] * xi[0] - xi[1..].iter().map(|x| x * x).sum::<f64>())
}

/// Whether `ξ` is characteristic: `|P(ξ)| ≤ tol·|ξ|²`.
pub fn char_membership(dir: &CotangentDir) -> bool {
    principal_symbol(&dir.xi).map(|p| p.abs() <= ANGULAR_TOL).unwrap_or(false)
}

fn symbol_gradient(xi: &[f64]) -> Vec<f64> {
    xi.iter().enumerate().map(|(i, x)| if i == 0 { 2.0 * x } else { -2.0 * x }).collect()
}

/// Bicharacteristic strip of `P` through `(v0, ξ0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicStrip {
    pub v0: Vec<f64>,
    pub xi0: Vec<f64>,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripSample {
    pub t: f64,
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
}

impl GeodesicStrip {
    pub fn velocity(&self) -> Vec<f64> {
        symbol_gradient(&self.xi0)
    }

    pub fn position(&self, t: f64) -> Vec<f64> {
        self.v0.iter().zip(self.velocity()).map(|(v, d)| v + t * d).collect()
    }

    pub fn covector(&self, _t: f64) -> Vec<f64> {
        self.xi0.clone()
    }

    /// `count + 1` equally spaced closed-form samples on `[0, t_end]`.
    pub fn samples(&self, count: usize) -> Vec<StripSample> {
        let count = count.max(1);
        (0..=count)
            .map(|k| {
                let t = self.t_end * k as f64 / count as f64;
                StripSample {
                    t,
                    v: self.position(t),
                    xi: self.covector(t),
                }
            })
            .collect()
    }

    /// Classical RK4 for `v' = ∂P/∂ξ`, `ξ' = -∂P/∂v`.
    pub fn rk4(&self, steps: usize) -> Vec<StripSample> {
        let steps = steps.max(1);
        let h = self.t_end / steps as f64;
        let n = self.v0.len();
        let rhs = |_v: &[f64], xi: &[f64]| -> (Vec<f64>, Vec<f64>) { (symbol_gradient(xi), vec![0.0; n]) };
        let axpy = |x: &[f64], a: f64, d: &[f64]| -> Vec<f64> { x.iter().zip(d).map(|(x, d)| x + a * d).collect() };
        let mut v = self.v0.clone();
        let mut xi = self.xi0.clone();
        let mut out = vec![StripSample {
            t: 0.0,
            v: v.clone(),
            xi: xi.clone(),
        }];
        for k in 0..steps {
            let (k1v, k1x) = rhs(&v, &xi);
            let (k2v, k2x) = rhs(&axpy(&v, h / 2.0, &k1v), &axpy(&xi, h / 2.0, &k1x));
            let (k3v, k3x) = rhs(&axpy(&v, h / 2.0, &k2v), &axpy(&xi, h / 2.0, &k2x));
            let (k4v, k4x) = rhs(&axpy(&v, h, &k3v), &axpy(&xi, h, &k3x));
            for i in 0..n {
                v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
                xi[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            }
            out.push(StripSample {
                t: h * (k + 1) as f64,
                v: v.clone(),
                xi: xi.clone(),
            });
        }
        out
    }

    /// Largest deviation of RK4 from the closed form.
    pub fn rk4_deviation(&self, steps: usize) -> f64 {
        self.rk4(steps)
            .iter()
            .map(|s| {
                let v = self.position(s.t);
                let xi = self.covector(s.t);
                s.v.iter()
                    .zip(&v)
                    .chain(s.xi.iter().zip(&xi))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Time at which the strip passes through `v = 0`, if it does.
    pub fn apex_time(&self) -> Option<f64> {
        let d = self.velocity();
        let dd = dot(&d, &d);
        if dd == 0.0 {
            return None;
        }
        let t = -dot(&self.v0, &d) / dd;
        (norm(&self.position(t)) <= ANGULAR_TOL * norm(&self.v0).max(1.0)).then_some(t)
    }
}

/// Strip through `(v0, ξ0)` for a characteristic `ξ0`.
pub fn hamiltonian_flow(v0: &[f64], xi0: &[f64], t_end: f64) -> Result<GeodesicStrip> {
    if v0.len() != xi0.len() {
        return Err(CrownError::DimensionMismatch {
            expected: v0.len(),
            got: xi0.len(),
        });
    }
    let p = principal_symbol(xi0)?;
    if p.abs() > ANGULAR_TOL * dot(xi0, xi0) {
        return Err(CrownError::NonCharacteristic);
    }
    Ok(GeodesicStrip {
        v0: v0.to_vec(),
        xi0: xi0.to_vec(),
        t_end,
    })
}

fn chart_q(v: &[f64]) -> f64 {
    -v[0] * v[0] + v[1..].iter().map(|x| x * x).sum::<f64>()
}

/// `S'(q)`, with a series near `q = 0`.
fn s_prime(q: f64) -> f64 {
    if q.abs() < 1e-3 {
        // Σ_{k≥1} k (-q)^{k-1} (-1) / (2k+1)!
        let mut sum = 0.0;
        let mut fact = 6.0;
        let mut pow = 1.0;
        for k in 1..8 {
            sum -= k as f64 * pow / fact;
            pow *= -q;
            fact *= ((2 * k + 2) * (2 * k + 3)) as f64;
        }
        sum
    } else {
        let (c, s) = cs_real(q);
        (c - s) / (2.0 * q)
    }
}

/// Gradient of `f(v) = (1 + C([v,v]))/2`:
/// `-S([v,v])/4 · (-2v_0, 2v_1, …, 2v_{n-1})`.
pub fn df_pullback(v: &[f64]) -> Vec<f64> {
    let (_, s) = cs_real(chart_q(v));
    v.iter()
        .enumerate()
        .map(|(i, x)| -s / 4.0 * if i == 0 { -2.0 * x } else { 2.0 * x })
        .collect()
}

/// Columns `∂_j Exp_{e_n}(v)` as ambient vectors.
pub fn exp_differential(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    let q = chart_q(v);
    let (_, s) = cs_real(q);
    let ds = s_prime(q);
    (0..n)
        .map(|j| {
            let dq = if j == 0 { -2.0 * v[0] } else { 2.0 * v[j] };
            let mut col: Vec<f64> = v.iter().map(|vi| ds * dq * vi).collect();
            col[j] += s;
            col.push(-s / 2.0 * dq);
            col
        })
        .collect()
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs())).unwrap_or(col);
        if a[piv][col].abs() < 1e-300 {
            return Err(CrownError::InvalidParameter("singular chart differential".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Ok(x)
}

/// Ambient form of a chart covector at `Exp_x(v)`: the tangent vector
/// `η` with `[η, ∂_j y] = ξ_j`.
pub fn ambient_covector(basepoint: &DeSitterPoint, dir: &CotangentDir) -> Result<(DeSitterPoint, Vec<f64>)> {
    if dir.n() != basepoint.n() {
        return Err(CrownError::DimensionMismatch {
            expected: basepoint.n(),
            got: dir.n(),
        });
    }
    let chart = Chart::standard(basepoint);
    let y = chart.point(&dir.base)?;
    let cols = exp_differential(&dir.base);
    let gram: Vec<Vec<f64>> = cols.iter().map(|a| cols.iter().map(|b| form(a, b)).collect()).collect();
    let coef = solve(gram, dir.xi.clone())?;
    let mut local = vec![0.0; basepoint.n() + 1];
    for (c, col) in coef.iter().zip(&cols) {
        for (l, x) in local.iter_mut().zip(col) {
            *l += c * x;
        }
    }
    Ok((y, chart.frame.apply_raw(&local)))
}

/// Chart covector at `y` from an ambient tangent vector `η`.
pub fn chart_covector(basepoint: &DeSitterPoint, y: &DeSitterPoint, eta: &[f64]) -> Result<CotangentDir> {
    let chart = Chart::standard(basepoint);
    let v = chart.coords_raw(y.coords(), ChartBound::Literal)?;
    let local = chart.frame.inverse().apply_raw(eta);
    let xi = exp_differential(&v).iter().map(|col| form(&local, col)).collect();
    CotangentDir::new(v, xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WfKind {
    PsiSpec,
    PsiTildeSpec,
    PhiSpec,
    PhiTildeSpec,
    UnionSpec,
}

/// Open half of the chart where the pullback is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Future,
    Past,
    /// Both halves and the apex.
    Full,
}

/// Direction of the one-dimensional model set at the singular point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelWf {
    Positive,
    Negative,
}

impl ModelWf {
    /// `F(x + i0)` is singular for `τ > 0`, `F(x - i0)` for `τ < 0`.
    pub fn of_side(side: CutSide) -> Self {
        match side {
            CutSide::Plus => ModelWf::Positive,
            CutSide::Minus => ModelWf::Negative,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            ModelWf::Positive => 1.0,
            ModelWf::Negative => -1.0,
        }
    }
}

/// Whether the model variable is `f(v)` itself or `1 - f(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelArgument {
    Direct,
    Reflected,
}

impl ModelArgument {
    pub fn sign(self) -> f64 {
        match self {
            ModelArgument::Direct => 1.0,
            ModelArgument::Reflected => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "piece")]
pub enum WfPiece {
    /// `(v, ξ)` with `v` null in `region` and `ξ` a positive multiple of
    /// `sign · df_v`.
    AlongCone { region: Region, sign: f64 },
    /// `(0, ξ)` with `ξ` null and `sign(ξ_0) = xi0_sign`.
    Apex { xi0_sign: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfSpec {
    pub kind: WfKind,
    pub basepoint: DeSitterPoint,
    /// Only used by [`WfKind::UnionSpec`].
    pub pieces: Vec<WfPiece>,
}

impl WfSpec {
    pub fn label(&self) -> &'static str {
        match self.kind {
            WfKind::PsiSpec => "psi",
            WfKind::PsiTildeSpec => "psi_tilde",
            WfKind::PhiSpec => "phi",
            WfKind::PhiTildeSpec => "phi_tilde",
            WfKind::UnionSpec => "union",
        }
    }
}

fn is_apex(v: &[f64]) -> bool {
    norm(v) <= ANGULAR_TOL
}

fn on_cone(v: &[f64]) -> bool {
    !is_apex(v) && chart_q(v).abs() <= ANGULAR_TOL * dot(v, v)
}

fn aligned(xi_unit: &[f64], d: &[f64]) -> bool {
    match unit(d) {
        Some(du) => xi_unit.iter().zip(&du).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= ANGULAR_TOL,
        None => false,
    }
}

fn null_unit(xi_unit: &[f64]) -> bool {
    principal_symbol(xi_unit).map(|p| p.abs() <= ANGULAR_TOL).unwrap_or(false)
}

fn psi_predicate(v: &[f64], xi: &[f64]) -> bool {
    if is_apex(v) {
        return null_unit(xi) && xi[0] < 0.0;
    }
    if !on_cone(v) {
        return false;
    }
    let d: Vec<f64> = if v[0] > 0.0 {
        v.iter().enumerate().map(|(i, x)| if i == 0 { -x } else { *x }).collect()
    } else {
        v.iter().enumerate().map(|(i, x)| if i == 0 { *x } else { -x }).collect()
    };
    aligned(xi, &d)
}

fn piece_contains(piece: &WfPiece, v: &[f64], xi: &[f64]) -> bool {
    match *piece {
        WfPiece::AlongCone { region, sign } => {
            let side_ok = match region {
                Region::Future => v[0] > 0.0,
                Region::Past => v[0] < 0.0,
                Region::Full => true,
            };
            side_ok && on_cone(v) && aligned(xi, &df_pullback(v).iter().map(|x| sign * x).collect::<Vec<_>>())
        }
        WfPiece::Apex { xi0_sign } => is_apex(v) && null_unit(xi) && xi[0] * xi0_sign > 0.0,
    }
}

fn spec_kind(kind: SphericalKind) -> Result<WfKind> {
    match kind {
        SphericalKind::Psi => Ok(WfKind::PsiSpec),
        SphericalKind::PsiTilde => Ok(WfKind::PsiTildeSpec),
        SphericalKind::PhiPow => Ok(WfKind::PhiSpec),
        SphericalKind::PhiTildePow => Ok(WfKind::PhiTildeSpec),
        SphericalKind::Difference => Err(CrownError::Unsupported(
            "the difference kernel has no single predicted set; use the psi and psi_tilde sets".into(),
        )),
    }
}

/// Closed-form wavefront set of a kernel at `basepoint`.
pub fn predicted_wf(kind: SphericalKind, basepoint: &DeSitterPoint) -> Result<WfSpec> {
    Ok(WfSpec {
        kind: spec_kind(kind)?,
        basepoint: basepoint.clone(),
        pieces: Vec::new(),
    })
}

/// Membership of a chart covector at the spec's base point.
pub fn wf_contains(spec: &WfSpec, dir: &CotangentDir) -> bool {
    if dir.n() != spec.basepoint.n() {
        return false;
    }
    let (v, xi) = (&dir.base, &dir.xi);
    match spec.kind {
        WfKind::PsiSpec | WfKind::PhiSpec => psi_predicate(v, xi),
        WfKind::PsiTildeSpec | WfKind::PhiTildeSpec => psi_predicate(v, &negated(xi)),
        WfKind::UnionSpec => spec.pieces.iter().any(|p| piece_contains(p, v, xi)),
    }
}

/// Membership of an ambient covector `η` at `y`.
pub fn wf_contains_ambient(spec: &WfSpec, y: &DeSitterPoint, eta: &[f64]) -> Result<bool> {
    Ok(wf_contains(spec, &chart_covector(&spec.basepoint, y, eta)?))
}

/// Pullback of the model set through `f` (or `1 - f`) on one cone half.
pub fn pullback_wf(model: ModelWf, argument: ModelArgument, region: Region) -> Result<WfPiece> {
    if region == Region::Full {
        return Err(CrownError::InvalidParameter(
            "the pullback region must exclude the apex, where df vanishes".into(),
        ));
    }
    Ok(WfPiece::AlongCone {
        region,
        sign: model.sign() * argument.sign(),
    })
}

fn spatial_samples(k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..k {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; k];
            e[i] = s;
            out.push(e);
        }
    }
    if k > 1 {
        let r = 1.0 / (k as f64).sqrt();
        out.push(vec![r; k]);
        out.push(vec![-r; k]);
    }
    out
}

/// Apex pieces reached by flowing along-cone pieces into `v = 0`.
pub fn apex_closure(pieces: &[WfPiece], n: usize) -> Vec<WfPiece> {
    let mut signs: Vec<f64> = Vec::new();
    for piece in pieces {
        let WfPiece::AlongCone { region, sign } = *piece else { continue };
        let times: &[f64] = match region {
            Region::Future => &[1.0],
            Region::Past => &[-1.0],
            Region::Full => &[1.0, -1.0],
        };
        for &t0 in times {
            for omega in spatial_samples(n - 1) {
                for r in [0.1, 0.5] {
                    let mut v = vec![t0 * r];
                    v.extend(omega.iter().map(|x| r * x));
                    let xi: Vec<f64> = df_pullback(&v).iter().map(|x| sign * x).collect();
                    let Ok(strip) = hamiltonian_flow(&v, &xi, 1.0) else { continue };
                    if strip.apex_time().is_some() {
                        let s = xi[0].signum();
                        if !signs.contains(&s) {
                            signs.push(s);
                        }
                    }
                }
            }
        }
    }
    signs.sort_by(f64::total_cmp);
    signs.into_iter().map(|s| WfPiece::Apex { xi0_sign: s }).collect()
}

/// The set assembled from the pullbacks on both halves and their apex
/// closure.
pub fn assemble_wf(kind: SphericalKind, basepoint: &DeSitterPoint) -> Result<WfSpec> {
    spec_kind(kind)?;
    let argument = if kind.is_phi() {
        ModelArgument::Reflected
    } else {
        ModelArgument::Direct
    };
    let mut pieces = Vec::new();
    for (region, future) in [(Region::Future, true), (Region::Past, false)] {
        let side = boundary_side(kind, future).expect("kind has a side");
        pieces.push(pullback_wf(ModelWf::of_side(side), argument, region)?);
    }
    let apex = apex_closure(&pieces, basepoint.n());
    pieces.extend(apex);
    Ok(WfSpec {
        kind: WfKind::UnionSpec,
        basepoint: basepoint.clone(),
        pieces,
    })
}

/// Random conic samples mixing exact members, near misses and generic
/// points, with the covector rescaled by a random positive factor before
/// normalisation.
pub fn sample_conic(n: usize, count: usize, seed: u64) -> Vec<CotangentDir> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut omega: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let on = norm(&omega).max(1e-3);
        omega.iter_mut().for_each(|x| *x /= on);
        let r = rng.gen_range(0.05..0.9);
        let t0: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let scale = rng.gen_range(0.1..10.0);
        let (base, xi): (Vec<f64>, Vec<f64>) = match rng.gen_range(0..5) {
            0 => {
                let mut v = vec![t0 * r];
                v.extend(omega.iter().map(|x| r * x));
                let s: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let mut xi = vec![-s * v[0]];
                xi.extend(v[1..].iter().map(|x| s * x));
                (v, xi)
            }
            1 => {
                let mut xi = vec![t0];
                xi.extend(omega.iter().cloned());
                (vec![0.0; n], xi)
            }
            2 => {
                let mut v = vec![t0 * r];
                v.extend(omega.iter().map(|x| r * x));
                let xi = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (v, xi)
            }
            3 => {
                let mut v = vec![t0 * r];
                v.extend(omega.iter().map(|x| r * x));
                let mut xi = vec![-v[0]];
                xi.extend(v[1..].iter().cloned());
                let k = rng.gen_range(0..n);
                xi[k] += rng.gen_range(-1e-3..1e-3);
                (v, xi)
            }
            _ => {
                let v = (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect();
                let xi = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (v, xi)
            }
        };
        let xi: Vec<f64> = xi.iter().map(|x| x * scale).collect();
        if let Ok(d) = CotangentDir::new(base, xi) {
            out.push(d);
        }
    }
    out
}

/// Samples where two specs disagree.
pub fn membership_mismatches(a: &WfSpec, b: &WfSpec, samples: &[CotangentDir]) -> usize {
    samples.iter().filter(|d| wf_contains(a, d) != wf_contains(b, d)).count()
}

/// Samples where `a` at `ξ` differs from `b` at `-ξ`.
pub fn antipode_mismatches(a: &WfSpec, b: &WfSpec, samples: &[CotangentDir]) -> usize {
    samples.iter().filter(|d| wf_contains(a, d) != wf_contains(b, &d.antipode())).count()
}

/// Samples lying in both specs.
pub fn overlap_count(a: &WfSpec, b: &WfSpec, samples: &[CotangentDir]) -> usize {
    samples.iter().filter(|d| wf_contains(a, d) && wf_contains(b, d)).count()
}

/// Characteristic conormal directions over the cone (and all null
/// directions at the apex).
pub fn cone_char_samples(n: usize, count: usize, seed: u64) -> Vec<CotangentDir> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut omega: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let on = norm(&omega);
        if on < 1e-3 {
            continue;
        }
        omega.iter_mut().for_each(|x| *x /= on);
        let s: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        if rng.gen_bool(0.2) {
            let mut xi = vec![s];
            xi.extend(omega.iter().cloned());
            out.push(CotangentDir::new(vec![0.0; n], xi).expect("nonzero"));
        } else {
            let r = rng.gen_range(0.05..0.9);
            let t0: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let mut v = vec![t0 * r];
            v.extend(omega.iter().map(|x| r * x));
            let mut xi = vec![-s * v[0]];
            xi.extend(v[1..].iter().map(|x| s * x));
            out.push(CotangentDir::new(v, xi).expect("nonzero"));
        }
    }
    out
}

/// Members of a spec for plotting: conormals at `count` cone points per
/// half and `count` apex directions.
pub fn spec_members(spec: &WfSpec, count: usize) -> Vec<CotangentDir> {
    let n = spec.basepoint.n();
    let mut out = Vec::new();
    for d in cone_char_samples(n, 4 * count.max(1), 7) {
        if wf_contains(spec, &d) {
            out.push(d.clone());
        } else if wf_contains(spec, &d.antipode()) {
            out.push(d.antipode());
        }
        if out.len() >= 2 * count {
            break;
        }
    }
    out
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Piecewise Chebyshev interpolant (first-kind nodes) on intervals graded
/// geometrically toward `0`.
struct ChebTable {
    breaks: Vec<f64>,
    values: Vec<[Complex64; CHEB_NODES]>,
    nodes: [f64; CHEB_NODES],
    weights: [f64; CHEB_NODES],
}

fn cheb_node(j: usize) -> f64 {
    ((2 * j + 1) as f64 * PI / (2 * CHEB_NODES) as f64).cos()
}

fn cheb_weight(j: usize) -> f64 {
    let s = ((2 * j + 1) as f64 * PI / (2 * CHEB_NODES) as f64).sin();
    if j % 2 == 0 {
        s
    } else {
        -s
    }
}

impl ChebTable {
    fn build<F: FnMut(f64) -> Result<Complex64>>(lo: f64, hi: f64, mut f: F) -> Result<Self> {
        let m = lo.abs().max(hi.abs());
        let mut pts = vec![lo, hi];
        if lo < 0.0 && hi > 0.0 {
            pts.push(0.0);
        }
        for k in 0..TABLE_LEVELS {
            let d = m * 0.5f64.powi(k as i32);
            for s in [d, -d] {
                if s > lo && s < hi {
                    pts.push(s);
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut values = Vec::with_capacity(pts.len() - 1);
        for w in pts.windows(2) {
            let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            let mut row = [Complex64::new(0.0, 0.0); CHEB_NODES];
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = f(mid + half * cheb_node(j))?;
            }
            values.push(row);
        }
        Ok(Self {
            breaks: pts,
            values,
            nodes: std::array::from_fn(cheb_node),
            weights: std::array::from_fn(cheb_weight),
        })
    }

    fn eval(&self, x: f64) -> Complex64 {
        let k = self.breaks.partition_point(|b| *b <= x).clamp(1, self.breaks.len() - 1) - 1;
        let (lo, hi) = (self.breaks[k], self.breaks[k + 1]);
        let t = (2.0 * x - lo - hi) / (hi - lo);
        let row = &self.values[k];
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for j in 0..CHEB_NODES {
            let d = t - self.nodes[j];
            if d == 0.0 {
                return row[j];
            }
            let w = self.weights[j] / d;
            num += row[j] * w;
            den += w;
        }
        num / den
    }
}

/// Kernel reduced to the plane `(v_0, v_1)` as a function of
/// `A = v_0² - v_1²` and the sign of `v_0`.
struct PlanarKernel {
    future: Option<ChebTable>,
    past: Option<ChebTable>,
}

impl PlanarKernel {
    fn build(dist: &SphericalDist, p: [f64; 2], hw: f64) -> Result<Self> {
        let n = dist.params.n();
        let sq_range = |lo: f64, hi: f64| -> (f64, f64) {
            if lo <= 0.0 && hi >= 0.0 {
                (0.0, lo.abs().max(hi.abs()).powi(2))
            } else {
                let (a, b) = (lo.abs(), hi.abs());
                (a.min(b).powi(2), a.max(b).powi(2))
            }
        };
        let (s1lo, s1hi) = sq_range(p[1] - hw, p[1] + hw);
        let table = |sign: f64| -> Result<Option<ChebTable>> {
            let (lo0, hi0) = if sign > 0.0 {
                ((p[0] - hw).max(0.0), p[0] + hw)
            } else {
                (p[0] - hw, (p[0] + hw).min(0.0))
            };
            if hi0 <= lo0 {
                return Ok(None);
            }
            let (s0lo, s0hi) = sq_range(lo0, hi0);
            let (alo, ahi) = (s0lo - s1hi, s0hi - s1lo);
            let pad = 1e-12 * (alo.abs() + ahi.abs());
            let kappa = |a: f64| -> Result<Complex64> {
                if n == 2 {
                    chart_value(dist, -a, sign)
                } else {
                    transverse_integral(dist, a, sign, hw)
                }
            };
            Ok(Some(ChebTable::build(alo - pad, ahi + pad, kappa)?))
        };
        Ok(Self {
            future: table(1.0)?,
            past: table(-1.0)?,
        })
    }

    fn eval(&self, v0: f64, a: f64) -> Complex64 {
        let t = if v0 >= 0.0 {
            self.future.as_ref().or(self.past.as_ref())
        } else {
            self.past.as_ref().or(self.future.as_ref())
        };
        t.map(|t| t.eval(a)).unwrap_or_default()
    }
}

/// `∫ K(v_0, v_1, w) χ(w/hw) dw` over the transverse coordinate.
fn transverse_integral(dist: &SphericalDist, a: f64, sign: f64, hw: f64) -> Result<Complex64> {
    let root = if a > 0.0 { a.sqrt() } else { 0.0 };
    let mut rule = Vec::new();
    if a > 0.0 && root < hw {
        rule.extend(singular_rule(0.0, root, false, true, TRANSVERSE_CAP));
        rule.extend(singular_rule(root, hw, true, false, TRANSVERSE_CAP));
    } else {
        rule.extend(singular_rule(0.0, hw, a <= 0.0, false, TRANSVERSE_CAP));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (w, wt) in rule {
        let q = if a > 0.0 { (w - root) * (w + root) } else { w * w - a };
        if q == 0.0 {
            continue;
        }
        sum += chart_value(dist, q, sign)? * (wt * bump(w / hw));
    }
    Ok(2.0 * sum)
}

fn quadratic_roots(alpha: f64, beta: f64, gamma: f64) -> Vec<f64> {
    if alpha.abs() < 1e-12 {
        return if beta.abs() > 1e-300 { vec![-gamma / beta] } else { Vec::new() };
    }
    let disc = beta * beta - 4.0 * alpha * gamma;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-beta / (2.0 * alpha)];
    }
    let q = -0.5 * (beta + beta.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / alpha, gamma / q]
}

/// Rule on `[lo, hi]` graded toward the given interior singular points.
fn split_rule(lo: f64, hi: f64, mut sing: Vec<f64>, cap: f64) -> Vec<(f64, f64)> {
    sing.retain(|s| *s > lo && *s < hi);
    sing.sort_by(f64::total_cmp);
    sing.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (hi - lo));
    let mut pts = vec![lo];
    pts.extend(sing);
    pts.push(hi);
    let mut rule = Vec::new();
    for (i, w) in pts.windows(2).enumerate() {
        let sa = i > 0;
        let sb = i + 2 < pts.len();
        rule.extend(singular_rule(w[0], w[1], sa, sb, cap));
    }
    rule
}

/// Windowed Fourier magnitudes of the planar kernel in one direction.
fn probe_direction(kernel: &PlanarKernel, p: [f64; 2], xi: [f64; 2], taus: &[f64], hw: f64) -> (Vec<f64>, f64) {
    let (c, s) = (xi[0], xi[1]);
    let e = [-s, c];
    let amax = hw * (c.abs() + s.abs());
    let tmax = taus.iter().cloned().fold(0.0, f64::max);
    let mut outer_sing = Vec::new();
    if p[0].abs() < hw && p[1].abs() < hw {
        outer_sing.push(-(p[0] * c + p[1] * s));
    }
    for sigma in [1.0, -1.0] {
        if (e[0] - sigma * e[1]).abs() < 1e-12 {
            let den = c - sigma * s;
            if den.abs() > 1e-12 {
                outer_sing.push((sigma * p[1] - p[0]) / den);
            }
        }
    }
    let outer = split_rule(-amax, amax, outer_sing, 0.5 / tmax);
    let mut sums = vec![Complex64::new(0.0, 0.0); taus.len()];
    let mut mass = 0.0;
    for (a, wa) in outer {
        let (oa0, oa1) = (a * c, a * s);
        let (mut blo, mut bhi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut empty = false;
        for (off, ei) in [(oa0, e[0]), (oa1, e[1])] {
            if ei.abs() > 1e-15 {
                let (x, y) = ((-hw - off) / ei, (hw - off) / ei);
                blo = blo.max(x.min(y));
                bhi = bhi.min(x.max(y));
            } else if off.abs() >= hw {
                empty = true;
            }
        }
        if empty || bhi <= blo {
            continue;
        }
        let (c0, c1) = (p[0] + oa0, p[1] + oa1);
        let roots = quadratic_roots(e[0] * e[0] - e[1] * e[1], 2.0 * (c0 * e[0] - c1 * e[1]), c0 * c0 - c1 * c1);
        let mut g = Complex64::new(0.0, 0.0);
        let mut gm = 0.0;
        for (b, wb) in split_rule(blo, bhi, roots, INNER_CAP) {
            let win = bump((oa0 + b * e[0]) / hw) * bump((oa1 + b * e[1]) / hw);
            if win == 0.0 {
                continue;
            }
            let (v0, v1) = (c0 + b * e[0], c1 + b * e[1]);
            let k = kernel.eval(v0, (v0 - v1) * (v0 + v1));
            g += k * (wb * win);
            gm += wb * win * k.norm();
        }
        mass += wa * gm;
        for (sum, &tau) in sums.iter_mut().zip(taus) {
            *sum += g * Complex64::from_polar(wa, -2.0 * PI * tau * a);
        }
    }
    (sums.iter().map(|z| z.norm()).collect(), mass)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionDecay {
    pub id: usize,
    pub xi: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub exponent: f64,
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub kind: SphericalKind,
    pub base: Vec<f64>,
    pub taus: Vec<f64>,
    /// Magnitudes at or below this are treated as numerical zero.
    pub floor: f64,
    pub rows: Vec<DirectionDecay>,
}

impl DecayReport {
    /// `tau,magnitude,direction` rows with a header.
    pub fn csv_rows(&self) -> Vec<[String; 3]> {
        let mut rows = vec![["tau".to_string(), "magnitude".to_string(), "direction".to_string()]];
        for r in &self.rows {
            for (t, m) in self.taus.iter().zip(&r.magnitudes) {
                rows.push([format!("{t}"), format!("{m:e}"), r.id.to_string()]);
            }
        }
        rows
    }

    pub fn magnitude_at(&self, id: usize, tau: f64) -> Option<f64> {
        let k = self.taus.iter().position(|t| *t == tau)?;
        self.rows.iter().find(|r| r.id == id).map(|r| r.magnitudes[k])
    }
}

/// Unit spatial axis of the probe plane: the spatial part of the base
/// point, or of the first direction when the base lies on the time axis.
fn probe_axis(base: &[f64], directions: &[Vec<f64>]) -> Vec<f64> {
    if let Some(u) = unit(&base[1..]).filter(|_| norm(&base[1..]) > 1e-12) {
        return u;
    }
    for d in directions {
        if d.len() == base.len() && norm(&d[1..]) > 1e-12 {
            return unit(&d[1..]).expect("nonzero");
        }
    }
    let mut e = vec![0.0; base.len() - 1];
    e[0] = 1.0;
    e
}

/// `count` unit directions in the plane spanned by the time axis and the
/// spatial part of `base`, at angles `2πk/count` from `e_0`.
pub fn plane_directions(base: &[f64], count: usize) -> Vec<Vec<f64>> {
    let axis = probe_axis(base, &[]);
    (0..count)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / count as f64;
            let mut d = vec![phi.cos()];
            d.extend(axis.iter().map(|x| phi.sin() * x));
            d.iter().map(|x| if x.abs() < 1e-15 { 0.0 } else { *x }).collect()
        })
        .collect()
}

/// Windowed Fourier decay of the pointwise kernel around chart point
/// `base` along each direction, using a product window of half-width
/// [`PROBE_HALFWIDTH`] in coordinates adapted to the probe plane.
///
/// Supported for `n ∈ {2, 3}`; for `n = 3` the directions must lie in the
/// plane of the time axis and the spatial part of `base`.
pub fn decay_probe(dist: &SphericalDist, base: &[f64], directions: &[Vec<f64>], taus: &[f64]) -> Result<DecayReport> {
    let n = dist.params.n();
    if n != 2 && n != 3 {
        return Err(CrownError::Unsupported(format!("decay probe in dimension {n}")));
    }
    if base.len() != n {
        return Err(CrownError::DimensionMismatch {
            expected: n,
            got: base.len(),
        });
    }
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0 && *t <= MAX_TAU)) {
        return Err(CrownError::InvalidParameter(format!("tau grid must be nonempty in (0, {MAX_TAU}]")));
    }
    let hw = PROBE_HALFWIDTH;
    let axis = probe_axis(base, directions);
    let p = [base[0], dot(&base[1..], &axis)];
    if n == 3 && (norm(&base[1..]) - p[1].abs()) > 1e-12 {
        return Err(CrownError::InvalidParameter("probe plane does not contain the base point".into()));
    }
    let mut planar = Vec::with_capacity(directions.len());
    for d in directions {
        if d.len() != n {
            return Err(CrownError::DimensionMismatch { expected: n, got: d.len() });
        }
        let u = unit(d).ok_or(CrownError::ZeroCovector)?;
        let x1 = dot(&u[1..], &axis);
        let off: f64 = u[1..].iter().zip(&axis).map(|(a, b)| (a - x1 * b).powi(2)).sum::<f64>().sqrt();
        if off > ANGULAR_TOL {
            return Err(CrownError::Unsupported(
                "probe directions must lie in the plane of the time axis and the base point".into(),
            ));
        }
        planar.push([u[0], x1]);
    }
    let extent = (p[0].abs() + hw).powi(2) + (p[1].abs() + hw).powi(2) + if n == 3 { hw * hw } else { 0.0 };
    let bound = ChartBound::Literal.value();
    if extent >= bound {
        return Err(CrownError::NotInChart { q: extent, bound });
    }
    let kernel = PlanarKernel::build(dist, p, hw)?;
    let mut raw = Vec::with_capacity(planar.len());
    let mut mass: f64 = 0.0;
    for xi in &planar {
        let (m, l1) = probe_direction(&kernel, p, *xi, taus, hw);
        mass = mass.max(l1);
        raw.push(m);
    }
    let floor = PROBE_FLOOR * mass;
    let rows = raw
        .into_iter()
        .zip(directions)
        .enumerate()
        .map(|(id, (magnitudes, d))| {
            let (exponent, rapid) = fit_decay(taus, &magnitudes, floor);
            DirectionDecay {
                id,
                xi: unit(d).expect("checked"),
                magnitudes,
                exponent,
                singular: !rapid,
            }
        })
        .collect();
    Ok(DecayReport {
        kind: dist.kind,
        base: base.to_vec(),
        taus: taus.to_vec(),
        floor,
        rows,
    })
}

/// One-dimensional reference distribution with its known singular
/// directions at the window center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeCase1D {
    pub name: String,
    pub center: f64,
    pub expect_positive: bool,
    pub expect_negative: bool,
    pub table: DecayTable,
}

impl ProbeCase1D {
    pub fn matches(&self) -> bool {
        !self.table.rapid_plus == self.expect_positive && !self.table.rapid_minus == self.expect_negative
    }
}

/// Delta, Heaviside, `(x ± i0)^{-1/2}` and both boundary values of the
/// kernel's `₂F₁` at `x = 1`, probed with the windowed transform for `τ ∈ [16, 512]`.
pub fn probe_1d_cases(params: &KernelParams) -> Result<Vec<ProbeCase1D>> {
    let hw = PROBE_1D_HALFWIDTH;
    let taus: Vec<f64> = default_tau_grid().into_iter().filter(|t| *t >= 16.0).collect();
    let at0 = TestFn1D::mollifier(0.0, hw)?;
    let at1 = TestFn1D::mollifier(1.0, hw)?;
    let mut out = Vec::new();
    for (name, d) in [("delta", ModelDist1D::DeltaDeriv { k: 0 }), ("heaviside", ModelDist1D::Heaviside)] {
        let table = windowed_fourier(&d, &at0, &taus)?;
        out.push(ProbeCase1D {
            name: name.into(),
            center: 0.0,
            expect_positive: true,
            expect_negative: true,
            table,
        });
    }
    for side in [CutSide::Plus, CutSide::Minus] {
        let d = ModelDist1D::I0Pow {
            lambda: Complex64::new(-0.5, 0.0),
            side,
        };
        let table = windowed_fourier(&d, &at0, &taus)?;
        let positive = side == CutSide::Plus;
        let name = if positive { "half_power_plus_i0" } else { "half_power_minus_i0" };
        out.push(ProbeCase1D {
            name: name.into(),
            center: 0.0,
            expect_positive: positive,
            expect_negative: !positive,
            table,
        });
    }
    let triple = params.triple();
    for side in [CutSide::Plus, CutSide::Minus] {
        let f = |t: f64| -> Complex64 {
            eval_one_minus(&triple, -t, side)
                .map(|e| e.value)
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
        };
        let table = windowed_fourier_fn(f, &at1, &taus)?;
        if table.plus.iter().chain(&table.minus).any(|m| !m.is_finite()) {
            return Err(CrownError::NonConvergent {
                what: "windowed transform of the boundary value",
                terms: 0,
            });
        }
        let positive = side == CutSide::Plus;
        let name = if positive { "hypergeometric_plus_i0" } else { "hypergeometric_minus_i0" };
        out.push(ProbeCase1D {
            name: name.into(),
            center: 1.0,
            expect_positive: positive,
            expect_negative: !positive,
            table,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyp2f1::parse_complex;
    use crate::Isometry;

    fn params(n: usize, lambda: &str) -> KernelParams {
        KernelParams::admissible(n, parse_complex(lambda).unwrap()).unwrap()
    }

    fn dir(v: &[f64], xi: &[f64]) -> CotangentDir {
        CotangentDir::new(v.to_vec(), xi.to_vec()).unwrap()
    }

    #[test]
    fn symbol_and_char() {
        assert_eq!(principal_symbol(&[1.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(principal_symbol(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert!(char_membership(&dir(&[0.0; 3], &[1.0, 1.0, 0.0])));
        assert!(!char_membership(&dir(&[0.0; 3], &[1.0, 0.0, 0.0])));
        assert_eq!(
            char_membership(&dir(&[0.0; 3], &[2.0, 2.0, 0.0])),
            char_membership(&dir(&[0.0; 3], &[1.0, 1.0, 0.0]))
        );
        assert!(matches!(principal_symbol(&[0.0, 0.0]), Err(CrownError::ZeroCovector)));
        assert!(matches!(CotangentDir::new(vec![0.0, 0.0], vec![0.0, 0.0]), Err(CrownError::ZeroCovector)));
    }

    #[test]
    fn strip_closed_form_and_rk4() {
        let s = hamiltonian_flow(&[0.0, 0.0], &[1.0, -1.0], 2.0).unwrap();
        assert_eq!(s.position(1.0), vec![2.0, 2.0]);
        assert_eq!(s.position(2.0), vec![4.0, 4.0]);
        for sample in s.samples(10) {
            assert_eq!(sample.xi, vec![1.0, -1.0]);
            assert_eq!(principal_symbol(&sample.xi).unwrap(), 0.0);
        }
        assert!(s.rk4_deviation(50) <= RK4_TOL);
        let v = s.velocity();
        assert_eq!(form(&v, &v), 0.0);
        let s3 = hamiltonian_flow(&[0.1, 0.2, -0.3], &[0.6, 0.0, -0.5], 3.0);
        assert!(matches!(s3, Err(CrownError::NonCharacteristic)));
        let s3 = hamiltonian_flow(&[0.1, 0.2, -0.3], &[1.0, 0.6, -0.8], 3.0).unwrap();
        assert!(s3.rk4_deviation(37) <= RK4_TOL);
    }

    #[test]
    fn df_matches_finite_differences() {
        let f = |v: &[f64]| (1.0 + cs_real(chart_q(v)).0) / 2.0;
        for v in [[0.3, 0.1, -0.2], [0.05, 0.6, 0.2], [-0.7, 0.1, 0.0], [0.4, 0.4, 0.0]] {
            let g = df_pullback(&v);
            for j in 0..3 {
                let h = 1e-5;
                let mut a = v;
                let mut b = v;
                a[j] += h;
                b[j] -= h;
                let fd = (f(&a) - f(&b)) / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-8, "{v:?} {j}: {fd} vs {}", g[j]);
            }
        }
        assert!(df_pullback(&[0.0, 0.0, 0.0]).iter().all(|x| *x == 0.0));
        let g = df_pullback(&[0.5, 0.3, 0.4]);
        assert!(aligned(&unit(&g).unwrap(), &[0.5, -0.3, -0.4]));
        for v in [[0.2, 0.1, 0.0], [1e-3, 0.0, 0.0], [0.0, 0.7, 0.3]] {
            assert!(norm(&df_pullback(&v)) > 0.0);
        }
    }

    #[test]
    fn exp_differential_matches_finite_differences() {
        let chart = Chart::at_en(3);
        for v in [[0.3, 0.1, -0.2], [0.0004, 0.0002, 0.0], [0.5, 0.5, 0.0], [-0.2, 0.9, 0.1]] {
            let cols = exp_differential(&v);
            for j in 0..3 {
                let h = 1e-6;
                let mut a = v;
                let mut b = v;
                a[j] += h;
                b[j] -= h;
                let (ya, yb) = (chart.point_raw(&a), chart.point_raw(&b));
                for k in 0..4 {
                    let fd = (ya[k] - yb[k]) / (2.0 * h);
                    assert!((fd - cols[j][k]).abs() < 1e-8, "{v:?} {j} {k}");
                }
            }
        }
    }

    #[test]
    fn ambient_round_trip() {
        let x = Isometry::boost(3, 0.4)
            .compose(&Isometry::rotation(3, 1, 2, 0.7).unwrap())
            .apply_point(&DeSitterPoint::e_n(3));
        for d in sample_conic(3, 200, 5) {
            let (y, eta) = ambient_covector(&x, &d).unwrap();
            let back = chart_covector(&x, &y, &eta).unwrap();
            for (a, b) in back.base.iter().zip(&d.base) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in back.xi.iter().zip(&d.xi) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!(form(y.coords(), &eta).abs() < 1e-12);
        }
    }

    #[test]
    fn predicted_membership_examples() {
        let x = DeSitterPoint::e_n(3);
        let psi = predicted_wf(SphericalKind::Psi, &x).unwrap();
        let tilde = predicted_wf(SphericalKind::PsiTilde, &x).unwrap();
        assert!(wf_contains(&psi, &dir(&[0.5, 0.3, 0.4], &[-0.5, 0.3, 0.4])));
        assert!(wf_contains(&psi, &dir(&[0.5, 0.3, 0.4], &[-5.0, 3.0, 4.0])));
        assert!(!wf_contains(&psi, &dir(&[0.5, 0.3, 0.4], &[0.5, -0.3, -0.4])));
        assert!(wf_contains(&tilde, &dir(&[0.5, 0.3, 0.4], &[0.5, -0.3, -0.4])));
        assert!(wf_contains(&psi, &dir(&[-0.5, 0.3, 0.4], &[-0.5, -0.3, -0.4])));
        assert!(wf_contains(&psi, &dir(&[0.0; 3], &[-1.0, 0.6, 0.8])));
        assert!(!wf_contains(&psi, &dir(&[0.0; 3], &[1.0, 0.6, 0.8])));
        assert!(!wf_contains(&psi, &dir(&[0.0; 3], &[-1.0, 0.0, 0.0])));
        assert!(!wf_contains(&psi, &dir(&[0.5, 0.1, 0.0], &[-0.5, 0.1, 0.0])));
        assert!(predicted_wf(SphericalKind::Difference, &x).is_err());
    }

    #[test]
    fn pullback_pieces() {
        let f = pullback_wf(ModelWf::of_side(CutSide::Minus), ModelArgument::Direct, Region::Future).unwrap();
        let x = DeSitterPoint::e_n(2);
        let spec = WfSpec {
            kind: WfKind::UnionSpec,
            basepoint: x.clone(),
            pieces: vec![f],
        };
        assert!(wf_contains(&spec, &dir(&[0.3, 0.3], &[-0.3, 0.3])));
        let p = pullback_wf(ModelWf::of_side(CutSide::Plus), ModelArgument::Direct, Region::Past).unwrap();
        let spec = WfSpec {
            kind: WfKind::UnionSpec,
            basepoint: x,
            pieces: vec![p],
        };
        assert!(wf_contains(&spec, &dir(&[-0.3, 0.3], &[-0.3, -0.3])));
        assert!(pullback_wf(ModelWf::Positive, ModelArgument::Direct, Region::Full).is_err());
    }

    #[test]
    fn apex_closure_signs() {
        let x = DeSitterPoint::e_n(3);
        let psi = assemble_wf(SphericalKind::Psi, &x).unwrap();
        assert!(psi.pieces.contains(&WfPiece::Apex { xi0_sign: -1.0 }));
        assert!(!psi.pieces.contains(&WfPiece::Apex { xi0_sign: 1.0 }));
        let tilde = assemble_wf(SphericalKind::PsiTilde, &x).unwrap();
        assert!(tilde.pieces.contains(&WfPiece::Apex { xi0_sign: 1.0 }));
        assert!(apex_closure(&[], 3).is_empty());
    }

    #[test]
    fn pipeline_identity_and_set_laws() {
        for n in [2, 3, 4] {
            let x = DeSitterPoint::e_n(n);
            let samples = sample_conic(n, 10_000, 11 + n as u64);
            let members = samples
                .iter()
                .filter(|d| wf_contains(&predicted_wf(SphericalKind::Psi, &x).unwrap(), d))
                .count();
            assert!(members > 1000, "too few members: {members}");
            for kind in [
                SphericalKind::Psi,
                SphericalKind::PsiTilde,
                SphericalKind::PhiPow,
                SphericalKind::PhiTildePow,
            ] {
                let predicted = predicted_wf(kind, &x).unwrap();
                let assembled = assemble_wf(kind, &x).unwrap();
                assert_eq!(membership_mismatches(&predicted, &assembled, &samples), 0, "{kind:?} n={n}");
            }
            let psi = predicted_wf(SphericalKind::Psi, &x).unwrap();
            let tilde = predicted_wf(SphericalKind::PsiTilde, &x).unwrap();
            let phi = predicted_wf(SphericalKind::PhiPow, &x).unwrap();
            assert_eq!(antipode_mismatches(&tilde, &psi, &samples), 0);
            assert_eq!(overlap_count(&psi, &tilde, &samples), 0);
            assert_eq!(membership_mismatches(&psi, &phi, &samples), 0);
            assert_eq!(
                samples
                    .iter()
                    .filter(|d| wf_contains(&psi, d) && wf_contains(&psi, &d.antipode()))
                    .count(),
                0
            );
            let cover = cone_char_samples(n, 2000, 3);
            assert!(cover.iter().all(char_membership));
            assert!(cover.iter().all(|d| wf_contains(&psi, d) || wf_contains(&tilde, d)));
        }
    }

    #[test]
    fn equivariance() {
        let en = DeSitterPoint::e_n(3);
        let g = Isometry::boost(3, 0.6)
            .compose(&Isometry::rotation(3, 1, 3, 0.5).unwrap())
            .compose(&Isometry::boost_axis(3, 2, -0.3).unwrap());
        let xg = g.apply_point(&en);
        let samples = sample_conic(3, 2000, 21);
        for kind in [SphericalKind::Psi, SphericalKind::PsiTilde, SphericalKind::PhiPow] {
            let s0 = predicted_wf(kind, &en).unwrap();
            let s1 = predicted_wf(kind, &xg).unwrap();
            let mut hits = 0;
            for d in &samples {
                let (y, eta) = ambient_covector(&en, d).unwrap();
                let a = wf_contains_ambient(&s0, &y, &eta).unwrap();
                let b = wf_contains_ambient(&s1, &g.apply_point(&y), &g.apply_raw(&eta)).unwrap();
                assert_eq!(a, b, "{kind:?} {d:?}");
                hits += a as usize;
            }
            assert!(hits > 200);
        }
    }

    #[test]
    fn members_export() {
        let x = DeSitterPoint::e_n(2);
        let spec = predicted_wf(SphericalKind::PsiTilde, &x).unwrap();
        let m = spec_members(&spec, 20);
        assert_eq!(m.len(), 40);
        assert!(m.iter().all(|d| wf_contains(&spec, d)));
    }

    #[test]
    fn chebyshev_table_accuracy() {
        let t = ChebTable::build(-0.2, 0.15, |a| Ok(Complex64::new(a.abs().ln(), a.exp()))).unwrap();
        for k in 1..400 {
            let a = -0.2 + 0.35 * k as f64 / 400.0 + 1.3e-4;
            if a.abs() < 1e-10 {
                continue;
            }
            let v = t.eval(a);
            assert!((v - Complex64::new(a.abs().ln(), a.exp())).norm() < 1e-11, "{a}");
        }
    }

    fn assert_probe_agrees(p: KernelParams, kinds: &[SphericalKind], bases: &[Vec<f64>]) {
        for &kind in kinds {
            let dist = SphericalDist::at_en(kind, p);
            let spec = predicted_wf(kind, &dist.basepoint).unwrap();
            for base in bases {
                let dirs = plane_directions(base, 16);
                let r = decay_probe(&dist, base, &dirs, &PROBE_TAUS).unwrap();
                for row in &r.rows {
                    let predicted = wf_contains(&spec, &dir(base, &row.xi));
                    assert_eq!(
                        row.singular, predicted,
                        "{kind:?} {base:?} {:?} exp {} mags {:?}",
                        row.xi, row.exponent, row.magnitudes
                    );
                }
            }
        }
    }

    #[test]
    fn probe_classifies_n2() {
        let bases = [vec![0.3, 0.3], vec![-0.25, 0.25], vec![0.05, 0.4]];
        assert_probe_agrees(params(2, "0.3i"), &[SphericalKind::Psi, SphericalKind::PsiTilde], &bases);
    }

    #[test]
    fn probe_classifies_n3() {
        let r = 0.3 / 2f64.sqrt();
        let bases = [vec![0.3, r, r], vec![-0.25, 0.0, -0.25], vec![0.05, 0.4, 0.0]];
        assert_probe_agrees(
            params(3, "0.5"),
            &[
                SphericalKind::Psi,
                SphericalKind::PsiTilde,
                SphericalKind::PhiPow,
                SphericalKind::PhiTildePow,
            ],
            &bases,
        );
    }

    #[test]
    fn power_kernel_is_constant_in_two_dimensions() {
        let dist = SphericalDist::at_en(SphericalKind::PhiPow, params(2, "0.3i"));
        for (q, t) in [(-0.2, 1.0), (-0.1, -1.0), (0.3, 1.0)] {
            assert_eq!(chart_value(&dist, q, t).unwrap(), Complex64::new(1.0, 0.0));
        }
        let r = decay_probe(&dist, &[0.3, 0.3], &plane_directions(&[0.3, 0.3], 8), &PROBE_TAUS).unwrap();
        assert!(r.rows.iter().all(|row| !row.singular));
    }

    #[test]
    fn one_dimensional_cases_classify() {
        let p = KernelParams::admissible(3, crate::hyp2f1::parse_complex("0.5").unwrap()).unwrap();
        for case in probe_1d_cases(&p).unwrap() {
            assert!(case.matches(), "{} {:?}", case.name, case.table);
        }
    }
}
