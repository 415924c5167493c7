//! Spherical kernels on the crown and their boundary values on `dS^n`.
//!
//! The analytic kernels are
//!
//! ```text
//! Ψ(z, w) = ₂F₁(ρ+λ, ρ-λ; n/2; (1 + [z, w̄])/2)
//! Φ(z, w) = ((1 - [z, w̄])/2)^μ
//! ```
//!
//! Their limits along `g·z_t → x` define distributions on `dS^n`, which are
//! evaluated pointwise off the light cone of `x` and paired with test
//! functions through a cone-adapted polar quadrature in the chart at `x`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dist1d::{i0_decompose, pointwise as pointwise_1d, profile_derivative, ModelDist1D};
use crate::error::{CrownError, Result};
use crate::hyp2f1::{eval_one_minus, family_jump_at_gap, gauss_2f1, CutSide, HypTriple, SpectralParam};
use crate::lorentz::{
    approach_point, classify_causal_with, crown_membership, cs_real, exp_raw, form, log_raw, minkowski_form, Branch, CausalTag, ChartBound, ModelDims,
};
use crate::quad::{cap_panels, gauss_legendre, graded_panels, pairwise_sum, richardson};
use crate::{Chart, ComplexPoint, CrownPoint, DeSitterPoint, Isometry, RealPoint};

/// Cone tolerance used by [`eval_pointwise`].
pub const ONCONE_TOL: f64 = 1e-8;
pub const GRADING_RATIO: f64 = 0.5;
pub const GRADING_LEVELS: usize = 20;
/// Gauss–Legendre order on every panel.
pub const PANEL_ORDER: usize = 10;
pub const DEFAULT_T_GRID: [f64; 5] = [1.55, 1.56, 1.565, 1.568, 1.57];
/// Disjoint from [`DEFAULT_T_GRID`]; used to test stability of the limit.
pub const ALTERNATE_T_GRID: [f64; 5] = [1.545, 1.558, 1.563, 1.567, 1.5695];
pub const DEFAULT_ORDER: usize = 2;
/// Spread above which an extrapolated pairing is rejected.
pub const CAUCHY_TOL: f64 = 1e-4;
/// Largest test-function radius in chart units.
pub const MAX_TEST_RADIUS: f64 = 0.5;
pub const HERMITIAN_TOL: f64 = 1e-10;

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `(n, λ)` together with `m² = ρ² - λ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub dims: ModelDims,
    pub lambda: SpectralParam,
    pub msq: Complex64,
}

impl KernelParams {
    pub fn new(dims: ModelDims, lambda: SpectralParam) -> Self {
        let rho = dims.rho();
        let l = lambda.value();
        Self {
            dims,
            lambda,
            msq: rho * rho - l * l,
        }
    }

    /// Checked construction from raw `n` and `λ`.
    pub fn admissible(n: usize, lambda: Complex64) -> Result<Self> {
        let dims = ModelDims::new(n)?;
        Ok(Self::new(dims, SpectralParam::new(lambda, dims)?))
    }

    pub fn triple(&self) -> HypTriple {
        HypTriple::family(self.dims, self.lambda)
    }

    pub fn n(&self) -> usize {
        self.dims.n()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphericalKind {
    Psi,
    PsiTilde,
    PhiPow,
    PhiTildePow,
    /// `Ψ - Ψ̃` at the same base point.
    Difference,
}

impl SphericalKind {
    pub fn is_phi(self) -> bool {
        matches!(self, SphericalKind::PhiPow | SphericalKind::PhiTildePow)
    }

    /// Crown branch of the approach path.
    pub fn branch(self) -> Branch {
        match self {
            SphericalKind::Psi | SphericalKind::PhiPow | SphericalKind::Difference => Branch::Forward,
            SphericalKind::PsiTilde | SphericalKind::PhiTildePow => Branch::Backward,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "psi" => Ok(Self::Psi),
            "psitilde" => Ok(Self::PsiTilde),
            "phi" | "phipow" => Ok(Self::PhiPow),
            "phitilde" | "phitildepow" => Ok(Self::PhiTildePow),
            "difference" | "diff" => Ok(Self::Difference),
            _ => Err(CrownError::InvalidParameter(format!("unknown kernel kind '{text}'"))),
        }
    }
}

/// A member of the boundary-value family attached to a base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalDist {
    pub kind: SphericalKind,
    pub basepoint: DeSitterPoint,
    pub params: KernelParams,
    /// Exponent `(2 - n)/2` of the power kernels.
    pub phipow_exponent: Complex64,
}

impl SphericalDist {
    pub fn new(kind: SphericalKind, basepoint: DeSitterPoint, params: KernelParams) -> Result<Self> {
        if basepoint.n() != params.n() {
            return Err(CrownError::DimensionMismatch {
                expected: params.n(),
                got: basepoint.n(),
            });
        }
        let nf = params.n() as f64;
        Ok(Self {
            kind,
            basepoint,
            params,
            phipow_exponent: Complex64::new((2.0 - nf) / 2.0, 0.0),
        })
    }

    pub fn at_en(kind: SphericalKind, params: KernelParams) -> Self {
        Self::new(kind, DeSitterPoint::e_n(params.n()), params).expect("dimensions agree")
    }

    /// Same distribution moved to `g · x`.
    pub fn moved(&self, g: &Isometry) -> Self {
        Self {
            basepoint: g.apply_point(&self.basepoint),
            ..self.clone()
        }
    }

    /// `m²` for the `Ψ` kinds, `(n/2)((n-2)/2)` for the power kernels.
    pub fn eigenvalue(&self) -> Complex64 {
        if self.kind.is_phi() {
            let nf = self.params.n() as f64;
            Complex64::new(nf / 2.0 * (nf - 2.0) / 2.0, 0.0)
        } else {
            self.params.msq
        }
    }

    /// Delta layer on the cone carried by the power kernels in even
    /// dimension `n ≥ 4`; never evaluated pointwise.
    pub fn delta_term(&self) -> Result<Option<DeltaTerm>> {
        let n = self.params.n();
        if !self.kind.is_phi() || n % 2 == 1 || n < 4 {
            return Ok(None);
        }
        let future_side = if self.kind == SphericalKind::PhiPow {
            CutSide::Plus
        } else {
            CutSide::Minus
        };
        let pick = |side: CutSide| -> Result<(Complex64, usize)> {
            for (coef, d) in i0_decompose(self.phipow_exponent, side)? {
                if let ModelDist1D::DeltaDeriv { k } = d {
                    return Ok((coef, k));
                }
            }
            Err(CrownError::Unsupported("power kernel without a delta layer".into()))
        };
        let (future, order) = pick(future_side)?;
        let (past, _) = pick(future_side.flipped())?;
        Ok(Some(DeltaTerm {
            order,
            future_coefficient: future,
            past_coefficient: past,
        }))
    }
}

/// Symbolic `c δ^{(k)}((1 - [x,y])/2)` with separate coefficients on the two
/// cone components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaTerm {
    pub order: usize,
    pub future_coefficient: Complex64,
    pub past_coefficient: Complex64,
}

/// `Ψ(z, w)` for crown points on the same branch.
pub fn psi_kernel(params: &KernelParams, z: &CrownPoint, w: &CrownPoint) -> Result<Complex64> {
    if z.branch != w.branch {
        return Err(CrownError::MixedBranches);
    }
    psi_kernel_raw(params, &z.to_complex(), &w.to_complex())
}

/// `Ψ(z, w)` without crown checks; `w` may be a real point.
pub fn psi_kernel_raw(params: &KernelParams, z: &ComplexPoint, w: &ComplexPoint) -> Result<Complex64> {
    let s = minkowski_form(z, &w.conj())?;
    Ok(gauss_2f1(&params.triple(), (1.0 + s) / 2.0)?.value)
}

/// Principal power `((1 - [z, w̄])/2)^μ`.
pub fn phi_kernel(z: &ComplexPoint, w: &ComplexPoint, exponent: Complex64) -> Result<Complex64> {
    let base = (1.0 - minkowski_form(z, &w.conj())?) / 2.0;
    principal_power(base, exponent)
}

fn principal_power(base: Complex64, exponent: Complex64) -> Result<Complex64> {
    if base.im == 0.0 && base.re <= 0.0 {
        return Err(CrownError::BranchViolation { re: base.re, im: base.im });
    }
    if exponent == c0() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok((exponent * base.ln()).exp())
}

/// Largest relative Cauchy–Riemann defect of `Ψ` at `(z, w)`: holomorphic
/// in `z`, antiholomorphic in `w`, probed along every coordinate direction.
pub fn sesquiholomorphy_defect(params: &KernelParams, z: &ComplexPoint, w: &ComplexPoint, h: f64) -> Result<f64> {
    let d = z.len();
    let f = |a: &ComplexPoint, b: &ComplexPoint| psi_kernel_raw(params, a, b);
    let shift = |p: &ComplexPoint, j: usize, by: Complex64| {
        let mut q = p.clone();
        q.coords[j] += by;
        q
    };
    let scale = f(z, w)?.norm().max(1e-300);
    let mut worst: f64 = 0.0;
    let (hr, hi) = (Complex64::new(h, 0.0), Complex64::new(0.0, h));
    for j in 0..d {
        let dr = (f(&shift(z, j, hr), w)? - f(&shift(z, j, -hr), w)?) / (2.0 * h);
        let di = (f(&shift(z, j, hi), w)? - f(&shift(z, j, -hi), w)?) / (2.0 * h);
        worst = worst.max((di - Complex64::i() * dr).norm() / scale);
        let dr = (f(z, &shift(w, j, hr))? - f(z, &shift(w, j, -hr))?) / (2.0 * h);
        let di = (f(z, &shift(w, j, hi))? - f(z, &shift(w, j, -hi))?) / (2.0 * h);
        worst = worst.max((di + Complex64::i() * dr).norm() / scale);
    }
    Ok(worst)
}

/// Value of a boundary distribution at a point off the cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointValue {
    pub value: Complex64,
    pub tag: CausalTag,
}

/// Side of the cut approached inside the future (`true`) or past cone;
/// `None` for the difference kernel.
pub fn boundary_side(kind: SphericalKind, future: bool) -> Option<CutSide> {
    let base = match kind {
        SphericalKind::Psi | SphericalKind::PsiTilde => {
            if future {
                CutSide::Minus
            } else {
                CutSide::Plus
            }
        }
        SphericalKind::PhiPow | SphericalKind::PhiTildePow => {
            if future {
                CutSide::Plus
            } else {
                CutSide::Minus
            }
        }
        SphericalKind::Difference => return None,
    };
    Some(if matches!(kind, SphericalKind::Psi | SphericalKind::PhiPow) {
        base
    } else {
        base.flipped()
    })
}

/// Boundary value at chart coordinates with `[v,v] = q` and time sign
/// `sign(v_0)`.
pub fn chart_value(dist: &SphericalDist, q: f64, time_sign: f64) -> Result<Complex64> {
    let tag = if q > 0.0 {
        CausalTag::Outside
    } else if q < 0.0 {
        if time_sign > 0.0 {
            CausalTag::FuturePlus
        } else {
            CausalTag::PastMinus
        }
    } else {
        return Err(CrownError::OnConeSingularity);
    };
    boundary_value(dist, half_gap_from_q(q), tag)
}

/// `(1 - [x, y]) / 2 = [y - x, y - x] / 4` at chart parameter `q`.
fn half_gap_from_q(q: f64) -> f64 {
    if q >= 0.0 {
        (q.sqrt() / 2.0).sin().powi(2)
    } else {
        -((-q).sqrt() / 2.0).sinh().powi(2)
    }
}

fn half_gap(x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    form(&d, &d) / 4.0
}

/// Boundary value given `g = (1 - [x, y]) / 2` and the causal position of `y`.
fn boundary_value(dist: &SphericalDist, g: f64, tag: CausalTag) -> Result<Complex64> {
    let params = &dist.params;
    let future = match tag {
        CausalTag::OnCone => return Err(CrownError::OnConeSingularity),
        CausalTag::Outside => None,
        CausalTag::FuturePlus => Some(true),
        CausalTag::PastMinus => Some(false),
    };
    let floor = 2.0 * f64::EPSILON;
    let g = match future {
        None if g <= 0.0 => floor,
        Some(_) if g >= 0.0 => -floor,
        _ => g,
    };
    match dist.kind {
        SphericalKind::Psi | SphericalKind::PsiTilde => {
            let side = boundary_side(dist.kind, future.unwrap_or(true)).expect("psi kinds have a side");
            Ok(eval_one_minus(&params.triple(), g, side)?.value)
        }
        SphericalKind::PhiPow | SphericalKind::PhiTildePow => {
            let side = boundary_side(dist.kind, future != Some(false)).expect("power kinds have a side");
            pointwise_1d(
                &ModelDist1D::I0Pow {
                    lambda: dist.phipow_exponent,
                    side,
                },
                g,
            )
            .ok_or(CrownError::OnConeSingularity)
        }
        SphericalKind::Difference => match future {
            None => Ok(c0()),
            Some(fut) => {
                let jump = family_jump_at_gap(params.dims, params.lambda, -g)?;
                Ok(if fut { jump } else { -jump })
            }
        },
    }
}

/// Pointwise value off the light cone of the base point.
pub fn eval_pointwise(dist: &SphericalDist, y: &DeSitterPoint) -> Result<PointValue> {
    if y.n() != dist.basepoint.n() {
        return Err(CrownError::DimensionMismatch {
            expected: dist.basepoint.n(),
            got: y.n(),
        });
    }
    let tag = classify_causal_with(&dist.basepoint, y, ONCONE_TOL);
    let g = half_gap(dist.basepoint.coords(), y.coords());
    Ok(PointValue {
        value: boundary_value(dist, g, tag)?,
        tag,
    })
}

/// Analytic kernel at `g·z_t` (or `g·z̄_t`) against a real point, where
/// `g` is the standard frame of the base point.
pub fn approach_value(dist: &SphericalDist, t: f64, y: &DeSitterPoint) -> Result<Complex64> {
    let g = Chart::standard(&dist.basepoint).frame;
    match dist.kind {
        SphericalKind::Difference => {
            let a = SphericalDist {
                kind: SphericalKind::Psi,
                ..dist.clone()
            };
            let b = SphericalDist {
                kind: SphericalKind::PsiTilde,
                ..dist.clone()
            };
            Ok(approach_value(&a, t, y)? - approach_value(&b, t, y)?)
        }
        kind => {
            let z = approach_point(&g, t, kind.branch())?;
            let w = y.point().complexify();
            if kind.is_phi() {
                phi_kernel(&z, &w, dist.phipow_exponent)
            } else {
                psi_kernel_raw(&dist.params, &z, &w)
            }
        }
    }
}

/// Kernel at the approach parameter `t` in the chart at `e_n`, in terms of
/// `C = C([v,v])` and `S([v,v]) v_0`.
fn chart_approach_value(dist: &SphericalDist, triple: &HypTriple, t: f64, c: f64, sv0: f64) -> Result<Complex64> {
    let (st, ct) = (t.sin(), t.cos());
    match dist.kind {
        SphericalKind::Psi => Ok(gauss_2f1(triple, Complex64::new((1.0 + st * c) / 2.0, -ct * sv0 / 2.0))?.value),
        SphericalKind::PsiTilde => Ok(gauss_2f1(triple, Complex64::new((1.0 + st * c) / 2.0, ct * sv0 / 2.0))?.value),
        SphericalKind::Difference => Ok(gauss_2f1(triple, Complex64::new((1.0 + st * c) / 2.0, -ct * sv0 / 2.0))?.value
            - gauss_2f1(triple, Complex64::new((1.0 + st * c) / 2.0, ct * sv0 / 2.0))?.value),
        SphericalKind::PhiPow => principal_power(Complex64::new((1.0 - st * c) / 2.0, ct * sv0 / 2.0), dist.phipow_exponent),
        SphericalKind::PhiTildePow => principal_power(Complex64::new((1.0 - st * c) / 2.0, -ct * sv0 / 2.0), dist.phipow_exponent),
    }
}

/// Smooth bump `w · exp(-1/(1-|v|²/r²)) · e^{i k·v}` in the chart of a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFnDS {
    pub frame: Isometry,
    pub radius: f64,
    pub weight: Complex64,
    /// Wave vector `k` in chart coordinates.
    pub wave: Vec<f64>,
}

impl TestFnDS {
    /// Bump of the given radius centered at `chart_base`, standard frame.
    pub fn new(chart_base: &DeSitterPoint, radius: f64) -> Result<Self> {
        Self::with_frame(Chart::standard(chart_base).frame, radius)
    }

    pub fn with_frame(frame: Isometry, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < MAX_TEST_RADIUS) {
            return Err(CrownError::InvalidParameter(format!(
                "test radius must lie in (0, {MAX_TEST_RADIUS}), got {radius}"
            )));
        }
        let n = frame.n();
        Ok(Self {
            frame,
            radius,
            weight: Complex64::new(1.0, 0.0),
            wave: vec![0.0; n],
        })
    }

    /// Bump centered at `Exp_{e_n}(v)` for chart coordinates `v` at `e_n`.
    pub fn at_chart_point(v: &[f64], radius: f64) -> Result<Self> {
        let chart = Chart::at_en(v.len());
        Self::new(&chart.point(v)?, radius)
    }

    pub fn with_weight(mut self, weight: Complex64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_wave(mut self, wave: Vec<f64>) -> Result<Self> {
        if wave.len() != self.n() {
            return Err(CrownError::DimensionMismatch {
                expected: self.n(),
                got: wave.len(),
            });
        }
        self.wave = wave;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn chart_base(&self) -> DeSitterPoint {
        self.frame.apply_point(&DeSitterPoint::e_n(self.n()))
    }

    pub fn conj(&self) -> Self {
        Self {
            weight: self.weight.conj(),
            wave: self.wave.iter().map(|k| -k).collect(),
            ..self.clone()
        }
    }

    /// `φ ∘ h^{-1}`.
    pub fn transformed(&self, h: &Isometry) -> Self {
        Self {
            frame: h.compose(&self.frame),
            ..self.clone()
        }
    }

    pub fn value(&self, y: &DeSitterPoint) -> Complex64 {
        PreparedTest::new(self, None).value(y.coords())
    }
}

/// Test function with its frame inverse precomputed.
struct PreparedTest {
    n: usize,
    base: Vec<f64>,
    finv: Vec<Vec<f64>>,
    /// Frame columns `f_j`, `j < n`.
    cols: Vec<Vec<f64>>,
    radius: f64,
    weight: Complex64,
    wave: Vec<f64>,
    s_range: (f64, f64),
}

impl PreparedTest {
    /// `reduce` maps the test function by `φ ∘ reduce^{-1}`.
    fn new(test: &TestFnDS, reduce: Option<&Isometry>) -> Self {
        let frame = match reduce {
            Some(g) => g.compose(&test.frame),
            None => test.frame.clone(),
        };
        let n = frame.n();
        let base: Vec<f64> = (0..=n).map(|i| frame.get(i, n)).collect();
        let finv = frame.inverse().rows();
        let cols = (0..n).map(|j| (0..=n).map(|i| frame.get(i, j)).collect()).collect();
        let r = test.radius;
        Self {
            n,
            base,
            finv,
            cols,
            radius: r,
            weight: test.weight,
            wave: test.wave.clone(),
            s_range: (r.cos() - 1e-12, r.cosh() + 1e-12),
        }
    }

    fn value(&self, y: &[f64]) -> Complex64 {
        let s = form(&self.base, y);
        if s < self.s_range.0 || s > self.s_range.1 {
            return c0();
        }
        let q = if s == 1.0 {
            0.0
        } else if s < 1.0 {
            s.acos().powi(2)
        } else {
            -s.acosh().powi(2)
        };
        let (_, sq) = cs_real(q);
        // finv · base = e_n, so only the y part survives in the first n slots
        let mut rho2 = 0.0;
        let mut phase = 0.0;
        for j in 0..self.n {
            let row = &self.finv[j];
            let acc: f64 = row.iter().zip(y).map(|(a, b)| a * b).sum();
            let loc = acc / sq;
            rho2 += loc * loc;
            phase += loc * self.wave[j];
        }
        let rho = rho2.sqrt();
        if rho >= self.radius {
            return c0();
        }
        self.weight * profile_derivative(0, rho / self.radius) * Complex64::from_polar(1.0, phase)
    }
}

/// Grid of approach parameters and the extrapolation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachProtocol {
    pub t_grid: Vec<f64>,
    pub order: usize,
}

impl Default for ApproachProtocol {
    fn default() -> Self {
        Self {
            t_grid: DEFAULT_T_GRID.to_vec(),
            order: DEFAULT_ORDER,
        }
    }
}

impl ApproachProtocol {
    pub fn new(t_grid: Vec<f64>, order: usize) -> Result<Self> {
        if t_grid.len() < order + 1 || order == 0 {
            return Err(CrownError::InvalidParameter(format!(
                "order {order} needs at least {} grid points",
                order + 1
            )));
        }
        if t_grid.iter().any(|&t| !(t > 1.0 && t < FRAC_PI_2)) {
            return Err(CrownError::InvalidParameter("approach parameters must lie in (1, pi/2)".into()));
        }
        if t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CrownError::InvalidParameter("approach parameters must increase strictly".into()));
        }
        Ok(Self { t_grid, order })
    }

    pub fn alternate() -> Self {
        Self {
            t_grid: ALTERNATE_T_GRID.to_vec(),
            order: DEFAULT_ORDER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRoute {
    /// Extrapolated limit of the analytic kernel along the approach path.
    Approach,
    /// Quadrature of the pointwise boundary value.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelPairing {
    pub value: Complex64,
    pub err_est: f64,
    pub route: PairRoute,
    /// `(t, pairing at t)` for the approach route.
    pub samples: Vec<(f64, Complex64)>,
}

/// Both routes; the direct one only exists for `n ≤ 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub primary: KernelPairing,
    pub secondary: Option<KernelPairing>,
}

impl PairReport {
    pub fn value(&self) -> Complex64 {
        self.primary.value
    }

    /// `|primary - secondary|` when both routes ran.
    pub fn route_gap(&self) -> Option<f64> {
        self.secondary.as_ref().map(|s| (s.value - self.primary.value).norm())
    }
}

const RADIAL_PANELS: f64 = 10.0;
const ANGULAR_CAP: f64 = 0.05;
const CAP_PANELS: usize = 10;

/// Quadrature node in the chart at `e_n` with the test function and all
/// geometric weights folded into `m`.
#[derive(Debug, Clone, Copy)]
struct Node {
    c: f64,
    sv0: f64,
    q: f64,
    v0: f64,
    m: Complex64,
}

/// 1-D rule on `[a, b]`; ends flagged singular are graded and get the
/// substitution `x = end ± (len) u²` on the panel touching them.
pub(crate) fn singular_rule(a: f64, b: f64, sing_a: bool, sing_b: bool, cap: f64) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    if sing_a && sing_b {
        let mid = 0.5 * (a + b);
        let mut out = singular_rule(a, mid, true, false, cap);
        out.extend(singular_rule(mid, b, false, true, cap));
        return out;
    }
    let (gx, gw) = gauss_legendre(PANEL_ORDER);
    let mut out = Vec::new();
    let panels = if sing_a || sing_b {
        cap_panels(graded_panels(a, b, sing_a, GRADING_RATIO, GRADING_LEVELS), cap)
    } else {
        cap_panels(vec![(a, b)], cap)
    };
    for (lo, hi) in panels {
        let touches = (sing_a && lo == a) || (sing_b && hi == b);
        for (x, w) in gx.iter().zip(&gw) {
            let u = 0.5 * (x + 1.0);
            if touches {
                let len = hi - lo;
                let (node, jac) = if sing_a {
                    (lo + len * u * u, 2.0 * len * u)
                } else {
                    (hi - len * u * u, 2.0 * len * u)
                };
                out.push((node, 0.5 * w * jac));
            } else {
                out.push((lo + (hi - lo) * u, 0.5 * w * (hi - lo)));
            }
        }
    }
    out
}

/// Unit vectors on `S^{k}` with weights (full sphere).
fn full_sphere_rule(k: usize, m: usize) -> Vec<(Vec<f64>, f64)> {
    if k == 1 {
        let count = 2 * m;
        return (0..count)
            .map(|j| {
                let b = 2.0 * PI * j as f64 / count as f64;
                (vec![b.cos(), b.sin()], 2.0 * PI / count as f64)
            })
            .collect();
    }
    let (gx, gw) = gauss_legendre(m);
    let inner = full_sphere_rule(k - 1, m);
    let mut out = Vec::with_capacity(m * inner.len());
    for (x, w) in gx.iter().zip(&gw) {
        let th = 0.5 * PI * (x + 1.0);
        let wt = 0.5 * PI * w * th.sin().powi(k as i32 - 1);
        for (eta, we) in &inner {
            let mut p = vec![th.cos()];
            p.extend(eta.iter().map(|e| th.sin() * e));
            out.push((p, wt * we));
        }
    }
    out
}

/// Orthonormal basis of `ℝ^{d}` whose first vector is `axis`.
fn basis_from(axis: &[f64]) -> Vec<Vec<f64>> {
    let d = axis.len();
    let mut out = vec![axis.to_vec()];
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        for b in &out {
            let dot: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in e.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(e.iter().map(|x| x / norm).collect());
        }
        if out.len() == d {
            break;
        }
    }
    out
}

/// Euclidean ball in chart coordinates at `e_n` containing the support.
#[derive(Debug, Clone)]
struct SupportBall {
    center: Vec<f64>,
    radius: f64,
}

fn boundary_directions(n: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        return (0..512)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / 512.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let m = match n {
        3 => 48,
        4 => 16,
        _ => 8,
    };
    full_sphere_rule(n - 1, m).into_iter().map(|(p, _)| p).collect()
}

fn support_ball(test: &PreparedTest) -> Result<SupportBall> {
    let n = test.n;
    let en: Vec<f64> = (0..=n).map(|i| if i == n { 1.0 } else { 0.0 }).collect();
    let chart_coords = |y: &[f64]| -> Result<Vec<f64>> {
        let v = log_raw(&en, y, ChartBound::Literal)
            .map_err(|_| CrownError::Unsupported("test function support leaves the chart at the base point".into()))?;
        Ok(v[..n].to_vec())
    };
    let center = chart_coords(&test.base)?;
    let mut radius: f64 = 0.0;
    for u in boundary_directions(n) {
        let mut tangent = vec![0.0; n + 1];
        for (j, uj) in u.iter().enumerate() {
            for i in 0..=n {
                tangent[i] += test.radius * uj * test.cols[j][i];
            }
        }
        let y = exp_raw(&test.base, &tangent);
        let v = chart_coords(&y)?;
        let d = v.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        radius = radius.max(d);
    }
    Ok(SupportBall {
        center,
        radius: radius * 1.05 + 1e-3,
    })
}

/// Nodes of the cone-adapted polar rule `v = r (cos α, sin α ω)`.
fn build_nodes(test: &PreparedTest) -> Result<Vec<Node>> {
    let n = test.n;
    let ball = support_ball(test)?;
    let c = &ball.center;
    let cnorm = c.iter().map(|a| a * a).sum::<f64>().sqrt();
    let big = ball.radius;
    let (r_lo, r_hi) = ((cnorm - big).max(0.0), cnorm + big);
    let apex = r_lo == 0.0;
    let r_rule = singular_rule(r_lo, r_hi, apex, false, big / RADIAL_PANELS);

    let full = if n == 2 { (0.0, 2.0 * PI) } else { (0.0, PI) };
    let (a_lo, a_hi, a_cap) = if apex {
        (full.0, full.1, ANGULAR_CAP)
    } else {
        let delta = (big / cnorm).asin();
        let spatial = c[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
        if n == 2 {
            let ac = c[1].atan2(c[0]);
            (ac - delta, ac + delta, (delta / RADIAL_PANELS).min(ANGULAR_CAP))
        } else {
            let ac = spatial.atan2(c[0]);
            ((ac - delta).max(0.0), (ac + delta).min(PI), (delta / RADIAL_PANELS).min(ANGULAR_CAP))
        }
    };
    let mut breaks = vec![a_lo, a_hi];
    let k_lo = ((a_lo - FRAC_PI_4) / FRAC_PI_2).ceil() as i64;
    let k_hi = ((a_hi - FRAC_PI_4) / FRAC_PI_2).floor() as i64;
    for k in k_lo..=k_hi {
        let ang = FRAC_PI_4 + k as f64 * FRAC_PI_2;
        if ang > a_lo && ang < a_hi {
            breaks.push(ang);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let is_cone = |x: f64| {
        let k = ((x - FRAC_PI_4) / FRAC_PI_2).round();
        (x - FRAC_PI_4 - k * FRAC_PI_2).abs() < 1e-14
    };
    let mut a_rule = Vec::new();
    for w in breaks.windows(2) {
        a_rule.extend(singular_rule(w[0], w[1], is_cone(w[0]), is_cone(w[1]), a_cap));
    }

    // sphere of spatial directions (n ≥ 3)
    let k = n.saturating_sub(2);
    let spatial_c: Vec<f64> = c[1..].to_vec();
    let sc_norm = spatial_c.iter().map(|a| a * a).sum::<f64>().sqrt();
    let axis: Vec<f64> = if sc_norm > 1e-12 {
        spatial_c.iter().map(|a| a / sc_norm).collect()
    } else {
        let mut e = vec![0.0; n - 1];
        if n >= 2 {
            e[0] = 1.0;
        }
        e
    };
    let frame = if n >= 3 { basis_from(&axis) } else { Vec::new() };
    let (cap_m, inner_m) = match n {
        3 => (10, 0),
        4 => (8, 8),
        _ => (6, 4),
    };
    let inner = if k >= 2 { full_sphere_rule(k - 1, inner_m) } else { Vec::new() };
    let (gx, gw) = gauss_legendre(cap_m);
    let cap_rule = |theta_max: f64| -> Vec<(Vec<f64>, f64)> {
        let panels = CAP_PANELS;
        let mut out = Vec::new();
        if k == 1 {
            // arc around the axis angle
            let base = axis[1].atan2(axis[0]);
            let h = 2.0 * theta_max / panels as f64;
            for p in 0..panels {
                let lo = base - theta_max + p as f64 * h;
                for (x, w) in gx.iter().zip(&gw) {
                    let b = lo + 0.5 * h * (x + 1.0);
                    out.push((vec![b.cos(), b.sin()], 0.5 * h * w));
                }
            }
        } else {
            let h = theta_max / panels as f64;
            for p in 0..panels {
                let lo = p as f64 * h;
                for (x, w) in gx.iter().zip(&gw) {
                    let th = lo + 0.5 * h * (x + 1.0);
                    let wt = 0.5 * h * w * th.sin().powi(k as i32 - 1);
                    for (eta, we) in &inner {
                        let mut dir = frame[0].iter().map(|a| th.cos() * a).collect::<Vec<f64>>();
                        for (e, b) in eta.iter().zip(&frame[1..]) {
                            for (d, bb) in dir.iter_mut().zip(b) {
                                *d += th.sin() * e * bb;
                            }
                        }
                        out.push((dir, wt * we));
                    }
                }
            }
        }
        out
    };

    let bound = ChartBound::Literal.value();
    let mut nodes = Vec::new();
    let mut y = vec![0.0; n + 1];
    for &(r, wr) in &r_rule {
        for &(alpha, wa) in &a_rule {
            let (ca, sa) = (alpha.cos(), alpha.sin());
            let v0 = r * ca;
            let q = -(r * r) * (2.0 * alpha).cos();
            if q >= bound {
                continue;
            }
            let (cc, ss) = cs_real(q);
            let density = ss.powi(n as i32 - 1);
            let acc = if n == 2 {
                y[0] = ss * v0;
                y[1] = ss * r * sa;
                y[2] = cc;
                test.value(&y) * r
            } else {
                let rs = r * sa;
                // cap of directions ω with r(cos α, sin α ω) inside the ball
                let kappa = if sc_norm > 1e-12 && rs > 0.0 {
                    (r * r + cnorm * cnorm - 2.0 * r * ca * c[0] - big * big) / (2.0 * rs * sc_norm)
                } else {
                    -2.0
                };
                if kappa >= 1.0 {
                    continue;
                }
                let theta_max = if kappa <= -1.0 { PI } else { kappa.acos() };
                let rule = cap_rule(theta_max);
                let mut vals = Vec::with_capacity(rule.len());
                for (omega, w) in &rule {
                    y[0] = ss * v0;
                    for (j, o) in omega.iter().enumerate() {
                        y[j + 1] = ss * rs * o;
                    }
                    y[n] = cc;
                    let f = test.value(&y);
                    if f != c0() {
                        vals.push(f * *w);
                    }
                }
                pairwise_sum(&vals) * r.powi(n as i32 - 1) * sa.powi(n as i32 - 2)
            };
            if acc == c0() {
                continue;
            }
            nodes.push(Node {
                c: cc,
                sv0: ss * v0,
                q,
                v0,
                m: acc * (wr * wa * density),
            });
        }
    }
    Ok(nodes)
}

fn reduced_test(dist: &SphericalDist, test: &TestFnDS) -> Result<PreparedTest> {
    if test.n() != dist.params.n() {
        return Err(CrownError::DimensionMismatch {
            expected: dist.params.n(),
            got: test.n(),
        });
    }
    let g = Chart::standard(&dist.basepoint).frame;
    Ok(PreparedTest::new(test, Some(&g.inverse())))
}

fn sum_nodes<F: Fn(&Node) -> Result<Complex64>>(nodes: &[Node], kernel: F) -> Result<Complex64> {
    let mut terms = Vec::with_capacity(nodes.len());
    for nd in nodes {
        terms.push(kernel(nd)? * nd.m);
    }
    Ok(pairwise_sum(&terms))
}

/// Pairing of the analytic kernel at a fixed approach parameter `t`.
pub fn pair_at(dist: &SphericalDist, test: &TestFnDS, t: f64) -> Result<Complex64> {
    let nodes = build_nodes(&reduced_test(dist, test)?)?;
    let triple = dist.params.triple();
    sum_nodes(&nodes, |nd| chart_approach_value(dist, &triple, t, nd.c, nd.sv0))
}

fn approach_route(dist: &SphericalDist, nodes: &[Node], protocol: &ApproachProtocol) -> Result<KernelPairing> {
    let triple = dist.params.triple();
    let mut samples = Vec::with_capacity(protocol.t_grid.len());
    for &t in &protocol.t_grid {
        samples.push((t, sum_nodes(nodes, |nd| chart_approach_value(dist, &triple, t, nd.c, nd.sv0))?));
    }
    let hs: Vec<f64> = samples.iter().map(|(t, _)| t.cos()).collect();
    let vals: Vec<Complex64> = samples.iter().map(|(_, v)| *v).collect();
    let ex = richardson(&hs, &vals, protocol.order);
    Ok(KernelPairing {
        value: ex.value,
        err_est: ex.err,
        route: PairRoute::Approach,
        samples,
    })
}

fn direct_route(dist: &SphericalDist, nodes: &[Node]) -> Result<KernelPairing> {
    let value = sum_nodes(nodes, |nd| {
        let tag = if nd.q > 0.0 {
            CausalTag::Outside
        } else if nd.q < 0.0 && nd.v0 > 0.0 {
            CausalTag::FuturePlus
        } else if nd.q < 0.0 {
            CausalTag::PastMinus
        } else {
            return Ok(c0());
        };
        boundary_value(dist, half_gap_from_q(nd.q), tag)
    })?;
    Ok(KernelPairing {
        value,
        err_est: 0.0,
        route: PairRoute::Direct,
        samples: Vec::new(),
    })
}

/// `⟨dist, φ⟩` by the approach limit, cross-checked by direct quadrature of
/// the pointwise values when these are locally integrable (`n ≤ 3`).
pub fn pair(dist: &SphericalDist, test: &TestFnDS, protocol: &ApproachProtocol) -> Result<PairReport> {
    let nodes = build_nodes(&reduced_test(dist, test)?)?;
    let primary = approach_route(dist, &nodes, protocol)?;
    if primary.err_est > CAUCHY_TOL * primary.value.norm().max(1.0) {
        return Err(CrownError::ExtrapolationNonConvergent { spread: primary.err_est });
    }
    let secondary = if dist.params.n() <= 3 { Some(direct_route(dist, &nodes)?) } else { None };
    Ok(PairReport { primary, secondary })
}

/// Direct quadrature of the pointwise values (`n ≤ 3`).
pub fn pair_direct(dist: &SphericalDist, test: &TestFnDS) -> Result<KernelPairing> {
    if dist.params.n() > 3 {
        return Err(CrownError::Unsupported(
            "direct pairing needs a locally integrable boundary value (n <= 3)".into(),
        ));
    }
    let nodes = build_nodes(&reduced_test(dist, test)?)?;
    direct_route(dist, &nodes)
}

/// Residual of the eigen-equation at a point off the cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenResidual {
    /// `(□ - m²) f (0)` from the central-difference stencil.
    pub residual: Complex64,
    pub value: Complex64,
    /// `|residual| / |value|`.
    pub scaled: f64,
}

/// Flat d'Alembertian at the chart origin by central differences.
fn chart_box<F: Fn(&[f64]) -> Result<Complex64>>(n: usize, h: f64, f: F) -> Result<(Complex64, Complex64)> {
    let mut v = vec![0.0; n];
    let f0 = f(&v)?;
    let mut acc = c0();
    for j in 0..n {
        v[j] = h;
        let fp = f(&v)?;
        v[j] = -h;
        let fm = f(&v)?;
        v[j] = 0.0;
        let second = (fp + fm - 2.0 * f0) / (h * h);
        if j == 0 {
            acc -= second;
        } else {
            acc += second;
        }
    }
    Ok((acc, f0))
}

/// `(□ - m²)` applied to the pointwise value in the chart at `y`.
pub fn eigen_residual(dist: &SphericalDist, y: &DeSitterPoint, h: f64) -> Result<EigenResidual> {
    let n = dist.params.n();
    let chart = Chart::standard(y);
    let center = eval_pointwise(dist, y)?.tag;
    // the stencil and a 10h neighbourhood must stay on one side of the cone
    for j in 0..n {
        for s in [-10.0, -1.0, 1.0, 10.0] {
            let mut v = vec![0.0; n];
            v[j] = s * h;
            let p = DeSitterPoint::renormalized(RealPoint::new(chart.point_raw(&v)))?;
            if classify_causal_with(&dist.basepoint, &p, ONCONE_TOL) != center {
                return Err(CrownError::StencilCrossesCone);
            }
        }
    }
    let x = dist.basepoint.coords().to_vec();
    let (boxed, value) = chart_box(n, h, |v| {
        let p = chart.point_raw(v);
        boundary_value(dist, half_gap(&x, &p), center)
    })?;
    let residual = boxed - dist.eigenvalue() * value;
    Ok(EigenResidual {
        residual,
        value,
        scaled: residual.norm() / value.norm().max(1e-300),
    })
}

/// `max_y |L_{μ+1} Φ_z^{μ+1} - (μ+1)(μ+n/2) Φ_z^μ|` with
/// `L_{μ+1} = □ + (μ+1)(μ+n)`, by central differences of step `h`.
pub fn recursion_check(z: &CrownPoint, lambda_p: Complex64, grid: &[DeSitterPoint], h: f64) -> Result<f64> {
    let zc = z.to_complex();
    let n = zc.len() - 1;
    let nf = n as f64;
    let mu1 = lambda_p + 1.0;
    let mut worst: f64 = 0.0;
    for y in grid {
        if y.n() != n {
            return Err(CrownError::DimensionMismatch { expected: n, got: y.n() });
        }
        let chart = Chart::standard(y);
        let phi = |v: &[f64], e: Complex64| phi_kernel(&zc, &RealPoint::new(chart.point_raw(v)).complexify(), e);
        let (boxed, top) = chart_box(n, h, |v| phi(v, mu1))?;
        let lower = phi(&vec![0.0; n], lambda_p)?;
        let lhs = boxed + mu1 * (lambda_p + nf) * top;
        let rhs = mu1 * (lambda_p + nf / 2.0) * lower;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

/// Extreme eigenvalues of the Gram matrix of `Ψ` on a point set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub min_eig: f64,
    pub max_eig: f64,
    /// `max |G - G*|`.
    pub hermitian_defect: f64,
    pub size: usize,
}

pub fn gram_matrix(params: &KernelParams, points: &[CrownPoint]) -> Result<Vec<Vec<Complex64>>> {
    if points.is_empty() {
        return Err(CrownError::InvalidParameter("empty point set".into()));
    }
    let branch = points[0].branch;
    if points.iter().any(|p| p.branch != branch) {
        return Err(CrownError::MixedBranches);
    }
    let cps: Vec<ComplexPoint> = points.iter().map(CrownPoint::to_complex).collect();
    let mut g = vec![vec![c0(); cps.len()]; cps.len()];
    for i in 0..cps.len() {
        for j in 0..cps.len() {
            g[i][j] = psi_kernel_raw(params, &cps[i], &cps[j])?;
        }
    }
    Ok(g)
}

pub fn gram_psd(params: &KernelParams, points: &[CrownPoint]) -> Result<GramReport> {
    let g = gram_matrix(params, points)?;
    let n = g.len();
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            defect = defect.max((g[i][j] - g[j][i].conj()).norm());
        }
    }
    let eig = hermitian_spectrum(&g);
    Ok(GramReport {
        min_eig: eig[0],
        max_eig: eig[n - 1],
        hermitian_defect: defect,
        size: n,
    })
}

/// Ascending eigenvalues of the Hermitian part of a square matrix.
pub fn hermitian_spectrum(g: &[Vec<Complex64>]) -> Vec<f64> {
    let n = g.len();
    // real symmetric embedding [[A, -B], [B, A]] of the Hermitian part
    let d = 2 * n;
    let mut m = vec![0.0; d * d];
    for i in 0..n {
        for j in 0..n {
            let h = 0.5 * (g[i][j] + g[j][i].conj());
            m[i * d + j] = h.re;
            m[(i + n) * d + (j + n)] = h.re;
            m[i * d + (j + n)] = -h.im;
            m[(i + n) * d + j] = h.im;
        }
    }
    let mut eig = jacobi_eigenvalues(d, m);
    eig.sort_by(f64::total_cmp);
    // the embedding doubles every eigenvalue
    eig.into_iter().step_by(2).collect()
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(d: usize, mut a: Vec<f64>) -> Vec<f64> {
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j].powi(2))
            .sum();
        let diag: f64 = (0..d).map(|i| a[i * d + i].powi(2)).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}

/// `g · z_t` on the requested branch, as a crown point.
pub fn crown_approach(g: &Isometry, t: f64, branch: Branch) -> Result<CrownPoint> {
    let z = approach_point(g, t, branch)?;
    crown_membership(&z).map_err(|v| CrownError::InvalidParameter(format!("approach point left the crown: {v:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist1d::ModelDist1D;
    use crate::hyp2f1::boundary_2f1;
    use crate::lorentz::metric_density;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn params(n: usize, l: Complex64) -> KernelParams {
        KernelParams::admissible(n, l).unwrap()
    }

    fn en_point(v: &[f64]) -> DeSitterPoint {
        Chart::at_en(v.len()).point(v).unwrap()
    }

    #[test]
    fn normalization_and_geodesic_value() {
        let p = params(3, c(0.0, 0.7));
        let z = crown_membership(&ComplexPoint::new(vec![c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])).unwrap();
        assert!((psi_kernel(&p, &z, &z).unwrap() - 1.0).norm() < 1e-15);
        // exp(tH) i e_0 with H the boost in the (0, n) plane
        for t in [0.3, 1.1] {
            let g = Isometry::boost(3, t);
            let zt = crown_membership(&g.apply(&z.to_complex())).unwrap();
            let expect = gauss_2f1(&p.triple(), c(-(t / 2.0).sinh().powi(2), 0.0)).unwrap().value;
            assert!((psi_kernel(&p, &zt, &z).unwrap() - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn mixed_branches_rejected() {
        let p = params(2, c(0.0, 0.3));
        let g = Isometry::identity(2);
        let a = crown_approach(&g, 0.5, Branch::Forward).unwrap();
        let b = crown_approach(&g, 0.5, Branch::Backward).unwrap();
        assert_eq!(psi_kernel(&p, &a, &b), Err(CrownError::MixedBranches));
    }

    fn sample_crown(n: usize, k: usize, branch: Branch) -> CrownPoint {
        let kf = k as f64;
        let g = Isometry::boost(n, 0.4 * (kf * 1.3).sin())
            .compose(&Isometry::boost_axis(n, 1, 0.7 * (kf * 0.7).cos()).unwrap())
            .compose(&Isometry::rotation(n, 1, n, 0.9 * kf).unwrap());
        crown_approach(&g, 0.2 + 1.0 * ((kf * 0.37).sin() * 0.5 + 0.5), branch).unwrap()
    }

    #[test]
    fn half_lambda_identity_in_three_dimensions() {
        let p = params(3, c(0.5, 0.0));
        for k in 0..50 {
            let z = sample_crown(3, k, Branch::Forward);
            let w = sample_crown(3, k + 17, Branch::Forward);
            let lhs = psi_kernel(&p, &z, &w).unwrap();
            let rhs = phi_kernel(&z.to_complex(), &w.to_complex(), c(-0.5, 0.0)).unwrap();
            assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm(), "{k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn phi_kernel_trivia() {
        let z = crown_approach(&Isometry::identity(2), 0.5, Branch::Forward).unwrap().to_complex();
        let e0 = ComplexPoint::new(vec![c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((phi_kernel(&e0, &e0, c(0.37, 0.2)).unwrap() - 1.0).norm() < 1e-15);
        // exponent one is affine in w
        let w1 = ComplexPoint::new(vec![c(0.2, 0.1), c(1.1, 0.0), c(0.3, -0.2)]);
        let w2 = ComplexPoint::new(vec![c(-0.4, 0.3), c(0.5, 0.6), c(0.0, 1.0)]);
        let mix = ComplexPoint::new(w1.coords.iter().zip(&w2.coords).map(|(a, b)| 0.3 * a + 0.7 * b).collect());
        let f = |w: &ComplexPoint| phi_kernel(&z, w, c(1.0, 0.0)).unwrap();
        assert!((f(&mix) - (0.3 * f(&w1) + 0.7 * f(&w2))).norm() < 1e-14);
        let on_ray = ComplexPoint::new(vec![c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        let real = ComplexPoint::new(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(phi_kernel(&real, &on_ray, c(0.5, 0.0)), Err(CrownError::BranchViolation { .. })));
    }

    #[test]
    fn sesquiholomorphic() {
        let p = params(3, c(0.0, 1.1));
        let z = sample_crown(3, 2, Branch::Forward).to_complex();
        let w = sample_crown(3, 5, Branch::Forward).to_complex();
        assert!(sesquiholomorphy_defect(&p, &z, &w, 1e-4).unwrap() < 1e-7);
    }

    #[test]
    fn pointwise_table() {
        for (n, l) in [(2, c(0.0, 0.3)), (3, c(0.5, 0.0)), (4, c(0.0, 1.2)), (5, c(0.7, 0.0))] {
            let p = params(n, l);
            let dist = |k| SphericalDist::at_en(k, p);
            let mut outside = vec![0.0; n];
            outside[1] = 0.6;
            outside[0] = 0.2;
            let y = en_point(&outside);
            let a = eval_pointwise(&dist(SphericalKind::Psi), &y).unwrap();
            let b = eval_pointwise(&dist(SphericalKind::PsiTilde), &y).unwrap();
            assert_eq!(a.tag, CausalTag::Outside);
            assert_eq!(a.value, b.value);
            assert!(a.value.im.abs() < 1e-10);
            assert!(eval_pointwise(&dist(SphericalKind::Difference), &y).unwrap().value.norm() <= 1e-10);
            for sign in [1.0, -1.0] {
                let mut inside = vec![0.0; n];
                inside[0] = 0.7 * sign;
                inside[1] = 0.2;
                let y = en_point(&inside);
                let a = eval_pointwise(&dist(SphericalKind::Psi), &y).unwrap();
                let b = eval_pointwise(&dist(SphericalKind::PsiTilde), &y).unwrap();
                let d = eval_pointwise(&dist(SphericalKind::Difference), &y).unwrap();
                assert_eq!(a.tag, if sign > 0.0 { CausalTag::FuturePlus } else { CausalTag::PastMinus });
                assert!((a.value.im + b.value.im).abs() < 1e-10 * (1.0 + a.value.norm()));
                assert!(a.value.im.abs() > 1e-6);
                assert!(
                    (d.value - (a.value - b.value)).norm() < 1e-9 * (1.0 + d.value.norm()),
                    "n={n}: {:?} vs {:?}",
                    d.value,
                    a.value - b.value
                );
            }
        }
    }

    #[test]
    fn on_cone_rejected() {
        let p = params(2, c(0.0, 0.3));
        let y = DeSitterPoint::new(RealPoint::new(vec![0.5, 0.5, 1.0])).unwrap();
        assert_eq!(
            eval_pointwise(&SphericalDist::at_en(SphericalKind::Psi, p), &y),
            Err(CrownError::OnConeSingularity)
        );
    }

    #[test]
    fn three_dimensional_half_lambda_matches_model_power() {
        let p = params(3, c(0.5, 0.0));
        let dist = SphericalDist::at_en(SphericalKind::Psi, p);
        for v in [[0.8, 0.1, 0.3], [1.3, -0.4, 0.2]] {
            let y = en_point(&v);
            let s = form(y.coords(), DeSitterPoint::e_n(3).coords());
            // w - i0 on the cut means 1 - w + i0 for the power
            let model = pointwise_1d(
                &ModelDist1D::I0Pow {
                    lambda: c(-0.5, 0.0),
                    side: CutSide::Plus,
                },
                (1.0 - s) / 2.0,
            )
            .unwrap();
            let got = eval_pointwise(&dist, &y).unwrap().value;
            assert!((got - model).norm() < 1e-9 * model.norm(), "{got} vs {model}");
        }
    }

    #[test]
    fn approach_converges_to_boundary_outside() {
        let p = params(3, c(0.0, 0.8));
        let dist = SphericalDist::at_en(SphericalKind::Psi, p).moved(&Isometry::boost(3, 0.3));
        let chart = Chart::standard(&dist.basepoint);
        for v in [[0.1, 0.6, 0.2], [-0.2, 0.1, 0.9]] {
            let y = chart.point(&v).unwrap();
            let limit = eval_pointwise(&dist, &y).unwrap().value;
            let near = approach_value(&dist, FRAC_PI_2 - 1e-7, &y).unwrap();
            assert!((near - limit).norm() < 1e-5, "{near} vs {limit}");
        }
        // inside, the approach selects the side recorded in the table
        let y = chart.point(&[0.9, 0.2, 0.1]).unwrap();
        let near = approach_value(&dist, FRAC_PI_2 - 1e-8, &y).unwrap();
        let limit = eval_pointwise(&dist, &y).unwrap().value;
        assert!((near - limit).norm() < 1e-5 * (1.0 + limit.norm()));
        let s = form(dist.basepoint.coords(), y.coords());
        let minus = boundary_2f1(&p.triple(), (1.0 + s) / 2.0, CutSide::Minus).unwrap();
        assert!((limit - minus).norm() < 1e-12 * (1.0 + minus.norm()));
    }

    #[test]
    fn closed_form_density_matches_finite_differences() {
        let chart = Chart::at_en(3);
        for v in [[0.3, 0.2, -0.4], [0.9, 0.1, 0.3]] {
            let q = -v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            let (_, s) = cs_real(q);
            let fd = metric_density(&chart, &v).unwrap();
            assert!((fd - s * s).abs() < 1e-8, "{fd} vs {}", s * s);
        }
    }

    #[test]
    fn test_function_transforms() {
        let test = TestFnDS::at_chart_point(&[0.2, 0.5, 0.1], 0.3)
            .unwrap()
            .with_weight(c(0.5, 1.0))
            .with_wave(vec![2.0, -1.0, 0.5])
            .unwrap();
        let chart = Chart::standard(&test.chart_base());
        let y = chart.point(&[0.05, -0.1, 0.08]).unwrap();
        assert!(test.value(&y).norm() > 0.01);
        assert!((test.conj().value(&y) - test.value(&y).conj()).norm() < 1e-15);
        let h = Isometry::rotation(3, 1, 2, 0.7).unwrap();
        let moved = test.transformed(&h);
        assert!((moved.value(&h.apply_point(&y)) - test.value(&y)).norm() < 1e-12);
        let far = en_point(&[0.0, -0.9, 0.0]);
        assert_eq!(test.value(&far), c0());
        assert!(TestFnDS::at_chart_point(&[0.0, 0.0], 0.6).is_err());
    }

    #[test]
    fn quadrature_integrates_test_function_volume() {
        // a constant kernel pairs to the volume integral, independent of the
        // chart in which it is computed
        let p = KernelParams::new(ModelDims::new(3).unwrap(), SpectralParam::unchecked(c(1.0, 0.0)));
        let dist = SphericalDist::at_en(SphericalKind::Psi, p);
        let test = TestFnDS::at_chart_point(&[0.3, 0.6, -0.1], 0.35).unwrap();
        let direct = pair_direct(&dist, &test).unwrap().value;
        let own = SphericalDist::new(SphericalKind::Psi, test.chart_base(), p).unwrap();
        let centered = pair_direct(&own, &test).unwrap().value;
        assert!((direct - centered).norm() < 1e-9 * centered.norm(), "{direct} vs {centered}");
    }

    #[test]
    fn outside_support_routes_agree() {
        let fine = ApproachProtocol::new(vec![1.50, 1.53, 1.55, 1.56, 1.565], 4).unwrap();
        for (n, l, v) in [(2, c(0.0, 0.3), vec![0.1, 0.7]), (3, c(0.5, 0.0), vec![0.1, 0.6, 0.2])] {
            let dist = SphericalDist::at_en(SphericalKind::Psi, params(n, l));
            let test = TestFnDS::at_chart_point(&v, 0.25).unwrap();
            let rep = pair(&dist, &test, &fine).unwrap();
            let gap = rep.route_gap().unwrap();
            assert!(gap < 1e-8 * (1.0 + rep.value().norm()), "n={n}: gap {gap}");
        }
    }

    #[test]
    fn cone_straddling_routes_agree() {
        for (n, l, v) in [(2, c(0.0, 0.3), vec![0.5, 0.45]), (3, c(0.5, 0.0), vec![0.55, 0.4, 0.2])] {
            for kind in [SphericalKind::Psi, SphericalKind::PsiTilde] {
                let dist = SphericalDist::at_en(kind, params(n, l));
                let test = TestFnDS::at_chart_point(&v, 0.3).unwrap();
                let a = pair(&dist, &test, &ApproachProtocol::default()).unwrap();
                let b = pair(&dist, &test, &ApproachProtocol::alternate()).unwrap();
                let gap = a.route_gap().unwrap();
                assert!(gap < 1e-4, "n={n} {kind:?}: route gap {gap} ({:?})", a);
                assert!(
                    (a.value() - b.value()).norm() < 1e-4,
                    "n={n}: grid gap {}",
                    (a.value() - b.value()).norm()
                );
            }
        }
    }

    #[test]
    fn conjugation_and_invariance() {
        let p = params(3, c(0.0, 0.9));
        let psi = SphericalDist::at_en(SphericalKind::Psi, p);
        let tilde = SphericalDist::at_en(SphericalKind::PsiTilde, p);
        let test = TestFnDS::at_chart_point(&[0.45, 0.35, 0.1], 0.3)
            .unwrap()
            .with_weight(c(0.3, -0.8))
            .with_wave(vec![1.0, 0.5, -2.0])
            .unwrap();
        let proto = ApproachProtocol::default();
        let a = pair(&psi, &test, &proto).unwrap().value();
        let b = pair(&tilde, &test.conj(), &proto).unwrap().value();
        assert!((b - a.conj()).norm() < 1e-6);
        for h in [Isometry::rotation(3, 1, 2, 0.8).unwrap(), Isometry::boost_axis(3, 1, 0.3).unwrap()] {
            let moved = pair(&psi, &test.transformed(&h), &proto).unwrap().value();
            assert!((moved - a).norm() < 1e-4, "{moved} vs {a}");
        }
        // equivariance under a general isometry
        let g = Isometry::boost(3, 0.4).compose(&Isometry::rotation(3, 1, 3, 0.3).unwrap());
        let at_g = pair(&psi.moved(&g), &test.transformed(&g), &proto).unwrap().value();
        assert!((at_g - a).norm() < 1e-5, "{at_g} vs {a}");
    }

    #[test]
    fn eigen_residual_is_second_order() {
        for (n, l) in [(2, c(0.0, 0.3)), (3, c(0.5, 0.0)), (4, c(0.0, 1.2)), (5, c(0.7, 0.0))] {
            for kind in [SphericalKind::Psi, SphericalKind::PsiTilde, SphericalKind::PhiPow] {
                let dist = SphericalDist::at_en(kind, params(n, l));
                let mut v = vec![0.0; n];
                v[0] = 0.9;
                v[1] = 0.3;
                for y in [en_point(&v), {
                    let mut w = vec![0.0; n];
                    w[1] = 0.8;
                    w[0] = 0.3;
                    en_point(&w)
                }] {
                    let r: Vec<EigenResidual> = [1e-2, 5e-3, 2.5e-3].iter().map(|&h| eigen_residual(&dist, &y, h).unwrap()).collect();
                    let slope = (r[0].residual.norm() / r[2].residual.norm()).log2() / 2.0;
                    let extrap = (4.0 * r[2].residual - r[1].residual) / 3.0;
                    assert!(extrap.norm() <= 1e-5 * r[2].value.norm(), "n={n} {kind:?}: {extrap}");
                    assert!(r[2].scaled < 1e-4 || (slope - 2.0).abs() < 0.3, "n={n} {kind:?}: slope {slope}");
                }
            }
        }
    }

    #[test]
    fn constant_kernel_has_zero_residual() {
        let dims = ModelDims::new(3).unwrap();
        let p = KernelParams::new(dims, SpectralParam::unchecked(c(1.0, 0.0)));
        assert_eq!(p.msq, c0());
        let dist = SphericalDist::at_en(SphericalKind::Psi, p);
        let r = eigen_residual(&dist, &en_point(&[0.1, 0.7, 0.0]), 1e-2).unwrap();
        assert!(r.residual.norm() < 1e-12);
    }

    #[test]
    fn stencil_near_cone_rejected() {
        let dist = SphericalDist::at_en(SphericalKind::Psi, params(2, c(0.0, 0.3)));
        let y = en_point(&[0.5, 0.5 + 1e-3]);
        assert_eq!(eigen_residual(&dist, &y, 1e-3).unwrap_err(), CrownError::StencilCrossesCone);
    }

    #[test]
    fn recursion_constants() {
        let z = sample_crown(3, 4, Branch::Forward);
        let grid: Vec<DeSitterPoint> = [[0.1, 0.2, 0.3], [0.5, -0.3, 0.1], [-0.4, 0.0, 0.6]]
            .iter()
            .map(|v| en_point(v))
            .collect();
        for lp in [c(0.0, 0.0), c(0.7, 0.0), c(-1.5, 0.0), c(0.3, 0.4)] {
            let r1 = recursion_check(&z, lp, &grid, 1e-2).unwrap();
            let r2 = recursion_check(&z, lp, &grid, 5e-3).unwrap();
            let slope = (r1 / r2).log2();
            assert!(r2 < 1e-4, "λp={lp}: {r2}");
            assert!((slope - 2.0).abs() < 0.3, "λp={lp}: slope {slope}");
        }
    }

    #[test]
    fn gram_is_positive_and_invariant() {
        for (n, l) in [(2, c(0.0, 0.3)), (3, c(0.5, 0.0)), (4, c(0.0, 1.2)), (5, c(0.7, 0.0))] {
            let p = params(n, l);
            let pts: Vec<CrownPoint> = (0..20).map(|k| sample_crown(n, k, Branch::Forward)).collect();
            let rep = gram_psd(&p, &pts).unwrap();
            assert!(rep.hermitian_defect < HERMITIAN_TOL);
            assert!(rep.min_eig >= -1e-8 * rep.max_eig, "n={n}: {rep:?}");
            let g = Isometry::boost(n, 0.7).compose(&Isometry::rotation(n, 1, n, 1.1).unwrap());
            let moved: Vec<CrownPoint> = pts.iter().map(|z| crown_membership(&g.apply(&z.to_complex())).unwrap()).collect();
            let a = gram_matrix(&p, &pts).unwrap();
            let b = gram_matrix(&p, &moved).unwrap();
            for i in 0..20 {
                for j in 0..20 {
                    assert!((a[i][j] - b[i][j]).norm() < 1e-10);
                }
            }
        }
        let p = params(2, c(0.0, 0.3));
        let one = gram_psd(&p, &[sample_crown(2, 1, Branch::Forward)]).unwrap();
        assert!(one.min_eig > 0.0);
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let m = vec![2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0];
        let mut e = jacobi_eigenvalues(3, m);
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s = 2f64.sqrt();
        for (a, b) in e.iter().zip([2.0 - s, 2.0, 2.0 + s]) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn even_power_kernel_carries_delta_layer() {
        let p = params(4, c(0.0, 0.5));
        let d = SphericalDist::at_en(SphericalKind::PhiPow, p).delta_term().unwrap().unwrap();
        assert_eq!(d.order, 0);
        assert!((d.future_coefficient + d.past_coefficient).norm() < 1e-15);
        assert!(SphericalDist::at_en(SphericalKind::PhiPow, params(3, c(0.5, 0.0)))
            .delta_term()
            .unwrap()
            .is_none());
    }
}
