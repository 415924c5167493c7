//! Lorentzian linear algebra on `R^{1,n}` and `C^{1+n}`, the de Sitter
//! quadric, exponential charts, crown membership, isometries and causal
//! classification.
//!
//! Index 0 is time and the form is bilinear (never conjugating):
//!
//! ```text
//! [z, w] = -z_0 w_0 + z_1 w_1 + … + z_n w_n
//! ```
//!
//! The exponential map at `x ∈ dS^n` is `Exp_x(v) = C([v,v]) x + S([v,v]) v`
//! with the entire functions `C(z) = cos √z` and `S(z) = sin √z / √z`.

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumCast};
use serde::{Deserialize, Serialize};
use std::fmt::Debug;

use crate::error::{CrownError, Result};

/// Scalar types the geometry is generic over.
pub trait Real: Float + FromPrimitive + NumCast + Debug + Default + Send + Sync + 'static {}
impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn cst<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// Relative tolerance for quadric membership.
pub const QUADRIC_TOL: f64 = 1e-9;
/// Tolerance for declaring a point on the light cone in [`classify_causal`].
pub const CAUSAL_TOL: f64 = 1e-9;

/// Dimension data: `n ≥ 2` and `ρ = (n - 1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelDims {
    n: usize,
}

impl ModelDims {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(CrownError::InvalidDimension(n));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ambient dimension `n + 1`.
    pub fn ambient(&self) -> usize {
        self.n + 1
    }

    pub fn rho(&self) -> f64 {
        (self.n as f64 - 1.0) / 2.0
    }

    pub fn is_odd(&self) -> bool {
        self.n % 2 == 1
    }
}

/// Real vector in `R^{1,n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealPoint<T: Real> {
    pub coords: Vec<T>,
}

/// Complex vector in `C^{1+n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPoint<T: Real> {
    pub coords: Vec<Complex<T>>,
}

impl<T: Real> RealPoint<T> {
    pub fn new(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            coords: vec![T::zero(); len],
        }
    }

    /// Basis vector `e_j` of `R^{1,n}`.
    pub fn basis(n: usize, j: usize) -> Self {
        let mut p = Self::zeros(n + 1);
        p.coords[j] = T::one();
        p
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.coords.iter().zip(&other.coords).map(|(a, b)| *a + *b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.coords.iter().zip(&other.coords).map(|(a, b)| *a - *b).collect())
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.coords.iter().map(|a| *a * s).collect())
    }

    /// `Σ |x_j|²` (Euclidean, not the Lorentz form).
    pub fn euclid_sq(&self) -> T {
        self.coords.iter().fold(T::zero(), |acc, a| acc + *a * *a)
    }

    pub fn complexify(&self) -> ComplexPoint<T> {
        ComplexPoint {
            coords: self.coords.iter().map(|a| Complex::new(*a, T::zero())).collect(),
        }
    }
}

impl<T: Real> ComplexPoint<T> {
    pub fn new(coords: Vec<Complex<T>>) -> Self {
        Self { coords }
    }

    pub fn from_parts(re: &RealPoint<T>, im: &RealPoint<T>) -> Self {
        Self {
            coords: re.coords.iter().zip(&im.coords).map(|(a, b)| Complex::new(*a, *b)).collect(),
        }
    }

    pub fn re(&self) -> RealPoint<T> {
        RealPoint::new(self.coords.iter().map(|z| z.re).collect())
    }

    pub fn im(&self) -> RealPoint<T> {
        RealPoint::new(self.coords.iter().map(|z| z.im).collect())
    }

    pub fn conj(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| *a - *b).collect(),
        }
    }

    pub fn euclid_sq(&self) -> T {
        self.coords.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }
}

/// Real Lorentz form on equal-length slices.
#[inline]
pub fn form<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = -(x[0] * y[0]);
    for j in 1..x.len() {
        acc = acc + x[j] * y[j];
    }
    acc
}

/// Bilinear form `[z, w] = -z_0 w_0 + Σ_{j≥1} z_j w_j`.
pub fn minkowski_form<T: Real>(z: &ComplexPoint<T>, w: &ComplexPoint<T>) -> Result<Complex<T>> {
    if z.len() != w.len() {
        return Err(CrownError::DimensionMismatch {
            expected: z.len(),
            got: w.len(),
        });
    }
    if z.is_empty() {
        return Err(CrownError::DimensionMismatch { expected: 1, got: 0 });
    }
    let mut acc = -(z.coords[0] * w.coords[0]);
    for j in 1..z.len() {
        acc = acc + z.coords[j] * w.coords[j];
    }
    Ok(acc)
}

/// Real-point version of [`minkowski_form`].
pub fn real_form<T: Real>(x: &RealPoint<T>, y: &RealPoint<T>) -> Result<T> {
    if x.len() != y.len() {
        return Err(CrownError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(form(&x.coords, &y.coords))
}

/// `(C(z), S(z)) = (cos √z, sin √z / √z)`, entire and branch free.
pub fn cs_eval<T: Real>(z: Complex<T>) -> (Complex<T>, Complex<T>) {
    if z.norm() < cst(1.0) {
        let mut c = Complex::new(T::one(), T::zero());
        let mut s = c;
        let mut tc = c;
        let mut ts = c;
        for k in 1..40 {
            let kf: T = cst(k as f64);
            let two: T = cst(2.0);
            tc = tc * (-z) / ((two * kf - T::one()) * (two * kf));
            ts = ts * (-z) / ((two * kf) * (two * kf + T::one()));
            c = c + tc;
            s = s + ts;
            if tc.norm() < T::epsilon() * cst(1e-3) && ts.norm() < T::epsilon() * cst(1e-3) {
                break;
            }
        }
        (c, s)
    } else {
        let r = z.sqrt();
        (r.cos(), r.sin() / r)
    }
}

/// Real version of [`cs_eval`].
pub fn cs_real<T: Real>(q: T) -> (T, T) {
    let one = T::one();
    if q.abs() < one {
        let (c, s) = cs_eval(Complex::new(q, T::zero()));
        (c.re, s.re)
    } else if q > T::zero() {
        let r = q.sqrt();
        (r.cos(), r.sin() / r)
    } else {
        let r = (-q).sqrt();
        (r.cosh(), r.sinh() / r)
    }
}

/// Point of `dS^n = {[x,x] = 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeSitterPoint<T: Real> {
    p: RealPoint<T>,
    tol: T,
}

impl<T: Real> DeSitterPoint<T> {
    /// Validates `|[p,p] - 1| ≤ tol·(1 + |p|²)`.
    pub fn new(p: RealPoint<T>) -> Result<Self> {
        Self::with_tol(p, cst(QUADRIC_TOL))
    }

    pub fn with_tol(p: RealPoint<T>, tol: T) -> Result<Self> {
        if p.len() < 3 {
            return Err(CrownError::InvalidDimension(p.len().saturating_sub(1)));
        }
        let defect = (form(&p.coords, &p.coords) - T::one()).abs();
        if defect > tol * (T::one() + p.euclid_sq()) {
            return Err(CrownError::OffQuadric(defect.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { p, tol })
    }

    /// Rescales onto the quadric; fails for non-spacelike input.
    pub fn renormalized(p: RealPoint<T>) -> Result<Self> {
        let q = form(&p.coords, &p.coords);
        if q <= T::zero() {
            return Err(CrownError::OffQuadric(q.to_f64().unwrap_or(f64::NAN)));
        }
        Self::new(p.scale(T::one() / q.sqrt()))
    }

    /// `e_n`, the base point of the charts used throughout.
    pub fn e_n(n: usize) -> Self {
        Self {
            p: RealPoint::basis(n, n),
            tol: cst(QUADRIC_TOL),
        }
    }

    pub fn point(&self) -> &RealPoint<T> {
        &self.p
    }

    pub fn coords(&self) -> &[T] {
        &self.p.coords
    }

    pub fn n(&self) -> usize {
        self.p.len() - 1
    }

    pub fn tol(&self) -> T {
        self.tol
    }
}

/// Tangent vector `v` at `base`, `[base, v] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<T: Real> {
    pub base: DeSitterPoint<T>,
    pub v: RealPoint<T>,
}

impl<T: Real> TangentVector<T> {
    pub fn new(base: &DeSitterPoint<T>, v: RealPoint<T>) -> Result<Self> {
        if v.len() != base.p.len() {
            return Err(CrownError::DimensionMismatch {
                expected: base.p.len(),
                got: v.len(),
            });
        }
        let defect = form(&base.p.coords, &v.coords).abs();
        if defect > base.tol * (T::one() + v.euclid_sq().sqrt()) * (T::one() + base.p.euclid_sq().sqrt()) {
            return Err(CrownError::NotTangent(defect.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { base: base.clone(), v })
    }

    pub fn zero(base: &DeSitterPoint<T>) -> Self {
        Self {
            base: base.clone(),
            v: RealPoint::zeros(base.p.len()),
        }
    }

    /// `[v, v]`.
    pub fn square(&self) -> T {
        form(&self.v.coords, &self.v.coords)
    }
}

/// `Exp_x(v) = C([v,v]) x + S([v,v]) v`, renormalized onto the quadric.
pub fn exp_map<T: Real>(x: &DeSitterPoint<T>, v: &TangentVector<T>) -> Result<DeSitterPoint<T>> {
    if v.v.len() != x.p.len() {
        return Err(CrownError::DimensionMismatch {
            expected: x.p.len(),
            got: v.v.len(),
        });
    }
    let y = exp_raw(&x.p.coords, &v.v.coords);
    let q = form(&y, &y);
    let fixed = if (q - T::one()).abs() > T::epsilon() * cst(16.0) {
        RealPoint::new(y).scale(T::one() / q.sqrt())
    } else {
        RealPoint::new(y)
    };
    DeSitterPoint::with_tol(fixed, x.tol)
}

/// Exponential map on raw coordinates, no validation or renormalisation.
#[inline]
pub fn exp_raw<T: Real>(x: &[T], v: &[T]) -> Vec<T> {
    let (c, s) = cs_real(form(v, v));
    x.iter().zip(v).map(|(a, b)| c * *a + s * *b).collect()
}

/// Which bound defines the chart domain `U_x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ChartBound {
    /// `[v, v] < π/2`, as written.
    #[default]
    Literal,
    /// `[v, v] < (π/2)²`.
    Squared,
}

impl ChartBound {
    pub fn value(self) -> f64 {
        let h = std::f64::consts::FRAC_PI_2;
        match self {
            ChartBound::Literal => h,
            ChartBound::Squared => h * h,
        }
    }
}

/// Inverse of [`exp_map`] on `V_x = Exp_x(U_x)` via the 2-plane reduction
/// `y = [x,y] x + u`, `u ⟂ x`.
pub fn log_map<T: Real>(x: &DeSitterPoint<T>, y: &DeSitterPoint<T>) -> Result<TangentVector<T>> {
    log_map_with(x, y, ChartBound::Literal)
}

pub fn log_map_with<T: Real>(x: &DeSitterPoint<T>, y: &DeSitterPoint<T>, bound: ChartBound) -> Result<TangentVector<T>> {
    if x.p.len() != y.p.len() {
        return Err(CrownError::DimensionMismatch {
            expected: x.p.len(),
            got: y.p.len(),
        });
    }
    let v = log_raw(&x.p.coords, &y.p.coords, bound)?;
    let out = TangentVector {
        base: x.clone(),
        v: RealPoint::new(v),
    };
    let back = exp_raw(&x.p.coords, &out.v.coords);
    let resid = back
        .iter()
        .zip(&y.p.coords)
        .fold(T::zero(), |acc, (a, b)| acc + (*a - *b) * (*a - *b))
        .sqrt();
    if resid > cst::<T>(1e-8) * (T::one() + y.p.euclid_sq()) {
        return Err(CrownError::NotInChart {
            q: out.square().to_f64().unwrap_or(f64::NAN),
            bound: bound.value(),
        });
    }
    Ok(out)
}

/// Raw logarithm: returns `v` with `Exp_x(v) = y` or `NotInChart`.
pub fn log_raw<T: Real>(x: &[T], y: &[T], bound: ChartBound) -> Result<Vec<T>> {
    let s = form(x, y);
    let u: Vec<T> = y.iter().zip(x).map(|(b, a)| *b - s * *a).collect();
    let one = T::one();
    let q = if s == one {
        T::zero()
    } else if s < one {
        if s <= -one {
            return Err(CrownError::NotInChart {
                q: f64::INFINITY,
                bound: bound.value(),
            });
        }
        let th = s.acos();
        th * th
    } else {
        let th = s.acosh();
        -(th * th)
    };
    if q.to_f64().unwrap_or(f64::INFINITY) >= bound.value() {
        return Err(CrownError::NotInChart {
            q: q.to_f64().unwrap_or(f64::NAN),
            bound: bound.value(),
        });
    }
    let (_, sq) = cs_real(q);
    Ok(u.iter().map(|a| *a / sq).collect())
}

/// Causal position of `y` relative to `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CausalTag {
    Outside,
    /// Inside the cone with `y_0 > x_0`.
    FuturePlus,
    /// Inside the cone with `y_0 < x_0`.
    PastMinus,
    OnCone,
}

/// Classifies by the sign of `[y-x, y-x] = 2 - 2[x,y]`; the cone side is the
/// sign of `y_0 - x_0`.
pub fn classify_causal<T: Real>(x: &DeSitterPoint<T>, y: &DeSitterPoint<T>) -> CausalTag {
    classify_causal_with(x, y, cst(CAUSAL_TOL))
}

pub fn classify_causal_with<T: Real>(x: &DeSitterPoint<T>, y: &DeSitterPoint<T>, tol: T) -> CausalTag {
    let d = y.p.sub(&x.p);
    let q = form(&d.coords, &d.coords);
    let scale = T::one() + y.p.euclid_sq();
    if q.abs() <= tol * scale {
        CausalTag::OnCone
    } else if q > T::zero() {
        CausalTag::Outside
    } else if y.p.coords[0] > x.p.coords[0] {
        CausalTag::FuturePlus
    } else {
        CausalTag::PastMinus
    }
}

/// `Ξ` (forward, `u + iv`) or `Ξ̄` (backward, `u - iv`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Forward,
    Backward,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Forward => 1.0,
            Branch::Backward => -1.0,
        }
    }
}

/// Crown point decomposed as `u ± iv`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrownPoint<T: Real> {
    pub u: RealPoint<T>,
    pub v: RealPoint<T>,
    pub branch: Branch,
}

impl<T: Real> CrownPoint<T> {
    pub fn to_complex(&self) -> ComplexPoint<T> {
        let s: T = cst(self.branch.sign());
        ComplexPoint::from_parts(&self.u, &self.v.scale(s))
    }
}

/// First violated defining condition of the crown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrownViolation {
    /// `[u,u] - [v,v] = 1` fails.
    Quadric,
    /// `[u,v] = 0` fails.
    Orthogonality,
    /// `[v,v] < 0` fails.
    Timelike,
    /// `v_0 > 0` fails.
    FutureCone,
}

/// Tests the four crown conditions on `z = u ± iv`, picking the branch from
/// the sign of `Im z_0`.
pub fn crown_membership<T: Real>(z: &ComplexPoint<T>) -> std::result::Result<CrownPoint<T>, CrownViolation> {
    let u = z.re();
    let im = z.im();
    let branch = if im.coords[0] < T::zero() { Branch::Backward } else { Branch::Forward };
    let v = im.scale(cst(branch.sign()));
    let tol: T = cst::<T>(QUADRIC_TOL) * (T::one() + z.euclid_sq());
    let uu = form(&u.coords, &u.coords);
    let vv = form(&v.coords, &v.coords);
    if (uu - vv - T::one()).abs() > tol {
        return Err(CrownViolation::Quadric);
    }
    if form(&u.coords, &v.coords).abs() > tol {
        return Err(CrownViolation::Orthogonality);
    }
    if vv >= T::zero() {
        return Err(CrownViolation::Timelike);
    }
    if v.coords[0] <= T::zero() {
        return Err(CrownViolation::FutureCone);
    }
    Ok(CrownPoint { u, v, branch })
}

/// Element of `SO(1,n)_e` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Isometry<T: Real> {
    dim: usize,
    m: Vec<T>,
}

impl<T: Real> Isometry<T> {
    pub fn identity(n: usize) -> Self {
        let dim = n + 1;
        let mut m = vec![T::zero(); dim * dim];
        for i in 0..dim {
            m[i * dim + i] = T::one();
        }
        Self { dim, m }
    }

    /// Validates form preservation, `det = 1` and `g_00 > 0`.
    pub fn from_matrix(rows: Vec<Vec<T>>) -> Result<Self> {
        let dim = rows.len();
        if dim < 3 || rows.iter().any(|r| r.len() != dim) {
            return Err(CrownError::InvalidParameter("isometry matrix must be square with n >= 2".into()));
        }
        let g = Self {
            dim,
            m: rows.into_iter().flatten().collect(),
        };
        let tol: T = cst(1e-9);
        let defect = g.form_defect();
        if defect > tol {
            return Err(CrownError::InvalidParameter(format!(
                "matrix does not preserve the form (defect {defect:?})"
            )));
        }
        if (g.det() - T::one()).abs() > tol {
            return Err(CrownError::InvalidParameter("determinant is not 1".into()));
        }
        if g.get(0, 0) <= T::zero() {
            return Err(CrownError::InvalidParameter("not in the identity component".into()));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.dim - 1
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.m.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    /// Boost `a_t` mixing `e_0` and `e_n`: `a_t e_n = (sinh t, 0, …, cosh t)`.
    pub fn boost(n: usize, t: T) -> Self {
        Self::boost_axis(n, n, t).expect("axis n is always valid")
    }

    /// Boost mixing `e_0` with `e_axis`, `1 ≤ axis ≤ n`.
    pub fn boost_axis(n: usize, axis: usize, t: T) -> Result<Self> {
        if axis == 0 || axis > n {
            return Err(CrownError::InvalidParameter(format!("boost axis {axis} outside 1..={n}")));
        }
        let mut g = Self::identity(n);
        let d = g.dim;
        g.m[0] = t.cosh();
        g.m[axis * d + axis] = t.cosh();
        g.m[axis] = t.sinh();
        g.m[axis * d] = t.sinh();
        Ok(g)
    }

    /// Rotation by `θ` in the `(i, j)` plane, `1 ≤ i < j ≤ n`.
    pub fn rotation(n: usize, i: usize, j: usize, theta: T) -> Result<Self> {
        if !(1 <= i && i < j && j <= n) {
            return Err(CrownError::InvalidParameter(format!("rotation indices ({i},{j}) need 1 <= i < j <= {n}")));
        }
        let mut g = Self::identity(n);
        let d = g.dim;
        let (c, s) = (theta.cos(), theta.sin());
        g.m[i * d + i] = c;
        g.m[j * d + j] = c;
        g.m[i * d + j] = -s;
        g.m[j * d + i] = s;
        Ok(g)
    }

    /// Whether `g e_n = e_n` (membership in the stabiliser `H`).
    pub fn fixes_en(&self) -> bool {
        let n = self.n();
        let tol: T = cst(1e-12);
        (0..self.dim).all(|i| {
            let target = if i == n { T::one() } else { T::zero() };
            (self.get(i, n) - target).abs() <= tol
        })
    }

    pub fn compose(&self, other: &Self) -> Self {
        let d = self.dim;
        let mut m = vec![T::zero(); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.m[i * d + k];
                if a == T::zero() {
                    continue;
                }
                for j in 0..d {
                    m[i * d + j] = m[i * d + j] + a * other.m[k * d + j];
                }
            }
        }
        Self { dim: d, m }
    }

    /// `g^{-1} = η gᵀ η`.
    pub fn inverse(&self) -> Self {
        let d = self.dim;
        let mut m = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                let sign = if (i == 0) ^ (j == 0) { -T::one() } else { T::one() };
                m[i * d + j] = sign * self.m[j * d + i];
            }
        }
        Self { dim: d, m }
    }

    pub fn apply_raw(&self, x: &[T]) -> Vec<T> {
        let d = self.dim;
        (0..d).map(|i| (0..d).fold(T::zero(), |acc, k| acc + self.m[i * d + k] * x[k])).collect()
    }

    pub fn apply_real(&self, x: &RealPoint<T>) -> RealPoint<T> {
        RealPoint::new(self.apply_raw(&x.coords))
    }

    /// Linear action on complex points.
    pub fn apply(&self, z: &ComplexPoint<T>) -> ComplexPoint<T> {
        let d = self.dim;
        let coords = (0..d)
            .map(|i| (0..d).fold(Complex::new(T::zero(), T::zero()), |acc, k| acc + z.coords[k] * self.m[i * d + k]))
            .collect();
        ComplexPoint::new(coords)
    }

    /// Action on de Sitter points, renormalized onto the quadric.
    pub fn apply_point(&self, x: &DeSitterPoint<T>) -> DeSitterPoint<T> {
        let y = self.apply_real(&x.p);
        DeSitterPoint::renormalized(y).unwrap_or_else(|_| x.clone())
    }

    /// `max |gᵀ η g - η|`.
    pub fn form_defect(&self) -> T {
        let d = self.dim;
        let mut worst = T::zero();
        for i in 0..d {
            for j in 0..d {
                let mut acc = T::zero();
                for k in 0..d {
                    let eta = if k == 0 { -T::one() } else { T::one() };
                    acc = acc + self.m[k * d + i] * eta * self.m[k * d + j];
                }
                let target = if i != j {
                    T::zero()
                } else if i == 0 {
                    -T::one()
                } else {
                    T::one()
                };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }

    pub fn det(&self) -> T {
        det(self.dim, &self.m)
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det<T: Real>(d: usize, m: &[T]) -> T {
    let mut a = m.to_vec();
    let mut det = T::one();
    for col in 0..d {
        let mut piv = col;
        for r in col + 1..d {
            if a[r * d + col].abs() > a[piv * d + col].abs() {
                piv = r;
            }
        }
        if a[piv * d + col] == T::zero() {
            return T::zero();
        }
        if piv != col {
            for k in 0..d {
                a.swap(col * d + k, piv * d + k);
            }
            det = -det;
        }
        let p = a[col * d + col];
        det = det * p;
        for r in col + 1..d {
            let f = a[r * d + col] / p;
            for k in col..d {
                a[r * d + k] = a[r * d + k] - f * a[col * d + k];
            }
        }
    }
    det
}

/// `g · z_t` (forward) or `g · z̄_t` (backward), `z_t = i cos t e_0 + sin t e_n`.
pub fn approach_point<T: Real>(g: &Isometry<T>, t: T, branch: Branch) -> Result<ComplexPoint<T>> {
    if !(t > T::zero() && t < cst(std::f64::consts::FRAC_PI_2)) {
        return Err(CrownError::InvalidParameter(format!("approach parameter t = {t:?} outside (0, pi/2)")));
    }
    let n = g.n();
    let mut coords = vec![Complex::new(T::zero(), T::zero()); n + 1];
    coords[0] = Complex::new(T::zero(), t.cos() * cst(branch.sign()));
    coords[n] = Complex::new(t.sin(), T::zero());
    Ok(g.apply(&ComplexPoint::new(coords)))
}

/// Orthonormal chart at a base point: coordinates `v ∈ R^n` are mapped to the
/// tangent vector `Σ_{j<n} v_j f_j` with `f_j = frame · e_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart<T: Real> {
    pub base: DeSitterPoint<T>,
    pub frame: Isometry<T>,
}

impl<T: Real> Chart<T> {
    /// Chart with the given frame; the base point is `frame · e_n`.
    pub fn from_frame(frame: Isometry<T>) -> Self {
        let n = frame.n();
        let base = frame.apply_point(&DeSitterPoint::e_n(n));
        Self { base, frame }
    }

    /// Chart at `e_n` with the standard frame.
    pub fn at_en(n: usize) -> Self {
        Self {
            base: DeSitterPoint::e_n(n),
            frame: Isometry::identity(n),
        }
    }

    /// Canonical frame at `x`: a boost along `e_n` followed by a rotation
    /// taking `e_n` to the spatial direction of `x`.
    pub fn standard(x: &DeSitterPoint<T>) -> Self {
        let n = x.n();
        let c = x.coords();
        let spatial: Vec<T> = c[1..].to_vec();
        let norm = spatial.iter().fold(T::zero(), |a, s| a + *s * *s).sqrt();
        let tau = c[0].asinh();
        let boost = Isometry::boost(n, tau);
        let rot = rotation_to(n, &spatial.iter().map(|s| *s / norm).collect::<Vec<T>>());
        let frame = rot.compose(&boost);
        Self { base: x.clone(), frame }
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    /// Tangent vector at the base for chart coordinates `v`.
    pub fn tangent(&self, v: &[T]) -> Vec<T> {
        let n = self.n();
        let mut full = vec![T::zero(); n + 1];
        full[..n].copy_from_slice(&v[..n]);
        self.frame.apply_raw(&full)
    }

    /// `Exp_base(Σ v_j f_j)` as raw coordinates.
    pub fn point_raw(&self, v: &[T]) -> Vec<T> {
        exp_raw(&self.base.p.coords, &self.tangent(v))
    }

    pub fn point(&self, v: &[T]) -> Result<DeSitterPoint<T>> {
        let t = TangentVector::new(&self.base, RealPoint::new(self.tangent(v)))?;
        exp_map(&self.base, &t)
    }

    /// Chart coordinates of `y` (inverse of [`Chart::point_raw`]).
    pub fn coords_raw(&self, y: &[T], bound: ChartBound) -> Result<Vec<T>> {
        let v = log_raw(&self.base.p.coords, y, bound)?;
        let local = self.frame.inverse().apply_raw(&v);
        Ok(local[..self.n()].to_vec())
    }
}

/// Rotation of the spatial coordinates taking `e_n` to the unit vector `u`
/// (given as spatial components `u_1..u_n`).
fn rotation_to<T: Real>(n: usize, u: &[T]) -> Isometry<T> {
    // Rotation in the plane spanned by e_n and u: R = I + (cos-1)(aaᵀ+bbᵀ) + sin(baᵀ-abᵀ)
    let d = n + 1;
    let mut a = vec![T::zero(); n];
    a[n - 1] = T::one();
    let cos = u[n - 1];
    let mut b: Vec<T> = u.iter().zip(&a).map(|(ui, ai)| *ui - cos * *ai).collect();
    let bn = b.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt();
    let mut g = Isometry::identity(n);
    if bn < cst(1e-14) {
        if cos > T::zero() {
            return g;
        }
        // antipodal: rotate by π in the (1, n) plane
        return Isometry::rotation(n, 1, n, cst(std::f64::consts::PI)).expect("n >= 2");
    }
    for x in b.iter_mut() {
        *x = *x / bn;
    }
    let sin = bn;
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { T::one() } else { T::zero() };
            let val = delta + (cos - T::one()) * (a[i] * a[j] + b[i] * b[j]) + sin * (b[i] * a[j] - a[i] * b[j]);
            g.m[(i + 1) * d + (j + 1)] = val;
        }
    }
    g
}

/// Central-difference step for [`metric_density`].
pub const DENSITY_STEP: f64 = 1e-5;

/// `√|det g(v)|` of the pulled-back metric in chart coordinates.
pub fn metric_density<T: Real>(chart: &Chart<T>, v: &[T]) -> Result<T> {
    let n = chart.n();
    if v.len() != n {
        return Err(CrownError::DimensionMismatch { expected: n, got: v.len() });
    }
    let q = {
        let t = chart.tangent(v);
        form(&t, &t)
    };
    if q.to_f64().unwrap_or(f64::INFINITY) >= ChartBound::Literal.value() {
        return Err(CrownError::NotInChart {
            q: q.to_f64().unwrap_or(f64::NAN),
            bound: ChartBound::Literal.value(),
        });
    }
    let h: T = cst(DENSITY_STEP);
    let mut partials = Vec::with_capacity(n);
    for i in 0..n {
        let mut vp = v.to_vec();
        let mut vm = v.to_vec();
        vp[i] = vp[i] + h;
        vm[i] = vm[i] - h;
        let (yp, ym) = (chart.point_raw(&vp), chart.point_raw(&vm));
        partials.push(yp.iter().zip(&ym).map(|(a, b)| (*a - *b) / (h + h)).collect::<Vec<T>>());
    }
    let mut g = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = form(&partials[i], &partials[j]);
        }
    }
    Ok(det(n, &g).abs().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    type C = Complex<f64>;

    fn en(n: usize) -> DeSitterPoint<f64> {
        DeSitterPoint::e_n(n)
    }

    #[test]
    fn form_at_basis() {
        let e0 = RealPoint::<f64>::basis(3, 0).complexify();
        let e3 = RealPoint::<f64>::basis(3, 3).complexify();
        assert_eq!(minkowski_form(&e0, &e0).unwrap(), C::new(-1.0, 0.0));
        assert_eq!(minkowski_form(&e3, &e3).unwrap(), C::new(1.0, 0.0));
        assert!(minkowski_form(&e0, &RealPoint::<f64>::basis(2, 0).complexify()).is_err());
    }

    #[test]
    fn cs_values() {
        let (c, s) = cs_eval(C::new(0.0, 0.0));
        assert_eq!((c, s), (C::new(1.0, 0.0), C::new(1.0, 0.0)));
        let (c, s) = cs_eval(C::new(PI * PI / 4.0, 0.0));
        assert!(c.norm() < 1e-15 && (s.re - 2.0 / PI).abs() < 1e-15);
        let (c, s) = cs_eval(C::new(-1.0, 0.0));
        assert!((c.re - 1f64.cosh()).abs() < 1e-15 && (s.re - 1f64.sinh()).abs() < 1e-15);
    }

    #[test]
    fn cs_series_agrees_with_closed_form_near_switch() {
        for z in [C::new(0.99, 0.0), C::new(0.0, 0.99), C::new(-0.7, 0.7)] {
            let (cs, ss) = cs_eval(z);
            let r = z.sqrt();
            assert!((cs - r.cos()).norm() < 1e-15);
            assert!((ss - r.sin() / r).norm() < 1e-15);
        }
    }

    #[test]
    fn exp_examples() {
        let x = en(3);
        assert_eq!(exp_map(&x, &TangentVector::zero(&x)).unwrap(), x);
        let v = TangentVector::new(&x, RealPoint::new(vec![0.4, 0.4, 0.0, 0.0])).unwrap();
        let y = exp_map(&x, &v).unwrap();
        assert_eq!(y.coords(), &[0.4, 0.4, 0.0, 1.0]);
        let t = 0.3;
        let v = TangentVector::new(&x, RealPoint::new(vec![t, 0.0, 0.0, 0.0])).unwrap();
        let y = exp_map(&x, &v).unwrap();
        let b = Isometry::boost(3, t).apply_point(&x);
        for (a, c) in y.coords().iter().zip(b.coords()) {
            assert!((a - c).abs() < 1e-15);
        }
        assert!((b.coords()[0] - t.sinh()).abs() < 1e-15 && (b.coords()[3] - t.cosh()).abs() < 1e-15);
    }

    #[test]
    fn log_examples() {
        let x = en(2);
        assert!(log_map(&x, &x).unwrap().v.euclid_sq() == 0.0);
        let y = DeSitterPoint::new(RealPoint::new(vec![0.3, 0.3, 1.0])).unwrap();
        let v = log_map(&x, &y).unwrap();
        assert!((v.v.coords[0] - 0.3).abs() < 1e-15 && (v.v.coords[1] - 0.3).abs() < 1e-15);
        // far side of the hyperboloid is outside every chart
        let far = DeSitterPoint::new(RealPoint::new(vec![0.0, 0.0, -1.0])).unwrap();
        assert!(log_map(&x, &far).is_err());
    }

    #[test]
    fn chart_bound_option() {
        let x = en(2);
        // geodesic angle 1.4: [v,v] = 1.96 exceeds π/2 but not (π/2)²
        let y = DeSitterPoint::new(RealPoint::new(vec![0.0, 1.4f64.sin(), 1.4f64.cos()])).unwrap();
        assert!(matches!(log_map(&x, &y), Err(CrownError::NotInChart { .. })));
        let v = log_map_with(&x, &y, ChartBound::Squared).unwrap();
        assert!((v.square() - 1.96).abs() < 1e-12);
    }

    #[test]
    fn causal_examples() {
        let x = en(3);
        let out = DeSitterPoint::new(RealPoint::new(vec![0.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!(classify_causal(&x, &out), CausalTag::Outside);
        let fut = DeSitterPoint::new(RealPoint::new(vec![1f64.sinh(), 0.0, 0.0, 1f64.cosh()])).unwrap();
        assert_eq!(classify_causal(&x, &fut), CausalTag::FuturePlus);
        let past = DeSitterPoint::new(RealPoint::new(vec![-(1f64.sinh()), 0.0, 0.0, 1f64.cosh()])).unwrap();
        assert_eq!(classify_causal(&x, &past), CausalTag::PastMinus);
        assert_eq!(classify_causal(&x, &x), CausalTag::OnCone);
    }

    #[test]
    fn crown_examples() {
        let n = 3;
        let mut z = vec![C::new(0.0, 0.0); n + 1];
        z[0] = C::new(0.0, 1.0);
        assert_eq!(crown_membership(&ComplexPoint::new(z)).unwrap().branch, Branch::Forward);
        let zt = approach_point(&Isometry::identity(n), 0.7, Branch::Forward).unwrap();
        assert!(crown_membership(&zt).is_ok());
        let zb = approach_point(&Isometry::identity(n), 0.7, Branch::Backward).unwrap();
        assert_eq!(crown_membership(&zb).unwrap().branch, Branch::Backward);
        let real = RealPoint::<f64>::basis(n, n).complexify();
        assert_eq!(crown_membership(&real).unwrap_err(), CrownViolation::Timelike);
        let z = approach_point(&Isometry::identity(2), PI / 4.0, Branch::Forward).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((z.coords[0] - C::new(0.0, h)).norm() < 1e-15 && (z.coords[2] - C::new(h, 0.0)).norm() < 1e-15);
        assert!(approach_point(&Isometry::identity(2), 1.6, Branch::Forward).is_err());
    }

    #[test]
    fn approach_membership_under_boosts() {
        for s in [-1.0, 0.0, 1.0] {
            for t in [0.5, 1.0, 1.5] {
                let z = approach_point(&Isometry::boost(3, s), t, Branch::Forward).unwrap();
                assert_eq!(crown_membership(&z).unwrap().branch, Branch::Forward);
            }
        }
    }

    #[test]
    fn approach_converges_monotonically() {
        let x = RealPoint::<f64>::basis(2, 2).complexify();
        let mut last = f64::INFINITY;
        for k in 1..20 {
            let t = PI / 2.0 * (1.0 - 0.5f64.powi(k));
            let d = approach_point(&Isometry::identity(2), t, Branch::Forward).unwrap().sub(&x).euclid_sq();
            assert!(d < last);
            last = d;
        }
        assert!(last < 1e-10);
    }

    #[test]
    fn isometry_generators() {
        assert_eq!(Isometry::<f64>::boost(3, 0.0), Isometry::identity(3));
        let r = Isometry::rotation(3, 1, 2, 0.4).unwrap();
        assert!(r.fixes_en());
        assert_eq!(r.apply_real(&RealPoint::basis(3, 0)).coords, RealPoint::<f64>::basis(3, 0).coords);
        assert!(!Isometry::rotation(3, 1, 3, 0.4).unwrap().fixes_en());
        assert!(Isometry::<f64>::rotation(3, 2, 2, 0.4).is_err());
        assert!(Isometry::<f64>::rotation(3, 0, 2, 0.4).is_err());
        let b = Isometry::boost_axis(3, 1, 0.8).unwrap();
        assert!(b.fixes_en());
        assert!(b.form_defect() < 1e-14 && (b.det() - 1.0).abs() < 1e-14);
        let g = b.compose(&Isometry::boost(3, 0.3)).compose(&r);
        let back = g.compose(&g.inverse());
        assert!(back
            .rows()
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, v)| (v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13)));
        assert!(Isometry::from_matrix(g.rows()).is_ok());
    }

    #[test]
    fn standard_chart_maps_en_to_base() {
        let y = DeSitterPoint::new(RealPoint::new(vec![0.5, -0.3, 0.8, (1.0 + 0.25 - 0.09 - 0.64f64).sqrt()])).unwrap();
        let ch = Chart::standard(&y);
        let img = ch.frame.apply_real(&RealPoint::basis(3, 3));
        for (a, b) in img.coords.iter().zip(y.coords()) {
            assert!((a - b).abs() < 1e-14);
        }
        let v = [0.1, -0.2, 0.05];
        let p = ch.point_raw(&v);
        let back = ch.coords_raw(&p, ChartBound::Literal).unwrap();
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-13);
        }
        let antipodal = DeSitterPoint::new(RealPoint::new(vec![0.0, 0.0, 0.0, -1.0])).unwrap();
        let ch = Chart::standard(&antipodal);
        assert!((ch.frame.apply_real(&RealPoint::basis(3, 3)).coords[3] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn density_examples() {
        let ch = Chart::<f64>::at_en(3);
        assert!((metric_density(&ch, &[0.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-9);
        let v = [0.2, 0.3, -0.1];
        let d0 = metric_density(&ch, &v).unwrap();
        // rotate spatial part, keep v0
        let th: f64 = 0.7;
        let rv = [v[0], th.cos() * v[1] - th.sin() * v[2], th.sin() * v[1] + th.cos() * v[2]];
        assert!((metric_density(&ch, &rv).unwrap() - d0).abs() < 1e-9);
        // boost in the chart (fixes e_n)
        let b = Isometry::boost_axis(3, 1, 0.5).unwrap();
        let bv = b.apply_raw(&[v[0], v[1], v[2], 0.0]);
        assert!((metric_density(&ch, &bv[..3]).unwrap() - d0).abs() < 1e-8);
    }

    #[test]
    fn generic_over_f32() {
        let x = DeSitterPoint::<f32>::e_n(2);
        let v = TangentVector::new(&x, RealPoint::new(vec![0.2f32, 0.1, 0.0])).unwrap();
        let y = exp_map(&x, &v).unwrap();
        let back = log_map(&x, &y).unwrap();
        assert!((back.v.coords[0] - 0.2).abs() < 1e-5);
    }
}
