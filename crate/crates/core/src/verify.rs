//! The acceptance suite: twelve numbered criteria, each a list of named
//! checks with explicit tolerances, plus generation and integrity checks
//! of the frozen reference fixtures.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist1d::{
    eps_limit_pairing, i0_decompose, log_i0_pair, pair as pair_1d, pv_subtraction_orders, EpsFamily, ModelDist1D, TestFn1D, TestFunction, TestKind,
};
use crate::error::{CrownError, Result};
use crate::fixtures::{FixtureRecord, FixtureSet};
use crate::hyp2f1::{boundary_2f1, eps_limit, gauss_2f1, CutSide, HypTriple};
use crate::kernels::{
    eigen_residual, gram_matrix, gram_psd, pair, phi_kernel, psi_kernel, recursion_check, ApproachProtocol, KernelParams, SphericalDist,
    SphericalKind, TestFnDS,
};
use crate::lorentz::{crown_membership, exp_raw, form, Branch};
use crate::oracle::{oracle_2f1, oracle_grid};
use crate::special::{factorial, gamma};
use crate::wavefront::{
    antipode_mismatches, assemble_wf, char_membership, cone_char_samples, decay_probe, hamiltonian_flow, membership_mismatches, overlap_count,
    plane_directions, predicted_wf, principal_symbol, probe_1d_cases, sample_conic, wf_contains, CotangentDir, PROBE_TAUS,
};
use crate::{Chart, Complex64, CrownPoint, DeSitterPoint, Isometry};

/// `(n, Re λ, Im λ)` of the four reference parameter sets.
pub const ACCEPTANCE_SETS: [(usize, f64, f64); 4] = [(2, 0.0, 0.3), (3, 0.5, 0.0), (4, 0.0, 1.2), (5, 0.7, 0.0)];
pub const CRITERIA: std::ops::RangeInclusive<u8> = 1..=12;
pub const DEFAULT_SEED: u64 = 20_240_601;
/// Oracle grid shape: radii × angles = 200 points.
pub const ORACLE_RADII: usize = 10;
pub const ORACLE_ANGLES: usize = 20;
pub const ORACLE_KIND: &str = "hyp2f1_oracle";
pub const EPS_KIND: &str = "boundary_eps_limit";
pub const PROBE_KIND: &str = "probe_verdict";
pub const DERIVATION_KIND: &str = "derivation_outcome";
const BOUNDARY_XS: [f64; 3] = [1.1, 1.5, 1.9];

/// One named comparison against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value >= tolerance,
        }
    }

    /// Boolean check, reported as `value = 0` on success.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        let dev = (value - target).abs();
        Self {
            name: format!("{} (value {value:.4})", name.into()),
            value: dev,
            tolerance,
            pass: dev <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    /// Reason when none of the configured parameter sets applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// `criterion 3 PASS  boundary-value consistency (24 checks)`.
    pub fn summary_line(&self) -> String {
        let status = if self.pass() { "PASS" } else { "FAIL" };
        match &self.skipped {
            Some(why) => format!("criterion {:>2} {status}  {} (skipped: {why})", self.id, self.title),
            None => format!(
                "criterion {:>2} {status}  {} ({} checks, {:.1} s)",
                self.id,
                self.title,
                self.checks.len(),
                self.seconds
            ),
        }
    }
}

pub fn criterion_title(id: u8) -> &'static str {
    match id {
        1 => "hypergeometric oracle",
        2 => "identity closure",
        3 => "boundary-value consistency",
        4 => "two-dimensional log law",
        5 => "eigen-equation",
        6 => "positive definiteness",
        7 => "distributional limit",
        8 => "H-invariance and conjugation",
        9 => "one-dimensional calculus",
        10 => "wavefront pipeline identity",
        11 => "microlocal probe",
        12 => "flow laws",
        _ => "unknown",
    }
}

/// Parameter sets, seed and frozen fixtures for a run.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub params: Vec<KernelParams>,
    pub seed: u64,
    pub fixtures: FixtureSet,
}

impl VerifyConfig {
    pub fn new(params: Vec<KernelParams>, fixtures: FixtureSet) -> Self {
        Self {
            params,
            seed: DEFAULT_SEED,
            fixtures,
        }
    }
}

pub fn acceptance_params() -> Vec<KernelParams> {
    ACCEPTANCE_SETS
        .iter()
        .map(|&(n, re, im)| KernelParams::admissible(n, Complex64::new(re, im)).expect("reference sets are admissible"))
        .collect()
}

pub fn params_label(p: &KernelParams) -> String {
    let l = p.lambda.value();
    format!("n={} λ={}{:+}i", p.n(), l.re, l.im)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Runs one criterion; errors become failing checks.
pub fn run_criterion(id: u8, cfg: &VerifyConfig) -> CriterionReport {
    let start = std::time::Instant::now();
    let mut skipped = None;
    let outcome = match id {
        1 => criterion_1(cfg),
        2 => criterion_2(cfg),
        3 => criterion_3(cfg),
        4 => criterion_4(cfg, &mut skipped),
        5 => criterion_5(cfg),
        6 => criterion_6(cfg),
        7 => criterion_7(cfg, &mut skipped),
        8 => criterion_8(cfg, &mut skipped),
        9 => criterion_9(),
        10 => criterion_10(cfg),
        11 => criterion_11(cfg, &mut skipped),
        12 => criterion_12(cfg),
        _ => Err(CrownError::InvalidParameter(format!("no criterion {id}"))),
    };
    let checks = outcome.unwrap_or_else(|e| vec![Check::holds(format!("error: {e}"), false)]);
    CriterionReport {
        id,
        title: criterion_title(id).to_string(),
        checks,
        skipped,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs every criterion on its own thread; reports come back in order.
pub fn run_all(cfg: &VerifyConfig) -> Vec<CriterionReport> {
    std::thread::scope(|s| {
        let handles: Vec<_> = CRITERIA.map(|id| s.spawn(move || run_criterion(id, cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread panicked")).collect()
    })
}

fn matches_params(r: &FixtureRecord, p: &KernelParams) -> bool {
    let l = p.lambda.value();
    r.param_f64("n").ok() == Some(p.n() as f64) && r.param_f64("lambda_re").ok() == Some(l.re) && r.param_f64("lambda_im").ok() == Some(l.im)
}

fn tag_params(r: FixtureRecord, p: &KernelParams) -> FixtureRecord {
    let l = p.lambda.value();
    r.param("n", p.n()).param("lambda_re", l.re).param("lambda_im", l.im)
}

fn criterion_1(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let reference = acceptance_params();
    for p in &cfg.params {
        let label = params_label(p);
        let t = p.triple();
        let mut worst: f64 = 0.0;
        if reference.contains(p) {
            let recs: Vec<&FixtureRecord> = cfg.fixtures.of_kind(ORACLE_KIND).filter(|r| matches_params(r, p)).collect();
            let want = ORACLE_RADII * ORACLE_ANGLES;
            out.push(Check::holds(format!("{label}: {want} frozen oracle points"), recs.len() == want));
            for r in recs {
                let z = r.z().ok_or_else(|| CrownError::Fixture(format!("record {} has no z", r.id)))?;
                worst = worst.max(rel(gauss_2f1(&t, z)?.value, r.value()));
            }
            out.push(Check::at_most(format!("{label}: max relative error vs frozen oracle"), worst, 1e-10));
        } else {
            for z in oracle_grid(ORACLE_RADII, ORACLE_ANGLES) {
                worst = worst.max(rel(gauss_2f1(&t, z)?.value, oracle_2f1(&t, z)?));
            }
            out.push(Check::at_most(format!("{label}: max relative error vs live oracle"), worst, 1e-10));
        }
    }
    Ok(out)
}

/// A crown point `g·z_t` with `g` a random product of boosts and a rotation.
pub fn random_crown(n: usize, rng: &mut ChaCha8Rng, branch: Branch) -> Result<CrownPoint> {
    let g = Isometry::boost(n, rng.gen_range(-0.8..0.8))
        .compose(&Isometry::boost_axis(n, 1, rng.gen_range(-0.8..0.8))?)
        .compose(&Isometry::rotation(n, 1, n, rng.gen_range(-PI..PI))?);
    crate::kernels::crown_approach(&g, rng.gen_range(0.15..1.45), branch)
}

/// `count` forward-branch crown points from a seeded generator.
pub fn random_crowns(n: usize, count: usize, seed: u64) -> Result<Vec<CrownPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_crown(n, &mut rng, Branch::Forward)).collect()
}

/// `count` chart points at `e_n` at least `margin` off the cone in `|[v,v]|`.
pub fn random_regular_points(n: usize, count: usize, margin: f64, seed: u64) -> Vec<DeSitterPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| regular_point(n, &mut rng, margin)).collect()
}

fn criterion_2(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 2);
    let mut out = Vec::new();
    for p in &cfg.params {
        let t = p.triple();
        let q = HypTriple::new(t.a, t.b, t.b);
        let mut worst: f64 = 0.0;
        let mut count = 0;
        while count < 50 {
            let z = Complex64::from_polar(rng.gen_range(0.0..3.0), rng.gen_range(-PI..PI));
            if (z - 1.0).norm() < 0.05 || (z.re > 1.0 && z.im.abs() < 1e-3) {
                continue;
            }
            let expect = (-t.a * (1.0 - z).ln()).exp();
            worst = worst.max(rel(gauss_2f1(&q, z)?.value, expect));
            count += 1;
        }
        out.push(Check::at_most(
            format!("{}: F(a,b;b;z) = (1-z)^-a on 50 points", params_label(p)),
            worst,
            1e-10,
        ));
    }
    let p = KernelParams::admissible(3, c(0.5, 0.0))?;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let z = random_crown(3, &mut rng, Branch::Forward)?;
        let w = random_crown(3, &mut rng, Branch::Forward)?;
        let lhs = psi_kernel(&p, &z, &w)?;
        let rhs = phi_kernel(&z.to_complex(), &w.to_complex(), c(-0.5, 0.0))?;
        worst = worst.max(rel(lhs, rhs));
    }
    out.push(Check::at_most(
        "n=3 λ=1/2 kernel equals ((1-[z,w̄])/2)^(-1/2) on 50 crown pairs",
        worst,
        1e-10,
    ));
    Ok(out)
}

fn criterion_3(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for p in &cfg.params {
        let label = params_label(p);
        let t = p.triple();
        let (mut eps_gap, mut reflect): (f64, f64) = (0.0, 0.0);
        for x in BOUNDARY_XS {
            let plus = boundary_2f1(&t, x, CutSide::Plus)?;
            let minus = boundary_2f1(&t, x, CutSide::Minus)?;
            for (side, v) in [(CutSide::Plus, plus), (CutSide::Minus, minus)] {
                eps_gap = eps_gap.max(rel(eps_limit(&t, x, side)?.value, v));
            }
            reflect = reflect.max(rel(plus, minus.conj()));
        }
        out.push(Check::at_most(
            format!("{label}: closed form vs ε-extrapolation at x = 1.1, 1.5, 1.9"),
            eps_gap,
            1e-6,
        ));
        out.push(Check::at_most(format!("{label}: Schwarz reflection Plus = conj(Minus)"), reflect, 1e-10));
    }
    Ok(out)
}

/// `F(x ± i0) / (-ln(x-1) ± iπ)` and the predicted limit `1/(Γ(ρ+λ)Γ(ρ-λ))`.
pub fn log_law_ratio(p: &KernelParams, gap: f64, side: CutSide) -> Result<(Complex64, Complex64)> {
    let t = p.triple();
    let f = boundary_2f1(&t, 1.0 + gap, side)?;
    let ratio = f / c(-gap.ln(), side.sign() * PI);
    Ok((ratio, 1.0 / (gamma(t.a)? * gamma(t.b)?)))
}

fn criterion_4(cfg: &VerifyConfig, skipped: &mut Option<String>) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for p in cfg.params.iter().filter(|p| p.n() == 2) {
        for side in [CutSide::Plus, CutSide::Minus] {
            let (ratio, limit) = log_law_ratio(p, 1e-4, side)?;
            out.push(Check::at_most(
                format!("{} {side:?}: ratio vs 1/(Γ(ρ+λ)Γ(ρ-λ)) at x-1 = 1e-4", params_label(p)),
                rel(ratio, limit),
                0.02,
            ));
        }
    }
    if out.is_empty() {
        *skipped = Some("needs a parameter set with n = 2".into());
    }
    Ok(out)
}

/// A point of the chart at `e_n` at least `margin` away from the cone in `|[v,v]|`.
fn regular_point(n: usize, rng: &mut ChaCha8Rng, margin: f64) -> DeSitterPoint {
    let chart = Chart::at_en(n);
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q = -v[0] * v[0] + v[1..].iter().map(|x| x * x).sum::<f64>();
        if q.abs() >= margin && v.iter().map(|x| x * x).sum::<f64>() < 1.2 {
            if let Ok(y) = chart.point(&v) {
                return y;
            }
        }
    }
}

fn criterion_5(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    const HS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
    let mut out = Vec::new();
    for p in &cfg.params {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (50 + p.n() as u64));
        let points: Vec<DeSitterPoint> = (0..20).map(|_| regular_point(p.n(), &mut rng, 0.2)).collect();
        for kind in [SphericalKind::Psi, SphericalKind::PsiTilde, SphericalKind::PhiPow] {
            let dist = SphericalDist::at_en(kind, *p);
            let (mut slope_dev, mut worst): (f64, f64) = (0.0, 0.0);
            for y in &points {
                let r = HS.iter().map(|&h| eigen_residual(&dist, y, h)).collect::<Result<Vec<_>>>()?;
                let slope = (r[0].residual.norm() / r[2].residual.norm()).log2() / 2.0;
                slope_dev = slope_dev.max((slope - 2.0).abs());
                let extrap = (4.0 * r[2].residual - r[1].residual) / 3.0;
                worst = worst.max(extrap.norm() / r[2].value.norm());
            }
            let label = format!("{} {kind:?}", params_label(p));
            out.push(Check::at_most(format!("{label}: max |slope - 2| over 20 points"), slope_dev, 0.3));
            out.push(Check::at_most(format!("{label}: extrapolated residual / |value|"), worst, 1e-5));
        }
    }
    Ok(out)
}

fn criterion_6(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for p in &cfg.params {
        let n = p.n();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (60 + n as u64));
        let pts = (0..20).map(|_| random_crown(n, &mut rng, Branch::Forward)).collect::<Result<Vec<_>>>()?;
        let rep = gram_psd(p, &pts)?;
        let label = params_label(p);
        out.push(Check::at_least(
            format!("{label}: min eigenvalue / max eigenvalue"),
            rep.min_eig / rep.max_eig,
            -1e-8,
        ));
        let g = Isometry::boost(n, 0.7).compose(&Isometry::rotation(n, 1, n, 1.1)?);
        let moved = pts
            .iter()
            .map(|z| crown_membership(&g.apply(&z.to_complex())).map_err(|v| CrownError::InvalidParameter(format!("{v:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let a = gram_matrix(p, &pts)?;
        let b = gram_matrix(p, &moved)?;
        let defect = a
            .iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        out.push(Check::at_most(format!("{label}: Gram invariance under G"), defect, 1e-10));
    }
    Ok(out)
}

/// Chart point of a test bump straddling the light cone of `e_n`.
fn straddling_center(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = 0.55;
    v[1] = 0.4;
    if n > 2 {
        v[2] = 0.2;
    }
    v
}

fn criterion_7(cfg: &VerifyConfig, skipped: &mut Option<String>) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for p in cfg.params.iter().filter(|p| p.n() <= 3) {
        let test = TestFnDS::at_chart_point(&straddling_center(p.n()), 0.3)?;
        for kind in [SphericalKind::Psi, SphericalKind::PsiTilde] {
            let dist = SphericalDist::at_en(kind, *p);
            let a = pair(&dist, &test, &ApproachProtocol::default())?;
            let b = pair(&dist, &test, &ApproachProtocol::alternate())?;
            let label = format!("{} {kind:?}", params_label(p));
            out.push(Check::at_most(
                format!("{label}: two disjoint t-grids"),
                (a.value() - b.value()).norm(),
                1e-4,
            ));
            let gap = a.route_gap().ok_or_else(|| CrownError::Unsupported("direct route".into()))?;
            out.push(Check::at_most(format!("{label}: approach vs direct quadrature"), gap, 1e-4));
        }
    }
    if out.is_empty() {
        *skipped = Some("needs a parameter set with n ≤ 3".into());
    }
    Ok(out)
}

/// Three boosts and (for `n ≥ 3`) three rotations, all fixing `e_n`.
pub fn stabilizer_samples(n: usize) -> Result<Vec<(String, Isometry)>> {
    let mut out = Vec::new();
    for (k, t) in [0.25, -0.4, 0.6].into_iter().enumerate() {
        let axis = 1 + k % (n - 1);
        out.push((format!("boost axis {axis} t={t}"), Isometry::boost_axis(n, axis, t)?));
    }
    if n >= 3 {
        for (k, th) in [0.8, -1.3, 2.2].into_iter().enumerate() {
            let (i, j) = if n > 3 && k == 2 { (2, 3) } else { (1, 2) };
            out.push((format!("rotation ({i},{j}) θ={th}"), Isometry::rotation(n, i, j, th)?));
        }
    }
    Ok(out)
}

fn criterion_8(cfg: &VerifyConfig, skipped: &mut Option<String>) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let proto = ApproachProtocol::default();
    for p in cfg.params.iter().filter(|p| p.n() <= 3) {
        let n = p.n();
        let label = params_label(p);
        let mut center = vec![0.0; n];
        center[0] = 0.45;
        center[1] = 0.35;
        if n > 2 {
            center[2] = 0.1;
        }
        let mut wave = vec![1.0, 0.5];
        wave.resize(n, -2.0);
        let test = TestFnDS::at_chart_point(&center, 0.3)?.with_weight(c(0.3, -0.8)).with_wave(wave)?;
        let psi = SphericalDist::at_en(SphericalKind::Psi, *p);
        let base = pair(&psi, &test, &proto)?.value();
        let mut worst: f64 = 0.0;
        let hs = stabilizer_samples(n)?;
        for (_, h) in &hs {
            worst = worst.max((pair(&psi, &test.transformed(h), &proto)?.value() - base).norm());
        }
        out.push(Check::at_most(
            format!("{label}: max pairing defect over {} stabilizer elements", hs.len()),
            worst,
            1e-4,
        ));
        let tilde = SphericalDist::at_en(SphericalKind::PsiTilde, *p);
        let conj = pair(&tilde, &test.conj(), &proto)?.value();
        out.push(Check::at_most(
            format!("{label}: pair(Ψ̃, conj φ) = conj pair(Ψ, φ)"),
            (conj - base.conj()).norm(),
            1e-6,
        ));
    }
    if out.is_empty() {
        *skipped = Some("needs a parameter set with n ≤ 3".into());
    }
    Ok(out)
}

fn criterion_9() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let phi = TestFn1D::mollifier(0.1, 0.8)?;
    let plus = pair_1d(
        &ModelDist1D::I0Pow {
            lambda: c(-1.0, 0.0),
            side: CutSide::Plus,
        },
        &phi,
    )?
    .value;
    let minus = pair_1d(
        &ModelDist1D::I0Pow {
            lambda: c(-1.0, 0.0),
            side: CutSide::Minus,
        },
        &phi,
    )?
    .value;
    let expect = c(0.0, -2.0 * PI) * phi.value(0.0);
    out.push(Check::at_most(
        "Sokhotski–Plemelj jump equals -2πiφ(0)",
        (plus - minus - expect).norm(),
        1e-8,
    ));
    let phi = TestFn1D::mollifier(0.15, 0.7)?;
    let mut worst: f64 = 0.0;
    for lambda in [c(-0.5, 0.0), c(-1.0, 0.0), c(-1.5, 0.0), c(-2.0, 0.0), c(-0.3, 0.8)] {
        for side in [CutSide::Plus, CutSide::Minus] {
            // the decomposition is what the pairing evaluates; make sure it exists
            i0_decompose(lambda, side)?;
            let d = pair_1d(&ModelDist1D::I0Pow { lambda, side }, &phi)?.value;
            worst = worst.max((d - eps_limit_pairing(EpsFamily::Pow(lambda), side, &phi).value).norm());
        }
    }
    out.push(Check::at_most("(x ± i0)^λ decompositions vs ε-limits", worst, 1e-6));
    let mut worst: f64 = 0.0;
    for side in [CutSide::Plus, CutSide::Minus] {
        let phi = TestFn1D::mollifier(0.2, 0.6)?;
        worst = worst.max((log_i0_pair(side, &phi) - eps_limit_pairing(EpsFamily::Log, side, &phi).value).norm());
    }
    out.push(Check::at_most("ln(x ± i0) decomposition vs ε-limits", worst, 1e-6));
    let mut exact = true;
    for k in 0..8 {
        let phi = TestFn1D::new(TestKind::MollifierMonomial(k), 0.0, 1.0)?;
        let r = pair_1d(&ModelDist1D::DeltaDeriv { k }, &phi)?;
        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
        exact &= r.value.re == s * factorial(k) * (-1f64).exp() && r.value.im == 0.0;
    }
    out.push(Check::holds("δ^(k) against x^k·bump equals (-1)^k k! e^-1 exactly, k < 8", exact));
    Ok(out)
}

fn distinct_dims(cfg: &VerifyConfig) -> Vec<usize> {
    let mut ns: Vec<usize> = cfg.params.iter().map(|p| p.n()).collect();
    ns.sort_unstable();
    ns.dedup();
    ns
}

fn criterion_10(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in distinct_dims(cfg) {
        let x = DeSitterPoint::e_n(n);
        let samples = sample_conic(n, 10_000, cfg.seed ^ (100 + n as u64));
        let mut mism = 0;
        for kind in [
            SphericalKind::Psi,
            SphericalKind::PsiTilde,
            SphericalKind::PhiPow,
            SphericalKind::PhiTildePow,
        ] {
            mism += membership_mismatches(&predicted_wf(kind, &x)?, &assemble_wf(kind, &x)?, &samples);
        }
        out.push(Check::at_most(
            format!("n={n}: assembled vs predicted mismatches on 10^4 samples, four kinds"),
            mism as f64,
            0.0,
        ));
        let psi = predicted_wf(SphericalKind::Psi, &x)?;
        let tilde = predicted_wf(SphericalKind::PsiTilde, &x)?;
        let phi = predicted_wf(SphericalKind::PhiPow, &x)?;
        let phit = predicted_wf(SphericalKind::PhiTildePow, &x)?;
        out.push(Check::at_most(
            format!("n={n}: Ψ̃ spec vs antipode of Ψ spec"),
            antipode_mismatches(&tilde, &psi, &samples) as f64,
            0.0,
        ));
        let self_anti = samples
            .iter()
            .filter(|d| wf_contains(&psi, d) && wf_contains(&psi, &d.antipode()))
            .count();
        out.push(Check::at_most(format!("n={n}: WF ∩ -WF"), self_anti as f64, 0.0));
        out.push(Check::at_most(
            format!("n={n}: Ψ and Ψ̃ specs overlap"),
            overlap_count(&psi, &tilde, &samples) as f64,
            0.0,
        ));
        let phi_gap = membership_mismatches(&psi, &phi, &samples) + membership_mismatches(&tilde, &phit, &samples);
        out.push(Check::at_most(format!("n={n}: Φ specs vs Ψ specs"), phi_gap as f64, 0.0));
        let cover = cone_char_samples(n, 2000, cfg.seed ^ (200 + n as u64));
        let uncovered = cover
            .iter()
            .filter(|d| !char_membership(d) || !(wf_contains(&psi, d) || wf_contains(&tilde, d)))
            .count();
        out.push(Check::at_most(
            format!("n={n}: on-cone characteristic directions outside Ψ ∪ Ψ̃"),
            uncovered as f64,
            0.0,
        ));
    }
    Ok(out)
}

/// Three probe base points per dimension: two on the cone, one inside.
pub fn probe_bases(n: usize) -> Vec<Vec<f64>> {
    let r = 0.3 / 2f64.sqrt();
    match n {
        2 => vec![vec![0.3, 0.3], vec![-0.25, 0.25], vec![0.05, 0.4]],
        _ => vec![vec![0.3, r, r], vec![-0.25, 0.0, -0.25], vec![0.05, 0.4, 0.0]],
    }
}

/// Null plane directions at the apex with `ξ_0 < 0` and `ξ_0 > 0`.
fn apex_null_directions(n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let h = 0.5f64.sqrt();
    let mk = |t: f64, s: f64| {
        let mut d = vec![t * h, s * h];
        d.resize(n, 0.0);
        d
    };
    (vec![mk(-1.0, 1.0), mk(-1.0, -1.0)], vec![mk(1.0, 1.0), mk(1.0, -1.0)])
}

/// Probe verdicts at the apex for the two null time orientations: `(past
/// singular, future singular)` for each direction.
pub fn apex_tiebreak(p: &KernelParams, kind: SphericalKind) -> Result<(Vec<bool>, Vec<bool>)> {
    let n = p.n();
    let (past, future) = apex_null_directions(n);
    let dirs: Vec<Vec<f64>> = past.iter().chain(&future).cloned().collect();
    let r = decay_probe(&SphericalDist::at_en(kind, *p), &vec![0.0; n], &dirs, &PROBE_TAUS)?;
    let verdicts: Vec<bool> = r.rows.iter().map(|row| row.singular).collect();
    Ok((verdicts[..past.len()].to_vec(), verdicts[past.len()..].to_vec()))
}

/// Smallest ratio at `τ = 256` between the predicted along-cone direction
/// and every predicted-regular plane direction, at an on-cone base point.
pub fn singular_regular_ratio(p: &KernelParams) -> Result<f64> {
    let n = p.n();
    let base = probe_bases(n).swap_remove(0);
    let dist = SphericalDist::at_en(SphericalKind::Psi, *p);
    let spec = predicted_wf(SphericalKind::Psi, &dist.basepoint)?;
    let mut singular = vec![-base[0]];
    singular.extend(base[1..].iter().cloned());
    let regular: Vec<Vec<f64>> = plane_directions(&base, 16)
        .into_iter()
        .filter(|d| !wf_contains(&spec, &CotangentDir::new(base.clone(), d.clone()).expect("unit")))
        .collect();
    let mut dirs = vec![singular];
    dirs.extend(regular);
    let r = decay_probe(&dist, &base, &dirs, &PROBE_TAUS)?;
    let s = r.magnitude_at(0, 256.0).expect("tau on grid");
    let worst = (1..dirs.len()).filter_map(|id| r.magnitude_at(id, 256.0)).fold(0.0, f64::max);
    Ok(s / worst.max(1e-300))
}

/// Kinds whose probe verdicts are compared with the predicted sets.
pub fn probe_kinds(n: usize) -> Vec<SphericalKind> {
    if n == 2 {
        // the power kernel with exponent (2-n)/2 = 0 is constant
        vec![SphericalKind::Psi, SphericalKind::PsiTilde]
    } else {
        vec![
            SphericalKind::Psi,
            SphericalKind::PsiTilde,
            SphericalKind::PhiPow,
            SphericalKind::PhiTildePow,
        ]
    }
}

fn criterion_11(cfg: &VerifyConfig, skipped: &mut Option<String>) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for p in cfg.params.iter().filter(|p| p.n() <= 3) {
        let n = p.n();
        let label = params_label(p);
        out.push(Check::at_least(
            format!("{label}: singular / regular magnitude at τ = 256"),
            singular_regular_ratio(p)?,
            1e3,
        ));
        let mut disagree = 0;
        let mut total = 0;
        for kind in probe_kinds(n) {
            let dist = SphericalDist::at_en(kind, *p);
            let spec = predicted_wf(kind, &dist.basepoint)?;
            for base in probe_bases(n) {
                let r = decay_probe(&dist, &base, &plane_directions(&base, 16), &PROBE_TAUS)?;
                for row in &r.rows {
                    total += 1;
                    disagree += (row.singular != wf_contains(&spec, &CotangentDir::new(base.clone(), row.xi.clone())?)) as usize;
                }
            }
        }
        out.push(Check::at_most(
            format!("{label}: probe vs prediction disagreements in {total} directions"),
            disagree as f64,
            0.0,
        ));
        for kind in [SphericalKind::Psi, SphericalKind::PsiTilde] {
            let (past, future) = apex_tiebreak(p, kind)?;
            let (want_past, want_future) = (kind == SphericalKind::Psi, kind == SphericalKind::PsiTilde);
            let ok = past.iter().all(|s| *s == want_past) && future.iter().all(|s| *s == want_future);
            out.push(Check::holds(
                format!(
                    "{label} {kind:?}: apex null directions singular only for ξ_0 {}",
                    if want_past { "< 0" } else { "> 0" }
                ),
                ok,
            ));
        }
    }
    if let Some(p) = cfg.params.first() {
        for case in probe_1d_cases(p)? {
            out.push(Check::holds(
                format!(
                    "1-D {}: classification (+τ singular {}, -τ singular {})",
                    case.name, case.expect_positive, case.expect_negative
                ),
                case.matches(),
            ));
        }
    }
    if cfg.params.iter().all(|p| p.n() > 3) {
        *skipped = Some("two-dimensional probes need a parameter set with n ≤ 3".into());
    }
    Ok(out)
}

fn criterion_12(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in distinct_dims(cfg) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (120 + n as u64));
        let (mut drift, mut symbol, mut rk): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for _ in 0..20 {
            let mut omega: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let on = omega.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            omega.iter_mut().for_each(|x| *x /= on);
            let mut xi = vec![if rng.gen_bool(0.5) { 1.0 } else { -1.0 }];
            xi.extend(omega);
            let v0: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let strip = hamiltonian_flow(&v0, &xi, 2.0)?;
            for s in strip.samples(50) {
                drift = drift.max(s.xi.iter().zip(&xi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                symbol = symbol.max(principal_symbol(&s.xi)?.abs());
            }
            rk = rk.max(strip.rk4_deviation(200));
        }
        out.push(Check::at_most(format!("n={n}: covector drift along the strip"), drift, 0.0));
        out.push(Check::at_most(format!("n={n}: |P_n| along the strip"), symbol, 1e-14));
        out.push(Check::at_most(format!("n={n}: closed form vs RK4"), rk, 1e-10));
        let mut affine: f64 = 0.0;
        for _ in 0..20 {
            let g = Isometry::boost(n, rng.gen_range(-0.7..0.7)).compose(&Isometry::rotation(n, 1, n, rng.gen_range(-PI..PI))?);
            let x = g.apply_point(&DeSitterPoint::e_n(n));
            let chart = Chart::standard(&x);
            let mut v = vec![1.0];
            let mut omega: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let on = omega.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            omega.iter_mut().for_each(|w| *w /= on);
            v.extend(omega);
            let s = rng.gen_range(0.1..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let tangent: Vec<f64> = chart.tangent(&v).into_iter().map(|t| s * t).collect();
            let y = exp_raw(x.coords(), &tangent);
            let lin: Vec<f64> = x.coords().iter().zip(&tangent).map(|(a, b)| a + b).collect();
            let scale = lin.iter().map(|t| t.abs()).fold(1.0, f64::max);
            affine = affine.max(y.iter().zip(&lin).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale);
            debug_assert!(form(&tangent, &tangent).abs() < 1e-12);
        }
        out.push(Check::at_most(format!("n={n}: Exp_x(v) = x + v for null v"), affine, 1e-14));
    }
    Ok(out)
}

/// Records whose provenance routes can be recomputed cheaply.
fn recompute(r: &FixtureRecord) -> Option<Result<Complex64>> {
    let params =
        || -> Result<KernelParams> { KernelParams::admissible(r.param_f64("n")? as usize, c(r.param_f64("lambda_re")?, r.param_f64("lambda_im")?)) };
    match r.kind.as_str() {
        ORACLE_KIND => Some(params().and_then(|p| {
            let z = r.z().ok_or_else(|| CrownError::Fixture(format!("record {} has no z", r.id)))?;
            oracle_2f1(&p.triple(), z)
        })),
        EPS_KIND => Some(params().and_then(|p| {
            let x = r.x.ok_or_else(|| CrownError::Fixture(format!("record {} has no x", r.id)))?;
            let side = r.side.ok_or_else(|| CrownError::Fixture(format!("record {} has no side", r.id)))?;
            Ok(eps_limit(&p.triple(), x, side)?.value)
        })),
        _ => None,
    }
}

/// Every record carries a provenance tag and every recomputable record
/// still matches its route.
pub fn fixture_integrity(set: &FixtureSet) -> Vec<Check> {
    let missing = set.missing_provenance();
    let mut out = vec![Check::at_most("fixtures without provenance", missing.len() as f64, 0.0)];
    let (mut worst, mut failed, mut checked): (f64, usize, usize) = (0.0, 0, 0);
    for r in &set.records {
        match recompute(r) {
            Some(Ok(v)) => {
                checked += 1;
                worst = worst.max(rel(v, r.value()));
            }
            Some(Err(_)) => failed += 1,
            None => {}
        }
    }
    out.push(Check::holds(format!("{checked} recomputable fixtures present"), checked > 0));
    out.push(Check::at_most("fixtures whose route fails", failed as f64, 0.0));
    out.push(Check::at_most("max relative drift of recomputed fixtures", worst, 1e-12));
    out
}

/// Which constants survive on the two connection terms: the largest
/// relative gap to the ε-extrapolation over the reference sets at `x = 1.5`.
fn derivation_record_constants() -> Result<FixtureRecord> {
    let mut worst: f64 = 0.0;
    for p in acceptance_params() {
        for side in [CutSide::Plus, CutSide::Minus] {
            let t = p.triple();
            worst = worst.max(rel(boundary_2f1(&t, 1.5, side)?, eps_limit(&t, 1.5, side)?.value));
        }
    }
    Ok(FixtureRecord::new("connection-constants", DERIVATION_KIND, c(worst, 0.0), "boundary values vs ε-extrapolation, x = 1.5, four reference sets")
        .with_note("regular term carries Γ(n/2)Γ((2-n)/2)/(Γ(1/2+λ)Γ(1/2-λ)), singular term Γ(n/2)Γ((n-2)/2)/(Γ(ρ+λ)Γ(ρ-λ)); even n uses the logarithmic series only"))
}

fn derivation_record_subtraction() -> FixtureRecord {
    let orders: Vec<String> = (1..=8).map(|k| format!("k={k}: {:?}", pv_subtraction_orders(k))).collect();
    FixtureRecord::new(
        "pv-subtraction-orders",
        DERIVATION_KIND,
        c(0.0, 0.0),
        "re-derived homogeneous regularization of x^-k",
    )
    .with_note(format!("derivative orders j < k-1 with k-j even; {}", orders.join("; ")))
}

/// Recursion residual at `h = 5e-3` for the constant pairing that survived.
fn derivation_record_recursion() -> Result<FixtureRecord> {
    let z = crate::kernels::crown_approach(&Isometry::identity(3), 0.4, Branch::Forward)?;
    let grid = random_regular_points(3, 5, 0.05, DEFAULT_SEED);
    let lp = c(0.7, 0.0);
    let r = recursion_check(&z, lp, &grid, 5e-3)?;
    Ok(FixtureRecord::new(
        "recursion-constants",
        DERIVATION_KIND,
        c(r, 0.0),
        "central differences, n = 3, λ' = 0.7, h = 5e-3",
    )
    .param("n", 3)
    .with_note("operator □ + (λ'+1)(λ'+n) on Φ^{λ'+1} equals (λ'+1)(λ'+n/2) Φ^{λ'}"))
}

/// Runs the oracles and probes and returns provenance-tagged records.
pub fn generate_fixtures() -> Result<FixtureSet> {
    let mut set = FixtureSet::default();
    let grid = oracle_grid(ORACLE_RADII, ORACLE_ANGLES);
    for p in acceptance_params() {
        let t = p.triple();
        for (k, z) in grid.iter().enumerate() {
            let v = oracle_2f1(&t, *z)?;
            let id = format!("oracle-n{}-{k:03}", p.n());
            set.push(tag_params(FixtureRecord::new(id, ORACLE_KIND, v, "extended-precision series, 256 fraction bits"), &p).at_z(*z));
        }
        for x in BOUNDARY_XS {
            for side in [CutSide::Plus, CutSide::Minus] {
                let v = eps_limit(&t, x, side)?.value;
                let id = format!("eps-n{}-{x}-{side:?}", p.n()).to_lowercase();
                set.push(tag_params(FixtureRecord::new(id, EPS_KIND, v, "Richardson extrapolation of F(x ± iε)"), &p).at_x(x, Some(side)));
            }
        }
    }
    for p in acceptance_params().into_iter().filter(|p| p.n() <= 3) {
        for kind in [SphericalKind::Psi, SphericalKind::PsiTilde] {
            let (past, future) = apex_tiebreak(&p, kind)?;
            let verdict = |v: &[bool]| {
                if v.iter().all(|s| *s) {
                    1.0
                } else if v.iter().all(|s| !*s) {
                    0.0
                } else {
                    0.5
                }
            };
            let note = format!(
                "apex null directions: xi_0 < 0 {}, xi_0 > 0 {}",
                if verdict(&past) == 1.0 { "singular" } else { "regular" },
                if verdict(&future) == 1.0 { "singular" } else { "regular" }
            );
            let id = format!("apex-n{}-{kind:?}", p.n()).to_lowercase();
            set.push(
                tag_params(
                    FixtureRecord::new(id, PROBE_KIND, c(verdict(&past), verdict(&future)), "windowed decay probe at the apex"),
                    &p,
                )
                .with_note(note),
            );
        }
        let ratio = singular_regular_ratio(&p)?;
        set.push(tag_params(
            FixtureRecord::new(
                format!("ratio-n{}", p.n()),
                PROBE_KIND,
                c(ratio, 0.0),
                "windowed decay probe at tau = 256",
            ),
            &p,
        ));
    }
    set.push(derivation_record_constants()?);
    set.push(derivation_record_subtraction());
    set.push(derivation_record_recursion()?);
    let p = acceptance_params().swap_remove(1);
    for case in probe_1d_cases(&p)? {
        let t = &case.table;
        let value = c(if t.rapid_plus { 0.0 } else { 1.0 }, if t.rapid_minus { 0.0 } else { 1.0 });
        let note = format!(
            "exponents {:.2} (+tau), {:.2} (-tau); expected singular {} / {}",
            t.exponent_plus, t.exponent_minus, case.expect_positive, case.expect_negative
        );
        let id = format!("probe1d-{}", case.name);
        set.push(
            tag_params(FixtureRecord::new(id, PROBE_KIND, value, "one-dimensional windowed Fourier probe"), &p)
                .at_x(case.center, None)
                .with_note(note),
        );
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_constructors() {
        assert!(Check::at_most("a", 1.0, 1.0).pass);
        assert!(!Check::at_most("a", f64::NAN, 1.0).pass);
        assert!(!Check::at_least("a", 0.5, 1.0).pass);
        assert!(Check::within("s", 2.1, 2.0, 0.3).pass);
        assert_eq!(Check::holds("b", false).value, 1.0);
    }

    #[test]
    fn reference_sets_and_labels() {
        let ps = acceptance_params();
        assert_eq!(ps.len(), 4);
        assert_eq!(params_label(&ps[1]), "n=3 λ=0.5+0i");
        assert_eq!(stabilizer_samples(2).unwrap().len(), 3);
        for n in 3..=5 {
            let hs = stabilizer_samples(n).unwrap();
            assert_eq!(hs.len(), 6);
            assert!(hs.iter().all(|(_, h)| h.fixes_en()));
        }
    }

    #[test]
    fn unknown_criterion_fails() {
        let cfg = VerifyConfig::new(acceptance_params(), FixtureSet::default());
        assert!(!run_criterion(13, &cfg).pass());
    }

    #[test]
    fn oracle_criterion_needs_fixtures() {
        let cfg = VerifyConfig::new(acceptance_params(), FixtureSet::default());
        let rep = run_criterion(1, &cfg);
        assert!(!rep.pass());
        let integrity = fixture_integrity(&FixtureSet::default());
        assert!(integrity.iter().any(|c| !c.pass));
    }

    #[test]
    fn tampered_fixture_is_caught() {
        let p = KernelParams::admissible(3, c(0.5, 0.0)).unwrap();
        let z = c(0.3, 0.2);
        let v = oracle_2f1(&p.triple(), z).unwrap();
        let mut set = FixtureSet::default();
        set.push(tag_params(FixtureRecord::new("a", ORACLE_KIND, v, "oracle"), &p).at_z(z));
        assert!(fixture_integrity(&set).iter().all(|c| c.pass));
        set.records[0].value.re += 1e-9;
        assert!(fixture_integrity(&set).iter().any(|c| !c.pass));
        set.records[0].provenance.clear();
        assert!(!fixture_integrity(&set)[0].pass);
    }
}
