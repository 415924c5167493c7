//! `crownwave`: evaluation, verification, fixture generation and plot data.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crownwave::dist1d::{self, eps_limit_pairing, i0_decompose, EpsFamily, ModelDist1D, TestFn1D};
use crownwave::fixtures::{default_fixture_dir, fixture_dir, FixtureSet, FIXTURE_ENV};
use crownwave::hyp2f1::{boundary_2f1, eps_limit, family_jump_closed_form, gauss_2f1, jump_across_cut, parse_complex, CutSide};
use crownwave::kernels::{
    self, crown_approach, eigen_residual, eval_pointwise, gram_matrix, gram_psd, hermitian_spectrum, recursion_check, ApproachProtocol, KernelParams,
    SphericalDist, SphericalKind, TestFnDS,
};
use crownwave::lorentz::Branch;
use crownwave::verify::{self, run_all, Check, VerifyConfig};
use crownwave::wavefront::{
    assemble_wf, decay_probe, hamiltonian_flow, membership_mismatches, plane_directions, predicted_wf, principal_symbol, sample_conic, spec_members,
    wf_contains, CotangentDir, PROBE_TAUS,
};
use crownwave::{Chart, Complex64, CrownError, DeSitterPoint, Isometry, RealPoint};

#[derive(Parser, Debug)]
#[command(name = "crownwave", version, about = "Boundary values of spherical distributions on de Sitter space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format; `csv` is available for tabular commands.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Leave timings out of the report so that reruns are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gauss hypergeometric function of the kernel family.
    #[command(subcommand)]
    Hyp(HypCmd),
    /// Spherical kernels and their boundary distributions.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// One-dimensional model distributions.
    #[command(subcommand)]
    Dist(DistCmd),
    /// Wavefront sets, probes and bicharacteristic strips.
    #[command(subcommand)]
    Wf(WfCmd),
    /// Acceptance suite.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Reference data.
    #[command(subcommand)]
    Fixtures(FixturesCmd),
}

#[derive(Args, Debug, Clone, Serialize)]
struct Model {
    /// Dimension of de Sitter space.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Spectral parameter as `a+bi`.
    #[arg(long, default_value = "0.5", allow_hyphen_values = true)]
    lambda: String,
}

impl Model {
    fn params(&self) -> Result<KernelParams, Failure> {
        let lambda = parse_complex(&self.lambda).map_err(Failure::usage)?;
        KernelParams::admissible(self.n, lambda).map_err(Failure::usage)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct KindArg {
    /// psi, psi_tilde, phi, phi_tilde or difference.
    #[arg(long, default_value = "psi")]
    kind: String,
    /// `e_n` or comma-separated ambient coordinates of a de Sitter point.
    #[arg(long, default_value = "e_n", allow_hyphen_values = true)]
    basepoint: String,
}

impl KindArg {
    fn dist(&self, p: KernelParams) -> Result<SphericalDist, Failure> {
        let kind = SphericalKind::parse(&self.kind).map_err(Failure::usage)?;
        let x = basepoint(&self.basepoint, p.n())?;
        SphericalDist::new(kind, x, p).map_err(Failure::usage)
    }
}

#[derive(Subcommand, Debug)]
enum HypCmd {
    /// F(a, b; c; z) with (a, b, c) from (n, λ).
    Eval {
        #[command(flatten)]
        model: Model,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
    },
    /// Jump F(x + i0) - F(x - i0) across the cut.
    Jump {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        x: f64,
    },
    /// Boundary value F(x ± i0) with an ε-extrapolation cross-check.
    Boundary {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        x: f64,
        #[arg(long, value_enum, default_value_t = Side::Plus)]
        side: Side,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Side {
    Plus,
    Minus,
}

impl From<Side> for CutSide {
    fn from(s: Side) -> Self {
        match s {
            Side::Plus => CutSide::Plus,
            Side::Minus => CutSide::Minus,
        }
    }
}

#[derive(Subcommand, Debug)]
enum KernelCmd {
    /// Pointwise value off the light cone at a chart point of the base point.
    Eval {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        kind: KindArg,
        /// Chart coordinates.
        #[arg(long, allow_hyphen_values = true)]
        v: String,
    },
    /// Pairing with a smooth bump centered at a chart point.
    Pair {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        kind: KindArg,
        #[arg(long, allow_hyphen_values = true)]
        center: String,
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        /// Use the alternate approach grid.
        #[arg(long)]
        alternate: bool,
    },
    /// Gram matrix of the kernel on random crown points.
    Gram {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
    },
    /// Eigen-equation residual at a chart point.
    Eigen {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        kind: KindArg,
        #[arg(long, allow_hyphen_values = true)]
        v: String,
        #[arg(long, default_value_t = 5e-3)]
        h: f64,
    },
    /// Raising recursion of the power kernels.
    Recursion {
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Exponent λ' as `a+bi`.
        #[arg(long, default_value = "0.7", allow_hyphen_values = true)]
        lambda: String,
        /// Imaginary time of the crown point.
        #[arg(long, default_value_t = 0.4)]
        t: f64,
        #[arg(long, default_value_t = 5e-3)]
        h: f64,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Subcommand, Debug)]
enum DistCmd {
    /// Pair a model distribution with a bump.
    Pair {
        /// delta:K, heaviside, pv:K, xplus:λ, xminus:λ, pow:λ:plus|minus, log:plus|minus, expinv.
        #[arg(long, allow_hyphen_values = true)]
        dist: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        center: f64,
        #[arg(long, default_value_t = 1.0)]
        halfwidth: f64,
    },
    /// Split (x ± i0)^λ into regularized pieces.
    Decompose {
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long, value_enum, default_value_t = Side::Plus)]
        side: Side,
    },
}

#[derive(Subcommand, Debug)]
enum WfCmd {
    /// Predicted wavefront set, sampled for plotting.
    Predict {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value = "psi")]
        kind: String,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
    },
    /// Windowed Fourier decay along plane directions at a chart point.
    Probe {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "psi")]
        kind: String,
        #[arg(long, allow_hyphen_values = true)]
        base: String,
        #[arg(long, default_value_t = 16)]
        directions: usize,
    },
    /// Bicharacteristic strip through a characteristic covector.
    Flow {
        #[arg(long, allow_hyphen_values = true)]
        xi: String,
        /// Start point; the origin by default.
        #[arg(long, allow_hyphen_values = true)]
        v0: Option<String>,
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
}

#[derive(Subcommand, Debug)]
enum VerifyCmd {
    /// All twelve criteria; the four reference parameter sets by default.
    All {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<String>,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
        /// Only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Subcommand, Debug)]
enum FixturesCmd {
    /// Recompute every reference record and write it with provenance.
    Generate {
        /// Target directory; the fixture directory by default.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

/// Error with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn usage(e: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, err: e.into() }
    }

    fn io(e: impl Into<anyhow::Error>) -> Self {
        Self { code: 3, err: e.into() }
    }
}

impl From<CrownError> for Failure {
    fn from(e: CrownError) -> Self {
        let code = if matches!(e, CrownError::Io(_)) { 3 } else { 2 };
        Self { code, err: e.into() }
    }
}

/// What a subcommand produced before serialization.
struct Outcome {
    config: Value,
    results: Value,
    checks: Vec<Check>,
    table: Option<Vec<Vec<String>>>,
}

impl Outcome {
    fn new(config: Value, results: Value) -> Self {
        Self {
            config,
            results,
            checks: Vec::new(),
            table: None,
        }
    }

    fn check(mut self, c: Check) -> Self {
        self.checks.push(c);
        self
    }

    fn table(mut self, rows: Vec<Vec<String>>) -> Self {
        self.table = Some(rows);
        self
    }
}

fn cx(z: Complex64) -> Value {
    json!({"re": z.re, "im": z.im})
}

fn fmt_complex(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

fn parse_vec(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure::usage(anyhow!("cannot parse '{t}' in '{text}' as a number")))
        })
        .collect()
}

fn basepoint(text: &str, n: usize) -> Result<DeSitterPoint, Failure> {
    if text.eq_ignore_ascii_case("e_n") || text.eq_ignore_ascii_case("en") {
        return Ok(DeSitterPoint::e_n(n));
    }
    let coords = parse_vec(text)?;
    if coords.len() != n + 1 {
        return Err(Failure::usage(anyhow!("basepoint needs {} ambient coordinates", n + 1)));
    }
    DeSitterPoint::new(RealPoint::new(coords)).map_err(Failure::usage)
}

fn model_config(m: &Model, p: &KernelParams) -> Value {
    json!({"n": m.n, "lambda": fmt_complex(p.lambda.value())})
}

fn chart_vec(text: &str, n: usize) -> Result<Vec<f64>, Failure> {
    let v = parse_vec(text)?;
    if v.len() != n {
        return Err(Failure::usage(anyhow!("expected {n} chart coordinates, got {}", v.len())));
    }
    Ok(v)
}

fn run_hyp(cmd: HypCmd) -> Result<(String, Outcome), Failure> {
    match cmd {
        HypCmd::Eval { model, z } => {
            let p = model.params()?;
            let z = parse_complex(&z).map_err(Failure::usage)?;
            let r = gauss_2f1(&p.triple(), z)?;
            let t = p.triple();
            let mut config = model_config(&model, &p);
            config["z"] = json!(fmt_complex(z));
            let results = json!({"a": cx(t.a), "b": cx(t.b), "c": cx(t.c), "value": cx(r.value), "method": r.method.tag(), "err_est": r.err_est});
            let rel = r.err_est / r.value.norm().max(1e-300);
            Ok((
                "hyp eval".into(),
                Outcome::new(config, results).check(Check::at_most("estimated relative error", rel, 1e-10)),
            ))
        }
        HypCmd::Jump { model, x } => {
            let p = model.params()?;
            let t = p.triple();
            let jump = jump_across_cut(&t, x)?;
            let sides = boundary_2f1(&t, x, CutSide::Plus)? - boundary_2f1(&t, x, CutSide::Minus)?;
            let closed = family_jump_closed_form(p.dims, p.lambda, x)?;
            let mut config = model_config(&model, &p);
            config["x"] = json!(x);
            let results = json!({"jump": cx(jump), "closed_form": cx(closed)});
            let scale = jump.norm().max(1e-300);
            Ok((
                "hyp jump".into(),
                Outcome::new(config, results)
                    .check(Check::at_most(
                        "jump vs difference of boundary values",
                        (jump - sides).norm() / scale,
                        1e-10,
                    ))
                    .check(Check::at_most("jump vs closed form", (jump - closed).norm() / scale, 1e-10)),
            ))
        }
        HypCmd::Boundary { model, x, side } => {
            let p = model.params()?;
            let t = p.triple();
            let v = boundary_2f1(&t, x, side.into())?;
            let mirror = boundary_2f1(&t, x, CutSide::from(side).flipped())?;
            let mut config = model_config(&model, &p);
            config["x"] = json!(x);
            config["side"] = json!(side);
            let mut out = Outcome::new(config, json!({"value": cx(v)}));
            let scale = v.norm().max(1e-300);
            if x > 1.0 {
                out = out.check(Check::at_most("Schwarz reflection", (v - mirror.conj()).norm() / scale, 1e-10));
                if let Ok(e) = eps_limit(&t, x, side.into()) {
                    out.results["eps_limit"] = cx(e.value);
                    out = out.check(Check::at_most("closed form vs ε-extrapolation", (v - e.value).norm() / scale, 1e-6));
                }
            }
            Ok(("hyp boundary".into(), out))
        }
    }
}

fn run_kernel(cmd: KernelCmd) -> Result<(String, Outcome), Failure> {
    match cmd {
        KernelCmd::Eval { model, kind, v } => {
            let p = model.params()?;
            let dist = kind.dist(p)?;
            let v = chart_vec(&v, p.n())?;
            let y = Chart::standard(&dist.basepoint).point(&v).map_err(Failure::usage)?;
            let r = eval_pointwise(&dist, &y)?;
            let mut config = model_config(&model, &p);
            config["kind"] = json!(dist.kind);
            config["basepoint"] = json!(kind.basepoint);
            config["v"] = json!(v);
            let results = json!({"value": cx(r.value), "causal": format!("{:?}", r.tag).to_lowercase(), "point": y.coords()});
            Ok((
                "kernel eval".into(),
                Outcome::new(config, results).check(Check::holds("value is finite", r.value.is_finite())),
            ))
        }
        KernelCmd::Pair {
            model,
            kind,
            center,
            radius,
            alternate,
        } => {
            let p = model.params()?;
            let dist = kind.dist(p)?;
            let c = chart_vec(&center, p.n())?;
            let test = TestFnDS::at_chart_point(&c, radius).map_err(Failure::usage)?;
            let proto = if alternate {
                ApproachProtocol::alternate()
            } else {
                ApproachProtocol::default()
            };
            let r = kernels::pair(&dist, &test, &proto)?;
            let mut config = model_config(&model, &p);
            config["kind"] = json!(dist.kind);
            config["basepoint"] = json!(kind.basepoint);
            config["center"] = json!(c);
            config["radius"] = json!(radius);
            config["alternate"] = json!(alternate);
            let mut out = Outcome::new(config, json!({"value": cx(r.value())}));
            if let Some(gap) = r.route_gap() {
                out.results["route_gap"] = json!(gap);
                out = out.check(Check::at_most("approach vs direct quadrature", gap, 1e-4));
            }
            Ok(("kernel pair".into(), out))
        }
        KernelCmd::Gram { model, count, seed } => {
            let p = model.params()?;
            let pts = verify::random_crowns(p.n(), count.max(1), seed)?;
            let rep = gram_psd(&p, &pts)?;
            let spectrum = hermitian_spectrum(&gram_matrix(&p, &pts)?);
            let mut config = model_config(&model, &p);
            config["count"] = json!(count);
            config["seed"] = json!(seed);
            let results = json!({"min_eig": rep.min_eig, "max_eig": rep.max_eig, "hermitian_defect": rep.hermitian_defect, "spectrum": spectrum});
            let mut rows = vec![vec!["index".to_string(), "eigenvalue".to_string()]];
            rows.extend(spectrum.iter().enumerate().map(|(i, e)| vec![i.to_string(), format!("{e:e}")]));
            Ok((
                "kernel gram".into(),
                Outcome::new(config, results)
                    .check(Check::at_least("min eigenvalue / max eigenvalue", rep.min_eig / rep.max_eig, -1e-8))
                    .check(Check::at_most("Hermitian defect", rep.hermitian_defect, 1e-10))
                    .table(rows),
            ))
        }
        KernelCmd::Eigen { model, kind, v, h } => {
            let p = model.params()?;
            let dist = kind.dist(p)?;
            let v = chart_vec(&v, p.n())?;
            let y = Chart::standard(&dist.basepoint).point(&v).map_err(Failure::usage)?;
            let r1 = eigen_residual(&dist, &y, h)?;
            let r2 = eigen_residual(&dist, &y, h / 2.0)?;
            let extrap = (4.0 * r2.residual - r1.residual) / 3.0;
            let mut config = model_config(&model, &p);
            config["kind"] = json!(dist.kind);
            config["v"] = json!(v);
            config["h"] = json!(h);
            let results = json!({
                "value": cx(r1.value), "eigenvalue": cx(dist.eigenvalue()),
                "residual_h": cx(r1.residual), "residual_half_h": cx(r2.residual), "extrapolated": cx(extrap),
            });
            Ok((
                "kernel eigen".into(),
                Outcome::new(config, results).check(Check::at_most("extrapolated residual / |value|", extrap.norm() / r1.value.norm(), 1e-5)),
            ))
        }
        KernelCmd::Recursion { n, lambda, t, h, seed } => {
            let lp = parse_complex(&lambda).map_err(Failure::usage)?;
            let z = crown_approach(&Isometry::identity(n), t, Branch::Forward).map_err(Failure::usage)?;
            let grid = verify::random_regular_points(n, 5, 0.05, seed);
            let r1 = recursion_check(&z, lp, &grid, h)?;
            let r2 = recursion_check(&z, lp, &grid, h / 2.0)?;
            let config = json!({"n": n, "lambda": fmt_complex(lp), "t": t, "h": h, "seed": seed});
            let results = json!({"residual_h": r1, "residual_half_h": r2, "order": (r1 / r2).log2()});
            Ok((
                "kernel recursion".into(),
                Outcome::new(config, results).check(Check::at_most("residual at h/2", r2, 1e-4)),
            ))
        }
    }
}

fn parse_model_dist(text: &str) -> Result<ModelDist1D, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Failure::usage(anyhow!("cannot parse distribution '{text}'"));
    let side = |s: &str| match s {
        "plus" | "+" => Ok(CutSide::Plus),
        "minus" | "-" => Ok(CutSide::Minus),
        _ => Err(bad()),
    };
    let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
    let lam = |s: &str| parse_complex(s).map_err(Failure::usage);
    Ok(match parts.as_slice() {
        ["delta"] => ModelDist1D::DeltaDeriv { k: 0 },
        ["delta", k] => ModelDist1D::DeltaDeriv { k: int(k)? },
        ["heaviside"] => ModelDist1D::Heaviside,
        ["expinv"] => ModelDist1D::ExpInv,
        ["pv"] => ModelDist1D::XPowPv { k: 1 },
        ["pv", k] => ModelDist1D::XPowPv { k: int(k)? },
        ["xplus", l] => ModelDist1D::XPlusPow { lambda: lam(l)? },
        ["xminus", l] => ModelDist1D::XMinusPow { lambda: lam(l)? },
        ["pow", l, s] => ModelDist1D::I0Pow {
            lambda: lam(l)?,
            side: side(s)?,
        },
        ["log", s] => ModelDist1D::LogI0 { side: side(s)? },
        _ => return Err(bad()),
    })
}

fn run_dist(cmd: DistCmd) -> Result<(String, Outcome), Failure> {
    match cmd {
        DistCmd::Pair { dist, center, halfwidth } => {
            let d = parse_model_dist(&dist)?;
            let phi = TestFn1D::mollifier(center, halfwidth).map_err(Failure::usage)?;
            let r = dist1d::pair(&d, &phi)?;
            let config = json!({"dist": dist, "center": center, "halfwidth": halfwidth});
            let results = json!({"value": cx(r.value), "err_est": r.err_est, "method": r.method});
            let mut out = Outcome::new(config, results);
            let family = match d {
                ModelDist1D::I0Pow { lambda, side } => Some((EpsFamily::Pow(lambda), side)),
                ModelDist1D::LogI0 { side } => Some((EpsFamily::Log, side)),
                _ => None,
            };
            if let Some((family, side)) = family {
                let e = eps_limit_pairing(family, side, &phi);
                out.results["eps_limit"] = cx(e.value);
                out = out.check(Check::at_most("pairing vs ε-limit", (r.value - e.value).norm(), 1e-6));
            }
            Ok(("dist pair".into(), out))
        }
        DistCmd::Decompose { lambda, side } => {
            let l = parse_complex(&lambda).map_err(Failure::usage)?;
            let terms = i0_decompose(l, side.into())?;
            let phi = TestFn1D::mollifier(0.15, 0.7)?;
            let mut sum = Complex64::new(0.0, 0.0);
            for (coef, d) in &terms {
                sum += coef * dist1d::pair(d, &phi)?.value;
            }
            let e = eps_limit_pairing(EpsFamily::Pow(l), side.into(), &phi);
            let config = json!({"lambda": fmt_complex(l), "side": side});
            let results = json!({
                "terms": terms.iter().map(|(c, d)| json!({"coefficient": cx(*c), "dist": d})).collect::<Vec<_>>(),
                "bump_pairing": cx(sum), "eps_limit": cx(e.value),
            });
            Ok((
                "dist decompose".into(),
                Outcome::new(config, results).check(Check::at_most("pieces vs ε-limit on a bump", (sum - e.value).norm(), 1e-6)),
            ))
        }
    }
}

fn cotangent_rows(n: usize) -> Vec<String> {
    let mut head: Vec<String> = (0..n).map(|i| format!("base_{i}")).collect();
    head.extend((0..n).map(|i| format!("xi_{i}")));
    head
}

fn run_wf(cmd: WfCmd) -> Result<(String, Outcome), Failure> {
    match cmd {
        WfCmd::Predict { n, kind, count, seed } => {
            let k = SphericalKind::parse(&kind).map_err(Failure::usage)?;
            let x = DeSitterPoint::e_n(n);
            let spec = predicted_wf(k, &x).map_err(Failure::usage)?;
            let members = spec_members(&spec, count);
            let samples = sample_conic(n, 10_000, seed);
            let mism = membership_mismatches(&spec, &assemble_wf(k, &x)?, &samples);
            let mut rows = vec![cotangent_rows(n)];
            rows[0].push("kind".into());
            for d in &members {
                let mut r: Vec<String> = d.base.iter().chain(&d.xi).map(|t| format!("{t}")).collect();
                r.push(spec.label().into());
                rows.push(r);
            }
            let config = json!({"n": n, "kind": k, "count": count, "seed": seed});
            let results = json!({"label": spec.label(), "members": members});
            Ok((
                "wf predict".into(),
                Outcome::new(config, results)
                    .check(Check::at_most("assembled vs predicted mismatches on 10^4 samples", mism as f64, 0.0))
                    .table(rows),
            ))
        }
        WfCmd::Probe {
            model,
            kind,
            base,
            directions,
        } => {
            let p = model.params()?;
            let k = SphericalKind::parse(&kind).map_err(Failure::usage)?;
            let dist = SphericalDist::at_en(k, p);
            let base = chart_vec(&base, p.n())?;
            let dirs = plane_directions(&base, directions.max(1));
            let rep = decay_probe(&dist, &base, &dirs, &PROBE_TAUS)?;
            let spec = predicted_wf(k, &dist.basepoint)?;
            let mut disagree = 0;
            let mut verdicts = Vec::new();
            for row in &rep.rows {
                let predicted = wf_contains(&spec, &CotangentDir::new(base.clone(), row.xi.clone())?);
                disagree += (predicted != row.singular) as usize;
                verdicts.push(json!({"id": row.id, "xi": row.xi, "exponent": row.exponent, "singular": row.singular, "predicted": predicted}));
            }
            let rows = rep.csv_rows().into_iter().map(|r| r.to_vec()).collect();
            let mut config = model_config(&model, &p);
            config["kind"] = json!(k);
            config["base"] = json!(base);
            config["directions"] = json!(directions);
            let results = json!({"taus": rep.taus, "floor": rep.floor, "directions": verdicts});
            Ok((
                "wf probe".into(),
                Outcome::new(config, results)
                    .check(Check::at_most("probe vs prediction disagreements", disagree as f64, 0.0))
                    .table(rows),
            ))
        }
        WfCmd::Flow { xi, v0, t_end, samples } => {
            let xi = parse_vec(&xi)?;
            let n = xi.len();
            let v0 = match v0 {
                Some(t) => chart_vec(&t, n)?,
                None => vec![0.0; n],
            };
            let strip = hamiltonian_flow(&v0, &xi, t_end).map_err(Failure::usage)?;
            let pts = strip.samples(samples);
            let (mut drift, mut symbol): (f64, f64) = (0.0, 0.0);
            let mut head = vec!["t".to_string()];
            head.extend((0..n).map(|i| format!("v_{i}")));
            head.extend((0..n).map(|i| format!("xi_{i}")));
            let mut rows = vec![head];
            for s in &pts {
                drift = drift.max(s.xi.iter().zip(&xi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                symbol = symbol.max(principal_symbol(&s.xi)?.abs());
                let mut r = vec![format!("{}", s.t)];
                r.extend(s.v.iter().chain(&s.xi).map(|t| format!("{t}")));
                rows.push(r);
            }
            let rk = strip.rk4_deviation(200);
            let config = json!({"xi": xi, "v0": v0, "T": t_end, "samples": samples});
            let results = json!({"samples": pts, "apex_time": strip.apex_time()});
            Ok((
                "wf flow".into(),
                Outcome::new(config, results)
                    .check(Check::at_most("covector drift", drift, 0.0))
                    .check(Check::at_most("|P(ξ)| along the strip", symbol, 1e-14))
                    .check(Check::at_most("closed form vs RK4", rk, 1e-10))
                    .table(rows),
            ))
        }
    }
}

fn load_fixtures() -> Result<FixtureSet, Failure> {
    FixtureSet::load(&fixture_dir()).map_err(|e| Failure::io(anyhow!("{e} (set {FIXTURE_ENV} or run `crownwave fixtures generate`)")))
}

fn run_verify(cmd: VerifyCmd, timing: bool) -> Result<(String, Outcome), Failure> {
    let VerifyCmd::All { n, lambda, seed, only } = cmd;
    let params = match (n, &lambda) {
        (None, None) => verify::acceptance_params(),
        (n, l) => {
            let m = Model {
                n: n.unwrap_or(3),
                lambda: l.clone().unwrap_or_else(|| "0.5".into()),
            };
            vec![m.params()?]
        }
    };
    if let Some(bad) = only.iter().find(|id| !verify::CRITERIA.contains(id)) {
        return Err(Failure::usage(anyhow!("no criterion {bad}")));
    }
    let fixtures = load_fixtures()?;
    let config = json!({
        "params": params.iter().map(|p| json!({"n": p.n(), "lambda": fmt_complex(p.lambda.value())})).collect::<Vec<_>>(),
        "seed": seed, "only": only,
    });
    let integrity = verify::fixture_integrity(&fixtures);
    if integrity.iter().any(|c| !c.pass) {
        let mut out = Outcome::new(config, json!({"refused": "fixture integrity failure"}));
        out.checks = integrity;
        return Ok(("verify all".into(), out));
    }
    let cfg = VerifyConfig { params, seed, fixtures };
    let mut reports = if only.is_empty() {
        run_all(&cfg)
    } else {
        only.iter().map(|id| verify::run_criterion(*id, &cfg)).collect()
    };
    if !timing {
        reports.iter_mut().for_each(|r| r.seconds = 0.0);
    }
    for r in &reports {
        eprintln!("{}", r.summary_line());
    }
    let mut checks = integrity;
    checks.extend(reports.iter().flat_map(|r| {
        r.checks.iter().map(move |c| Check {
            name: format!("[{}] {}", r.id, c.name),
            ..c.clone()
        })
    }));
    let mut out = Outcome::new(config, serde_json::to_value(&reports).map_err(Failure::io)?);
    out.checks = checks;
    Ok(("verify all".into(), out))
}

fn run_fixtures(cmd: FixturesCmd) -> Result<(String, Outcome), Failure> {
    let FixturesCmd::Generate { dir } = cmd;
    let dir = dir.unwrap_or_else(fixture_dir);
    let set = verify::generate_fixtures()?;
    let path = set.save(&dir)?;
    let reloaded = FixtureSet::load(&dir)?;
    let mut kinds = serde_json::Map::new();
    for r in &reloaded.records {
        let e = kinds.entry(r.kind.clone()).or_insert(json!(0));
        *e = json!(e.as_u64().unwrap_or(0) + 1);
    }
    let config = json!({"dir": dir, "default_dir": default_fixture_dir()});
    let mut out = Outcome::new(config, json!({"path": path, "records": reloaded.records.len(), "kinds": kinds}));
    out.checks = verify::fixture_integrity(&reloaded);
    out = out.check(Check::holds("written file reloads identically", reloaded == set));
    Ok(("fixtures generate".into(), out))
}

fn csv_text(rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r).map_err(Failure::io)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Failure::io(anyhow!("{e}")))?).map_err(Failure::io)
}

fn render(command: &str, outcome: &Outcome, args: &OutputArgs, seconds: f64) -> Result<(String, bool), Failure> {
    let pass = outcome.checks.iter().all(|c| c.pass);
    let text = match args.format {
        Format::Csv => {
            let rows = outcome
                .table
                .as_ref()
                .ok_or_else(|| Failure::usage(anyhow!("`{command}` has no tabular output")))?;
            csv_text(rows)?
        }
        Format::Json => {
            let envelope = json!({
                "command": command,
                "config": outcome.config,
                "results": outcome.results,
                "checks": outcome.checks,
                "pass": pass,
                "wall_time_s": if args.no_timing { Value::Null } else { json!(seconds) },
            });
            serde_json::to_string_pretty(&envelope).map_err(Failure::io)? + "\n"
        }
    };
    Ok((text, pass))
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    let start = Instant::now();
    let timing = !cli.out.no_timing;
    let (command, outcome) = match cli.command {
        Command::Hyp(c) => run_hyp(c)?,
        Command::Kernel(c) => run_kernel(c)?,
        Command::Dist(c) => run_dist(c)?,
        Command::Wf(c) => run_wf(c)?,
        Command::Verify(c) => run_verify(c, timing)?,
        Command::Fixtures(c) => run_fixtures(c)?,
    };
    let (text, pass) = render(&command, &outcome, &cli.out, start.elapsed().as_secs_f64())?;
    match &cli.out.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::io(anyhow!("{}: {e}", path.display())))?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Failure::io)?,
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
