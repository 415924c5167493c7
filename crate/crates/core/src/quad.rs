//! Quadrature and extrapolation primitives.
//!
//! * Gauss–Legendre rules of arbitrary order (Newton iteration on `P_N`).
//! * Adaptive Gauss–Kronrod (7/15) bisection for complex integrands.
//! * Geometrically graded panel layouts for endpoint singularities.
//! * Polynomial (Richardson/Neville) extrapolation to a zero step.

use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Absolute tolerance per accepted adaptive panel.
pub const PANEL_ABS_TOL: f64 = 1e-11;
/// Bisection depth cap for the adaptive integrator.
pub const MAX_DEPTH: usize = 160;

/// Step sizes `10^{-j}`, `j = 2..=5`, used for every ε-limit in the crate.
pub const EPS_GRID: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
/// Polynomial order used when extrapolating along [`EPS_GRID`].
pub const EPS_ORDER: usize = 2;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("quadrature cache poisoned").get(&n) {
        return hit.clone();
    }
    let rule = compute_gauss_legendre(n);
    cache.lock().expect("quadrature cache poisoned").insert(n, rule.clone());
    rule
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            x[0] = 0.0;
            w[0] = 2.0;
            break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Maps a rule on `[-1,1]` onto every panel and concatenates the result.
pub fn composite_rule(panels: &[(f64, f64)], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(panels.len() * order);
    let mut weights = Vec::with_capacity(panels.len() * order);
    for &(a, b) in panels {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    (nodes, weights)
}

/// Panels on `[a, b]` shrinking geometrically (by `ratio`) toward `a`
/// (`toward_start = true`) or toward `b`, with `levels` refinements.
/// The innermost panel touches the singular endpoint.
pub fn graded_panels(a: f64, b: f64, toward_start: bool, ratio: f64, levels: usize) -> Vec<(f64, f64)> {
    let len = b - a;
    let mut cuts = vec![0.0];
    let mut r = ratio.powi(levels as i32);
    cuts.push(r);
    for _ in 0..levels {
        r /= ratio;
        cuts.push(r.min(1.0));
    }
    let mut panels: Vec<(f64, f64)> = cuts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            if toward_start {
                (a + w[0] * len, a + w[1] * len)
            } else {
                (b - w[1] * len, b - w[0] * len)
            }
        })
        .collect();
    if !toward_start {
        panels.reverse();
    }
    panels
}

/// Splits every panel longer than `max_len` into equal pieces.
pub fn cap_panels(panels: Vec<(f64, f64)>, max_len: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(panels.len());
    for (a, b) in panels {
        let pieces = ((b - a) / max_len).ceil().max(1.0) as usize;
        let h = (b - a) / pieces as f64;
        for k in 0..pieces {
            out.push((a + k as f64 * h, if k + 1 == pieces { b } else { a + (k + 1) as f64 * h }));
        }
    }
    out
}

/// Pairwise summation with a fixed tree, independent of thread scheduling.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        len if len <= 16 => values.iter().sum(),
        len => {
            let (lo, hi) = values.split_at(len / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

const GK_XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel with its embedded 7-point Gauss estimate.
pub fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for j in 0..7 {
        let dx = half * GK_XK[j];
        let pair = f(mid - dx) + f(mid + dx);
        kron += pair * GK_WK[j];
        if j % 2 == 1 {
            gauss += pair * GK_WG[j / 2];
        }
    }
    let kron = kron * half;
    let gauss = gauss * half;
    (kron, (kron - gauss).norm())
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: Complex64,
    pub err: f64,
}

/// Adaptive Gauss–Kronrod bisection. A panel is accepted once its error
/// estimate is below `max(abs_tol, rel_tol·|panel value|)`.
pub fn adaptive<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut stack = vec![(a, b, 0usize)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(f, lo, hi);
        if e <= abs_tol.max(rel_tol * v.norm()) || depth >= MAX_DEPTH || hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            value += v;
            err += e;
        } else {
            let m = 0.5 * (lo + hi);
            stack.push((m, hi, depth + 1));
            stack.push((lo, m, depth + 1));
        }
    }
    Integral { value, err }
}

/// [`adaptive`] over consecutive breakpoints.
pub fn adaptive_pieces<F: Fn(f64) -> Complex64>(f: &F, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Integral {
    let mut total = Integral {
        value: Complex64::new(0.0, 0.0),
        err: 0.0,
    };
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let part = adaptive(f, w[0], w[1], abs_tol, rel_tol);
            total.value += part.value;
            total.err += part.err;
        }
    }
    total
}

/// Neville extrapolation to `h = 0` of the polynomial through the points.
pub fn neville_at_zero(hs: &[f64], vals: &[Complex64]) -> Complex64 {
    let n = hs.len();
    let mut p: Vec<Complex64> = vals.to_vec();
    for level in 1..n {
        for i in 0..n - level {
            let (hi, hj) = (hs[i], hs[i + level]);
            p[i] = (p[i + 1] * hi - p[i] * hj) / (hi - hj);
        }
    }
    p[0]
}

/// Result of a Richardson extrapolation.
#[derive(Debug, Clone, Copy)]
pub struct Extrapolation {
    pub value: Complex64,
    /// Spread between the two innermost windows of the tableau.
    pub err: f64,
}

/// Extrapolates `vals(h)` to `h = 0` with a polynomial of degree `order`
/// through the `order + 1` smallest steps. The error estimate compares with
/// the same fit shifted one step outward (or one degree lower if there is
/// no room).
pub fn richardson(hs: &[f64], vals: &[Complex64], order: usize) -> Extrapolation {
    assert_eq!(hs.len(), vals.len());
    let n = hs.len();
    assert!(n >= 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| hs[j].abs().partial_cmp(&hs[i].abs()).unwrap());
    let hs_sorted: Vec<f64> = idx.iter().map(|&i| hs[i]).collect();
    let vs_sorted: Vec<Complex64> = idx.iter().map(|&i| vals[i]).collect();
    let k = (order + 1).min(n);
    let inner = neville_at_zero(&hs_sorted[n - k..], &vs_sorted[n - k..]);
    let other = if n > k {
        neville_at_zero(&hs_sorted[n - k - 1..n - 1], &vs_sorted[n - k - 1..n - 1])
    } else if k >= 2 {
        neville_at_zero(&hs_sorted[n - k + 1..], &vs_sorted[n - k + 1..])
    } else {
        inner
    };
    Extrapolation {
        value: inner,
        err: (inner - other).norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 10, 16, 24] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let f = |x: f64| re(1.0 / x.sqrt());
        let r = adaptive(&f, 0.0, 1.0, 1e-12, 0.0);
        assert!((r.value.re - 2.0).abs() < 1e-9);
        let g = |x: f64| re(x.ln());
        let r = adaptive(&g, 0.0, 1.0, 1e-13, 0.0);
        assert!((r.value.re + 1.0).abs() < 1e-10);
    }

    #[test]
    fn graded_composite_resolves_inverse_sqrt() {
        let panels = graded_panels(0.0, 1.0, true, 0.5, 90);
        let (x, w) = composite_rule(&panels, 12);
        let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi / xi.sqrt()).sum();
        assert!((s - 2.0).abs() < 1e-9);
        let panels = graded_panels(0.0, 1.0, false, 0.5, 40);
        let (x, w) = composite_rule(&panels, 12);
        let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * (1.0 - xi).ln()).sum();
        assert!((s + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_panels_splits_long_panels() {
        let p = cap_panels(vec![(0.0, 1.0), (1.0, 1.1)], 0.3);
        assert_eq!(p.len(), 5);
        assert_eq!(p[3].1, 1.0);
    }

    #[test]
    fn richardson_recovers_quadratic_limit() {
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let vals: Vec<Complex64> = hs.iter().map(|h| re(3.0 + 2.0 * h - 5.0 * h * h)).collect();
        let r = richardson(&hs, &vals, 2);
        assert!((r.value.re - 3.0).abs() < 1e-13);
        assert!(r.err < 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<Complex64> = (0..1000).map(|k| re(k as f64)).collect();
        assert_eq!(pairwise_sum(&v).re, 499_500.0);
    }
}
