//! L^p operator norms of sampled kernels: power iteration for p = 2, the
//! nonlinear power method for positive kernels, and certified probe lower bounds.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{schur_bound, KernelOnMeasure};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Schur,
    Power2,
    PowerpPositive,
    ProbeLower,
    RankOneExact,
}

impl Method {
    pub fn id(self) -> &'static str {
        match self {
            Method::Schur => "schur",
            Method::Power2 => "power2",
            Method::PowerpPositive => "powerp_positive",
            Method::ProbeLower => "probe_lower",
            Method::RankOneExact => "rank_one_exact",
        }
    }

    /// Whether the estimate is an upper bound, a lower bound, or (up to convergence) exact.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, Method::ProbeLower)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub task_id: String,
    pub p: f64,
    pub estimate: f64,
    pub method: Method,
    pub weight_id: String,
    /// Truncation T or semiclassical h the estimate belongs to.
    pub truncation: Option<f64>,
    pub fitted_rate: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl NormReport {
    fn new(k: &KernelOnMeasure, p: f64, method: Method, estimate: f64, converged: bool, iterations: usize) -> Self {
        Self {
            task_id: k.label.clone(),
            p,
            estimate,
            method,
            weight_id: "one".into(),
            truncation: None,
            fitted_rate: None,
            converged,
            iterations,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub rtol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Random probes for `ProbeLower`, before the structured ones.
    pub probes: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, max_iter: 5000, seed: 7, probes: 64 }
    }
}

/// ‖u‖_{L^p(μ)}
pub fn lp_norm(u: &[Complex64], measure: &[f64], p: f64) -> f64 {
    u.iter().zip(measure).map(|(v, m)| v.norm().powf(p) * m).sum::<f64>().powf(1.0 / p)
}

pub fn opnorm_p(k: &KernelOnMeasure, p: f64, method: Method) -> Result<NormReport> {
    opnorm_p_with(k, p, method, &PowerOptions::default())
}

pub fn opnorm_p_with(k: &KernelOnMeasure, p: f64, method: Method, opts: &PowerOptions) -> Result<NormReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("p = {p} outside (1, ∞)")));
    }
    match method {
        Method::Schur => Ok(NormReport::new(k, p, method, schur_bound(k).for_p(p), true, 0)),
        Method::Power2 => {
            if p != 2.0 {
                return Err(Error::Unsupported("power2 needs p = 2".into()));
            }
            let (est, it, ok) = power2(k.ncols(), |u| k.apply(u), |v| k.apply_adjoint(v), &k.col_measure, opts);
            Ok(NormReport::new(k, p, method, est, ok, it))
        }
        Method::PowerpPositive => {
            if !k.is_nonnegative() {
                return Err(Error::Domain("powerp_positive needs an entrywise nonnegative kernel".into()));
            }
            let (est, it, ok) = powerp_positive(k, p, opts);
            Ok(NormReport::new(k, p, method, est, ok, it))
        }
        Method::ProbeLower => {
            let (est, count) = probe_lower(k, p, opts);
            Ok(NormReport::new(k, p, method, est, true, count))
        }
        Method::RankOneExact => {
            let (u, v) = rank_one_factors(k)?;
            Ok(NormReport::new(k, p, method, rank_one_exact(&u, &k.row_measure, &v, &k.col_measure, p), true, 0))
        }
    }
}

/// ‖u‖_{L^p(μ)}·‖v‖_{L^{p'}(ν)}, the norm of u ⊗ v: L^p(ν) → L^p(μ).
pub fn rank_one_exact(u: &[Complex64], mu: &[f64], v: &[Complex64], nu: &[f64], p: f64) -> f64 {
    lp_norm(u, mu, p) * lp_norm(v, nu, p / (p - 1.0))
}

fn rank_one_factors(k: &KernelOnMeasure) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let mut best = (0, 0, 0.0);
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            let a = k.values[(i, j)].norm();
            if a > best.2 {
                best = (i, j, a);
            }
        }
    }
    let (i0, j0, top) = best;
    if top == 0.0 {
        return Ok((vec![Complex64::new(0.0, 0.0); k.nrows()], vec![Complex64::new(0.0, 0.0); k.ncols()]));
    }
    let u: Vec<Complex64> = (0..k.nrows()).map(|i| k.values[(i, j0)]).collect();
    let v: Vec<Complex64> = (0..k.ncols()).map(|j| k.values[(i0, j)] / k.values[(i0, j0)]).collect();
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            if (k.values[(i, j)] - u[i] * v[j]).norm() > 1e-10 * top {
                return Err(Error::Unsupported(format!("kernel {} is not rank one", k.label)));
            }
        }
    }
    Ok((u, v))
}

fn dot(a: &[Complex64], b: &[Complex64], m: &[f64]) -> f64 {
    a.iter().zip(b).zip(m).map(|((x, y), w)| (x.conj() * y).re * w).sum()
}

fn start_vector(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Complex64::new(rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5))).collect()
}

/// Largest singular value of A: L²(ν) → L²(μ) by power iteration on A*A.
/// Returns (estimate, iterations, converged).
pub fn power2(
    n: usize,
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    adjoint: impl Fn(&[Complex64]) -> Vec<Complex64>,
    nu: &[f64],
    opts: &PowerOptions,
) -> (f64, usize, bool) {
    if n == 0 {
        return (0.0, 0, true);
    }
    let mut u = start_vector(n, opts.seed);
    let mut prev = 0.0;
    for it in 1..=opts.max_iter {
        let nu_norm = dot(&u, &u, nu).sqrt();
        if nu_norm == 0.0 {
            return (0.0, it, true);
        }
        u.iter_mut().for_each(|v| *v /= nu_norm);
        let w = adjoint(&apply(&u));
        // Rayleigh quotient of A*A, nondecreasing along the iteration
        let est = dot(&u, &w, nu).max(0.0).sqrt();
        if it > 1 && (est - prev).abs() <= opts.rtol * est {
            return (est, it, true);
        }
        prev = est;
        u = w;
    }
    (prev, opts.max_iter, false)
}

/// Nonlinear power method for K ≥ 0:
/// u ← (K^T(μ)(Ku)^{p-1})^{1/(p-1)}, normalized in L^p(ν).
fn powerp_positive(k: &KernelOnMeasure, p: f64, opts: &PowerOptions) -> (f64, usize, bool) {
    let n = k.ncols();
    let q = 1.0 / (p - 1.0);
    let mut u = vec![Complex64::new(1.0, 0.0); n];
    let mut prev = 0.0;
    for it in 1..=opts.max_iter {
        let norm = lp_norm(&u, &k.col_measure, p);
        if norm == 0.0 {
            return (0.0, it, true);
        }
        u.iter_mut().for_each(|v| *v /= norm);
        let ku = k.apply(&u);
        let est = lp_norm(&ku, &k.row_measure, p);
        if it > 1 && (est - prev).abs() <= opts.rtol * est {
            return (est, it, true);
        }
        prev = est;
        let g: Vec<Complex64> = ku.iter().map(|v| Complex64::new(v.re.max(0.0).powf(p - 1.0), 0.0)).collect();
        // K real here, so the μ-adjoint is the transpose against μ
        u = k.apply_adjoint(&g).into_iter().map(|v| Complex64::new(v.re.max(0.0).powf(q), 0.0)).collect();
    }
    (prev, opts.max_iter, false)
}

/// An operator between sampled function spaces, known only through its action.
pub trait LinearMap {
    /// Coordinate of each column node, used to place structured probes.
    fn col_nodes(&self) -> &[f64];
    fn row_measure(&self) -> &[f64];
    fn col_measure(&self) -> &[f64];
    fn apply(&self, u: &[Complex64]) -> Vec<Complex64>;
    /// Adjoint for the pairings ∫ u v̄ dμ and ∫ u v̄ dν.
    fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64>;
}

impl LinearMap for KernelOnMeasure {
    fn col_nodes(&self) -> &[f64] {
        &self.ys
    }
    fn row_measure(&self) -> &[f64] {
        &self.row_measure
    }
    fn col_measure(&self) -> &[f64] {
        &self.col_measure
    }
    fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        KernelOnMeasure::apply(self, u)
    }
    fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        KernelOnMeasure::apply_adjoint(self, v)
    }
}

fn ratio<K: LinearMap + ?Sized>(k: &K, u: &[Complex64], p: f64) -> f64 {
    let d = lp_norm(u, k.col_measure(), p);
    if d == 0.0 {
        return 0.0;
    }
    lp_norm(&k.apply(u), k.row_measure(), p) / d
}

/// One step of the signed nonlinear power map; the result is again just a probe.
fn dual_step<K: LinearMap + ?Sized>(k: &K, u: &[Complex64], p: f64) -> Vec<Complex64> {
    let ku = k.apply(u);
    let g: Vec<Complex64> = ku.iter().map(|v| if v.norm() == 0.0 { *v } else { v / v.norm() * v.norm().powf(p - 1.0) }).collect();
    let pp = p / (p - 1.0);
    k.apply_adjoint(&g).into_iter().map(|v| if v.norm() == 0.0 { v } else { v / v.norm() * v.norm().powf(pp - 1.0) }).collect()
}

/// max ‖Ku‖_p/‖u‖_p over random, structured and power-refined probes: a
/// certified lower bound. Returns (bound, number of probes).
pub fn probe_lower<K: LinearMap + ?Sized>(k: &K, p: f64, opts: &PowerOptions) -> (f64, usize) {
    let ys = k.col_nodes();
    let n = ys.len();
    if n == 0 {
        return (0.0, 0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probes: Vec<Vec<Complex64>> = Vec::new();
    probes.push(vec![Complex64::new(1.0, 0.0); n]);
    for _ in 0..opts.probes {
        probes.push((0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
    }
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    for c in 0..8 {
        let center = lo + span * (c as f64 + 0.5) / 8.0;
        for width in [span / 64.0, span / 16.0, span / 4.0] {
            probes.push(ys.iter().map(|&y| Complex64::new((-((y - center) / width).powi(2)).exp(), 0.0)).collect());
        }
    }
    for rate in [-2.0, -0.5, 0.5, 2.0] {
        probes.push(ys.iter().map(|&y| Complex64::new((rate * (y - lo) / span).exp(), 0.0)).collect());
    }
    for j in (0..n).step_by((n / 16).max(1)) {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        probes.push(e);
    }
    let mut scored: Vec<(f64, Vec<Complex64>)> = probes.into_iter().map(|u| (ratio(k, &u, p), u)).collect();
    let mut count = scored.len();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = scored[0].0;
    for (_, u) in scored.into_iter().take(4) {
        let mut u = u;
        for _ in 0..50 {
            u = dual_step(k, &u, p);
            count += 1;
            let r = ratio(k, &u, p);
            if r <= best * (1.0 + 1e-12) {
                best = best.max(r);
                break;
            }
            best = r;
        }
    }
    (best, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::kernel::composite_nodes;
    use nalgebra::DMatrix;

    fn discrete(values: DMatrix<Complex64>) -> KernelOnMeasure {
        let n = values.nrows();
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        KernelOnMeasure::new("m", x.clone(), vec![1.0; n], x, vec![1.0; n], values).unwrap()
    }

    #[test]
    fn diagonal_power2() {
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 0)] = Complex64::new(3.0, 0.0);
        a[(1, 1)] = Complex64::new(1.0, 0.0);
        a[(2, 2)] = Complex64::new(1.0, 0.0);
        let r = opnorm_p(&discrete(a), 2.0, Method::Power2).unwrap();
        assert!(r.converged && (r.estimate - 3.0).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn rank_one_methods_agree() {
        let (x, w) = composite_nodes(1.0, 4.0, 6, 6);
        let k = KernelOnMeasure::from_fn("uv", (x.clone(), w.clone()), (x, w), |r, s| Complex64::new((0.3 * r).exp() * (-0.8 * s).exp(), 0.0)).unwrap();
        for p in [4.0 / 3.0, 2.0, 4.0] {
            let exact = opnorm_p(&k, p, Method::RankOneExact).unwrap().estimate;
            let it = opnorm_p_with(&k, p, Method::PowerpPositive, &PowerOptions { rtol: 1e-14, ..Default::default() }).unwrap();
            assert!(it.converged);
            assert!(((exact - it.estimate) / exact).abs() < 1e-8, "p={p}: {exact} vs {}", it.estimate);
            let lower = opnorm_p(&k, p, Method::ProbeLower).unwrap().estimate;
            assert!(lower <= exact * (1.0 + 1e-12));
        }
    }

    #[test]
    fn not_rank_one_is_rejected() {
        let a = DMatrix::from_fn(3, 3, |i, j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
        assert!(opnorm_p(&discrete(a), 3.0, Method::RankOneExact).is_err());
    }

    #[test]
    fn schur_dominates_power2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(30, 30, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let k = discrete(a.clone());
        let s = opnorm_p(&k, 2.0, Method::Schur).unwrap().estimate;
        let p2 = opnorm_p(&k, 2.0, Method::Power2).unwrap();
        let svd = a.singular_values().max();
        assert!((p2.estimate - svd).abs() < 1e-6 * svd, "{} vs {svd}", p2.estimate);
        assert!(s >= p2.estimate);
    }

    #[test]
    fn positive_iteration_matches_brute_force_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(0.0..1.0), 0.0));
        let k = discrete(a);
        let p = 3.0;
        let it = opnorm_p(&k, p, Method::PowerpPositive).unwrap();
        // oracle: derivative-free random search over 10⁵ multiplicative perturbations
        let mut u = vec![Complex64::new(1.0, 0.0); n];
        let mut best = ratio(&k, &u, p);
        let mut sigma = 0.5;
        for _ in 0..100_000 {
            let cand: Vec<Complex64> = u.iter().map(|v| v * (1.0 + sigma * rng.gen_range(-1.0..1.0f64)).max(0.0)).collect();
            let r = ratio(&k, &cand, p);
            if r > best {
                best = r;
                u = cand;
            } else {
                sigma = (sigma * 0.999).max(1e-3);
            }
        }
        assert!(best <= it.estimate * (1.0 + 1e-12));
        assert!((it.estimate - best) / it.estimate < 0.02, "{} vs {best}", it.estimate);
    }
}
