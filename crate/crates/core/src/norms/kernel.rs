//! Sampled integral kernels and the bounds that only need row/column integrals.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WarpFunction;
use crate::quad::{gauss_legendre, mapped};

/// K(x_i, y_j) sampled on quadrature nodes. The operator is
/// (Ku)(x_i) = Σ_j K(x_i, y_j) u(y_j) ν_j, mapping functions on the column
/// nodes (measure ν) to functions on the row nodes (measure μ).
#[derive(Debug, Clone)]
pub struct KernelOnMeasure {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub row_measure: Vec<f64>,
    pub col_measure: Vec<f64>,
    pub values: DMatrix<Complex64>,
}

impl KernelOnMeasure {
    pub fn from_fn(
        label: impl Into<String>,
        (xs, mu): (Vec<f64>, Vec<f64>),
        (ys, nu): (Vec<f64>, Vec<f64>),
        k: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        let values = DMatrix::from_fn(xs.len(), ys.len(), |i, j| k(xs[i], ys[j]));
        Self::new(label, xs, mu, ys, nu, values)
    }

    pub fn new(label: impl Into<String>, xs: Vec<f64>, mu: Vec<f64>, ys: Vec<f64>, nu: Vec<f64>, values: DMatrix<Complex64>) -> Result<Self> {
        if xs.len() != mu.len() || ys.len() != nu.len() || values.nrows() != xs.len() || values.ncols() != ys.len() {
            return Err(Error::Domain("kernel dimensions disagree with the node sets".into()));
        }
        if mu.iter().chain(&nu).any(|&m| !(m > 0.0)) {
            return Err(Error::Domain("measure weights must be positive".into()));
        }
        Ok(Self { label: label.into(), xs, ys, row_measure: mu, col_measure: nu, values })
    }

    /// From a matrix acting on nodal values: K_ij = A_ij / ν_j, same nodes and measure on both sides.
    pub fn from_matrix(label: impl Into<String>, nodes: Vec<f64>, measure: Vec<f64>, a: &DMatrix<Complex64>) -> Result<Self> {
        let values = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] / measure[j]);
        Self::new(label, nodes.clone(), measure.clone(), nodes, measure, values)
    }

    pub fn nrows(&self) -> usize {
        self.xs.len()
    }

    pub fn ncols(&self) -> usize {
        self.ys.len()
    }

    /// Matrix of the operator on nodal values.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| self.values[(i, j)] * self.col_measure[j])
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| self.values[(i, j)] * (u[j] * self.col_measure[j])).sum())
            .collect()
    }

    /// Adjoint for the pairings of L²(μ) and L²(ν).
    pub fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.ncols())
            .map(|j| (0..self.nrows()).map(|i| self.values[(i, j)].conj() * (v[i] * self.row_measure[i])).sum())
            .collect()
    }

    /// sup_i ∫|K(x_i, y)| dν(y)
    pub fn row_integral_sup(&self) -> f64 {
        (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| self.values[(i, j)].norm() * self.col_measure[j]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// sup_j ∫|K(x, y_j)| dμ(x)
    pub fn col_integral_sup(&self) -> f64 {
        (0..self.ncols())
            .map(|j| (0..self.nrows()).map(|i| self.values[(i, j)].norm() * self.row_measure[i]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| v.re >= 0.0 && v.im.abs() <= 1e-14 * (1.0 + v.re))
    }
}

/// Gauss–Legendre nodes on [a, b] split into `panels` equal panels.
pub fn composite_nodes(a: f64, b: f64, panels: usize, per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(per_panel);
    let step = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * per_panel);
    let mut weights = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let lo = a + step * p as f64;
        for (t, v) in mapped(&x, &w, lo, lo + step) {
            nodes.push(t);
            weights.push(v);
        }
    }
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchurBound {
    /// sup of row integrals (the L∞ → L∞ bound)
    pub row: f64,
    /// sup of column integrals (the L¹ → L¹ bound)
    pub col: f64,
}

impl SchurBound {
    /// sqrt(row · col): the L² bound.
    pub fn two(&self) -> f64 {
        (self.row * self.col).sqrt()
    }

    /// max(row, col), valid for every p.
    pub fn uniform(&self) -> f64 {
        self.row.max(self.col)
    }

    /// row^{1/p'} col^{1/p} by interpolation.
    pub fn for_p(&self, p: f64) -> f64 {
        if self.row == 0.0 || self.col == 0.0 {
            return 0.0;
        }
        self.row.powf(1.0 - 1.0 / p) * self.col.powf(1.0 / p)
    }

    pub fn is_finite(&self) -> bool {
        self.row.is_finite() && self.col.is_finite()
    }
}

pub fn schur_bound(k: &KernelOnMeasure) -> SchurBound {
    SchurBound { row: k.row_integral_sup(), col: k.col_integral_sup() }
}

/// Schur bound of a kernel given as a function on [a, b]², by composite
/// Gauss–Legendre with doubling panel counts. Row and column integrals that
/// keep changing by more than `rtol` after `levels` doublings are reported
/// as infinite.
pub fn schur_bound_fn(k: impl Fn(f64, f64) -> f64, (a, b): (f64, f64), rows: usize, rtol: f64, levels: usize) -> SchurBound {
    let samples: Vec<f64> = (0..rows).map(|i| a + (b - a) * (i as f64 + 0.5) / rows as f64).collect();
    let sup_integral = |transpose: bool| -> f64 {
        let mut worst: f64 = 0.0;
        for &x in &samples {
            let mut panels = 16;
            let mut prev = f64::NAN;
            let mut value = f64::INFINITY;
            for _ in 0..levels {
                // split at the sample so a diagonal kink or singularity sits on a panel edge
                let cur: f64 = [(a, x), (x, b)]
                    .iter()
                    .filter(|(lo, hi)| hi > lo)
                    .map(|&(lo, hi)| {
                        let (ys, ws) = composite_nodes(lo, hi, panels, 8);
                        ys.iter().zip(&ws).map(|(&y, &w)| w * if transpose { k(y, x) } else { k(x, y) }.abs()).sum::<f64>()
                    })
                    .sum();
                if (cur - prev).abs() <= rtol * cur.abs() {
                    value = cur;
                    break;
                }
                prev = cur;
                panels *= 2;
            }
            worst = worst.max(value);
        }
        worst
    };
    SchurBound { row: sup_integral(false), col: sup_integral(true) }
}

/// sup_i prefactor(x_i)·(∫|K(x_i, y)|² dν(y))^{1/2}.
pub fn l2_linf_bound(k: &KernelOnMeasure, prefactor: impl Fn(f64) -> f64) -> f64 {
    (0..k.nrows())
        .map(|i| {
            let row: f64 = (0..k.ncols()).map(|j| k.values[(i, j)].norm_sqr() * k.col_measure[j]).sum();
            prefactor(k.xs[i]) * row.sqrt()
        })
        .fold(0.0, f64::max)
}

/// Change of measure between L^p(dg) and L^p(d̃g) on an end of dimension `dim`.
#[derive(Debug, Clone)]
pub struct MeasureShift<'a> {
    pub warp: &'a WarpFunction,
    pub dim: usize,
    pub p: f64,
}

impl MeasureShift<'_> {
    /// w^{(n-1)(1/p - 1/2)} at r.
    pub fn factor(&self, r: f64) -> f64 {
        self.warp.eval(r).powf((self.dim as f64 - 1.0) * (1.0 / self.p - 0.5))
    }
}

/// K'(x, y) = W_left(x)·K(x, y)·W_right(y), with the measure change folded in
/// as w^{(n-1)(1/p-1/2)}(x) on the left and its inverse on the right.
pub fn weighted_conjugate(
    k: &KernelOnMeasure,
    w_left: impl Fn(f64) -> f64,
    w_right: impl Fn(f64) -> f64,
    shift: Option<&MeasureShift>,
) -> Result<KernelOnMeasure> {
    let left: Vec<f64> = k.xs.iter().map(|&x| w_left(x) * shift.map_or(1.0, |s| s.factor(x))).collect();
    let right: Vec<f64> = k.ys.iter().map(|&y| w_right(y) / shift.map_or(1.0, |s| s.factor(y))).collect();
    if left.iter().chain(&right).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("conjugation weights must be positive and finite".into()));
    }
    let values = DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| k.values[(i, j)] * (left[i] * right[j]));
    Ok(KernelOnMeasure { label: format!("{}~W", k.label), values, ..k.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_on_measure() {
        let (x, w) = composite_nodes(0.0, 1.0, 4, 4);
        let vals = DMatrix::from_fn(x.len(), x.len(), |i, j| if i == j { Complex64::new(1.0 / w[j], 0.0) } else { Complex64::new(0.0, 0.0) });
        let k = KernelOnMeasure::new("id", x.clone(), w.clone(), x, w, vals).unwrap();
        let s = schur_bound(&k);
        assert!((s.two() - 1.0).abs() < 1e-14 && (s.uniform() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_kernel_tends_to_one() {
        // ∫ e^{-|t|}/2 dt = 1 over the line
        let k = |x: f64, y: f64| (-(x - y).abs()).exp() / 2.0;
        let s = schur_bound_fn(k, (-40.0, 40.0), 41, 1e-10, 10);
        assert!(s.is_finite());
        assert!((s.two() - 1.0).abs() < 1e-8, "{}", s.two());
    }

    #[test]
    fn diagonal_singularity_is_unbounded() {
        let k = |x: f64, y: f64| 1.0 / (x - y).abs();
        let s = schur_bound_fn(k, (0.0, 1.0), 7, 1e-8, 6);
        assert!(!s.is_finite());
    }

    #[test]
    fn rank_one_l2_linf_is_exact() {
        let (x, w) = composite_nodes(0.0, 2.0, 8, 6);
        let u = |t: f64| 1.0 + t * t;
        let v = |t: f64| (-t).exp();
        let k = KernelOnMeasure::from_fn("uv", (x.clone(), w.clone()), (x.clone(), w.clone()), |a, b| Complex64::new(u(a) * v(b), 0.0)).unwrap();
        let pref = |t: f64| 1.0 / (1.0 + t);
        let sup = x.iter().map(|&t| u(t) * pref(t)).fold(0.0, f64::max);
        // ∫_0^2 e^{-2t} dt
        let v2 = ((1.0 - (-4.0f64).exp()) / 2.0).sqrt();
        assert!((l2_linf_bound(&k, pref) - sup * v2).abs() < 1e-12);
        let zero = KernelOnMeasure::from_fn("0", (x.clone(), w.clone()), (x, w), |_, _| Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(l2_linf_bound(&zero, |_| 1.0), 0.0);
    }

    #[test]
    fn conjugation_exponents() {
        // the dominating rank-one kernel of the hyperbolic counterexample becomes e^{-εr}e^{-εr'}
        let (p, eps) = (4.0, 0.25);
        let (x, w) = composite_nodes(1.0, 5.0, 4, 4);
        let k = KernelOnMeasure::from_fn("k1", (x.clone(), w.clone()), (x, w), |r, s| {
            Complex64::new(((2.0 / p - 1.0 - eps) * r + (1.0 - 2.0 / p - eps) * s).exp(), 0.0)
        })
        .unwrap();
        let warp = WarpFunction::hyperbolic();
        let shift = MeasureShift { warp: &warp, dim: 3, p };
        let c = weighted_conjugate(&k, |_| 1.0, |_| 1.0, Some(&shift)).unwrap();
        for i in 0..c.nrows() {
            for j in 0..c.ncols() {
                let want = (-eps * (c.xs[i] + c.ys[j])).exp();
                assert!((c.values[(i, j)].re - want).abs() < 1e-13 * want.max(1.0));
            }
        }
        let same = weighted_conjugate(&k, |_| 1.0, |_| 1.0, None).unwrap();
        assert_eq!(same.values, k.values);
        assert!(c.is_nonnegative());
    }
}
