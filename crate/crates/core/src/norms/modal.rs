//! Rotation-invariant operators on the full (r, θ) grid, applied mode by mode.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::power::LinearMap;
use crate::error::{Error, Result};

/// L W B W' on nodes (θ_a, r_i), flat index a·n_r + i, θ_a = 2πa/n_θ, where
/// B acts on the Fourier coefficient of e^{imθ} by blocks[slot(|m|)]·filter.
/// The measure is density(r_i)·Δr·Δθ.
pub struct ModalOperator {
    pub label: String,
    pub n_r: usize,
    pub n_theta: usize,
    /// |m| for each block.
    pub modes: Vec<i32>,
    pub blocks: Vec<DMatrix<Complex64>>,
    /// Applied before every block; real and self-adjoint for the radial density.
    pub filter: Option<DMatrix<Complex64>>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    density: Vec<f64>,
    nodes: Vec<f64>,
    measure: Vec<f64>,
    slot: Vec<usize>,
    adjoint_blocks: Vec<DMatrix<Complex64>>,
}

impl ModalOperator {
    pub fn new(
        label: impl Into<String>,
        radii: &[f64],
        dr: f64,
        n_theta: usize,
        density: Vec<f64>,
        modes: Vec<i32>,
        blocks: Vec<DMatrix<Complex64>>,
        filter: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n_r = radii.len();
        if density.len() != n_r || blocks.len() != modes.len() || blocks.iter().any(|b| b.nrows() != n_r || b.ncols() != n_r) {
            return Err(Error::Domain("modal blocks disagree with the radial grid".into()));
        }
        let half = (n_theta / 2) as i32;
        let slot = (-half..half)
            .map(|m| modes.iter().position(|&k| k == m.abs()).ok_or_else(|| Error::Domain(format!("no block for mode {m}"))))
            .collect::<Result<Vec<_>>>()?;
        let dtheta = TAU / n_theta as f64;
        let nodes = (0..n_theta).flat_map(|_| radii.iter().copied()).collect();
        let measure = (0..n_theta).flat_map(|_| density.iter().map(move |d| d * dr * dtheta)).collect();
        // μ-adjoint of each block: M^{-1} B^H M
        let adjoint_blocks = blocks.iter().map(|b| DMatrix::from_fn(n_r, n_r, |i, j| b[(j, i)].conj() * density[j] / density[i])).collect();
        Ok(Self {
            label: label.into(),
            n_r,
            n_theta,
            modes,
            blocks,
            filter: filter.map(|f| f.map(|v| Complex64::new(v, 0.0))),
            left: vec![1.0; n_r],
            right: vec![1.0; n_r],
            density,
            nodes,
            measure,
            slot,
            adjoint_blocks,
        })
    }

    /// Conjugates to x ↦ left(r)·(B u)(x) with u ↦ right(r')·u.
    pub fn with_weights(mut self, left: impl Fn(f64) -> f64, right: impl Fn(f64) -> f64) -> Self {
        let radii: Vec<f64> = self.nodes[..self.n_r].to_vec();
        self.left = radii.iter().map(|&r| left(r)).collect();
        self.right = radii.iter().map(|&r| right(r)).collect();
        self
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn run(&self, u: &[Complex64], blocks: &[DMatrix<Complex64>], pre: &[f64], post: &[f64], filter_first: bool) -> Vec<Complex64> {
        let (n, nt) = (self.n_r, self.n_theta);
        let half = (nt / 2) as i32;
        let twiddle = |k: i64| Complex64::from_polar(1.0, TAU * k as f64 / nt as f64);
        let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
        for (b, m) in (-half..half).enumerate() {
            let mut coef = nalgebra::DVector::from_fn(n, |i, _| {
                (0..nt).map(|a| u[a * n + i] * pre[i] * twiddle(-(m as i64) * a as i64)).sum::<Complex64>() / nt as f64
            });
            if let (Some(f), true) = (&self.filter, filter_first) {
                coef = f * coef;
            }
            let mut v = &blocks[self.slot[b]] * coef;
            if let (Some(f), false) = (&self.filter, filter_first) {
                v = f * v;
            }
            for a in 0..nt {
                let t = twiddle(m as i64 * a as i64);
                for i in 0..n {
                    out[a * n + i] += v[i] * t * post[i];
                }
            }
        }
        out
    }
}

impl LinearMap for ModalOperator {
    fn col_nodes(&self) -> &[f64] {
        &self.nodes
    }
    fn row_measure(&self) -> &[f64] {
        &self.measure
    }
    fn col_measure(&self) -> &[f64] {
        &self.measure
    }
    fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.run(u, &self.blocks, &self.right, &self.left, true)
    }
    fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.run(v, &self.adjoint_blocks, &self.left, &self.right, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{probe_lower, KernelOnMeasure, PowerOptions};

    fn sample() -> ModalOperator {
        let radii: Vec<f64> = (0..5).map(|i| 1.0 + 0.3 * i as f64).collect();
        let density: Vec<f64> = radii.iter().map(|r| (0.5 * r).exp()).collect();
        let blocks: Vec<DMatrix<Complex64>> = (0..3)
            .map(|m| DMatrix::from_fn(5, 5, |i, j| Complex64::new(1.0 / (1.0 + (i as f64 - j as f64).abs() + m as f64), 0.1 * (i as f64 - 2.0 * j as f64 + m as f64))))
            .collect();
        let filter = DMatrix::from_fn(5, 5, |i, j| if i == j { 0.8 } else { 0.05 * (density[j] / density[i]).sqrt() });
        ModalOperator::new("t", &radii, 0.3, 4, density, vec![0, 1, 2], blocks, Some(filter)).unwrap().with_weights(|r| 1.0 / (1.0 + r * r), |r| 1.0 + r * r)
    }

    #[test]
    fn adjoint_matches_pairing() {
        let op = sample();
        let n = op.len();
        let u: Vec<Complex64> = (0..n).map(|k| Complex64::new((k as f64).sin(), (0.3 * k as f64).cos())).collect();
        let v: Vec<Complex64> = (0..n).map(|k| Complex64::new((0.7 * k as f64).cos(), (1.3 * k as f64).sin())).collect();
        let mu = op.row_measure();
        let ip = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).zip(mu).map(|((x, y), m)| x * y.conj() * m).sum::<Complex64>();
        let (l, r) = (ip(&op.apply(&u), &v), ip(&u, &op.apply_adjoint(&v)));
        assert!((l - r).norm() < 1e-12 * l.norm().max(1.0), "{l} {r}");
    }

    #[test]
    fn agrees_with_explicit_kernel() {
        // assemble the full matrix column by column and compare probe bounds
        let op = sample();
        let n = op.len();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[j] = Complex64::new(1.0, 0.0);
            a.set_column(j, &nalgebra::DVector::from_vec(op.apply(&e)));
        }
        let k = KernelOnMeasure::from_matrix("dense", op.col_nodes().to_vec(), op.col_measure().to_vec(), &a).unwrap();
        for p in [4.0 / 3.0, 4.0] {
            let opts = PowerOptions::default();
            let (x, _) = probe_lower(&op, p, &opts);
            let (y, _) = probe_lower(&k, p, &opts);
            assert!((x - y).abs() < 1e-10 * y, "{x} {y}");
        }
    }
}
