//! Left quantization of symbols on the discrete end with the near-diagonal cutoff.
//!
//! Per radial row the momentum integral over the Nyquist band is a trapezoid sum
//! evaluated by one inverse FFT; angular momenta are the grid's Fourier modes.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::banded::Banded;
use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::funcs::SpectralFunction;
use crate::geometry::{DiagonalCutoff, EndCutoff, MetricModel, Window};
use crate::symbol::funcalc::{FuncSymbol, NumFuncSymbol};
use crate::symbol::{NumSymbol, Symbol, SymbolKind};

/// A symbol together with what it needs to be evaluated.
#[derive(Clone, Copy)]
pub enum Source<'a> {
    /// Resolvent-type symbol at spectral parameter z.
    Resolvent { symbol: &'a Symbol, z: Complex64 },
    /// a_j with φ substituted.
    Func { symbol: &'a FuncSymbol, phi: &'a dyn SpectralFunction },
}

impl Source<'_> {
    fn order(&self) -> f64 {
        match self {
            Source::Resolvent { symbol, .. } => symbol.order as f64,
            Source::Func { symbol, phi } => -2.0 * phi.sigma() - symbol.level as f64,
        }
    }

    fn is_polynomial(&self) -> bool {
        match self {
            Source::Resolvent { symbol, .. } => symbol.kind() == SymbolKind::Polynomial,
            Source::Func { .. } => false,
        }
    }

    fn freeze(&self, model: &MetricModel, r: f64) -> Result<Frozen<'_>> {
        Ok(match *self {
            Source::Resolvent { symbol, z } => Frozen::Resolvent(symbol.at(model, r, &[0.0])?, z),
            Source::Func { symbol, phi } => Frozen::Func(symbol.at(model, r, &[0.0])?, phi),
        })
    }
}

enum Frozen<'a> {
    Resolvent(NumSymbol, Complex64),
    Func(NumFuncSymbol, &'a dyn SpectralFunction),
}

impl Frozen<'_> {
    fn eval(&self, rho: f64, eta: f64) -> Result<Complex64> {
        match self {
            Frozen::Resolvent(s, z) => s.eval(rho, &[eta], *z),
            Frozen::Func(a, phi) => Ok(a.eval(rho, &[eta], *phi)),
        }
    }
}

/// Σ coeff · source, quantized as one operator.
pub type Terms<'a> = [(Complex64, Source<'a>)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngularCutoff {
    /// ζ(|(r - r', θ - θ')|), applied on the angular grid and transformed back to modes.
    Joint,
    /// ζ(r - r') only; keeps each mode block a plain radial convolution cutoff.
    Radial,
}

/// The cutoff χ(r') applied to the primed variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColumnCutoff {
    End(EndCutoff),
    Window(Window),
    One,
}

impl ColumnCutoff {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            ColumnCutoff::End(c) => c.eval(r),
            ColumnCutoff::Window(w) => w.eval(r),
            ColumnCutoff::One => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuantizeOptions {
    pub angular: AngularCutoff,
    pub column: ColumnCutoff,
    /// FFT length for the momentum integral; 0 picks one from the band.
    pub momentum_points: usize,
}

impl QuantizeOptions {
    pub fn for_model(model: &MetricModel) -> Self {
        Self { angular: AngularCutoff::Joint, column: ColumnCutoff::End(model.end_cutoff()), momentum_points: 0 }
    }
}

/// Per-mode kernel blocks of a quantized symbol.
///
/// Entries vanish whenever the radial offset exceeds 2ε; with the joint cutoff the
/// full-grid matrix (see [`QuantizedOp::full_grid_entry`]) vanishes whenever the
/// distance between (r, θ) and (r', θ') exceeds 2ε modulo 2π.
#[derive(Debug, Clone)]
pub struct QuantizedOp {
    pub grid: GridSpec,
    pub zeta: DiagonalCutoff,
    pub angular: AngularCutoff,
    /// Radial half-bandwidth in nodes.
    pub band: usize,
    /// Distinct |m|.
    pub modes: Vec<i32>,
    pub blocks: Vec<Banded<Complex64>>,
}

impl QuantizedOp {
    pub fn block(&self, m: i32) -> Option<&Banded<Complex64>> {
        self.modes.iter().position(|&k| k == m.abs()).map(|i| &self.blocks[i])
    }

    pub fn dense_block(&self, k: usize) -> DMatrix<Complex64> {
        self.blocks[k].to_dense()
    }

    /// Entry between (r_i, θ_j) and (r_k, θ_l) of the operator on the full tensor grid.
    pub fn full_grid_entry(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        let nt = self.grid.n_theta;
        let dtheta = std::f64::consts::TAU * (j as f64 - l as f64) / nt as f64;
        self.grid
            .modes()
            .into_iter()
            .map(|m| {
                let b = self.block(m).expect("mode present");
                Complex64::from_polar(1.0, m as f64 * dtheta) * b.get(i, k)
            })
            .sum::<Complex64>()
            / nt as f64
    }

    /// Largest full-grid entry whose base points are more than 2ε apart.
    pub fn support_violation(&self) -> f64 {
        let nt = self.grid.n_theta;
        let dr = self.grid.dr();
        let radius = self.zeta.support_radius();
        let mut worst: f64 = 0.0;
        for i in 0..self.grid.n_r {
            for k in self.blocks[0].row_range(i) {
                for l in 0..nt {
                    let theta = periodic_offset(l, nt);
                    let dist = ((i as f64 - k as f64) * dr).hypot(theta);
                    let radial_only = ((i as f64 - k as f64) * dr).abs();
                    let far = match self.angular {
                        AngularCutoff::Joint => dist > radius,
                        AngularCutoff::Radial => radial_only > radius,
                    };
                    if far {
                        worst = worst.max(self.full_grid_entry(i, l, k, 0).norm());
                    }
                }
            }
        }
        worst
    }
}

/// θ_l folded into (-π, π].
fn periodic_offset(l: usize, nt: usize) -> f64 {
    let t = std::f64::consts::TAU * l as f64 / nt as f64;
    if t > std::f64::consts::PI {
        t - std::f64::consts::TAU
    } else {
        t
    }
}

/// Raw kernels k_m(r_i, r_i - d·Δr), d ∈ [-band, band], before any cutoff.
/// Indexed [mode][row][d + band].
pub(crate) struct RawKernels {
    pub band: usize,
    pub data: Vec<Vec<Vec<Complex64>>>,
}

pub(crate) fn band_for(grid: &GridSpec, zeta: &DiagonalCutoff) -> usize {
    ((zeta.support_radius() / grid.dr()).ceil() as usize).min(grid.n_r.saturating_sub(1))
}

fn momentum_points(band: usize, requested: usize) -> usize {
    if requested > 0 {
        return requested.max(2 * band + 1);
    }
    (4 * (2 * band + 1)).max(1024).next_power_of_two()
}

/// 1 for |ξ| <= π/2, falling smoothly to 0 at the Nyquist edge |ξ| = π.
pub(crate) fn momentum_taper(xi: f64) -> f64 {
    let half = std::f64::consts::FRAC_PI_2;
    crate::geometry::smooth_step((std::f64::consts::PI - xi.abs()) / half)
}

/// k_d = (1/2π)∫_{-π}^{π} e^{idξ} a(r, hξ/Δr, h w(r) m) dξ by the N-point trapezoid sum.
pub(crate) fn raw_kernels(
    model: &MetricModel,
    grid: &GridSpec,
    terms: &Terms,
    modes: &[i32],
    band: usize,
    requested_points: usize,
    taper: bool,
) -> Result<RawKernels> {
    let nf = momentum_points(band, requested_points);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_inverse(nf);
    let h = grid.h;
    let dr = grid.dr();
    let rows: Vec<Result<Vec<Vec<Complex64>>>> = (0..grid.n_r)
        .into_par_iter()
        .map(|i| {
            let r = grid.r(i);
            let w = model.warp.eval(r);
            let frozen = terms.iter().map(|(c, s)| Ok((*c, s.freeze(model, r)?))).collect::<Result<Vec<_>>>()?;
            let mut out = Vec::with_capacity(modes.len());
            let mut buf = vec![Complex64::new(0.0, 0.0); nf];
            for &m in modes {
                let eta = h * w * m as f64;
                for (l, b) in buf.iter_mut().enumerate() {
                    let xi = -std::f64::consts::PI + std::f64::consts::TAU * l as f64 / nf as f64;
                    let rho = h * xi / dr;
                    let mut v = Complex64::new(0.0, 0.0);
                    for (c, f) in &frozen {
                        v += c * f.eval(rho, eta)?;
                    }
                    *b = if taper { v * momentum_taper(xi) } else { v };
                }
                fft.process(&mut buf);
                let row: Vec<Complex64> = (0..=2 * band)
                    .map(|idx| {
                        let d = idx as i64 - band as i64;
                        let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        buf[d.rem_euclid(nf as i64) as usize] * (sign / nf as f64)
                    })
                    .collect();
                out.push(row);
            }
            Ok(out)
        })
        .collect();
    let mut data = vec![Vec::with_capacity(grid.n_r); modes.len()];
    for row in rows {
        for (k, v) in row?.into_iter().enumerate() {
            data[k].push(v);
        }
    }
    Ok(RawKernels { band, data })
}

impl RawKernels {
    /// Multiplies entry (i, i - d) by weight(d·Δr)·χ(r_{i-d}) and stores the result as band matrices.
    pub(crate) fn radial(&self, grid: &GridSpec, weight: impl Fn(f64) -> f64, column: &ColumnCutoff) -> Vec<Banded<Complex64>> {
        let n = grid.n_r;
        let dr = grid.dr();
        let chi: Vec<f64> = grid.radii().iter().map(|&r| column.eval(r)).collect();
        let wts: Vec<f64> = (0..=2 * self.band).map(|idx| weight((idx as f64 - self.band as f64) * dr)).collect();
        self.data
            .iter()
            .map(|rows| {
                let mut b = Banded::zeros(n, self.band, self.band);
                for (i, row) in rows.iter().enumerate() {
                    for k in b.row_range(i) {
                        let idx = (i as i64 - k as i64 + self.band as i64) as usize;
                        b.set(i, k, row[idx] * (wts[idx] * chi[k]));
                    }
                }
                b
            })
            .collect()
    }
}

fn check_sources(terms: &Terms) -> Result<()> {
    for (_, s) in terms {
        if !s.is_polynomial() && s.order() >= -1.0 {
            return Err(Error::Unsupported(format!("symbol of order {} needs oscillatory regularization", s.order())));
        }
    }
    Ok(())
}

/// Distinct |m| are enough only if the symbols are even in η.
fn check_even(model: &MetricModel, grid: &GridSpec, terms: &Terms) -> Result<()> {
    let r = grid.r(grid.n_r / 2);
    for (_, s) in terms {
        let f = s.freeze(model, r)?;
        for &(rho, eta) in &[(0.3, 0.7), (-1.1, 0.2)] {
            let (a, b) = (f.eval(rho, eta)?, f.eval(rho, -eta)?);
            if (a - b).norm() > 1e-12 * (1.0 + a.norm()) {
                return Err(Error::Unsupported("symbol odd in η; needs signed modes".into()));
            }
        }
    }
    Ok(())
}

/// Quantizes Σ c·a on every mode of the grid.
pub fn quantize(model: &MetricModel, grid: &GridSpec, terms: &Terms, opts: &QuantizeOptions) -> Result<QuantizedOp> {
    check_sources(terms)?;
    quantize_unchecked(model, grid, terms, opts)
}

/// As [`quantize`] without the order check: order -1 symbols are taken with the
/// Nyquist-truncated momentum integral, which is finite on the grid.
pub(crate) fn quantize_unchecked(model: &MetricModel, grid: &GridSpec, terms: &Terms, opts: &QuantizeOptions) -> Result<QuantizedOp> {
    grid.validate(model.zeta.epsilon)?;
    check_even(model, grid, terms)?;
    let zeta = model.zeta;
    let band = band_for(grid, &zeta);
    let modes = grid.distinct_modes();
    let raw = raw_kernels(model, grid, terms, &modes, band, opts.momentum_points, false)?;
    let blocks = match opts.angular {
        AngularCutoff::Radial => raw.radial(grid, |x| zeta.eval(x), &opts.column),
        AngularCutoff::Joint => joint_cutoff(grid, &raw, &zeta, &modes, &opts.column),
    };
    Ok(QuantizedOp { grid: *grid, zeta, angular: opts.angular, band, modes, blocks })
}

/// Back to the angular grid, multiply by ζ(|(r - r', θ)|), forward to modes again.
fn joint_cutoff(grid: &GridSpec, raw: &RawKernels, zeta: &DiagonalCutoff, modes: &[i32], column: &ColumnCutoff) -> Vec<Banded<Complex64>> {
    let n = grid.n_r;
    let nt = grid.n_theta;
    let dr = grid.dr();
    let band = raw.band;
    let signed = grid.modes();
    let slot: Vec<usize> = signed.iter().map(|m| modes.iter().position(|&k| k == m.abs()).unwrap()).collect();
    let thetas: Vec<f64> = (0..nt).map(|l| periodic_offset(l, nt)).collect();
    let phase: Vec<Vec<Complex64>> = signed.iter().map(|&m| thetas.iter().map(|&t| Complex64::from_polar(1.0, m as f64 * t)).collect()).collect();
    let chi: Vec<f64> = grid.radii().iter().map(|&r| column.eval(r)).collect();
    let cut: Vec<Vec<f64>> = (0..=2 * band)
        .map(|idx| {
            let x = (idx as f64 - band as f64) * dr;
            thetas.iter().map(|&t| zeta.eval(x.hypot(t))).collect()
        })
        .collect();
    let mut blocks: Vec<Banded<Complex64>> = modes.iter().map(|_| Banded::zeros(n, band, band)).collect();
    let mut angular = vec![Complex64::new(0.0, 0.0); nt];
    for i in 0..n {
        for k in blocks[0].row_range(i) {
            let idx = (i as i64 - k as i64 + band as i64) as usize;
            for (l, a) in angular.iter_mut().enumerate() {
                let mut v = Complex64::new(0.0, 0.0);
                for (s, ph) in slot.iter().zip(&phase) {
                    v += ph[l] * raw.data[*s][i][idx];
                }
                *a = v * (cut[idx][l] * chi[k] / nt as f64);
            }
            for (kk, &m) in modes.iter().enumerate() {
                let si = signed.iter().position(|&s| s == m).unwrap_or_else(|| signed.iter().position(|&s| s == -m).unwrap());
                let v: Complex64 = angular.iter().zip(&phase[si]).map(|(a, p)| a * p.conj()).sum();
                blocks[kk].set(i, k, v);
            }
        }
    }
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::SpectralKind;
    use crate::geometry::{WarpFunction, Which};
    use crate::symbol::{funcalc_symbols, parametrix, Polynomial};

    fn model() -> MetricModel {
        MetricModel::new(2, WarpFunction::hyperbolic()).with_radius(1.0)
    }

    #[test]
    fn one_quantizes_to_the_column_cutoff() {
        let m = model();
        let g = GridSpec::new(1.0, 6.0, 119, 8, 0.2);
        let one = Symbol::polynomial(2, 0, Polynomial::constant(crate::symbol::Coeff::one()));
        let terms = [(Complex64::new(1.0, 0.0), Source::Resolvent { symbol: &one, z: Complex64::new(0.0, 1.0) })];
        for angular in [AngularCutoff::Joint, AngularCutoff::Radial] {
            let opts = QuantizeOptions { angular, ..QuantizeOptions::for_model(&m) };
            let q = quantize(&m, &g, &terms, &opts).unwrap();
            for b in &q.blocks {
                for i in 0..g.n_r {
                    for k in b.row_range(i) {
                        let want = if i == k { m.end_cutoff().eval(g.r(i)) } else { 0.0 };
                        assert!((b.get(i, k) - want).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn proper_support() {
        let m = model();
        let g = GridSpec::new(1.0, 5.0, 79, 8, 0.5);
        let par = parametrix(&m, Which::Tilde, 0).unwrap();
        let terms = [(Complex64::new(1.0, 0.0), Source::Resolvent { symbol: &par.levels[0], z: Complex64::new(0.0, 1.0) })];
        let q = quantize(&m, &g, &terms, &QuantizeOptions::for_model(&m)).unwrap();
        assert!(q.support_violation() < 1e-14);
        assert!(q.band as f64 * g.dr() <= 2.0 * m.zeta.epsilon + g.dr());
    }

    #[test]
    fn order_minus_one_rejected() {
        let m = model();
        let g = GridSpec::new(1.0, 5.0, 79, 8, 0.5);
        let par = parametrix(&m, Which::Tilde, 0).unwrap();
        let t1 = par.telescoping_sum(1).unwrap();
        let terms = [(Complex64::new(1.0, 0.0), Source::Resolvent { symbol: &t1, z: Complex64::new(0.0, 1.0) })];
        assert!(matches!(quantize(&m, &g, &terms, &QuantizeOptions::for_model(&m)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn flat_resolvent_kernel_matches_band_integral() {
        // oracle: the same band-limited integral by composite Gauss–Legendre, and the
        // full-line kernel e^{-κ|x|/h}/(2κh)·Δr (κ² = η² - z) up to the Nyquist tail
        let m = MetricModel::new(2, WarpFunction::cylindrical()).with_epsilon(1.0);
        let h = 0.1;
        let g = GridSpec::new(0.0, 4.0, 799, 4, h);
        let par = parametrix(&m, Which::Tilde, 0).unwrap();
        let z = Complex64::new(0.0, 1.0);
        let terms = [(Complex64::new(1.0, 0.0), Source::Resolvent { symbol: &par.levels[0], z })];
        let opts = QuantizeOptions { angular: AngularCutoff::Radial, column: ColumnCutoff::One, momentum_points: 1 << 14 };
        let q = quantize(&m, &g, &terms, &opts).unwrap();
        let dr = g.dr();
        let (gx, gw) = crate::quad::gauss_legendre(16);
        for mode in [0, 2] {
            let eta = h * mode as f64;
            let kappa = (Complex64::new(eta * eta, 0.0) - z).sqrt();
            let b = q.block(mode).unwrap();
            let i = 400;
            for d in [3usize, 10, 40] {
                let x = d as f64 * dr;
                let panels = 400;
                let mut band = Complex64::new(0.0, 0.0);
                for p in 0..panels {
                    let lo = -std::f64::consts::PI + std::f64::consts::TAU * p as f64 / panels as f64;
                    let hi = lo + std::f64::consts::TAU / panels as f64;
                    for (xi, w) in crate::quad::mapped(&gx, &gw, lo, hi) {
                        let rho = h * xi / dr;
                        band += w * Complex64::from_polar(1.0, d as f64 * xi) / (rho * rho + eta * eta - z);
                    }
                }
                band *= m.zeta.eval(x) / std::f64::consts::TAU;
                assert!((b.get(i, i - d) - band).norm() < 1e-9, "m={mode} d={d}");
                let line = (-kappa * x / h).exp() / (2.0 * kappa * h) * dr * m.zeta.eval(x);
                let tail = 2.0 * dr / (std::f64::consts::PI * h) * dr / (std::f64::consts::PI * h);
                assert!((b.get(i, i - d) - line).norm() < tail, "m={mode} d={d}");
            }
        }
    }

    #[test]
    fn leading_func_symbol_approximates_eigen_calculus() {
        let m = MetricModel::new(2, WarpFunction::cylindrical()).with_epsilon(1.5);
        let phi = SpectralKind::rational();
        let par = parametrix(&m, Which::Tilde, 0).unwrap();
        let a = funcalc_symbols(&par, 4).unwrap();
        for &h in &[0.1] {
            let g = GridSpec::with_step(0.0, 10.0, h / 6.0, 4, h);
            let op = super::super::assemble_with(&m, &g, Which::Tilde, super::super::FdOrder::Eighth).unwrap();
            let exact = super::super::funcalc_eigen(&op, &phi).unwrap();
            let win = Window { rise_start: 4.0, fall_end: 6.0 };
            let terms = [(Complex64::new(1.0, 0.0), Source::Func { symbol: &a[0], phi: &phi })];
            let opts = QuantizeOptions { angular: AngularCutoff::Radial, column: ColumnCutoff::Window(win), momentum_points: 0 };
            let q = quantize(&m, &g, &terms, &opts).unwrap();
            let mut worst: f64 = 0.0;
            for k in 0..q.modes.len() {
                let mut diff = exact.blocks[k].clone();
                for j in 0..g.n_r {
                    let c = win.eval(g.r(j));
                    for i in 0..g.n_r {
                        diff[(i, j)] *= c;
                    }
                }
                diff -= q.dense_block(k);
                worst = worst.max(diff.singular_values().max());
            }
            // flat case: only the momentum cutoff at the Nyquist band and the ζ tails remain
            assert!(worst < 1e-4, "h={h}: {worst:e}");
        }
    }
}
