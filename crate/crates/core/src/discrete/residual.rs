//! Residuals of the resolvent parametrix and of the functional-calculus expansion
//! on a window of the end, with their L² operator norms.
//!
//! The parametrix residual is assembled from symbols rather than by applying a
//! difference scheme to Q_N: with p polynomial in the momenta the composition
//! (p - z) # q is exact, so
//!   (h²P - z) Q_N - χ = [ζ·K_res + h²(commutator of P with ζ)] χ,
//! where K_res quantizes the uncancelled orders h^{N+1}, h^{N+2} of the product.
//! All momentum integrals carry the same smooth taper below the Nyquist edge;
//! a hard band edge leaves a slowly decaying kernel tail that the commutator
//! with ζ turns into an O(h) error independent of N. With a common right
//! multiplier the identity above holds for the tapered operators, so what is
//! measured is the residual restricted to the resolved momenta.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::assemble::{assemble_with, FdOrder};
use super::banded::Banded;
use super::eigen::funcalc_eigen;
use super::grid::GridSpec;
use super::quantize::{band_for, raw_kernels, quantize_unchecked, AngularCutoff, ColumnCutoff, QuantizeOptions, Source};
use crate::error::Result;
use crate::funcs::{SpectralFunction, SpectralKind};
use crate::geometry::{MeasureTag, MetricModel, Which, Window};
use crate::norms::{power2, ModalOperator, PowerOptions};
use crate::symbol::{funcalc_symbols, parametrix, Coeff, FuncSymbol, Mono, Parametrix, Polynomial, Symbol};

/// Where and how finely a residual is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSetup {
    /// Column cutoff; the residual is measured as an operator applied after it.
    pub window: Window,
    /// Radial nodes per unit of h.
    pub steps_per_h: f64,
    pub n_theta: usize,
    /// Distance from the window to the Dirichlet walls, in units of h
    /// (expansion residual only; the parametrix residual needs no walls).
    pub clearance_h: f64,
    /// Radial momenta ρ where the expansion residual's input filter rolls off
    /// from 1 to 0. Above it the difference scheme no longer resolves φ(h²P).
    pub resolved_band: (f64, f64),
}

impl Default for ResidualSetup {
    fn default() -> Self {
        Self { window: Window { rise_start: 2.0, fall_end: 4.0 }, steps_per_h: 4.0, n_theta: 16, clearance_h: 26.0, resolved_band: (4.0, 8.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualCase {
    pub h: f64,
    pub n: usize,
    /// L² operator norm of the residual for the measure of the representation.
    pub norm: f64,
    /// norm / h^{N+1}
    pub scaled: f64,
    pub per_mode: Vec<f64>,
    pub n_r: usize,
    pub converged: bool,
}

fn momentum_points(grid: &GridSpec, model: &MetricModel) -> usize {
    (2 * (2 * band_for(grid, &model.zeta) + 1)).next_power_of_two().max(256)
}

fn measure(model: &MetricModel, grid: &GridSpec, which: Which) -> Vec<f64> {
    let tag = match which {
        Which::Plain => MeasureTag::Dg,
        Which::Tilde => MeasureTag::DgTilde,
    };
    grid.radii().iter().map(|&r| tag.density(model, r, &[0.0])).collect()
}

fn power_opts() -> PowerOptions {
    PowerOptions { rtol: 1e-7, max_iter: 2000, ..Default::default() }
}

/// ‖B‖ on L²(μ) for a band matrix acting on nodal values.
fn banded_norm(b: &Banded<Complex64>, mu: &[f64]) -> (f64, bool) {
    let adjoint = |v: &[Complex64]| {
        let mut out = vec![Complex64::new(0.0, 0.0); b.n];
        for i in 0..b.n {
            let vi = v[i] * mu[i];
            for j in b.row_range(i) {
                out[j] += b.get(i, j).conj() * vi;
            }
        }
        out.iter_mut().zip(mu).for_each(|(o, m)| *o /= m);
        out
    };
    let (est, _, ok) = power2(b.n, |u| b.matvec(u), adjoint, mu, &power_opts());
    (est, ok)
}

/// ‖A F‖ on L²(μ), F a real matrix self-adjoint for μ.
fn dense_norm(a: &DMatrix<Complex64>, filter: &DMatrix<f64>, mu: &[f64]) -> (f64, bool) {
    let n = a.nrows();
    let f = |u: &[Complex64]| (0..n).map(|i| (0..n).map(|j| u[j] * filter[(i, j)]).sum()).collect::<Vec<Complex64>>();
    let apply = |u: &[Complex64]| {
        let fu = f(u);
        (0..n).map(|i| (0..n).map(|j| a[(i, j)] * fu[j]).sum()).collect::<Vec<Complex64>>()
    };
    let adjoint = |v: &[Complex64]| {
        let w: Vec<Complex64> = (0..n).map(|j| (0..n).map(|i| a[(i, j)].conj() * v[i] * mu[i]).sum::<Complex64>() / mu[j]).collect();
        f(&w)
    };
    let (est, _, ok) = power2(n, apply, adjoint, mu, &power_opts());
    (est, ok)
}

/// μ^{-1/2} S diag(τ) S μ^{1/2} with S the orthonormal Dirichlet sine transform
/// and τ rolling off from 1 at ρ = band.0 to 0 at band.1, ρ = hξ/Δr.
pub fn resolved_filter(grid: &GridSpec, mu: &[f64], band: (f64, f64)) -> DMatrix<f64> {
    let n = grid.n_r;
    let scale = (2.0 / (n + 1) as f64).sqrt();
    let mut cols = Vec::new();
    let mut taus = Vec::new();
    for k in 1..=n {
        let xi = std::f64::consts::PI * k as f64 / (n + 1) as f64;
        let tau = crate::geometry::smooth_step((band.1 - grid.h * xi / grid.dr()) / (band.1 - band.0));
        if tau > 0.0 {
            cols.push(k);
            taus.push(tau);
        }
    }
    let s = DMatrix::from_fn(n, cols.len(), |i, c| scale * (std::f64::consts::PI * (cols[c] * (i + 1)) as f64 / (n + 1) as f64).sin());
    let st = DMatrix::from_fn(cols.len(), n, |c, j| s[(j, c)] * taus[c]);
    let mut f = s * st;
    for i in 0..n {
        for j in 0..n {
            f[(i, j)] *= (mu[j] / mu[i]).sqrt();
        }
    }
    f
}

fn finish(h: f64, n: usize, n_r: usize, norms: Vec<(f64, bool)>) -> ResidualCase {
    let norm = norms.iter().map(|v| v.0).fold(0.0, f64::max);
    ResidualCase {
        h,
        n,
        norm,
        scaled: norm / h.powi(n as i32 + 1),
        per_mode: norms.iter().map(|v| v.0).collect(),
        n_r,
        converged: norms.iter().all(|v| v.1),
    }
}

/// Symbolic pieces of (h²P - z)Q_N - 1 for one model, reusable across h and z.
pub struct ParametrixResidual {
    pub model: MetricModel,
    pub which: Which,
    pub par: Parametrix,
    /// Uncancelled orders ν = N+1 ..= N+2 of the composed symbol.
    pub remainder: Vec<(usize, Symbol)>,
    /// ρ·q_j and ∂_r q_j + (w'/w)η∂_η q_j, whose quantizations give ∂_r Op(q_j).
    pub rho_q: Vec<Symbol>,
    pub twisted_q: Vec<Symbol>,
}

impl ParametrixResidual {
    pub fn new(model: &MetricModel, which: Which, n: usize) -> Result<Self> {
        let par = parametrix(model, which, n)?;
        let rules = par.lap.rules;
        let remainder = (n + 1..=n + 2).map(|nu| Ok((nu, par.telescoping_sum(nu)?))).collect::<Result<Vec<_>>>()?;
        let rho = Polynomial::term(Mono::rho(1), Coeff::one());
        let rho_q = par.levels.iter().map(|q| q.mul_poly(&rho, 1)).collect();
        // i·D_w = ∂_r + (w'/w)η∂_η
        let twisted_q = par.levels.iter().map(|q| q.d_w(&rules).scale(Complex64::new(0.0, 1.0))).collect();
        Ok(Self { model: model.clone(), which, par, remainder, rho_q, twisted_q })
    }

    pub fn depth(&self) -> usize {
        self.par.depth()
    }

    pub fn grid(&self, h: f64, setup: &ResidualSetup) -> GridSpec {
        let reach = self.model.zeta.support_radius() + h;
        GridSpec::with_step(setup.window.rise_start - reach, setup.window.fall_end + reach, h / setup.steps_per_h, setup.n_theta, h)
    }

    pub fn at(&self, h: f64, z: Complex64, setup: &ResidualSetup) -> Result<ResidualCase> {
        let grid = self.grid(h, setup);
        grid.validate(self.model.zeta.epsilon)?;
        let zeta = self.model.zeta;
        let band = band_for(&grid, &zeta);
        let modes = grid.distinct_modes();
        let nf = momentum_points(&grid, &self.model);
        let c = |x: f64| Complex64::new(x, 0.0);
        let res_terms: Vec<(Complex64, Source)> = self.remainder.iter().map(|(nu, s)| (c(h.powi(*nu as i32)), Source::Resolvent { symbol: s, z })).collect();
        let q_terms: Vec<(Complex64, Source)> = self.par.levels.iter().enumerate().map(|(j, s)| (c(h.powi(j as i32)), Source::Resolvent { symbol: s, z })).collect();
        let mut dq_terms: Vec<(Complex64, Source)> = Vec::new();
        for (j, (a, b)) in self.rho_q.iter().zip(&self.twisted_q).enumerate() {
            let hj = h.powi(j as i32);
            dq_terms.push((Complex64::new(0.0, hj / h), Source::Resolvent { symbol: a, z }));
            dq_terms.push((c(hj), Source::Resolvent { symbol: b, z }));
        }
        let column = ColumnCutoff::Window(setup.window);
        let k_res = raw_kernels(&self.model, &grid, &res_terms, &modes, band, nf, true)?.radial(&grid, |x| zeta.eval(x), &column);
        let raw_q = raw_kernels(&self.model, &grid, &q_terms, &modes, band, nf, true)?;
        let q_dd = raw_q.radial(&grid, |x| zeta.d2(x), &column);
        let q_d = raw_q.radial(&grid, |x| zeta.d1(x), &column);
        let dq_d = raw_kernels(&self.model, &grid, &dq_terms, &modes, band, nf, true)?.radial(&grid, |x| zeta.d1(x), &column);
        // ζ' above is d/dx ζ(x) at x = r - r', so ∂_r ζ = ζ'
        let h2 = h * h;
        let log_deriv: Vec<f64> = grid.radii().iter().map(|&r| self.model.warp.log_deriv(r)).collect();
        let mu = measure(&self.model, &grid, self.which);
        let mut norms = Vec::with_capacity(modes.len());
        for k in 0..modes.len() {
            let mut r = k_res[k].clone();
            for i in 0..grid.n_r {
                for j in r.row_range(i) {
                    // -h²(ζ'' Q + 2ζ' ∂_r Q); the plain operator adds (w'/w)∂_r, giving +h²(w'/w)ζ' Q
                    let mut v = r.get(i, j) - (q_dd[k].get(i, j) + dq_d[k].get(i, j) * 2.0) * h2;
                    if self.which == Which::Plain {
                        v += q_d[k].get(i, j) * (h2 * log_deriv[i]);
                    }
                    r.set(i, j, v);
                }
            }
            norms.push(banded_norm(&r, &mu));
        }
        Ok(finish(h, self.depth(), grid.n_r, norms))
    }
}

/// φ(h²P) - Σ_j h^j Op(a_j), restricted to the window, for one model and φ.
pub struct ExpansionResidual {
    pub model: MetricModel,
    pub which: Which,
    pub phi: SpectralKind,
    pub symbols: Vec<FuncSymbol>,
}

impl ExpansionResidual {
    pub fn new(model: &MetricModel, which: Which, phi: SpectralKind, n: usize) -> Result<Self> {
        let par = parametrix(model, which, n)?;
        let symbols = funcalc_symbols(&par, 12)?;
        Ok(Self { model: model.clone(), which, phi, symbols })
    }

    pub fn depth(&self) -> usize {
        self.symbols.len() - 1
    }

    pub fn grid(&self, h: f64, setup: &ResidualSetup) -> GridSpec {
        let reach = setup.clearance_h * h;
        GridSpec::with_step(setup.window.rise_start - reach, setup.window.fall_end + reach, h / setup.steps_per_h, setup.n_theta, h)
    }

    pub fn at(&self, h: f64, setup: &ResidualSetup) -> Result<ResidualCase> {
        Ok(self.at_each_depth(h, setup)?.pop().expect("at least one level"))
    }

    /// Residuals for every truncation 0..=depth, sharing one eigendecomposition.
    pub fn at_each_depth(&self, h: f64, setup: &ResidualSetup) -> Result<Vec<ResidualCase>> {
        let parts = self.parts(h, setup)?;
        (0..self.symbols.len())
            .map(|n| {
                let blocks = self.difference(h, setup, &parts, n)?;
                let norms = blocks.iter().map(|d| dense_norm(d, &parts.filter, &parts.mu)).collect();
                Ok(finish(h, n, parts.grid.n_r, norms))
            })
            .collect()
    }

    /// h^{-(N+1)}(φ(h²P) - Σ_{j ≤ N} h^j Op(a_j)) after the window, with the
    /// resolved-band filter on the input, as an operator on the full grid.
    pub fn remainder_operator(&self, h: f64, setup: &ResidualSetup, n: usize) -> Result<ModalOperator> {
        if n >= self.symbols.len() {
            return Err(crate::Error::Domain(format!("depth {n} > {}", self.depth())));
        }
        let parts = self.parts(h, setup)?;
        let scale = Complex64::new(h.powi(-(n as i32 + 1)), 0.0);
        let blocks = self.difference(h, setup, &parts, n)?.into_iter().map(|b| b * scale).collect();
        ModalOperator::new(
            format!("remainder_{}_n{n}_h{h}", self.model.warp.id()),
            &parts.grid.radii(),
            parts.grid.dr(),
            setup.n_theta,
            parts.mu.clone(),
            parts.modes.clone(),
            blocks,
            Some(parts.filter),
        )
    }

    fn parts(&self, h: f64, setup: &ResidualSetup) -> Result<Parts> {
        let grid = self.grid(h, setup);
        let op = assemble_with(&self.model, &grid, self.which, FdOrder::Eighth)?;
        let exact = funcalc_eigen(&op, &self.phi)?;
        let chi: Vec<f64> = grid.radii().iter().map(|&r| setup.window.eval(r)).collect();
        let mu = op.density.clone();
        let filter = resolved_filter(&grid, &mu, setup.resolved_band);
        let windowed = exact
            .blocks
            .iter()
            .map(|b| {
                let mut d = b.clone();
                for j in 0..grid.n_r {
                    d.column_mut(j).scale_mut(chi[j]);
                }
                d
            })
            .collect();
        Ok(Parts { grid, modes: exact.modes, windowed, mu, filter })
    }

    fn difference(&self, h: f64, setup: &ResidualSetup, parts: &Parts, n: usize) -> Result<Vec<DMatrix<Complex64>>> {
        let phi: &dyn SpectralFunction = &self.phi;
        let opts = QuantizeOptions { angular: AngularCutoff::Radial, column: ColumnCutoff::Window(setup.window), momentum_points: momentum_points(&parts.grid, &self.model) };
        let terms: Vec<(Complex64, Source)> =
            self.symbols[..=n].iter().enumerate().map(|(j, a)| (Complex64::new(h.powi(j as i32), 0.0), Source::Func { symbol: a, phi })).collect();
        let q = quantize_unchecked(&self.model, &parts.grid, &terms, &opts)?;
        if q.modes != parts.modes {
            return Err(crate::Error::Consistency("mode lists of the quantization and the eigen route differ".into()));
        }
        Ok((0..q.modes.len()).map(|k| &parts.windowed[k] - q.dense_block(k)).collect())
    }
}

struct Parts {
    grid: GridSpec,
    modes: Vec<i32>,
    windowed: Vec<DMatrix<Complex64>>,
    mu: Vec<f64>,
    filter: DMatrix<f64>,
}

/// Writes a dense real matrix as: u64 rows, u64 cols (little endian), then row-major f64.
pub fn write_dense_f64(path: &std::path::Path, a: &DMatrix<f64>) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&(a.nrows() as u64).to_le_bytes())?;
    f.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            f.write_all(&a[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dense_f64(path: &std::path::Path) -> Result<DMatrix<f64>> {
    let bytes = std::fs::read(path)?;
    let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * k + 8].try_into().unwrap() };
    if bytes.len() < 16 {
        return Err(crate::Error::Domain("dense file shorter than its header".into()));
    }
    let (r, c) = (u64::from_le_bytes(word(0)) as usize, u64::from_le_bytes(word(1)) as usize);
    if bytes.len() != 16 + 8 * r * c {
        return Err(crate::Error::Domain(format!("dense file size does not match {r}x{c}")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| f64::from_le_bytes(word(2 + i * c + j))))
}
