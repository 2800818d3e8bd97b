use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::banded::{Banded, BandedLu};
use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::geometry::{MeasureTag, MetricModel, Which};

/// Radial difference scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdOrder {
    /// Conservative three-point form of w ∂_r (w^{-1} ∂_r).
    Second,
    /// Nine-point central second difference on the conjugated operator, with
    /// odd reflection at the walls.
    Eighth,
}

/// 8th-order central weights for u'' at offsets 0..=4.
const D2_8: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

/// Δ_g or its conjugate on a truncated end, one banded matrix per |m|.
#[derive(Debug, Clone)]
pub struct OperatorRep {
    pub grid: GridSpec,
    pub which: Which,
    pub measure: MeasureTag,
    pub order: FdOrder,
    /// Distinct |m|, matching `delta`.
    pub modes: Vec<i32>,
    /// Δ restricted to e^{imθ}; negative semidefinite.
    pub delta: Vec<Banded<f64>>,
    /// Measure density per radial node (the constant Δr·Δθ is dropped).
    pub density: Vec<f64>,
    pub warp: Vec<f64>,
}

pub fn assemble(model: &MetricModel, grid: &GridSpec, which: Which) -> Result<OperatorRep> {
    assemble_with(model, grid, which, FdOrder::Second)
}

pub fn assemble_with(model: &MetricModel, grid: &GridSpec, which: Which, order: FdOrder) -> Result<OperatorRep> {
    model.validate()?;
    if model.dim != 2 {
        return Err(Error::Unsupported(format!("discretizer needs n = 2, got {}", model.dim)));
    }
    if !model.metric.is_identity() {
        return Err(Error::Unsupported("discretizer supports G = I only".into()));
    }
    grid.validate(model.zeta.epsilon)?;
    let n = grid.n_r;
    let dr = grid.dr();
    let rs = grid.radii();
    let w: Vec<f64> = rs.iter().map(|&r| model.warp.eval(r)).collect();
    if w.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("warp not positive on the grid".into()));
    }
    let sq: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let modes = grid.distinct_modes();
    let mut delta = Vec::with_capacity(modes.len());
    for &m in &modes {
        let m2 = (m * m) as f64;
        // plain operator in the chosen scheme, then conjugated for tilde
        let plain = match order {
            FdOrder::Second => {
                let mut a = Banded::zeros(n, 1, 1);
                for i in 0..n {
                    let wm = model.warp.eval(rs[i] - 0.5 * dr);
                    let wp = model.warp.eval(rs[i] + 0.5 * dr);
                    let c = w[i] / (dr * dr);
                    if i > 0 {
                        a.set(i, i - 1, c / wm);
                    }
                    if i + 1 < n {
                        a.set(i, i + 1, c / wp);
                    }
                    a.set(i, i, -c * (1.0 / wm + 1.0 / wp) - w[i] * w[i] * m2);
                }
                a
            }
            FdOrder::Eighth => {
                let mut t = Banded::zeros(n, 4, 4);
                for i in 0..n {
                    let l0 = model.warp.log_deriv_k(0, rs[i])?;
                    let l1 = model.warp.log_deriv_k(1, rs[i])?;
                    let potential = -0.5 * l1 + 0.25 * l0 * l0;
                    t.set(i, i, t.get(i, i) - w[i] * w[i] * m2 - potential);
                    for (d, c) in D2_8.iter().enumerate() {
                        let v = c / (dr * dr);
                        for j in [i as i64 - d as i64, i as i64 + d as i64] {
                            // odd reflection across the Dirichlet nodes at -1 and n
                            let (col, sign) = if j < -1 {
                                (-2 - j, -1.0)
                            } else if j > n as i64 {
                                (2 * n as i64 - j, -1.0)
                            } else {
                                (j, 1.0)
                            };
                            if col >= 0 && col < n as i64 {
                                let col = col as usize;
                                t.set(i, col, t.get(i, col) + sign * v * if d == 0 { 0.5 } else { 1.0 });
                            }
                        }
                    }
                }
                conjugate(&t, |i| sq[i], |j| 1.0 / sq[j])
            }
        };
        delta.push(match which {
            Which::Plain => plain,
            Which::Tilde => conjugate(&plain, |i| 1.0 / sq[i], |j| sq[j]),
        });
    }
    let measure = match which {
        Which::Plain => MeasureTag::Dg,
        Which::Tilde => MeasureTag::DgTilde,
    };
    let density = rs.iter().map(|&r| measure.density(model, r, &[0.0])).collect();
    Ok(OperatorRep { grid: *grid, which, measure, order, modes, delta, density, warp: w })
}

/// diag(left) · A · diag(right)
fn conjugate(a: &Banded<f64>, left: impl Fn(usize) -> f64, right: impl Fn(usize) -> f64) -> Banded<f64> {
    let mut out = a.clone();
    for i in 0..a.n {
        for j in a.row_range(i) {
            out.set(i, j, left(i) * a.get(i, j) * right(j));
        }
    }
    out
}

impl OperatorRep {
    pub fn n_r(&self) -> usize {
        self.grid.n_r
    }

    pub fn mode_index(&self, m: i32) -> Option<usize> {
        self.modes.iter().position(|&k| k == m.abs())
    }

    /// h²P = -h²Δ on mode index k.
    pub fn positive(&self, k: usize) -> Banded<f64> {
        let h2 = self.grid.h * self.grid.h;
        self.delta[k].map(|v| -h2 * v)
    }

    /// M^{1/2} (h²P) M^{-1/2}, symmetric in the flat inner product.
    pub fn symmetric(&self, k: usize) -> DMatrix<f64> {
        let a = self.positive(k);
        let s: Vec<f64> = self.density.iter().map(|d| d.sqrt()).collect();
        let mut m = DMatrix::zeros(a.n, a.n);
        for i in 0..a.n {
            for j in a.row_range(i) {
                m[(i, j)] = s[i] * a.get(i, j) / s[j];
            }
        }
        // remove rounding asymmetry
        let t = m.transpose();
        (m + t) * 0.5
    }

    /// Largest relative deviation of <Au, v>_μ - <u, Av>_μ over random pairs.
    pub fn self_adjoint_defect(&self, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n_r();
        let mut worst: f64 = 0.0;
        for k in 0..self.modes.len() {
            for _ in 0..pairs {
                let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let au = self.delta[k].matvec(&u);
                let av = self.delta[k].matvec(&v);
                let ip = |x: &[f64], y: &[f64]| x.iter().zip(y).zip(&self.density).map(|((a, b), d)| a * b * d).sum::<f64>();
                let (lhs, rhs) = (ip(&au, &v), ip(&u, &av));
                let scale = ip(&au, &au).sqrt() * ip(&v, &v).sqrt();
                worst = worst.max((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE));
            }
        }
        worst
    }

    /// Smallest eigenvalue of h²P over all modes (after symmetrization).
    pub fn min_eigenvalue(&self) -> f64 {
        (0..self.modes.len())
            .map(|k| self.symmetric(k).symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Gershgorin interval containing the spectrum of h²P on every mode.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..self.modes.len() {
            let s = self.symmetric(k);
            for i in 0..s.nrows() {
                let off: f64 = (0..s.ncols()).filter(|&j| j != i).map(|j| s[(i, j)].abs()).sum();
                lo = lo.min(s[(i, i)] - off);
                hi = hi.max(s[(i, i)] + off);
            }
        }
        (lo, hi)
    }
}

/// Factorization of h²P - z on one mode, reusable across right-hand sides.
pub struct ShiftedSolver {
    lu: BandedLu<Complex64>,
}

impl ShiftedSolver {
    pub fn new(op: &OperatorRep, k: usize, z: Complex64) -> Result<Self> {
        let a = op.positive(k).map(|v| Complex64::new(v, 0.0));
        let shifted = a.scaled_shift(Complex64::new(1.0, 0.0), -z);
        let lu = BandedLu::factor(&shifted).map_err(|e| match e {
            Error::Conditioning { row, pivot, .. } => Error::Conditioning { row, pivot, distance: estimate_distance(op, k, z) },
            other => other,
        })?;
        Ok(Self { lu })
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut x = rhs.to_vec();
        self.lu.solve_in_place(&mut x);
        x
    }

    /// (h²P - z)^{-1} as a dense matrix.
    pub fn inverse(&self, n: usize) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            e[j] = Complex64::new(1.0, 0.0);
            self.lu.solve_in_place(&mut e);
            out.column_mut(j).copy_from_slice(&e);
        }
        out
    }
}

fn estimate_distance(op: &OperatorRep, k: usize, z: Complex64) -> f64 {
    op.symmetric(k).symmetric_eigenvalues().iter().map(|l| (l - z).norm()).fold(f64::INFINITY, f64::min)
}

/// Solves (h²P - z) u = rhs on the mode with |m| = modes[k].
pub fn resolve(op: &OperatorRep, k: usize, z: Complex64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    if rhs.len() != op.n_r() {
        return Err(Error::Domain(format!("rhs length {} != {}", rhs.len(), op.n_r())));
    }
    let u = ShiftedSolver::new(op, k, z)?.solve(rhs);
    let a = op.positive(k);
    let au = a.map(|v| Complex64::new(v, 0.0)).matvec(&u);
    let res: f64 = au.iter().zip(&u).zip(rhs).map(|((x, y), b)| (x - z * y - b).norm_sqr()).sum::<f64>().sqrt();
    let norm: f64 = rhs.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
    if res > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Conditioning { row: 0, pivot: res / norm, distance: estimate_distance(op, k, z) });
    }
    Ok(u)
}
