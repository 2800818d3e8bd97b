//! Commutator and Sobolev stress tests on the discrete resolvent.
//!
//! Vectors on the full grid are stored mode-major: entry (m, i) is the
//! coefficient of e^{imθ} at radial node i, m = -n_θ/2 .. n_θ/2 - 1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discrete::assemble::{assemble_with, FdOrder, OperatorRep, ShiftedSolver};
use crate::discrete::banded::{Banded, BandedLu};
use crate::discrete::grid::GridSpec;
use crate::error::{Error, Result};
use crate::geometry::{MetricModel, Which, Window};
use crate::norms::{power2, PowerOptions};
use crate::workbench::fit::{fit_slope, SlopeFit};

/// ad_∂^α ad_x^β followed by D^γ on the left. Each multi-index is
/// (radial, angular). ∂ and D are h∂_r, h∂_θ; x is (r, sin θ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommutatorIndex {
    pub alpha: [usize; 2],
    pub beta: [usize; 2],
    pub gamma: [usize; 2],
}

impl CommutatorIndex {
    pub const ZERO: Self = Self { alpha: [0, 0], beta: [0, 0], gamma: [0, 0] };

    pub fn new(alpha: [usize; 2], beta: [usize; 2], gamma: [usize; 2]) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn order(&self) -> usize {
        self.alpha[0] + self.alpha[1] + self.beta[0] + self.beta[1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.order() > 4 {
            return Err(Error::Unsupported(format!("commutator order {} > 4", self.order())));
        }
        if self.gamma[0] > 2 {
            return Err(Error::Unsupported(format!("{} radial derivatives after the commutators; at most 2", self.gamma[0])));
        }
        if self.gamma[1] > self.beta[1] {
            return Err(Error::Unsupported(format!(
                "{} angular derivatives but only {} angular commutators to absorb them",
                self.gamma[1], self.beta[1]
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("a{}{}_b{}{}_g{}{}", self.alpha[0], self.alpha[1], self.beta[0], self.beta[1], self.gamma[0], self.gamma[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Gen {
    DRadial,
    DAngular,
    Radius,
    SinTheta,
}

impl Gen {
    /// X* = sign·X.
    fn adjoint_sign(self) -> f64 {
        match self {
            Gen::DRadial | Gen::DAngular => -1.0,
            Gen::Radius | Gen::SinTheta => 1.0,
        }
    }
}

/// χ (h²P - z)^{-1} χ on the full grid of a tilde representation.
struct Localized<'a> {
    n_r: usize,
    modes: Vec<i32>,
    /// Solver index per entry of `modes`.
    slot: Vec<usize>,
    solvers: Vec<ShiftedSolver>,
    adjoint_solvers: Vec<ShiftedSolver>,
    chi: Vec<f64>,
    radii: Vec<f64>,
    h: f64,
    dr: f64,
    _op: &'a OperatorRep,
}

impl<'a> Localized<'a> {
    fn new(op: &'a OperatorRep, z: Complex64, window: Window) -> Result<Self> {
        let grid = op.grid;
        let half = (grid.n_theta / 2) as i32;
        let modes: Vec<i32> = (-half..half).collect();
        let slot = modes.iter().map(|&m| op.mode_index(m).ok_or_else(|| Error::Consistency(format!("mode {m} missing")))).collect::<Result<Vec<_>>>()?;
        let solvers = (0..op.modes.len()).map(|k| ShiftedSolver::new(op, k, z)).collect::<Result<Vec<_>>>()?;
        let adjoint_solvers = (0..op.modes.len()).map(|k| ShiftedSolver::new(op, k, z.conj())).collect::<Result<Vec<_>>>()?;
        let radii = grid.radii();
        let chi = radii.iter().map(|&r| window.eval(r)).collect();
        Ok(Self { n_r: grid.n_r, modes, slot, solvers, adjoint_solvers, chi, radii, h: grid.h, dr: grid.dr(), _op: op })
    }

    fn len(&self) -> usize {
        self.n_r * self.modes.len()
    }

    fn base(&self, u: &[Complex64], adjoint: bool) -> Vec<Complex64> {
        let n = self.n_r;
        let mut out = Vec::with_capacity(u.len());
        for (b, &k) in self.slot.iter().enumerate() {
            let rhs: Vec<Complex64> = (0..n).map(|i| u[b * n + i] * self.chi[i]).collect();
            let s = if adjoint { &self.adjoint_solvers[k] } else { &self.solvers[k] };
            out.extend(s.solve(&rhs).into_iter().zip(&self.chi).map(|(v, c)| v * c));
        }
        out
    }

    fn gen(&self, g: Gen, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_r;
        let zero = Complex64::new(0.0, 0.0);
        let nm = self.modes.len();
        let mut out = vec![zero; u.len()];
        for b in 0..nm {
            let blk = &u[b * n..(b + 1) * n];
            for i in 0..n {
                out[b * n + i] = match g {
                    Gen::DRadial => {
                        // fourth-order central difference, zero beyond the walls
                        let at = |j: isize| if j >= 0 && (j as usize) < n { blk[j as usize] } else { zero };
                        let j = i as isize;
                        ((at(j + 1) - at(j - 1)) * (2.0 / 3.0) - (at(j + 2) - at(j - 2)) / 12.0) * (self.h / self.dr)
                    }
                    Gen::DAngular => blk[i] * Complex64::new(0.0, self.h * self.modes[b] as f64),
                    Gen::Radius => blk[i] * self.radii[i],
                    Gen::SinTheta => {
                        // sin θ e^{imθ} = (e^{i(m+1)θ} - e^{i(m-1)θ})/2i
                        let below = if b > 0 { u[(b - 1) * n + i] } else { zero };
                        let above = if b + 1 < nm { u[(b + 1) * n + i] } else { zero };
                        (below - above) / Complex64::new(0.0, 2.0)
                    }
                };
            }
        }
        out
    }

    /// ad_{g_0} ad_{g_1} … (B) u, or its adjoint.
    fn nested(&self, gens: &[Gen], u: &[Complex64], adjoint: bool) -> Vec<Complex64> {
        let Some((&g, rest)) = gens.split_first() else {
            return self.base(u, adjoint);
        };
        let a = self.gen(g, &self.nested(rest, u, adjoint));
        let b = self.nested(rest, &self.gen(g, u), adjoint);
        // (ad_X C)* = -s ad_X(C*) for X* = sX
        let s = if adjoint { -g.adjoint_sign() } else { 1.0 };
        a.iter().zip(&b).map(|(x, y)| (x - y) * s).collect()
    }
}

fn generators(index: &CommutatorIndex) -> (Vec<Gen>, Vec<Gen>) {
    let mut ad = Vec::new();
    ad.extend(std::iter::repeat(Gen::DRadial).take(index.alpha[0]));
    ad.extend(std::iter::repeat(Gen::DAngular).take(index.alpha[1]));
    ad.extend(std::iter::repeat(Gen::Radius).take(index.beta[0]));
    ad.extend(std::iter::repeat(Gen::SinTheta).take(index.beta[1]));
    let mut d = Vec::new();
    d.extend(std::iter::repeat(Gen::DRadial).take(index.gamma[0]));
    d.extend(std::iter::repeat(Gen::DAngular).take(index.gamma[1]));
    (ad, d)
}

/// h^{-|α|-|β|}‖D^γ ad_∂^α ad_x^β(χ(h²P - z)^{-1}χ)‖ on L²(dr dθ).
/// Returns (norm, converged).
pub fn commutator_norm(op: &OperatorRep, z: Complex64, window: Window, index: &CommutatorIndex) -> Result<(f64, bool)> {
    index.validate()?;
    if op.which != Which::Tilde {
        return Err(Error::Unsupported("commutator stress runs on the conjugated Laplacian".into()));
    }
    if z.im == 0.0 {
        return Err(Error::Domain("z must be non-real".into()));
    }
    let loc = Localized::new(op, z, window)?;
    let (ad, d) = generators(index);
    let apply = |u: &[Complex64]| {
        let mut v = loc.nested(&ad, u, false);
        for &g in d.iter().rev() {
            v = loc.gen(g, &v);
        }
        v
    };
    let adjoint = |u: &[Complex64]| {
        let mut v = u.to_vec();
        for &g in &d {
            v = loc.gen(g, &v);
            v.iter_mut().for_each(|x| *x *= g.adjoint_sign());
        }
        loc.nested(&ad, &v, true)
    };
    let ones = vec![1.0; loc.len()];
    let opts = PowerOptions { rtol: 1e-7, max_iter: 6000, ..Default::default() };
    let (est, _, ok) = power2(loc.len(), apply, adjoint, &ones, &opts);
    Ok((est / op.grid.h.powi(index.order() as i32), ok))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorRow {
    pub n_r: usize,
    pub norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorTable {
    pub index: CommutatorIndex,
    pub rows: Vec<CommutatorRow>,
    /// max/min - 1 over the refinements; 0 when every norm vanishes.
    pub variation: f64,
    pub uniformly_bounded: bool,
}

/// Where the commutator stress runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StressSetup {
    pub r0: f64,
    pub r1: f64,
    pub n_theta: usize,
    pub h: f64,
    pub window: Window,
    pub order: FdOrder,
}

impl Default for StressSetup {
    fn default() -> Self {
        Self { r0: 1.0, r1: 6.0, n_theta: 16, h: 0.2, window: Window { rise_start: 2.0, fall_end: 5.0 }, order: FdOrder::Eighth }
    }
}

pub fn commutator_stress(model: &MetricModel, setup: &StressSetup, z: Complex64, index: &CommutatorIndex, refinements: &[usize]) -> Result<CommutatorTable> {
    index.validate()?;
    let mut rows = Vec::with_capacity(refinements.len());
    for &n_r in refinements {
        let grid = GridSpec::new(setup.r0, setup.r1, n_r, setup.n_theta, setup.h);
        let op = assemble_with(model, &grid, Which::Tilde, setup.order)?;
        let (norm, converged) = commutator_norm(&op, z, setup.window, index)?;
        rows.push(CommutatorRow { n_r, norm, converged });
    }
    let hi = rows.iter().map(|r| r.norm).fold(0.0, f64::max);
    let lo = rows.iter().map(|r| r.norm).fold(f64::INFINITY, f64::min);
    let variation = if hi <= 1e-13 { 0.0 } else if lo > 0.0 { hi / lo - 1.0 } else { f64::INFINITY };
    Ok(CommutatorTable { index: *index, rows, variation, uniformly_bounded: variation < 0.1 })
}

/// Radial part of h²P - z on an arbitrary angular mode m.
fn mode_operator(op: &OperatorRep, m: i64, z: Complex64) -> Result<Banded<Complex64>> {
    let k0 = op.mode_index(0).ok_or_else(|| Error::Consistency("mode 0 missing".into()))?;
    let h2 = op.grid.h * op.grid.h;
    let mut a = op.positive(k0).map(|v| Complex64::new(v, 0.0));
    let m2 = (m * m) as f64;
    for i in 0..a.n {
        let v = a.get(i, i) + h2 * m2 * op.warp[i] * op.warp[i] - z;
        a.set(i, i, v);
    }
    Ok(a)
}

/// Sampling of ‖(h²P - z)^{-k}‖_{L²→L∞}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SobolevSetup {
    pub r0: f64,
    pub r1: f64,
    pub steps_per_h: f64,
    /// Rows whose L² norms enter the supremum.
    pub sample: (f64, f64),
    pub samples: usize,
    /// Modes with h·w·|m| above this are dropped from the angular sum.
    pub mode_cap: f64,
    pub order: FdOrder,
}

impl Default for SobolevSetup {
    fn default() -> Self {
        Self { r0: 1.0, r1: 5.0, steps_per_h: 4.0, sample: (2.5, 3.5), samples: 5, mode_cap: 8.0, order: FdOrder::Eighth }
    }
}

/// sup over sample rows of w(r)^{1/2}·‖K(x, ·)‖_{L²} for the kernel K of
/// (h²P - z)^{-k} on the full (r, θ) end. The angular sum runs over every
/// |m| ≤ mode_cap/(h·w_min), not only the modes of the grid.
/// Returns (bound, number of modes summed).
pub fn resolvent_l2_linf(op: &OperatorRep, k: u32, z: Complex64, setup: &SobolevSetup) -> Result<(f64, usize)> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let grid = op.grid;
    let (rows, w_min) = sample_rows(&grid, &op.warp, setup);
    let m_max = (setup.mode_cap / (grid.h * w_min)).ceil() as i64;
    let mu = &op.density;
    let dr = grid.dr();
    let mut acc = vec![0.0; rows.len()];
    for m in 0..=m_max {
        let lu = BandedLu::factor(&mode_operator(op, m, z)?)?;
        let mult = if m == 0 { 1.0 } else { 2.0 };
        for (s, &i) in rows.iter().enumerate() {
            let mut x = vec![Complex64::new(0.0, 0.0); grid.n_r];
            x[i] = Complex64::new(1.0, 0.0);
            for _ in 0..k {
                lu.solve_in_place(&mut x);
            }
            // row i of the matrix is μ_j/μ_i times column i; the kernel divides by Δr·μ_j
            let row: f64 = x.iter().zip(mu).map(|(v, &mj)| (v.norm() * mj / mu[i]).powi(2) / (dr * mj)).sum();
            acc[s] += mult * row / (2.0 * std::f64::consts::PI);
        }
    }
    let bound = rows.iter().zip(&acc).map(|(&i, a)| op.warp[i].sqrt() * a.sqrt()).fold(0.0, f64::max);
    Ok((bound, (2 * m_max + 1) as usize))
}

fn sample_rows(grid: &GridSpec, warp: &[f64], setup: &SobolevSetup) -> (Vec<usize>, f64) {
    let radii = grid.radii();
    let mut rows: Vec<usize> = (0..setup.samples.max(1))
        .map(|s| {
            let t = if setup.samples > 1 { s as f64 / (setup.samples - 1) as f64 } else { 0.5 };
            let r = setup.sample.0 + t * (setup.sample.1 - setup.sample.0);
            radii.iter().enumerate().min_by(|a, b| (a.1 - r).abs().total_cmp(&(b.1 - r).abs())).map(|(i, _)| i).unwrap_or(0)
        })
        .collect();
    rows.dedup();
    let w_min = radii
        .iter()
        .zip(warp)
        .filter(|(r, _)| **r >= setup.sample.0 - 1.0 && **r <= setup.sample.1 + 1.0)
        .map(|(_, &w)| w)
        .fold(f64::INFINITY, f64::min);
    let w_min = if w_min.is_finite() { w_min } else { warp.iter().cloned().fold(f64::INFINITY, f64::min) };
    (rows, w_min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevPoint {
    pub h: f64,
    pub value: f64,
    pub modes: usize,
    pub n_r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevReport {
    pub k: u32,
    pub z: Complex64,
    pub points: Vec<SobolevPoint>,
    pub fit: SlopeFit,
    /// (t, value) at z = i·t and the first h of the list.
    pub z_sweep: Vec<(f64, f64)>,
    pub z_sweep_decreasing: bool,
}

pub fn sobolev_scaling(
    model: &MetricModel,
    which: Which,
    k: u32,
    h_list: &[f64],
    z: Complex64,
    t_list: &[f64],
    setup: &SobolevSetup,
) -> Result<SobolevReport> {
    let n = model.dim as f64;
    if !(k as f64 > n / 4.0) {
        return Err(Error::Domain(format!("k = {k} must exceed n/4 = {}", n / 4.0)));
    }
    let op_at = |h: f64| {
        let grid = GridSpec::with_step(setup.r0, setup.r1, h / setup.steps_per_h, 2, h);
        assemble_with(model, &grid, which, setup.order)
    };
    let mut points = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let op = op_at(h)?;
        let (value, modes) = resolvent_l2_linf(&op, k, z, setup)?;
        points.push(SobolevPoint { h, value, modes, n_r: op.grid.n_r });
    }
    let fit = fit_slope(&points.iter().map(|p| (p.h, p.value)).collect::<Vec<_>>())?;
    let mut z_sweep = Vec::with_capacity(t_list.len());
    if let Some(&h0) = h_list.first() {
        let op = op_at(h0)?;
        for &t in t_list {
            z_sweep.push((t, resolvent_l2_linf(&op, k, Complex64::new(0.0, t), setup)?.0));
        }
    }
    let mut sorted = z_sweep.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let z_sweep_decreasing = sorted.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(SobolevReport { k, z, points, fit, z_sweep, z_sweep_decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WarpFunction;
    use crate::norms::{l2_linf_bound, KernelOnMeasure};
    use nalgebra::DMatrix;

    fn i() -> Complex64 {
        Complex64::new(0.0, 1.0)
    }

    #[test]
    fn index_validation() {
        assert!(CommutatorIndex::new([1, 0], [1, 0], [2, 0]).validate().is_ok());
        assert!(CommutatorIndex::new([3, 0], [2, 0], [0, 0]).validate().is_err());
        assert!(CommutatorIndex::new([0, 0], [1, 0], [3, 0]).validate().is_err());
        assert!(CommutatorIndex::new([0, 0], [1, 0], [0, 1]).validate().is_err());
        assert!(CommutatorIndex::new([0, 0], [0, 1], [0, 1]).validate().is_ok());
    }

    #[test]
    fn angular_derivative_commutes_on_rotation_invariant_ends() {
        for warp in [WarpFunction::cylindrical(), WarpFunction::hyperbolic()] {
            let m = MetricModel::new(2, warp);
            let grid = GridSpec::new(1.0, 6.0, 60, 8, 0.3);
            let op = assemble_with(&m, &grid, Which::Tilde, FdOrder::Second).unwrap();
            let w = Window { rise_start: 2.0, fall_end: 5.0 };
            let (v, _) = commutator_norm(&op, i(), w, &CommutatorIndex::new([0, 1], [0, 0], [0, 0])).unwrap();
            assert_eq!(v, 0.0);
            let (b, ok) = commutator_norm(&op, i(), w, &CommutatorIndex::ZERO).unwrap();
            // ‖χRχ‖ ≤ ‖R‖ ≤ 1/|Im z|
            assert!(ok && b > 0.0 && b <= 1.0 + 1e-9, "{b}");
        }
    }

    #[test]
    fn adjoint_of_nested_commutator_is_consistent() {
        let m = MetricModel::new(2, WarpFunction::hyperbolic());
        let grid = GridSpec::new(1.0, 6.0, 50, 4, 0.3);
        let op = assemble_with(&m, &grid, Which::Tilde, FdOrder::Second).unwrap();
        let loc = Localized::new(&op, Complex64::new(0.3, 1.0), Window { rise_start: 2.0, fall_end: 5.0 }).unwrap();
        let gens = [Gen::DRadial, Gen::SinTheta, Gen::Radius];
        let n = loc.len();
        let u: Vec<Complex64> = (0..n).map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let v: Vec<Complex64> = (0..n).map(|k| Complex64::new((k as f64 * 0.23).cos(), (k as f64 * 0.71).sin())).collect();
        let ip = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>();
        let lhs = ip(&loc.nested(&gens, &u, false), &v);
        let rhs = ip(&u, &loc.nested(&gens, &v, true));
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0), "{lhs} {rhs}");
    }

    #[test]
    fn mode_operator_matches_assembled_modes() {
        let m = MetricModel::new(2, WarpFunction::hyperbolic());
        let grid = GridSpec::new(1.0, 4.0, 40, 8, 0.2);
        let op = assemble_with(&m, &grid, Which::Tilde, FdOrder::Eighth).unwrap();
        for (k, &mm) in op.modes.iter().enumerate() {
            let a = mode_operator(&op, mm as i64, Complex64::new(0.0, 0.0)).unwrap();
            let b = op.positive(k);
            for r in 0..a.n {
                for c in a.row_range(r) {
                    assert!((a.get(r, c).re - b.get(r, c)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn l2_linf_matches_kernel_route() {
        // same quantity through an explicit kernel on (mode, node) columns
        let m = MetricModel::new(2, WarpFunction::hyperbolic());
        let grid = GridSpec::new(1.0, 3.0, 30, 2, 0.5);
        let op = assemble_with(&m, &grid, Which::Plain, FdOrder::Second).unwrap();
        let setup = SobolevSetup { sample: (1.8, 2.2), samples: 3, mode_cap: 3.0, ..Default::default() };
        let z = i();
        let (direct, modes) = resolvent_l2_linf(&op, 1, z, &setup).unwrap();
        let (rows, _) = sample_rows(&grid, &op.warp, &setup);
        let m_max = (modes as i64 - 1) / 2;
        let n = grid.n_r;
        let dr = grid.dr();
        let mut ys = Vec::new();
        let mut nu = Vec::new();
        let mut cols: Vec<DMatrix<Complex64>> = Vec::new();
        for mm in -m_max..=m_max {
            let a = mode_operator(&op, mm, z).unwrap().to_dense();
            let inv = a.try_inverse().unwrap();
            cols.push(inv);
            for j in 0..n {
                ys.push(j as f64);
                nu.push(op.density[j] * dr / (2.0 * std::f64::consts::PI));
            }
        }
        let values = DMatrix::from_fn(rows.len(), ys.len(), |s, c| {
            let (b, j) = (c / n, c % n);
            cols[b][(rows[s], j)] / (dr * op.density[j])
        });
        let xs: Vec<f64> = rows.iter().map(|&r| grid.r(r)).collect();
        let kern = KernelOnMeasure::new("rows", xs.clone(), vec![1.0; xs.len()], ys, nu, values).unwrap();
        let via_kernel = l2_linf_bound(&kern, |r| m.warp.eval(r).sqrt());
        assert!((direct - via_kernel).abs() < 1e-10 * via_kernel, "{direct} {via_kernel}");
    }

    #[test]
    fn sobolev_decreases_along_imaginary_axis() {
        let m = MetricModel::new(2, WarpFunction::cylindrical());
        let setup = SobolevSetup { r0: 1.0, r1: 4.0, ..Default::default() };
        let rep = sobolev_scaling(&m, Which::Tilde, 1, &[0.2, 0.15, 0.1, 0.07], i(), &[0.5, 1.0, 2.0, 4.0], &setup).unwrap();
        assert!(rep.z_sweep_decreasing, "{:?}", rep.z_sweep);
        assert!(rep.fit.slope >= -1.2, "{:?}", rep.fit);
        assert!(sobolev_scaling(&m, Which::Tilde, 0, &[0.2], i(), &[], &setup).is_err());
    }
}
