//! The resolvent (-Δ - 1 + ε²)^{-1} on three-dimensional hyperbolic space and
//! the growth of L^p lower bounds for its kernel on truncated ends.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::hyperbolic_distance;

/// Kernel of (-Δ - 1 + ε²)^{-1} on H³ against the volume element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicKernel {
    pub epsilon: f64,
}

impl HyperbolicKernel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("ε = {epsilon} must be positive")));
        }
        Ok(Self { epsilon })
    }

    /// e^{-εd}/(4π sinh d); infinite on the diagonal.
    pub fn at_distance(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return f64::INFINITY;
        }
        (-self.epsilon * d).exp() / (4.0 * PI * d.sinh())
    }

    pub fn value(&self, r: f64, omega: &[f64], r2: f64, omega2: &[f64]) -> Result<f64> {
        Ok(self.at_distance(hyperbolic_distance(r, omega, r2, omega2)?))
    }

    /// The kernel against dr dω after conjugating L^p(H³) onto L^p(dr dω):
    /// (sinh r)^{2/p} K (sinh r')^{2 - 2/p}.
    pub fn flattened(&self, p: f64, r: f64, omega: &[f64], r2: f64, omega2: &[f64]) -> Result<f64> {
        Ok(r.sinh().powf(2.0 / p) * self.value(r, omega, r2, omega2)? * r2.sinh().powf(2.0 - 2.0 / p))
    }
}

/// ‖e^{a r}‖_{L^q[1, T]} in closed form.
pub fn exp_lq_norm(a: f64, q: f64, t: f64) -> f64 {
    let s = a * q;
    let integral = if s.abs() < 1e-12 {
        t - 1.0
    } else {
        // (e^{sT} - e^{s})/s, written to stay finite for large sT
        (s * t).exp() * (-(-s * (t - 1.0)).exp_m1()) / s
    };
    integral.powf(1.0 / q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneRow {
    pub t: f64,
    /// ‖u‖_{L^p[1,T]}·‖v‖_{L^{p'}[1,T]} for the dominated rank-one kernel.
    pub rank_one: f64,
    /// The same after conjugation onto the rescaled measure.
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneTable {
    pub p: f64,
    pub epsilon: f64,
    /// Exponents of u(r) = e^{a r} and v(r') = e^{b r'}.
    pub exponents: (f64, f64),
    pub rows: Vec<RankOneRow>,
    /// Least-squares slope of log(rank_one) against T over the upper half of the T list.
    pub fitted_rate: f64,
    /// max(a, b, 0): the closed-form growth rate.
    pub expected_rate: f64,
    /// Constant c with flattened kernel ≥ c·u(r)v(r') for r, r' ≥ 1.
    pub domination_constant: f64,
    /// min over the sample grid of flattened/(c·u·v); ≥ 1 when domination holds.
    pub domination_margin: f64,
    /// None exactly at the threshold ε = |1 - 2/p|.
    pub expect_unbounded: Option<bool>,
}

/// Least-squares slope of ys against xs.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn rank_one_growth(p: f64, epsilon: f64, t_list: &[f64]) -> Result<RankOneTable> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("p = {p} outside (1, ∞)")));
    }
    let kernel = HyperbolicKernel::new(epsilon)?;
    if t_list.len() < 2 || t_list.iter().any(|&t| !(t > 1.0)) {
        return Err(Error::Domain("need at least two truncations T > 1".into()));
    }
    let pp = p / (p - 1.0);
    let a = 2.0 / p - 1.0 - epsilon;
    let b = 1.0 - 2.0 / p - epsilon;
    // w = e^{-r}, n = 3: conjugation by w^{2(1/p - 1/2)} shifts both exponents to -ε
    let shift = 2.0 / p - 1.0;
    let (aw, bw) = (a - shift, b + shift);
    let rows: Vec<RankOneRow> = t_list
        .iter()
        .map(|&t| RankOneRow {
            t,
            rank_one: exp_lq_norm(a, p, t) * exp_lq_norm(b, pp, t),
            weighted: exp_lq_norm(aw, p, t) * exp_lq_norm(bw, pp, t),
        })
        .collect();
    let mut sorted: Vec<&RankOneRow> = rows.iter().collect();
    sorted.sort_by(|x, y| x.t.total_cmp(&y.t));
    let upper = &sorted[sorted.len() / 2..];
    let upper = if upper.len() < 2 { &sorted[sorted.len() - 2..] } else { upper };
    let fitted_rate = ls_slope(&upper.iter().map(|r| r.t).collect::<Vec<_>>(), &upper.iter().map(|r| r.rank_one.ln()).collect::<Vec<_>>());

    // sinh r ≥ c₀ e^r for r ≥ 1 and sinh d ≤ e^{r+r'}/2
    let c0 = (1.0 - (-2.0f64).exp()) / 2.0;
    let domination_constant = c0 * c0 / (2.0 * PI);
    let domination_margin = domination_margin(&kernel, p, (a, b), domination_constant, 6.0)?;
    let threshold = (1.0 - 2.0 / p).abs();
    let expect_unbounded = if (epsilon - threshold).abs() < 1e-12 { None } else { Some(epsilon < threshold) };
    Ok(RankOneTable {
        p,
        epsilon,
        exponents: (a, b),
        rows,
        fitted_rate,
        expected_rate: a.max(b).max(0.0),
        domination_constant,
        domination_margin,
        expect_unbounded,
    })
}

/// Entrywise check of the flattened kernel against the rank-one minorant on r, r' ∈ [1, r_max].
fn domination_margin(kernel: &HyperbolicKernel, p: f64, (a, b): (f64, f64), c: f64, r_max: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut unit = || {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let s = (1.0 - z * z).sqrt();
        [s * phi.cos(), s * phi.sin(), z]
    };
    let radii: Vec<f64> = (0..=12).map(|i| 1.0 + (r_max - 1.0) * i as f64 / 12.0).collect();
    let mut worst = f64::INFINITY;
    for &r in &radii {
        for &r2 in &radii {
            for _ in 0..4 {
                let (o1, o2) = (unit(), unit());
                let k2 = kernel.flattened(p, r, &o1, r2, &o2)?;
                if !k2.is_finite() {
                    continue;
                }
                worst = worst.min(k2 / (c * (a * r + b * r2).exp()));
            }
        }
    }
    Ok(worst)
}
