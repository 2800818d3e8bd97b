//! Smooth cutoffs built from the bump e^{-1/(1-t²)}.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::quad::{gauss_legendre, mapped};

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

fn bump_deriv(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - t * t;
        bump(t) * (-2.0 * t / (d * d))
    }
}

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
    /// Unnormalized primitive at KNOTS equispaced points of [-1, 0].
    table: Vec<f64>,
}

const KNOTS: usize = 1024;

const PANELS: usize = 8;

impl Rule {
    /// One 8-point panel; only used on intervals no wider than a table step.
    fn short(&self, a: f64, b: f64) -> f64 {
        static SHORT: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
        let (x, w) = SHORT.get_or_init(|| gauss_legendre(8));
        mapped(x, w, a, b).map(|(t, w)| w * bump(t)).sum()
    }

    /// Composite rule; a single high-order panel loses digits to the flat endpoint.
    fn integral(&self, a: f64, b: f64) -> f64 {
        let step = (b - a) / PANELS as f64;
        (0..PANELS)
            .map(|i| {
                let lo = a + step * i as f64;
                mapped(&self.nodes, &self.weights, lo, lo + step).map(|(t, w)| w * bump(t)).sum::<f64>()
            })
            .sum()
    }
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let (nodes, weights) = gauss_legendre(32);
        let mut r = Rule { nodes, weights, total: 1.0, table: vec![] };
        r.total = r.integral(-1.0, 1.0);
        let step = 1.0 / KNOTS as f64;
        let mut acc = 0.0;
        r.table.push(0.0);
        for k in 0..KNOTS {
            let lo = -1.0 + step * k as f64;
            acc += r.short(lo, lo + step);
            r.table.push(acc);
        }
        r
    })
}

/// Smooth step: 0 for s <= 0, 1 for s >= 1, the normalized primitive of the bump in between.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    if s > 0.5 {
        return 1.0 - smooth_step(1.0 - s);
    }
    let r = rule();
    let t = 2.0 * s - 1.0;
    let pos = (t + 1.0) * KNOTS as f64;
    let k = (pos.floor() as usize).min(KNOTS - 1);
    let knot = -1.0 + k as f64 / KNOTS as f64;
    (r.table[k] + r.short(knot, t)) / r.total
}

pub fn smooth_step_d1(s: f64) -> f64 {
    2.0 * bump(2.0 * s - 1.0) / rule().total
}

pub fn smooth_step_d2(s: f64) -> f64 {
    4.0 * bump_deriv(2.0 * s - 1.0) / rule().total
}

/// Near-diagonal cutoff ζ: 1 for |x| <= ε, 0 for |x| >= 2ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalCutoff {
    pub epsilon: f64,
}

impl Default for DiagonalCutoff {
    fn default() -> Self {
        Self { epsilon: 0.5 }
    }
}

impl DiagonalCutoff {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon }
    }

    /// ζ at a point of R^n given by its coordinates.
    pub fn eval_vec(&self, x: &[f64]) -> f64 {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.eval(norm)
    }

    /// ζ as a function of a signed scalar offset.
    pub fn eval(&self, x: f64) -> f64 {
        smooth_step((2.0 * self.epsilon - x.abs()) / self.epsilon)
    }

    pub fn d1(&self, x: f64) -> f64 {
        let s = (2.0 * self.epsilon - x.abs()) / self.epsilon;
        -x.signum() * smooth_step_d1(s) / self.epsilon
    }

    pub fn d2(&self, x: f64) -> f64 {
        let s = (2.0 * self.epsilon - x.abs()) / self.epsilon;
        smooth_step_d2(s) / (self.epsilon * self.epsilon)
    }

    pub fn support_radius(&self) -> f64 {
        2.0 * self.epsilon
    }
}

/// End cutoff ϱ: 0 below R', 1 above R'+1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndCutoff {
    pub r_prime: f64,
}

impl EndCutoff {
    pub fn eval(&self, r: f64) -> f64 {
        smooth_step(r - self.r_prime)
    }
}

/// Localizing window used on a truncated end: the end cutoff ϱ times a
/// falling step that ends at `r_cut`, so the support stays away from the
/// outer Dirichlet wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub rise_start: f64,
    pub fall_end: f64,
}

impl Window {
    pub fn eval(&self, r: f64) -> f64 {
        smooth_step(r - self.rise_start) * smooth_step(self.fall_end - r)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.rise_start, self.fall_end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_is_monotone_and_symmetric() {
        let mut prev = 0.0;
        for i in 0..=100 {
            let s = i as f64 / 100.0;
            let v = smooth_step(s);
            assert!(v >= prev - 1e-15);
            assert!((v + smooth_step(1.0 - s) - 1.0).abs() < 1e-13);
            prev = v;
        }
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
    }

    #[test]
    fn step_derivative_matches_difference_quotient() {
        for &s in &[0.2, 0.4, 0.5, 0.77] {
            let h = 1e-6;
            let fd = (smooth_step(s + h) - smooth_step(s - h)) / (2.0 * h);
            assert!((fd - smooth_step_d1(s)).abs() < 1e-7);
            let fd2 = (smooth_step_d1(s + h) - smooth_step_d1(s - h)) / (2.0 * h);
            assert!((fd2 - smooth_step_d2(s)).abs() < 1e-5);
        }
    }

    #[test]
    fn tabulated_step_matches_direct_integral() {
        let r = rule();
        for i in 1..50 {
            let s = 0.01 * i as f64;
            let direct = r.integral(-1.0, 2.0 * s - 1.0) / r.total;
            assert!((smooth_step(s) - direct).abs() < 1e-14, "{s}");
        }
    }

    #[test]
    fn zeta_support() {
        let z = DiagonalCutoff::default();
        assert_eq!(z.eval(0.0), 1.0);
        assert_eq!(z.eval(0.5), 1.0);
        assert_eq!(z.eval(-0.5), 1.0);
        assert_eq!(z.eval(1.0), 0.0);
        assert_eq!(z.eval(1.3), 0.0);
        assert!(z.eval(0.75) > 0.0 && z.eval(0.75) < 1.0);
        assert_eq!(z.eval_vec(&[0.3, 0.3]), 1.0);
    }
}
