use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightKind {
    One,
    /// (1 + r²)^{power/2}
    Poly { power: f64 },
    /// e^{rate·r}
    Exp { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperateWeight {
    pub id: String,
    #[serde(flatten)]
    pub kind: WeightKind,
    /// Claimed (C, M), if any.
    #[serde(default)]
    pub claimed: Option<(f64, f64)>,
}

impl TemperateWeight {
    pub fn new(id: impl Into<String>, kind: WeightKind) -> Self {
        Self { id: id.into(), kind, claimed: None }
    }

    pub fn one() -> Self {
        Self::new("one", WeightKind::One)
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self.kind {
            WeightKind::One => 1.0,
            WeightKind::Poly { power } => (1.0 + r * r).powf(0.5 * power),
            WeightKind::Exp { rate } => (rate * r).exp(),
        }
    }

    /// Checks the claimed constants on all sample pairs. Returns the worst
    /// violation ratio (<= 1 means the claim holds).
    pub fn check_claimed(&self, interval: (f64, f64), samples: usize) -> Option<f64> {
        let (c, m) = self.claimed?;
        let pts = grid(interval, samples);
        let mut worst: f64 = 0.0;
        for &r in &pts {
            for &r2 in &pts {
                let lhs = self.eval(r2);
                let rhs = c * self.eval(r) * (1.0 + (r - r2).abs()).powf(m);
                worst = worst.max(lhs / rhs);
            }
        }
        Some(worst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TemperateFit {
    Fitted { c: f64, m: f64 },
    /// The fitted M drifts with the interval; the pair maximizes W(r')/W(r)(1+|r-r'|)^{-M} at the half-interval M.
    Failed { witness: (f64, f64), ratio: f64 },
}

const M_STEP: f64 = 0.125;
const M_MAX: f64 = 16.0;
const STABLE_TOL: f64 = 0.01;

fn grid(interval: (f64, f64), samples: usize) -> Vec<f64> {
    let (a, b) = interval;
    (0..samples).map(|i| a + (b - a) * i as f64 / (samples - 1) as f64).collect()
}

fn sup_ratio(w: &TemperateWeight, pts: &[f64], m: f64) -> (f64, (f64, f64)) {
    let mut best = (0.0, (pts[0], pts[0]));
    for &r in pts {
        let wr = w.eval(r);
        for &r2 in pts {
            let v = w.eval(r2) / wr / (1.0 + (r - r2).abs()).powf(m);
            if v > best.0 {
                best = (v, (r, r2));
            }
        }
    }
    best
}

/// Smallest M on the 1/8 grid for which the sup over `outer` does not exceed
/// the sup over `inner` (relative tolerance 1%).
fn stable_m(w: &TemperateWeight, outer: &[f64], inner: &[f64]) -> Option<(f64, f64)> {
    let mut m = 0.0;
    while m <= M_MAX + 1e-12 {
        let (c_outer, _) = sup_ratio(w, outer, m);
        let (c_inner, _) = sup_ratio(w, inner, m);
        if c_outer <= c_inner * (1.0 + STABLE_TOL) {
            return Some((c_outer, m));
        }
        m += M_STEP;
    }
    None
}

/// Fits (C, M) in W(r') <= C W(r) (1+|r-r'|)^M on a sample interval.
///
/// M is taken stable when the sup on the interval matches the sup on its first
/// half. The same fit is repeated on half versus quarter: a polynomial weight
/// gives the same M, while super-polynomial growth needs an M that keeps
/// increasing with the interval and is reported as a failure.
pub fn verify_temperate(w: &TemperateWeight, interval: (f64, f64), samples: usize) -> Result<TemperateFit> {
    if samples < 8 {
        return Err(Error::Domain("need at least 8 samples".into()));
    }
    let full = grid(interval, samples);
    for &r in &full {
        if !(w.eval(r) > 0.0) {
            return Err(Error::Domain(format!("weight not positive at r={r}")));
        }
    }
    let (a, b) = interval;
    let half = grid((a, a + 0.5 * (b - a)), samples / 2 + 1);
    let quarter = grid((a, a + 0.25 * (b - a)), samples / 4 + 1);
    let m1 = stable_m(w, &full, &half);
    let m2 = stable_m(w, &half, &quarter);
    match (m1, m2) {
        (Some((c, m1)), Some((_, m2))) if m1 <= m2 + M_STEP + 1e-12 => Ok(TemperateFit::Fitted { c, m: m1 }),
        (_, m2) => {
            let m = m2.map_or(M_MAX, |(_, m)| m);
            let (ratio, witness) = sup_ratio(w, &full, m);
            Ok(TemperateFit::Failed { witness, ratio })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_weight_is_temperate_with_m2() {
        let w = TemperateWeight::new("poly2", WeightKind::Poly { power: 2.0 });
        match verify_temperate(&w, (0.0, 50.0), 201).unwrap() {
            TemperateFit::Fitted { c, m } => {
                assert_eq!(m, 2.0);
                assert!(c.is_finite() && c >= 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_weight() {
        let fit = verify_temperate(&TemperateWeight::one(), (0.0, 50.0), 101).unwrap();
        assert_eq!(fit, TemperateFit::Fitted { c: 1.0, m: 0.0 });
    }

    #[test]
    fn exponential_weight_fails_with_far_witness() {
        let w = TemperateWeight::new("exp", WeightKind::Exp { rate: 1.0 });
        match verify_temperate(&w, (0.0, 50.0), 101).unwrap() {
            TemperateFit::Failed { witness, .. } => assert!((witness.1 - witness.0) > 25.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn claimed_constants_checked() {
        let mut w = TemperateWeight::new("poly2", WeightKind::Poly { power: 2.0 });
        w.claimed = Some((1.0, 2.0));
        assert!(w.check_claimed((0.0, 50.0), 101).unwrap() <= 1.0 + 1e-12);
        w.claimed = Some((1.0, 1.0));
        assert!(w.check_claimed((0.0, 50.0), 101).unwrap() > 1.0);
    }
}
