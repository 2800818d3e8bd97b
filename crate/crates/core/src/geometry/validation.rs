use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::warp::WarpFunction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: String,
    /// Derivative order for the derivative-control checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Worst constant over the whole interval.
    pub constant: f64,
    /// Worst constant over the first half of the interval.
    pub constant_half: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub warp: String,
    pub interval: (f64, f64),
    pub samples: usize,
    pub checks: Vec<ConditionCheck>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn check(&self, condition: &str, k: Option<usize>) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition && c.k == k)
    }
}

pub const RANDOM_SAMPLES: usize = 1000;
/// Highest derivative order checked.
pub const K_CHECK: usize = 4;

/// Samples the three structural warp conditions. A condition passes when the
/// constant found on the whole interval exceeds the one found on its first
/// half by at most a factor 1 + tol, i.e. the bound does not drift with the
/// right endpoint.
pub fn verify_warp_conditions(
    w: &WarpFunction,
    interval: (f64, f64),
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<ValidationReport> {
    let (a, b) = interval;
    if samples < 2 || !(b > a) {
        return Err(Error::Domain("need samples >= 2 and a non-empty interval".into()));
    }
    let mut pts: Vec<f64> = (0..samples).map(|i| a + (b - a) * i as f64 / (samples - 1) as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pts.extend((0..RANDOM_SAMPLES).map(|_| rng.gen_range(a..=b)));
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let vals: Vec<f64> = pts.iter().map(|&r| w.eval(r)).collect();
    for (r, v) in pts.iter().zip(&vals) {
        if !(*v > 0.0) {
            return Err(Error::Domain(format!("w({r}) = {v} is not positive")));
        }
    }
    let mid = 0.5 * (a + b);
    let n_half = pts.partition_point(|&r| r <= mid);

    let mut checks = Vec::new();
    let mut push = |condition: &str, k: Option<usize>, full: f64, half: f64| {
        checks.push(ConditionCheck {
            condition: condition.to_string(),
            k,
            constant: full,
            constant_half: half,
            pass: full.is_finite() && full <= half * (1.0 + tol),
        });
    };

    let sup = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    push("boundedness", None, sup(&vals), sup(&vals[..n_half]));

    // two-sided ratio over pairs within unit distance; pts is sorted so a sliding window suffices
    let ratio_sup = |end: usize| {
        let mut worst: f64 = 1.0;
        for i in 0..end {
            let mut j = i + 1;
            while j < end && pts[j] - pts[i] <= 1.0 + 1e-12 {
                let q = vals[i] / vals[j];
                worst = worst.max(q).max(1.0 / q);
                j += 1;
            }
        }
        worst
    };
    push("slow_variation", None, ratio_sup(pts.len()), ratio_sup(n_half));

    let kmax = w.k_max().min(K_CHECK);
    for k in 1..=kmax {
        let mut ratios = Vec::with_capacity(pts.len());
        for (&r, &v) in pts.iter().zip(&vals) {
            ratios.push(w.deriv(k, r)?.abs() / v);
        }
        push("derivative_control", Some(k), sup(&ratios), sup(&ratios[..n_half]));
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(ValidationReport { warp: w.id().to_string(), interval, samples, checks, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_warp_has_unit_constants() {
        let rep = verify_warp_conditions(&WarpFunction::cylindrical(), (0.0, 50.0), 501, 1e-6, 1).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.check("boundedness", None).unwrap().constant, 1.0);
        assert_eq!(rep.check("slow_variation", None).unwrap().constant, 1.0);
        // the derivative constants are 0 here, below the bound 1
        assert!(rep.check("derivative_control", Some(1)).unwrap().constant <= 1.0);
    }

    #[test]
    fn exponential_warp_constants() {
        let rep = verify_warp_conditions(&WarpFunction::hyperbolic(), (0.0, 50.0), 501, 1e-6, 1).unwrap();
        assert!(rep.pass);
        let sv = rep.check("slow_variation", None).unwrap().constant;
        assert!((sv - std::f64::consts::E).abs() < 1e-9, "{sv}");
        for k in 1..=4 {
            assert!((rep.check("derivative_control", Some(k)).unwrap().constant - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_warp_fails_first_derivative() {
        let w = WarpFunction::from_id("gaussian").unwrap();
        // e^{-r²} underflows near r = 27, so stay inside the representable range
        let rep = verify_warp_conditions(&w, (0.0, 20.0), 201, 1e-6, 1).unwrap();
        assert!(!rep.pass);
        assert!(!rep.check("derivative_control", Some(1)).unwrap().pass);
    }

    #[test]
    fn nonpositive_warp_is_domain_error() {
        let w = WarpFunction::custom("neg", |r: f64| 1.0 - r);
        assert!(matches!(verify_warp_conditions(&w, (0.0, 3.0), 10, 1e-6, 1), Err(Error::Domain(_))));
    }
}
