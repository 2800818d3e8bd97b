use serde::{Deserialize, Serialize};

use super::metric::MetricModel;

/// Volume density carried by a discretized operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureTag {
    /// Riemannian density w^{1-n} (det G)^{1/2} dr dθ.
    Dg,
    /// Rescaled density (det G)^{1/2} dr dθ.
    DgTilde,
}

impl MeasureTag {
    /// Exponent of w(r) in the density.
    pub fn warp_exponent(self, dim: usize) -> f64 {
        match self {
            MeasureTag::Dg => 1.0 - dim as f64,
            MeasureTag::DgTilde => 0.0,
        }
    }

    pub fn density(self, model: &MetricModel, r: f64, theta: &[f64]) -> f64 {
        let det = model.metric.lower(model.dim, r, theta).determinant();
        let w = model.warp.eval(r);
        w.powf(self.warp_exponent(model.dim)) * det.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::warp::WarpFunction;

    #[test]
    fn tilde_ratio_is_warp_power() {
        for warp in [WarpFunction::hyperbolic(), WarpFunction::conical()] {
            let m = MetricModel::new(2, warp.clone());
            for i in 1..50 {
                let r = 0.37 * i as f64;
                let ratio = MeasureTag::DgTilde.density(&m, r, &[0.0]) / MeasureTag::Dg.density(&m, r, &[0.0]);
                let w = warp.eval(r);
                assert!((ratio / w - 1.0).abs() < 1e-14);
            }
        }
    }
}
