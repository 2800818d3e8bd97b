use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::cutoff::{DiagonalCutoff, EndCutoff};
use super::warp::{five_point, WarpFunction};
use crate::error::{Error, Result};

type MatrixFn = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;

/// The coefficient matrix G_{jk}(r, θ) of the end metric, index 0 being the radial direction.
#[derive(Clone)]
pub enum MetricTensor {
    Identity,
    Custom { id: String, lower: MatrixFn },
}

impl fmt::Debug for MetricTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricTensor::Identity => write!(f, "Identity"),
            MetricTensor::Custom { id, .. } => write!(f, "Custom({id})"),
        }
    }
}

/// Which scalar function of G to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricComponent {
    Lower(usize, usize),
    Upper(usize, usize),
    Det,
}

impl MetricTensor {
    pub fn custom(id: impl Into<String>, f: impl Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        MetricTensor::Custom { id: id.into(), lower: Arc::new(f) }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, MetricTensor::Identity)
    }

    pub fn lower(&self, n: usize, r: f64, theta: &[f64]) -> DMatrix<f64> {
        match self {
            MetricTensor::Identity => DMatrix::identity(n, n),
            MetricTensor::Custom { lower, .. } => lower(r, theta),
        }
    }

    fn component(&self, n: usize, c: MetricComponent, r: f64, theta: &[f64]) -> f64 {
        let g = self.lower(n, r, theta);
        match c {
            MetricComponent::Lower(j, k) => g[(j, k)],
            MetricComponent::Upper(j, k) => g.try_inverse().map(|inv| inv[(j, k)]).unwrap_or(f64::NAN),
            MetricComponent::Det => g.determinant(),
        }
    }

    /// ∂_r^dr ∂_θ^dt of a component. Custom tensors use nested 5-point differences.
    pub fn derivative(&self, n: usize, c: MetricComponent, dr: usize, dt: &[u8], r: f64, theta: &[f64]) -> f64 {
        let total = dr + dt.iter().map(|&d| d as usize).sum::<usize>();
        if self.is_identity() {
            if total > 0 {
                return 0.0;
            }
            return match c {
                MetricComponent::Lower(j, k) | MetricComponent::Upper(j, k) => (j == k) as u8 as f64,
                MetricComponent::Det => 1.0,
            };
        }
        if total == 0 {
            return self.component(n, c, r, theta);
        }
        let step = 1e-3;
        if dr > 0 {
            let f = |x: f64| self.derivative(n, c, dr - 1, dt, x, theta);
            return five_point(&f, 1, r, step);
        }
        let i = dt.iter().position(|&d| d > 0).unwrap();
        let mut dt_less = dt.to_vec();
        dt_less[i] -= 1;
        let f = |x: f64| {
            let mut th = theta.to_vec();
            th[i] = x;
            self.derivative(n, c, 0, &dt_less, r, &th)
        };
        five_point(&f, 1, theta[i], step)
    }
}

/// Geometry of one end: dimension, warp, coefficient matrix and the cutoff data.
#[derive(Debug, Clone)]
pub struct MetricModel {
    pub dim: usize,
    pub warp: WarpFunction,
    pub metric: MetricTensor,
    /// Interior cutoff radius R.
    pub r_inner: f64,
    /// Start of the end cutoff's transition, R' (default R + 1).
    pub r_prime: f64,
    pub zeta: DiagonalCutoff,
}

impl MetricModel {
    pub fn new(dim: usize, warp: WarpFunction) -> Self {
        Self {
            dim,
            warp,
            metric: MetricTensor::Identity,
            r_inner: 1.0,
            r_prime: 2.0,
            zeta: DiagonalCutoff::default(),
        }
    }

    pub fn with_metric(mut self, metric: MetricTensor) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_radius(mut self, r_inner: f64) -> Self {
        self.r_inner = r_inner;
        self.r_prime = r_inner + 1.0;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.zeta = DiagonalCutoff::new(epsilon);
        self
    }

    pub fn end_cutoff(&self) -> EndCutoff {
        EndCutoff { r_prime: self.r_prime }
    }

    /// Number of angular variables, n - 1.
    pub fn angles(&self) -> usize {
        self.dim - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidModel(format!("dimension {} < 2", self.dim)));
        }
        if self.dim > 4 {
            return Err(Error::Unsupported(format!("dimension {} > 4", self.dim)));
        }
        if !(self.zeta.epsilon > 0.0) {
            return Err(Error::InvalidModel("cutoff epsilon must be positive".into()));
        }
        if self.r_prime < self.r_inner {
            return Err(Error::InvalidModel("R' must not be below R".into()));
        }
        Ok(())
    }

    /// Checks that G is symmetric and uniformly positive definite on a sample grid.
    /// Returns the smallest eigenvalue seen.
    pub fn check_metric_tensor(&self, interval: (f64, f64), samples: usize) -> Result<f64> {
        let n = self.dim;
        let mut min_eig = f64::INFINITY;
        let na = self.angles();
        for i in 0..samples {
            let r = interval.0 + (interval.1 - interval.0) * i as f64 / (samples.max(2) - 1) as f64;
            for t in 0..8 {
                let theta = vec![std::f64::consts::TAU * t as f64 / 8.0; na];
                let g = self.metric.lower(n, r, &theta);
                let asym = (&g - g.transpose()).abs().max();
                if asym > 1e-12 * g.abs().max().max(1.0) {
                    return Err(Error::InvalidModel(format!("G not symmetric at r={r}")));
                }
                let eig = g.symmetric_eigenvalues().min();
                min_eig = min_eig.min(eig);
            }
        }
        if min_eig <= 0.0 {
            return Err(Error::InvalidModel(format!("G not positive definite (min eigenvalue {min_eig:e})")));
        }
        Ok(min_eig)
    }
}
