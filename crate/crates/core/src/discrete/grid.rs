use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on (r0, r1) × S¹ with Dirichlet walls at both radial ends.
///
/// The `n_r` unknowns sit at r0 + (i+1)Δr, Δr = (r1 - r0)/(n_r + 1). The
/// angular direction is represented by the Fourier modes -n_θ/2 .. n_θ/2 - 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r0: f64,
    pub r1: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub h: f64,
}

impl GridSpec {
    pub fn new(r0: f64, r1: f64, n_r: usize, n_theta: usize, h: f64) -> Self {
        Self { r0, r1, n_r, n_theta, h }
    }

    /// Grid on (r0, r1) with step as close as possible to `dr` from below.
    pub fn with_step(r0: f64, r1: f64, dr: f64, n_theta: usize, h: f64) -> Self {
        let n_r = ((r1 - r0) / dr).ceil() as usize - 1;
        Self::new(r0, r1, n_r.max(1), n_theta, h)
    }

    pub fn dr(&self) -> f64 {
        (self.r1 - self.r0) / (self.n_r + 1) as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        self.r0 + (i + 1) as f64 * self.dr()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n_r).map(|i| self.r(i)).collect()
    }

    pub fn modes(&self) -> Vec<i32> {
        let half = (self.n_theta / 2) as i32;
        (-half..half).collect()
    }

    /// Modes up to the sign of m; the radial operators depend on m².
    pub fn distinct_modes(&self) -> Vec<i32> {
        (0..=(self.n_theta / 2) as i32).collect()
    }

    pub fn validate(&self, epsilon: f64) -> Result<()> {
        if !(self.r1 > self.r0) || self.n_r < 3 {
            return Err(Error::Domain(format!("degenerate grid ({}, {}) with {} points", self.r0, self.r1, self.n_r)));
        }
        if self.n_theta == 0 || self.n_theta % 2 != 0 {
            return Err(Error::Domain(format!("n_theta = {} must be even and positive", self.n_theta)));
        }
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(Error::Domain(format!("h = {} outside (0, 1]", self.h)));
        }
        if self.dr() >= epsilon / 4.0 {
            return Err(Error::Domain(format!("step {} does not resolve the cutoff (need < {})", self.dr(), epsilon / 4.0)));
        }
        Ok(())
    }
}
