//! Browser bindings for three small endcalc computations. The plain functions
//! are ordinary Rust; the `wasm_bindgen` exports only exist on wasm32.

use endcalc::discrete::{funcalc_hs_scalar, hs::dbar_almost_analytic, HsContour};
use endcalc::funcs::{SpectralFunction, SpectralKind};
use endcalc::geometry::hyperbolic::distance_from_angle;

/// Hyperbolic distance from (r0, angle 0) to every point of an n×n polar
/// grid on [r_min, r_max] × [0, 2π), row-major in (r, θ).
pub fn distance_field(r0: f64, r_min: f64, r_max: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let r = r_min + (r_max - r_min) * i as f64 / (n.max(2) - 1) as f64;
        for j in 0..n {
            let angle = std::f64::consts::TAU * j as f64 / n as f64;
            out.push(distance_from_angle(r0, r, angle));
        }
    }
    out
}

/// |∂̄φ̃_M(x + iy)| for φ = (1+λ²)^{-1} at log-spaced y in [1e-3, 1], interleaved as (y, value).
pub fn dbar_curve(order: usize, x: f64, points: usize) -> Vec<f64> {
    let phi = SpectralKind::rational();
    let mut out = Vec::with_capacity(2 * points);
    for i in 0..points {
        let y = 10f64.powf(-3.0 + 3.0 * i as f64 / (points.max(2) - 1) as f64);
        out.push(y);
        out.push(dbar_almost_analytic(&phi, order, x, y).norm());
    }
    out
}

/// (λ, contour value, exact value) triples for φ = (1+λ²)^{-power} on [lo, hi].
pub fn hs_vs_exact(power: f64, order: usize, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let phi = SpectralKind::RationalDecay { power };
    let contour = HsContour { order, ..HsContour::default() };
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let lam = lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64;
        out.push(lam);
        out.push(funcalc_hs_scalar(lam, &phi, &contour).map_or(f64::NAN, |v| v.re));
        out.push(phi.value(lam).re);
    }
    out
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen]
    pub fn distance_field(r0: f64, r_min: f64, r_max: f64, n: usize) -> Vec<f64> {
        super::distance_field(r0, r_min, r_max, n)
    }

    #[wasm_bindgen]
    pub fn dbar_curve(order: usize, x: f64, points: usize) -> Vec<f64> {
        super::dbar_curve(order, x, points)
    }

    #[wasm_bindgen]
    pub fn hs_vs_exact(power: f64, order: usize, lo: f64, hi: f64, points: usize) -> Vec<f64> {
        super::hs_vs_exact(power, order, lo, hi, points)
    }
}
