use crate::error::{Error, Result};

const CLAMP_TOL: f64 = 1e-12;

/// Geodesic distance in hyperbolic space between points given in polar
/// coordinates (radius, unit direction).
pub fn hyperbolic_distance(r: f64, omega: &[f64], r2: f64, omega2: &[f64]) -> Result<f64> {
    if r < 0.0 || r2 < 0.0 {
        return Err(Error::Domain(format!("negative radius ({r}, {r2})")));
    }
    if omega.len() != omega2.len() {
        return Err(Error::Domain("direction vectors of different length".into()));
    }
    let q: f64 = omega.iter().zip(omega2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 4.0;
    let arg = (1.0 - q) * (r - r2).cosh() + q * (r + r2).cosh();
    if arg < 1.0 {
        if arg < 1.0 - CLAMP_TOL {
            return Err(Error::Numeric(format!("arccosh argument {arg} below 1")));
        }
        return Ok(0.0);
    }
    Ok(arg.acosh())
}

/// Same distance when only the angle between the two directions matters.
pub fn distance_from_angle(r: f64, r2: f64, angle: f64) -> f64 {
    // |ω - ω'|²/4 = sin²(angle/2)
    let q = (0.5 * angle).sin().powi(2);
    let arg = (1.0 - q) * (r - r2).cosh() + q * (r + r2).cosh();
    arg.max(1.0).acosh()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_cases() {
        let w = [0.0, 0.0, 1.0];
        let m = [0.0, 0.0, -1.0];
        assert_eq!(hyperbolic_distance(1.3, &w, 1.3, &w).unwrap(), 0.0);
        assert!((hyperbolic_distance(1.0, &w, 2.0, &w).unwrap() - 1.0).abs() < 1e-12);
        assert!((hyperbolic_distance(1.0, &w, 2.0, &m).unwrap() - 3.0).abs() < 1e-12);
        assert!(hyperbolic_distance(-1.0, &w, 2.0, &m).is_err());
    }

    #[test]
    fn angle_form_agrees() {
        let a = [1.0, 0.0, 0.0];
        let t: f64 = 0.7;
        let b = [t.cos(), t.sin(), 0.0];
        let d1 = hyperbolic_distance(2.0, &a, 3.5, &b).unwrap();
        let d2 = distance_from_angle(2.0, 3.5, t);
        assert!((d1 - d2).abs() < 1e-12);
    }
}
