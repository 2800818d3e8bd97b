use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit of log(value) against log(h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// Two standard errors of the slope.
    pub width: f64,
    pub intercept: f64,
    /// Points that entered the fit.
    pub used: usize,
    pub warnings: Vec<String>,
}

pub fn fit_slope(series: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut warnings = Vec::new();
    let mut pts = Vec::with_capacity(series.len());
    for &(h, v) in series {
        if !(h > 0.0) || !(v > 0.0) || !v.is_finite() {
            warnings.push(format!("excluded point h = {h}, value = {v}"));
            continue;
        }
        pts.push((h.ln(), v.ln()));
    }
    if pts.len() < 4 {
        return Err(Error::Domain(format!("slope fit needs 4 positive points, {} left", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs at least two distinct h".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, width: 2.0 * se, intercept, used: pts.len(), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HS: [f64; 7] = [0.2, 0.14, 0.1, 0.07, 0.05, 0.035, 0.02];

    #[test]
    fn exact_power() {
        let f = fit_slope(&HS.map(|h| (h, h * h))).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.width < 1e-10);
    }

    #[test]
    fn wobbly_power() {
        let f = fit_slope(&HS.map(|h| (h, 3.0 * h.powf(1.5) * (1.0 + 0.01 * (1.0 / h).sin())))).unwrap();
        assert!((1.4..=1.6).contains(&f.slope), "{}", f.slope);
    }

    #[test]
    fn constant_and_exclusions() {
        let f = fit_slope(&HS.map(|h| (h, 0.7))).unwrap();
        assert!(f.slope.abs() < 1e-12);
        let mut s = HS.map(|h| (h, h)).to_vec();
        s[0].1 = 0.0;
        s[1].1 = -1.0;
        let f = fit_slope(&s).unwrap();
        assert_eq!((f.used, f.warnings.len()), (5, 2));
        s[2].1 = f64::NAN;
        s[3].1 = 0.0;
        assert!(fit_slope(&s).is_err());
    }
}
