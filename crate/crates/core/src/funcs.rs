//! Spectral functions φ with derivatives from truncated Taylor arithmetic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Truncated Taylor series Σ c_k t^k.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub c: Vec<Complex64>,
}

impl Jet {
    /// x + t, truncated at order n.
    pub fn variable(x: impl Into<Complex64>, n: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        c[0] = x.into();
        if n > 0 {
            c[1] = Complex64::new(1.0, 0.0);
        }
        Self { c }
    }

    pub fn constant(x: impl Into<Complex64>, n: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        c[0] = x.into();
        Self { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }

    pub fn add_scalar(&self, s: impl Into<Complex64>) -> Jet {
        let mut j = self.clone();
        j.c[0] += s.into();
        j
    }

    pub fn scale(&self, s: impl Into<Complex64>) -> Jet {
        let s = s.into();
        Jet { c: self.c.iter().map(|a| a * s).collect() }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let n = self.order();
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        for i in 0..=n {
            for j in 0..=(n - i) {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c }
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    /// u^a by the standard power-series recurrence; needs c[0] ≠ 0.
    pub fn powf(&self, a: f64) -> Jet {
        let n = self.order();
        let u = &self.c;
        let mut f = vec![Complex64::new(0.0, 0.0); n + 1];
        f[0] = u[0].powf(a);
        for m in 1..=n {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 1..=m {
                s += (a * k as f64 - (m - k) as f64) * u[k] * f[m - k];
            }
            f[m] = s / (m as f64 * u[0]);
        }
        Jet { c: f }
    }

    pub fn exp(&self) -> Jet {
        let n = self.order();
        let u = &self.c;
        let mut f = vec![Complex64::new(0.0, 0.0); n + 1];
        f[0] = u[0].exp();
        for m in 1..=n {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 1..=m {
                s += k as f64 * u[k] * f[m - k];
            }
            f[m] = s / m as f64;
        }
        Jet { c: f }
    }

    /// Derivatives f^(k)(x) = k! c_k.
    pub fn derivatives(&self) -> Vec<Complex64> {
        let mut fact = 1.0;
        self.c
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 {
                    fact *= k as f64;
                }
                c * fact
            })
            .collect()
    }
}

/// A function of the spectral parameter, known with all derivatives on the real line.
pub trait SpectralFunction: Send + Sync {
    fn id(&self) -> String;

    /// φ(x), φ'(x), ..., φ^(k)(x).
    fn derivatives(&self, x: f64, k: usize) -> Vec<Complex64>;

    fn value(&self, x: f64) -> Complex64 {
        self.derivatives(x, 0)[0]
    }

    /// Decay order σ with φ ∈ S^{-σ}.
    fn sigma(&self) -> f64;

    fn is_real(&self) -> bool {
        true
    }

    /// Interval outside which φ vanishes identically, if any.
    fn support(&self) -> Option<(f64, f64)> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpectralKind {
    /// (1 + λ²)^{-power}
    RationalDecay { power: f64 },
    /// e^{-1/(1-s²)}, s = (λ - center)/half_width, times e so the peak is 1
    SmoothBump { center: f64, half_width: f64 },
    /// (λ - z₀)^{-1}
    Resolvent { re: f64, im: f64 },
}

impl SpectralKind {
    pub fn rational() -> Self {
        SpectralKind::RationalDecay { power: 1.0 }
    }
}

impl SpectralFunction for SpectralKind {
    fn id(&self) -> String {
        match self {
            SpectralKind::RationalDecay { power } => format!("rational-decay({power})"),
            SpectralKind::SmoothBump { center, half_width } => format!("smooth-bump({center},{half_width})"),
            SpectralKind::Resolvent { re, im } => format!("resolvent({re}{im:+}i)"),
        }
    }

    fn derivatives(&self, x: f64, k: usize) -> Vec<Complex64> {
        match *self {
            SpectralKind::RationalDecay { power } => {
                let t = Jet::variable(x, k);
                t.mul(&t).add_scalar(1.0).powf(-power).derivatives()
            }
            SpectralKind::SmoothBump { center, half_width } => {
                let s0 = (x - center) / half_width;
                if s0.abs() >= 1.0 {
                    return vec![Complex64::new(0.0, 0.0); k + 1];
                }
                // s(x + t) = s0 + t/half_width
                let mut s = Jet::variable(s0, k);
                if k > 0 {
                    s.c[1] = Complex64::new(1.0 / half_width, 0.0);
                }
                let one_minus = s.mul(&s).scale(-1.0).add_scalar(1.0);
                one_minus.recip().scale(-1.0).add_scalar(1.0).exp().derivatives()
            }
            SpectralKind::Resolvent { re, im } => {
                let t = Jet::variable(Complex64::new(x - re, -im), k);
                t.recip().derivatives()
            }
        }
    }

    fn sigma(&self) -> f64 {
        match *self {
            SpectralKind::RationalDecay { power } => 2.0 * power,
            // compact support: any order; this is what the contour uses for its x-range weighting
            SpectralKind::SmoothBump { .. } => 8.0,
            SpectralKind::Resolvent { .. } => 1.0,
        }
    }

    fn is_real(&self) -> bool {
        !matches!(self, SpectralKind::Resolvent { .. })
    }

    fn support(&self) -> Option<(f64, f64)> {
        match *self {
            SpectralKind::SmoothBump { center, half_width } => Some((center - half_width, center + half_width)),
            _ => None,
        }
    }
}
