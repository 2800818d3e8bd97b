use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::coeff::{Atom, AtomValues, Coeff, Rules};

/// ρ^j η^α, at most three angular momenta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mono {
    pub j: u8,
    pub alpha: [u8; 3],
}

impl Mono {
    pub const ONE: Mono = Mono { j: 0, alpha: [0; 3] };

    pub fn rho(j: u8) -> Mono {
        Mono { j, alpha: [0; 3] }
    }

    pub fn eta(i: usize, p: u8) -> Mono {
        let mut alpha = [0; 3];
        alpha[i] = p;
        Mono { j: 0, alpha }
    }

    pub fn degree(&self) -> u32 {
        self.j as u32 + self.alpha.iter().map(|&a| a as u32).sum::<u32>()
    }

    pub fn eta_degree(&self) -> u32 {
        self.alpha.iter().map(|&a| a as u32).sum()
    }

    pub fn times(&self, o: &Mono) -> Mono {
        let mut alpha = self.alpha;
        for i in 0..3 {
            alpha[i] += o.alpha[i];
        }
        Mono { j: self.j + o.j, alpha }
    }

    pub fn eval(&self, rho: Complex64, eta: &[Complex64]) -> Complex64 {
        let mut v = rho.powi(self.j as i32);
        for (i, &a) in self.alpha.iter().enumerate() {
            if a > 0 {
                v *= eta[i].powi(a as i32);
            }
        }
        v
    }
}

/// Polynomial in (ρ, η) with coefficient functions of (r, θ).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Mono, Coeff>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Coeff) -> Self {
        Self::term(Mono::ONE, c)
    }

    pub fn one() -> Self {
        Self::constant(Coeff::one())
    }

    pub fn term(m: Mono, c: Coeff) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Self { terms }
    }

    pub fn from_terms(it: impl IntoIterator<Item = (Mono, Coeff)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in it {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Mono, c: Coeff) {
        if c.is_zero() {
            return;
        }
        let sum = match self.terms.get(&m) {
            Some(old) => old.add(&c),
            None => c,
        };
        if sum.is_zero() {
            self.terms.remove(&m);
        } else {
            self.terms.insert(m, sum);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Coeff)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Mono) -> Option<&Coeff> {
        self.terms.get(m)
    }

    /// Highest total degree in (ρ, η); None for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.degree()).max()
    }

    pub fn add(&self, o: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(*m, c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Polynomial) -> Polynomial {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, s: impl Into<Complex64>) -> Polynomial {
        let s = s.into();
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| (*m, c.scale(s))))
    }

    pub fn mul_coeff(&self, c: &Coeff) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, x)| (*m, x.mul(c))))
    }

    pub fn mul(&self, o: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                out.add_term(m1.times(m2), c1.mul(c2));
            }
        }
        out
    }

    pub fn reduced(&self, rules: &Rules) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| (*m, c.reduced(rules))))
    }

    /// ∂_ρ^k
    pub fn d_rho(&self, k: u8) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            if m.j < k {
                continue;
            }
            let f: f64 = ((m.j - k + 1)..=m.j).map(|x| x as f64).product();
            out.add_term(Mono { j: m.j - k, alpha: m.alpha }, c.scale(f));
        }
        out
    }

    /// ∂_{η_i}^k
    pub fn d_eta(&self, i: usize, k: u8) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            if m.alpha[i] < k {
                continue;
            }
            let f: f64 = ((m.alpha[i] - k + 1)..=m.alpha[i]).map(|x| x as f64).product();
            let mut alpha = m.alpha;
            alpha[i] -= k;
            out.add_term(Mono { j: m.j, alpha }, c.scale(f));
        }
        out
    }

    /// ∂_r of the coefficients.
    pub fn d_r(&self, rules: &Rules) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| (*m, c.d_r(rules))))
    }

    /// ∂_{θ_i} of the coefficients.
    pub fn d_theta(&self, i: usize, rules: &Rules) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| (*m, c.d_theta(i, rules))))
    }

    /// η·∂_η, which multiplies each monomial by its η-degree.
    pub fn euler_eta(&self) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| (*m, c.scale(m.eta_degree() as f64))))
    }

    /// Twisted derivative D_w = -i(∂_r + (w'/w) η·∂_η).
    pub fn d_w(&self, rules: &Rules) -> Polynomial {
        let log = Coeff::atom(Atom::LOG).reduced(rules);
        self.d_r(rules).add(&self.euler_eta().mul_coeff(&log)).scale(Complex64::new(0.0, -1.0))
    }

    pub fn atoms(&self, into: &mut BTreeSet<Atom>) {
        for c in self.terms.values() {
            c.atoms(into);
        }
    }

    pub fn at(&self, vals: &AtomValues) -> NumPoly {
        NumPoly { terms: self.terms.iter().map(|(m, c)| (*m, c.eval(vals))).collect() }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "[{c}]")?;
            if m.j > 0 {
                write!(f, "·ρ^{}", m.j)?;
            }
            for (k, a) in m.alpha.iter().enumerate() {
                if *a > 0 {
                    write!(f, "·η{}^{}", k + 1, a)?;
                }
            }
        }
        Ok(())
    }
}

/// Polynomial with numeric coefficients, frozen at one (r, θ).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NumPoly {
    pub terms: Vec<(Mono, Complex64)>,
}

impl NumPoly {
    pub fn eval(&self, rho: Complex64, eta: &[Complex64]) -> Complex64 {
        self.terms.iter().map(|(m, c)| c * m.eval(rho, eta)).sum()
    }

    pub fn eval_real(&self, rho: f64, eta: &[f64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut v = rho.powi(m.j as i32);
            for (i, &a) in m.alpha.iter().enumerate() {
                if a > 0 {
                    v *= eta[i].powi(a as i32);
                }
            }
            s += c * v;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_derivatives() {
        // p = 3ρ²η₁ + ρ
        let p = Polynomial::from_terms([
            (Mono { j: 2, alpha: [1, 0, 0] }, Coeff::constant(3.0)),
            (Mono::rho(1), Coeff::one()),
        ]);
        let dr2 = p.d_rho(2);
        assert_eq!(dr2, Polynomial::term(Mono::eta(0, 1), Coeff::constant(6.0)));
        assert_eq!(p.d_eta(0, 1), Polynomial::term(Mono::rho(2), Coeff::constant(3.0)));
        assert_eq!(p.degree(), Some(3));
        assert!(p.d_rho(3).is_zero());
    }

    #[test]
    fn twisted_derivative_of_eta_times_coefficient() {
        // D_w(η c(r)) with c = w²: η D_r c + (w'/w)η·D_η(η c) = -i(2 w w' + w'w) η = -3i w w' η
        let g = Rules::generic();
        let b = Polynomial::term(Mono::eta(0, 1), Coeff::w_pow(4));
        let got = b.d_w(&g);
        let m = crate::geometry::MetricModel::new(2, crate::geometry::WarpFunction::conical());
        let c = got.coeff(&Mono::eta(0, 1)).unwrap().eval_at(&m, 2.0, &[0.0]).unwrap();
        let w = 0.5;
        let wp = -0.25;
        assert!((c - Complex64::new(0.0, -3.0 * w * wp)).norm() < 1e-15);
        assert_eq!(got.len(), 1);
    }

    #[test]
    fn flat_twisted_derivative_is_plain() {
        let b = Polynomial::term(Mono::eta(0, 2), Coeff::atom(Atom::lower(0, 1)));
        let g = Rules { warp: Some(crate::geometry::WarpKind::Cylindrical), identity_metric: false };
        // with w ≡ 1, D_w² b = D_r² b
        let lhs = b.d_w(&g).d_w(&g);
        let rhs = b.d_r(&g).d_r(&g).scale(-1.0);
        assert_eq!(lhs, rhs);
    }
}
