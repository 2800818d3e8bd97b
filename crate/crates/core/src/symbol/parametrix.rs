use std::sync::Arc;

use super::poly::Polynomial;
use super::symbol::{sharp, Symbol};
use crate::error::{Error, Result};
use crate::geometry::laplacian::{laplacian_symbols, LaplacianSymbols, Which};
use crate::geometry::metric::MetricModel;

/// Symbols q_{-2-j}, j = 0..=N, of the resolvent parametrix of h²P - z.
#[derive(Debug, Clone)]
pub struct Parametrix {
    pub lap: LaplacianSymbols,
    pub levels: Vec<Symbol>,
    /// Largest k with a nonzero numerator of (p₂ - z)^{-1-k}, per level.
    pub k_of_j: Vec<u32>,
}

impl Parametrix {
    pub fn p2(&self) -> &Arc<Polynomial> {
        &self.lap.p2
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Σ_{k+l+j=ν} (p_{2-k} # q_{-2-j})_l, where the (k, l) = (0, 0) term uses
    /// p₂ = p₂^ι - z. Equals 1 for ν = 0 and 0 for 1 ≤ ν ≤ N; for ν > N it is
    /// the uncancelled part of the composed symbol.
    pub fn telescoping_sum(&self, nu: usize) -> Result<Symbol> {
        let rules = self.lap.rules;
        let mut out = Symbol::zero(self.lap.dim, -(nu as i32));
        for k in 0..=2.min(nu) {
            let p = self.lap.p(k);
            for l in 0..=(nu - k) {
                let j = nu - k - l;
                if j >= self.levels.len() {
                    continue;
                }
                let term = if k == 0 && l == 0 {
                    self.levels[j].mul_p2z()?
                } else {
                    sharp(&p, &self.levels[j], l as u32, &rules)?
                };
                out = out.add(&term);
            }
        }
        Ok(out)
    }
}

pub fn parametrix(model: &MetricModel, which: Which, n: usize) -> Result<Parametrix> {
    let lap = laplacian_symbols(model, which)?;
    parametrix_from(lap, n)
}

/// Runs the triangular recursion
/// q_{-2-j} = -(p₂ - z)^{-1} Σ_{k+j'+l=j, j'<j} (p_{2-k} # q_{-2-j'})_l.
pub fn parametrix_from(lap: LaplacianSymbols, n: usize) -> Result<Parametrix> {
    let rules = lap.rules;
    let p2 = lap.p2.clone();
    let mut levels = vec![Symbol::resolvent(lap.dim, p2.clone())];
    let mut k_of_j = vec![0];
    for j in 1..=n {
        let mut acc = Symbol::zero(lap.dim, -(j as i32));
        for k in 0..=2.min(j) {
            let p = lap.p(k);
            for l in 0..=(j - k) {
                let j1 = j - k - l;
                if j1 >= j {
                    continue;
                }
                acc = acc.add(&sharp(&p, &levels[j1], l as u32, &rules)?);
            }
        }
        let mut q = acc.scale(-1.0).div_p2z(&p2);
        q.order = -2 - j as i32;
        q.check_level_degrees(j as u32)?;
        let kj = q.poles.keys().next_back().map(|m| m - 1).unwrap_or(0);
        if q.is_zero() {
            k_of_j.push(0);
        } else {
            k_of_j.push(kj);
        }
        levels.push(q);
    }
    if levels.iter().any(|q| q.poly.degree().is_some()) {
        return Err(Error::Consistency("parametrix level with a polynomial part".into()));
    }
    Ok(Parametrix { lap, levels, k_of_j })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::warp::WarpFunction;
    use crate::symbol::coeff::Coeff;
    use crate::symbol::poly::Mono;
    use num_complex::Complex64;

    #[test]
    fn flat_cylinder_first_correction_vanishes() {
        let m = MetricModel::new(2, WarpFunction::cylindrical());
        let p = parametrix(&m, Which::Plain, 2).unwrap();
        assert!(p.levels[1].is_zero());
        assert!(p.levels[2].is_zero());
    }

    #[test]
    fn hyperbolic_tilde_first_correction_by_hand() {
        // q_{-3} = -4i (w'/w) ρ η² / (p₂ - z)³ with w'/w = -1
        let m = MetricModel::new(2, WarpFunction::hyperbolic());
        let p = parametrix(&m, Which::Tilde, 1).unwrap();
        let q = &p.levels[1];
        assert_eq!(q.poles.len(), 1);
        let d = &q.poles[&3];
        let expect = Polynomial::term(Mono { j: 1, alpha: [2, 0, 0] }, Coeff::constant(Complex64::new(0.0, 4.0)));
        assert_eq!(d, &expect);
        assert_eq!(p.k_of_j[1], 2);
    }

    #[test]
    fn hyperbolic_plain_first_correction_by_hand() {
        // p₁ = -iρ adds iρ/(p₂ - z)² to the tilde result
        let m = MetricModel::new(2, WarpFunction::hyperbolic());
        let p = parametrix(&m, Which::Plain, 1).unwrap();
        let q = &p.levels[1];
        let d1 = &q.poles[&2];
        assert_eq!(d1, &Polynomial::term(Mono::rho(1), Coeff::constant(Complex64::new(0.0, 1.0))));
        assert_eq!(d1.degree(), Some(1));
    }
}
