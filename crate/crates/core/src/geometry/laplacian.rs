//! Symbols of -h²Δ_g and of its w-conjugated form in an end chart, computed by
//! composing the quantizations of the pieces with the exact sharp product.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::metric::MetricModel;
use crate::error::{Error, Result};
use crate::symbol::coeff::{Atom, Coeff, Rules};
use crate::symbol::poly::{Mono, Polynomial};
use crate::symbol::symbol::{sharp, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Plain,
    Tilde,
}

/// h²P = Σ_k h^k p_{2-k}(r, θ, hD_r, h w D_θ) with P = -Δ_g or its conjugate.
#[derive(Debug, Clone)]
pub struct LaplacianSymbols {
    pub which: Which,
    pub dim: usize,
    pub rules: Rules,
    /// Principal symbol p₂^ι (without z).
    pub p2: Arc<Polynomial>,
    pub p1: Symbol,
    pub p0: Symbol,
}

impl LaplacianSymbols {
    /// p_{2-k} as symbols; k = 0 gives p₂^ι.
    pub fn p(&self, k: usize) -> Symbol {
        match k {
            0 => Symbol::polynomial(self.dim, 2, (*self.p2).clone()),
            1 => self.p1.clone(),
            2 => self.p0.clone(),
            _ => Symbol::zero(self.dim, 2 - k as i32),
        }
    }
}

/// ξ_0 = ρ, ξ_i = η_{i-1}.
fn xi(i: usize) -> Mono {
    if i == 0 {
        Mono::rho(1)
    } else {
        Mono::eta(i - 1, 1)
    }
}

fn i_xi(i: usize) -> Polynomial {
    Polynomial::term(xi(i), Coeff::constant(Complex64::new(0.0, 1.0)))
}

pub fn laplacian_symbols(model: &MetricModel, which: Which) -> Result<LaplacianSymbols> {
    let n = model.dim;
    if n < 2 {
        return Err(Error::InvalidModel(format!("dimension {n} < 2")));
    }
    model.validate()?;
    let rules = Rules::for_model(model);
    let sqrt_det = Coeff::atom_pow(Atom::det(), 1).reduced(&rules);
    let inv_sqrt_det = Coeff::atom_pow(Atom::det(), -1).reduced(&rules);
    let log = Coeff::atom(Atom::LOG).reduced(&rules);

    // -h²Δ_g = -g^{-1/2} op(iξ_j) op(G^{jk} g^{1/2} iξ_k) - h (1-n)(w'/w) G^{0k} op(iξ_k)
    let mut s0 = Polynomial::zero();
    let mut s1 = Symbol::zero(n, 1);
    for j in 0..n {
        let a = Symbol::polynomial(n, 1, i_xi(j));
        for k in 0..n {
            let g_up = Coeff::atom(Atom::upper(j, k)).reduced(&rules);
            if g_up.is_zero() {
                continue;
            }
            let b = Symbol::polynomial(n, 1, i_xi(k).mul_coeff(&g_up.mul(&sqrt_det)));
            let prod0 = sharp(&a, &b, 0, &rules)?;
            let prod1 = sharp(&a, &b, 1, &rules)?;
            s0 = s0.add(&prod0.poly.mul_coeff(&inv_sqrt_det).scale(-1.0));
            s1 = s1.add(&Symbol::polynomial(n, 1, prod1.poly.mul_coeff(&inv_sqrt_det).scale(-1.0)));
        }
        let g0 = Coeff::atom(Atom::upper(0, j)).reduced(&rules);
        let drift = i_xi(j).mul_coeff(&g0.mul(&log)).scale(-(1.0 - n as f64));
        s1 = s1.add(&Symbol::polynomial(n, 1, drift));
    }
    let s0 = s0.reduced(&rules);
    let s1 = s1.reduced(&rules);

    let (p1, p0) = match which {
        Which::Plain => (s1, Symbol::zero(n, 0)),
        Which::Tilde => {
            // w^{(1-n)/2} (S_0 + h S_1) w^{(n-1)/2}, expanded with the sharp product
            let e2 = n as i32 - 1;
            let f = Symbol::polynomial(n, 0, Polynomial::constant(Coeff::w_pow(e2).reduced(&rules)));
            let left = Coeff::w_pow(-e2).reduced(&rules);
            let s0_sym = Symbol::polynomial(n, 2, s0.clone());
            let t1 = sharp(&s0_sym, &f, 1, &rules)?.add(&sharp(&s1, &f, 0, &rules)?);
            let t2 = sharp(&s0_sym, &f, 2, &rules)?.add(&sharp(&s1, &f, 1, &rules)?);
            let p1 = Symbol::polynomial(n, 1, t1.poly.mul_coeff(&left).reduced(&rules));
            let p0 = Symbol::polynomial(n, 0, t2.poly.mul_coeff(&left).reduced(&rules));
            (p1, p0)
        }
    };
    Ok(LaplacianSymbols { which, dim: n, rules, p2: Arc::new(s0), p1, p0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::warp::WarpFunction;
    use crate::symbol::coeff::AtomValues;

    fn num(p: &Polynomial, m: &MetricModel, r: f64) -> crate::symbol::poly::NumPoly {
        let mut atoms = Default::default();
        p.atoms(&mut atoms);
        p.at(&AtomValues::new(m, &atoms, r, &[0.3]).unwrap())
    }

    #[test]
    fn flat_cylinder() {
        let m = MetricModel::new(2, WarpFunction::cylindrical());
        let l = laplacian_symbols(&m, Which::Plain).unwrap();
        let expect = Polynomial::term(Mono::rho(2), Coeff::one()).add(&Polynomial::term(Mono::eta(0, 2), Coeff::one()));
        assert_eq!(*l.p2, expect);
        assert!(l.p1.is_zero());
        assert!(l.p0.is_zero());
    }

    #[test]
    fn hyperbolic_plain_first_order_term() {
        let m = MetricModel::new(2, WarpFunction::hyperbolic());
        let l = laplacian_symbols(&m, Which::Plain).unwrap();
        // Δ_g = ∂_r² + ∂_r + w²∂_θ² on this end, so -h²Δ_g has first-order symbol -iρ
        let c = l.p1.poly.coeff(&Mono::rho(1)).unwrap().as_constant().unwrap();
        assert_eq!(c, Complex64::new(0.0, -1.0));
        assert_eq!(l.p1.poly.len(), 1);
    }

    #[test]
    fn tilde_keeps_principal_part_and_has_expected_potential() {
        for warp in [WarpFunction::hyperbolic(), WarpFunction::conical(), WarpFunction::custom("c", |r: f64| 1.0 / (1.0 + r * r))] {
            let m = MetricModel::new(2, warp.clone());
            let plain = laplacian_symbols(&m, Which::Plain).unwrap();
            let tilde = laplacian_symbols(&m, Which::Tilde).unwrap();
            assert_eq!(plain.p2, tilde.p2);
            assert!(tilde.p1.is_zero(), "{}", tilde.p1);
            // p0 = -(1/2)(w'/w)' + (1/4)(w'/w)²
            let r = 2.3;
            let l0 = warp.log_deriv_k(0, r).unwrap();
            let l1 = warp.log_deriv_k(1, r).unwrap();
            let got = num(&tilde.p0.poly, &m, r).eval_real(0.0, &[0.0]);
            assert!((got.re - (-0.5 * l1 + 0.25 * l0 * l0)).abs() < 1e-6, "{got}");
        }
    }

    #[test]
    fn principal_symbol_with_rescaled_eta() {
        let m = MetricModel::new(2, WarpFunction::hyperbolic());
        let l = laplacian_symbols(&m, Which::Tilde).unwrap();
        let r: f64 = 1.7;
        let w = (-r).exp();
        let v = num(&l.p2, &m, r).eval_real(0.8, &[w * 3.0]);
        assert_eq!(v.re, 0.8 * 0.8 + (w * 3.0) * (w * 3.0));
    }

    #[test]
    fn rejects_dimension_one() {
        let m = MetricModel::new(1, WarpFunction::hyperbolic());
        assert!(matches!(laplacian_symbols(&m, Which::Plain), Err(Error::InvalidModel(_))));
    }
}
