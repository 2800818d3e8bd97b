use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64;

use super::coeff::{Atom, AtomEnv, AtomValues};
use super::parametrix::Parametrix;
use super::poly::{NumPoly, Polynomial};
use crate::error::{Error, Result};
use crate::funcs::SpectralFunction;

/// a_j = Σ_k D_k · φ^(k)∘p₂.
///
/// The stored D_k already carry the factor (-1)^k/k! that turns the pole
/// (p₂ - z)^{-1-k} into φ^(k) under the Helffer–Sjöstrand integral, so the raw
/// parametrix numerator is (-1)^k k! D_k.
#[derive(Debug, Clone, PartialEq)]
pub struct FuncSymbol {
    pub dim: usize,
    pub level: usize,
    pub terms: Vec<(u32, Polynomial)>,
    pub p2: Arc<Polynomial>,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

impl FuncSymbol {
    pub fn max_k(&self) -> u32 {
        self.terms.iter().map(|(k, _)| *k).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut s = BTreeSet::new();
        self.p2.atoms(&mut s);
        for (_, d) in &self.terms {
            d.atoms(&mut s);
        }
        s
    }

    pub fn at(&self, env: &dyn AtomEnv, r: f64, theta: &[f64]) -> Result<NumFuncSymbol> {
        let vals = AtomValues::new(env, &self.atoms(), r, theta)?;
        Ok(self.at_values(&vals))
    }

    pub fn at_values(&self, vals: &AtomValues) -> NumFuncSymbol {
        NumFuncSymbol {
            p2: self.p2.at(vals),
            terms: self.terms.iter().map(|(k, d)| (*k, d.at(vals))).collect(),
            max_k: self.max_k() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumFuncSymbol {
    pub p2: NumPoly,
    pub terms: Vec<(u32, NumPoly)>,
    max_k: usize,
}

impl NumFuncSymbol {
    pub fn eval(&self, rho: f64, eta: &[f64], phi: &dyn SpectralFunction) -> Complex64 {
        if self.terms.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        let lam = self.p2.eval_real(rho, eta).re;
        let d = phi.derivatives(lam, self.max_k);
        self.terms.iter().map(|(k, p)| p.eval_real(rho, eta) * d[*k as usize]).sum()
    }
}

/// Replaces (p₂ - z)^{-1-k} by (-1)^k φ^(k)(p₂)/k! in every parametrix level.
///
/// `max_derivative` is the highest derivative order the caller can supply.
pub fn funcalc_symbols(par: &Parametrix, max_derivative: usize) -> Result<Vec<FuncSymbol>> {
    let needed = par.k_of_j.iter().copied().max().unwrap_or(0) as usize;
    if needed > max_derivative {
        return Err(Error::DerivativeOrder { required: needed, supplied: max_derivative });
    }
    Ok(par
        .levels
        .iter()
        .enumerate()
        .map(|(j, q)| {
            let terms = q
                .pole_terms()
                .filter(|(_, d)| !d.is_zero())
                .map(|(k, d)| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    (k, d.scale(sign / factorial(k)))
                })
                .collect();
            FuncSymbol { dim: q.dim, level: j, terms, p2: par.p2().clone() }
        })
        .collect())
}
