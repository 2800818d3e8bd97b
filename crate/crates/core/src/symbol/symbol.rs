use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::coeff::{Atom, AtomEnv, AtomValues, Coeff, Rules};
use super::poly::{NumPoly, Polynomial};
use crate::error::{Error, Result};

pub const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    Polynomial,
    Rational,
}

/// A symbol in un-rescaled momenta: poly + Σ_m poles[m] / (p₂ - z)^m.
///
/// z never enters a numerator; it only appears through the pole powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub dim: usize,
    pub order: i32,
    pub poly: Polynomial,
    pub poles: BTreeMap<u32, Polynomial>,
    pub p2: Option<Arc<Polynomial>>,
}

impl Symbol {
    pub fn polynomial(dim: usize, order: i32, poly: Polynomial) -> Self {
        Self { dim, order, poly, poles: BTreeMap::new(), p2: None }
    }

    pub fn zero(dim: usize, order: i32) -> Self {
        Self::polynomial(dim, order, Polynomial::zero())
    }

    /// 1 / (p₂ - z)
    pub fn resolvent(dim: usize, p2: Arc<Polynomial>) -> Self {
        let mut poles = BTreeMap::new();
        poles.insert(1, Polynomial::one());
        Self { dim, order: -2, poly: Polynomial::zero(), poles, p2: Some(p2) }
    }

    pub fn kind(&self) -> SymbolKind {
        if self.poles.is_empty() {
            SymbolKind::Polynomial
        } else {
            SymbolKind::Rational
        }
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero() && self.poles.is_empty()
    }

    /// Numerators d_k of Σ_k d_k/(p₂ - z)^{1+k}, keyed by k.
    pub fn pole_terms(&self) -> impl Iterator<Item = (u32, &Polynomial)> {
        self.poles.iter().map(|(m, d)| (m - 1, d))
    }

    fn with_parts(&self, order: i32, poly: Polynomial, poles: BTreeMap<u32, Polynomial>) -> Symbol {
        let mut poles = poles;
        poles.retain(|_, d| !d.is_zero());
        Symbol { dim: self.dim, order, poly, poles, p2: self.p2.clone() }
    }

    fn merged_p2(&self, o: &Symbol) -> Option<Arc<Polynomial>> {
        match (&self.p2, &o.p2) {
            (Some(a), Some(b)) => {
                debug_assert!(a == b, "symbols built over different p2");
                Some(a.clone())
            }
            (a, b) => a.clone().or_else(|| b.clone()),
        }
    }

    pub fn add(&self, o: &Symbol) -> Symbol {
        let mut poles = self.poles.clone();
        for (m, d) in &o.poles {
            let e = poles.entry(*m).or_default();
            *e = e.add(d);
        }
        let mut s = self.with_parts(self.order.max(o.order), self.poly.add(&o.poly), poles);
        s.p2 = self.merged_p2(o);
        s
    }

    pub fn scale(&self, c: impl Into<Complex64>) -> Symbol {
        let c = c.into();
        self.map(self.order, |p| p.scale(c))
    }

    fn map(&self, order: i32, f: impl Fn(&Polynomial) -> Polynomial) -> Symbol {
        let poles = self.poles.iter().map(|(m, d)| (*m, f(d))).collect();
        self.with_parts(order, f(&self.poly), poles)
    }

    /// Product with a polynomial symbol of the given order.
    pub fn mul_poly(&self, a: &Polynomial, order: i32) -> Symbol {
        self.map(self.order + order, |p| a.mul(p))
    }

    pub fn reduced(&self, rules: &Rules) -> Symbol {
        self.map(self.order, |p| p.reduced(rules))
    }

    /// Applies a first-order derivation δ, using δ(d/(p₂-z)^m) = δd/(p₂-z)^m - m d δp₂/(p₂-z)^{m+1}.
    fn derive(&self, f: impl Fn(&Polynomial) -> Polynomial) -> Symbol {
        let mut poles: BTreeMap<u32, Polynomial> = BTreeMap::new();
        if !self.poles.is_empty() {
            let dp2 = f(self.p2.as_ref().expect("rational symbol without p2"));
            for (m, d) in &self.poles {
                let e = poles.entry(*m).or_default();
                *e = e.add(&f(d));
                if !dp2.is_zero() {
                    let e = poles.entry(m + 1).or_default();
                    *e = e.add(&d.mul(&dp2).scale(-(*m as f64)));
                }
            }
        }
        self.with_parts(self.order, f(&self.poly), poles)
    }

    /// D_w = D_r + (w'/w) η·D_η
    pub fn d_w(&self, rules: &Rules) -> Symbol {
        self.derive(|p| p.d_w(rules))
    }

    /// D_{θ_i} = -i ∂_{θ_i}
    pub fn d_theta(&self, i: usize, rules: &Rules) -> Symbol {
        self.derive(|p| p.d_theta(i, rules).scale(Complex64::new(0.0, -1.0)))
    }

    /// ∂_r (not D_r)
    pub fn partial_r(&self, rules: &Rules) -> Symbol {
        self.derive(|p| p.d_r(rules))
    }

    /// ∂_{η_i}
    pub fn partial_eta(&self, i: usize) -> Symbol {
        let mut s = self.derive(|p| p.d_eta(i, 1));
        s.order -= 1;
        s
    }

    /// ∂_ρ
    pub fn partial_rho(&self) -> Symbol {
        let mut s = self.derive(|p| p.d_rho(1));
        s.order -= 1;
        s
    }

    /// Division by (p₂ - z): raises every pole power by one.
    pub fn div_p2z(&self, p2: &Arc<Polynomial>) -> Symbol {
        let mut poles: BTreeMap<u32, Polynomial> = self.poles.iter().map(|(m, d)| (m + 1, d.clone())).collect();
        if !self.poly.is_zero() {
            poles.insert(1, self.poly.clone());
        }
        let mut s = self.with_parts(self.order - 2, Polynomial::zero(), poles);
        s.p2 = Some(p2.clone());
        s
    }

    /// Multiplication by (p₂ - z). Only pole terms can absorb the factor
    /// without z entering a numerator.
    pub fn mul_p2z(&self) -> Result<Symbol> {
        if !self.poly.is_zero() {
            return Err(Error::Unsupported("(p2 - z) times a polynomial part would put z in a numerator".into()));
        }
        let mut poly = Polynomial::zero();
        let mut poles = BTreeMap::new();
        for (m, d) in &self.poles {
            if *m == 1 {
                poly = poly.add(d);
            } else {
                poles.insert(m - 1, d.clone());
            }
        }
        Ok(self.with_parts(self.order + 2, poly, poles))
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut s = BTreeSet::new();
        self.poly.atoms(&mut s);
        for d in self.poles.values() {
            d.atoms(&mut s);
        }
        if let Some(p2) = &self.p2 {
            p2.atoms(&mut s);
        }
        s
    }

    /// Freezes the coefficients at (r, θ).
    pub fn at(&self, env: &dyn AtomEnv, r: f64, theta: &[f64]) -> Result<NumSymbol> {
        let vals = AtomValues::new(env, &self.atoms(), r, theta)?;
        Ok(self.at_values(&vals))
    }

    pub fn at_values(&self, vals: &AtomValues) -> NumSymbol {
        NumSymbol {
            p2: self.p2.as_ref().map(|p| p.at(vals)).unwrap_or_default(),
            poly: self.poly.at(vals),
            poles: self.poles.iter().map(|(m, d)| (*m, d.at(vals))).collect(),
        }
    }

    /// Checks the structure of a parametrix level j: every numerator of
    /// (p₂ - z)^{-1-k} has degree at most 2k - j, and the polynomial part vanishes.
    pub fn check_level_degrees(&self, j: u32) -> Result<()> {
        if !self.poly.is_zero() {
            return Err(Error::Consistency(format!("level {j} has a polynomial part")));
        }
        for (k, d) in self.pole_terms() {
            let bound = 2 * k as i64 - j as i64;
            if let Some(deg) = d.degree() {
                if deg as i64 > bound {
                    return Err(Error::Consistency(format!("level {j}: numerator of pole power {} has degree {deg} > {bound}", k + 1)));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        if !self.poly.is_zero() {
            write!(f, "{}", self.poly)?;
            first = false;
        }
        for (m, d) in &self.poles {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({d})/(p2-z)^{m}")?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// A symbol with coefficients frozen at one base point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NumSymbol {
    pub p2: NumPoly,
    pub poly: NumPoly,
    pub poles: Vec<(u32, NumPoly)>,
}

impl NumSymbol {
    pub fn eval(&self, rho: f64, eta: &[f64], z: Complex64) -> Result<Complex64> {
        let mut v = self.poly.eval_real(rho, eta);
        if self.poles.is_empty() {
            return Ok(v);
        }
        let q = self.p2.eval_real(rho, eta) - z;
        if q.norm() < POLE_TOL {
            return Err(Error::Pole { distance: q.norm() });
        }
        let inv = q.inv();
        for (m, d) in &self.poles {
            v += d.eval_real(rho, eta) * inv.powi(*m as i32);
        }
        Ok(v)
    }

    pub fn p2_value(&self, rho: f64, eta: &[f64]) -> f64 {
        self.p2.eval_real(rho, eta).re
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// Multi-indices of length `len` and total size `total`.
pub fn multi_indices(len: usize, total: u32) -> Vec<Vec<u32>> {
    if len == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in multi_indices(len - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// D_w^j b
pub fn apply_dw(b: &Symbol, j: u32, rules: &Rules) -> Symbol {
    let mut s = b.clone();
    for _ in 0..j {
        s = s.d_w(rules);
    }
    s
}

/// (a # b)_k = Σ_{j+|β|=k} 1/(j!β!) w^{|β|} (∂_ρ^j ∂_η^β a)(D_θ^β D_w^j b).
pub fn sharp(a: &Symbol, b: &Symbol, k: u32, rules: &Rules) -> Result<Symbol> {
    if a.kind() != SymbolKind::Polynomial {
        return Err(Error::Unsupported("left factor of # must be polynomial in the momenta".into()));
    }
    let order = a.order + b.order - k as i32;
    let mut out = Symbol::zero(b.dim, order);
    out.p2 = b.p2.clone();
    let Some(deg) = a.poly.degree() else { return Ok(out) };
    if k > deg {
        return Ok(out);
    }
    let n_ang = a.dim - 1;
    let mut dw_b = b.clone();
    for j in 0..=k {
        if j > 0 {
            dw_b = dw_b.d_w(rules);
        }
        let da_r = a.poly.d_rho(j as u8);
        if da_r.is_zero() {
            continue;
        }
        for beta in multi_indices(n_ang, k - j) {
            let mut da = da_r.clone();
            let mut db = dw_b.clone();
            let mut denom = factorial(j);
            for (i, &bi) in beta.iter().enumerate() {
                da = da.d_eta(i, bi as u8);
                for _ in 0..bi {
                    db = db.d_theta(i, rules);
                }
                denom *= factorial(bi);
            }
            if da.is_zero() || db.is_zero() {
                continue;
            }
            let nb: u32 = beta.iter().sum();
            let w = Coeff::w_pow(2 * nb as i32).reduced(rules);
            let factor = da.mul_coeff(&w).scale(1.0 / denom);
            let term = db.mul_poly(&factor, 0);
            out = out.add(&term);
        }
    }
    out.order = order;
    Ok(out)
}
