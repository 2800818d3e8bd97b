//! Coefficient functions of (r, θ): a canonical sum-of-products form used by
//! the symbol engine, plus an expression tree used for serialization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::metric::{MetricComponent, MetricModel};
use crate::geometry::warp::WarpKind;

/// A base function of (r, θ). Angular derivative orders are per angle, at most three angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum Atom {
    /// w^(k)
    Warp { k: u8 },
    /// k-th derivative of w'/w
    WarpLog { k: u8 },
    MetricLower { j: u8, k: u8, dr: u8, dt: [u8; 3] },
    MetricUpper { j: u8, k: u8, dr: u8, dt: [u8; 3] },
    MetricDet { dr: u8, dt: [u8; 3] },
}

impl Atom {
    pub const W: Atom = Atom::Warp { k: 0 };
    pub const LOG: Atom = Atom::WarpLog { k: 0 };

    pub fn upper(j: usize, k: usize) -> Atom {
        let (j, k) = (j.min(k) as u8, j.max(k) as u8);
        Atom::MetricUpper { j, k, dr: 0, dt: [0; 3] }
    }

    pub fn lower(j: usize, k: usize) -> Atom {
        let (j, k) = (j.min(k) as u8, j.max(k) as u8);
        Atom::MetricLower { j, k, dr: 0, dt: [0; 3] }
    }

    pub fn det() -> Atom {
        Atom::MetricDet { dr: 0, dt: [0; 3] }
    }

    fn d_r(self) -> Atom {
        match self {
            Atom::Warp { k } => Atom::Warp { k: k + 1 },
            Atom::WarpLog { k } => Atom::WarpLog { k: k + 1 },
            Atom::MetricLower { j, k, dr, dt } => Atom::MetricLower { j, k, dr: dr + 1, dt },
            Atom::MetricUpper { j, k, dr, dt } => Atom::MetricUpper { j, k, dr: dr + 1, dt },
            Atom::MetricDet { dr, dt } => Atom::MetricDet { dr: dr + 1, dt },
        }
    }

    fn d_theta(self, i: usize) -> Option<Atom> {
        let bump = |mut dt: [u8; 3]| {
            dt[i] += 1;
            dt
        };
        match self {
            Atom::Warp { .. } | Atom::WarpLog { .. } => None,
            Atom::MetricLower { j, k, dr, dt } => Some(Atom::MetricLower { j, k, dr, dt: bump(dt) }),
            Atom::MetricUpper { j, k, dr, dt } => Some(Atom::MetricUpper { j, k, dr, dt: bump(dt) }),
            Atom::MetricDet { dr, dt } => Some(Atom::MetricDet { dr, dt: bump(dt) }),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let derivs = |dr: u8, dt: [u8; 3]| {
            let mut s = String::new();
            if dr > 0 {
                s.push_str(&format!("_r{dr}"));
            }
            for (i, d) in dt.iter().enumerate() {
                if *d > 0 {
                    s.push_str(&format!("_t{}{}", i + 1, d));
                }
            }
            s
        };
        match *self {
            Atom::Warp { k: 0 } => write!(f, "w"),
            Atom::Warp { k } => write!(f, "w^({k})"),
            Atom::WarpLog { k: 0 } => write!(f, "(w'/w)"),
            Atom::WarpLog { k } => write!(f, "(w'/w)^({k})"),
            Atom::MetricLower { j, k, dr, dt } => write!(f, "G_{j}{k}{}", derivs(dr, dt)),
            Atom::MetricUpper { j, k, dr, dt } => write!(f, "G^{j}{k}{}", derivs(dr, dt)),
            Atom::MetricDet { dr, dt } => write!(f, "detG{}", derivs(dr, dt)),
        }
    }
}

/// Model knowledge used to collapse atoms: known warp families and the identity metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Rules {
    pub warp: Option<WarpKind>,
    pub identity_metric: bool,
}

enum Replacement {
    Keep,
    Const(f64),
    /// c · w^{e2/2}
    ScaledWarp(f64, i32),
    /// w^(k) = w · Y_k((w'/w), (w'/w)', ...), used when the warp is not a known family
    Expand(u8),
}

/// Y_k with w^(k) = w·Y_k: Y_0 = 1, Y_{k+1} = Y_k' + (w'/w) Y_k.
fn warp_derivative_factor(k: u8) -> Coeff {
    let g = Rules::generic();
    let mut y = Coeff::one();
    for _ in 0..k {
        y = y.d_r(&g).add(&y.mul(&Coeff::atom(Atom::LOG)));
    }
    y
}

impl Rules {
    pub fn generic() -> Self {
        Self::default()
    }

    pub fn for_model(model: &MetricModel) -> Self {
        let warp = match model.warp.kind() {
            WarpKind::Custom => None,
            k => Some(k),
        };
        Self { warp, identity_metric: model.metric.is_identity() }
    }

    fn replacement(&self, a: Atom) -> Replacement {
        let fact = |k: u8| (1..=k as u64).product::<u64>() as f64;
        let sign = |k: u8| if k % 2 == 0 { 1.0 } else { -1.0 };
        match a {
            Atom::Warp { k } => match self.warp {
                Some(WarpKind::Cylindrical) => Replacement::Const(if k == 0 { 1.0 } else { 0.0 }),
                Some(WarpKind::Hyperbolic) if k > 0 => Replacement::ScaledWarp(sign(k), 2),
                // (1/r)^(k) = (-1)^k k! w^{k+1}
                Some(WarpKind::Conical) if k > 0 => Replacement::ScaledWarp(sign(k) * fact(k), 2 * (k as i32 + 1)),
                None if k > 0 => Replacement::Expand(k),
                _ => Replacement::Keep,
            },
            Atom::WarpLog { k } => match self.warp {
                Some(WarpKind::Cylindrical) => Replacement::Const(0.0),
                Some(WarpKind::Hyperbolic) => Replacement::Const(if k == 0 { -1.0 } else { 0.0 }),
                // (-1/r)^(k) = (-1)^{k+1} k! w^{k+1}
                Some(WarpKind::Conical) => Replacement::ScaledWarp(-sign(k) * fact(k), 2 * (k as i32 + 1)),
                _ => Replacement::Keep,
            },
            Atom::MetricLower { j, k, dr, dt } | Atom::MetricUpper { j, k, dr, dt } if self.identity_metric => {
                let derived = dr > 0 || dt.iter().any(|&d| d > 0);
                Replacement::Const(if !derived && j == k { 1.0 } else { 0.0 })
            }
            Atom::MetricDet { dr, dt } if self.identity_metric => {
                let derived = dr > 0 || dt.iter().any(|&d| d > 0);
                Replacement::Const(if derived { 0.0 } else { 1.0 })
            }
            _ => Replacement::Keep,
        }
    }

    /// Applies the replacements to one product term.
    fn reduce(&self, factors: &[(Atom, i32)], c: Complex64) -> Option<Coeff> {
        let mut c = c;
        let mut out: Vec<(Atom, i32)> = Vec::with_capacity(factors.len());
        let mut extra_w = 0;
        let mut expansions: Vec<(u8, u32)> = Vec::new();
        for &(a, e2) in factors {
            match self.replacement(a) {
                Replacement::Keep => out.push((a, e2)),
                Replacement::Const(v) => {
                    if v == 0.0 {
                        return None;
                    }
                    c *= half_pow(v, e2);
                }
                Replacement::ScaledWarp(v, p2) => {
                    c *= half_pow(v, e2);
                    extra_w += p2 * e2 / 2;
                }
                Replacement::Expand(k) if e2 > 0 && e2 % 2 == 0 => {
                    extra_w += e2;
                    expansions.push((k, (e2 / 2) as u32));
                }
                Replacement::Expand(_) => out.push((a, e2)),
            }
        }
        if extra_w != 0 {
            out.push((Atom::W, extra_w));
            out.sort_by(|a, b| a.0.cmp(&b.0));
            merge_sorted(&mut out);
        }
        let mut terms = BTreeMap::new();
        terms.insert(out, c);
        let mut res = Coeff { terms };
        for (k, p) in expansions {
            res = res.mul(&warp_derivative_factor(k).powi(p));
        }
        Some(res)
    }
}

fn half_pow(v: f64, e2: i32) -> f64 {
    if e2 % 2 == 0 {
        v.powi(e2 / 2)
    } else {
        v.powf(e2 as f64 / 2.0)
    }
}

fn merge_sorted(v: &mut Vec<(Atom, i32)>) {
    let mut out: Vec<(Atom, i32)> = Vec::with_capacity(v.len());
    for &(a, e) in v.iter() {
        match out.last_mut() {
            Some(last) if last.0 == a => last.1 += e,
            _ => out.push((a, e)),
        }
    }
    out.retain(|x| x.1 != 0);
    *v = out;
}

/// Numeric values of atoms at a point.
pub trait AtomEnv {
    fn atom(&self, a: &Atom, r: f64, theta: &[f64]) -> Result<f64>;
}

impl AtomEnv for MetricModel {
    fn atom(&self, a: &Atom, r: f64, theta: &[f64]) -> Result<f64> {
        let n = self.dim;
        match *a {
            Atom::Warp { k } => self.warp.deriv(k as usize, r),
            Atom::WarpLog { k } => self.warp.log_deriv_k(k as usize, r),
            Atom::MetricLower { j, k, dr, dt } => Ok(self.metric.derivative(
                n,
                MetricComponent::Lower(j as usize, k as usize),
                dr as usize,
                &dt[..n - 1],
                r,
                theta,
            )),
            Atom::MetricUpper { j, k, dr, dt } => Ok(self.metric.derivative(
                n,
                MetricComponent::Upper(j as usize, k as usize),
                dr as usize,
                &dt[..n - 1],
                r,
                theta,
            )),
            Atom::MetricDet { dr, dt } => {
                Ok(self.metric.derivative(n, MetricComponent::Det, dr as usize, &dt[..n - 1], r, theta))
            }
        }
    }
}

/// Atom values at one point, looked up during evaluation.
#[derive(Debug, Clone, Default)]
pub struct AtomValues {
    values: BTreeMap<Atom, f64>,
}

impl AtomValues {
    pub fn new(env: &dyn AtomEnv, atoms: &BTreeSet<Atom>, r: f64, theta: &[f64]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for a in atoms {
            values.insert(*a, env.atom(a, r, theta)?);
        }
        Ok(Self { values })
    }

    pub fn get(&self, a: &Atom) -> f64 {
        self.values[a]
    }
}

type Factors = Vec<(Atom, i32)>;

/// Canonical coefficient: Σ c_i Π atom^{e/2}. Exponents are stored doubled so
/// square roots of w and det G stay exact.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coeff {
    terms: BTreeMap<Factors, Complex64>,
}

pub const DROP_TOL: f64 = 1e-13;

impl Coeff {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: impl Into<Complex64>) -> Self {
        let c = c.into();
        let mut terms = BTreeMap::new();
        if c != Complex64::new(0.0, 0.0) {
            terms.insert(Vec::new(), c);
        }
        Self { terms }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn atom(a: Atom) -> Self {
        Self::atom_pow(a, 2)
    }

    /// atom^{e2/2}
    pub fn atom_pow(a: Atom, e2: i32) -> Self {
        let mut terms = BTreeMap::new();
        if e2 == 0 {
            terms.insert(Vec::new(), Complex64::new(1.0, 0.0));
        } else {
            terms.insert(vec![(a, e2)], Complex64::new(1.0, 0.0));
        }
        Self { terms }
    }

    pub fn w_pow(e2: i32) -> Self {
        Self::atom_pow(Atom::W, e2)
    }

    /// Applies model rules to every term.
    pub fn reduced(&self, rules: &Rules) -> Self {
        let mut out = Coeff::zero();
        for (f, c) in &self.terms {
            if let Some(r) = rules.reduce(f, *c) {
                out = out.add(&r);
            }
        }
        out.prune();
        out
    }

    fn add_term(&mut self, f: Factors, c: Complex64) {
        *self.terms.entry(f).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() > DROP_TOL);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[(Atom, i32)], &Complex64)> {
        self.terms.iter().map(|(f, c)| (f.as_slice(), c))
    }

    /// The constant value if the coefficient has no atoms.
    pub fn as_constant(&self) -> Option<Complex64> {
        match self.terms.len() {
            0 => Some(Complex64::new(0.0, 0.0)),
            1 => self.terms.get(&Vec::new()).copied(),
            _ => None,
        }
    }

    pub fn add(&self, other: &Coeff) -> Coeff {
        let mut out = self.clone();
        for (f, c) in &other.terms {
            out.add_term(f.clone(), *c);
        }
        out.prune();
        out
    }

    pub fn sub(&self, other: &Coeff) -> Coeff {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: impl Into<Complex64>) -> Coeff {
        let s = s.into();
        let mut out = Coeff::zero();
        for (f, c) in &self.terms {
            out.terms.insert(f.clone(), c * s);
        }
        out.prune();
        out
    }

    pub fn mul(&self, other: &Coeff) -> Coeff {
        let mut out = Coeff::zero();
        for (f1, c1) in &self.terms {
            for (f2, c2) in &other.terms {
                let mut f = Vec::with_capacity(f1.len() + f2.len());
                f.extend_from_slice(f1);
                f.extend_from_slice(f2);
                f.sort_by(|a, b| a.0.cmp(&b.0));
                merge_sorted(&mut f);
                out.add_term(f, c1 * c2);
            }
        }
        out.prune();
        out
    }

    pub fn powi(&self, n: u32) -> Coeff {
        let mut out = Coeff::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Exact inverse of a single product term; other shapes have no canonical inverse.
    pub fn inverse(&self) -> Result<Coeff> {
        if self.terms.len() != 1 {
            return Err(Error::Unsupported("division by a non-monomial coefficient".into()));
        }
        let (f, c) = self.terms.iter().next().unwrap();
        let f: Factors = f.iter().map(|&(a, e)| (a, -e)).collect();
        let mut terms = BTreeMap::new();
        terms.insert(f, c.inv());
        Ok(Coeff { terms })
    }

    /// Real power (a multiple of 1/2) of a single product term.
    pub fn pow_half(&self, e2: i32) -> Result<Coeff> {
        if e2 >= 0 && e2 % 2 == 0 {
            return Ok(self.powi((e2 / 2) as u32));
        }
        if self.terms.len() != 1 {
            return Err(Error::Unsupported("fractional power of a non-monomial coefficient".into()));
        }
        let (f, c) = self.terms.iter().next().unwrap();
        let mut out = Vec::new();
        for &(a, e) in f {
            let p = e * e2;
            if p % 2 != 0 {
                return Err(Error::Unsupported("power below half-integer resolution".into()));
            }
            out.push((a, p / 2));
        }
        merge_sorted(&mut out);
        let mut terms = BTreeMap::new();
        terms.insert(out, c.powf(e2 as f64 / 2.0));
        Ok(Coeff { terms })
    }

    fn derive(&self, rules: &Rules, d: impl Fn(Atom) -> Option<Atom>) -> Coeff {
        let mut out = Coeff::zero();
        for (f, c) in &self.terms {
            for (i, &(a, e2)) in f.iter().enumerate() {
                let Some(da) = d(a) else { continue };
                // d(a^{e}) = e a^{e-1} a'
                let mut nf = f.clone();
                nf[i].1 = e2 - 2;
                nf.push((da, 2));
                nf.sort_by(|x, y| x.0.cmp(&y.0));
                merge_sorted(&mut nf);
                if let Some(r) = rules.reduce(&nf, c * (e2 as f64 / 2.0)) {
                    out = out.add(&r);
                }
            }
        }
        out.prune();
        out
    }

    /// ∂_r
    pub fn d_r(&self, rules: &Rules) -> Coeff {
        self.derive(rules, |a| Some(a.d_r()))
    }

    /// ∂_{θ_i}
    pub fn d_theta(&self, i: usize, rules: &Rules) -> Coeff {
        self.derive(rules, |a| a.d_theta(i))
    }

    pub fn atoms(&self, into: &mut BTreeSet<Atom>) {
        for f in self.terms.keys() {
            for (a, _) in f {
                into.insert(*a);
            }
        }
    }

    pub fn eval(&self, vals: &AtomValues) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (f, c) in &self.terms {
            let mut p = 1.0;
            for (a, e2) in f {
                p *= half_pow(vals.get(a), *e2);
            }
            s += c * p;
        }
        s
    }

    pub fn eval_at(&self, env: &dyn AtomEnv, r: f64, theta: &[f64]) -> Result<Complex64> {
        let mut atoms = BTreeSet::new();
        self.atoms(&mut atoms);
        Ok(self.eval(&AtomValues::new(env, &atoms, r, theta)?))
    }

    pub fn to_expr(&self) -> CoeffExpr {
        let mut sum = Vec::new();
        for (f, c) in &self.terms {
            let mut prod = vec![CoeffExpr::Const { re: c.re, im: c.im }];
            for &(a, e2) in f {
                if e2 == 2 {
                    prod.push(CoeffExpr::Leaf(a));
                } else {
                    prod.push(CoeffExpr::Pow(Box::new(CoeffExpr::Leaf(a)), e2 as f64 / 2.0));
                }
            }
            sum.push(if prod.len() == 1 { prod.pop().unwrap() } else { CoeffExpr::Mul(prod) });
        }
        match sum.len() {
            0 => CoeffExpr::Const { re: 0.0, im: 0.0 },
            1 => sum.pop().unwrap(),
            _ => CoeffExpr::Add(sum),
        }
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (fs, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if c.im == 0.0 {
                write!(f, "{}", c.re)?;
            } else {
                write!(f, "({}{:+}i)", c.re, c.im)?;
            }
            for (a, e2) in fs {
                if *e2 == 2 {
                    write!(f, "·{a}")?;
                } else if e2 % 2 == 0 {
                    write!(f, "·{a}^{}", e2 / 2)?;
                } else {
                    write!(f, "·{a}^({}/2)", e2)?;
                }
            }
        }
        Ok(())
    }
}

/// Expression tree over (r, θ). The serialized form of coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffExpr {
    Const { re: f64, im: f64 },
    Leaf(Atom),
    Add(Vec<CoeffExpr>),
    Mul(Vec<CoeffExpr>),
    Div(Box<CoeffExpr>, Box<CoeffExpr>),
    /// Real exponent, a multiple of 1/2.
    Pow(Box<CoeffExpr>, f64),
    Dr(Box<CoeffExpr>),
    Dtheta(u8, Box<CoeffExpr>),
}

impl CoeffExpr {
    /// Normalizes to the canonical form. Fails on division by, or fractional
    /// powers of, sums.
    pub fn to_coeff(&self, rules: &Rules) -> Result<Coeff> {
        Ok(match self {
            CoeffExpr::Const { re, im } => Coeff::constant(Complex64::new(*re, *im)),
            CoeffExpr::Leaf(a) => Coeff::atom(*a).reduced(rules),
            CoeffExpr::Add(xs) => {
                let mut s = Coeff::zero();
                for x in xs {
                    s = s.add(&x.to_coeff(rules)?);
                }
                s
            }
            CoeffExpr::Mul(xs) => {
                let mut s = Coeff::one();
                for x in xs {
                    s = s.mul(&x.to_coeff(rules)?);
                }
                s
            }
            CoeffExpr::Div(a, b) => a.to_coeff(rules)?.mul(&b.to_coeff(rules)?.inverse()?),
            CoeffExpr::Pow(a, e) => {
                let e2 = (2.0 * e).round();
                if (2.0 * e - e2).abs() > 1e-12 {
                    return Err(Error::Unsupported(format!("exponent {e} is not a multiple of 1/2")));
                }
                a.to_coeff(rules)?.pow_half(e2 as i32)?.reduced(rules)
            }
            CoeffExpr::Dr(a) => a.to_coeff(rules)?.d_r(rules),
            CoeffExpr::Dtheta(i, a) => a.to_coeff(rules)?.d_theta(*i as usize, rules),
        })
    }

    /// Direct recursive evaluation. Derivative nodes go through the canonical form.
    pub fn eval(&self, env: &dyn AtomEnv, r: f64, theta: &[f64]) -> Result<Complex64> {
        Ok(match self {
            CoeffExpr::Const { re, im } => Complex64::new(*re, *im),
            CoeffExpr::Leaf(a) => Complex64::new(env.atom(a, r, theta)?, 0.0),
            CoeffExpr::Add(xs) => {
                let mut s = Complex64::new(0.0, 0.0);
                for x in xs {
                    s += x.eval(env, r, theta)?;
                }
                s
            }
            CoeffExpr::Mul(xs) => {
                let mut s = Complex64::new(1.0, 0.0);
                for x in xs {
                    s *= x.eval(env, r, theta)?;
                }
                s
            }
            CoeffExpr::Div(a, b) => a.eval(env, r, theta)? / b.eval(env, r, theta)?,
            CoeffExpr::Pow(a, e) => {
                let v = a.eval(env, r, theta)?;
                if e.fract() == 0.0 {
                    v.powi(*e as i32)
                } else {
                    v.powf(*e)
                }
            }
            CoeffExpr::Dr(_) | CoeffExpr::Dtheta(..) => self.to_coeff(&Rules::generic())?.eval_at(env, r, theta)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::warp::WarpFunction;

    fn model(w: WarpFunction) -> MetricModel {
        MetricModel::new(2, w)
    }

    #[test]
    fn log_derivative_relation() {
        // d/dr (w'/w) = w''/w - (w'/w)^2, checked through the registered atoms
        let g = Rules::generic();
        let lhs = Coeff::atom(Atom::LOG).d_r(&g);
        let rhs = Coeff::atom(Atom::Warp { k: 2 })
            .mul(&Coeff::w_pow(-2))
            .sub(&Coeff::atom_pow(Atom::LOG, 4));
        for warp in [WarpFunction::conical(), WarpFunction::custom("g", |r: f64| (-0.3 * r * r).exp())] {
            let m = model(warp);
            for r in [1.1, 2.5, 4.0] {
                let a = lhs.eval_at(&m, r, &[0.0]).unwrap();
                let b = rhs.eval_at(&m, r, &[0.0]).unwrap();
                assert!((a - b).norm() < 1e-6 * (1.0 + b.norm()), "{a} {b}");
            }
        }
    }

    #[test]
    fn rules_collapse_known_warps() {
        let c = Coeff::w_pow(1).d_r(&Rules::for_model(&model(WarpFunction::hyperbolic())));
        // d/dr w^{1/2} = -(1/2) w^{1/2} on the hyperbolic end
        let expect = Coeff::w_pow(1).scale(-0.5);
        assert_eq!(c, expect);
        let flat = Coeff::atom(Atom::LOG).reduced(&Rules::for_model(&model(WarpFunction::cylindrical())));
        assert!(flat.is_zero());
        let con = Rules::for_model(&model(WarpFunction::conical()));
        // d/dr (1/r) = -1/r^2 = -w^2
        assert_eq!(Coeff::w_pow(2).d_r(&con), Coeff::w_pow(4).scale(-1.0));
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let g = Rules::generic();
        let c = Coeff::w_pow(3).mul(&Coeff::atom(Atom::LOG)).add(&Coeff::atom(Atom::Warp { k: 1 }).scale(2.0));
        let dc = c.d_r(&g);
        let m = model(WarpFunction::custom("s", |r: f64| 2.0 + (0.7 * r).sin()));
        let r = 1.3;
        let h = 1e-4;
        let fd = (c.eval_at(&m, r + h, &[0.0]).unwrap() - c.eval_at(&m, r - h, &[0.0]).unwrap()) / (2.0 * h);
        let an = dc.eval_at(&m, r, &[0.0]).unwrap();
        assert!((fd - an).norm() < 1e-5, "{fd} {an}");
    }

    #[test]
    fn tree_roundtrip() {
        let g = Rules::generic();
        let c = Coeff::w_pow(-1).mul(&Coeff::atom(Atom::upper(0, 1))).scale(Complex64::new(0.5, -2.0)).add(&Coeff::one());
        let e = c.to_expr();
        assert_eq!(e.to_coeff(&g).unwrap(), c);
        let json = serde_json::to_string(&e).unwrap();
        let back: CoeffExpr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
        let div = CoeffExpr::Div(Box::new(CoeffExpr::Leaf(Atom::W)), Box::new(CoeffExpr::Add(vec![
            CoeffExpr::Leaf(Atom::W),
            CoeffExpr::Const { re: 1.0, im: 0.0 },
        ])));
        assert!(matches!(div.to_coeff(&g), Err(Error::Unsupported(_))));
        let m = model(WarpFunction::conical());
        let v = div.eval(&m, 2.0, &[0.0]).unwrap();
        assert!((v.re - 1.0 / 3.0).abs() < 1e-15);
    }
}
