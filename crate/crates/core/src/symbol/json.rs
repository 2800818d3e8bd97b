use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::coeff::{CoeffExpr, Rules};
use super::funcalc::FuncSymbol;
use super::poly::{Mono, Polynomial};
use super::symbol::{Symbol, SymbolKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub j: u8,
    pub alpha: [u8; 3],
    pub coeff: CoeffExpr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleJson {
    /// Pole power is 1 + k.
    pub k: u32,
    pub terms: Vec<TermJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolJson {
    pub order: i32,
    pub kind: SymbolKind,
    pub dim: usize,
    pub terms: Vec<TermJson>,
    pub poles: Vec<PoleJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<Vec<TermJson>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuncSymbolJson {
    pub level: usize,
    pub dim: usize,
    /// Pairs (k, D_k) of a_j = Σ_k D_k φ^(k)∘p₂.
    pub derivs: Vec<PoleJson>,
    pub p2: Vec<TermJson>,
}

fn terms_to_json(p: &Polynomial) -> Vec<TermJson> {
    p.terms().map(|(m, c)| TermJson { j: m.j, alpha: m.alpha, coeff: c.to_expr() }).collect()
}

fn terms_from_json(ts: &[TermJson], rules: &Rules) -> Result<Polynomial> {
    let mut out = Vec::with_capacity(ts.len());
    for t in ts {
        out.push((Mono { j: t.j, alpha: t.alpha }, t.coeff.to_coeff(rules)?));
    }
    Ok(Polynomial::from_terms(out))
}

impl Symbol {
    pub fn to_json(&self) -> SymbolJson {
        SymbolJson {
            order: self.order,
            kind: self.kind(),
            dim: self.dim,
            terms: terms_to_json(&self.poly),
            poles: self.pole_terms().map(|(k, d)| PoleJson { k, terms: terms_to_json(d) }).collect(),
            p2: self.p2.as_ref().map(|p| terms_to_json(p)),
        }
    }

    pub fn from_json(js: &SymbolJson, rules: &Rules) -> Result<Symbol> {
        let poly = terms_from_json(&js.terms, rules)?;
        let mut poles = BTreeMap::new();
        for p in &js.poles {
            poles.insert(p.k + 1, terms_from_json(&p.terms, rules)?);
        }
        let p2 = match &js.p2 {
            Some(ts) => Some(Arc::new(terms_from_json(ts, rules)?)),
            None if !poles.is_empty() => return Err(Error::Config("rational symbol without p2".into())),
            None => None,
        };
        Ok(Symbol { dim: js.dim, order: js.order, poly, poles, p2 })
    }
}

impl FuncSymbol {
    pub fn to_json(&self) -> FuncSymbolJson {
        FuncSymbolJson {
            level: self.level,
            dim: self.dim,
            derivs: self.terms.iter().map(|(k, d)| PoleJson { k: *k, terms: terms_to_json(d) }).collect(),
            p2: terms_to_json(&self.p2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::laplacian::Which;
    use crate::geometry::metric::MetricModel;
    use crate::geometry::warp::WarpFunction;
    use crate::symbol::parametrix::parametrix;

    #[test]
    fn roundtrip_parametrix_levels() {
        let m = MetricModel::new(2, WarpFunction::conical());
        let par = parametrix(&m, Which::Tilde, 2).unwrap();
        for q in &par.levels {
            let js = serde_json::to_string(&q.to_json()).unwrap();
            let back: SymbolJson = serde_json::from_str(&js).unwrap();
            assert_eq!(&Symbol::from_json(&back, &par.lap.rules).unwrap(), q);
        }
    }
}
