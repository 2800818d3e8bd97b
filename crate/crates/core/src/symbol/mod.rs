pub mod coeff;
pub mod eval;
pub mod funcalc;
pub mod json;
pub mod parametrix;
pub mod poly;
#[allow(clippy::module_inception)]
pub mod symbol;

pub use coeff::{Atom, AtomEnv, Coeff, CoeffExpr, Rules};
pub use eval::{eval_func_symbol, eval_symbol};
pub use funcalc::{funcalc_symbols, FuncSymbol};
pub use parametrix::{parametrix, parametrix_from, Parametrix};
pub use poly::{Mono, Polynomial};
pub use symbol::{apply_dw, sharp, NumSymbol, Symbol, SymbolKind};
