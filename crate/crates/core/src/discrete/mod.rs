pub mod assemble;
pub mod banded;
pub mod grid;

pub use assemble::{assemble, assemble_with, resolve, FdOrder, OperatorRep, ShiftedSolver};
pub use grid::GridSpec;
pub mod eigen;
pub use eigen::{funcalc_eigen, funcalc_eigen_mode, ModeBlocks};
pub mod hs;
pub use hs::{dbar_exponent, funcalc_hs, funcalc_hs_banded, funcalc_hs_scalar, hs_rule, HsContour, HsRule};
pub mod quantize;
pub use quantize::{quantize, AngularCutoff, ColumnCutoff, QuantizeOptions, QuantizedOp, Source};
pub mod residual;
pub use residual::{ExpansionResidual, ParametrixResidual, ResidualCase, ResidualSetup};
