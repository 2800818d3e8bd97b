//! Operator norm estimates for kernels and discretized operators.

pub mod kernel;
pub mod modal;
pub mod power;
pub mod rank_one;
pub mod remainder;
pub mod stress;

pub use kernel::{composite_nodes, l2_linf_bound, schur_bound, schur_bound_fn, weighted_conjugate, KernelOnMeasure, MeasureShift, SchurBound};
pub use modal::ModalOperator;
pub use power::{lp_norm, LinearMap, opnorm_p, opnorm_p_with, power2, probe_lower, rank_one_exact, Method, NormReport, PowerOptions};
pub use rank_one::{rank_one_growth, RankOneRow, RankOneTable, HyperbolicKernel};
pub use remainder::{remainder_probes, truncation_probes, RemainderProbe, TruncationProbe};
pub use stress::{commutator_norm, commutator_stress, resolvent_l2_linf, sobolev_scaling, CommutatorIndex, CommutatorRow, CommutatorTable, SobolevPoint, SobolevReport, SobolevSetup, StressSetup};
