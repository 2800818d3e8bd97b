//! Lᵖ probes of the expansion remainder and of φ(h²P) on truncated ends.

use serde::{Deserialize, Serialize};

use super::modal::ModalOperator;
use super::power::{probe_lower, PowerOptions};
use crate::discrete::{assemble_with, funcalc_eigen, ExpansionResidual, FdOrder, GridSpec, ResidualSetup};
use crate::error::{Error, Result};
use crate::funcs::SpectralKind;
use crate::geometry::{MetricModel, TemperateWeight, Which};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderProbe {
    pub h: f64,
    pub p: f64,
    pub n_r: usize,
    /// Lower probe of ‖h^{-(N+1)} R_N‖_p.
    pub unweighted: f64,
    /// Lower probe of ‖W⁻¹ h^{-(N+1)} R_N W‖_p.
    pub weighted: f64,
    pub iterations: usize,
}

/// Probes the scaled remainder of the depth-`n` expansion, with and without
/// conjugation by `weight`, for every h and p.
pub fn remainder_probes(
    model: &MetricModel,
    which: Which,
    phi: SpectralKind,
    n: usize,
    h_list: &[f64],
    p_list: &[f64],
    weight: &TemperateWeight,
    setup: &ResidualSetup,
    opts: &PowerOptions,
) -> Result<Vec<RemainderProbe>> {
    let er = ExpansionResidual::new(model, which, phi, n)?;
    let mut out = Vec::new();
    for &h in h_list {
        let op = er.remainder_operator(h, setup, n)?;
        let plain: Vec<(f64, usize)> = p_list.iter().map(|&p| probe_lower(&op, p, opts)).collect();
        let op = op.with_weights(|r| 1.0 / weight.eval(r), |r| weight.eval(r));
        for (&p, (u, _)) in p_list.iter().zip(plain) {
            let (w, it) = probe_lower(&op, p, opts);
            out.push(RemainderProbe { h, p, n_r: op.n_r, unweighted: u, weighted: w, iterations: it });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationProbe {
    pub t: f64,
    pub p: f64,
    pub n_r: usize,
    pub estimate: f64,
}

/// Lower probes of ‖φ(h²P)‖_{Lᵖ(dg)} for the plain operator on [r0, T] with
/// Dirichlet walls, one per truncation T.
pub fn truncation_probes(model: &MetricModel, phi: SpectralKind, h: f64, r0: f64, t_list: &[f64], p: f64, n_theta: usize, opts: &PowerOptions) -> Result<Vec<TruncationProbe>> {
    if t_list.iter().any(|&t| !(t > r0)) {
        return Err(Error::Domain(format!("truncations must exceed r0 = {r0}")));
    }
    let mut out = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let grid = GridSpec::with_step(r0, t, (h / 4.0).min(0.1), n_theta, h);
        let op = assemble_with(model, &grid, Which::Plain, FdOrder::Eighth)?;
        let blocks = funcalc_eigen(&op, &phi)?;
        let label = format!("phi_dg_T{t}");
        let mo = ModalOperator::new(label, &grid.radii(), grid.dr(), n_theta, op.density.clone(), blocks.modes, blocks.blocks, None)?;
        let (estimate, _) = probe_lower(&mo, p, opts);
        out.push(TruncationProbe { t, p, n_r: grid.n_r, estimate });
    }
    Ok(out)
}
