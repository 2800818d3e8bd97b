use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discrete::{FdOrder, HsContour, ResidualSetup};
use crate::error::{Error, Result};
use crate::funcs::{SpectralFunction, SpectralKind};
use crate::geometry::{TemperateWeight, WarpFunction, WeightKind, Which};
use crate::norms::{CommutatorIndex, SobolevSetup, StressSetup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    CheckMetric,
    Parametrix,
    Funcalc,
    Convergence,
    Norms,
    HyperbolicAppendix,
    Commutators,
    Sobolev,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::CheckMetric,
        ExperimentId::Parametrix,
        ExperimentId::Funcalc,
        ExperimentId::Convergence,
        ExperimentId::Norms,
        ExperimentId::HyperbolicAppendix,
        ExperimentId::Commutators,
        ExperimentId::Sobolev,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ExperimentId::CheckMetric => "check-metric",
            ExperimentId::Parametrix => "parametrix",
            ExperimentId::Funcalc => "funcalc",
            ExperimentId::Convergence => "convergence",
            ExperimentId::Norms => "norms",
            ExperimentId::HyperbolicAppendix => "hyperbolic-appendix",
            ExperimentId::Commutators => "commutators",
            ExperimentId::Sobolev => "sobolev",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Warp ids, resolved through `WarpFunction::from_id`.
    pub warps: Vec<String>,
    pub dim: usize,
    /// Inner radius R of the end.
    pub r_inner: f64,
    /// Width of the diagonal cutoff.
    pub epsilon: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { warps: vec!["cylindrical".into(), "hyperbolic".into()], dim: 2, r_inner: 1.0, epsilon: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub r0: f64,
    pub r1: f64,
    pub n_r: usize,
    pub n_theta: usize,
    /// Fixed h for the single-grid experiments.
    pub h: f64,
    pub order: FdOrder,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { r0: 1.0, r1: 6.0, n_r: 200, n_theta: 16, h: 0.1, order: FdOrder::Eighth }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Sorted descending by validation.
    pub h_list: Vec<f64>,
    /// Spectral parameters as [re, im].
    pub z_list: Vec<[f64; 2]>,
    pub t_list: Vec<f64>,
    pub p_list: Vec<f64>,
    pub weights: Vec<TemperateWeight>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            h_list: vec![0.2, 0.14, 0.1, 0.07, 0.05, 0.035, 0.02],
            z_list: vec![[0.0, 1.0]],
            t_list: vec![20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0],
            p_list: vec![4.0 / 3.0, 4.0],
            weights: vec![TemperateWeight::new("poly2", WeightKind::Poly { power: 2.0 })],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Also write gnuplot-ready .dat files.
    pub plot_data: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("endcalc-out"), plot_data: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckMetricSection {
    pub interval: (f64, f64),
    pub samples: usize,
    pub tol: f64,
}

impl Default for CheckMetricSection {
    fn default() -> Self {
        Self { interval: (1.0, 40.0), samples: 400, tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParametrixSection {
    pub which: Which,
    pub epsilon: f64,
    pub depths: Vec<usize>,
    pub steps_per_h: f64,
}

impl Default for ParametrixSection {
    fn default() -> Self {
        Self { which: Which::Plain, epsilon: 0.5, depths: vec![0, 1, 2], steps_per_h: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuncalcSection {
    pub scalars: Vec<f64>,
    pub which: Which,
    pub warp: String,
    /// Contour tolerance for the operator comparison; the scalar check uses `contour.tol`.
    pub operator_tol: f64,
    pub dbar_orders: Vec<usize>,
    pub dbar_points: Vec<f64>,
}

impl Default for FuncalcSection {
    fn default() -> Self {
        Self { scalars: vec![0.0, 2.0, 10.0], which: Which::Tilde, warp: "hyperbolic".into(), operator_tol: 1e-5, dbar_orders: vec![2, 3, 4], dbar_points: vec![0.3, 1.0, 2.5] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub which: Which,
    pub epsilon: f64,
    /// Deepest expansion; every depth up to it is reported.
    pub depth: usize,
    pub steps_per_h: f64,
    pub resolved_band: (f64, f64),
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self { which: Which::Tilde, epsilon: 1.5, depth: 1, steps_per_h: 8.0, resolved_band: (4.0, 8.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsSection {
    pub warp: String,
    pub which: Which,
    pub epsilon: f64,
    pub depth: usize,
    pub h_list: Vec<f64>,
    pub steps_per_h: f64,
    pub resolved_band: (f64, f64),
    /// Truncations T of the unweighted dg-measure probe.
    pub truncations: Vec<f64>,
    pub truncation_h: f64,
    pub truncation_p: f64,
}

impl Default for NormsSection {
    fn default() -> Self {
        Self {
            warp: "hyperbolic".into(),
            which: Which::Tilde,
            epsilon: 1.5,
            depth: 1,
            h_list: vec![0.2, 0.1, 0.05, 0.02],
            steps_per_h: 4.0,
            resolved_band: (2.0, 4.0),
            truncations: vec![4.0, 6.0, 8.0, 10.0, 12.0],
            truncation_h: 0.2,
            truncation_p: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankOneSection {
    pub p: f64,
    pub epsilon: f64,
    /// p of the control run, where everything stays bounded.
    pub control_p: f64,
}

impl Default for RankOneSection {
    fn default() -> Self {
        Self { p: 4.0, epsilon: 0.25, control_p: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommutatorSection {
    pub warp: String,
    pub setup: StressSetup,
    pub refinements: Vec<usize>,
    pub indices: Vec<CommutatorIndex>,
}

impl Default for CommutatorSection {
    fn default() -> Self {
        let idx = CommutatorIndex::new;
        Self {
            warp: "hyperbolic".into(),
            setup: StressSetup::default(),
            refinements: vec![100, 200, 400],
            indices: vec![
                CommutatorIndex::ZERO,
                idx([1, 0], [0, 0], [0, 0]),
                idx([0, 0], [1, 0], [0, 0]),
                idx([0, 0], [0, 1], [0, 0]),
                idx([0, 0], [0, 1], [0, 1]),
                idx([1, 0], [1, 0], [0, 0]),
                idx([0, 0], [2, 0], [0, 0]),
                idx([2, 0], [0, 0], [0, 0]),
                idx([0, 0], [0, 2], [0, 2]),
                idx([0, 0], [1, 1], [1, 1]),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SobolevSection {
    pub setup: SobolevSetup,
    pub k: u32,
    pub which: Which,
    /// Imaginary parts t of the z = i·t sweep at the first h.
    pub t_list: Vec<f64>,
}

impl Default for SobolevSection {
    fn default() -> Self {
        Self { setup: SobolevSetup::default(), k: 1, which: Which::Tilde, t_list: vec![0.5, 1.0, 2.0, 4.0] }
    }
}

/// Pass/fail thresholds for the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub hs_scalar: f64,
    pub hs_vs_eigen: f64,
    /// Exponent margin below M.
    pub dbar_margin: f64,
    /// Slope margin below N + 1.
    pub slope_margin: f64,
    pub rank_one_rate_rel: f64,
    pub rank_one_flat_rel: f64,
    pub sobolev_slope: f64,
    pub commutator_variation: f64,
    pub weighted_band: f64,
    pub truncation_growth: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            hs_scalar: 1e-6,
            hs_vs_eigen: 1e-4,
            dbar_margin: 0.1,
            slope_margin: 0.2,
            rank_one_rate_rel: 0.1,
            rank_one_flat_rel: 0.05,
            sobolev_slope: -1.2,
            commutator_variation: 0.1,
            weighted_band: 2.0,
            truncation_growth: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiments: Vec<ExperimentId>,
    pub seed: u64,
    pub model: ModelSection,
    pub grid: GridSection,
    pub phi: SpectralKind,
    pub contour: HsContour,
    pub sweeps: SweepSection,
    pub output: OutputSection,
    pub check_metric: CheckMetricSection,
    pub parametrix: ParametrixSection,
    pub funcalc: FuncalcSection,
    pub convergence: ConvergenceSection,
    pub norms: NormsSection,
    pub hyperbolic_appendix: RankOneSection,
    pub commutators: CommutatorSection,
    pub sobolev: SobolevSection,
    pub thresholds: Thresholds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiments: Vec::new(),
            seed: 7,
            model: ModelSection::default(),
            grid: GridSection::default(),
            phi: SpectralKind::rational(),
            contour: HsContour::default(),
            sweeps: SweepSection::default(),
            output: OutputSection::default(),
            check_metric: CheckMetricSection::default(),
            parametrix: ParametrixSection::default(),
            funcalc: FuncalcSection::default(),
            convergence: ConvergenceSection::default(),
            norms: NormsSection::default(),
            hyperbolic_appendix: RankOneSection::default(),
            commutators: CommutatorSection::default(),
            sobolev: SobolevSection::default(),
            thresholds: Thresholds::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Resolves ids, checks ranges and sorts the h lists descending.
    pub fn validate(&mut self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.model.warps.is_empty() {
            return bad("model.warps is empty".into());
        }
        for id in self.model.warps.iter().chain([&self.funcalc.warp, &self.norms.warp, &self.commutators.warp]) {
            WarpFunction::from_id(id).map_err(|_| Error::Config(format!("unknown warp id '{id}'")))?;
        }
        if !(2..=4).contains(&self.model.dim) {
            return bad(format!("model.dim = {} outside 2..=4", self.model.dim));
        }
        for (name, eps) in [("model", self.model.epsilon), ("parametrix", self.parametrix.epsilon), ("convergence", self.convergence.epsilon), ("norms", self.norms.epsilon)] {
            if !(eps > 0.0) {
                return bad(format!("{name}.epsilon must be positive"));
            }
        }
        if !(self.phi.sigma() > 0.0) {
            return bad(format!("phi {} needs decay order σ > 0", self.phi.id()));
        }
        if self.contour.order < 1 {
            return bad("contour.order must be at least 1".into());
        }
        for list in [&mut self.sweeps.h_list, &mut self.norms.h_list] {
            if list.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
                return bad("every h must lie in (0, 1]".into());
            }
            list.sort_by(|a, b| b.total_cmp(a));
        }
        if self.sweeps.z_list.is_empty() || self.sweeps.z_list.iter().any(|z| z[1] == 0.0) {
            return bad("sweeps.z_list needs non-real entries".into());
        }
        if self.sweeps.p_list.iter().chain([&self.norms.truncation_p, &self.hyperbolic_appendix.p, &self.hyperbolic_appendix.control_p]).any(|&p| !(p > 1.0 && p.is_finite())) {
            return bad("every p must lie in (1, ∞)".into());
        }
        if self.sweeps.weights.is_empty() {
            return bad("sweeps.weights is empty".into());
        }
        if self.grid.n_r < 8 || self.grid.n_theta < 2 || self.grid.n_theta % 2 != 0 || !(self.grid.r1 > self.grid.r0) {
            return bad("grid needs n_r >= 8, even n_theta >= 2 and r1 > r0".into());
        }
        for idx in &self.commutators.indices {
            idx.validate().map_err(|e| Error::Config(format!("commutator index {}: {e}", idx.label())))?;
        }
        if self.sobolev.k == 0 {
            return bad("sobolev.k must be positive".into());
        }
        let mut seen = self.experiments.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.experiments.len() {
            return bad("duplicate experiment id".into());
        }
        Ok(())
    }

    pub fn z_list(&self) -> Vec<Complex64> {
        self.sweeps.z_list.iter().map(|z| Complex64::new(z[0], z[1])).collect()
    }

    pub fn residual_setup(&self, steps_per_h: f64, resolved_band: (f64, f64)) -> ResidualSetup {
        ResidualSetup { steps_per_h, resolved_band, n_theta: self.grid.n_theta, ..ResidualSetup::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert!(cfg.experiments.is_empty());
    }

    #[test]
    fn unknown_warp_fails_fast() {
        let e = ExperimentConfig::from_toml("[model]\nwarps = [\"hyperbolic\", \"saddle\"]").unwrap_err();
        assert!(e.to_string().contains("saddle"), "{e}");
    }

    #[test]
    fn h_lists_sorted_descending() {
        let cfg = ExperimentConfig::from_toml("[sweeps]\nh_list = [0.05, 0.2, 0.1, 0.14]").unwrap();
        assert_eq!(cfg.sweeps.h_list, vec![0.2, 0.14, 0.1, 0.05]);
    }

    #[test]
    fn phi_and_sections_parse() {
        let text = r#"
experiments = ["funcalc", "hyperbolic-appendix"]
[phi]
kind = "smooth-bump"
center = 1.0
half_width = 0.5
[contour]
order = 5
[commutators]
refinements = [50, 100]
indices = [{ alpha = [1, 0], beta = [0, 0], gamma = [0, 0] }]
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.experiments, vec![ExperimentId::Funcalc, ExperimentId::HyperbolicAppendix]);
        assert_eq!(cfg.contour.order, 5);
        assert_eq!(cfg.contour.tol, HsContour::default().tol);
        assert_eq!(cfg.commutators.indices.len(), 1);
        assert!(ExperimentConfig::from_toml("experiments = [\"plot\"]").is_err());
        assert!(ExperimentConfig::from_toml("[phi]\nkind = \"rational-decay\"\npower = -1.0").is_err());
    }
}
