use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentId};
use super::fit::{fit_slope, SlopeFit};
use crate::discrete::{assemble_with, HsContour, dbar_exponent, funcalc_eigen, funcalc_hs, funcalc_hs_scalar, ExpansionResidual, GridSpec, ParametrixResidual};
use crate::error::{Error, Result};
use crate::funcs::SpectralFunction;
use crate::geometry::{verify_temperate, verify_warp_conditions, MetricModel, TemperateFit, WarpFunction, Which};
use crate::norms::{rank_one_growth, commutator_stress, remainder_probes, sobolev_scaling, truncation_probes, PowerOptions};
use crate::symbol::parametrix;

pub const CSV_HEADER: &str = "# endcalc-csv v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// value < threshold
    Below,
    /// value >= threshold
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Acceptance criterion this check belongs to; 0 for diagnostics outside the suite.
    pub criterion: u8,
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(criterion: u8, name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let pass = match relation {
            Relation::Below => value < threshold,
            Relation::AtLeast => value >= threshold,
        };
        Self { criterion, name: name.into(), value, relation, threshold, pass }
    }

    pub fn flag(criterion: u8, name: impl Into<String>, ok: bool) -> Self {
        Self::new(criterion, name, if ok { 1.0 } else { 0.0 }, Relation::AtLeast, 1.0)
    }
}

/// One CSV file: a column list and rows already formatted.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Self { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width in {}", self.name);
        self.rows.push(row);
    }
}

/// Plot data: named (x, y) series, one gnuplot index block each.
#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub name: String,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentData {
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: ExperimentId,
    pub outputs: Vec<PathBuf>,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub threads: usize,
    pub experiments: Vec<ExperimentRecord>,
    pub summary: Option<PathBuf>,
    pub wall_seconds: f64,
}

impl RunManifest {
    pub fn ok(&self) -> bool {
        self.experiments.iter().all(|e| e.error.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub checks: Vec<Check>,
    pub failed_experiments: Vec<(ExperimentId, String)>,
    pub all_pass: bool,
}

/// SHA-256 of the canonical JSON form of the config, without the output section.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output = Default::default();
    let bytes = serde_json::to_vec(&c).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn which_id(w: Which) -> &'static str {
    match w {
        Which::Plain => "plain",
        Which::Tilde => "tilde",
    }
}

fn model(cfg: &ExperimentConfig, warp: &str, epsilon: f64) -> Result<MetricModel> {
    let m = MetricModel::new(cfg.model.dim, WarpFunction::from_id(warp)?).with_radius(cfg.model.r_inner).with_epsilon(epsilon);
    m.validate()?;
    Ok(m)
}

fn z0(cfg: &ExperimentConfig) -> Complex64 {
    cfg.z_list()[0]
}

fn slope_row(table: &mut Table, series: &str, fit: &std::result::Result<SlopeFit, String>) {
    match fit {
        Ok(f) => table.push(vec![series.into(), fmt(f.slope), fmt(f.width), f.used.to_string(), f.warnings.join("; ")]),
        Err(e) => table.push(vec![series.into(), "NaN".into(), "NaN".into(), "0".into(), e.clone()]),
    }
}

fn fit_or_nan(series: &[(f64, f64)]) -> (f64, std::result::Result<SlopeFit, String>) {
    match fit_slope(series) {
        Ok(f) => (f.slope, Ok(f)),
        Err(e) => (f64::NAN, Err(e.to_string())),
    }
}

/// ‖M^{1/2} A M^{-1/2}‖₂ for a block acting on L²(density).
fn weighted_block_norm(a: &DMatrix<Complex64>, density: &[f64]) -> f64 {
    let s: Vec<f64> = density.iter().map(|d| d.sqrt()).collect();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s[i] / s[j]).singular_values().max()
}

fn check_metric(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let sec = &cfg.check_metric;
    let mut conds = Table::new("check-metric_conditions", &["warp", "condition", "k", "constant", "constant_half", "pass"]);
    let mut tensor = Table::new("check-metric_tensor", &["warp", "min_eigenvalue"]);
    let mut weights = Table::new("check-metric_weights", &["weight", "temperate", "c", "m"]);
    let mut checks = Vec::new();
    for id in &cfg.model.warps {
        let m = model(cfg, id, cfg.model.epsilon)?;
        let rep = verify_warp_conditions(&m.warp, sec.interval, sec.samples, sec.tol, cfg.seed)?;
        for c in &rep.checks {
            conds.push(vec![id.clone(), c.condition.clone(), c.k.map_or(String::new(), |k| k.to_string()), fmt(c.constant), fmt(c.constant_half), c.pass.to_string()]);
        }
        checks.push(Check::flag(0, format!("warp_conditions_{id}"), rep.pass));
        let min_eig = m.check_metric_tensor(sec.interval, sec.samples.min(64))?;
        tensor.push(vec![id.clone(), fmt(min_eig)]);
    }
    for w in &cfg.sweeps.weights {
        match verify_temperate(w, sec.interval, sec.samples.min(200))? {
            TemperateFit::Fitted { c, m } => weights.push(vec![w.id.clone(), "true".into(), fmt(c), fmt(m)]),
            TemperateFit::Failed { .. } => weights.push(vec![w.id.clone(), "false".into(), "NaN".into(), "NaN".into()]),
        }
    }
    Ok(ExperimentData { tables: vec![conds, tensor, weights], plots: Vec::new(), checks })
}

fn parametrix_exp(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let sec = &cfg.parametrix;
    let z = z0(cfg);
    let setup = cfg.residual_setup(sec.steps_per_h, (4.0, 8.0));
    let mut rows = Table::new("parametrix_residuals", &["warp", "which", "n", "h", "n_r", "norm", "scaled", "converged"]);
    let mut fits = Table::new("parametrix_slopes", &["series", "slope", "width", "used", "warnings"]);
    let mut plot = Plot { name: "parametrix".into(), ..Default::default() };
    let mut checks = Vec::new();
    for id in &cfg.model.warps {
        let m = model(cfg, id, sec.epsilon)?;
        for &n in &sec.depths {
            let pr = ParametrixResidual::new(&m, sec.which, n)?;
            let mut series = Vec::new();
            for &h in &cfg.sweeps.h_list {
                let c = pr.at(h, z, &setup)?;
                rows.push(vec![id.clone(), which_id(sec.which).into(), n.to_string(), fmt(h), c.n_r.to_string(), fmt(c.norm), fmt(c.scaled), c.converged.to_string()]);
                series.push((h, c.norm));
            }
            let name = format!("{id}_n{n}");
            let (slope, fit) = fit_or_nan(&series);
            slope_row(&mut fits, &name, &fit);
            checks.push(Check::new(4, format!("parametrix_slope_{name}"), slope, Relation::AtLeast, (n + 1) as f64 - cfg.thresholds.slope_margin));
            plot.series.push((name, series));
        }
    }
    // level structure of the symbols themselves
    let mut levels = Table::new("parametrix_levels", &["warp", "which", "j", "degrees_ok", "zero"]);
    let mut structure_ok = true;
    for id in &cfg.model.warps {
        let m = model(cfg, id, sec.epsilon)?;
        for which in [Which::Plain, Which::Tilde] {
            let par = parametrix(&m, which, 2)?;
            for (j, q) in par.levels.iter().enumerate() {
                let ok = q.check_level_degrees(j as u32).is_ok();
                structure_ok &= ok;
                levels.push(vec![id.clone(), which_id(which).into(), j.to_string(), ok.to_string(), q.is_zero().to_string()]);
            }
        }
    }
    checks.push(Check::flag(6, "level_degrees", structure_ok));
    let flat = parametrix(&model(cfg, "cylindrical", sec.epsilon)?, Which::Plain, 2)?;
    checks.push(Check::flag(6, "flat_cylinder_corrections_vanish", flat.levels[1..].iter().all(|q| q.is_zero())));
    Ok(ExperimentData { tables: vec![rows, fits, levels], plots: vec![plot], checks })
}

fn funcalc_exp(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let sec = &cfg.funcalc;
    let th = &cfg.thresholds;
    let phi = &cfg.phi;
    let mut checks = Vec::new();
    let mut scalars = Table::new("funcalc_scalar", &["lambda", "hs_re", "hs_im", "exact", "error"]);
    let mut worst: f64 = 0.0;
    for &lam in &sec.scalars {
        let v = funcalc_hs_scalar(lam, phi, &cfg.contour)?;
        let err = (v - phi.value(lam)).norm();
        worst = worst.max(err);
        scalars.push(vec![fmt(lam), fmt(v.re), fmt(v.im), fmt(phi.value(lam).re), fmt(err)]);
    }
    checks.push(Check::new(1, "hs_scalar_error", worst, Relation::Below, th.hs_scalar));

    let g = &cfg.grid;
    let m = model(cfg, &sec.warp, cfg.model.epsilon)?;
    let grid = GridSpec::new(g.r0, g.r1, g.n_r, g.n_theta, g.h);
    let op = assemble_with(&m, &grid, sec.which, g.order)?;
    let hs = funcalc_hs(&op, phi, &HsContour { tol: sec.operator_tol, ..cfg.contour })?;
    let ex = funcalc_eigen(&op, phi)?;
    let mut modes = Table::new("funcalc_hs_vs_eigen", &["mode", "difference"]);
    let mut diff: f64 = 0.0;
    for (k, &mode) in hs.modes.iter().enumerate() {
        let d = weighted_block_norm(&(&hs.blocks[k] - &ex.blocks[k]), &op.density);
        diff = diff.max(d);
        modes.push(vec![mode.to_string(), fmt(d)]);
    }
    checks.push(Check::new(2, "hs_vs_eigen", diff, Relation::Below, th.hs_vs_eigen));

    let mut dbar = Table::new("funcalc_dbar", &["order", "exponent"]);
    for &order in &sec.dbar_orders {
        let e = dbar_exponent(phi, order, &sec.dbar_points);
        dbar.push(vec![order.to_string(), fmt(e)]);
        checks.push(Check::new(3, format!("dbar_exponent_m{order}"), e, Relation::AtLeast, order as f64 - th.dbar_margin));
    }
    Ok(ExperimentData { tables: vec![scalars, modes, dbar], plots: Vec::new(), checks })
}

fn convergence_exp(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let sec = &cfg.convergence;
    let setup = cfg.residual_setup(sec.steps_per_h, sec.resolved_band);
    let mut rows = Table::new("convergence_residuals", &["warp", "which", "n", "h", "n_r", "norm", "scaled", "converged"]);
    let mut fits = Table::new("convergence_slopes", &["series", "slope", "width", "used", "warnings"]);
    let mut plot = Plot { name: "convergence".into(), ..Default::default() };
    let mut checks = Vec::new();
    for id in &cfg.model.warps {
        let m = model(cfg, id, sec.epsilon)?;
        let er = ExpansionResidual::new(&m, sec.which, cfg.phi, sec.depth)?;
        let mut series = vec![Vec::new(); sec.depth + 1];
        for &h in &cfg.sweeps.h_list {
            for c in er.at_each_depth(h, &setup)? {
                rows.push(vec![id.clone(), which_id(sec.which).into(), c.n.to_string(), fmt(h), c.n_r.to_string(), fmt(c.norm), fmt(c.scaled), c.converged.to_string()]);
                series[c.n].push((h, c.norm));
            }
        }
        for (n, s) in series.into_iter().enumerate() {
            let name = format!("{id}_n{n}");
            let (slope, fit) = fit_or_nan(&s);
            slope_row(&mut fits, &name, &fit);
            checks.push(Check::new(5, format!("expansion_slope_{name}"), slope, Relation::AtLeast, (n + 1) as f64 - cfg.thresholds.slope_margin));
            plot.series.push((name, s));
        }
    }
    Ok(ExperimentData { tables: vec![rows, fits], plots: vec![plot], checks })
}

fn norms_exp(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let sec = &cfg.norms;
    let th = &cfg.thresholds;
    let m = model(cfg, &sec.warp, sec.epsilon)?;
    let setup = cfg.residual_setup(sec.steps_per_h, sec.resolved_band);
    let opts = PowerOptions { seed: cfg.seed, ..Default::default() };
    let cols = ["task_id", "weight_id", "p", "method", "T_or_h", "estimate", "converged", "fitted_rate"];
    let mut reports = Table::new("norms_reports", &cols);
    let mut plot = Plot { name: "norms".into(), ..Default::default() };
    let mut checks = Vec::new();
    for (wi, w) in cfg.sweeps.weights.iter().enumerate() {
        let probes = remainder_probes(&m, sec.which, cfg.phi, sec.depth, &sec.h_list, &cfg.sweeps.p_list, w, &setup, &opts)?;
        for &p in &cfg.sweeps.p_list {
            let sel: Vec<_> = probes.iter().filter(|r| r.p == p).collect();
            for r in &sel {
                let task = format!("remainder_{}_n{}", sec.warp, sec.depth);
                reports.push(vec![task.clone(), "one".into(), fmt(p), "probe-lower".into(), fmt(r.h), fmt(r.unweighted), "true".into(), String::new()]);
                reports.push(vec![task, w.id.clone(), fmt(p), "probe-lower".into(), fmt(r.h), fmt(r.weighted), "true".into(), String::new()]);
            }
            let vals: Vec<f64> = sel.iter().map(|r| r.weighted).collect();
            let band = vals.iter().cloned().fold(0.0, f64::max) / vals.iter().cloned().fold(f64::INFINITY, f64::min);
            // only the first weight carries a verdict
            if wi == 0 {
                checks.push(Check::new(10, format!("weighted_band_{}_p{p:.4}", w.id), band, Relation::Below, th.weighted_band));
            }
            plot.series.push((format!("{}_p{p:.4}", w.id), sel.iter().map(|r| (r.h, r.weighted)).collect()));
        }
    }
    let trunc = truncation_probes(&m, cfg.phi, sec.truncation_h, cfg.model.r_inner, &sec.truncations, sec.truncation_p, cfg.grid.n_theta, &opts)?;
    let xs: Vec<f64> = trunc.iter().map(|t| t.t).collect();
    let ys: Vec<f64> = trunc.iter().map(|t| t.estimate.ln()).collect();
    let rate = if trunc.len() >= 2 { crate::norms::rank_one::ls_slope(&xs, &ys) } else { f64::NAN };
    for t in &trunc {
        reports.push(vec![format!("phi_dg_{}_h{}", sec.warp, sec.truncation_h), "one".into(), fmt(t.p), "probe-lower".into(), fmt(t.t), fmt(t.estimate), "true".into(), fmt(rate)]);
    }
    let growth = match (trunc.first(), trunc.last()) {
        (Some(a), Some(b)) => b.estimate / a.estimate,
        _ => f64::NAN,
    };
    checks.push(Check::new(10, "unweighted_truncation_growth", growth, Relation::AtLeast, th.truncation_growth));
    plot.series.push(("truncation".into(), trunc.iter().map(|t| (t.t, t.estimate)).collect()));
    Ok(ExperimentData { tables: vec![reports], plots: vec![plot], checks })
}

fn variation(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0
}

fn rank_one_exp(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let sec = &cfg.hyperbolic_appendix;
    let th = &cfg.thresholds;
    let mut rows = Table::new("hyperbolic-appendix_rows", &["p", "epsilon", "T", "rank_one", "weighted"]);
    let mut rates = Table::new("hyperbolic-appendix_rates", &["p", "epsilon", "fitted_rate", "expected_rate", "domination_margin", "expect_unbounded"]);
    let mut plot = Plot { name: "hyperbolic-appendix".into(), ..Default::default() };
    let mut checks = Vec::new();
    for (p, control) in [(sec.p, false), (sec.control_p, true)] {
        let tab = rank_one_growth(p, sec.epsilon, &cfg.sweeps.t_list)?;
        for r in &tab.rows {
            rows.push(vec![fmt(p), fmt(sec.epsilon), fmt(r.t), fmt(r.rank_one), fmt(r.weighted)]);
        }
        let unb = tab.expect_unbounded.map_or("threshold".into(), |b| b.to_string());
        rates.push(vec![fmt(p), fmt(sec.epsilon), fmt(tab.fitted_rate), fmt(tab.expected_rate), fmt(tab.domination_margin), unb]);
        let rank_one: Vec<f64> = tab.rows.iter().map(|r| r.rank_one).collect();
        let weighted: Vec<f64> = tab.rows.iter().map(|r| r.weighted).collect();
        if control {
            checks.push(Check::new(7, format!("control_flat_p{p}"), variation(&rank_one), Relation::Below, th.rank_one_flat_rel));
        } else {
            let rel = (tab.fitted_rate - tab.expected_rate).abs() / tab.expected_rate.abs().max(f64::MIN_POSITIVE);
            checks.push(Check::new(7, format!("growth_rate_rel_error_p{p}"), rel, Relation::Below, th.rank_one_rate_rel));
            checks.push(Check::new(7, format!("weighted_variation_p{p}"), variation(&weighted), Relation::Below, th.rank_one_flat_rel));
            checks.push(Check::new(7, "domination_margin", tab.domination_margin, Relation::AtLeast, 1.0));
        }
        plot.series.push((format!("rank_one_p{p}"), tab.rows.iter().map(|r| (r.t, r.rank_one)).collect()));
        plot.series.push((format!("weighted_p{p}"), tab.rows.iter().map(|r| (r.t, r.weighted)).collect()));
    }
    Ok(ExperimentData { tables: vec![rows, rates], plots: vec![plot], checks })
}

fn commutators_exp(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let sec = &cfg.commutators;
    let m = model(cfg, &sec.warp, cfg.model.epsilon)?;
    let z = z0(cfg);
    let mut rows = Table::new("commutators", &["index", "n_r", "norm", "converged", "variation"]);
    let mut checks = Vec::new();
    for idx in &sec.indices {
        let tab = commutator_stress(&m, &sec.setup, z, idx, &sec.refinements)?;
        for r in &tab.rows {
            rows.push(vec![idx.label(), r.n_r.to_string(), fmt(r.norm), r.converged.to_string(), fmt(tab.variation)]);
        }
        checks.push(Check::new(9, format!("variation_{}", idx.label()), tab.variation, Relation::Below, cfg.thresholds.commutator_variation));
    }
    Ok(ExperimentData { tables: vec![rows], plots: Vec::new(), checks })
}

fn sobolev_exp(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let sec = &cfg.sobolev;
    let z = z0(cfg);
    let mut rows = Table::new("sobolev_points", &["warp", "which", "h", "value", "modes", "n_r"]);
    let mut sweep = Table::new("sobolev_z_sweep", &["warp", "which", "t", "value"]);
    let mut fits = Table::new("sobolev_slopes", &["series", "slope", "width", "used", "warnings"]);
    let mut plot = Plot { name: "sobolev".into(), ..Default::default() };
    let mut checks = Vec::new();
    for id in &cfg.model.warps {
        let m = model(cfg, id, cfg.model.epsilon)?;
        let rep = sobolev_scaling(&m, sec.which, sec.k, &cfg.sweeps.h_list, z, &sec.t_list, &sec.setup)?;
        for p in &rep.points {
            rows.push(vec![id.clone(), which_id(sec.which).into(), fmt(p.h), fmt(p.value), p.modes.to_string(), p.n_r.to_string()]);
        }
        for &(t, v) in &rep.z_sweep {
            sweep.push(vec![id.clone(), which_id(sec.which).into(), fmt(t), fmt(v)]);
        }
        slope_row(&mut fits, id, &Ok(rep.fit.clone()));
        checks.push(Check::new(8, format!("sobolev_slope_{id}"), rep.fit.slope, Relation::AtLeast, cfg.thresholds.sobolev_slope));
        checks.push(Check::flag(8, format!("z_sweep_decreasing_{id}"), rep.z_sweep_decreasing));
        plot.series.push((id.clone(), rep.points.iter().map(|p| (p.h, p.value)).collect()));
    }
    Ok(ExperimentData { tables: vec![rows, sweep, fits], plots: vec![plot], checks })
}

/// Runs one experiment without writing anything.
pub fn run_experiment(id: ExperimentId, cfg: &ExperimentConfig) -> Result<ExperimentData> {
    match id {
        ExperimentId::CheckMetric => check_metric(cfg),
        ExperimentId::Parametrix => parametrix_exp(cfg),
        ExperimentId::Funcalc => funcalc_exp(cfg),
        ExperimentId::Convergence => convergence_exp(cfg),
        ExperimentId::Norms => norms_exp(cfg),
        ExperimentId::HyperbolicAppendix => rank_one_exp(cfg),
        ExperimentId::Commutators => commutators_exp(cfg),
        ExperimentId::Sobolev => sobolev_exp(cfg),
    }
}

fn write_table(dir: &Path, hash: &str, t: &Table) -> Result<PathBuf> {
    let path = dir.join(format!("{}.csv", t.name));
    let mut file = fs::File::create(&path)?;
    writeln!(file, "{CSV_HEADER} {}", t.name)?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(std::iter::once("config_hash").chain(t.columns.iter().copied())).map_err(csv_err)?;
    for row in &t.rows {
        w.write_record(std::iter::once(hash).chain(row.iter().map(String::as_str))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(path)
}

fn write_plot(dir: &Path, hash: &str, p: &Plot) -> Result<PathBuf> {
    let path = dir.join(format!("{}.dat", p.name));
    let mut s = format!("# config {hash}\n");
    for (i, (name, pts)) in p.series.iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        s.push_str(&format!("# {name}\n"));
        for (x, y) in pts {
            s.push_str(&format!("{x} {y}\n"));
        }
    }
    fs::write(&path, s)?;
    Ok(path)
}

/// Runs every experiment of the config in order and writes CSV tables, plot
/// data, `summary.json` and `manifest.json` under the output directory. A
/// failing experiment is recorded and the rest still run.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    let hash = config_hash(&cfg);
    let mut records = Vec::new();
    let mut checks = Vec::new();
    let mut failed = Vec::new();
    for &id in &cfg.experiments {
        let t0 = Instant::now();
        let mut rec = ExperimentRecord { id, outputs: Vec::new(), wall_seconds: 0.0, error: None };
        let written = run_experiment(id, &cfg).and_then(|data| {
            for t in &data.tables {
                rec.outputs.push(write_table(&dir, &hash, t)?);
            }
            if cfg.output.plot_data {
                for p in &data.plots {
                    rec.outputs.push(write_plot(&dir, &hash, p)?);
                }
            }
            Ok(data.checks)
        });
        match written {
            Ok(c) => checks.extend(c),
            Err(e) => {
                let msg = format!("{}: {e}", id.id());
                failed.push((id, msg.clone()));
                rec.error = Some(msg);
            }
        }
        rec.wall_seconds = t0.elapsed().as_secs_f64();
        records.push(rec);
    }
    let summary = if records.is_empty() {
        None
    } else {
        let all_pass = failed.is_empty() && checks.iter().all(|c| c.pass);
        let s = Summary { config_hash: hash.clone(), checks, failed_experiments: failed, all_pass };
        let path = dir.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&s)?)?;
        Some(path)
    };
    let manifest = RunManifest {
        config_hash: hash,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        experiments: records,
        summary,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
