//! Experiment configs, Monte Carlo runners and the CSV / meta.json outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::empirical::{evaluate, generate_dataset, sample_count, separability_test, solve_primal_dual};
use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::potentials::{Potential, Prior};
use crate::summary::{LinkFunction, LinkTag};
use crate::theory::{delta_star, solve_specialized, ModelSpec, TheoryReport};

pub const CSV_HEADER: [&str; 12] = [
    "experiment",
    "metric",
    "kappa",
    "delta",
    "potential",
    "prior",
    "theory",
    "empirical_mean",
    "empirical_stderr",
    "trials",
    "solver_failures",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Phase,
    GeSweep,
    Support,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Phase => "phase",
            ExperimentKind::GeSweep => "ge-sweep",
            ExperimentKind::Support => "support",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaScale {
    /// Grid values are δ itself.
    #[default]
    Absolute,
    /// Grid values are multiples of δ*(κ).
    RelativeToDeltaStar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            tag: "gaussian".into(),
            sparsity: None,
        }
    }
}

impl PriorConfig {
    pub fn build(&self, kappa: f64) -> Result<Prior> {
        let prior = match (self.tag.as_str(), self.sparsity) {
            ("gaussian", None) => Prior::Gaussian { kappa },
            ("binary", None) => Prior::Binary { kappa },
            ("sparse", Some(sparsity)) => Prior::SparseGaussian { sparsity, kappa },
            ("sparse", None) => return Err(Error::Config("prior 'sparse' needs a sparsity".into())),
            ("gaussian" | "binary", Some(_)) => {
                return Err(Error::Config(format!("prior '{}' takes no sparsity", self.tag)))
            }
            (other, _) => return Err(Error::Config(format!("unknown prior tag '{other}'"))),
        };
        prior.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(prior)
    }
}

fn default_p() -> usize {
    100
}
fn default_trials() -> usize {
    20
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iters() -> usize {
    100_000
}
fn default_support_threshold() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub kappa: Vec<f64>,
    pub delta: Vec<f64>,
    #[serde(default)]
    pub delta_scale: DeltaScale,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub potentials: Vec<Potential>,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub link: LinkTag,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_support_threshold")]
    pub support_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Full-scale base documents for the four figures.
pub fn preset(name: &str) -> Option<Value> {
    let sweep = |prior: Value| {
        json!({
            "experiment": "ge-sweep",
            "kappa": [2.0],
            "delta": [0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0],
            "prior": prior,
            "potentials": ["l2", "l1", "linf"],
            "p": 200,
            "trials": 100,
            "link": "fig1",
        })
    };
    Some(match name {
        "fig1" => json!({
            "experiment": "phase",
            "kappa": (0..=20).map(|k| k as f64 * 0.25).collect::<Vec<_>>(),
            "delta": [0.6, 0.8, 0.9, 1.0, 1.1, 1.2, 1.4],
            "delta_scale": "relative_to_delta_star",
            "prior": {"tag": "gaussian"},
            "p": 150,
            "trials": 20,
            "link": "fig1",
        }),
        "fig2" => sweep(json!({"tag": "gaussian"})),
        "fig3" => sweep(json!({"tag": "sparse", "sparsity": 0.1})),
        "fig4" => sweep(json!({"tag": "binary"})),
        _ => return None,
    })
}

pub const PRESETS: [&str; 4] = ["fig1", "fig2", "fig3", "fig4"];

impl ExperimentConfig {
    /// Top-level keys of `overrides` replace those of the preset document.
    pub fn from_sources(preset_name: Option<&str>, overrides: Option<&str>) -> Result<Self> {
        let mut doc = match preset_name {
            Some(name) => preset(name).ok_or_else(|| {
                Error::Config(format!("unknown preset '{name}', expected one of {PRESETS:?}"))
            })?,
            None => Value::Object(Default::default()),
        };
        if let Some(text) = overrides {
            let v: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            let Value::Object(map) = v else {
                return Err(Error::Config("config must be a JSON object".into()));
            };
            let base = doc.as_object_mut().expect("object");
            for (k, v) in map {
                base.insert(k, v);
            }
        }
        Self::from_value(doc)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_sources(None, Some(text))
    }

    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials < 1 {
            return bad("trials must be >= 1".into());
        }
        if self.p < 2 {
            return bad("p must be >= 2".into());
        }
        if self.kappa.is_empty() || self.delta.is_empty() {
            return bad("kappa and delta grids must be non-empty".into());
        }
        let kmin = if self.experiment == ExperimentKind::Phase { 0.0 } else { f64::MIN_POSITIVE };
        if self.kappa.iter().any(|&k| !(k >= kmin) || !k.is_finite()) {
            return bad(format!("kappa values must be finite and >= {kmin}"));
        }
        if self.delta.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return bad("delta values must be finite and > 0".into());
        }
        if !self.delta.windows(2).all(|w| w[0] < w[1]) {
            return bad("delta grid must be strictly increasing".into());
        }
        if !(self.solver_tol > 0.0) || self.max_iters < 1 || !(self.support_threshold > 0.0) {
            return bad("solver_tol, max_iters and support_threshold must be positive".into());
        }
        self.prior.build(1.0)?;
        match self.experiment {
            ExperimentKind::Phase => {}
            ExperimentKind::GeSweep => {
                if self.potentials.is_empty() {
                    return bad("ge-sweep needs at least one potential".into());
                }
            }
            ExperimentKind::Support => {
                if self.potentials.iter().any(|&p| p != Potential::L1) {
                    return bad("support runs only the l1 potential".into());
                }
                if self.prior.tag != "sparse" && self.prior.tag != "gaussian" {
                    return bad("support needs a sparse (or gaussian) prior".into());
                }
            }
        }
        Ok(())
    }

    fn link(&self) -> LinkFunction {
        LinkFunction::from(self.link)
    }

    /// Absolute δ values for one κ.
    fn deltas(&self, kappa: f64, link: &LinkFunction) -> Result<Vec<f64>> {
        match self.delta_scale {
            DeltaScale::Absolute => Ok(self.delta.clone()),
            DeltaScale::RelativeToDeltaStar => {
                let ds = delta_star(kappa, link)?;
                Ok(self.delta.iter().map(|m| m * ds).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ge,
    SeparableFraction,
    P1,
    P2,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Ge => "ge",
            Metric::SeparableFraction => "separable_fraction",
            Metric::P1 => "p1",
            Metric::P2 => "p2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Infeasible,
    TheoryNonconvergence,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Infeasible => "infeasible",
            RowStatus::TheoryNonconvergence => "theory_nonconvergence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub metric: Metric,
    pub kappa: f64,
    pub delta: f64,
    pub potential: Option<Potential>,
    pub prior: String,
    pub theory: Option<f64>,
    pub empirical_mean: Option<f64>,
    pub empirical_stderr: Option<f64>,
    /// Trials attempted.
    pub trials: usize,
    pub solver_failures: usize,
    pub status: RowStatus,
}

/// `%.9g`: nine significant digits, trailing zeros trimmed.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.8e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-4..9).contains(&exp) {
        trim(format!("{:.*}", (8 - exp) as usize, x))
    } else {
        let m = trim(mant.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    fs::write(path, csv_bytes(rows)?)?;
    Ok(())
}

pub fn csv_bytes(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.experiment.as_str().to_string(),
            r.metric.as_str().to_string(),
            format_number(r.kappa),
            format_number(r.delta),
            r.potential.map(|p| p.as_str()).unwrap_or("none").to_string(),
            r.prior.clone(),
            opt(r.theory),
            opt(r.empirical_mean),
            opt(r.empirical_stderr),
            r.trials.to_string(),
            r.solver_failures.to_string(),
            r.status.as_str().to_string(),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// (mean, standard error) of the sample; `None` when empty.
fn mean_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    let k = xs.len();
    if k == 0 {
        return (None, None);
    }
    let m = xs.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (Some(m), Some(0.0));
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1) as f64;
    (Some(m), Some((var / k as f64).sqrt()))
}

fn stream(cfg: &ExperimentConfig, cell: usize, trial: usize) -> RngStream {
    RngStream::new(cfg.base_seed, ((cell as u64) << 32) | trial as u64)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// `threads = 0` uses one worker per core.
pub fn run(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let pool = pool(threads)?;
    pool.install(|| match cfg.experiment {
        ExperimentKind::Phase => phase_rows(cfg),
        ExperimentKind::GeSweep => sweep_rows(cfg),
        ExperimentKind::Support => support_rows(cfg),
    })
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(Error::Config(format!(
            "expected a '{}' config, got '{}'",
            kind.as_str(),
            cfg.experiment.as_str()
        )));
    }
    Ok(())
}

pub fn run_phase(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRow>> {
    expect_kind(cfg, ExperimentKind::Phase)?;
    run(cfg, threads)
}

pub fn run_ge_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRow>> {
    expect_kind(cfg, ExperimentKind::GeSweep)?;
    run(cfg, threads)
}

pub fn run_support(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRow>> {
    expect_kind(cfg, ExperimentKind::Support)?;
    run(cfg, threads)
}

fn phase_rows(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let link = cfg.link();
    let mut rows = Vec::new();
    let mut cell = 0;
    for &kappa in &cfg.kappa {
        let ds = delta_star(kappa, &link)?;
        let prior = cfg.prior.build(kappa)?;
        for delta in cfg.deltas(kappa, &link)? {
            let n = sample_count(cfg.p, delta);
            let outcomes: Vec<bool> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let data = generate_dataset(cfg.p, n, &prior, &link, stream(cfg, cell, t))?;
                    Ok(separability_test(&data, 20 * cfg.p)?.0)
                })
                .collect::<Result<_>>()?;
            let f = outcomes.iter().filter(|&&s| s).count() as f64 / cfg.trials as f64;
            rows.push(ResultRow {
                experiment: ExperimentKind::Phase,
                metric: Metric::SeparableFraction,
                kappa,
                delta,
                potential: None,
                prior: prior.tag().into(),
                theory: Some(ds),
                empirical_mean: Some(f),
                empirical_stderr: Some((f * (1.0 - f) / cfg.trials as f64).sqrt()),
                trials: cfg.trials,
                solver_failures: 0,
                status: RowStatus::Ok,
            });
            cell += 1;
        }
    }
    Ok(rows)
}

/// Theory report for one grid point, or the row status explaining its absence.
fn theory_at(
    prior: &Prior,
    potential: Potential,
    kappa: f64,
    delta: f64,
    link: &LinkFunction,
    sparsity: Option<f64>,
) -> Result<std::result::Result<TheoryReport, RowStatus>> {
    let spec = ModelSpec::new(kappa, delta, link.clone())?;
    match solve_specialized(prior, potential, &spec) {
        Ok(sol) => Ok(Ok(TheoryReport::new(sol.vars, &spec, sparsity)?)),
        Err(Error::Infeasible { .. }) => Ok(Err(RowStatus::Infeasible)),
        Err(Error::NonConvergence { .. }) => Ok(Err(RowStatus::TheoryNonconvergence)),
        Err(e) => Err(e),
    }
}

/// Per-trial outcome for each potential: `None` marks a solver failure.
type TrialOutcome = Vec<Option<crate::empirical::EmpiricalReport>>;

fn run_trials(
    cfg: &ExperimentConfig,
    prior: &Prior,
    link: &LinkFunction,
    potentials: &[Potential],
    delta: f64,
    cell: usize,
    threshold: Option<f64>,
) -> Result<Vec<TrialOutcome>> {
    let n = sample_count(cfg.p, delta);
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let data = generate_dataset(cfg.p, n, prior, link, stream(cfg, cell, t))?;
            if !separability_test(&data, 20 * cfg.p)?.0 {
                return Ok(vec![None; potentials.len()]);
            }
            potentials
                .iter()
                .map(|&pot| {
                    let r = solve_primal_dual(&data, pot, cfg.max_iters, cfg.solver_tol)?;
                    if !r.converged {
                        return Ok(None);
                    }
                    Ok(evaluate(&data, &r.estimate, threshold).ok())
                })
                .collect()
        })
        .collect()
}

fn sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let link = cfg.link();
    let mut rows = Vec::new();
    let mut cell = 0;
    for &kappa in &cfg.kappa {
        let prior = cfg.prior.build(kappa)?;
        for delta in cfg.deltas(kappa, &link)? {
            let outcomes = run_trials(cfg, &prior, &link, &cfg.potentials, delta, cell, None)?;
            for (k, &pot) in cfg.potentials.iter().enumerate() {
                let theory = theory_at(&prior, pot, kappa, delta, &link, None)?;
                let ges: Vec<f64> = outcomes.iter().filter_map(|o| o[k].map(|r| r.gen_error)).collect();
                let (mean, se) = mean_stderr(&ges);
                let (th, status) = match theory {
                    Ok(rep) => (Some(rep.gen_error), RowStatus::Ok),
                    Err(s) => (None, s),
                };
                rows.push(ResultRow {
                    experiment: ExperimentKind::GeSweep,
                    metric: Metric::Ge,
                    kappa,
                    delta,
                    potential: Some(pot),
                    prior: prior.tag().into(),
                    theory: th,
                    empirical_mean: mean,
                    empirical_stderr: se,
                    trials: cfg.trials,
                    solver_failures: cfg.trials - ges.len(),
                    status,
                });
            }
            cell += 1;
        }
    }
    rows.sort_by(|a, b| {
        let key = |r: &ResultRow| cfg.potentials.iter().position(|&p| Some(p) == r.potential);
        key(a)
            .cmp(&key(b))
            .then(a.kappa.total_cmp(&b.kappa))
            .then(a.delta.total_cmp(&b.delta))
    });
    Ok(rows)
}

fn support_rows(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let link = cfg.link();
    let pot = Potential::L1;
    let mut rows = Vec::new();
    let mut cell = 0;
    for &kappa in &cfg.kappa {
        let prior = cfg.prior.build(kappa)?;
        let s = prior.sparsity();
        for delta in cfg.deltas(kappa, &link)? {
            let outcomes = run_trials(cfg, &prior, &link, &[pot], delta, cell, Some(cfg.support_threshold))?;
            let theory = theory_at(&prior, pot, kappa, delta, &link, Some(s))?;
            let (th, status) = match theory {
                Ok(rep) => (rep.support, RowStatus::Ok),
                Err(st) => (None, st),
            };
            let solved = outcomes.iter().filter(|o| o[0].is_some()).count();
            let rates: Vec<_> = outcomes.iter().filter_map(|o| o[0].and_then(|r| r.support)).collect();
            let p1: Vec<f64> = rates.iter().map(|r| r.p1).collect();
            let p2: Vec<f64> = rates.iter().filter_map(|r| r.p2).collect();
            let mut metrics = vec![(Metric::P1, th.map(|t| t.0), p1)];
            if s < 1.0 {
                metrics.push((Metric::P2, th.map(|t| t.1), p2));
            }
            for (metric, theory, xs) in metrics {
                let (mean, se) = mean_stderr(&xs);
                rows.push(ResultRow {
                    experiment: ExperimentKind::Support,
                    metric,
                    kappa,
                    delta,
                    potential: Some(pot),
                    prior: prior.tag().into(),
                    theory,
                    empirical_mean: mean,
                    empirical_stderr: se,
                    trials: cfg.trials,
                    solver_failures: cfg.trials - solved,
                    status,
                });
            }
            cell += 1;
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub config: ExperimentConfig,
    pub crate_version: String,
    pub git_commit: Option<String>,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    pub threads: usize,
    pub rows: usize,
}

fn git_commit() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
}

pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub csv_path: PathBuf,
    pub meta_path: PathBuf,
    pub meta: RunMeta,
}

/// Runs the experiment and writes `<out>/<experiment>.csv` and
/// `<out>/<experiment>.meta.json`.
pub fn run_to_dir(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<RunOutput> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    fs::create_dir_all(out)?;
    let rows = run(cfg, threads)?;
    let tag = cfg.experiment.as_str();
    let csv_path = out.join(format!("{tag}.csv"));
    write_csv(&rows, &csv_path)?;
    let meta = RunMeta {
        config: cfg.clone(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        git_commit: git_commit(),
        started_unix_s: started,
        wall_time_s: clock.elapsed().as_secs_f64(),
        threads: if threads == 0 { rayon::current_num_threads() } else { threads },
        rows: rows.len(),
    };
    let meta_path = out.join(format!("{tag}.meta.json"));
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    fs::write(&meta_path, text + "\n")?;
    Ok(RunOutput {
        rows,
        csv_path,
        meta_path,
        meta,
    })
}
