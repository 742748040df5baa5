//! Config-driven experiment runner: multi-seed sweeps over network shapes,
//! table output, and comparison against stored reference tables.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::advdiff::{
    analytical_field, build_global_training_set, build_local_training_set, classic_swr_advdiff,
    ml_swr_advdiff, AdvDiffProblem, AdvDiffRun, GlobalTrialModel, LocalStencilModel, SeriesConfig,
};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::neural::{fit, Surrogate, TrainConfig, TrainingSet};
use crate::poisson::{
    build_poisson_training_set, classic_schwarz_poisson_traced, ml_schwarz_poisson,
    poisson_error_report, CoupledRunRecord, PoissonProblem, SchwarzMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    PoissonClassic,
    PoissonMl,
    AdvdiffIdentical,
    AdvdiffHetero,
}

impl ExperimentId {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::PoissonClassic | Self::PoissonMl => {
                &["err_u_exact", "err_u_sbar", "err_sbar_exact", "loss"]
            }
            Self::AdvdiffIdentical => &["err_u_exact", "loss"],
            Self::AdvdiffHetero => &["err_u_num", "loss"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    /// Rows of the Poisson grid; unused for advection–diffusion.
    pub ny: usize,
    /// 1-based split column `I′`.
    pub split: usize,
    pub half_width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_final: f64,
    pub n_levels: usize,
    /// Time levels of the training mesh, excluding `t = 0`.
    pub training_levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub grid: GridSpec,
    pub time: TimeSpec,
    /// Hidden layer widths, one entry per sweep row.
    pub architectures: Vec<Vec<usize>>,
    pub training: TrainConfig,
    pub seeds: Vec<u64>,
    pub tolerance: f64,
    pub max_iter: usize,
    pub ml_max_iter: usize,
    pub mode: SchwarzMode,
    pub series: SeriesConfig,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(id: ExperimentId) -> Self {
        let poisson = matches!(id, ExperimentId::PoissonClassic | ExperimentId::PoissonMl);
        let architectures = match id {
            ExperimentId::PoissonClassic => vec![],
            ExperimentId::PoissonMl | ExperimentId::AdvdiffIdentical => {
                vec![vec![5], vec![10], vec![15], vec![20], vec![10, 10], vec![10, 10, 10]]
            }
            ExperimentId::AdvdiffHetero => {
                vec![vec![2], vec![4], vec![8], vec![16], vec![4, 4], vec![4, 4, 4]]
            }
        };
        let (max_epochs, loss_tolerance) = match id {
            ExperimentId::PoissonClassic | ExperimentId::PoissonMl => (100, 1e-10),
            ExperimentId::AdvdiffIdentical => (200, 0.0),
            ExperimentId::AdvdiffHetero => (300, 1e-12),
        };
        Self {
            experiment: id,
            grid: GridSpec {
                nx: 41,
                ny: if poisson { 21 } else { 1 },
                split: 21,
                half_width: 2,
            },
            time: TimeSpec {
                t_final: 1.0,
                n_levels: 101,
                training_levels: 32,
            },
            architectures,
            training: TrainConfig {
                max_epochs,
                loss_tolerance,
                ..TrainConfig::default()
            },
            seeds: vec![1, 2, 3],
            tolerance: 1e-10,
            max_iter: if poisson { 2000 } else { 200 },
            ml_max_iter: 1000,
            mode: SchwarzMode::Multiplicative,
            series: SeriesConfig::default(),
            output_dir: None,
        }
    }

    /// Parses a JSON document, applies `key.path=value` overrides, and fills
    /// every missing field from the defaults of the named experiment.
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let id: ExperimentId = doc
            .get("experiment")
            .ok_or_else(|| Error::Config("missing field `experiment`".into()))
            .and_then(|v| {
                serde_json::from_value(v.clone())
                    .map_err(|e| Error::Config(format!("unknown experiment id {v}: {e}")))
            })?;
        let mut merged = serde_json::to_value(Self::defaults(id))?;
        merge(&mut merged, doc);
        let cfg: Self = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.experiment != ExperimentId::PoissonClassic && self.architectures.is_empty() {
            return bad("architectures must not be empty".into());
        }
        if let Some(a) = self.architectures.iter().find(|a| a.is_empty() || a.contains(&0)) {
            return bad(format!("invalid hidden layer list {a:?}"));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 || self.max_iter == 0 || self.ml_max_iter == 0 {
            return bad("tolerance and iteration limits must be positive".into());
        }
        self.training.validate()?;
        match self.experiment {
            ExperimentId::PoissonClassic | ExperimentId::PoissonMl => {
                self.poisson_problem()?;
            }
            _ => {
                self.advdiff_problem()?;
                if self.time.training_levels == 0 {
                    return bad("time.training_levels must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn poisson_problem(&self) -> Result<PoissonProblem> {
        let g = self.grid;
        PoissonProblem::unit_square(g.nx, g.ny, g.split, g.half_width)
    }

    pub fn advdiff_problem(&self) -> Result<AdvDiffProblem> {
        let g = self.grid;
        let (a, b) = match self.experiment {
            ExperimentId::AdvdiffHetero => ((1.0, 0.1), (0.1, 1.0)),
            _ => ((1.0, 1.0), (0.1, 0.1)),
        };
        AdvDiffProblem::new(a, b, g.nx, g.split, g.half_width, self.time.t_final, self.time.n_levels)
    }

    fn layer_sizes(&self, hidden: &[usize], data: &TrainingSet) -> Vec<usize> {
        let mut s = vec![data.input_dim()];
        s.extend_from_slice(hidden);
        s.push(data.output_dim());
        s
    }
}

fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (n, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(Error::Config(format!("empty key in override path `{path}`")));
        }
        let last = n + 1 == keys.len();
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::Config(format!("`{key}` is not an array index in `{path}`")))?;
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range in `{path}`")))?
            }
            Value::Object(map) => map.entry(key.to_string()).or_insert(Value::Null),
            other => {
                *other = Value::Object(Default::default());
                other.as_object_mut().unwrap().entry(key.to_string()).or_insert(Value::Null)
            }
        };
        if last {
            *cur = value;
            return Ok(());
        }
    }
    Ok(())
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    /// One value per entry of [`SweepResult::columns`].
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub epochs_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_layers: usize,
    pub n_neurons: usize,
    pub hidden: Vec<usize>,
    pub runs: Vec<SeedRun>,
    pub failures: Vec<SeedFailure>,
    /// Arithmetic mean over the successful runs; `None` if every seed failed.
    pub mean: Vec<Option<f64>>,
    pub mean_iterations: Option<f64>,
}

impl SweepRow {
    fn new(hidden: &[usize], runs: Vec<SeedRun>, failures: Vec<SeedFailure>, n_cols: usize) -> Self {
        let mean = (0..n_cols)
            .map(|c| {
                (!runs.is_empty()).then(|| runs.iter().map(|r| r.values[c]).sum::<f64>() / runs.len() as f64)
            })
            .collect();
        let mean_iterations = (!runs.is_empty())
            .then(|| runs.iter().map(|r| r.iterations as f64).sum::<f64>() / runs.len() as f64);
        Self {
            n_layers: hidden.len(),
            n_neurons: hidden.first().copied().unwrap_or(0),
            hidden: hidden.to_vec(),
            runs,
            failures,
            mean,
            mean_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub experiment: ExperimentId,
    pub configuration: ExperimentConfig,
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
    /// Iteration count of the classic coupled run used as reference.
    pub reference_iterations: usize,
}

impl SweepResult {
    pub fn table(&self) -> ResultTable {
        ResultTable {
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| ((r.n_layers, r.n_neurons), r.mean.clone()))
                .collect(),
        }
    }
}

/// Per-run output of a Poisson experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonRunSummary {
    pub configuration: ExperimentConfig,
    pub seed: Option<u64>,
    pub hidden: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub err_u_exact: f64,
    pub err_u_sbar: f64,
    pub err_sbar_exact: f64,
    pub loss: f64,
}

/// Per-run output of an advection–diffusion experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvDiffRunSummary {
    pub configuration: ExperimentConfig,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Error column name and value.
    pub error_name: String,
    pub error: f64,
    pub loss: f64,
}

struct PoissonContext {
    problem: PoissonProblem,
    classic: CoupledRunRecord,
    data: TrainingSet,
}

impl PoissonContext {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let problem = cfg.poisson_problem()?;
        let (classic, history) = classic_schwarz_poisson_traced(&problem, cfg.tolerance, cfg.max_iter, cfg.mode)?;
        let data = build_poisson_training_set(&problem, &history)?;
        Ok(Self {
            problem,
            classic,
            data,
        })
    }

    fn classic_summary(&self, cfg: &ExperimentConfig) -> Result<PoissonRunSummary> {
        let rep = poisson_error_report(&self.classic, &self.classic.field, &self.problem, 0.0)?;
        Ok(PoissonRunSummary {
            configuration: cfg.clone(),
            seed: None,
            hidden: vec![],
            iterations: self.classic.iterations,
            converged: self.classic.converged,
            residual_history: self.classic.residual_history.clone(),
            err_u_exact: rep.err_u_exact,
            err_u_sbar: rep.err_u_sbar,
            err_sbar_exact: rep.err_sbar_exact,
            loss: rep.loss,
        })
    }

    fn ml_run(&self, cfg: &ExperimentConfig, hidden: &[usize], seed: u64) -> Result<(PoissonRunSummary, usize)> {
        let train = TrainConfig { seed, ..cfg.training };
        let (net, report) = fit(&cfg.layer_sizes(hidden, &self.data), &self.data, &train)?;
        let surrogate = Surrogate::new(net, &self.data, seed)?;
        let ml = ml_schwarz_poisson(&self.problem, &surrogate, cfg.tolerance, cfg.ml_max_iter)?;
        let rep = poisson_error_report(&ml, &self.classic.field, &self.problem, report.final_loss)?;
        let summary = PoissonRunSummary {
            configuration: cfg.clone(),
            seed: Some(seed),
            hidden: hidden.to_vec(),
            iterations: ml.iterations,
            converged: ml.converged,
            residual_history: ml.residual_history,
            err_u_exact: rep.err_u_exact,
            err_u_sbar: rep.err_u_sbar,
            err_sbar_exact: rep.err_sbar_exact,
            loss: rep.loss,
        };
        Ok((summary, report.epochs_used))
    }
}

struct AdvDiffContext {
    problem: AdvDiffProblem,
    classic: AdvDiffRun,
    reference: crate::advdiff::SpaceTimeField,
    data: TrainingSet,
}

impl AdvDiffContext {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let problem = cfg.advdiff_problem()?;
        let classic = classic_swr_advdiff(&problem, cfg.tolerance, cfg.max_iter)?;
        let (reference, data) = match cfg.experiment {
            ExperimentId::AdvdiffIdentical => (
                analytical_field(&problem, &cfg.series)?,
                build_global_training_set(&problem, cfg.time.training_levels, &cfg.series)?,
            ),
            _ => {
                let coarse = problem.with_levels(cfg.time.training_levels + 1)?;
                let history = classic_swr_advdiff(&coarse, cfg.tolerance, cfg.max_iter)?;
                (classic.merged.clone(), build_local_training_set(&problem, &history)?)
            }
        };
        Ok(Self {
            problem,
            classic,
            reference,
            data,
        })
    }

    fn ml_run(&self, cfg: &ExperimentConfig, hidden: &[usize], seed: u64) -> Result<(AdvDiffRunSummary, AdvDiffRun, usize)> {
        let train = TrainConfig { seed, ..cfg.training };
        let (net, report) = fit(&cfg.layer_sizes(hidden, &self.data), &self.data, &train)?;
        let surrogate = Surrogate::new(net, &self.data, seed)?;
        let (run, name, error) = match cfg.experiment {
            ExperimentId::AdvdiffIdentical => {
                let model = GlobalTrialModel::new(&self.problem, surrogate, cfg.series)?;
                let run = ml_swr_advdiff(&self.problem, &model)?;
                let e = run.merged.max_abs_diff_all(&self.reference)?;
                (run, "err_u_exact", e)
            }
            _ => {
                let model = LocalStencilModel::new(&self.problem, surrogate)?;
                let run = ml_swr_advdiff(&self.problem, &model)?;
                let zone = self.problem.decomposition.zero_based().zone;
                let e = run.merged.max_abs_diff(&self.reference, zone)?;
                (run, "err_u_num", e)
            }
        };
        let summary = AdvDiffRunSummary {
            configuration: cfg.clone(),
            seed,
            hidden: hidden.to_vec(),
            iterations: run.iterations,
            residual_history: run.residual_history.clone(),
            error_name: name.into(),
            error,
            loss: report.final_loss,
        };
        Ok((summary, run, report.epochs_used))
    }
}

/// Runs every (architecture, seed) pair. Failures of individual runs are
/// recorded in their row; setup failures are returned as errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let columns: Vec<String> = cfg.experiment.columns().iter().map(|c| c.to_string()).collect();
    let n_cols = columns.len();
    let mut rows = Vec::new();
    let reference_iterations;
    match cfg.experiment {
        ExperimentId::PoissonClassic => {
            let ctx = PoissonContext::new(cfg)?;
            let s = ctx.classic_summary(cfg)?;
            reference_iterations = s.iterations;
            let run = SeedRun {
                seed: 0,
                values: vec![s.err_u_exact, s.err_u_sbar, s.err_sbar_exact, s.loss],
                iterations: s.iterations,
                converged: s.converged,
                epochs_used: 0,
            };
            rows.push(SweepRow::new(&[], vec![run], vec![], n_cols));
        }
        ExperimentId::PoissonMl => {
            let ctx = PoissonContext::new(cfg)?;
            reference_iterations = ctx.classic.iterations;
            for hidden in &cfg.architectures {
                let (mut runs, mut failures) = (vec![], vec![]);
                for &seed in &cfg.seeds {
                    match ctx.ml_run(cfg, hidden, seed) {
                        Ok((s, epochs)) => runs.push(SeedRun {
                            seed,
                            values: vec![s.err_u_exact, s.err_u_sbar, s.err_sbar_exact, s.loss],
                            iterations: s.iterations,
                            converged: s.converged,
                            epochs_used: epochs,
                        }),
                        Err(e) => failures.push(SeedFailure {
                            seed,
                            reason: e.to_string(),
                        }),
                    }
                }
                rows.push(SweepRow::new(hidden, runs, failures, n_cols));
            }
        }
        ExperimentId::AdvdiffIdentical | ExperimentId::AdvdiffHetero => {
            let ctx = AdvDiffContext::new(cfg)?;
            reference_iterations = ctx.classic.iterations;
            for hidden in &cfg.architectures {
                let (mut runs, mut failures) = (vec![], vec![]);
                for &seed in &cfg.seeds {
                    match ctx.ml_run(cfg, hidden, seed) {
                        Ok((s, run, epochs)) => runs.push(SeedRun {
                            seed,
                            values: vec![s.error, s.loss],
                            iterations: run.iterations,
                            converged: run.converged,
                            epochs_used: epochs,
                        }),
                        Err(e) => failures.push(SeedFailure {
                            seed,
                            reason: e.to_string(),
                        }),
                    }
                }
                rows.push(SweepRow::new(hidden, runs, failures, n_cols));
            }
        }
    }
    Ok(SweepResult {
        experiment: cfg.experiment,
        configuration: cfg.clone(),
        columns,
        rows,
        reference_iterations,
    })
}

/// Files written by [`run_single`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    pub run_json: PathBuf,
    pub metadata_json: PathBuf,
    pub convergence_csv: PathBuf,
    pub field_csvs: Vec<PathBuf>,
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write_metadata(path: &Path, cfg: &ExperimentConfig, wall_time: f64) -> Result<()> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = serde_json::json!({
        "experiment": cfg.experiment,
        "version": env!("CARGO_PKG_VERSION"),
        "unix_time": stamp,
        "wall_time_seconds": wall_time,
    });
    write_atomic(path, serde_json::to_string_pretty(&meta)?.as_bytes())
}

/// Runs the first architecture with the first seed (or the classic solver
/// alone) and writes the run JSON, a metadata JSON, the convergence log and,
/// for advection–diffusion, the space-time fields.
pub fn run_single(cfg: &ExperimentConfig) -> Result<RunOutputs> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let dir = output_dir(cfg);
    let run_json = dir.join("run.json");
    let metadata_json = dir.join("metadata.json");
    let convergence_csv = dir.join("convergence.csv");
    let mut field_csvs = vec![];
    let seed = cfg.seeds[0];
    match cfg.experiment {
        ExperimentId::PoissonClassic | ExperimentId::PoissonMl => {
            let ctx = PoissonContext::new(cfg)?;
            let summary = if cfg.experiment == ExperimentId::PoissonClassic {
                ctx.classic_summary(cfg)?
            } else {
                ctx.ml_run(cfg, &cfg.architectures[0], seed)?.0
            };
            emit_convergence_log(&summary.residual_history, summary.converged, &convergence_csv)?;
            write_atomic(&run_json, serde_json::to_string_pretty(&summary)?.as_bytes())?;
        }
        ExperimentId::AdvdiffIdentical | ExperimentId::AdvdiffHetero => {
            let ctx = AdvDiffContext::new(cfg)?;
            let (summary, run, _) = ctx.ml_run(cfg, &cfg.architectures[0], seed)?;
            emit_convergence_log(&ctx.classic.residual_history, ctx.classic.converged, &convergence_csv)?;
            write_atomic(&run_json, serde_json::to_string_pretty(&summary)?.as_bytes())?;
            for (name, field) in [("ml_field.csv", &run.merged), ("reference_field.csv", &ctx.reference)] {
                let p = dir.join(name);
                field.write_csv(&p)?;
                field_csvs.push(p);
            }
        }
    }
    write_metadata(&metadata_json, cfg, start.elapsed().as_secs_f64())?;
    Ok(RunOutputs {
        run_json,
        metadata_json,
        convergence_csv,
        field_csvs,
    })
}

/// Runs the sweep and writes `table.csv`, `sweep.json` and `metadata.json`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(SweepResult, PathBuf)> {
    let start = std::time::Instant::now();
    let result = run_experiment(cfg)?;
    let dir = output_dir(cfg);
    let table = dir.join("table.csv");
    write_atomic(&table, result.table().to_csv()?.as_bytes())?;
    write_atomic(&dir.join("sweep.json"), serde_json::to_string_pretty(&result)?.as_bytes())?;
    write_metadata(&dir.join("metadata.json"), cfg, start.elapsed().as_secs_f64())?;
    Ok((result, table))
}

/// Runs the configured coupled solve and writes its residual history.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let path = output_dir(cfg).join("convergence.csv");
    match cfg.experiment {
        ExperimentId::PoissonClassic | ExperimentId::PoissonMl => {
            let ctx = PoissonContext::new(cfg)?;
            let s = if cfg.experiment == ExperimentId::PoissonClassic {
                ctx.classic_summary(cfg)?
            } else {
                ctx.ml_run(cfg, &cfg.architectures[0], cfg.seeds[0])?.0
            };
            emit_convergence_log(&s.residual_history, s.converged, &path)?;
        }
        _ => {
            let problem = cfg.advdiff_problem()?;
            let run = classic_swr_advdiff(&problem, cfg.tolerance, cfg.max_iter)?;
            emit_convergence_log(&run.residual_history, run.converged, &path)?;
        }
    }
    Ok(path)
}

/// CSV with columns `iteration,residual,converged`, one row per iteration.
pub fn emit_convergence_log(residual_history: &[f64], converged: bool, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "residual", "converged"])?;
    for (m, r) in residual_history.iter().enumerate() {
        w.write_record([(m + 1).to_string(), r.to_string(), converged.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Rows keyed by `(Nl, Nn)` with one optional value per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<((usize, usize), Vec<Option<f64>>)>,
}

impl ResultTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Nl".to_string(), "Nn".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for ((nl, nn), vals) in &self.rows {
            let mut rec = vec![nl.to_string(), nn.to_string()];
            rec.extend(vals.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Parses a table; lines starting with `#` are comments and empty cells
    /// are missing values.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.len() < 2 || &header[0] != "Nl" || &header[1] != "Nn" {
            return Err(Error::Table("table must start with columns Nl,Nn".into()));
        }
        let columns = header.iter().skip(2).map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |s: &str| -> Result<usize> {
                s.parse().map_err(|_| Error::Table(format!("bad row key `{s}`")))
            };
            let key = (num(&rec[0])?, num(&rec[1])?);
            let vals = rec
                .iter()
                .skip(2)
                .map(|s| {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        s.parse::<f64>()
                            .map(Some)
                            .map_err(|_| Error::Table(format!("bad value `{s}`")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((key, vals));
        }
        Ok(Self { columns, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: (usize, usize), column: &str) -> Option<Option<f64>> {
        let c = self.columns.iter().position(|n| n == column)?;
        let (_, vals) = self.rows.iter().find(|(k, _)| *k == key)?;
        vals.get(c).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub n_layers: usize,
    pub n_neurons: usize,
    pub column: String,
    pub value: Option<f64>,
    pub reference: f64,
    pub ratio: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub factor: f64,
    pub cells: Vec<CellCheck>,
    pub passed: bool,
}

/// Checks every reference cell: a value passes when it lies within
/// `[reference / factor, reference · factor]`.
pub fn compare_to_reference(result: &ResultTable, reference: &ResultTable, factor: f64) -> Result<ComparisonReport> {
    if factor.is_nan() || factor < 1.0 {
        return Err(Error::Config(format!("factor must be ≥ 1, got {factor}")));
    }
    let mut cells = Vec::new();
    for (key, vals) in &reference.rows {
        if !result.rows.iter().any(|(k, _)| k == key) {
            return Err(Error::Table(format!(
                "result has no row Nl={}, Nn={}",
                key.0, key.1
            )));
        }
        for (col, r) in reference.columns.iter().zip(vals) {
            let Some(r) = *r else { continue };
            let value = result
                .get(*key, col)
                .ok_or_else(|| Error::Table(format!("result has no column `{col}`")))?;
            let ratio = value.map(|v| v / r);
            let pass = ratio.is_some_and(|q| q.is_finite() && q >= 1.0 / factor && q <= factor);
            cells.push(CellCheck {
                n_layers: key.0,
                n_neurons: key.1,
                column: col.clone(),
                value,
                reference: r,
                ratio,
                pass,
            });
        }
    }
    let passed = cells.iter().all(|c| c.pass);
    Ok(ComparisonReport {
        factor,
        cells,
        passed,
    })
}

/// Reference table shipped with the crate for an experiment, if any.
pub fn bundled_reference(id: ExperimentId) -> Option<ResultTable> {
    let text = match id {
        ExperimentId::PoissonMl => include_str!("../data/poisson_ml_reference.csv"),
        ExperimentId::AdvdiffIdentical => include_str!("../data/advdiff_identical_reference.csv"),
        ExperimentId::AdvdiffHetero => include_str!("../data/advdiff_hetero_reference.csv"),
        ExperimentId::PoissonClassic => return None,
    };
    Some(ResultTable::from_csv_str(text).expect("bundled reference tables parse"))
}
