//! Experiment orchestration: Monte Carlo risk sweeps over the sample cost δ,
//! scenario generation, deterministic seeding, and result persistence.
//!
//! A configuration names an instance (generated scenario or file), a set of
//! algorithms, a δ grid, and a trial count. Every (algorithm, δ, trial) cell
//! owns an independent random stream derived purely from the master seed and
//! the cell indices, so results are identical across worker counts and
//! platforms. Aggregation is integer-exact (sample counts and error flags),
//! which keeps emitted tables byte-identical across runs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis;
use crate::baselines::{gjl_expected_samples, Baselines};
use crate::cluster::{ClusterPlan, EpsilonPolicy};
use crate::dist::Density;
use crate::engine::{self, RunOptions};
use crate::error::{Error, Result};
use crate::model::{build_scenario, instance_from_text, validate, ProblemInstance, ScenarioSpec};
use crate::seed;

/// Simulated or analytically evaluated policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Elimination engine with ε = 0 everywhere.
    Phi,
    /// Elimination engine with the configured ε policy.
    PhiDelta,
    Chernoff,
    Nj1,
    /// Analytic sample counting; never errs by construction.
    Gjl,
}

impl Algorithm {
    /// Stable id entering seed derivation; never renumber.
    pub fn seed_id(self) -> u64 {
        match self {
            Algorithm::Phi => 0,
            Algorithm::PhiDelta => 1,
            Algorithm::Chernoff => 2,
            Algorithm::Nj1 => 3,
            Algorithm::Gjl => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Phi => "phi",
            Algorithm::PhiDelta => "phi_delta",
            Algorithm::Chernoff => "chernoff",
            Algorithm::Nj1 => "nj1",
            Algorithm::Gjl => "gjl",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the instance comes from: a generated scenario or an instance file.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct InstanceSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

/// Log-spaced δ grid description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

fn default_trials() -> u64 {
    10_000
}

fn default_rho() -> f64 {
    0.8
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_stage_cap() -> u64 {
    engine::DEFAULT_STAGE_CAP
}

/// Run section of a configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithms: Vec<Algorithm>,
    /// Explicit δ values; takes precedence over `delta_grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<DeltaGrid>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub epsilon: EpsilonPolicy,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// 0 lets the runtime decide.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub dynamic_threshold: bool,
    /// Replace real cluster representatives by virtual mixtures.
    #[serde(default)]
    pub virtual_reps: bool,
    /// Extend the action set with an unclustered twin of every action.
    #[serde(default)]
    pub extend_actions: bool,
    /// Export this many per-cell run transcripts (engine algorithms only);
    /// the exported runs reuse the measured trials' seeds.
    #[serde(default)]
    pub transcripts: u64,
    #[serde(default = "default_stage_cap")]
    pub stage_cap: u64,
}

fn default_version() -> u32 {
    1
}

/// Experiment configuration (TOML on disk).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub instance: InstanceSource,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::Config(format!(
                "unsupported config version {}",
                self.version
            )));
        }
        match (&self.instance.scenario, &self.instance.file) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(Error::Config(
                    "exactly one of instance.scenario / instance.file is required".into(),
                ))
            }
        }
        if self.run.algorithms.is_empty() {
            return Err(Error::Config("no algorithms requested".into()));
        }
        if self.run.trials == 0 {
            return Err(Error::Config("trials must be ≥ 1".into()));
        }
        for &d in self.deltas().iter() {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::Config(format!(
                    "δ values must lie in (0, 1), got {d}"
                )));
            }
        }
        if !(self.run.rho > 0.5 && self.run.rho < 1.0) {
            return Err(Error::Config(format!(
                "ρ̃ must lie in (0.5, 1), got {}",
                self.run.rho
            )));
        }
        Ok(())
    }

    /// The δ grid: explicit values, a described grid, or the default
    /// 9-point log-spaced sweep from 1e-1 down to 1e-5.
    pub fn deltas(&self) -> Vec<f64> {
        if let Some(ds) = &self.run.deltas {
            return ds.clone();
        }
        let grid = self.run.delta_grid.clone().unwrap_or(DeltaGrid {
            min: 1e-5,
            max: 1e-1,
            points: 9,
        });
        log_spaced(grid.min, grid.max, grid.points)
    }

    /// SHA-256 of the canonical serialized configuration.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn load_instance(&self) -> Result<ProblemInstance> {
        match (&self.instance.scenario, &self.instance.file) {
            (Some(spec), None) => build_scenario(spec),
            (None, Some(path)) => instance_from_text(&fs::read_to_string(path)?),
            _ => Err(Error::Config(
                "exactly one of instance.scenario / instance.file is required".into(),
            )),
        }
    }
}

/// Descending in δ (so ascending in 1/δ).
pub fn log_spaced(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![max];
    }
    let (lmin, lmax) = (min.ln(), max.ln());
    (0..points)
        .map(|k| (lmax + (lmin - lmax) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Aggregated statistics of one (algorithm, δ) cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellStats {
    pub delta: f64,
    pub trials: u64,
    pub mean_n: f64,
    pub se_n: f64,
    pub pe_hat: f64,
    pub pe_ci_lo: f64,
    pub pe_ci_hi: f64,
    pub abr: f64,
    pub mean_stages: f64,
    pub errors: u64,
}

/// One per-algorithm curve over the δ grid; failed cells carry diagnostics.
#[derive(Debug, Clone)]
pub struct AbrCurve {
    pub algorithm: Algorithm,
    pub cells: Vec<std::result::Result<CellStats, String>>,
}

/// Lower-bound curves evaluated on the same δ grid.
#[derive(Debug, Clone)]
pub struct BoundCurves {
    /// Per δ: elimination-policy bound, if computable.
    pub phi: Vec<std::result::Result<f64, String>>,
    /// Per δ: stochastic-policy maximin bound, if computable.
    pub nj: Vec<std::result::Result<f64, String>>,
}

/// One exported run transcript.
pub struct TranscriptSample {
    pub algorithm: Algorithm,
    pub delta: f64,
    pub trial: u64,
    pub theta: usize,
    pub transcript: engine::RunTranscript,
}

/// Full outcome of one experiment.
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub deltas: Vec<f64>,
    pub curves: Vec<AbrCurve>,
    pub bounds: BoundCurves,
    pub transcripts: Vec<TranscriptSample>,
}

/// 95% Wilson interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Copy)]
struct TrialOutcome {
    samples: u64,
    stages: u32,
    error: bool,
}

fn aggregate(delta: f64, outcomes: &[TrialOutcome]) -> CellStats {
    // Integer accumulation in trial order: bit-stable regardless of the
    // parallel schedule that produced `outcomes`.
    let trials = outcomes.len() as u64;
    let mut sum: u128 = 0;
    let mut sum_sq: u128 = 0;
    let mut stages: u64 = 0;
    let mut errors: u64 = 0;
    for o in outcomes {
        sum += o.samples as u128;
        sum_sq += (o.samples as u128) * (o.samples as u128);
        stages += o.stages as u64;
        errors += o.error as u64;
    }
    let n = trials as f64;
    let mean_n = sum as f64 / n;
    let var = (sum_sq as f64 / n - mean_n * mean_n).max(0.0);
    let se_n = if trials > 1 {
        (var / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let pe_hat = errors as f64 / n;
    let (pe_ci_lo, pe_ci_hi) = wilson_interval(errors, trials);
    let mean_stages = stages as f64 / n;
    CellStats {
        delta,
        trials,
        mean_n,
        se_n,
        pe_hat,
        pe_ci_lo,
        pe_ci_hi,
        abr: analysis::abr(delta, mean_n, pe_hat),
        mean_stages,
        errors,
    }
}

/// Duplicate every action so indices A..2A-1 are unclustered twins of
/// 0..A-1 (the clustered/unclustered action-set extension).
pub fn extend_actions(inst: &ProblemInstance) -> ProblemInstance {
    let rows: Vec<Vec<Density>> = inst
        .rows()
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.extend(row.iter().cloned());
            r
        })
        .collect();
    ProblemInstance::new(rows).expect("doubling actions preserves shape")
}

fn build_configured_plan(inst: &ProblemInstance, cfg: &RunConfig) -> Result<ClusterPlan> {
    let mut configured = ClusterPlan::build(inst, &cfg.epsilon)?;
    if cfg.virtual_reps {
        configured = configured.with_virtual_reps(inst, None)?;
    }
    Ok(configured)
}

/// Build the extended instance/plan pair for the action-set extension: the
/// first half of the actions keeps the configured clustering (optionally
/// with virtual representatives), the twin half runs unclustered.
pub fn build_extended_plan(
    inst: &ProblemInstance,
    policy: &EpsilonPolicy,
    virtual_reps: bool,
) -> Result<(ProblemInstance, ClusterPlan)> {
    let doubled = extend_actions(inst);
    let mut clustered = ClusterPlan::build(inst, policy)?;
    if virtual_reps {
        clustered = clustered.with_virtual_reps(inst, None)?;
    }
    let vanilla = ClusterPlan::build(inst, &EpsilonPolicy::Zero)?;
    let mut actions = clustered.actions;
    actions.extend(vanilla.actions);
    Ok((
        doubled,
        ClusterPlan::from_actions(actions, inst.hypotheses()),
    ))
}

/// Run every (algorithm, δ) cell of the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.check()?;
    let inst = cfg.load_instance()?;
    let report = validate(&inst)?;
    if !report.all_ok() {
        return Err(Error::AssumptionViolated(format!(
            "instance fails validation: validity_ok={}, separation={:?}",
            report.validity_ok, report.separation_ok
        )));
    }

    let deltas = cfg.deltas();
    let run = &cfg.run;

    // Plan or baseline-context failures abort only the cells that need
    // them; other cells keep running with a recorded diagnostic.
    let (inst, vanilla_plan, configured_plan) = if run.extend_actions {
        match build_extended_plan(&inst, &run.epsilon, run.virtual_reps) {
            Ok((doubled, plan)) => {
                let vanilla = ClusterPlan::build(&doubled, &EpsilonPolicy::Zero)?;
                (doubled, vanilla, Ok(plan))
            }
            Err(e) => {
                let vanilla = ClusterPlan::build(&inst, &EpsilonPolicy::Zero)?;
                (inst, vanilla, Err(e.to_string()))
            }
        }
    } else {
        let vanilla = ClusterPlan::build(&inst, &EpsilonPolicy::Zero)?;
        let configured = build_configured_plan(&inst, run).map_err(|e| e.to_string());
        (inst, vanilla, configured)
    };

    let needs_posterior = run
        .algorithms
        .iter()
        .any(|a| matches!(a, Algorithm::Chernoff | Algorithm::Nj1));
    let baselines = if needs_posterior {
        Some(Baselines::new(&inst).map_err(|e| e.to_string()))
    } else {
        None
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let mut curves = Vec::new();
    for &alg in &run.algorithms {
        let mut cells = Vec::new();
        for (di, &delta) in deltas.iter().enumerate() {
            let cell = run_cell(
                &inst,
                &vanilla_plan,
                &configured_plan,
                baselines.as_ref(),
                run,
                alg,
                delta,
                di as u64,
                &pool,
            );
            cells.push(cell);
        }
        curves.push(AbrCurve {
            algorithm: alg,
            cells,
        });
    }

    // Optional transcript export: replay the leading trials of the engine
    // cells with their original seeds.
    let mut transcripts = Vec::new();
    if run.transcripts > 0 {
        let opts = RunOptions {
            dynamic_threshold: run.dynamic_threshold,
            stage_cap: run.stage_cap,
            forced_actions: None,
        };
        for &alg in &run.algorithms {
            let plan = match alg {
                Algorithm::Phi => &vanilla_plan,
                Algorithm::PhiDelta => match &configured_plan {
                    Ok(p) => p,
                    Err(_) => continue,
                },
                _ => continue,
            };
            for (di, &delta) in deltas.iter().enumerate() {
                for t in 0..run.transcripts.min(run.trials) {
                    let mut rng = seed::rng_from_seed(seed::trial_seed(
                        run.master_seed,
                        alg.seed_id(),
                        di as u64,
                        t,
                    ));
                    if let Ok((theta, transcript)) =
                        engine::run_random(&inst, plan, delta, &mut rng, &opts)
                    {
                        transcripts.push(TranscriptSample {
                            algorithm: alg,
                            delta,
                            trial: t,
                            theta,
                            transcript,
                        });
                    }
                }
            }
        }
    }

    // Lower-bound curves ride on the configured plan's trajectory profiles.
    let nj_values: std::result::Result<Vec<f64>, String> = match &baselines {
        Some(Ok(b)) => Ok((0..inst.hypotheses())
            .map(|i| b.chernoff_value(i))
            .collect()),
        Some(Err(e)) => Err(e.clone()),
        None => Baselines::new(&inst)
            .map(|b| {
                (0..inst.hypotheses())
                    .map(|i| b.chernoff_value(i))
                    .collect()
            })
            .map_err(|e| e.to_string()),
    };
    let mut phi_bounds = Vec::new();
    let mut nj_bounds = Vec::new();
    for &delta in &deltas {
        let phi = configured_plan
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|plan| {
                analysis::predict_total(&inst, plan, delta)
                    .map(|profiles| analysis::lower_bound_phi(&inst, plan, delta, &profiles))
                    .map_err(|e| e.to_string())
            });
        phi_bounds.push(phi);
        nj_bounds.push(
            nj_values
                .as_ref()
                .map(|v| analysis::lower_bound_nj_from_values(v, delta))
                .map_err(|e| e.clone()),
        );
    }

    Ok(ExperimentResult {
        config: cfg.clone(),
        deltas,
        curves,
        bounds: BoundCurves {
            phi: phi_bounds,
            nj: nj_bounds,
        },
        transcripts,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    inst: &ProblemInstance,
    vanilla_plan: &ClusterPlan,
    configured_plan: &std::result::Result<ClusterPlan, String>,
    baselines: Option<&std::result::Result<Baselines, String>>,
    run: &RunConfig,
    alg: Algorithm,
    delta: f64,
    delta_index: u64,
    pool: &rayon::ThreadPool,
) -> std::result::Result<CellStats, String> {
    run_cell_inner(
        inst,
        vanilla_plan,
        configured_plan,
        baselines,
        run,
        alg,
        delta,
        delta_index,
        pool,
    )
    .map_err(|e| e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn run_cell_inner(
    inst: &ProblemInstance,
    vanilla_plan: &ClusterPlan,
    configured_plan: &std::result::Result<ClusterPlan, String>,
    baselines: Option<&std::result::Result<Baselines, String>>,
    run: &RunConfig,
    alg: Algorithm,
    delta: f64,
    delta_index: u64,
    pool: &rayon::ThreadPool,
) -> Result<CellStats> {
    if alg == Algorithm::Gjl {
        // Analytic traversal per hypothesis under the uniform prior.
        let h = inst.hypotheses();
        let mut total = 0.0;
        let mut stages = 0usize;
        for theta in 0..h {
            let (n, seq) = gjl_expected_samples(inst, delta, theta)?;
            total += n;
            stages += seq.len();
        }
        let mean_n = total / h as f64;
        return Ok(CellStats {
            delta,
            trials: 0,
            mean_n,
            se_n: 0.0,
            pe_hat: 0.0,
            pe_ci_lo: 0.0,
            pe_ci_hi: 0.0,
            abr: analysis::abr(delta, mean_n, 0.0),
            mean_stages: stages as f64 / h as f64,
            errors: 0,
        });
    }

    let master = run.master_seed;
    let alg_id = alg.seed_id();
    let opts = RunOptions {
        dynamic_threshold: run.dynamic_threshold,
        stage_cap: run.stage_cap,
        forced_actions: None,
    };
    let outcomes: Result<Vec<TrialOutcome>> = pool.install(|| {
        (0..run.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng_from_seed(seed::trial_seed(master, alg_id, delta_index, t));
                match alg {
                    Algorithm::Phi | Algorithm::PhiDelta => {
                        let plan = if alg == Algorithm::Phi {
                            vanilla_plan
                        } else {
                            configured_plan
                                .as_ref()
                                .map_err(|e| Error::Config(e.clone()))?
                        };
                        let (theta, transcript) =
                            engine::run_random(inst, plan, delta, &mut rng, &opts)?;
                        Ok(TrialOutcome {
                            samples: transcript.total_samples,
                            stages: transcript.stage_count() as u32,
                            error: transcript.decision != theta,
                        })
                    }
                    Algorithm::Chernoff | Algorithm::Nj1 => {
                        let ctx = baselines
                            .expect("posterior context requested")
                            .as_ref()
                            .map_err(|e| Error::Config(e.clone()))?;
                        let theta = crate::model::sample_prior(inst, &mut rng);
                        let transcript = if alg == Algorithm::Chernoff {
                            ctx.chernoff_run(inst, delta, theta, &mut rng)?
                        } else {
                            ctx.nj1_run(inst, delta, run.rho, theta, &mut rng)?
                        };
                        Ok(TrialOutcome {
                            samples: transcript.total_samples,
                            stages: transcript.stage_count() as u32,
                            error: transcript.decision != theta,
                        })
                    }
                    Algorithm::Gjl => unreachable!("handled above"),
                }
            })
            .collect()
    });
    Ok(aggregate(delta, &outcomes?))
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

fn fmt_float(x: f64) -> String {
    format!("{x:.10e}")
}

const TABLE_HEADER: &str = "delta,inv_delta,mean_N,se_N,pe_hat,pe_ci_lo,pe_ci_hi,abr,mean_stages";

fn cell_row(c: &CellStats) -> String {
    [
        fmt_float(c.delta),
        fmt_float(1.0 / c.delta),
        fmt_float(c.mean_n),
        fmt_float(c.se_n),
        fmt_float(c.pe_hat),
        fmt_float(c.pe_ci_lo),
        fmt_float(c.pe_ci_hi),
        fmt_float(c.abr),
        fmt_float(c.mean_stages),
    ]
    .join(",")
}

/// Write per-algorithm tables, the combined plot table, the bound curves, a
/// copy of the resolved config, and the reproducibility manifest.
pub fn emit_results(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    // Rows sorted by ascending 1/δ (descending δ) for plotting.
    let mut order: Vec<usize> = (0..result.deltas.len()).collect();
    order.sort_by(|&a, &b| result.deltas[b].total_cmp(&result.deltas[a]));

    for curve in &result.curves {
        let mut text = String::from(TABLE_HEADER);
        text.push('\n');
        for &i in &order {
            match &curve.cells[i] {
                Ok(c) => {
                    text.push_str(&cell_row(c));
                    text.push('\n');
                }
                Err(diag) => {
                    text.push_str(&format!(
                        "# cell delta={} failed: {}\n",
                        fmt_float(result.deltas[i]),
                        diag.replace('\n', " ")
                    ));
                }
            }
        }
        let path = dir.join(format!("{}.csv", curve.algorithm));
        fs::write(&path, text)?;
        written.push(path);
    }

    // Combined plot table: algorithm column first, then the same columns.
    let mut combined = format!("algorithm,{TABLE_HEADER}\n");
    for curve in &result.curves {
        for &i in &order {
            if let Ok(c) = &curve.cells[i] {
                combined.push_str(&format!("{},{}\n", curve.algorithm, cell_row(c)));
            }
        }
    }
    for (name, bounds) in [
        ("bound_phi", &result.bounds.phi),
        ("bound_nj", &result.bounds.nj),
    ] {
        for &i in &order {
            if let Ok(b) = &bounds[i] {
                let delta = result.deltas[i];
                let pseudo = CellStats {
                    delta,
                    trials: 0,
                    mean_n: *b,
                    se_n: 0.0,
                    pe_hat: 0.0,
                    pe_ci_lo: 0.0,
                    pe_ci_hi: 0.0,
                    abr: analysis::abr(delta, *b, 0.0),
                    mean_stages: 0.0,
                    errors: 0,
                };
                combined.push_str(&format!("{name},{}\n", cell_row(&pseudo)));
            }
        }
    }
    let combined_path = dir.join("combined.csv");
    fs::write(&combined_path, combined)?;
    written.push(combined_path);

    if !result.transcripts.is_empty() {
        let mut text = String::new();
        for sample in &result.transcripts {
            text.push_str(&format!(
                "# {} delta {} trial {} theta {}\n",
                sample.algorithm,
                fmt_float(sample.delta),
                sample.trial,
                sample.theta
            ));
            text.push_str(&sample.transcript.to_text());
        }
        let path = dir.join("transcripts.txt");
        fs::write(&path, text)?;
        written.push(path);
    }

    let config_path = dir.join("config.toml");
    fs::write(&config_path, result.config.to_toml())?;
    written.push(config_path);

    // Reproducibility manifest: config hash, seed derivation, cell seeds.
    let mut manifest = String::new();
    manifest.push_str(&format!(
        "tool_version = \"{}\"\n",
        env!("CARGO_PKG_VERSION")
    ));
    manifest.push_str(&format!("config_sha256 = \"{}\"\n", result.config.hash()));
    manifest.push_str(&format!(
        "master_seed = {}\n",
        result.config.run.master_seed
    ));
    manifest.push_str(
        "seed_rule = \"splitmix64 chain: mix(mix(mix(master, algorithm_id), delta_index), trial_index)\"\n",
    );
    manifest.push_str("\n# per-cell first-trial seeds (algorithm, delta_index, seed)\n");
    for curve in &result.curves {
        for (di, _) in result.deltas.iter().enumerate() {
            manifest.push_str(&format!(
                "# {} delta_index={} seed0={}\n",
                curve.algorithm,
                di,
                seed::trial_seed(
                    result.config.run.master_seed,
                    curve.algorithm.seed_id(),
                    di as u64,
                    0
                )
            ));
        }
    }
    let manifest_path = dir.join("manifest.toml");
    fs::write(&manifest_path, manifest)?;
    written.push(manifest_path);

    Ok(written)
}
