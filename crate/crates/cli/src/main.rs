//! Command-line testbed for the elimination engine and its baselines.
//!
//! Subcommands cover the full workflow: validating instance files, printing
//! cluster plans and representative-condition reports, running Monte Carlo
//! risk sweeps from a config file, tabulating bounds and predictions,
//! brute-forcing optimal decision trees at small scale, the greedy-vs-optimal
//! counterexample, and the end-to-end scenario reproduction pipeline.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use phidelta_core::analysis;
use phidelta_core::cluster::{self, EpsilonPolicy};
use phidelta_core::harness::{self, Algorithm, ExperimentConfig, InstanceSource, RunConfig};
use phidelta_core::model::{self, Family, ProblemInstance, ScenarioSpec};

/// Default output directory; the `--out` flag overrides it.
const OUTPUT_DIR_ENV: &str = "PHIDELTA_OUT";

#[derive(Parser)]
#[command(
    name = "phidelta",
    version,
    about = "Active sequential hypothesis testing testbed"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an instance file against the model assumptions.
    Validate {
        /// Instance file path.
        instance: PathBuf,
    },
    /// Print per-action cluster tables and representative-condition reports.
    Cluster {
        instance: PathBuf,
        #[command(flatten)]
        eps: EpsArgs,
        /// Replace representatives by virtual mixtures.
        #[arg(long)]
        virtual_reps: bool,
        /// Export the plan to this file.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Import and print a previously exported plan instead of building.
        #[arg(long, conflicts_with_all = ["virtual_reps", "export"])]
        import: Option<PathBuf>,
    },
    /// Run the Monte Carlo experiment described by a config file.
    Simulate {
        config: PathBuf,
        /// Override the configured trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Override the configured master seed.
        #[arg(long)]
        master_seed: Option<u64>,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Tabulate predictions and lower bounds for an instance.
    Bounds {
        instance: PathBuf,
        /// Sample costs to evaluate.
        #[arg(long, required = true, num_args = 1..)]
        delta: Vec<f64>,
        #[command(flatten)]
        eps: EpsArgs,
    },
    /// Brute-force the minimal-weight decision tree (H ≤ 8).
    Mwdt {
        instance: PathBuf,
        #[arg(long)]
        delta: f64,
        #[command(flatten)]
        eps: EpsArgs,
    },
    /// Greedy vs optimal totals on the 3-hypothesis counterexample.
    Counterexample {
        /// Table parameter in (0, 1/3).
        #[arg(long)]
        xi: f64,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
    /// Full scenario pipeline: generate, simulate all algorithms, emit.
    ReproduceFig {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0.4)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

#[derive(Args)]
struct EpsArgs {
    /// Fixed proximity parameter for every action.
    #[arg(long, conflicts_with_all = ["proposition", "zero"])]
    eps: Option<f64>,
    /// Family-specific closed-form ε rule.
    #[arg(long, conflicts_with = "zero")]
    proposition: bool,
    /// ε = 0 (vanilla equivalence classes).
    #[arg(long)]
    zero: bool,
}

impl EpsArgs {
    fn policy(&self) -> EpsilonPolicy {
        if let Some(value) = self.eps {
            EpsilonPolicy::Fixed { value }
        } else if self.proposition {
            EpsilonPolicy::Proposition
        } else {
            EpsilonPolicy::Zero
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Normal,
    Exponential,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Normal => Family::UnitNormal,
            FamilyArg::Exponential => Family::Exponential,
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_instance(path: &PathBuf) -> anyhow::Result<ProblemInstance> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading instance {}", path.display()))?;
    Ok(model::instance_from_text(&text)?)
}

fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Validate { instance } => {
            let inst = load_instance(&instance)?;
            let report = model::validate(&inst)?;
            println!(
                "hypotheses {}  actions {}",
                inst.hypotheses(),
                inst.actions()
            );
            for (a, (ok, min)) in report
                .separation_ok
                .iter()
                .zip(&report.min_nonzero_tvd)
                .enumerate()
            {
                match min {
                    Some(t) => println!(
                        "action {a}: separation {}  min nonzero TVD {t:.6e}",
                        tick(*ok)
                    ),
                    None => println!("action {a}: separation {}  (no separated pair)", tick(*ok)),
                }
            }
            println!("validity {}", tick(report.validity_ok));
            if !report.uninformative_actions.is_empty() {
                println!("uninformative actions: {:?}", report.uninformative_actions);
            }
            if !report.unseparated_pairs.is_empty() {
                println!("unseparated pairs: {:?}", report.unseparated_pairs);
            }
            println!(
                "LLR second-moment certificate β = {:.6e}",
                report.llr_second_moment_bound
            );
            if !report.all_ok() {
                bail!("instance fails validation");
            }
        }
        Command::Cluster {
            instance,
            eps,
            virtual_reps,
            export,
            import,
        } => {
            let inst = load_instance(&instance)?;
            let plan = match &import {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading plan {}", path.display()))?;
                    cluster::plan_from_text(&text, &inst)?
                }
                None => {
                    let mut plan = cluster::ClusterPlan::build(&inst, &eps.policy())?;
                    if virtual_reps {
                        plan = plan.with_virtual_reps(&inst, None)?;
                    }
                    plan
                }
            };
            for (a, action) in plan.actions.iter().enumerate() {
                println!(
                    "action {a}: epsilon {:.6e}, {} clusters",
                    action.epsilon,
                    action.clusters.len()
                );
                for (c, members) in action.clusters.iter().enumerate() {
                    let rep = match action.reps[c] {
                        cluster::RepSpec::Real(k) => format!("hypothesis {k}"),
                        cluster::RepSpec::Virtual => "virtual mixture".to_string(),
                    };
                    println!("  cluster {c}: members {members:?}  rep {rep}");
                }
                if let Some(vr) = &action.virtual_rep {
                    println!(
                        "  virtual: alpha {:.6e} (bound {:.6e}), M {:?}, Delta {:.6e}",
                        vr.alpha, vr.alpha_bound, vr.m, vr.delta
                    );
                }
                let report = cluster::check_condition(&inst, a, &plan)?;
                let held = report.entries.iter().filter(|e| e.holds).count();
                println!("  condition: {held}/{} triples hold", report.entries.len());
                for e in report.entries.iter().filter(|e| !e.holds) {
                    println!(
                        "    violated: hypothesis {} vs cluster {}: E = {:.6}",
                        e.hypothesis, e.other_cluster, e.expectation
                    );
                }
                if let Some(ok) = report.rate_precondition_ok {
                    println!("  rate precondition: {}", tick(ok));
                }
            }
            if let Some(path) = export {
                fs::write(&path, cluster::plan_to_text(&plan))?;
                println!("plan written to {}", path.display());
            }
        }
        Command::Simulate {
            config,
            trials,
            master_seed,
            out,
            workers,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(t) = trials {
                cfg.run.trials = t;
            }
            if let Some(s) = master_seed {
                cfg.run.master_seed = s;
            }
            if let Some(w) = workers {
                cfg.run.workers = w;
            }
            if let Some(dir) = out {
                cfg.run.output_dir = dir;
            } else if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
                cfg.run.output_dir = PathBuf::from(dir);
            }
            let result = harness::run_experiment(&cfg)?;
            let dir = cfg.run.output_dir.clone();
            let files = harness::emit_results(&result, &dir)?;
            print_summary(&result);
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Bounds {
            instance,
            delta,
            eps,
        } => {
            let inst = load_instance(&instance)?;
            let plan = cluster::ClusterPlan::build(&inst, &eps.policy())?;
            println!("delta,predicted_mean_N,bound_phi,bound_nj");
            for d in delta {
                let total = analysis::predict_total(&inst, &plan, d)?;
                let phi = analysis::lower_bound_phi(&inst, &plan, d, &total);
                let nj = analysis::lower_bound_nj(&inst, d)?;
                println!("{d:.3e},{:.6e},{phi:.6e},{nj:.6e}", total.mean_total);
            }
        }
        Command::Mwdt {
            instance,
            delta,
            eps,
        } => {
            let inst = load_instance(&instance)?;
            let plan = cluster::ClusterPlan::build(&inst, &eps.policy())?;
            let tree = analysis::mwdt_bruteforce(&inst, &plan, delta, 8)?;
            let greedy = analysis::predict_total(&inst, &plan, delta)?.mean_total;
            println!("optimal expected samples: {:.6}", tree.expected_cost());
            println!("greedy expected samples:  {greedy:.6}");
            print_tree(&tree.root, 0);
        }
        Command::Counterexample { xi, delta } => {
            let inst = model::build_counterexample(xi)?;
            let plan = cluster::ClusterPlan::build(&inst, &EpsilonPolicy::Zero)?;
            let greedy = analysis::predict_total(&inst, &plan, delta)?;
            let tree = analysis::mwdt_bruteforce(&inst, &plan, delta, 8)?;
            let gamma = (2.0 / delta).ln();
            println!("xi = {xi}, delta = {delta}");
            println!(
                "greedy (max-min-TVD) expected samples: {:.6}",
                greedy.mean_total
            );
            for p in &greedy.per_theta {
                let actions: Vec<usize> = p.stages.iter().map(|s| s.action).collect();
                println!(
                    "  theta {}: stages {:?}, E[N] = {:.6}",
                    p.theta, actions, p.expected_total
                );
            }
            println!(
                "optimal tree expected samples:         {:.6} (root action {:?})",
                tree.expected_cost(),
                tree.root.action
            );
            println!("reference 2 ln(2/delta) = {:.6}", 2.0 * gamma);
        }
        Command::ReproduceFig {
            family,
            seed,
            trials,
            epsilon,
            out,
            workers,
        } => {
            let cfg = ExperimentConfig {
                version: 1,
                instance: InstanceSource {
                    scenario: Some(ScenarioSpec::reference_scale(family.into(), seed)),
                    file: None,
                },
                run: RunConfig {
                    algorithms: vec![
                        Algorithm::PhiDelta,
                        Algorithm::Chernoff,
                        Algorithm::Nj1,
                        Algorithm::Gjl,
                    ],
                    deltas: None,
                    delta_grid: None,
                    trials,
                    epsilon: EpsilonPolicy::Fixed { value: epsilon },
                    rho: 0.8,
                    master_seed: seed,
                    workers,
                    output_dir: output_dir(out),
                    dynamic_threshold: false,
                    virtual_reps: false,
                    extend_actions: false,
                    transcripts: 0,
                    stage_cap: phidelta_core::engine::DEFAULT_STAGE_CAP,
                },
            };
            let result = harness::run_experiment(&cfg)?;
            let files = harness::emit_results(&result, &cfg.run.output_dir)?;
            print_summary(&result);
            for f in files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn tick(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn print_summary(result: &harness::ExperimentResult) {
    for curve in &result.curves {
        for (i, cell) in curve.cells.iter().enumerate() {
            match cell {
                Ok(c) => println!(
                    "{} delta={:.3e}: mean N {:.4}, pe {:.4e}, ABR {:.6e}, stages {:.2}",
                    curve.algorithm, result.deltas[i], c.mean_n, c.pe_hat, c.abr, c.mean_stages
                ),
                Err(diag) => println!(
                    "{} delta={:.3e}: FAILED ({diag})",
                    curve.algorithm, result.deltas[i]
                ),
            }
        }
    }
}

fn print_tree(node: &analysis::TreeNode, depth: usize) {
    let indent = "  ".repeat(depth);
    match node.action {
        Some(a) => println!(
            "{indent}{:?} --action {a}--> cost {:.6}",
            node.alive, node.expected_cost
        ),
        None => println!("{indent}{:?} (leaf)", node.alive),
    }
    for child in &node.children {
        print_tree(child, depth + 1);
    }
}

// A smoke test of the exit paths lives in tests/cli.rs; the heavy lifting is
// all in the core crate.
