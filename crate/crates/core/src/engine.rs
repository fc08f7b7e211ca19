//! Multi-stage hypothesis elimination.
//!
//! Each stage selects the action whose worst separated pair of alive
//! hypotheses is best separated (max-min TVD across clusters), then runs an
//! Armitage-style tournament (Armitage, JRSS-B 1950) among the cluster
//! representatives: every sample updates all pairwise accumulated LLRs, and
//! the stage ends when one contestant's LLR against every rival reaches the
//! threshold γ = ln((H-1)/δ). The winner's whole cluster survives; all other
//! clusters are eliminated. Stages repeat until a single hypothesis remains.
//!
//! Samples never cross stage boundaries: each stage starts its LLRs from
//! zero, so stage outcomes are independent given the trajectory.
//!
//! Complexity (H hypotheses, |A| actions): the run-time state is the
//! O(H²) LLR matrix plus the O(|A|·H) cluster labels. Per stage, action
//! selection scans O(|A|·H²) precomputed TVDs, the tournament draws
//! O(ln(H/δ)/d) samples with an O(H²) LLR update each, and the alive-set
//! intersection is O(H); with at most H-1 stages the average total is
//! O(|A|·H³ + H³·ln(H/δ)) elementary operations.

use rand::Rng;

use crate::cluster::{ClusterPlan, RepDensity};
use crate::dist::Density;
use crate::error::{Error, Result};
use crate::model::{sample_prior, ProblemInstance};

/// Default per-stage sample cap; a mis-specified instance (e.g. identical
/// contestant densities) would otherwise loop forever.
pub const DEFAULT_STAGE_CAP: u64 = 1_000_000_000;

/// Accumulated pairwise LLR state of one stage.
///
/// Only the upper triangle is stored, so L[j][i] = -L[i][j] holds exactly.
#[derive(Debug, Clone)]
pub struct LlrState {
    /// Contestant hypothesis indices in ascending order.
    pub contestants: Vec<usize>,
    /// Upper-triangular accumulated LLRs (nats), row-major by position.
    upper: Vec<f64>,
    /// Samples folded in so far.
    pub samples: u64,
}

impl LlrState {
    pub fn new(contestants: Vec<usize>) -> Self {
        let k = contestants.len();
        LlrState {
            contestants,
            upper: vec![0.0; k * (k - 1) / 2],
            samples: 0,
        }
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let k = self.contestants.len();
        debug_assert!(i < j && j < k);
        i * k - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Accumulated LLR between contestant positions (antisymmetric).
    pub fn llr(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else if i < j {
            self.upper[self.index(i, j)]
        } else {
            -self.upper[self.index(j, i)]
        }
    }

    /// Fold in one sample given the contestants' log-densities at it.
    pub fn add_sample(&mut self, log_densities: &[f64]) {
        let k = self.contestants.len();
        let mut idx = 0;
        for i in 0..k {
            for j in (i + 1)..k {
                self.upper[idx] += log_densities[i] - log_densities[j];
                idx += 1;
            }
        }
        self.samples += 1;
    }

    /// Position of the contestant whose LLR against every rival is at least
    /// `gamma`. Antisymmetry makes such a winner unique: two winners would
    /// need L ≥ γ and -L ≥ γ for the same pair.
    fn winner(&self, gamma: f64) -> Option<usize> {
        let k = self.contestants.len();
        'outer: for i in 0..k {
            for j in 0..k {
                if j != i && self.llr(i, j) < gamma {
                    continue 'outer;
                }
            }
            return Some(i);
        }
        None
    }

    /// All positions currently meeting the winner predicate (diagnostics;
    /// must never contain more than one element).
    pub fn winners(&self, gamma: f64) -> Vec<usize> {
        let k = self.contestants.len();
        (0..k)
            .filter(|&i| (0..k).all(|j| j == i || self.llr(i, j) >= gamma))
            .collect()
    }
}

/// Record of one elimination stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub action: usize,
    pub epsilon: f64,
    pub contestants: Vec<usize>,
    /// Winning contestant (a hypothesis index).
    pub winner: usize,
    /// Samples drawn this stage.
    pub samples: u64,
    /// Hypotheses eliminated at stage end.
    pub eliminated: Vec<usize>,
}

/// Full record of one algorithm execution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTranscript {
    pub stages: Vec<StageRecord>,
    /// The declared hypothesis.
    pub decision: usize,
    pub total_samples: u64,
}

impl RunTranscript {
    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// Structured text form: a header plus one line per stage with the
    /// action, the sample count, the winner, and the eliminated set.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "decision {} total_samples {} stages {}\n",
            self.decision,
            self.total_samples,
            self.stage_count()
        );
        for (r, st) in self.stages.iter().enumerate() {
            out.push_str(&format!(
                "stage {r}: action {} tau {} winner {} eliminated {:?}\n",
                st.action, st.samples, st.winner, st.eliminated
            ));
        }
        out
    }
}

/// Knobs of one execution.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Use γ_r = ln((|contestants_r|-1)/δ) instead of the fixed
    /// γ = ln((H-1)/δ). Off by default; the fixed threshold is conservative
    /// but keeps every stage's error budget uniform.
    pub dynamic_threshold: bool,
    /// Per-stage sample cap.
    pub stage_cap: u64,
    /// Replay this action sequence while its entries remain eligible
    /// (used for baseline comparisons); the greedy rule takes over when the
    /// list is exhausted or an entry cannot split the alive set.
    pub forced_actions: Option<Vec<usize>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            dynamic_threshold: false,
            stage_cap: DEFAULT_STAGE_CAP,
            forced_actions: None,
        }
    }
}

/// The action with the largest minimum cross-cluster TVD among alive
/// hypotheses; ties break toward the smaller action id. Actions whose alive
/// hypotheses share one cluster cannot eliminate anything and are skipped.
pub fn select_action(plan: &ClusterPlan, alive: &[usize]) -> Result<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (a, action) in plan.actions.iter().enumerate() {
        let mut min_cross = f64::INFINITY;
        let mut eligible = false;
        for (pos, &i) in alive.iter().enumerate() {
            for &j in &alive[pos + 1..] {
                if action.labels[i] != action.labels[j] {
                    eligible = true;
                    let t = action.tvd(i, j);
                    if t < min_cross {
                        min_cross = t;
                    }
                }
            }
        }
        if !eligible {
            continue;
        }
        match best {
            Some((value, _)) if min_cross <= value => {}
            _ => best = Some((min_cross, a)),
        }
    }
    best.map(|(_, a)| a).ok_or_else(|| Error::NoEligibleAction {
        alive: alive.to_vec(),
    })
}

/// Run one Armitage tournament: repeatedly sample `true_density`, update all
/// pairwise LLRs of the contestants' representative densities, and stop once
/// some contestant beats every rival by `gamma`.
///
/// Returns the winning hypothesis index, the stage sample count, and the
/// final LLR state.
#[allow(clippy::too_many_arguments)]
pub fn armitage_stage<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    plan: &ClusterPlan,
    action: usize,
    contestants: &[usize],
    gamma: f64,
    true_density: &Density,
    rng: &mut R,
    cap: u64,
) -> Result<(usize, u64, LlrState)> {
    if contestants.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "a stage needs ≥ 2 contestants, got {:?}",
            contestants
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold γ must be positive, got {gamma}"
        )));
    }
    let labels = &plan.actions[action].labels;
    let reps: Vec<RepDensity> = contestants
        .iter()
        .map(|&c| plan.rep_density(inst, action, labels[c]))
        .collect();
    let mut state = LlrState::new(contestants.to_vec());
    let mut log_densities = vec![0.0; contestants.len()];
    loop {
        let x = true_density.sample(rng);
        for (slot, rep) in log_densities.iter_mut().zip(&reps) {
            *slot = rep.log_density(x);
        }
        state.add_sample(&log_densities);
        if let Some(pos) = state.winner(gamma) {
            let samples = state.samples;
            return Ok((contestants[pos], samples, state));
        }
        if state.samples >= cap {
            return Err(Error::RunawayStage {
                action,
                cap,
                snapshot: state,
            });
        }
    }
}

/// Execute the full elimination loop for a known true hypothesis.
pub fn run<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    plan: &ClusterPlan,
    delta: f64,
    true_theta: usize,
    rng: &mut R,
    opts: &RunOptions,
) -> Result<RunTranscript> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "δ must lie in (0, 1), got {delta}"
        )));
    }
    if true_theta >= inst.hypotheses() {
        return Err(Error::InvalidParameter(format!(
            "true hypothesis {true_theta} outside 0..{}",
            inst.hypotheses()
        )));
    }
    let h = inst.hypotheses();
    let fixed_gamma = ((h as f64 - 1.0) / delta).ln();
    let mut alive: Vec<usize> = (0..h).collect();
    let mut stages = Vec::new();
    let mut total: u64 = 0;

    while alive.len() >= 2 {
        let stage_idx = stages.len();
        let action = match forced_action(plan, &alive, opts, stage_idx) {
            Some(a) => a,
            None => select_action(plan, &alive)?,
        };
        let contestants = plan.repr(&alive, action);
        let gamma = if opts.dynamic_threshold {
            ((contestants.len() as f64 - 1.0) / delta).ln()
        } else {
            fixed_gamma
        };
        let (winner, samples, _state) = armitage_stage(
            inst,
            plan,
            action,
            &contestants,
            gamma,
            inst.density(true_theta, action),
            rng,
            opts.stage_cap,
        )?;
        total += samples;
        let class = plan.equiv(winner, action);
        let mut next = Vec::with_capacity(alive.len());
        let mut eliminated = Vec::new();
        for &i in &alive {
            if class.binary_search(&i).is_ok() {
                next.push(i);
            } else {
                eliminated.push(i);
            }
        }
        debug_assert!(!next.is_empty(), "winner's cluster intersects alive");
        stages.push(StageRecord {
            action,
            epsilon: plan.actions[action].epsilon,
            contestants,
            winner,
            samples,
            eliminated,
        });
        alive = next;
    }

    Ok(RunTranscript {
        decision: alive[0],
        stages,
        total_samples: total,
    })
}

fn forced_action(
    plan: &ClusterPlan,
    alive: &[usize],
    opts: &RunOptions,
    stage: usize,
) -> Option<usize> {
    let forced = opts.forced_actions.as_ref()?;
    let &a = forced.get(stage)?;
    let action = plan.actions.get(a)?;
    let splits = alive
        .iter()
        .any(|&i| action.labels[i] != action.labels[alive[0]]);
    splits.then_some(a)
}

/// Draw θ from the uniform prior, then run.
pub fn run_random<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    plan: &ClusterPlan,
    delta: f64,
    rng: &mut R,
    opts: &RunOptions,
) -> Result<(usize, RunTranscript)> {
    let theta = sample_prior(inst, rng);
    let transcript = run(inst, plan, delta, theta, rng, opts)?;
    Ok((theta, transcript))
}
