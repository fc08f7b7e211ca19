//! Reference policies: the Chernoff scheme, the two-phase NJ1 scheme, and
//! the analytic GJL sample count.
//!
//! Chernoff (Ann. Math. Statist. 1959): track the posterior over hypotheses;
//! at every step draw the action from the mixture maximizing the worst-case
//! KLD between the current MAP hypothesis and each rival, and stop once some
//! posterior exceeds 1 - δ.
//!
//! NJ1: identical machinery, but while no posterior exceeds a confidence
//! ρ̃ > 0.5 the action mixture instead maximizes the worst-case separation
//! over *all* ordered hypothesis pairs (an exploration phase); afterwards it
//! switches to Chernoff's rule. The phase test re-runs after every sample.
//!
//! GJL: a deterministic multi-stage scheme for mean-identifiable families.
//! Per stage it takes a *fixed* number of samples, ln(H/δ) / D_min, where
//! D_min is the smallest nonzero KLD among alive pairs, then keeps exactly
//! the hypotheses sharing the true mean. Only the count is computed — no
//! sampling — and the scheme is charged zero errors.

use rand::Rng;

use crate::cluster::{ClusterPlan, EpsilonPolicy};
use crate::dist;
use crate::engine::{self, RunOptions, RunTranscript, StageRecord};
use crate::error::{Error, Result};
use crate::lp::{maximin_distribution, MaximinSolution};
use crate::model::ProblemInstance;
use crate::seed;

/// Iteration cap for the posterior-threshold loops.
const BASELINE_SAMPLE_CAP: u64 = 1_000_000_000;

/// Normalized log-posterior over hypotheses.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    log_post: Vec<f64>,
}

impl PosteriorState {
    /// Uniform prior.
    pub fn uniform(h: usize) -> Self {
        let v = -(h as f64).ln();
        PosteriorState {
            log_post: vec![v; h],
        }
    }

    /// Fold one (action, sample) likelihood in and renormalize.
    pub fn update(&mut self, inst: &ProblemInstance, action: usize, x: f64) {
        for (i, lp) in self.log_post.iter_mut().enumerate() {
            *lp += inst.density(i, action).log_density(x);
        }
        let z = logsumexp(&self.log_post);
        for lp in self.log_post.iter_mut() {
            *lp -= z;
        }
    }

    /// MAP hypothesis; ties break to the smallest index.
    pub fn map(&self) -> usize {
        let mut best = 0;
        for (i, &lp) in self.log_post.iter().enumerate() {
            if lp > self.log_post[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_log(&self) -> f64 {
        self.log_post
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn log_posterior(&self, i: usize) -> f64 {
        self.log_post[i]
    }

    /// logsumexp of the state; 0 within tolerance when normalized.
    pub fn normalizer(&self) -> f64 {
        logsumexp(&self.log_post)
    }
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Probability vector over actions.
#[derive(Debug, Clone)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= -1e-12) || !p.is_finite()) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "action distribution must be nonnegative with unit mass, got sum {sum}"
            )));
        }
        Ok(ActionDistribution {
            probs: probs.into_iter().map(|p| p.max(0.0)).collect(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>();
        let mut acc = 0.0;
        for (a, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        self.probs.len() - 1
    }
}

/// Precomputed baseline context: the KLD tensor, one maximin mixture per
/// conditioning hypothesis, and the NJ1 exploration mixture.
pub struct Baselines {
    /// kld[i][j][a] = KLD(f_i^a ‖ f_j^a) in nats.
    kld: Vec<Vec<Vec<f64>>>,
    /// Per hypothesis î: maximin value and mixture against all rivals.
    chernoff: Vec<(f64, ActionDistribution)>,
    /// Exploration mixture over worst-case ordered pairs.
    exploration: ActionDistribution,
}

impl Baselines {
    #[allow(clippy::needless_range_loop)]
    pub fn new(inst: &ProblemInstance) -> Result<Self> {
        let h = inst.hypotheses();
        let acts = inst.actions();
        let mut kld = vec![vec![vec![0.0; acts]; h]; h];
        for i in 0..h {
            for j in 0..h {
                if i == j {
                    continue;
                }
                for a in 0..acts {
                    let v = dist::kld(inst.density(i, a), inst.density(j, a))?.value;
                    if !v.is_finite() {
                        return Err(Error::Unsupported(format!(
                            "KLD between cells ({i},{a}) and ({j},{a}) is not finite; \
                             posterior baselines need finite likelihood ratios"
                        )));
                    }
                    kld[i][j][a] = v;
                }
            }
        }

        let mut chernoff = Vec::with_capacity(h);
        for i in 0..h {
            let rows: Vec<Vec<f64>> = (0..h)
                .filter(|&j| j != i)
                .map(|j| kld[i][j].clone())
                .collect();
            let MaximinSolution {
                value,
                distribution,
            } = maximin_distribution(&rows)?;
            chernoff.push((value, ActionDistribution::new(distribution)?));
        }

        let mut pair_rows = Vec::with_capacity(h * (h - 1));
        for i in 0..h {
            for j in 0..h {
                if i != j {
                    pair_rows.push(kld[i][j].clone());
                }
            }
        }
        let exploration = ActionDistribution::new(maximin_distribution(&pair_rows)?.distribution)?;

        Ok(Baselines {
            kld,
            chernoff,
            exploration,
        })
    }

    /// Maximin separation value conditioned on hypothesis î (the
    /// denominator of the stochastic-policy sample-count bound).
    pub fn chernoff_value(&self, i: usize) -> f64 {
        self.chernoff[i].0
    }

    pub fn chernoff_distribution(&self, i: usize) -> &ActionDistribution {
        &self.chernoff[i].1
    }

    pub fn exploration_distribution(&self) -> &ActionDistribution {
        &self.exploration
    }

    pub fn kld(&self, i: usize, j: usize, a: usize) -> f64 {
        self.kld[i][j][a]
    }

    /// Chernoff's stochastic scheme until max posterior ≥ 1 - δ.
    pub fn chernoff_run<R: Rng + ?Sized>(
        &self,
        inst: &ProblemInstance,
        delta: f64,
        true_theta: usize,
        rng: &mut R,
    ) -> Result<RunTranscript> {
        self.posterior_run(inst, delta, true_theta, rng, None)
    }

    /// NJ1: exploration mixture while max posterior < ρ̃, Chernoff mixture
    /// afterwards, stop at 1 - δ.
    pub fn nj1_run<R: Rng + ?Sized>(
        &self,
        inst: &ProblemInstance,
        delta: f64,
        rho: f64,
        true_theta: usize,
        rng: &mut R,
    ) -> Result<RunTranscript> {
        if !(rho > 0.5 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ρ̃ must lie in (0.5, 1), got {rho}"
            )));
        }
        self.posterior_run(inst, delta, true_theta, rng, Some(rho))
    }

    fn posterior_run<R: Rng + ?Sized>(
        &self,
        inst: &ProblemInstance,
        delta: f64,
        true_theta: usize,
        rng: &mut R,
        exploration_below: Option<f64>,
    ) -> Result<RunTranscript> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "δ must lie in (0, 1), got {delta}"
            )));
        }
        let h = inst.hypotheses();
        let stop = (1.0 - delta).ln();
        let mut posterior = PosteriorState::uniform(h);
        let mut n: u64 = 0;
        let mut last_action = 0;
        while posterior.max_log() < stop {
            if n >= BASELINE_SAMPLE_CAP {
                return Err(Error::RunawaySearch {
                    algorithm: if exploration_below.is_some() {
                        "nj1"
                    } else {
                        "chernoff"
                    },
                    cap: BASELINE_SAMPLE_CAP,
                });
            }
            let mixture = match exploration_below {
                Some(rho) if posterior.max_log() < rho.ln() => &self.exploration,
                _ => self.chernoff_distribution(posterior.map()),
            };
            let a = mixture.sample(rng);
            let x = inst.density(true_theta, a).sample(rng);
            posterior.update(inst, a, x);
            debug_assert!(posterior.normalizer().abs() < 1e-9);
            last_action = a;
            n += 1;
        }
        let decision = posterior.map();
        // Posterior schemes have no elimination stages; record the whole
        // search as one pseudo-stage for apples-to-apples aggregation.
        Ok(RunTranscript {
            stages: vec![StageRecord {
                action: last_action,
                epsilon: 0.0,
                contestants: (0..h).collect(),
                winner: decision,
                samples: n,
                eliminated: (0..h).filter(|&i| i != decision).collect(),
            }],
            decision,
            total_samples: n,
        })
    }
}

/// Convenience wrapper constructing the context on the fly.
pub fn chernoff_run<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    delta: f64,
    true_theta: usize,
    rng: &mut R,
) -> Result<RunTranscript> {
    Baselines::new(inst)?.chernoff_run(inst, delta, true_theta, rng)
}

/// Convenience wrapper constructing the context on the fly.
pub fn nj1_run<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    delta: f64,
    rho: f64,
    true_theta: usize,
    rng: &mut R,
) -> Result<RunTranscript> {
    Baselines::new(inst)?.nj1_run(inst, delta, rho, true_theta, rng)
}

// ---------------------------------------------------------------------------
// GJL
// ---------------------------------------------------------------------------

/// Equality of two cells as distributions; under mean identifiability this
/// coincides with equality of means.
fn same_cell(inst: &ProblemInstance, a: usize, i: usize, j: usize) -> bool {
    inst.density(i, a).same_distribution(inst.density(j, a))
}

/// Check that every action's output distributions are exclusively defined by
/// their mean: equal means must imply equal distributions.
pub fn check_mean_identifiable(inst: &ProblemInstance) -> Result<()> {
    for a in 0..inst.actions() {
        for i in 0..inst.hypotheses() {
            for j in (i + 1)..inst.hypotheses() {
                let same_mean =
                    (inst.density(i, a).mean() - inst.density(j, a).mean()).abs() <= 1e-12;
                if same_mean && !same_cell(inst, a, i, j) {
                    return Err(Error::Unsupported(format!(
                        "cells ({i},{a}) and ({j},{a}) share a mean but differ as \
                         distributions; GJL requires mean-identifiable families"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Deterministic GJL traversal: expected sample count and action sequence
/// for a given true hypothesis. No sampling happens; correctness is assumed.
pub fn gjl_expected_samples(
    inst: &ProblemInstance,
    delta: f64,
    true_theta: usize,
) -> Result<(f64, Vec<usize>)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "δ must lie in (0, 1), got {delta}"
        )));
    }
    check_mean_identifiable(inst)?;
    let h = inst.hypotheses();
    let gamma = (h as f64 / delta).ln();
    let mut alive: Vec<usize> = (0..h).collect();
    let mut total = 0.0;
    let mut sequence = Vec::new();
    while alive.len() >= 2 {
        // Smallest nonzero KLD among ordered alive pairs, per action.
        let d_min = |a: usize| -> Result<Option<f64>> {
            let mut best: Option<f64> = None;
            for &l in &alive {
                for &m in &alive {
                    if l == m || same_cell(inst, a, l, m) {
                        continue;
                    }
                    let v = dist::kld(inst.density(l, a), inst.density(m, a))?.value;
                    best = Some(best.map_or(v, |b: f64| b.min(v)));
                }
            }
            Ok(best)
        };
        // Number of distinct output distributions among alive, per action.
        let distinct = |a: usize| -> usize {
            let mut groups: Vec<usize> = Vec::new();
            for &l in &alive {
                if !groups.iter().any(|&g| same_cell(inst, a, g, l)) {
                    groups.push(l);
                }
            }
            groups.len()
        };
        // The action separating the most hypotheses; ties prefer the larger
        // D_min, then the smaller action id.
        let mut choice: Option<(usize, f64, usize)> = None;
        for a in 0..inst.actions() {
            let k = distinct(a);
            if k < 2 {
                continue;
            }
            let d = d_min(a)?.expect("distinct ≥ 2 implies a nonzero pair");
            let better = match choice {
                None => true,
                Some((bk, bd, _)) => k > bk || (k == bk && d > bd + 1e-15),
            };
            if better {
                choice = Some((k, d, a));
            }
        }
        let Some((_, d, a)) = choice else {
            return Err(Error::NoEligibleAction { alive });
        };
        total += gamma / d;
        sequence.push(a);
        alive.retain(|&l| same_cell(inst, a, l, true_theta));
    }
    Ok((total, sequence))
}

/// Per-hypothesis comparison of the elimination engine replaying GJL's
/// action sequence against the analytic GJL count.
#[derive(Debug, Clone)]
pub struct GjlComparisonEntry {
    pub theta: usize,
    pub analytic: f64,
    pub sequence: Vec<usize>,
    pub simulated_mean: f64,
    pub trials: u64,
    pub errors: u64,
}

/// Replay GJL's action sequence in the vanilla engine (ε = 0) and estimate
/// the per-hypothesis mean sample count by Monte Carlo.
pub fn vanilla_vs_gjl_check(
    inst: &ProblemInstance,
    delta: f64,
    trials: u64,
    master_seed: u64,
) -> Result<Vec<GjlComparisonEntry>> {
    let plan = ClusterPlan::build(inst, &EpsilonPolicy::Zero)?;
    let mut out = Vec::with_capacity(inst.hypotheses());
    for theta in 0..inst.hypotheses() {
        let (analytic, sequence) = gjl_expected_samples(inst, delta, theta)?;
        let opts = RunOptions {
            forced_actions: Some(sequence.clone()),
            ..RunOptions::default()
        };
        let mut sum = 0u64;
        let mut errors = 0u64;
        for t in 0..trials {
            let mut rng =
                seed::rng_from_seed(seed::trial_seed(master_seed, 0x67_6a_6c, theta as u64, t));
            let transcript = engine::run(inst, &plan, delta, theta, &mut rng, &opts)?;
            sum += transcript.total_samples;
            if transcript.decision != theta {
                errors += 1;
            }
        }
        out.push(GjlComparisonEntry {
            theta,
            analytic,
            sequence,
            simulated_mean: sum as f64 / trials as f64,
            trials,
            errors,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Density;
    use crate::model::ProblemInstance;
    use crate::seed::rng_from_seed;

    fn norm(mean: f64) -> Density {
        Density::unit_normal(mean).unwrap()
    }

    fn exp(rate: f64) -> Density {
        Density::exponential(rate).unwrap()
    }

    fn two_by_two() -> ProblemInstance {
        ProblemInstance::new(vec![vec![norm(0.0), norm(0.0)], vec![norm(1.5), norm(0.5)]]).unwrap()
    }

    #[test]
    fn posterior_stays_normalized_and_stops_late_enough() {
        let inst = two_by_two();
        let ctx = Baselines::new(&inst).unwrap();
        let mut rng = rng_from_seed(1);
        let t = ctx.chernoff_run(&inst, 1e-3, 0, &mut rng).unwrap();
        assert_eq!(t.stages.len(), 1);
        assert!(t.total_samples >= 1);
        // Replay the trailing condition: at stop, max posterior ≥ 1 - δ.
        // (The run recomputes it internally; here we sanity-check the
        // decision quality over repeats.)
        let mut correct = 0;
        for s in 0..200 {
            let mut rng = rng_from_seed(1000 + s);
            let t = ctx.chernoff_run(&inst, 1e-3, 0, &mut rng).unwrap();
            if t.decision == 0 {
                correct += 1;
            }
        }
        assert!(correct >= 195, "correct = {correct}");
    }

    #[test]
    fn posterior_matches_direct_recomputation_on_random_traces() {
        let inst = ProblemInstance::new(vec![
            vec![norm(0.0), exp(1.0)],
            vec![norm(1.0), exp(2.0)],
            vec![norm(2.5), exp(0.5)],
        ])
        .unwrap();
        let mut rng = rng_from_seed(77);
        let h = inst.hypotheses();
        let mut state = PosteriorState::uniform(h);
        let mut trace: Vec<(usize, f64)> = Vec::new();
        for step in 0..200 {
            let a = step % inst.actions();
            let x = inst.density(step % h, a).sample(&mut rng);
            state.update(&inst, a, x);
            trace.push((a, x));
            // Direct recomputation: log-prior plus accumulated
            // log-likelihoods minus the normalizer.
            let mut raw: Vec<f64> = vec![-(h as f64).ln(); h];
            for &(a, x) in &trace {
                for (i, r) in raw.iter_mut().enumerate() {
                    *r += inst.density(i, a).log_density(x);
                }
            }
            let z = {
                let m = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                m + raw.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
            };
            for (i, &r) in raw.iter().enumerate() {
                assert!(
                    (state.log_posterior(i) - (r - z)).abs() < 1e-9,
                    "step {step}, hypothesis {i}"
                );
            }
            assert!(state.normalizer().abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_two_hypothesis_mixture_is_uniform() {
        // Both actions separate the pair equally well: KLD rows are equal,
        // so any simplex point is optimal; the solver must return a valid
        // mixture achieving the common value.
        let inst =
            ProblemInstance::new(vec![vec![norm(0.0), norm(0.0)], vec![norm(1.0), norm(1.0)]])
                .unwrap();
        let ctx = Baselines::new(&inst).unwrap();
        let d = ctx.chernoff_distribution(0);
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((ctx.chernoff_value(0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn exploration_mixture_is_posterior_independent() {
        let inst = two_by_two();
        let ctx = Baselines::new(&inst).unwrap();
        // Phase 1 weights must favor action 0 (worst-case pair separation
        // 1.125 vs 0.125 nats) regardless of any posterior.
        assert!(ctx.exploration_distribution().probs[0] > 0.9);
    }

    #[test]
    fn nj1_requires_valid_confidence() {
        let inst = two_by_two();
        let ctx = Baselines::new(&inst).unwrap();
        let mut rng = rng_from_seed(2);
        assert!(ctx.nj1_run(&inst, 1e-2, 0.5, 0, &mut rng).is_err());
        assert!(ctx.nj1_run(&inst, 1e-2, 0.8, 0, &mut rng).is_ok());
    }

    #[test]
    fn gjl_single_action_formula() {
        // One action, two hypotheses: N = ln(2/δ)/KLD exactly.
        let inst = ProblemInstance::new(vec![vec![norm(0.0)], vec![norm(2.0)]]).unwrap();
        let delta = 1e-3;
        let (n, seq) = gjl_expected_samples(&inst, delta, 0).unwrap();
        let expected = (2.0 / delta).ln() / 2.0;
        assert!((n - expected).abs() < 1e-12);
        assert_eq!(seq, vec![0]);
    }

    #[test]
    fn gjl_is_deterministic_and_theta_dependent() {
        let inst = ProblemInstance::new(vec![
            vec![norm(0.0), norm(0.0)],
            vec![norm(0.0), norm(1.0)],
            vec![norm(2.0), norm(1.0)],
        ])
        .unwrap();
        let (n0, _) = gjl_expected_samples(&inst, 1e-2, 0).unwrap();
        let (n0b, _) = gjl_expected_samples(&inst, 1e-2, 0).unwrap();
        assert_eq!(n0, n0b);
    }

    #[test]
    fn gjl_rejects_mixed_families_with_shared_mean() {
        // Exponential(0.5) and Normal(2.0) share mean 2 but differ.
        let inst = ProblemInstance::new(vec![vec![exp(0.5)], vec![norm(2.0)]]).unwrap();
        assert!(matches!(
            gjl_expected_samples(&inst, 1e-2, 0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn two_hypothesis_engine_beats_gjl_count() {
        // One stage for both schemes; the engine's threshold ln(1/δ) sits
        // below GJL's ln(2/δ), leaving room for the stopping overshoot.
        let inst = ProblemInstance::new(vec![vec![norm(0.0)], vec![norm(0.6)]]).unwrap();
        let delta = 1e-3;
        let report = vanilla_vs_gjl_check(&inst, delta, 10_000, 12).unwrap();
        let kld01 = 0.5 * 0.6 * 0.6;
        for entry in &report {
            assert_eq!(entry.sequence.len(), 1);
            assert!(
                entry.simulated_mean <= (2.0 / delta).ln() / kld01,
                "θ={}: mean {}",
                entry.theta,
                entry.simulated_mean
            );
        }
    }

    #[test]
    fn equal_kld_stages_never_predict_above_gjl() {
        // Bit-split instance with one common gap: every stage's smallest
        // alive-pair KLD equals the contestant drift, so the per-stage
        // prediction ln((H-1)/δ)/d stays below GJL's ln(H/δ)/D_min.
        use crate::analysis::predict_stage;
        let g = 1.1;
        let inst = ProblemInstance::new(vec![
            vec![norm(0.0), norm(0.0)],
            vec![norm(0.0), norm(g)],
            vec![norm(g), norm(0.0)],
            vec![norm(g), norm(g)],
        ])
        .unwrap();
        let plan = ClusterPlan::build(&inst, &EpsilonPolicy::Zero).unwrap();
        let delta = 1e-3_f64;
        let d_min = 0.5 * g * g;
        let gjl_stage = (4.0 / delta).ln() / d_min;
        for theta in 0..4 {
            let mut alive: Vec<usize> = (0..4).collect();
            for action in [0usize, 1] {
                let stage = predict_stage(&inst, &plan, &alive, action, delta, theta).unwrap();
                assert!(stage.expected_samples <= gjl_stage);
                let class = plan.equiv(theta, action);
                alive.retain(|i| class.binary_search(i).is_ok());
            }
        }
    }

    #[test]
    fn gjl_prefers_actions_splitting_more_hypotheses() {
        // Action 0 splits {0} vs {1, 2}; action 1 splits all three.
        let inst = ProblemInstance::new(vec![
            vec![norm(0.0), norm(0.0)],
            vec![norm(3.0), norm(3.0)],
            vec![norm(3.0), norm(6.0)],
        ])
        .unwrap();
        let (_, seq) = gjl_expected_samples(&inst, 1e-2, 0).unwrap();
        assert_eq!(seq, vec![1]);
    }
}
