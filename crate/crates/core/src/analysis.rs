//! Closed-form predictions and bounds for the elimination engine.
//!
//! Conditioned on the true hypothesis and on every stage selecting the true
//! cluster, the engine's trajectory is deterministic, so per-stage and total
//! expected sample counts follow from the LLR drifts alone:
//!
//! - per stage, E[τ] ≈ ln((H-1)/δ) / d, where d is the smallest drift
//!   ΔD = KLD(f_θ‖f_rep(other)) - KLD(f_θ‖f_rep(own)) over rival contestants
//!   (the vanishing o(1) factor is dropped);
//! - per hypothesis, the total is the sum over the trajectory's stages, and
//!   rewriting it through the sample-weighted action-usage profile λ_θ gives
//!   E[N|θ] = R_θ · ln((H-1)/δ) / E_{A~λ_θ}[d(A)] exactly;
//! - dropping the stage count R_θ ≥ 1 yields the policy lower bound, and the
//!   maximin-KLD bound ln(1/δ) / max_ν min_j E_{A~ν}[KLD] covers stochastic
//!   posterior schemes.
//!
//! The module also contains a brute-force minimal-weight decision tree
//! optimizer over stage outcomes, exact for small hypothesis counts, used to
//! quantify how suboptimal the greedy max-min-TVD action rule can be.

use crate::baselines::Baselines;
use crate::cluster::{ClusterPlan, RepSpec};
use crate::dist;
use crate::engine::select_action;
use crate::error::{Error, Result};
use crate::model::ProblemInstance;

/// ΔD_{jk|i}(a) = KLD(f_i^a‖f_j^a) - KLD(f_i^a‖f_k^a): the drift of the
/// (k vs j) LLR under hypothesis i. May be negative for bad clusterings.
pub fn delta_kld(inst: &ProblemInstance, a: usize, i: usize, j: usize, k: usize) -> Result<f64> {
    let to_j = dist::kld(inst.density(i, a), inst.density(j, a))?.value;
    let to_k = dist::kld(inst.density(i, a), inst.density(k, a))?.value;
    Ok(to_j - to_k)
}

/// Drift of hypothesis i's representative against a rival cluster's
/// representative under action `a`:
/// E_{f_i}[ln f_rep(own) - ln f_rep(other)]. Real representatives reduce to
/// [`delta_kld`]; virtual ones integrate the mixture log-ratio.
pub fn rep_drift(
    inst: &ProblemInstance,
    plan: &ClusterPlan,
    a: usize,
    i: usize,
    other_cluster: usize,
) -> Result<f64> {
    let action = &plan.actions[a];
    let own = action.labels[i];
    debug_assert_ne!(own, other_cluster);
    match (&action.reps[other_cluster], &action.reps[own]) {
        (RepSpec::Real(j), RepSpec::Real(k)) => delta_kld(inst, a, i, *j, *k),
        _ => {
            let vr = action
                .virtual_rep
                .as_ref()
                .expect("virtual rep present when RepSpec::Virtual");
            vr.drift(inst.density(i, a), own, other_cluster)
        }
    }
}

/// Predicted sample count of one stage.
#[derive(Debug, Clone)]
pub struct StagePrediction {
    pub action: usize,
    /// Stage contestants (minimal indices of clusters intersecting alive).
    pub contestants: Vec<usize>,
    /// Drift against each rival cluster.
    pub rival_drifts: Vec<(usize, f64)>,
    /// d = min over rivals; positive after a valid clustering.
    pub drift: f64,
    /// ln((H-1)/δ) / d.
    pub expected_samples: f64,
}

/// Predict one stage's mean sample count for a known true hypothesis.
pub fn predict_stage(
    inst: &ProblemInstance,
    plan: &ClusterPlan,
    alive: &[usize],
    a: usize,
    delta: f64,
    true_theta: usize,
) -> Result<StagePrediction> {
    let contestants = plan.repr(alive, a);
    if contestants.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "action {a} leaves fewer than two contestants"
        )));
    }
    let action = &plan.actions[a];
    let own = action.labels[true_theta];
    let mut rival_drifts = Vec::with_capacity(contestants.len() - 1);
    let mut drift = f64::INFINITY;
    for &c in &contestants {
        let cluster = action.labels[c];
        if cluster == own {
            continue;
        }
        let d = rep_drift(inst, plan, a, true_theta, cluster)?;
        rival_drifts.push((cluster, d));
        drift = drift.min(d);
    }
    if !(drift > 0.0) {
        return Err(Error::ClusteringViolation(format!(
            "action {a}, hypothesis {true_theta}: smallest rival drift {drift} is not positive"
        )));
    }
    let gamma = ((inst.hypotheses() as f64 - 1.0) / delta).ln();
    Ok(StagePrediction {
        action: a,
        contestants,
        rival_drifts,
        drift,
        expected_samples: gamma / drift,
    })
}

/// Sample-weighted action usage of one correctness-conditioned trajectory.
#[derive(Debug, Clone)]
pub struct UsageProfile {
    /// λ_θ^a: fraction of samples drawn with action a (weights 1/d per
    /// stage, normalized). A probability vector supported on used actions.
    pub lambda: Vec<f64>,
    /// Stage count R_θ.
    pub stage_count: usize,
    /// E_{A~λ_θ}[d(A)]: the harmonic stage-weighted mean drift.
    pub mean_drift: f64,
}

/// Prediction for one true hypothesis.
#[derive(Debug, Clone)]
pub struct ThetaPrediction {
    pub theta: usize,
    pub stages: Vec<StagePrediction>,
    pub expected_total: f64,
    pub usage: UsageProfile,
}

/// Predictions for every hypothesis plus the prior mean.
#[derive(Debug, Clone)]
pub struct TotalPrediction {
    pub per_theta: Vec<ThetaPrediction>,
    pub mean_total: f64,
}

/// Walk the correctness-conditioned trajectory of every hypothesis and sum
/// the per-stage predictions.
pub fn predict_total(
    inst: &ProblemInstance,
    plan: &ClusterPlan,
    delta: f64,
) -> Result<TotalPrediction> {
    let h = inst.hypotheses();
    let gamma = ((h as f64 - 1.0) / delta).ln();
    let mut per_theta = Vec::with_capacity(h);
    for theta in 0..h {
        let mut alive: Vec<usize> = (0..h).collect();
        let mut stages = Vec::new();
        while alive.len() >= 2 {
            let a = select_action(plan, &alive)?;
            let stage = predict_stage(inst, plan, &alive, a, delta, theta)?;
            let class = plan.equiv(theta, a);
            alive.retain(|i| class.binary_search(i).is_ok());
            stages.push(stage);
        }
        debug_assert_eq!(alive, vec![theta]);
        let expected_total: f64 = stages.iter().map(|s| s.expected_samples).sum();
        // λ weights each stage by its share of samples, 1/d over Σ 1/d;
        // with these weights R·γ / E_λ[d] reproduces Σ γ/d exactly.
        let inv_sum: f64 = stages.iter().map(|s| 1.0 / s.drift).sum();
        let mut lambda = vec![0.0; inst.actions()];
        for s in &stages {
            lambda[s.action] += (1.0 / s.drift) / inv_sum;
        }
        let stage_count = stages.len();
        let mean_drift = stage_count as f64 / inv_sum;
        let _ = gamma;
        per_theta.push(ThetaPrediction {
            theta,
            stages,
            expected_total,
            usage: UsageProfile {
                lambda,
                stage_count,
                mean_drift,
            },
        });
    }
    let mean_total = per_theta.iter().map(|p| p.expected_total).sum::<f64>() / h as f64;
    Ok(TotalPrediction {
        per_theta,
        mean_total,
    })
}

/// Policy lower bound: E[N] ≥ E_θ[ ln((H-1)/δ) / E_{A~λ_θ}[d(A)] ],
/// i.e. the total-prediction with every stage count replaced by one.
pub fn lower_bound_phi(
    inst: &ProblemInstance,
    _plan: &ClusterPlan,
    delta: f64,
    profiles: &TotalPrediction,
) -> f64 {
    let h = inst.hypotheses() as f64;
    let gamma = ((h - 1.0) / delta).ln();
    profiles
        .per_theta
        .iter()
        .map(|p| gamma / p.usage.mean_drift)
        .sum::<f64>()
        / h
}

/// Stochastic-policy lower bound:
/// E_θ[ ln(1/δ) / max_ν min_{j≠θ} E_{A~ν}[KLD(f_θ^A‖f_j^A)] ].
pub fn lower_bound_nj(inst: &ProblemInstance, delta: f64) -> Result<f64> {
    let ctx = Baselines::new(inst)?;
    let values: Vec<f64> = (0..inst.hypotheses())
        .map(|i| ctx.chernoff_value(i))
        .collect();
    Ok(lower_bound_nj_from_values(&values, delta))
}

/// As [`lower_bound_nj`] with the per-hypothesis maximin values precomputed
/// (they do not depend on δ).
pub fn lower_bound_nj_from_values(values: &[f64], delta: f64) -> f64 {
    let h = values.len() as f64;
    values.iter().map(|&v| (1.0 / delta).ln() / v).sum::<f64>() / h
}

/// Average Bayes risk δ·E[N] + p_e.
pub fn abr(delta: f64, mean_n: f64, p_e: f64) -> f64 {
    delta * mean_n + p_e
}

/// Instance-derived constants (c₁, c₂) of the risk envelope
/// c₁·δ·ln(1/δ) ≤ ABR ≤ c₂·δ·ln(1/δ) + δ: the extreme ratios of predicted
/// mean totals to ln(1/δ) over a δ grid.
pub fn risk_envelope(
    inst: &ProblemInstance,
    plan: &ClusterPlan,
    deltas: &[f64],
) -> Result<(f64, f64)> {
    let mut c1 = f64::INFINITY;
    let mut c2 = f64::MIN;
    for &delta in deltas {
        let ratio = predict_total(inst, plan, delta)?.mean_total / (1.0 / delta).ln();
        c1 = c1.min(ratio);
        c2 = c2.max(ratio);
    }
    Ok((c1, c2))
}

// ---------------------------------------------------------------------------
// Minimal-weight decision trees
// ---------------------------------------------------------------------------

/// A stage-outcome decision tree. Nodes are alive sets; choosing an action
/// at a node splits it into the intersections with that action's clusters —
/// the only outcomes a correct stage can produce. Edge weights are the
/// conditional per-stage means, so `expected_cost` at the root is the
/// expected total sample count under the uniform prior.
#[derive(Debug, Clone)]
pub struct DecisionTree {
    pub root: TreeNode,
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub alive: Vec<usize>,
    /// Action applied at this node; `None` at leaves.
    pub action: Option<usize>,
    pub children: Vec<TreeNode>,
    /// Expected remaining samples given θ ∈ alive (uniform over alive).
    pub expected_cost: f64,
}

impl DecisionTree {
    pub fn expected_cost(&self) -> f64 {
        self.root.expected_cost
    }
}

/// Exhaustive minimal-cost tree over all stage outcomes, exact for
/// H ≤ `max_h` (the search is exponential in H).
pub fn mwdt_bruteforce(
    inst: &ProblemInstance,
    plan: &ClusterPlan,
    delta: f64,
    max_h: usize,
) -> Result<DecisionTree> {
    let h = inst.hypotheses();
    if h > max_h || h > 16 {
        return Err(Error::InvalidParameter(format!(
            "brute-force tree search supports at most {} hypotheses, got {h}",
            max_h.min(16)
        )));
    }
    let full: u32 = ((1u64 << h) - 1) as u32;
    let mut memo: Vec<Option<f64>> = vec![None; (full as usize) + 1];
    let cost = best_cost(inst, plan, delta, full, &mut memo)?;
    let root = materialize(inst, plan, delta, full, &mut memo)?;
    debug_assert!((root.expected_cost - cost).abs() <= f64::EPSILON * cost.abs());
    Ok(DecisionTree { root })
}

fn members(mask: u32) -> Vec<usize> {
    (0..32).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Split `mask` by one action's clusters; `None` when the action cannot
/// separate the set. Children are ordered by their smallest member.
fn split(plan: &ClusterPlan, a: usize, mask: u32) -> Option<Vec<u32>> {
    let labels = &plan.actions[a].labels;
    let mut parts: Vec<(usize, u32)> = Vec::new();
    for i in members(mask) {
        let c = labels[i];
        match parts.iter_mut().find(|(cluster, _)| *cluster == c) {
            Some((_, m)) => *m |= 1 << i,
            None => parts.push((c, 1 << i)),
        }
    }
    if parts.len() < 2 {
        return None;
    }
    Some(parts.into_iter().map(|(_, m)| m).collect())
}

/// Expected stage cost of applying `a` at `mask` plus optimal child costs.
fn action_cost(
    inst: &ProblemInstance,
    plan: &ClusterPlan,
    delta: f64,
    mask: u32,
    a: usize,
    memo: &mut Vec<Option<f64>>,
) -> Result<Option<f64>> {
    let Some(children) = split(plan, a, mask) else {
        return Ok(None);
    };
    let alive = members(mask);
    let size = alive.len() as f64;
    let mut total = 0.0;
    for &theta in &alive {
        let stage = predict_stage(inst, plan, &alive, a, delta, theta)?;
        total += stage.expected_samples / size;
    }
    for &child in &children {
        let weight = child.count_ones() as f64 / size;
        total += weight * best_cost(inst, plan, delta, child, memo)?;
    }
    Ok(Some(total))
}

fn best_cost(
    inst: &ProblemInstance,
    plan: &ClusterPlan,
    delta: f64,
    mask: u32,
    memo: &mut Vec<Option<f64>>,
) -> Result<f64> {
    if mask.count_ones() <= 1 {
        return Ok(0.0);
    }
    if let Some(v) = memo[mask as usize] {
        return Ok(v);
    }
    let mut best: Option<f64> = None;
    for a in 0..inst.actions() {
        if let Some(c) = action_cost(inst, plan, delta, mask, a, memo)? {
            best = Some(match best {
                Some(b) if b <= c => b,
                _ => c,
            });
        }
    }
    let best = best.ok_or_else(|| Error::NoEligibleAction {
        alive: members(mask),
    })?;
    memo[mask as usize] = Some(best);
    Ok(best)
}

fn materialize(
    inst: &ProblemInstance,
    plan: &ClusterPlan,
    delta: f64,
    mask: u32,
    memo: &mut Vec<Option<f64>>,
) -> Result<TreeNode> {
    let alive = members(mask);
    if alive.len() <= 1 {
        return Ok(TreeNode {
            alive,
            action: None,
            children: Vec::new(),
            expected_cost: 0.0,
        });
    }
    let mut best: Option<(f64, usize)> = None;
    for a in 0..inst.actions() {
        if let Some(c) = action_cost(inst, plan, delta, mask, a, memo)? {
            match best {
                Some((bc, _)) if bc <= c => {}
                _ => best = Some((c, a)),
            }
        }
    }
    let (cost, action) = best.ok_or_else(|| Error::NoEligibleAction {
        alive: alive.clone(),
    })?;
    let children = split(plan, action, mask)
        .expect("chosen action splits")
        .into_iter()
        .map(|child| materialize(inst, plan, delta, child, memo))
        .collect::<Result<Vec<_>>>()?;
    Ok(TreeNode {
        alive,
        action: Some(action),
        children,
        expected_cost: cost,
    })
}
