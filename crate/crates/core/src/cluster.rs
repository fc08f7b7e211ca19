//! Per-action hypothesis clustering.
//!
//! For each action the hypotheses' output densities are clustered by total
//! variation distance with DBSCAN at MinPts = 1. In that regime DBSCAN
//! reduces exactly to the connected components of the graph with an edge
//! wherever TVD ≤ ε: every cluster is a union of ε-balls, no point is noise,
//! and distinct clusters are more than ε apart. The implementation is a
//! union-find over the pairwise TVD matrix, which is bit-identical to
//! DBSCAN's output here and easier to verify (cf. Ester et al., KDD 1996).
//!
//! Each cluster gets a representative: by default the member with maximal
//! mean, or optionally a virtual mixture density built from point-wise
//! maxima (see [`VirtualRep`]). Setting ε = 0 everywhere degenerates the
//! clusters to exact identical-density classes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{self, Density};
use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::quad::{self, Domain};

/// Slack when asserting quadrature-based expectations against 1.
const CONDITION_TOL: f64 = 1e-9;

/// Rule choosing the per-action proximity parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum EpsilonPolicy {
    /// Family-specific closed-form rule: for all-exponential actions the
    /// smallest 1 - λ_l/λ_m over rate ratios below one; for all-unit-normal
    /// actions the smallest nonzero TVD, 2Φ(|μ_l - μ_m|/2) - 1. Mixed or
    /// unsupported actions fall back to the safe half-minimum-TVD value.
    Proposition,
    /// One fixed ε for every action.
    Fixed { value: f64 },
    /// ε = 0: clusters are exact equivalence classes.
    Zero,
}

/// Cluster representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepSpec {
    /// A real member hypothesis stands for the cluster.
    Real(usize),
    /// The action's virtual mixture stands for the cluster.
    Virtual,
}

/// Clustering of one action.
#[derive(Debug, Clone)]
pub struct ActionPlan {
    pub epsilon: f64,
    /// hypothesis → cluster id (ids ordered by smallest member).
    pub labels: Vec<usize>,
    /// cluster id → sorted members.
    pub clusters: Vec<Vec<usize>>,
    /// cluster id → representative.
    pub reps: Vec<RepSpec>,
    /// Virtual representative data when any rep is virtual.
    pub virtual_rep: Option<VirtualRep>,
    /// Upper-triangular pairwise TVD matrix (row-major, i < j).
    tvd: Vec<f64>,
    hypotheses: usize,
}

impl ActionPlan {
    /// Pairwise TVD looked up from the precomputed matrix.
    pub fn tvd(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.tvd[triangle_index(self.hypotheses, lo, hi)]
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }
}

#[inline]
fn triangle_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Per-action plans for a whole instance.
#[derive(Debug, Clone)]
pub struct ClusterPlan {
    pub actions: Vec<ActionPlan>,
    hypotheses: usize,
}

impl ClusterPlan {
    /// Cluster every action under the given ε policy. Actions are
    /// independent, so the construction is parallel; the plan is immutable
    /// afterwards and computed once per instance.
    pub fn build(inst: &ProblemInstance, policy: &EpsilonPolicy) -> Result<ClusterPlan> {
        let actions: Result<Vec<ActionPlan>> = (0..inst.actions())
            .into_par_iter()
            .map(|a| build_action_plan(inst, a, policy))
            .collect();
        Ok(ClusterPlan {
            actions: actions?,
            hypotheses: inst.hypotheses(),
        })
    }

    /// Assemble a plan from per-action parts (the action-set extension
    /// concatenates clustered and unclustered halves this way).
    pub fn from_actions(actions: Vec<ActionPlan>, hypotheses: usize) -> Self {
        ClusterPlan {
            actions,
            hypotheses,
        }
    }

    /// Replace real representatives by the virtual mixtures of their
    /// actions. Single-cluster actions are left untouched: they cannot
    /// split any alive set, so their representatives never compete.
    pub fn with_virtual_reps(mut self, inst: &ProblemInstance, alpha: Option<f64>) -> Result<Self> {
        for (a, plan) in self.actions.iter_mut().enumerate() {
            if plan.clusters.len() < 2 {
                continue;
            }
            let vr = build_virtual(inst, a, &plan.labels, alpha)?;
            plan.reps = vec![RepSpec::Virtual; plan.clusters.len()];
            plan.virtual_rep = Some(vr);
        }
        Ok(self)
    }

    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    /// Equivalence class of hypothesis `i` under action `a`.
    pub fn equiv(&self, i: usize, a: usize) -> &[usize] {
        let plan = &self.actions[a];
        &plan.clusters[plan.labels[i]]
    }

    /// Non-equivalent representatives of `alive` under `a`: the smallest
    /// member of each cluster intersecting `alive`. These are the stage
    /// contestants; the density each contestant competes with is its
    /// cluster's [`RepSpec`] density.
    pub fn repr(&self, alive: &[usize], a: usize) -> Vec<usize> {
        let plan = &self.actions[a];
        let mut seen = vec![false; plan.clusters.len()];
        let mut out = Vec::new();
        // `alive` is kept sorted, so the first member seen per cluster is
        // the minimal one.
        for &i in alive {
            let c = plan.labels[i];
            if !seen[c] {
                seen[c] = true;
                out.push(i);
            }
        }
        out
    }

    /// The density a cluster competes with during a stage.
    pub fn rep_density<'a>(
        &'a self,
        inst: &'a ProblemInstance,
        a: usize,
        cluster: usize,
    ) -> RepDensity<'a> {
        let plan = &self.actions[a];
        match plan.reps[cluster] {
            RepSpec::Real(k) => RepDensity::Real(inst.density(k, a)),
            RepSpec::Virtual => RepDensity::Virtual(
                plan.virtual_rep
                    .as_ref()
                    .expect("virtual rep present when RepSpec::Virtual"),
                cluster,
            ),
        }
    }
}

/// Evaluable representative density (real member or virtual mixture).
#[derive(Clone, Copy)]
pub enum RepDensity<'a> {
    Real(&'a Density),
    Virtual(&'a VirtualRep, usize),
}

impl RepDensity<'_> {
    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            RepDensity::Real(d) => d.log_density(x),
            RepDensity::Virtual(v, c) => v.log_density(*c, x),
        }
    }
}

fn pairwise_tvd(inst: &ProblemInstance, a: usize) -> Result<Vec<f64>> {
    let h = inst.hypotheses();
    let mut out = Vec::with_capacity(h * (h - 1) / 2);
    for i in 0..h {
        for j in (i + 1)..h {
            out.push(dist::tvd(inst.density(i, a), inst.density(j, a))?.value);
        }
    }
    Ok(out)
}

fn build_action_plan(
    inst: &ProblemInstance,
    a: usize,
    policy: &EpsilonPolicy,
) -> Result<ActionPlan> {
    let epsilon = match policy {
        EpsilonPolicy::Proposition => select_epsilon(inst, a)?,
        EpsilonPolicy::Fixed { value } => {
            if !(*value >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "ε must be nonnegative, got {value}"
                )));
            }
            *value
        }
        EpsilonPolicy::Zero => 0.0,
    };
    let h = inst.hypotheses();
    let tvd = pairwise_tvd(inst, a)?;
    let labels = components_from_matrix(h, &tvd, epsilon);
    let clusters = clusters_from_labels(&labels);
    let reps = clusters
        .iter()
        .map(|members| RepSpec::Real(select_representative(inst, a, members)))
        .collect();
    Ok(ActionPlan {
        epsilon,
        labels,
        clusters,
        reps,
        virtual_rep: None,
        tvd,
        hypotheses: h,
    })
}

fn components_from_matrix(h: usize, tvd: &[f64], epsilon: f64) -> Vec<usize> {
    // Union-find with path halving.
    let mut parent: Vec<usize> = (0..h).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut idx = 0;
    for i in 0..h {
        for j in (i + 1)..h {
            if tvd[idx] <= epsilon {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                    parent[hi] = lo;
                }
            }
            idx += 1;
        }
    }
    // Canonical ids in order of smallest member.
    let mut labels = vec![usize::MAX; h];
    let mut next = 0;
    for i in 0..h {
        let root = find(&mut parent, i);
        if labels[root] == usize::MAX {
            labels[root] = next;
            next += 1;
        }
        labels[i] = labels[root];
    }
    labels
}

fn clusters_from_labels(labels: &[usize]) -> Vec<Vec<usize>> {
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut clusters = vec![Vec::new(); count];
    for (i, &c) in labels.iter().enumerate() {
        clusters[c].push(i);
    }
    clusters
}

/// Cluster one action's densities with the ε-threshold component rule.
pub fn dbscan_tvd(inst: &ProblemInstance, a: usize, epsilon: f64) -> Result<Vec<usize>> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ε must be nonnegative, got {epsilon}"
        )));
    }
    let tvd = pairwise_tvd(inst, a)?;
    Ok(components_from_matrix(inst.hypotheses(), &tvd, epsilon))
}

/// Proximity parameter for one action.
///
/// All-exponential actions use min over rate ratios below one of
/// 1 - λ_l/λ_m; all-unit-normal actions use the smallest nonzero TVD,
/// min 2Φ(|μ_l - μ_m|/2) - 1. Anything else falls back to the safe value
/// η_a = ½ · min_i min_{g ≠ f_i} TVD(g - f_i), which isolates every
/// hypothesis from its non-identical densities.
pub fn select_epsilon(inst: &ProblemInstance, a: usize) -> Result<f64> {
    let h = inst.hypotheses();
    let all_exponential = (0..h).all(|i| matches!(inst.density(i, a), Density::Exponential { .. }));
    let all_normal = (0..h).all(|i| matches!(inst.density(i, a), Density::UnitNormal { .. }));
    if all_exponential {
        let mut best: Option<f64> = None;
        for l in 0..h {
            for m in 0..h {
                let (dl, dm) = (inst.density(l, a), inst.density(m, a));
                if dl.same_distribution(dm) {
                    continue;
                }
                if let (Density::Exponential { rate: rl }, Density::Exponential { rate: rm }) =
                    (dl, dm)
                {
                    let ratio = rl / rm;
                    if ratio < 1.0 {
                        let candidate = 1.0 - ratio;
                        best = Some(best.map_or(candidate, |b: f64| b.min(candidate)));
                    }
                }
            }
        }
        return best.ok_or_else(|| {
            Error::AssumptionViolated(format!("action {a}: all densities identical"))
        });
    }
    if all_normal {
        let mut best: Option<f64> = None;
        for l in 0..h {
            for m in (l + 1)..h {
                let (dl, dm) = (inst.density(l, a), inst.density(m, a));
                if dl.same_distribution(dm) {
                    continue;
                }
                let t = dist::tvd(dl, dm)?.value;
                best = Some(best.map_or(t, |b: f64| b.min(t)));
            }
        }
        return best.ok_or_else(|| {
            Error::AssumptionViolated(format!("action {a}: all densities identical"))
        });
    }
    lemma_safe_epsilon(inst, a)
}

/// The trivial safe proximity value: half the smallest nonzero pairwise TVD.
pub fn lemma_safe_epsilon(inst: &ProblemInstance, a: usize) -> Result<f64> {
    let h = inst.hypotheses();
    let mut best: Option<f64> = None;
    for i in 0..h {
        for j in (i + 1)..h {
            let t = dist::tvd(inst.density(i, a), inst.density(j, a))?.value;
            if t > 0.0 {
                best = Some(best.map_or(t, |b: f64| b.min(t)));
            }
        }
    }
    best.map(|t| 0.5 * t)
        .ok_or_else(|| Error::AssumptionViolated(format!("action {a}: all densities identical")))
}

/// Representative of one cluster: the member with maximal mean, ties broken
/// by the smallest hypothesis index.
pub fn select_representative(inst: &ProblemInstance, a: usize, cluster: &[usize]) -> usize {
    debug_assert!(!cluster.is_empty());
    let mut best = cluster[0];
    let mut best_mean = inst.density(best, a).mean();
    for &i in &cluster[1..] {
        let m = inst.density(i, a).mean();
        if m > best_mean {
            best = i;
            best_mean = m;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Representative condition
// ---------------------------------------------------------------------------

/// One evaluated triple of the representative condition.
#[derive(Debug, Clone)]
pub struct ConditionEntry {
    /// Hypothesis generating the samples.
    pub hypothesis: usize,
    /// Rival cluster whose representative enters the numerator.
    pub other_cluster: usize,
    /// E_{f_i}[ f_rep(other) / f_rep(own) ].
    pub expectation: f64,
    pub holds: bool,
}

/// Condition report for one action.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub action: usize,
    pub entries: Vec<ConditionEntry>,
    pub all_hold: bool,
    /// For all-exponential actions with real reps: whether every triple
    /// satisfies the rate precondition λ_rep(other) + λ_i > λ_rep(own)
    /// guaranteeing a finite expectation.
    pub rate_precondition_ok: Option<bool>,
}

/// Verify E_{f_i^a}[f_rep(j)/f_rep(i)] ≤ 1 for every hypothesis i and every
/// rival cluster j. Violations are report entries, not errors.
pub fn check_condition(
    inst: &ProblemInstance,
    a: usize,
    plan: &ClusterPlan,
) -> Result<ConditionReport> {
    let action = &plan.actions[a];
    let h = inst.hypotheses();
    let mut entries = Vec::new();
    let all_exponential = (0..h).all(|i| matches!(inst.density(i, a), Density::Exponential { .. }));
    let real_reps = action.reps.iter().all(|r| matches!(r, RepSpec::Real(_)));
    let mut rate_ok = if all_exponential && real_reps {
        Some(true)
    } else {
        None
    };

    for i in 0..h {
        let own = action.labels[i];
        for other in 0..action.clusters.len() {
            if other == own {
                continue;
            }
            let expectation = match (&action.reps[other], &action.reps[own]) {
                (RepSpec::Real(j), RepSpec::Real(k)) => {
                    if let (
                        Density::Exponential { rate: lj },
                        Density::Exponential { rate: lk },
                        Density::Exponential { rate: li },
                    ) = (inst.density(*j, a), inst.density(*k, a), inst.density(i, a))
                    {
                        if lj + li <= *lk {
                            if let Some(ok) = rate_ok.as_mut() {
                                *ok = false;
                            }
                        }
                    }
                    dist::likelihood_ratio_expectation(
                        inst.density(i, a),
                        inst.density(*j, a),
                        inst.density(*k, a),
                    )?
                }
                _ => {
                    let vr = action
                        .virtual_rep
                        .as_ref()
                        .expect("virtual rep present when RepSpec::Virtual");
                    vr.cross_expectation(inst.density(i, a), other, own)?
                }
            };
            entries.push(ConditionEntry {
                hypothesis: i,
                other_cluster: other,
                expectation,
                holds: expectation <= 1.0 + CONDITION_TOL,
            });
        }
    }
    let all_hold = entries.iter().all(|e| e.holds);
    Ok(ConditionReport {
        action: a,
        entries,
        all_hold,
        rate_precondition_ok: rate_ok,
    })
}

// ---------------------------------------------------------------------------
// Virtual representatives
// ---------------------------------------------------------------------------

/// Virtual cluster representatives for one action.
///
/// For cluster i let g_i(x) be the point-wise maximum of its member
/// densities and M_i = ∫ g_i. The representative of cluster i is the
/// normalized mixture r_i(x)/B_i with
///
///   r_i(x) = (1-α) g_i(x) + Σ_{j≠i} α/(k-1) g_j(x),
///   B_i    = (1-α) M_i    + Σ_{j≠i} α/(k-1) M_j,
///
/// where k is the number of clusters. The mixing weight α keeps the own
/// cluster dominant and satisfies
///
///   α ≤ Δ_a / ((M_a-1)/M_a · (k-1) + k·Δ_a) ≤ 1/k,
///
/// with Δ_a = max_{i,j} ∫ |g_j - g_i| and M_a = max_i M_i. Construction
/// chooses equality unless the caller supplies a smaller α.
#[derive(Debug, Clone)]
pub struct VirtualRep {
    pub action: usize,
    /// Cluster memberships (sorted hypothesis indices).
    pub clusters: Vec<Vec<usize>>,
    /// Mixing weight distributed over rival clusters.
    pub alpha: f64,
    /// Largest admissible mixing weight for this geometry.
    pub alpha_bound: f64,
    /// Per-cluster point-wise-max masses M_i ≥ 1.
    pub m: Vec<f64>,
    /// M_a = max_i M_i.
    pub m_max: f64,
    /// Δ_a = max_{i,j} ∫ |g_j - g_i|.
    pub delta: f64,
    /// Per-cluster normalizers B_i ≥ 1.
    pub b: Vec<f64>,
    densities: Vec<Vec<Density>>,
    domain: Domain,
}

impl VirtualRep {
    /// Point-wise maximum of cluster c's member densities.
    pub fn g(&self, c: usize, x: f64) -> f64 {
        self.densities[c]
            .iter()
            .map(|d| d.density(x))
            .fold(0.0, f64::max)
    }

    /// Unnormalized mixture r_c(x).
    pub fn r(&self, c: usize, x: f64) -> f64 {
        let k = self.clusters.len();
        let mut acc = 0.0;
        for j in 0..k {
            let w = if j == c {
                1.0 - self.alpha
            } else {
                self.alpha / (k as f64 - 1.0)
            };
            acc += w * self.g(j, x);
        }
        acc
    }

    /// ln( r_c(x) / B_c ), the representative's log-density.
    pub fn log_density(&self, c: usize, x: f64) -> f64 {
        let r = self.r(c, x);
        if r == 0.0 {
            f64::NEG_INFINITY
        } else {
            r.ln() - self.b[c].ln()
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// E_{f}[ (r_j/B_j) / (r_i/B_i) ] by quadrature.
    pub fn cross_expectation(&self, f: &Density, j: usize, i: usize) -> Result<f64> {
        let vr = self.clone();
        let f = *f;
        let r = quad::integrate(
            move |x| {
                let fi = f.density(x);
                if fi == 0.0 {
                    return 0.0;
                }
                let num = vr.r(j, x) / vr.b[j];
                let den = vr.r(i, x) / vr.b[i];
                if den == 0.0 {
                    0.0
                } else {
                    fi * num / den
                }
            },
            self.domain,
        )?;
        Ok(r.value)
    }

    /// E_{f}[ ln((r_i/B_i)/(r_j/B_j)) ], the virtual drift term.
    pub fn drift(&self, f: &Density, i: usize, j: usize) -> Result<f64> {
        let vr = self.clone();
        let f = *f;
        let r = quad::integrate(
            move |x| {
                let fi = f.density(x);
                if fi == 0.0 {
                    return 0.0;
                }
                fi * (vr.log_density(i, x) - vr.log_density(j, x))
            },
            self.domain,
        )?;
        Ok(r.value)
    }

    /// ∫ r_c/B_c, which must be 1 up to quadrature tolerance.
    pub fn normalization(&self, c: usize) -> Result<f64> {
        let vr = self.clone();
        let r = quad::integrate(move |x| vr.r(c, x) / vr.b[c], self.domain)?;
        Ok(r.value)
    }
}

/// Build the virtual representatives of one action from its cluster labels.
/// Requires at least two clusters.
pub fn build_virtual(
    inst: &ProblemInstance,
    a: usize,
    labels: &[usize],
    alpha: Option<f64>,
) -> Result<VirtualRep> {
    let clusters = clusters_from_labels(labels);
    let k = clusters.len();
    if k < 2 {
        return Err(Error::ClusteringViolation(format!(
            "action {a}: virtual representatives need ≥ 2 clusters, got {k}"
        )));
    }
    let densities: Vec<Vec<Density>> = clusters
        .iter()
        .map(|members| members.iter().map(|&i| *inst.density(i, a)).collect())
        .collect();
    let domain = if densities
        .iter()
        .flatten()
        .any(|d| matches!(d, Density::UnitNormal { .. }))
    {
        Domain::RealLine
    } else {
        Domain::HalfLine
    };

    let g_of = |c: usize, x: f64, densities: &Vec<Vec<Density>>| -> f64 {
        densities[c]
            .iter()
            .map(|d| d.density(x))
            .fold(0.0, f64::max)
    };

    let mut m = Vec::with_capacity(k);
    for c in 0..k {
        let ds = densities.clone();
        let value = quad::integrate(move |x| g_of(c, x, &ds), domain)?.value;
        m.push(value);
    }
    let m_max = m.iter().cloned().fold(f64::MIN, f64::max);

    let mut delta = 0.0f64;
    for i in 0..k {
        for j in (i + 1)..k {
            let ds = densities.clone();
            let d =
                quad::integrate(move |x| (g_of(j, x, &ds) - g_of(i, x, &ds)).abs(), domain)?.value;
            delta = delta.max(d);
        }
    }

    let kf = k as f64;
    let alpha_bound = delta / ((m_max - 1.0) / m_max * (kf - 1.0) + kf * delta);
    let alpha = match alpha {
        Some(a_given) => {
            if !(a_given > 0.0 && a_given <= alpha_bound + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "α must lie in (0, {alpha_bound:.6}], got {a_given}"
                )));
            }
            a_given
        }
        None => alpha_bound,
    };

    let b: Vec<f64> = (0..k)
        .map(|i| {
            let mut acc = (1.0 - alpha) * m[i];
            for (j, mj) in m.iter().enumerate() {
                if j != i {
                    acc += alpha / (kf - 1.0) * mj;
                }
            }
            acc
        })
        .collect();

    Ok(VirtualRep {
        action: a,
        clusters,
        alpha,
        alpha_bound,
        m,
        m_max,
        delta,
        b,
        densities,
        domain,
    })
}

// ---------------------------------------------------------------------------
// Plan text format
// ---------------------------------------------------------------------------

/// Serialize a plan next to its instance file: per action the ε, the label
/// vector, the representative kinds, and the virtual mixing weight when one
/// is in use.
pub fn plan_to_text(plan: &ClusterPlan) -> String {
    let mut out = String::new();
    out.push_str("phidelta-plan v1\n");
    out.push_str(&format!("hypotheses {}\n", plan.hypotheses));
    out.push_str(&format!("actions {}\n", plan.actions.len()));
    for (a, action) in plan.actions.iter().enumerate() {
        out.push_str(&format!("action {a} epsilon {:.16e}\n", action.epsilon));
        let labels: Vec<String> = action.labels.iter().map(|l| l.to_string()).collect();
        out.push_str(&format!("labels {a} {}\n", labels.join(" ")));
        for (c, rep) in action.reps.iter().enumerate() {
            match rep {
                RepSpec::Real(k) => out.push_str(&format!("rep {a} {c} real {k}\n")),
                RepSpec::Virtual => out.push_str(&format!("rep {a} {c} virtual\n")),
            }
        }
        if let Some(vr) = &action.virtual_rep {
            out.push_str(&format!("alpha {a} {:.16e}\n", vr.alpha));
        }
    }
    out
}

/// Rebuild a plan from its text form against the instance it was built for.
/// TVD matrices and virtual mixtures are recomputed; labels and
/// representative choices are taken from the file, with the invariant that a
/// real representative belongs to its own cluster enforced on load.
pub fn plan_from_text(text: &str, inst: &ProblemInstance) -> Result<ClusterPlan> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty plan file".into()))?;
    if header.trim() != "phidelta-plan v1" {
        return Err(Error::Parse(format!("unknown plan header {header:?}")));
    }
    let h = inst.hypotheses();
    let mut epsilons: Vec<Option<f64>> = vec![None; inst.actions()];
    let mut labels: Vec<Option<Vec<usize>>> = vec![None; inst.actions()];
    let mut reps: Vec<Vec<(usize, Option<usize>)>> = vec![Vec::new(); inst.actions()];
    let mut alphas: Vec<Option<f64>> = vec![None; inst.actions()];

    let parse_usize = |tok: Option<&str>, what: &str| -> Result<usize> {
        tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
            .parse()
            .map_err(|_| Error::Parse(format!("malformed {what}")))
    };
    let parse_f64 = |tok: Option<&str>, what: &str| -> Result<f64> {
        tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
            .parse()
            .map_err(|_| Error::Parse(format!("malformed {what}")))
    };
    let check_action = |a: usize| -> Result<usize> {
        if a >= inst.actions() {
            return Err(Error::Parse(format!("action {a} outside instance")));
        }
        Ok(a)
    };

    for line in lines {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("hypotheses") => {
                if parse_usize(tok.next(), "hypotheses")? != h {
                    return Err(Error::Structural(
                        "plan hypothesis count does not match instance".into(),
                    ));
                }
            }
            Some("actions") => {
                if parse_usize(tok.next(), "actions")? != inst.actions() {
                    return Err(Error::Structural(
                        "plan action count does not match instance".into(),
                    ));
                }
            }
            Some("action") => {
                let a = check_action(parse_usize(tok.next(), "action id")?)?;
                if tok.next() != Some("epsilon") {
                    return Err(Error::Parse("expected `epsilon`".into()));
                }
                epsilons[a] = Some(parse_f64(tok.next(), "epsilon")?);
            }
            Some("labels") => {
                let a = check_action(parse_usize(tok.next(), "labels action")?)?;
                let v: Vec<usize> = tok
                    .map(|t| {
                        t.parse()
                            .map_err(|_| Error::Parse("malformed label".into()))
                    })
                    .collect::<Result<_>>()?;
                if v.len() != h {
                    return Err(Error::Structural(format!(
                        "labels for action {a} cover {} hypotheses, expected {h}",
                        v.len()
                    )));
                }
                labels[a] = Some(v);
            }
            Some("rep") => {
                let a = check_action(parse_usize(tok.next(), "rep action")?)?;
                let c = parse_usize(tok.next(), "rep cluster")?;
                match tok.next() {
                    Some("real") => reps[a].push((c, Some(parse_usize(tok.next(), "rep index")?))),
                    Some("virtual") => reps[a].push((c, None)),
                    other => return Err(Error::Parse(format!("unknown rep kind {other:?}"))),
                }
            }
            Some("alpha") => {
                let a = check_action(parse_usize(tok.next(), "alpha action")?)?;
                alphas[a] = Some(parse_f64(tok.next(), "alpha")?);
            }
            Some(other) => return Err(Error::Parse(format!("unknown plan record {other:?}"))),
            None => {}
        }
    }

    let mut actions = Vec::with_capacity(inst.actions());
    for a in 0..inst.actions() {
        let epsilon =
            epsilons[a].ok_or_else(|| Error::Structural(format!("plan missing action {a}")))?;
        let lab = labels[a]
            .take()
            .ok_or_else(|| Error::Structural(format!("plan missing labels for action {a}")))?;
        let clusters = clusters_from_labels(&lab);
        let mut rep_specs: Vec<Option<RepSpec>> = vec![None; clusters.len()];
        let mut any_virtual = false;
        for &(c, real) in &reps[a] {
            if c >= clusters.len() {
                return Err(Error::Structural(format!(
                    "rep for unknown cluster {c} of action {a}"
                )));
            }
            rep_specs[c] = Some(match real {
                Some(k) => {
                    if !clusters[c].contains(&k) {
                        return Err(Error::Structural(format!(
                            "representative {k} does not belong to cluster {c} of action {a}"
                        )));
                    }
                    RepSpec::Real(k)
                }
                None => {
                    any_virtual = true;
                    RepSpec::Virtual
                }
            });
        }
        let rep_specs: Vec<RepSpec> = rep_specs
            .into_iter()
            .enumerate()
            .map(|(c, r)| {
                r.ok_or_else(|| {
                    Error::Structural(format!("plan missing rep for cluster {c} of action {a}"))
                })
            })
            .collect::<Result<_>>()?;
        let virtual_rep = if any_virtual {
            Some(build_virtual(inst, a, &lab, alphas[a])?)
        } else {
            None
        };
        let tvd = pairwise_tvd(inst, a)?;
        actions.push(ActionPlan {
            epsilon,
            labels: lab,
            clusters,
            reps: rep_specs,
            virtual_rep,
            tvd,
            hypotheses: h,
        });
    }
    Ok(ClusterPlan {
        actions,
        hypotheses: h,
    })
}
