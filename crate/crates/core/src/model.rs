//! Problem instances and assumption validation.
//!
//! A problem instance is an H×|A| matrix of densities under a uniform prior:
//! cell (i, a) is the output density of action a when hypothesis i is true.
//! Three assumptions are validated, mirroring the model contract:
//!
//! - **Separation**: per action, each pairwise TVD is either exactly zero
//!   (identical parameters) or above a small floor.
//! - **Validity**: every hypothesis pair is separated by some action, and no
//!   action is entirely uninformative.
//! - **Finite LLR variance**: the worst-case second moment of a single-sample
//!   LLR is finite; it is computed here as a certificate, not assumed.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{self, Density};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Pairwise TVDs below this floor but above exact-equality are flagged as
/// separation violations: the model promises a dichotomy.
pub const TVD_ZERO_FLOOR: f64 = 1e-9;

/// Hypotheses × actions density matrix with a uniform prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    /// densities[i][a] is the output density of action a under hypothesis i.
    densities: Vec<Vec<Density>>,
    hypotheses: usize,
    actions: usize,
}

impl ProblemInstance {
    /// Build from a complete row-major matrix (one row per hypothesis).
    pub fn new(densities: Vec<Vec<Density>>) -> Result<Self> {
        let hypotheses = densities.len();
        if hypotheses < 2 {
            return Err(Error::Structural(format!(
                "need at least 2 hypotheses, got {hypotheses}"
            )));
        }
        let actions = densities[0].len();
        if actions == 0 {
            return Err(Error::Structural("need at least 1 action".into()));
        }
        for (i, row) in densities.iter().enumerate() {
            if row.len() != actions {
                return Err(Error::Structural(format!(
                    "hypothesis {i} has {} cells, expected {actions}",
                    row.len()
                )));
            }
        }
        Ok(ProblemInstance {
            densities,
            hypotheses,
            actions,
        })
    }

    /// Build from sparse (hypothesis, action, density) records; every cell
    /// must appear exactly once.
    pub fn from_cells(
        hypotheses: usize,
        actions: usize,
        cells: &[(usize, usize, Density)],
    ) -> Result<Self> {
        let mut grid: Vec<Vec<Option<Density>>> = vec![vec![None; actions]; hypotheses];
        for &(i, a, d) in cells {
            if i >= hypotheses || a >= actions {
                return Err(Error::Structural(format!(
                    "cell ({i}, {a}) outside {hypotheses}x{actions} matrix"
                )));
            }
            if grid[i][a].replace(d).is_some() {
                return Err(Error::Structural(format!("duplicate cell ({i}, {a})")));
            }
        }
        let mut densities = Vec::with_capacity(hypotheses);
        for (i, row) in grid.into_iter().enumerate() {
            let mut out = Vec::with_capacity(actions);
            for (a, cell) in row.into_iter().enumerate() {
                match cell {
                    Some(d) => out.push(d),
                    None => return Err(Error::Structural(format!("missing cell ({i}, {a})"))),
                }
            }
            let _ = i;
            densities.push(out);
        }
        ProblemInstance::new(densities)
    }

    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    /// Uniform prior mass of one hypothesis.
    pub fn prior(&self) -> f64 {
        1.0 / self.hypotheses as f64
    }

    pub fn density(&self, hypothesis: usize, action: usize) -> &Density {
        &self.densities[hypothesis][action]
    }

    pub fn rows(&self) -> &[Vec<Density>] {
        &self.densities
    }
}

/// Outcome of validating one instance against the model assumptions.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// Per action: true when every pairwise TVD is 0 or above the floor.
    pub separation_ok: Vec<bool>,
    /// Per action: smallest nonzero pairwise TVD, if any pair is separated.
    pub min_nonzero_tvd: Vec<Option<f64>>,
    /// Every pair separated by some action and no all-zero action.
    pub validity_ok: bool,
    /// Actions whose densities are pairwise identical (uninformative).
    pub uninformative_actions: Vec<usize>,
    /// Hypothesis pairs no action separates.
    pub unseparated_pairs: Vec<(usize, usize)>,
    /// Certificate for the finite-LLR-variance assumption:
    /// max over (i, j, a) of E_{f_i^a}[(ln f_i^a/f_j^a)²].
    pub llr_second_moment_bound: f64,
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.separation_ok.iter().all(|&b| b)
            && self.validity_ok
            && self.llr_second_moment_bound.is_finite()
    }
}

/// Validate separation, validity, and the LLR-variance certificate.
pub fn validate(inst: &ProblemInstance) -> Result<AssumptionReport> {
    let h = inst.hypotheses();
    let a_count = inst.actions();
    let mut separation_ok = vec![true; a_count];
    let mut min_nonzero_tvd = vec![None; a_count];
    let mut uninformative_actions = Vec::new();
    let mut pair_separated = vec![false; h * h];
    let mut beta: f64 = 0.0;

    for a in 0..a_count {
        let mut any_nonzero = false;
        for i in 0..h {
            for j in (i + 1)..h {
                let t = dist::tvd(inst.density(i, a), inst.density(j, a))?.value;
                if t > 0.0 {
                    if t <= TVD_ZERO_FLOOR {
                        separation_ok[a] = false;
                    }
                    any_nonzero = true;
                    pair_separated[i * h + j] = true;
                    let entry = min_nonzero_tvd[a].get_or_insert(t);
                    if t < *entry {
                        *entry = t;
                    }
                }
            }
        }
        if !any_nonzero {
            uninformative_actions.push(a);
        }
        for i in 0..h {
            for j in 0..h {
                if i != j {
                    let m = dist::llr_second_moment(inst.density(i, a), inst.density(j, a))?;
                    if m > beta {
                        beta = m;
                    }
                }
            }
        }
    }

    let mut unseparated_pairs = Vec::new();
    for i in 0..h {
        for j in (i + 1)..h {
            if !pair_separated[i * h + j] {
                unseparated_pairs.push((i, j));
            }
        }
    }
    let validity_ok = unseparated_pairs.is_empty() && uninformative_actions.is_empty();

    Ok(AssumptionReport {
        separation_ok,
        min_nonzero_tvd,
        validity_ok,
        uninformative_actions,
        unseparated_pairs,
        llr_second_moment_bound: beta,
    })
}

/// Distribution family of a generated scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Exponential,
    UnitNormal,
}

/// Construction recipe for the two-group simulation scenario: half of the
/// hypotheses sit near a low mean and half near a high mean (a fresh
/// balanced split per action), each cell contaminated by uniform noise, and
/// the first and last hypotheses tied everywhere except the final action,
/// where their means mirror around low+high.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: Family,
    pub hypotheses: usize,
    pub actions: usize,
    #[serde(default = "default_low_mean")]
    pub low_mean: f64,
    #[serde(default = "default_high_mean")]
    pub high_mean: f64,
    /// Half-width of the uniform contamination added to each base mean.
    #[serde(default = "default_noise")]
    pub noise_half_width: f64,
    /// Tie the first and last hypotheses on all but the last action and
    /// mirror them on the last one.
    #[serde(default = "default_tie")]
    pub tie_rule: bool,
    pub seed: u64,
}

fn default_low_mean() -> f64 {
    2.0
}

fn default_high_mean() -> f64 {
    8.0
}

fn default_noise() -> f64 {
    0.1
}

fn default_tie() -> bool {
    true
}

impl ScenarioSpec {
    /// The two-group scenario at reference scale: 32 hypotheses,
    /// 16 actions, base means 2 and 8, ±0.1 contamination, tie rule on.
    pub fn reference_scale(family: Family, seed: u64) -> Self {
        ScenarioSpec {
            family,
            hypotheses: 32,
            actions: 16,
            low_mean: 2.0,
            high_mean: 8.0,
            noise_half_width: 0.1,
            tie_rule: true,
            seed,
        }
    }

    fn check(&self) -> Result<()> {
        if self.hypotheses < 2 || !self.hypotheses.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "scenario needs an even number (≥2) of hypotheses, got {}",
                self.hypotheses
            )));
        }
        if self.actions == 0 {
            return Err(Error::InvalidParameter("scenario needs ≥1 action".into()));
        }
        if !(self.low_mean > 0.0 && self.high_mean > self.low_mean) {
            return Err(Error::InvalidParameter(
                "scenario means must satisfy 0 < low < high".into(),
            ));
        }
        if !(self.noise_half_width >= 0.0 && self.noise_half_width < self.low_mean) {
            return Err(Error::InvalidParameter(
                "noise half-width must be in [0, low_mean)".into(),
            ));
        }
        Ok(())
    }
}

/// Draw the mean matrix for a scenario. The same drawn means serve both
/// families, so exponential and normal instances generated from one seed are
/// directly comparable; for the exponential family the drawn value is the
/// mean (rate = 1/mean).
pub fn draw_mean_matrix(spec: &ScenarioSpec) -> Result<Vec<Vec<f64>>> {
    spec.check()?;
    let h = spec.hypotheses;
    let mut rng = rng_from_seed(spec.seed);
    let mut means = vec![vec![0.0; spec.actions]; h];
    let mut order: Vec<usize> = (0..h).collect();
    for a in 0..spec.actions {
        // Balanced random split: the first half of a fresh shuffle takes the
        // low base mean, the rest the high one.
        order.shuffle(&mut rng);
        let mut base = vec![spec.high_mean; h];
        for &i in order.iter().take(h / 2) {
            base[i] = spec.low_mean;
        }
        for (row, b) in means.iter_mut().zip(&base) {
            let noise = rng.random_range(-spec.noise_half_width..=spec.noise_half_width);
            row[a] = b + noise;
        }
    }
    if spec.tie_rule {
        let last_h = h - 1;
        let mirror = spec.low_mean + spec.high_mean;
        let tied = means[last_h].clone();
        means[0].copy_from_slice(&tied);
        let last_a = spec.actions - 1;
        means[0][last_a] = mirror - tied[last_a];
    }
    Ok(means)
}

fn density_from_mean(family: Family, mean: f64) -> Result<Density> {
    match family {
        Family::UnitNormal => Density::unit_normal(mean),
        Family::Exponential => Density::exponential(1.0 / mean),
    }
}

/// Generate a scenario instance; the output is a pure function of its spec.
pub fn build_scenario(spec: &ScenarioSpec) -> Result<ProblemInstance> {
    let means = draw_mean_matrix(spec)?;
    build_from_means(spec.family, &means)
}

/// Build an instance from an explicit mean matrix.
pub fn build_from_means(family: Family, means: &[Vec<f64>]) -> Result<ProblemInstance> {
    let densities = means
        .iter()
        .map(|row| {
            row.iter()
                .map(|&m| density_from_mean(family, m))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let inst = ProblemInstance::new(densities)?;
    let report = validate(&inst)?;
    if !report.validity_ok {
        return Err(Error::AssumptionViolated(format!(
            "generated scenario violates validity: uninformative actions {:?}, unseparated pairs {:?}",
            report.uninformative_actions, report.unseparated_pairs
        )));
    }
    if report.separation_ok.iter().any(|&ok| !ok) {
        return Err(Error::AssumptionViolated(
            "generated scenario has a pairwise TVD below the dichotomy floor".into(),
        ));
    }
    Ok(inst)
}

/// The 3-hypothesis, 3-action unit-normal instance exhibiting greedy
/// suboptimality. Rows are actions, columns hypotheses:
/// action 0 → (0, √2, √2); action 1 → (√(4/3-ξ), √(4/3-ξ), 0);
/// action 2 → (0, 1, 2). Requires 0 < ξ < 1/3.
pub fn build_counterexample(xi: f64) -> Result<ProblemInstance> {
    if !(xi > 0.0 && xi < 1.0 / 3.0) {
        return Err(Error::InvalidParameter(format!(
            "ξ must lie in (0, 1/3), got {xi}"
        )));
    }
    let s2 = 2.0_f64.sqrt();
    let m2 = (4.0 / 3.0 - xi).sqrt();
    let table = [
        [0.0, s2, s2],   // action 0
        [m2, m2, 0.0],   // action 1
        [0.0, 1.0, 2.0], // action 2
    ];
    let mut rows: Vec<Vec<Density>> = (0..3).map(|_| Vec::with_capacity(3)).collect();
    for action in &table {
        for (i, &mean) in action.iter().enumerate() {
            rows[i].push(Density::unit_normal(mean)?);
        }
    }
    ProblemInstance::new(rows)
}

/// Draw a hypothesis index from the uniform prior.
pub fn sample_prior<R: Rng + ?Sized>(inst: &ProblemInstance, rng: &mut R) -> usize {
    rng.random_range(0..inst.hypotheses())
}

/// Chain construction: H-1 actions where action r isolates hypothesis r
/// from everything else (all other cells identical), so the greedy rule
/// discards exactly one hypothesis per stage and the stage count grows
/// linearly in H.
pub fn build_chain(h: usize) -> Result<ProblemInstance> {
    if h < 2 {
        return Err(Error::InvalidParameter("chain needs H ≥ 2".into()));
    }
    let rows: Result<Vec<Vec<Density>>> = (0..h)
        .map(|i| {
            (0..h - 1)
                .map(|a| Density::unit_normal(if i == a { 10.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    ProblemInstance::new(rows?)
}

/// Halving construction for H = 2^m: action b splits the hypotheses by bit
/// b of their index, so each stage discards half of the alive set and every
/// hypothesis is identified in exactly m stages.
pub fn build_halving(h: usize) -> Result<ProblemInstance> {
    if h < 2 || !h.is_power_of_two() {
        return Err(Error::InvalidParameter(
            "halving construction needs H = 2^m ≥ 2".into(),
        ));
    }
    let bits = h.trailing_zeros() as usize;
    let rows: Result<Vec<Vec<Density>>> = (0..h)
        .map(|i| {
            (0..bits)
                .map(|b| Density::unit_normal(if (i >> b) & 1 == 1 { 10.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    ProblemInstance::new(rows?)
}

// ---------------------------------------------------------------------------
// Instance text format
// ---------------------------------------------------------------------------

/// Serialize an instance to the plain-text cell format: a header followed by
/// one `cell <i> <a> <family> <param>` record per matrix cell, parameters
/// printed with 17 significant digits so the round trip is exact.
pub fn instance_to_text(inst: &ProblemInstance) -> String {
    let mut out = String::new();
    out.push_str("phidelta-instance v1\n");
    out.push_str(&format!("hypotheses {}\n", inst.hypotheses()));
    out.push_str(&format!("actions {}\n", inst.actions()));
    for i in 0..inst.hypotheses() {
        for a in 0..inst.actions() {
            let (family, param) = match *inst.density(i, a) {
                Density::Exponential { rate } => ("exponential", rate),
                Density::UnitNormal { mean } => ("unit_normal", mean),
            };
            out.push_str(&format!("cell {i} {a} {family} {param:.16e}\n"));
        }
    }
    out
}

/// Parse the text format produced by [`instance_to_text`].
pub fn instance_from_text(text: &str) -> Result<ProblemInstance> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty instance file".into()))?;
    if header.trim() != "phidelta-instance v1" {
        return Err(Error::Parse(format!("unknown header {header:?}")));
    }
    let mut hypotheses = None;
    let mut actions = None;
    let mut cells = Vec::new();
    for line in lines {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("hypotheses") => {
                hypotheses = Some(parse_field::<usize>(tok.next(), "hypotheses")?)
            }
            Some("actions") => actions = Some(parse_field::<usize>(tok.next(), "actions")?),
            Some("cell") => {
                let i = parse_field::<usize>(tok.next(), "cell hypothesis")?;
                let a = parse_field::<usize>(tok.next(), "cell action")?;
                let family = tok
                    .next()
                    .ok_or_else(|| Error::Parse("cell missing family".into()))?;
                let param = parse_field::<f64>(tok.next(), "cell parameter")?;
                let d = match family {
                    "exponential" => Density::exponential(param)?,
                    "unit_normal" => Density::unit_normal(param)?,
                    other => return Err(Error::Parse(format!("unknown family {other:?}"))),
                };
                cells.push((i, a, d));
            }
            Some(other) => return Err(Error::Parse(format!("unknown record {other:?}"))),
            None => {}
        }
    }
    let hypotheses = hypotheses.ok_or_else(|| Error::Parse("missing hypotheses count".into()))?;
    let actions = actions.ok_or_else(|| Error::Parse("missing actions count".into()))?;
    ProblemInstance::from_cells(hypotheses, actions, &cells)
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse::<T>()
        .map_err(|_| Error::Parse(format!("malformed {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(mean: f64) -> Density {
        Density::unit_normal(mean).unwrap()
    }

    #[test]
    fn uninformative_action_fails_validity() {
        // Action 1 has identical densities everywhere.
        let inst =
            ProblemInstance::new(vec![vec![norm(0.0), norm(1.0)], vec![norm(3.0), norm(1.0)]])
                .unwrap();
        let report = validate(&inst).unwrap();
        assert!(!report.validity_ok);
        assert_eq!(report.uninformative_actions, vec![1]);
    }

    #[test]
    fn counterexample_instance_validates() {
        let inst = build_counterexample(0.2).unwrap();
        let report = validate(&inst).unwrap();
        assert!(report.all_ok(), "{report:?}");
        // Spot-check the table: action 1 mean for H0 at ξ = 0.1.
        let inst = build_counterexample(0.1).unwrap();
        match inst.density(0, 1) {
            Density::UnitNormal { mean } => {
                assert!((mean - (4.0f64 / 3.0 - 0.1).sqrt()).abs() < 1e-12);
                assert!((mean - 1.1105554165971785).abs() < 1e-10);
            }
            other => panic!("unexpected family {other:?}"),
        }
        // ξ → 0 limit: the action-1 separation parameter (squared mean)
        // stays strictly below action-0's separation of 2.
        let m = inst.density(0, 1).mean();
        assert!(m * m < 2.0);
    }

    #[test]
    fn missing_cell_is_structural_error() {
        let mut cells = Vec::new();
        for i in 0..3usize {
            for a in 0..2usize {
                if (i, a) != (2, 1) {
                    cells.push((i, a, norm(i as f64 + a as f64)));
                }
            }
        }
        let err = ProblemInstance::from_cells(3, 2, &cells).unwrap_err();
        assert!(matches!(err, Error::Structural(_)), "{err}");
    }

    #[test]
    fn minimal_two_by_one_scenario() {
        let inst = ProblemInstance::new(vec![vec![norm(0.0)], vec![norm(1.0)]]).unwrap();
        assert!(validate(&inst).unwrap().all_ok());
    }

    #[test]
    fn scenario_is_deterministic_and_tied() {
        let spec = ScenarioSpec::reference_scale(Family::UnitNormal, 11);
        let a = build_scenario(&spec).unwrap();
        let b = build_scenario(&spec).unwrap();
        assert_eq!(a, b);

        // Exactly one action separates the tied pair (0, H-1).
        let h = spec.hypotheses;
        let mut separating = Vec::new();
        for action in 0..spec.actions {
            let t = dist::tvd(a.density(0, action), a.density(h - 1, action))
                .unwrap()
                .value;
            if t > 0.0 {
                separating.push(action);
            }
        }
        assert_eq!(separating, vec![spec.actions - 1]);
    }

    #[test]
    fn scenario_means_stay_in_bands() {
        for family in [Family::UnitNormal, Family::Exponential] {
            let spec = ScenarioSpec::reference_scale(family, 3);
            let inst = build_scenario(&spec).unwrap();
            for i in 0..spec.hypotheses {
                for a in 0..spec.actions {
                    let m = inst.density(i, a).mean();
                    let lo = (m - 2.0).abs() <= 0.1 + 1e-9;
                    let hi = (m - 8.0).abs() <= 0.1 + 1e-9;
                    assert!(lo || hi, "mean {m} at ({i},{a}) outside both bands");
                }
            }
        }
    }

    #[test]
    fn scenario_groups_are_widely_separated() {
        let spec = ScenarioSpec::reference_scale(Family::UnitNormal, 5);
        let inst = build_scenario(&spec).unwrap();
        // Min |mean difference| across the two base groups ≥ 5.8.
        for a in 0..spec.actions {
            let mut lows = Vec::new();
            let mut highs = Vec::new();
            for i in 0..spec.hypotheses {
                let m = inst.density(i, a).mean();
                if m < 5.0 {
                    lows.push(m);
                } else {
                    highs.push(m);
                }
            }
            let max_low = lows.iter().cloned().fold(f64::MIN, f64::max);
            let min_high = highs.iter().cloned().fold(f64::MAX, f64::min);
            assert!(min_high - max_low >= 5.8 - 1e-9);
        }
    }

    #[test]
    fn same_seed_shares_means_across_families() {
        let normal = ScenarioSpec::reference_scale(Family::UnitNormal, 9);
        let expo = ScenarioSpec::reference_scale(Family::Exponential, 9);
        let a = build_scenario(&normal).unwrap();
        let b = build_scenario(&expo).unwrap();
        for i in 0..32 {
            for act in 0..16 {
                assert!((a.density(i, act).mean() - b.density(i, act).mean()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let inst = build_scenario(&ScenarioSpec::reference_scale(Family::Exponential, 1)).unwrap();
        let text = instance_to_text(&inst);
        let back = instance_from_text(&text).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn text_missing_cell_fails() {
        let inst = build_counterexample(0.1).unwrap();
        let text = instance_to_text(&inst);
        let truncated: String = text
            .lines()
            .filter(|l| !l.starts_with("cell 2 1"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(
            instance_from_text(&truncated).unwrap_err(),
            Error::Structural(_)
        ));
    }
}
