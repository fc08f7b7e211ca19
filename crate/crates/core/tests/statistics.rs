//! Statistical behavior of the engine beyond the acceptance gate: prior
//! uniformity, aggregate error control on small instances, prediction vs
//! simulation agreement, and the linear/logarithmic stage-count
//! constructions.

mod common;

use common::*;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use phidelta_core::analysis;
use phidelta_core::cluster::{ClusterPlan, EpsilonPolicy};
use phidelta_core::dist::Density;
use phidelta_core::engine::{self, RunOptions};
use phidelta_core::model::{self, Family, ScenarioSpec};
use phidelta_core::seed::{rng_from_seed, trial_seed};

fn well_separated() -> phidelta_core::model::ProblemInstance {
    single_action(vec![
        Density::unit_normal(0.0).unwrap(),
        Density::unit_normal(0.8).unwrap(),
        Density::unit_normal(1.8).unwrap(),
    ])
}

#[test]
fn run_random_draws_theta_uniformly() {
    let inst = well_separated();
    let plan = ClusterPlan::build(&inst, &EpsilonPolicy::Zero).unwrap();
    let opts = RunOptions::default();
    let trials = 100_000u64;
    let mut counts = vec![0u64; inst.hypotheses()];
    for t in 0..trials {
        let mut rng = rng_from_seed(trial_seed(101, 0, 0, t));
        let (theta, _) = engine::run_random(&inst, &plan, 0.2, &mut rng, &opts).unwrap();
        counts[theta] += 1;
    }
    let expected = trials as f64 / inst.hypotheses() as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let critical = ChiSquared::new((inst.hypotheses() - 1) as f64)
        .unwrap()
        .inverse_cdf(0.99);
    assert!(
        chi2 <= critical,
        "χ² {chi2:.2} above 1% critical {critical:.2}"
    );
}

#[test]
fn aggregate_error_within_band_and_bookkeeping_holds() {
    let inst = well_separated();
    let plan = ClusterPlan::build(&inst, &EpsilonPolicy::Zero).unwrap();
    let opts = RunOptions::default();
    let delta = 0.05;
    let trials = 10_000u64;
    let mut errors = 0u64;
    let mut single_stage = 0u64;
    for t in 0..trials {
        let mut rng = rng_from_seed(trial_seed(103, 0, 0, t));
        let (theta, transcript) = engine::run_random(&inst, &plan, delta, &mut rng, &opts).unwrap();
        if transcript.decision != theta {
            errors += 1;
        }
        if transcript.stage_count() == 1 {
            single_stage += 1;
        }
        let stage_sum: u64 = transcript.stages.iter().map(|s| s.samples).sum();
        assert_eq!(stage_sum, transcript.total_samples);
    }
    let rate = errors as f64 / trials as f64;
    assert!(rate <= binomial_band(delta, trials), "error rate {rate}");
    // All hypotheses are distinct under the single action, so a correct run
    // is a single stage; correctness holds with frequency ≥ 1 - δ.
    assert!(single_stage as f64 / trials as f64 >= 1.0 - delta - 0.01);
}

#[test]
fn prediction_matches_simulation_on_well_separated_instance() {
    // Two bit-splitting actions with moderate gaps: every stage is a binary
    // contest, so the vanishing-threshold correction stays inside the band.
    let inst = phidelta_core::model::ProblemInstance::new(vec![
        vec![
            Density::unit_normal(0.0).unwrap(),
            Density::unit_normal(0.0).unwrap(),
        ],
        vec![
            Density::unit_normal(0.0).unwrap(),
            Density::unit_normal(0.8).unwrap(),
        ],
        vec![
            Density::unit_normal(0.9).unwrap(),
            Density::unit_normal(0.0).unwrap(),
        ],
        vec![
            Density::unit_normal(0.9).unwrap(),
            Density::unit_normal(0.8).unwrap(),
        ],
    ])
    .unwrap();
    let plan = ClusterPlan::build(&inst, &EpsilonPolicy::Zero).unwrap();
    let opts = RunOptions::default();
    let trials = 10_000u64;
    for (di, delta) in [1e-3f64, 1e-4, 1e-5].into_iter().enumerate() {
        let prediction = analysis::predict_total(&inst, &plan, delta).unwrap();
        for theta in 0..inst.hypotheses() {
            let mut total = 0u64;
            for t in 0..trials {
                let mut rng = rng_from_seed(trial_seed(107, di as u64, theta as u64, t));
                let transcript = engine::run(&inst, &plan, delta, theta, &mut rng, &opts).unwrap();
                total += transcript.total_samples;
            }
            let mean = total as f64 / trials as f64;
            let predicted = prediction.per_theta[theta].expected_total;
            let ratio = mean / predicted;
            assert!(
                (0.8..=1.2).contains(&ratio),
                "δ={delta:.0e} θ={theta}: mean {mean:.2} vs predicted {predicted:.2}"
            );
            // The policy bound sits below the simulated mean (2σ slack).
            let bound = analysis::lower_bound_phi(&inst, &plan, delta, &prediction);
            assert!(
                bound <= mean * 1.02,
                "bound {bound:.2} above mean {mean:.2}"
            );
        }
    }
}

#[test]
fn chain_construction_discards_one_hypothesis_per_stage() {
    let h = 8;
    let inst = model::build_chain(h).unwrap();
    let plan = ClusterPlan::build(&inst, &EpsilonPolicy::Zero).unwrap();
    let prediction = analysis::predict_total(&inst, &plan, 1e-3).unwrap();
    // θ = i needs i+1 stages except the last hypothesis, which needs H-1.
    for p in &prediction.per_theta {
        let expected = if p.theta == h - 1 { h - 1 } else { p.theta + 1 };
        assert_eq!(p.usage.stage_count, expected, "θ = {}", p.theta);
    }
    let mean_stages: f64 = prediction
        .per_theta
        .iter()
        .map(|p| p.usage.stage_count as f64)
        .sum::<f64>()
        / h as f64;
    // (H-1)(H+2)/(2H): the linear-growth regime.
    let exact = (h as f64 - 1.0) * (h as f64 + 2.0) / (2.0 * h as f64);
    assert!((mean_stages - exact).abs() < 1e-12);
    assert!(mean_stages >= (h as f64 - 1.0) / 2.0);
}

#[test]
fn halving_construction_uses_log_many_stages() {
    let h = 16;
    let inst = model::build_halving(h).unwrap();
    let plan = ClusterPlan::build(&inst, &EpsilonPolicy::Zero).unwrap();
    let prediction = analysis::predict_total(&inst, &plan, 1e-3).unwrap();
    for p in &prediction.per_theta {
        assert_eq!(p.usage.stage_count, 4, "θ = {}", p.theta);
        // Each stage discards exactly half of the alive set.
        let mut alive = h;
        for _ in 0..p.usage.stage_count {
            alive /= 2;
        }
        assert_eq!(alive, 1);
    }
}

#[test]
fn tied_scenario_needs_extra_stage_on_last_action() {
    // Hypotheses 0 and H-1 share densities everywhere except the final
    // action, so isolating either takes at least two stages and some stage
    // must use that action — it is the only one separating the tied pair.
    let inst =
        model::build_scenario(&ScenarioSpec::reference_scale(Family::UnitNormal, 7)).unwrap();
    let plan = ClusterPlan::build(&inst, &EpsilonPolicy::Fixed { value: 0.4 }).unwrap();
    let opts = RunOptions::default();
    let last_action = inst.actions() - 1;
    for theta in [0usize, 31] {
        for t in 0..50u64 {
            let mut rng = rng_from_seed(trial_seed(109, theta as u64, 0, t));
            let transcript = engine::run(&inst, &plan, 1e-4, theta, &mut rng, &opts).unwrap();
            if transcript.decision != theta {
                continue;
            }
            assert!(transcript.stage_count() >= 2, "θ={theta}: one stage");
            assert!(
                transcript.stages.iter().any(|s| s.action == last_action),
                "θ={theta}: no stage used the tie-breaking action"
            );
        }
    }
}
