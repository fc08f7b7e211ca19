//! Shared oracles and instance generators for the integration suites.
//!
//! Oracles here are deliberately independent of the implementation paths
//! they check: divergence oracles integrate the defining formulas through
//! the public quadrature API, and the likelihood-ratio oracle is a plain
//! Monte Carlo average with a 99% confidence interval.
//!
//! Not every test target uses every helper here.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use phidelta_core::dist::Density;
use phidelta_core::model::ProblemInstance;
use phidelta_core::quad::{integrate_tol, Domain};
use phidelta_core::seed::rng_from_seed;

/// Oracle tolerances sit well below the 1e-7 agreement budget they check.
const ORACLE_ABS_TOL: f64 = 1e-11;
const ORACLE_REL_TOL: f64 = 1e-10;

/// ½ ∫ |p - q| by quadrature over the union of the supports. Restricting a
/// pure half-line pair to [0, ∞) keeps the support-boundary jump of the
/// integrand off the quadrature nodes.
pub fn tvd_oracle(p: &Density, q: &Density) -> f64 {
    let domain = if p.domain() == Domain::HalfLine && q.domain() == Domain::HalfLine {
        Domain::HalfLine
    } else {
        Domain::RealLine
    };
    0.5 * integrate_tol(
        |x| (p.density(x) - q.density(x)).abs(),
        domain,
        ORACLE_ABS_TOL,
        ORACLE_REL_TOL,
    )
    .unwrap()
    .value
}

/// ∫ p ln(p/q) by quadrature over p's support.
pub fn kld_oracle(p: &Density, q: &Density) -> f64 {
    integrate_tol(
        |x| {
            let fp = p.density(x);
            if fp == 0.0 {
                0.0
            } else {
                fp * (p.log_density(x) - q.log_density(x))
            }
        },
        p.domain(),
        ORACLE_ABS_TOL,
        ORACLE_REL_TOL,
    )
    .unwrap()
    .value
}

/// Monte Carlo estimate of E_{f_i}[f_j(X)/f_k(X)] with a 99% CI half-width.
pub fn lre_mc_oracle(
    i: &Density,
    j: &Density,
    k: &Density,
    draws: u64,
    rng: &mut ChaCha12Rng,
) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let x = i.sample(rng);
        let r = (j.log_density(x) - k.log_density(x)).exp();
        sum += r;
        sum_sq += r * r;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    // 99% two-sided normal quantile.
    let half = 2.5758293035489004 * (var / n).sqrt();
    (mean, half)
}

/// Binomial 3σ upper band around a target probability.
pub fn binomial_band(p: f64, trials: u64) -> f64 {
    p + 3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

pub fn single_action(ds: Vec<Density>) -> ProblemInstance {
    ProblemInstance::new(ds.into_iter().map(|d| vec![d]).collect()).unwrap()
}

/// Random exponential rate in a moderate band.
pub fn random_rate(rng: &mut ChaCha12Rng) -> f64 {
    rng.random_range(0.2..5.0)
}

/// Random unit-normal mean in a moderate band.
pub fn random_mean(rng: &mut ChaCha12Rng) -> f64 {
    rng.random_range(-4.0..4.0)
}

/// A clustered single-action instance whose spread cluster sits at the
/// bottom of the mean order with singleton clusters strictly above it; the
/// returned ε separates the spread cluster from the singletons. This is the
/// geometry in which the maximal-mean representative rule is provably safe:
/// every rival representative lies above the spread cluster.
pub struct OneSidedInstance {
    pub instance: ProblemInstance,
    pub epsilon: f64,
    pub cluster_size: usize,
    pub singletons: usize,
}

pub fn one_sided_normal(rng: &mut ChaCha12Rng) -> OneSidedInstance {
    let cluster_size = rng.random_range(2..=4);
    let singletons = rng.random_range(1..=3);
    let mut ds = Vec::new();
    for _ in 0..cluster_size {
        ds.push(Density::unit_normal(rng.random_range(0.0..0.5)).unwrap());
    }
    for s in 0..singletons {
        let base = 2.2 + 1.8 * s as f64;
        ds.push(Density::unit_normal(base + rng.random_range(0.0..0.3)).unwrap());
    }
    OneSidedInstance {
        instance: single_action(ds),
        epsilon: 0.3,
        cluster_size,
        singletons,
    }
}

pub fn one_sided_exponential(rng: &mut ChaCha12Rng) -> OneSidedInstance {
    let cluster_size = rng.random_range(2..=4);
    let singletons = rng.random_range(1..=3);
    let mut ds = Vec::new();
    // The bottom of the mean order is the top of the rate order.
    for _ in 0..cluster_size {
        ds.push(Density::exponential(rng.random_range(2.0..2.6)).unwrap());
    }
    for s in 0..singletons {
        let base = 1.0 * 0.5f64.powi(s as i32);
        ds.push(Density::exponential(base * rng.random_range(0.9..1.0)).unwrap());
    }
    OneSidedInstance {
        instance: single_action(ds),
        epsilon: 0.15,
        cluster_size,
        singletons,
    }
}

/// Random well-separated multi-cluster single-action instance for virtual
/// representatives: `clusters` groups of 1-3 members each, far apart in TVD.
pub struct ClusteredInstance {
    pub instance: ProblemInstance,
    pub epsilon: f64,
    pub clusters: usize,
}

pub fn clustered_normal(rng: &mut ChaCha12Rng, clusters: usize) -> ClusteredInstance {
    let mut ds = Vec::new();
    for c in 0..clusters {
        let center = 4.0 * c as f64 + rng.random_range(-0.2..0.2);
        let size = rng.random_range(1..=3);
        for _ in 0..size {
            ds.push(Density::unit_normal(center + rng.random_range(-0.25..0.25)).unwrap());
        }
    }
    ClusteredInstance {
        instance: single_action(ds),
        epsilon: 0.35,
        clusters,
    }
}

pub fn clustered_exponential(rng: &mut ChaCha12Rng, clusters: usize) -> ClusteredInstance {
    let mut ds = Vec::new();
    for c in 0..clusters {
        let center = 2.4 * 0.25f64.powi(c as i32);
        let size = rng.random_range(1..=3);
        for _ in 0..size {
            ds.push(Density::exponential(center * rng.random_range(0.94..1.06)).unwrap());
        }
    }
    ClusteredInstance {
        instance: single_action(ds),
        epsilon: 0.15,
        clusters,
    }
}

/// Deterministic rng for a named test.
pub fn oracle_rng(tag: u64) -> ChaCha12Rng {
    rng_from_seed(0x0acc_e97a ^ tag)
}
