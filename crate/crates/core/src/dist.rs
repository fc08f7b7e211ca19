//! Scalar parametric densities and their divergences.
//!
//! Two exponential-family members are built in: the exponential distribution
//! parameterized by its rate, and the unit-variance normal parameterized by
//! its mean. Both expose exact log-densities, seeded sampling, and closed
//! forms for the Kullback–Leibler divergence, the total variation distance,
//! and the cross-density likelihood-ratio expectation
//! E_{f_i}[f_j(X)/f_k(X)]. Anything outside the closed-form table falls back
//! to adaptive quadrature.
//!
//! All logarithms, log-likelihood ratios, and divergences are in nats. A
//! threshold of the form log((H-1)/δ) is therefore ln((H-1)/δ); since the
//! base cancels between an LLR and its threshold, a single consistent base
//! is enough (multiply by log2(e) to read values in bits).

use rand::Rng;
use rand_distr::{Distribution as RandDistribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Domain};

/// Two densities whose parameters differ by no more than this are treated as
/// the same distribution (the separation assumption guarantees a dichotomy;
/// floating point needs a floor to realize it).
pub const PARAM_EQ_TOL: f64 = 1e-12;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// A scalar density with evaluable log-density and closed-form hooks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Density {
    /// Exponential with rate λ > 0 (mean 1/λ), support [0, ∞).
    Exponential { rate: f64 },
    /// Normal with unit variance, support ℝ.
    UnitNormal { mean: f64 },
}

/// How a divergence value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceMethod {
    ClosedForm,
    Quadrature,
}

/// A computed divergence together with its provenance.
#[derive(Debug, Clone, Copy)]
pub struct DivergenceValue {
    /// Nats for KLD; dimensionless in [0, 1] for TVD.
    pub value: f64,
    pub method: DivergenceMethod,
}

impl Density {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exponential rate must be positive and finite, got {rate}"
            )));
        }
        Ok(Density::Exponential { rate })
    }

    pub fn unit_normal(mean: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "normal mean must be finite, got {mean}"
            )));
        }
        Ok(Density::UnitNormal { mean })
    }

    /// ln f(x). Out-of-support points evaluate to -∞, not an error.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Density::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            Density::UnitNormal { mean } => {
                let d = x - mean;
                -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * d * d
            }
        }
    }

    /// f(x).
    pub fn density(&self, x: f64) -> f64 {
        let l = self.log_density(x);
        if l == f64::NEG_INFINITY {
            0.0
        } else {
            l.exp()
        }
    }

    /// E[X].
    pub fn mean(&self) -> f64 {
        match *self {
            Density::Exponential { rate } => 1.0 / rate,
            Density::UnitNormal { mean } => mean,
        }
    }

    /// One draw from the density.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Density::Exponential { rate } => Exp::new(rate).expect("positive rate").sample(rng),
            Density::UnitNormal { mean } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + z
            }
        }
    }

    /// Natural integration domain of the support.
    pub fn domain(&self) -> Domain {
        match self {
            Density::Exponential { .. } => Domain::HalfLine,
            Density::UnitNormal { .. } => Domain::RealLine,
        }
    }

    /// Whether the support includes negative reals.
    fn covers_negative(&self) -> bool {
        matches!(self, Density::UnitNormal { .. })
    }

    /// Identical-distribution predicate: same family and parameters equal to
    /// within [`PARAM_EQ_TOL`].
    pub fn same_distribution(&self, other: &Density) -> bool {
        match (*self, *other) {
            (Density::Exponential { rate: a }, Density::Exponential { rate: b }) => {
                (a - b).abs() <= PARAM_EQ_TOL
            }
            (Density::UnitNormal { mean: a }, Density::UnitNormal { mean: b }) => {
                (a - b).abs() <= PARAM_EQ_TOL
            }
            _ => false,
        }
    }
}

/// ln f(x) shorthand used by LLR loops.
pub fn log_density(d: &Density, x: f64) -> f64 {
    d.log_density(x)
}

/// Kullback–Leibler divergence D(p‖q) in nats.
///
/// Closed forms for same-family pairs; adaptive quadrature of ∫ p ln(p/q)
/// otherwise, with +∞ when p has mass outside q's support.
pub fn kld(p: &Density, q: &Density) -> Result<DivergenceValue> {
    if p.same_distribution(q) {
        return Ok(DivergenceValue {
            value: 0.0,
            method: DivergenceMethod::ClosedForm,
        });
    }
    match (*p, *q) {
        (Density::UnitNormal { mean: mp }, Density::UnitNormal { mean: mq }) => {
            let d = mp - mq;
            Ok(DivergenceValue {
                value: 0.5 * d * d,
                method: DivergenceMethod::ClosedForm,
            })
        }
        (Density::Exponential { rate: lp }, Density::Exponential { rate: lq }) => {
            Ok(DivergenceValue {
                value: (lp / lq).ln() + lq / lp - 1.0,
                method: DivergenceMethod::ClosedForm,
            })
        }
        _ => {
            if p.covers_negative() && !q.covers_negative() {
                return Ok(DivergenceValue {
                    value: f64::INFINITY,
                    method: DivergenceMethod::Quadrature,
                });
            }
            let (p, q) = (*p, *q);
            let r = quad::integrate(
                move |x| {
                    let fp = p.density(x);
                    if fp == 0.0 {
                        0.0
                    } else {
                        fp * (p.log_density(x) - q.log_density(x))
                    }
                },
                p.domain(),
            )?;
            Ok(DivergenceValue {
                value: r.value,
                method: DivergenceMethod::Quadrature,
            })
        }
    }
}

/// Total variation distance ‖p − q‖_TV ∈ [0, 1].
///
/// Exponential pair: (1-ρ)·ρ^{ρ/(1-ρ)} with ρ = min(λ)/max(λ).
/// Unit-normal pair: 2Φ(|μp − μq|/2) − 1.
/// Otherwise ½∫|p − q| by quadrature.
pub fn tvd(p: &Density, q: &Density) -> Result<DivergenceValue> {
    if p.same_distribution(q) {
        return Ok(DivergenceValue {
            value: 0.0,
            method: DivergenceMethod::ClosedForm,
        });
    }
    match (*p, *q) {
        (Density::Exponential { rate: la }, Density::Exponential { rate: lb }) => {
            let rho = la.min(lb) / la.max(lb);
            let value = (1.0 - rho) * rho.powf(rho / (1.0 - rho));
            Ok(DivergenceValue {
                value,
                method: DivergenceMethod::ClosedForm,
            })
        }
        (Density::UnitNormal { mean: ma }, Density::UnitNormal { mean: mb }) => {
            let value = 2.0 * normal_cdf(0.5 * (ma - mb).abs()) - 1.0;
            Ok(DivergenceValue {
                value,
                method: DivergenceMethod::ClosedForm,
            })
        }
        _ => {
            let (p, q) = (*p, *q);
            let r = quad::integrate(
                move |x| (p.density(x) - q.density(x)).abs(),
                Domain::RealLine,
            )?;
            Ok(DivergenceValue {
                value: 0.5 * r.value,
                method: DivergenceMethod::Quadrature,
            })
        }
    }
}

/// E_{f_i}[ f_j(X) / f_k(X) ].
///
/// Within one exponential-family action this is
/// exp{A(ν_k) - A(ν_j) - A(ν_i) + A(η_j - η_k + η_i)}: for exponentials
/// λ_i λ_j / (λ_k (λ_j - λ_k + λ_i)) (divergent — reported as +∞ — when
/// λ_j - λ_k + λ_i ≤ 0), for unit normals exp{(μ_j - μ_k)(μ_i - μ_k)}.
pub fn likelihood_ratio_expectation(i: &Density, j: &Density, k: &Density) -> Result<f64> {
    if j.same_distribution(k) {
        return Ok(1.0);
    }
    match (*i, *j, *k) {
        (
            Density::Exponential { rate: li },
            Density::Exponential { rate: lj },
            Density::Exponential { rate: lk },
        ) => {
            let denom_rate = lj - lk + li;
            if denom_rate <= 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok(li * lj / (lk * denom_rate))
        }
        (
            Density::UnitNormal { mean: mi },
            Density::UnitNormal { mean: mj },
            Density::UnitNormal { mean: mk },
        ) => Ok(((mj - mk) * (mi - mk)).exp()),
        _ => {
            // Mixed families: quadrature over the region where f_i f_j > 0.
            // If f_k vanishes on part of that region the expectation is +∞.
            let prod_covers_negative = i.covers_negative() && j.covers_negative();
            if prod_covers_negative && !k.covers_negative() {
                return Ok(f64::INFINITY);
            }
            let dom = if prod_covers_negative {
                Domain::RealLine
            } else {
                Domain::HalfLine
            };
            let (i, j, k) = (*i, *j, *k);
            let r = quad::integrate(
                move |x| {
                    let l = i.log_density(x) + j.log_density(x) - k.log_density(x);
                    if l == f64::NEG_INFINITY {
                        0.0
                    } else {
                        l.exp()
                    }
                },
                dom,
            )?;
            Ok(r.value)
        }
    }
}

/// E_{f_p}[ (ln f_p(X)/f_q(X))² ], the second moment entering the finite
/// LLR-variance certificate.
///
/// For both built-in families the LLR is affine in x, so the moment is
/// KLD² plus the LLR variance in closed form.
pub fn llr_second_moment(p: &Density, q: &Density) -> Result<f64> {
    if p.same_distribution(q) {
        return Ok(0.0);
    }
    match (*p, *q) {
        (Density::UnitNormal { mean: mp }, Density::UnitNormal { mean: mq }) => {
            let d = 0.5 * (mp - mq) * (mp - mq);
            Ok(d * d + (mp - mq) * (mp - mq))
        }
        (Density::Exponential { rate: lp }, Density::Exponential { rate: lq }) => {
            let d = (lp / lq).ln() + lq / lp - 1.0;
            let sd = (lq - lp) / lp;
            Ok(d * d + sd * sd)
        }
        _ => {
            if p.covers_negative() && !q.covers_negative() {
                return Ok(f64::INFINITY);
            }
            let (p, q) = (*p, *q);
            let r = quad::integrate(
                move |x| {
                    let fp = p.density(x);
                    if fp == 0.0 {
                        0.0
                    } else {
                        let l = p.log_density(x) - q.log_density(x);
                        fp * l * l
                    }
                },
                p.domain(),
            )?;
            Ok(r.value)
        }
    }
}
