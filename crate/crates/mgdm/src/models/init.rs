//! Initial distributions for the descent.
//!
//! Coordinates are i.i.d.; the positive-support variants implement the
//! maximum-entropy dichotomy for data on `[0, ∞)` given mean and standard
//! deviation: exponential when the two are (nearly) equal, truncated
//! Gaussian otherwise.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453; // ln(2π)

/// Relative |mean/std - 1| below which the positive-support fit collapses
/// to the exponential distribution.
pub const EXPONENTIAL_FALLBACK_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitDistribution {
    /// `N(0, σ₀² I_d)`.
    GaussianWhite { sigma2: f64, d: usize },
    /// i.i.d. exponential with the given rate.
    Exponential { rate: f64, d: usize },
    /// Gaussian with pre-truncation parameters `(μ, s)` restricted to `[0, ∞)`.
    TruncatedGaussian { mu: f64, s: f64, d: usize },
}

impl InitDistribution {
    pub fn gaussian_white(sigma2: f64, d: usize) -> Result<Self> {
        let dist = Self::GaussianWhite { sigma2, d };
        dist.validate()?;
        Ok(dist)
    }

    pub fn exponential(rate: f64, d: usize) -> Result<Self> {
        let dist = Self::Exponential { rate, d };
        dist.validate()?;
        Ok(dist)
    }

    /// Positive-support distribution matching the given mean and standard
    /// deviation: exponential when they agree to `EXPONENTIAL_FALLBACK_TOL`
    /// relative (or when mean < std, where no truncated-Gaussian fit
    /// exists), truncated Gaussian otherwise.
    pub fn fit_positive(mean: f64, std: f64, d: usize) -> Result<Self> {
        if !(mean > 0.0) || !(std > 0.0) {
            return Err(Error::Model(format!(
                "positive-support fit requires mean > 0 and std > 0, got mean {mean}, std {std}"
            )));
        }
        let ratio = mean / std;
        if ratio <= 1.0 + EXPONENTIAL_FALLBACK_TOL {
            return Self::exponential(1.0 / mean, d);
        }
        // Solve ratio(a) = mean/std for the standardized cutoff a, where a
        // is the truncation point in pre-truncation standard units. ratio(a)
        // is strictly decreasing with limits ∞ (a → -∞) and 1 (a → ∞).
        let target = ratio;
        let f = |a: f64| truncated_std_ratio(a) - target;
        let (mut lo, mut hi) = (-37.0, 34.0);
        if f(lo) < 0.0 || f(hi) > 0.0 {
            return Err(Error::Model(format!(
                "truncated-Gaussian moment fit out of range for mean/std = {ratio}"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = 0.5 * (lo + hi);
        let (xi_mean, xi_var) = truncated_std_moments(a);
        let s = std / xi_var.sqrt();
        let mu = -a * s;
        debug_assert!((mu + s * xi_mean - mean).abs() <= 1e-6 * mean);
        let dist = Self::TruncatedGaussian { mu, s, d };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::GaussianWhite { sigma2, d } => *sigma2 > 0.0 && *d > 0,
            Self::Exponential { rate, d } => *rate > 0.0 && *d > 0,
            Self::TruncatedGaussian { s, d, mu } => *s > 0.0 && *d > 0 && mu.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid initial distribution parameters: {self:?}"
            )))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::GaussianWhite { d, .. }
            | Self::Exponential { d, .. }
            | Self::TruncatedGaussian { d, .. } => *d,
        }
    }

    pub fn positive_support(&self) -> bool {
        !matches!(self, Self::GaussianWhite { .. })
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            Self::GaussianWhite { sigma2, d } => {
                let normal = Normal::new(0.0, sigma2.sqrt()).expect("validated");
                (0..*d).map(|_| normal.sample(rng)).collect()
            }
            Self::Exponential { rate, d } => {
                let exp = Exp::new(*rate).expect("validated");
                (0..*d).map(|_| exp.sample(rng)).collect()
            }
            Self::TruncatedGaussian { mu, s, d } => {
                let a = -mu / s;
                (0..*d).map(|_| mu + s * sample_truncated_std(a, rng)).collect()
            }
        }
    }

    /// Joint log-density of one path (i.i.d. product over coordinates).
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            Self::GaussianWhite { sigma2, d } => {
                debug_assert_eq!(x.len(), *d);
                let quad: f64 = x.iter().map(|v| v * v).sum();
                -0.5 * (*d as f64) * (LN_2PI + sigma2.ln()) - 0.5 * quad / sigma2
            }
            Self::Exponential { rate, d } => {
                debug_assert_eq!(x.len(), *d);
                if x.iter().any(|&v| v < 0.0) {
                    return f64::NEG_INFINITY;
                }
                let sum: f64 = x.iter().sum();
                (*d as f64) * rate.ln() - rate * sum
            }
            Self::TruncatedGaussian { mu, s, d } => {
                debug_assert_eq!(x.len(), *d);
                if x.iter().any(|&v| v < 0.0) {
                    return f64::NEG_INFINITY;
                }
                let a = -mu / s;
                let log_mass = normal_sf(a).ln();
                let per: f64 = x
                    .iter()
                    .map(|&v| {
                        let z = (v - mu) / s;
                        -0.5 * (LN_2PI + z * z) - s.ln() - log_mass
                    })
                    .sum();
                per
            }
        }
    }

    /// Closed-form differential entropy of the full d-dimensional draw.
    pub fn entropy(&self) -> f64 {
        match self {
            Self::GaussianWhite { sigma2, d } => {
                0.5 * (*d as f64) * (LN_2PI + 1.0 + sigma2.ln())
            }
            Self::Exponential { rate, d } => (*d as f64) * (1.0 - rate.ln()),
            Self::TruncatedGaussian { mu, s, d } => {
                let a = -mu / s;
                let mass = normal_sf(a);
                let delta = hazard(a);
                let per = (s * mass).ln() + 0.5 * LN_2PI + 0.5 * (1.0 + a * delta);
                (*d as f64) * per
            }
        }
    }
}

/// Standard normal survival function `P(Z ≥ a)`; Mills-ratio asymptotics
/// keep the deep tail accurate where erfc loses relative precision.
pub(crate) fn normal_sf(a: f64) -> f64 {
    if a > 12.0 {
        let a2 = a * a;
        let mills = 1.0 - 1.0 / a2 + 3.0 / (a2 * a2) - 15.0 / (a2 * a2 * a2)
            + 105.0 / (a2 * a2 * a2 * a2);
        normal_pdf(a) / a * mills
    } else {
        0.5 * statrs::function::erf::erfc(a / std::f64::consts::SQRT_2)
    }
}

fn normal_pdf(a: f64) -> f64 {
    (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Hazard φ(a)/Q(a) of the standard normal, stable for large `a` via the
/// Mills-ratio expansion.
fn hazard(a: f64) -> f64 {
    if a > 12.0 {
        let a2 = a * a;
        let mills = 1.0 - 1.0 / a2 + 3.0 / (a2 * a2) - 15.0 / (a2 * a2 * a2);
        a / mills
    } else {
        normal_pdf(a) / normal_sf(a)
    }
}

/// Mean and variance of a standard normal truncated to `[a, ∞)`.
fn truncated_std_moments(a: f64) -> (f64, f64) {
    let delta = hazard(a);
    (delta, 1.0 + a * delta - delta * delta)
}

fn truncated_std_ratio(a: f64) -> f64 {
    let (mean, var) = truncated_std_moments(a);
    // mean of the shifted variable relative to its std when the support
    // starts at 0, i.e. (E[ξ] - a)/Std[ξ]
    (mean - a) / var.sqrt()
}

/// Draw from a standard normal truncated to `[a, ∞)`. Plain rejection for
/// small cutoffs, exponential-proposal rejection for the tail.
fn sample_truncated_std(a: f64, rng: &mut dyn RngCore) -> f64 {
    if a < 0.3 {
        let normal = Normal::new(0.0, 1.0).unwrap();
        loop {
            let z: f64 = normal.sample(rng);
            if z >= a {
                return z;
            }
        }
    } else {
        let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
        let exp = Exp::new(lambda).unwrap();
        loop {
            let z = a + exp.sample(rng);
            let accept = (-0.5 * (z - lambda) * (z - lambda)).exp();
            if rng.gen::<f64>() <= accept {
                return z;
            }
        }
    }
}
