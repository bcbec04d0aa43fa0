use serde::{Deserialize, Serialize};

use super::FlowTrace;
use crate::error::{Error, Result};
use crate::models::TargetModel;

/// How entropies (in nats) are reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Joint entropy of the full state (all particles).
    Total,
    /// Divided by the number of coupled particles, making batch sizes
    /// comparable.
    PerSample,
    /// Divided by the total dimension `N·d` (entropy rate).
    Rate,
}

/// Particle count and path length of the state a trace describes.
#[derive(Clone, Copy, Debug)]
pub struct EntropyScale {
    pub particles: usize,
    pub dim: usize,
}

impl EntropyScale {
    fn divisor(&self, norm: Normalization) -> f64 {
        match norm {
            Normalization::Total => 1.0,
            Normalization::PerSample => self.particles as f64,
            Normalization::Rate => (self.particles * self.dim) as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub std_error: f64,
    pub normalization: Normalization,
}

/// `H(q_t) ≈ H(q_0) + mean over replicas of the accumulated log|det|`,
/// under the requested normalization. `init_entropy` is the joint entropy
/// of the initial state at full scale (all particles). The standard error
/// comes from the replica spread and is zero when only one replica exists.
pub fn entropy_estimate(
    init_entropy: f64,
    trace: &FlowTrace,
    step: usize,
    scale: EntropyScale,
    norm: Normalization,
) -> Result<EntropyEstimate> {
    let acc = trace.cumulative_at(step)?;
    let m = acc.len();
    if m == 0 {
        return Err(Error::InvalidInput("empty flow trace".into()));
    }
    let mean = acc.iter().sum::<f64>() / m as f64;
    let div = scale.divisor(norm);
    let se = if m > 1 {
        let var = acc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
        (var / m as f64).sqrt() / div
    } else {
        0.0
    };
    Ok(EntropyEstimate {
        value: (init_entropy + mean) / div,
        std_error: se,
        normalization: norm,
    })
}

/// Reverse KL estimate split into its two terms. The `kl` field is always
/// exactly `neg_entropy - expected_log_likelihood`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KlEstimate {
    pub neg_entropy: f64,
    pub neg_entropy_se: f64,
    pub expected_log_likelihood: f64,
    pub expected_log_likelihood_se: f64,
    pub kl: f64,
    pub kl_se: f64,
    /// Samples whose target log-density was -∞ or outside the support,
    /// excluded from the likelihood mean.
    pub rejected: usize,
}

impl KlEstimate {
    /// Build from per-replica terms, keeping the correlation between the
    /// entropy and likelihood contributions in the combined standard
    /// error. Terms must already be under a common normalization.
    pub fn from_replica_terms(
        neg_entropy: &[f64],
        expected_logp: &[f64],
        rejected: usize,
    ) -> Result<Self> {
        if neg_entropy.len() != expected_logp.len() || neg_entropy.is_empty() {
            return Err(Error::InvalidInput(
                "replica term lists must be non-empty and equal length".into(),
            ));
        }
        let m = neg_entropy.len() as f64;
        let mean_h = neg_entropy.iter().sum::<f64>() / m;
        let mean_l = expected_logp.iter().sum::<f64>() / m;
        let per_replica_kl: Vec<f64> = neg_entropy
            .iter()
            .zip(expected_logp)
            .map(|(h, l)| h - l)
            .collect();
        Ok(Self {
            neg_entropy: mean_h,
            neg_entropy_se: std_error(neg_entropy, mean_h),
            expected_log_likelihood: mean_l,
            expected_log_likelihood_se: std_error(expected_logp, mean_l),
            kl: mean_h - mean_l,
            kl_se: std_error(&per_replica_kl, mean_h - mean_l),
            rejected,
        })
    }
}

fn std_error(values: &[f64], mean: f64) -> f64 {
    let m = values.len();
    if m < 2 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
    (var / m as f64).sqrt()
}

/// Reverse KL `D(q‖p) = -H(q) - E_q[log p]` against a closed-form target,
/// from a per-sample-normalized entropy estimate and Monte Carlo samples.
/// Samples with -∞ log-density (outside the target support) are counted
/// as rejected and excluded from the mean.
pub fn reverse_kl(
    entropy: &EntropyEstimate,
    samples: &[&[f64]],
    target: &dyn TargetModel,
) -> Result<KlEstimate> {
    if entropy.normalization != Normalization::PerSample {
        return Err(Error::InvalidInput(
            "reverse KL expects a per-sample entropy estimate".into(),
        ));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let mut kept = Vec::with_capacity(samples.len());
    let mut rejected = 0usize;
    for &s in samples {
        match target.log_density(s) {
            Ok(lp) if lp.is_finite() => kept.push(lp),
            Ok(_) | Err(Error::Domain(_)) => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidInput(
            "all samples rejected by the target density".into(),
        ));
    }
    let mean_lp = kept.iter().sum::<f64>() / kept.len() as f64;
    let lp_se = std_error(&kept, mean_lp);
    let neg_entropy = -entropy.value;
    let kl = neg_entropy - mean_lp;
    Ok(KlEstimate {
        neg_entropy,
        neg_entropy_se: entropy.std_error,
        expected_log_likelihood: mean_lp,
        expected_log_likelihood_se: lp_se,
        kl,
        kl_se: (entropy.std_error * entropy.std_error + lp_se * lp_se).sqrt(),
        rejected,
    })
}
