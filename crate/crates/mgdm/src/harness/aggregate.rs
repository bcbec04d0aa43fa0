//! Replica aggregation: per-step metrics rows from one or more descent
//! runs of the same mode.

use serde::{Deserialize, Serialize};

use super::{ExperimentContext, ModeSummary};
use crate::descent::{DescentRun, Mode};
use crate::error::{Error, Result};
use crate::likelihood::{entropy_rate_bound, FlowTrace, KlEstimate};

pub(crate) struct RunOutcome {
    pub run: DescentRun,
    pub diverged: bool,
}

/// One exported metrics row. The reverse KL always satisfies
/// `reverse_kl = neg_entropy - expected_log_likelihood` exactly; entropy
/// fields are per-sample unless suffixed otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    pub loss: f64,
    pub energy_distance: f64,
    pub neg_entropy: Option<f64>,
    pub neg_entropy_se: Option<f64>,
    pub expected_log_likelihood: Option<f64>,
    pub expected_log_likelihood_se: Option<f64>,
    pub reverse_kl: Option<f64>,
    pub reverse_kl_se: Option<f64>,
    pub entropy_total: Option<f64>,
    pub entropy_per_sample: Option<f64>,
    pub entropy_rate: Option<f64>,
    pub reverse_kl_joint: Option<f64>,
    pub bound_rate: Option<f64>,
    pub rejected: usize,
}

/// A fully aggregated mode: per-step rows plus the raw runs for
/// downstream statistics.
pub struct ModeRun {
    pub mode: Mode,
    pub rows: Vec<MetricsRow>,
    pub runs: Vec<DescentRun>,
    pub particles_per_replica: usize,
    pub diverged: bool,
    pub sign_flips: usize,
}

impl ModeRun {
    pub fn min_kl(&self) -> Option<(usize, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.reverse_kl.map(|kl| (r.step, kl)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn final_row(&self) -> &MetricsRow {
        self.rows.last().expect("aggregation emits at least one row")
    }

    pub fn summary(&self, ctx: &ExperimentContext) -> ModeSummary {
        let (argmin, min_kl) = match self.min_kl() {
            Some((s, v)) => (Some(s), Some(v)),
            None => (None, None),
        };
        let suggested = ctx.target_energy.suggested_epsilon();
        let first_inside = self
            .rows
            .iter()
            .find(|r| r.energy_distance <= suggested)
            .map(|r| r.step);
        let last = self.final_row();
        ModeSummary {
            mode: self.mode,
            min_kl,
            argmin_step: argmin,
            final_kl: last.reverse_kl,
            final_distance: last.energy_distance,
            first_step_inside_suggested_epsilon: first_inside,
            entropy_final_total: last.entropy_total,
            entropy_final_per_sample: last.entropy_per_sample,
            entropy_final_rate: last.entropy_rate,
            steps_taken: self.runs.iter().map(|r| r.steps_taken).collect(),
            sign_flips: self.sign_flips,
            diverged: self.diverged,
            gamma: self.runs.first().map(|r| r.gamma).unwrap_or(f64::NAN),
        }
    }
}

/// Mean of the finite entries; the count of non-finite ones.
fn finite_mean(values: &[f64]) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut kept = 0usize;
    for &v in values {
        if v.is_finite() {
            sum += v;
            kept += 1;
        }
    }
    if kept == 0 {
        (None, values.len())
    } else {
        (Some(sum / kept as f64), values.len() - kept)
    }
}

/// Build per-step rows across replicas. Replicas that stopped early are
/// carried forward: the flow is the identity after the stop, so their
/// step determinants are zero and their state metrics freeze.
pub(crate) fn aggregate_mode(
    mode: Mode,
    outcomes: Vec<RunOutcome>,
    ctx: &ExperimentContext,
    particles_per_replica: usize,
) -> Result<ModeRun> {
    if outcomes.is_empty() {
        return Err(Error::InvalidInput("no replicas to aggregate".into()));
    }
    let diverged = outcomes.iter().any(|o| o.diverged);
    let runs: Vec<DescentRun> = outcomes.into_iter().map(|o| o.run).collect();
    let horizon = runs.iter().map(|r| r.steps_taken).max().unwrap_or(0);

    // pad every replica's trace with identity steps up to the horizon
    let padded: Vec<FlowTrace> = runs
        .iter()
        .map(|r| {
            let mut t = r.trace.clone();
            for _ in r.trace.n_steps()..horizon {
                t.push_step(vec![0.0; r.trace.n_traces()])?;
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = FlowTrace::merge(&padded)?;
    let sign_flips = merged.sign_flips;
    if sign_flips > 0 {
        eprintln!(
            "warning: {sign_flips} determinant sign flip(s) in {mode} mode; \
             the step size is likely beyond the contraction regime"
        );
    }

    let per_sample_mode = mode == Mode::Mgdm;
    // joint initial entropy of one replica's state
    let init_entropy: f64 = if per_sample_mode {
        runs[0].init.entropy()
    } else {
        particles_per_replica as f64 * runs[0].init.entropy()
    };
    let norm = if per_sample_mode {
        1.0
    } else {
        particles_per_replica as f64
    };
    let dim = ctx.config.d;

    fn record_at(run: &DescentRun, t: usize) -> &crate::descent::StepRecord {
        &run.records[t.min(run.steps_taken)]
    }

    let bound = if ctx.config.bound_diagnostics {
        let distances: Vec<f64> = (0..horizon)
            .map(|t| {
                let vals: Vec<f64> = runs
                    .iter()
                    .map(|r| record_at(r, t).energy_distance)
                    .collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect();
        let betas: Vec<f64> = (0..horizon)
            .map(|t| {
                runs.iter()
                    .filter_map(|r| record_at(r, t).beta)
                    .fold(0.0, f64::max)
            })
            .collect();
        let etas: Vec<f64> = (0..horizon)
            .map(|t| {
                runs.iter()
                    .filter_map(|r| record_at(r, t).eta)
                    .fold(0.0, f64::max)
            })
            .collect();
        let particles = if per_sample_mode {
            1
        } else {
            particles_per_replica
        };
        Some(entropy_rate_bound(
            init_entropy / (particles * dim) as f64,
            runs[0].gamma,
            ctx.energy.output_dim(),
            particles,
            dim,
            &distances,
            &betas,
            &etas,
        ))
    } else {
        None
    };

    let mut rows = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let cumulative = merged.cumulative_at(t)?;
        let m = cumulative.len() as f64;
        let mean_cum = cumulative.iter().sum::<f64>() / m;

        // per-replica entropy and likelihood terms under the per-sample
        // normalization
        let neg_entropy_terms: Vec<f64> = cumulative
            .iter()
            .map(|c| -(init_entropy + c) / norm)
            .collect();
        let mut logp_terms = Vec::with_capacity(cumulative.len());
        let mut rejected = 0usize;
        let mut have_logp = true;
        if per_sample_mode {
            let run = &runs[0];
            match &record_at(run, t).target_logp {
                Some(lp) => {
                    for &v in lp {
                        if v.is_finite() {
                            logp_terms.push(v);
                        } else {
                            rejected += 1;
                            logp_terms.push(f64::NAN);
                        }
                    }
                }
                None => have_logp = false,
            }
        } else {
            for run in &runs {
                match &record_at(run, t).target_logp {
                    Some(lp) => {
                        let (mean, rej) = finite_mean(lp);
                        rejected += rej;
                        logp_terms.push(mean.unwrap_or(f64::NAN));
                    }
                    None => have_logp = false,
                }
            }
        }

        let loss_vals: Vec<f64> = runs.iter().map(|r| record_at(r, t).loss).collect();
        let dist_vals: Vec<f64> = runs
            .iter()
            .map(|r| record_at(r, t).energy_distance)
            .collect();
        let loss = loss_vals.iter().sum::<f64>() / loss_vals.len() as f64;
        let energy_distance = dist_vals.iter().sum::<f64>() / dist_vals.len() as f64;

        let kl = if have_logp {
            let paired: Vec<(f64, f64)> = neg_entropy_terms
                .iter()
                .zip(&logp_terms)
                .filter(|(_, l)| l.is_finite())
                .map(|(&h, &l)| (h, l))
                .collect();
            if paired.is_empty() {
                None
            } else {
                let h: Vec<f64> = paired.iter().map(|p| p.0).collect();
                let l: Vec<f64> = paired.iter().map(|p| p.1).collect();
                Some(KlEstimate::from_replica_terms(&h, &l, rejected)?)
            }
        } else {
            None
        };

        let entropy_total = init_entropy + mean_cum;
        let row = MetricsRow {
            step: t,
            loss,
            energy_distance,
            neg_entropy: kl.as_ref().map(|k| k.neg_entropy),
            neg_entropy_se: kl.as_ref().map(|k| k.neg_entropy_se),
            expected_log_likelihood: kl.as_ref().map(|k| k.expected_log_likelihood),
            expected_log_likelihood_se: kl.as_ref().map(|k| k.expected_log_likelihood_se),
            reverse_kl: kl.as_ref().map(|k| k.kl),
            reverse_kl_se: kl.as_ref().map(|k| k.kl_se),
            entropy_total: Some(entropy_total),
            entropy_per_sample: Some(entropy_total / norm),
            entropy_rate: Some(
                entropy_total
                    / ((if per_sample_mode { 1 } else { particles_per_replica } * dim) as f64),
            ),
            reverse_kl_joint: kl
                .as_ref()
                .map(|k| k.kl * if per_sample_mode { 1.0 } else { norm }),
            bound_rate: bound.as_ref().map(|b| b.bound_rate[t]),
            rejected: kl.as_ref().map(|k| k.rejected).unwrap_or(rejected),
        };
        debug_assert!(row
            .reverse_kl
            .zip(row.neg_entropy.zip(row.expected_log_likelihood))
            .map(|(kl, (h, l))| (kl - (h - l)).abs() < 1e-12)
            .unwrap_or(true));
        rows.push(row);
    }

    Ok(ModeRun {
        mode,
        rows,
        runs,
        particles_per_replica,
        diverged,
        sign_flips,
    })
}
