//! Sampling kernels and the descent driver.
//!
//! One gradient step on `½‖Φ(x) - α‖²` moves a single path toward the
//! target energy; the mean-field variant couples N particles through the
//! batch-mean energy so the ensemble moves toward `α` in aggregate while
//! individual particles keep their spread. Projected variants serve
//! positive-support targets.

mod batch;

pub use batch::ParticleBatch;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::energy::{batch_mean_energy, Energy, EnergyVector};
use crate::error::{Error, Result};
use crate::likelihood::{
    step_logdet_mf_fast, step_logdet_projected_mf, step_logdet_projected_single,
    step_logdet_single, FlowTrace, SignedLogDet,
};
use crate::linalg::sym_spectral_norm;
use crate::models::{InitDistribution, TargetModel};
use crate::rng::{stream_rng, StreamKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Independent per-sample descent.
    Mgdm,
    /// Mean-field coupled batch descent.
    MfMgdm,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Mgdm => write!(f, "mgdm"),
            Mode::MfMgdm => write!(f, "mf-mgdm"),
        }
    }
}

/// Step-size rule. The automatic rule calibrates `γ = c / λ_max(JᵀJ)`
/// over the initial batch; the resolved value is reported in the run and
/// reused verbatim by the likelihood bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaRule {
    Fixed(f64),
    Auto { c: f64 },
}

impl Default for GammaRule {
    fn default() -> Self {
        GammaRule::Auto { c: 0.02 }
    }
}

/// Largest `λ_max(J_Φ J_Φᵀ)` over the batch, the curvature scale of the
/// least-squares part of the loss.
pub fn jacobian_curvature(batch: &ParticleBatch, energy: &dyn Energy) -> f64 {
    batch
        .particles()
        .map(|x| {
            let jac = energy.jacobian(x);
            let gram = &jac * jac.transpose();
            SymmetricEigen::new(gram).eigenvalues.max()
        })
        .fold(0.0, f64::max)
}

pub fn auto_gamma(batch: &ParticleBatch, energy: &dyn Energy, c: f64) -> f64 {
    let lambda = jacobian_curvature(batch, energy);
    if lambda > 0.0 {
        c / lambda
    } else {
        c
    }
}

#[derive(Clone, Debug)]
pub struct DescentConfig {
    pub mode: Mode,
    pub gamma: GammaRule,
    /// Step cap T.
    pub max_steps: usize,
    /// Energy-ball radius: a mean-field run stops once `‖Φ̄ - α‖ ≤ ε`, a
    /// single-particle run once every sample satisfies `‖Φ(x) - α‖ ≤ ε`;
    /// `+∞` disables the stop and `0` in practice never triggers.
    pub epsilon: f64,
    /// Number of particles per run: coupled particles in mean-field mode,
    /// independent samples otherwise.
    pub batch_size: usize,
    pub projected: bool,
    pub init: InitDistribution,
    pub seed: u64,
    /// Stream index separating replicas that share a seed.
    pub replica_index: u64,
    /// Determinant evaluation cadence; default every step for d ≤ 256,
    /// every 5th step above, with skipped steps carrying the latest value.
    pub logdet_every: Option<usize>,
    pub compute_logdet: bool,
    /// Record per-step spectral bounds for the entropy-rate diagnostic.
    pub collect_bound_stats: bool,
}

impl DescentConfig {
    pub fn new(mode: Mode, init: InitDistribution, batch_size: usize, max_steps: usize) -> Self {
        Self {
            mode,
            gamma: GammaRule::default(),
            max_steps,
            epsilon: 0.0,
            batch_size,
            projected: false,
            init,
            seed: 0,
            replica_index: 0,
            logdet_every: None,
            compute_logdet: true,
            collect_bound_stats: false,
        }
    }

    fn validate(&self, energy: &dyn Energy) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be ≥ 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("step cap must be ≥ 1".into()));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::InvalidConfig("tolerance must be ≥ 0".into()));
        }
        if let GammaRule::Fixed(g) = self.gamma {
            if g <= 0.0 || !g.is_finite() {
                return Err(Error::InvalidConfig(format!("step size must be > 0, got {g}")));
            }
        }
        self.init.validate()?;
        if self.init.dim() != energy.input_dim() {
            return Err(Error::Dimension {
                context: "initial distribution vs energy",
                expected: energy.input_dim(),
                got: self.init.dim(),
            });
        }
        if self.projected && !self.init.positive_support() {
            return Err(Error::InvalidConfig(
                "projected descent requires a positive-support initial distribution".into(),
            ));
        }
        Ok(())
    }
}

/// Single gradient step `x - γ J_Φ(x)ᵀ (Φ(x) - α)`.
pub fn gd_step(x: &[f64], alpha: &EnergyVector, energy: &dyn Energy, gamma: f64) -> Result<Vec<f64>> {
    let d = energy.input_dim();
    assert_eq!(x.len(), d, "path length mismatch");
    let value = energy.value(x);
    let jac = energy.jacobian(x);
    let k = energy.output_dim();
    let mut out = x.to_vec();
    for j in 0..d {
        let mut g = 0.0;
        for i in 0..k {
            g += jac[(i, j)] * (value[i] - alpha[i]);
        }
        out[j] -= gamma * g;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            step: 0,
            detail: "non-finite gradient-step result".into(),
            partial: None,
        });
    }
    Ok(out)
}

/// Mean-field step: every particle moves along its own Jacobian applied to
/// the shared batch residual, `x^{(n)} - γ J_Φ(x^{(n)})ᵀ (Φ̄(x) - α)`;
/// equivalently one gradient step on `(N/2)‖Φ̄ - α‖²`.
pub fn mf_step(
    batch: &ParticleBatch,
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
) -> Result<ParticleBatch> {
    let phi_bar = batch_mean_energy(batch, energy)?;
    let d = batch.dim();
    let k = energy.output_dim();
    let rows: Vec<Result<Vec<f64>>> = (0..batch.len())
        .into_par_iter()
        .map(|i| {
            let x = batch.particle(i);
            let jac = energy.jacobian(x);
            let mut out = x.to_vec();
            for j in 0..d {
                let mut g = 0.0;
                for c in 0..k {
                    g += jac[(c, j)] * (phi_bar[c] - alpha[c]);
                }
                out[j] -= gamma * g;
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    step: 0,
                    detail: format!("non-finite mean-field update at particle {i}"),
                    partial: None,
                });
            }
            Ok(out)
        })
        .collect();
    let mut data = Vec::with_capacity(batch.len() * d);
    for row in rows {
        data.extend_from_slice(&row?);
    }
    Ok(ParticleBatch::from_flat(data, batch.len(), d))
}

/// Projected single-particle step: a component keeps its gradient-step
/// value when that value is nonnegative and retains the prior value
/// otherwise. Returns the update and the mask of updated components.
pub fn projected_gd_step(
    x: &[f64],
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if let Some(&bad) = x.iter().find(|&&v| v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "projected step requires nonnegative input, got {bad}"
        )));
    }
    let candidate = gd_step(x, alpha, energy, gamma)?;
    Ok(apply_projection(x, candidate))
}

fn apply_projection(prior: &[f64], candidate: Vec<f64>) -> (Vec<f64>, Vec<bool>) {
    let mut mask = vec![true; candidate.len()];
    let mut out = candidate;
    for (i, v) in out.iter_mut().enumerate() {
        if *v < 0.0 {
            *v = prior[i];
            mask[i] = false;
        }
    }
    (out, mask)
}

/// Projected mean-field step; the returned batch carries the per-particle
/// mask of updated components.
pub fn projected_mf_step(
    batch: &ParticleBatch,
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
) -> Result<ParticleBatch> {
    if batch.min_value() < 0.0 {
        return Err(Error::InvalidInput(
            "projected step requires nonnegative input components".into(),
        ));
    }
    let candidate = mf_step(batch, alpha, energy, gamma)?;
    let n = batch.len();
    let d = batch.dim();
    let mut data = Vec::with_capacity(n * d);
    let mut active = Vec::with_capacity(n * d);
    for i in 0..n {
        let (row, mask) = apply_projection(batch.particle(i), candidate.particle(i).to_vec());
        data.extend_from_slice(&row);
        active.extend_from_slice(&mask);
    }
    let mut out = ParticleBatch::from_flat(data, n, d);
    out.active = Some(active);
    Ok(out)
}

/// One per-step summary row, recorded after the step is applied. Index 0
/// describes the freshly sampled initial state.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: usize,
    /// Mean per-sample loss `½‖Φ - α‖²` in single-particle mode, the
    /// coupled objective `(N/2)‖Φ̄ - α‖²` in mean-field mode.
    pub loss: f64,
    /// `‖Φ̄(x) - α‖`, the stopping metric in both modes.
    pub energy_distance: f64,
    /// Per-particle `‖Φ(x⁽ⁿ⁾) - α‖`, kept in single-particle mode.
    pub particle_distances: Option<Vec<f64>>,
    /// Per-trace `log|det J|` of the step that produced this state.
    pub step_logdet: Option<Vec<f64>>,
    /// False when the value was carried from the last evaluated step.
    pub logdet_evaluated: bool,
    /// Per-particle target log-density, when a target model is supplied.
    pub target_logp: Option<Vec<f64>>,
    /// Local spectral bound of the energy Jacobian over the batch.
    pub beta: Option<f64>,
    /// Local spectral bound of the per-component Hessians.
    pub eta: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DescentRun {
    pub batch: ParticleBatch,
    pub records: Vec<StepRecord>,
    pub trace: FlowTrace,
    /// Resolved step size actually used.
    pub gamma: f64,
    pub init: InitDistribution,
    pub steps_taken: usize,
    pub stopped_by_epsilon: bool,
}

impl DescentRun {
    /// Pre-step energy distances for the applied steps (records
    /// `0..steps_taken`), the sequence the entropy-rate bound integrates.
    pub fn pre_step_distances(&self) -> Vec<f64> {
        self.records[..self.steps_taken]
            .iter()
            .map(|r| r.energy_distance)
            .collect()
    }
}

struct StateMetrics {
    loss: f64,
    distance: f64,
    /// Batch-mean distance in mean-field mode, worst per-sample distance
    /// otherwise; what the energy-ball stop compares against ε.
    stop_distance: f64,
    particle_distances: Option<Vec<f64>>,
    logp: Option<Vec<f64>>,
}

fn state_metrics(
    batch: &ParticleBatch,
    alpha: &EnergyVector,
    energy: &dyn Energy,
    mode: Mode,
    target: Option<&dyn TargetModel>,
) -> StateMetrics {
    let k = energy.output_dim();
    let values: Vec<EnergyVector> = batch
        .particles()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|x| energy.value(x))
        .collect();
    let mut mean = EnergyVector::zeros(k);
    for v in &values {
        mean += v;
    }
    mean /= batch.len() as f64;
    let distance = (&mean - alpha).norm();
    let (loss, stop_distance, particle_distances) = match mode {
        Mode::Mgdm => {
            let dists: Vec<f64> = values.iter().map(|v| (v - alpha).norm()).collect();
            let loss = dists.iter().map(|d| 0.5 * d * d).sum::<f64>() / dists.len() as f64;
            let worst = dists.iter().copied().fold(0.0, f64::max);
            (loss, worst, Some(dists))
        }
        Mode::MfMgdm => (
            0.5 * batch.len() as f64 * distance * distance,
            distance,
            None,
        ),
    };
    let logp = target.map(|t| {
        batch
            .particles()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|x| t.log_density(x).unwrap_or(f64::NEG_INFINITY))
            .collect()
    });
    StateMetrics {
        loss,
        distance,
        stop_distance,
        particle_distances,
        logp,
    }
}

/// Local spectral bound of the per-component Hessians at one state.
fn local_eta(x: &[f64], energy: &dyn Energy) -> f64 {
    let k = energy.output_dim();
    let mut eta = 0.0f64;
    for c in 0..k {
        let mut w = vec![0.0; k];
        w[c] = 1.0;
        let h = energy.weighted_hessian(x, &w);
        eta = eta.max(sym_spectral_norm(&h, 300));
    }
    eta
}

/// Run the configured descent: sample the initial batch, iterate the step
/// kernel until the step cap or the energy ball is reached (whichever
/// comes first) and record per-step metrics plus the flow trace. A
/// supplied target model attaches per-step log-densities for KL
/// evaluation downstream.
pub fn run_descent(
    config: &DescentConfig,
    alpha: &EnergyVector,
    energy: &dyn Energy,
    target: Option<&dyn TargetModel>,
) -> Result<DescentRun> {
    config.validate(energy)?;
    let d = energy.input_dim();
    let mut rng = stream_rng(config.seed, StreamKind::Replica, config.replica_index);
    let mut batch = ParticleBatch::sample_init(&config.init, config.batch_size, &mut rng)?;
    let gamma = match config.gamma {
        GammaRule::Fixed(g) => g,
        GammaRule::Auto { c } => auto_gamma(&batch, energy, c),
    };
    let per_sample = config.mode == Mode::Mgdm;
    let n_traces = if per_sample { config.batch_size } else { 1 };
    let mut trace = FlowTrace::new(per_sample, n_traces);
    let eval_every = config
        .logdet_every
        .unwrap_or(if d <= 256 { 1 } else { 5 })
        .max(1);

    let eps_stop = |dist: f64| config.epsilon.is_finite() && dist <= config.epsilon;

    let init_metrics = state_metrics(&batch, alpha, energy, config.mode, target);
    let shared_eta = if config.collect_bound_stats && energy.constant_hessian() {
        Some(local_eta(batch.particle(0), energy))
    } else {
        None
    };
    let mut records = vec![StepRecord {
        step: 0,
        loss: init_metrics.loss,
        energy_distance: init_metrics.distance,
        particle_distances: init_metrics.particle_distances,
        step_logdet: None,
        logdet_evaluated: false,
        target_logp: init_metrics.logp,
        beta: config
            .collect_bound_stats
            .then(|| jacobian_curvature(&batch, energy).sqrt()),
        eta: shared_eta.or_else(|| {
            config
                .collect_bound_stats
                .then(|| local_eta(batch.particle(0), energy))
        }),
    }];

    let gamma_used = gamma;
    let init_used = config.init.clone();
    let finish = move |batch: ParticleBatch,
                       records: Vec<StepRecord>,
                       mut trace: FlowTrace,
                       steps_taken: usize,
                       stopped: bool,
                       sign_flips: usize,
                       carried_any: bool| {
        trace.sign_flips = sign_flips;
        trace.exact = !carried_any;
        DescentRun {
            batch,
            records,
            trace,
            gamma: gamma_used,
            init: init_used,
            steps_taken,
            stopped_by_epsilon: stopped,
        }
    };

    if eps_stop(init_metrics.stop_distance) {
        return Ok(finish(batch, records, trace, 0, true, 0, false));
    }

    let mut steps_taken = 0usize;
    let mut stopped_by_epsilon = false;
    let mut last_logdet = vec![0.0; n_traces];
    let mut last_signs = vec![1.0; n_traces];
    let mut sign_flips = 0usize;
    let mut carried_any = false;
    let mut grow_streak = 0usize;
    let mut prev_loss = init_metrics.loss;

    for t in 1..=config.max_steps {
        let pre = batch;
        let step_result: Result<ParticleBatch> = match (config.mode, config.projected) {
            (Mode::MfMgdm, false) => mf_step(&pre, alpha, energy, gamma),
            (Mode::MfMgdm, true) => projected_mf_step(&pre, alpha, energy, gamma),
            (Mode::Mgdm, projected) => {
                let rows: Vec<Result<(Vec<f64>, Option<Vec<bool>>)>> = (0..pre.len())
                    .into_par_iter()
                    .map(|i| {
                        let x = pre.particle(i);
                        if projected {
                            let (row, mask) = projected_gd_step(x, alpha, energy, gamma)?;
                            Ok((row, Some(mask)))
                        } else {
                            Ok((gd_step(x, alpha, energy, gamma)?, None))
                        }
                    })
                    .collect();
                (|| {
                    let mut data = Vec::with_capacity(pre.len() * d);
                    let mut active = projected.then(|| Vec::with_capacity(pre.len() * d));
                    for row in rows {
                        let (row, mask) = row?;
                        data.extend_from_slice(&row);
                        if let (Some(acc), Some(mask)) = (active.as_mut(), mask) {
                            acc.extend_from_slice(&mask);
                        }
                    }
                    let mut out = ParticleBatch::from_flat(data, pre.len(), d);
                    out.active = active;
                    Ok(out)
                })()
            }
        };
        let mut next = match step_result {
            Ok(b) => b,
            Err(Error::Divergence { detail, .. }) => {
                let run = finish(pre, records, trace, steps_taken, false, sign_flips, carried_any);
                return Err(Error::Divergence {
                    step: t,
                    detail,
                    partial: Some(Box::new(run)),
                });
            }
            Err(e) => return Err(e),
        };
        next.step = t;

        // determinant of the map just applied, evaluated at the pre-step state
        let evaluated = config.compute_logdet && ((t - 1) % eval_every == 0 || t == config.max_steps);
        if config.compute_logdet {
            if evaluated {
                let mut masked_pre;
                let logdet_state: &ParticleBatch = if next.active.is_some() {
                    masked_pre = pre.clone();
                    masked_pre.active = next.active.clone();
                    &masked_pre
                } else {
                    &pre
                };
                let values: Vec<SignedLogDet> = if per_sample {
                    let per: Vec<Result<SignedLogDet>> = (0..logdet_state.len())
                        .into_par_iter()
                        .map(|i| {
                            let x = logdet_state.particle(i);
                            match logdet_state.particle_mask(i) {
                                Some(mask) => {
                                    step_logdet_projected_single(x, mask, alpha, energy, gamma)
                                }
                                None => step_logdet_single(x, alpha, energy, gamma),
                            }
                        })
                        .collect();
                    per.into_iter().collect::<Result<Vec<_>>>()?
                } else {
                    let one = if logdet_state.active.is_some() {
                        step_logdet_projected_mf(logdet_state, alpha, energy, gamma)?
                    } else {
                        step_logdet_mf_fast(logdet_state, alpha, energy, gamma)?
                    };
                    vec![one]
                };
                for (j, v) in values.iter().enumerate() {
                    if steps_taken > 0 && v.sign != last_signs[j] {
                        sign_flips += 1;
                    }
                    last_signs[j] = v.sign;
                    last_logdet[j] = v.log_abs;
                }
            } else {
                carried_any = true;
            }
            trace.push_step(last_logdet.clone())?;
        }

        let metrics = state_metrics(&next, alpha, energy, config.mode, target);
        records.push(StepRecord {
            step: t,
            loss: metrics.loss,
            energy_distance: metrics.distance,
            particle_distances: metrics.particle_distances,
            step_logdet: config.compute_logdet.then(|| trace.step_values(t).to_vec()),
            logdet_evaluated: evaluated,
            target_logp: metrics.logp,
            beta: config
                .collect_bound_stats
                .then(|| jacobian_curvature(&next, energy).sqrt()),
            eta: shared_eta.or_else(|| {
                config
                    .collect_bound_stats
                    .then(|| local_eta(next.particle(0), energy))
            }),
        });
        steps_taken = t;

        if metrics.loss > prev_loss {
            grow_streak += 1;
            if grow_streak >= 10 {
                let run = finish(next, records, trace, steps_taken, false, sign_flips, carried_any);
                return Err(Error::Divergence {
                    step: t,
                    detail: "loss grew for 10 consecutive steps".into(),
                    partial: Some(Box::new(run)),
                });
            }
        } else {
            grow_streak = 0;
        }
        prev_loss = metrics.loss;

        batch = next;
        if eps_stop(metrics.stop_distance) {
            stopped_by_epsilon = true;
            break;
        }
    }

    Ok(finish(
        batch,
        records,
        trace,
        steps_taken,
        stopped_by_epsilon,
        sign_flips,
        carried_any,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::AcfEnergy;
    use crate::models::ArProcess;
    use nalgebra::DVector;
    use rand_distr::{Distribution, StandardNormal};

    fn seeded_path(d: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, StreamKind::Test, 7);
        (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn seeded_batch(n: usize, d: usize, seed: u64) -> ParticleBatch {
        ParticleBatch::from_rows((0..n).map(|i| seeded_path(d, seed * 977 + i as u64)).collect())
            .unwrap()
    }

    #[test]
    fn zero_gamma_is_identity() {
        let d = 16;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let x = seeded_path(d, 1);
        assert_eq!(gd_step(&x, &alpha, &energy, 0.0).unwrap(), x);
        let (px, mask) = projected_gd_step(&vec![0.5; d], &alpha, &energy, 0.0).unwrap();
        assert_eq!(px, vec![0.5; d]);
        assert!(mask.iter().all(|&m| m));
    }

    #[test]
    fn exact_target_is_a_fixed_point() {
        let d = 16;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let x = seeded_path(d, 2);
        let alpha = energy.value(&x);
        let next = gd_step(&x, &alpha, &energy, 0.3).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn gd_step_matches_fd_gradient_of_loss() {
        // ∇(½‖Φ(x)-α‖²) = J_Φᵀ(Φ-α), so the step equals x - γ·(fd gradient)
        let d = 12;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let gamma = 0.01;
        let x = seeded_path(d, 3);
        let loss = |p: &[f64]| {
            let v = energy.value(p);
            0.5 * (v - &alpha).norm_squared()
        };
        let next = gd_step(&x, &alpha, &energy, gamma).unwrap();
        for j in 0..d {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut up = x.clone();
            up[j] += h;
            let mut down = x.clone();
            down[j] -= h;
            let grad = (loss(&up) - loss(&down)) / (2.0 * h);
            let expected = x[j] - gamma * grad;
            assert!(
                (next[j] - expected).abs() <= 1e-5 * expected.abs().max(1.0),
                "component {j}: {} vs {expected}",
                next[j]
            );
        }
    }

    #[test]
    fn single_particle_mf_step_equals_gd_step() {
        let d = 24;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let gamma = 0.05;
        for seed in 0..10u64 {
            let x = seeded_path(d, 100 + seed);
            let batch = ParticleBatch::from_rows(vec![x.clone()]).unwrap();
            let mf = mf_step(&batch, &alpha, &energy, gamma).unwrap();
            let gd = gd_step(&x, &alpha, &energy, gamma).unwrap();
            for j in 0..d {
                assert!((mf.particle(0)[j] - gd[j]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn identical_particles_update_like_single_step() {
        let d = 16;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let gamma = 0.05;
        let x = seeded_path(d, 4);
        let batch = ParticleBatch::from_rows(vec![x.clone(); 4]).unwrap();
        let mf = mf_step(&batch, &alpha, &energy, gamma).unwrap();
        let gd = gd_step(&x, &alpha, &energy, gamma).unwrap();
        for i in 0..4 {
            for j in 0..d {
                assert!((mf.particle(i)[j] - gd[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mf_step_matches_fd_gradient_of_coupled_loss() {
        let (n, d) = (3, 8);
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let gamma = 0.01;
        let batch = seeded_batch(n, d, 5);
        let flat: Vec<f64> = batch.particles().flatten().copied().collect();
        let coupled_loss = |p: &[f64]| {
            let rows: Vec<Vec<f64>> = p.chunks(d).map(|c| c.to_vec()).collect();
            let b = ParticleBatch::from_rows(rows).unwrap();
            let mean = batch_mean_energy(&b, &energy).unwrap();
            0.5 * n as f64 * (mean - &alpha).norm_squared()
        };
        let next = mf_step(&batch, &alpha, &energy, gamma).unwrap();
        let next_flat: Vec<f64> = next.particles().flatten().copied().collect();
        for j in 0..n * d {
            let h = 1e-6 * flat[j].abs().max(1.0);
            let mut up = flat.clone();
            up[j] += h;
            let mut down = flat.clone();
            down[j] -= h;
            let grad = (coupled_loss(&up) - coupled_loss(&down)) / (2.0 * h);
            let expected = flat[j] - gamma * grad;
            assert!(
                (next_flat[j] - expected).abs() <= 1e-5 * expected.abs().max(1.0),
                "component {j}"
            );
        }
    }

    #[test]
    fn mf_step_is_permutation_equivariant() {
        let (n, d) = (5, 12);
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let gamma = 0.04;
        let batch = seeded_batch(n, d, 6);
        let order = [3usize, 0, 4, 1, 2];
        let permuted = batch.permuted(&order).unwrap();
        let a = mf_step(&batch, &alpha, &energy, gamma).unwrap().permuted(&order).unwrap();
        let b = mf_step(&permuted, &alpha, &energy, gamma).unwrap();
        for i in 0..n {
            for j in 0..d {
                assert!((a.particle(i)[j] - b.particle(i)[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_keeps_prior_value_on_negative_candidates() {
        // On a constant path the lag-1 gradient rows are half-size at the
        // path edges, so with this residual the interior components
        // overshoot below zero while the edges stay positive.
        let d = 6;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let gamma = 1.0;
        let x = vec![1.0; d];
        let phi = energy.value(&x);
        let alpha = DVector::from_vec(vec![phi[0] - 4.0, phi[1]]);
        let candidate = gd_step(&x, &alpha, &energy, gamma).unwrap();
        let (projected, mask) = projected_gd_step(&x, &alpha, &energy, gamma).unwrap();
        // scalar-by-scalar oracle: x_j - γ·w_lag1·(x_{j-1} + x_{j+1})/d
        for j in 0..d {
            let neighbors = if j == 0 || j == d - 1 { 1.0 } else { 2.0 };
            let expected = 1.0 - 4.0 * neighbors / d as f64;
            assert!((candidate[j] - expected).abs() < 1e-12);
            if expected >= 0.0 {
                assert!(mask[j]);
                assert!((projected[j] - expected).abs() < 1e-12);
            } else {
                assert!(!mask[j]);
                assert_eq!(projected[j], 1.0);
            }
        }
        assert!(!mask[2] && mask[0], "expected a mixed mask");
        assert!(projected.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn projected_step_rejects_negative_input() {
        let d = 4;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let x = vec![0.5, -0.1, 0.2, 0.3];
        assert!(matches!(
            projected_gd_step(&x, &alpha, &energy, 0.1),
            Err(Error::InvalidInput(_))
        ));
    }

    fn desk_config(mode: Mode, d: usize, n: usize, seed: u64) -> DescentConfig {
        let init = InitDistribution::gaussian_white(1.0, d).unwrap();
        let mut cfg = DescentConfig::new(mode, init, n, 60);
        cfg.seed = seed;
        cfg
    }

    #[test]
    fn disabled_epsilon_runs_exactly_max_steps() {
        let d = 16;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let mut cfg = desk_config(Mode::MfMgdm, d, 4, 1);
        cfg.max_steps = 7;
        cfg.epsilon = f64::INFINITY;
        let run = run_descent(&cfg, &alpha, &energy, None).unwrap();
        assert_eq!(run.steps_taken, 7);
        assert!(!run.stopped_by_epsilon);
        assert_eq!(run.records.len(), 8);
        assert_eq!(run.trace.n_steps(), 7);
    }

    #[test]
    fn init_inside_the_energy_ball_stops_immediately() {
        let d = 16;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let mut cfg = desk_config(Mode::MfMgdm, d, 4, 2);
        cfg.epsilon = 1e6;
        let run = run_descent(&cfg, &alpha, &energy, None).unwrap();
        assert_eq!(run.steps_taken, 0);
        assert!(run.stopped_by_epsilon);
    }

    #[test]
    fn mean_field_descent_converges_on_ar1_target() {
        let d = 128;
        let proc = ArProcess::new(vec![0.1], 0.99f64.sqrt(), d).unwrap();
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let paths: Vec<Vec<f64>> = (0..256)
            .map(|i| proc.sample_path(&mut stream_rng(50, StreamKind::TargetPath, i)))
            .collect();
        let target = crate::energy::estimate_target(&paths, &energy).unwrap();
        let mut cfg = desk_config(Mode::MfMgdm, d, 32, 3);
        cfg.max_steps = 150;
        cfg.compute_logdet = false;
        let run = run_descent(&cfg, &target.alpha, &energy, None).unwrap();
        let eps = target.suggested_epsilon();
        let final_dist = run.records.last().unwrap().energy_distance;
        assert!(final_dist <= eps, "final distance {final_dist} vs ε {eps}");
        // distance non-increasing after the initial transient
        for w in run.records[5..].windows(2) {
            assert!(
                w[1].energy_distance <= w[0].energy_distance + 1e-9,
                "distance grew at step {}",
                w[1].step
            );
        }
    }

    #[test]
    fn pre_step_distances_cover_the_applied_steps() {
        let d = 16;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let mut cfg = desk_config(Mode::MfMgdm, d, 4, 9);
        cfg.max_steps = 6;
        let run = run_descent(&cfg, &alpha, &energy, None).unwrap();
        let pre = run.pre_step_distances();
        assert_eq!(pre.len(), run.steps_taken);
        for (i, v) in pre.iter().enumerate() {
            assert_eq!(*v, run.records[i].energy_distance);
        }
    }

    #[test]
    fn identical_config_and_seed_reproduce_the_run() {
        let d = 32;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let cfg = desk_config(Mode::MfMgdm, d, 8, 11);
        let a = run_descent(&cfg, &alpha, &energy, None).unwrap();
        let b = run_descent(&cfg, &alpha, &energy, None).unwrap();
        assert_eq!(a.batch, b.batch);
        assert_eq!(a.gamma, b.gamma);
    }

    #[test]
    fn projected_run_keeps_positive_support() {
        let d = 32;
        let proc = crate::models::CirProcess::with_unit_step(0.5, 1.0, 1.0, d).unwrap();
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let paths: Vec<Vec<f64>> = (0..128)
            .map(|i| {
                use crate::models::TargetModel;
                proc.sample_path(&mut stream_rng(51, StreamKind::TargetPath, i))
            })
            .collect();
        let target = crate::energy::estimate_target(&paths, &energy).unwrap();
        let init = InitDistribution::fit_positive(1.0, 1.0, d).unwrap();
        let mut cfg = DescentConfig::new(Mode::MfMgdm, init, 8, 40);
        cfg.projected = true;
        cfg.seed = 4;
        let run = run_descent(&cfg, &target.alpha, &energy, None).unwrap();
        assert!(run.batch.min_value() >= 0.0);
    }

    #[test]
    fn projection_demands_positive_init() {
        let d = 16;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let mut cfg = desk_config(Mode::MfMgdm, d, 4, 5);
        cfg.projected = true;
        assert!(matches!(
            run_descent(&cfg, &alpha, &energy, None),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn divergent_step_size_aborts_with_partial_trace() {
        let d = 32;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let mut cfg = desk_config(Mode::MfMgdm, d, 4, 400);
        cfg.gamma = GammaRule::Fixed(1e4);
        match run_descent(&cfg, &alpha, &energy, None) {
            Err(Error::Divergence { partial, .. }) => {
                let partial = partial.expect("partial trace attached");
                assert!(!partial.records.is_empty());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
