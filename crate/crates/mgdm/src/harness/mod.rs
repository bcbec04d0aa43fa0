//! Experiment orchestration: synthetic benchmarks with closed-form
//! targets, per-step KL traces, the financial-statistics pipeline, and
//! machine-readable outputs.

mod aggregate;
pub mod export;
mod finance;

pub(crate) use aggregate::aggregate_mode;
pub use aggregate::{MetricsRow, ModeRun};
pub use finance::{
    autocorrelation, freedman_diaconis_edges, generate_synthetic_prices,
    generate_synthetic_prices_kind, histogram_counts, ingest_prices, iqr, mean_component_iqr,
    run_financial_pipeline, suggest_epsilon_from_chunks, write_finance_outputs,
    FinanceModeReport, FinanceReport,
    FinancialDataset, StatsBlock, SyntheticKind, Transform,
};

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{auto_gamma, DescentConfig, GammaRule, Mode, ParticleBatch};
use crate::energy::{estimate_target, AcfEnergy, Energy, SquaredAcfEnergy, TargetEnergy};
use crate::error::{Error, Result};
use crate::models::{ArProcess, CirProcess, InitDistribution, TargetModel};
use crate::rng::{stream_rng, StreamKind};

/// Full experiment description. Every field has a default; the file format
/// is plain TOML `key = value` pairs and the CLI mirrors the fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Target process: `ar:<coeffs>` (innovation scaled to unit marginal
    /// variance) or `cir:<kappa>,<theta>,<sigma>`; the finance pipeline
    /// uses `data` instead.
    pub target: String,
    /// Energy: `auto` (the AR(1) sufficient statistics for synthetic
    /// targets, `sqacf:20` in the finance pipeline), `acf` (lag-1 then
    /// lag-0), `acf:<lags>`, or
    /// `sqacf:<L>[:centered|:centered-signal|:centered-squared]`.
    pub energy: String,
    /// Modes to run.
    pub modes: Vec<Mode>,
    /// Path length d.
    pub d: usize,
    /// Mean-field batch size N.
    pub particles: usize,
    /// Monte Carlo replica count M.
    pub replicas: usize,
    /// Step cap T.
    pub steps: usize,
    /// Fixed step size; 0 selects the automatic rule.
    pub gamma: f64,
    /// Safety factor of the automatic step size.
    pub gamma_c: f64,
    /// Energy-ball radius; 0 disables the stop.
    pub epsilon: f64,
    /// Use the spread-based suggested radius instead of `epsilon`.
    pub epsilon_auto: bool,
    /// Paths simulated to estimate the target energy.
    pub target_paths: usize,
    pub seed: u64,
    /// Projected (positive-support) descent.
    pub projection: bool,
    /// Initial distribution: `auto`, `gaussian:<sigma2>`,
    /// `exponential:<rate>`, or `positive-fit`.
    pub init: String,
    /// Mean-field batch sizes for the sweep mode of the trace experiment.
    pub sweep_n: Vec<usize>,
    /// Restore the publication-scale sizes (d=1024, N=M=128, 10 000
    /// target paths).
    pub full_scale: bool,
    /// Determinant evaluation cadence; 0 keeps the dimension-based
    /// default (every step for d ≤ 256, every 5th above).
    pub logdet_every: usize,
    /// Record spectral bounds for the entropy-rate diagnostic.
    pub bound_diagnostics: bool,
    /// Price CSV for the finance pipeline.
    pub data: Option<String>,
    /// Price transform: `log-returns` or `differences`.
    pub transform: String,
    /// Report autocorrelations up to this lag.
    pub report_lags: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            target: "ar:0.1".into(),
            energy: "auto".into(),
            modes: vec![Mode::Mgdm, Mode::MfMgdm],
            d: 128,
            particles: 32,
            replicas: 32,
            steps: 300,
            gamma: 0.0,
            gamma_c: 0.02,
            epsilon: 0.0,
            epsilon_auto: false,
            target_paths: 512,
            seed: 7,
            projection: false,
            init: "auto".into(),
            sweep_n: Vec::new(),
            full_scale: false,
            logdet_every: 0,
            bound_diagnostics: false,
            data: None,
            transform: "log-returns".into(),
            report_lags: 20,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Apply the publication-scale overrides.
    pub fn scaled(mut self) -> Self {
        if self.full_scale {
            self.d = 1024;
            self.particles = 128;
            self.replicas = 128;
            self.target_paths = 10_000;
            if self.steps == ExperimentConfig::default().steps {
                self.steps = 600;
            }
        }
        self
    }

    pub fn build_energy(&self, d: usize) -> Result<Arc<dyn Energy>> {
        if self.energy == "auto" {
            let default = if self.data.is_some() { "sqacf:20" } else { "acf" };
            return parse_energy(default, d);
        }
        parse_energy(&self.energy, d)
    }

    pub fn build_target(&self, d: usize) -> Result<Arc<dyn TargetModel>> {
        parse_target(&self.target, d)
    }
}

pub fn parse_energy(spec_str: &str, d: usize) -> Result<Arc<dyn Energy>> {
    let mut parts = spec_str.split(':');
    let kind = parts.next().unwrap_or_default();
    match kind {
        "acf" => {
            let lags = match parts.next() {
                None | Some("") => vec![1, 0],
                Some(list) => list
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|e| Error::InvalidConfig(format!("bad lag {s:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?,
            };
            Ok(Arc::new(AcfEnergy::new(lags, d)?))
        }
        "sqacf" => {
            let lags = match parts.next() {
                None | Some("") => 20,
                Some(l) => l
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidConfig(format!("bad lag count {l:?}: {e}")))?,
            };
            let (mut center_signal, mut center_squared) = (false, false);
            if let Some(flag) = parts.next() {
                match flag {
                    "centered" => {
                        center_signal = true;
                        center_squared = true;
                    }
                    "centered-signal" => center_signal = true,
                    "centered-squared" => center_squared = true,
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown centering flag {other:?}"
                        )))
                    }
                }
            }
            Ok(Arc::new(SquaredAcfEnergy::new(
                d,
                lags,
                center_signal,
                center_squared,
            )?))
        }
        other => Err(Error::InvalidConfig(format!("unknown energy {other:?}"))),
    }
}

pub fn parse_target(spec_str: &str, d: usize) -> Result<Arc<dyn TargetModel>> {
    let (kind, rest) = spec_str
        .split_once(':')
        .ok_or_else(|| Error::InvalidConfig(format!("bad target {spec_str:?}")))?;
    let nums: Vec<f64> = rest
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("bad target parameter {s:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    match kind {
        "ar" => Ok(Arc::new(ArProcess::with_unit_variance(nums, d)?)),
        "cir" => {
            if nums.len() != 3 {
                return Err(Error::InvalidConfig(
                    "cir target needs kappa,theta,sigma".into(),
                ));
            }
            Ok(Arc::new(CirProcess::with_unit_step(nums[0], nums[1], nums[2], d)?))
        }
        other => Err(Error::InvalidConfig(format!("unknown target {other:?}"))),
    }
}

/// Everything resolved before any descent runs: energy, target, estimated
/// target energy, initial distribution and step size shared by all modes.
pub struct ExperimentContext {
    pub config: ExperimentConfig,
    pub energy: Arc<dyn Energy>,
    pub target: Arc<dyn TargetModel>,
    pub target_energy: TargetEnergy,
    pub init: InitDistribution,
    pub gamma: f64,
    pub epsilon: f64,
}

impl ExperimentContext {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        let config = config.scaled();
        if config.modes.is_empty() {
            return Err(Error::InvalidConfig("no modes selected".into()));
        }
        let d = config.d;
        let energy = config.build_energy(d)?;
        let target = config.build_target(d)?;

        let paths: Vec<Vec<f64>> = (0..config.target_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(config.seed, StreamKind::TargetPath, i as u64);
                target.sample_path(&mut rng)
            })
            .collect();
        let target_energy = estimate_target(&paths, energy.as_ref())?;

        let init = resolve_init(&config, energy.as_ref(), &target_energy, &paths)?;

        let gamma = if config.gamma > 0.0 {
            config.gamma
        } else {
            let mut rng = stream_rng(config.seed, StreamKind::Probe, 0);
            let probe =
                ParticleBatch::sample_init(&init, config.particles.max(32), &mut rng)?;
            auto_gamma(&probe, energy.as_ref(), config.gamma_c)
        };

        let epsilon = if config.epsilon_auto {
            target_energy.suggested_epsilon()
        } else {
            config.epsilon
        };

        Ok(Self {
            config,
            energy,
            target,
            target_energy,
            init,
            gamma,
            epsilon,
        })
    }

    fn descent_config(&self, mode: Mode, batch_size: usize, replica_index: u64) -> DescentConfig {
        DescentConfig {
            mode,
            gamma: GammaRule::Fixed(self.gamma),
            max_steps: self.config.steps,
            epsilon: if self.epsilon > 0.0 {
                self.epsilon
            } else {
                f64::INFINITY
            },
            batch_size,
            projected: self.config.projection,
            init: self.init.clone(),
            seed: self.config.seed,
            replica_index,
            logdet_every: match self.config.logdet_every {
                0 => None,
                k => Some(k),
            },
            compute_logdet: true,
            collect_bound_stats: self.config.bound_diagnostics,
        }
    }

    /// Run one mode with the experiment's replica structure: a single
    /// vectorized run of M independent samples in single-particle mode, M
    /// coupled batches of N particles in mean-field mode.
    pub fn run_mode(&self, mode: Mode, particles: usize) -> Result<ModeRun> {
        match mode {
            Mode::Mgdm => {
                let cfg = self.descent_config(mode, self.config.replicas, 0);
                aggregate_mode(mode, vec![run_or_partial(&cfg, self)?], self, 1)
            }
            Mode::MfMgdm => {
                let runs: Vec<Result<aggregate::RunOutcome>> = (0..self.config.replicas)
                    .into_par_iter()
                    .map(|m| {
                        let cfg = self.descent_config(mode, particles, m as u64);
                        run_or_partial(&cfg, self)
                    })
                    .collect();
                let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
                aggregate_mode(mode, runs, self, particles)
            }
        }
    }
}

fn run_or_partial(cfg: &DescentConfig, ctx: &ExperimentContext) -> Result<aggregate::RunOutcome> {
    match crate::descent::run_descent(
        cfg,
        &ctx.target_energy.alpha,
        ctx.energy.as_ref(),
        Some(ctx.target.as_ref()),
    ) {
        Ok(run) => Ok(aggregate::RunOutcome {
            run,
            diverged: false,
        }),
        Err(Error::Divergence {
            partial: Some(p), ..
        }) => Ok(aggregate::RunOutcome {
            run: *p,
            diverged: true,
        }),
        Err(e) => Err(e),
    }
}

fn resolve_init(
    config: &ExperimentConfig,
    energy: &dyn Energy,
    target_energy: &TargetEnergy,
    paths: &[Vec<f64>],
) -> Result<InitDistribution> {
    let d = config.d;
    let spec_str = config.init.as_str();
    if let Some((kind, rest)) = spec_str.split_once(':') {
        let v: f64 = rest
            .trim()
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("bad init parameter {rest:?}: {e}")))?;
        return match kind {
            "gaussian" => InitDistribution::gaussian_white(v, d),
            "exponential" => InitDistribution::exponential(v, d),
            other => Err(Error::InvalidConfig(format!("unknown init {other:?}"))),
        };
    }
    let pooled_moments = || {
        let mut count = 0usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for p in paths {
            for &v in p {
                count += 1;
                sum += v;
                sumsq += v * v;
            }
        }
        let mean = sum / count as f64;
        let var = (sumsq / count as f64 - mean * mean).max(1e-12);
        (mean, var.sqrt())
    };
    match spec_str {
        "auto" => {
            if config.projection {
                let (mean, std) = pooled_moments();
                InitDistribution::fit_positive(mean, std, d)
            } else {
                let sigma2 = match energy.variance_component() {
                    Some(i) => target_energy.alpha[i],
                    None => {
                        let (_, std) = pooled_moments();
                        std * std
                    }
                };
                if !(sigma2 > 0.0) {
                    return Err(Error::InvalidConfig(
                        "could not infer a positive initial variance".into(),
                    ));
                }
                InitDistribution::gaussian_white(sigma2, d)
            }
        }
        "positive-fit" => {
            let (mean, std) = pooled_moments();
            InitDistribution::fit_positive(mean, std, d)
        }
        other => Err(Error::InvalidConfig(format!("unknown init {other:?}"))),
    }
}

/// Per-mode headline numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub min_kl: Option<f64>,
    pub argmin_step: Option<usize>,
    pub final_kl: Option<f64>,
    pub final_distance: f64,
    pub first_step_inside_suggested_epsilon: Option<usize>,
    pub entropy_final_total: Option<f64>,
    pub entropy_final_per_sample: Option<f64>,
    pub entropy_final_rate: Option<f64>,
    pub steps_taken: Vec<usize>,
    pub sign_flips: usize,
    pub diverged: bool,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub d: usize,
    pub particles: usize,
    pub replicas: usize,
    pub steps: usize,
    pub target_paths: usize,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub suggested_epsilon: f64,
    pub init: InitDistribution,
    pub alpha: Vec<f64>,
    pub alpha_std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub resolved: ResolvedParams,
    pub modes: Vec<ModeSummary>,
}

fn resolved_params(ctx: &ExperimentContext) -> ResolvedParams {
    ResolvedParams {
        d: ctx.config.d,
        particles: ctx.config.particles,
        replicas: ctx.config.replicas,
        steps: ctx.config.steps,
        target_paths: ctx.config.target_paths,
        gamma: ctx.gamma,
        epsilon: (ctx.epsilon > 0.0).then_some(ctx.epsilon),
        suggested_epsilon: ctx.target_energy.suggested_epsilon(),
        init: ctx.init.clone(),
        alpha: ctx.target_energy.alpha.iter().copied().collect(),
        alpha_std: ctx.target_energy.component_std.iter().copied().collect(),
    }
}

/// Closed-form-target benchmark: estimate α from simulated target paths,
/// run every configured mode, track the reverse KL per step and report the
/// minimum over steps with its argmin.
pub fn run_synthetic_benchmark(
    config: ExperimentConfig,
) -> Result<(ExperimentSummary, Vec<(Mode, ModeRun)>)> {
    let ctx = ExperimentContext::prepare(config)?;
    let mut mode_runs = Vec::new();
    let mut summaries = Vec::new();
    for &mode in &ctx.config.modes.clone() {
        let run = ctx.run_mode(mode, ctx.config.particles)?;
        summaries.push(run.summary(&ctx));
        mode_runs.push((mode, run));
    }
    let summary = ExperimentSummary {
        resolved: resolved_params(&ctx),
        config: ctx.config.clone(),
        modes: summaries,
    };
    Ok((summary, mode_runs))
}

/// Per-step KL traces for every mode, plus an optional mean-field batch
/// size sweep (`sweep_n`) whose runs are labeled by N.
pub struct TraceOutput {
    pub summary: ExperimentSummary,
    pub mode_runs: Vec<(Mode, ModeRun)>,
    pub sweep_runs: Vec<(usize, ModeRun)>,
}

pub fn run_kl_trace(config: ExperimentConfig) -> Result<TraceOutput> {
    let ctx = ExperimentContext::prepare(config)?;
    let mut mode_runs = Vec::new();
    let mut summaries = Vec::new();
    for &mode in &ctx.config.modes.clone() {
        let run = ctx.run_mode(mode, ctx.config.particles)?;
        summaries.push(run.summary(&ctx));
        mode_runs.push((mode, run));
    }
    let mut sweep_runs = Vec::new();
    for &n in &ctx.config.sweep_n.clone() {
        let run = ctx.run_mode(Mode::MfMgdm, n)?;
        summaries.push(run.summary(&ctx));
        sweep_runs.push((n, run));
    }
    let summary = ExperimentSummary {
        resolved: resolved_params(&ctx),
        config: ctx.config.clone(),
        modes: summaries,
    };
    Ok(TraceOutput {
        summary,
        mode_runs,
        sweep_runs,
    })
}
