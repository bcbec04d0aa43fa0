//! Microcanonical gradient descent sampling for stationary time series.
//!
//! Samples are drawn by transporting a high-entropy initial distribution
//! through repeated gradient steps on `½‖Φ(x) − α‖²`, where `Φ` is a
//! differentiable statistic map and `α` a target energy estimated from
//! data. Because every step is a smooth map, the change-of-variables
//! log-determinants yield the sampler's exact log-likelihood and entropy;
//! the mean-field variant couples a batch of particles through their mean
//! energy, which preserves entropy that the independent descent destroys.
//!
//! ```
//! use mgdm::descent::{run_descent, DescentConfig, Mode};
//! use mgdm::energy::{estimate_target, AcfEnergy};
//! use mgdm::models::{ArProcess, InitDistribution, TargetModel};
//! use mgdm::rng::{stream_rng, StreamKind};
//!
//! let d = 32;
//! let target = ArProcess::with_unit_variance(vec![0.1], d)?;
//! let energy = AcfEnergy::ar1_sufficient(d)?;
//!
//! // target energy from simulated paths
//! let paths: Vec<Vec<f64>> = (0..64)
//!     .map(|i| target.sample_path(&mut stream_rng(1, StreamKind::TargetPath, i)))
//!     .collect();
//! let alpha = estimate_target(&paths, &energy)?;
//!
//! // coupled descent of 8 particles toward the target energy
//! let init = InitDistribution::gaussian_white(1.0, d)?;
//! let mut config = DescentConfig::new(Mode::MfMgdm, init, 8, 40);
//! config.seed = 1;
//! let run = run_descent(&config, &alpha.alpha, &energy, Some(&target))?;
//! assert!(run.records.last().unwrap().energy_distance
//!     < run.records[0].energy_distance);
//! # Ok::<(), mgdm::error::Error>(())
//! ```
//!
//! The `examples/` directory has one runnable program per capability:
//! benchmarks against closed-form targets, per-step KL traces, batch-size
//! sweeps, positive-support sampling, the financial pipeline, entropy
//! bound diagnostics and custom energies. A thin `mgdm` binary exposes
//! the same workflows as subcommands.

pub mod descent;
pub mod energy;
pub mod error;
pub mod harness;
pub mod likelihood;
pub mod linalg;
pub mod models;
pub mod rng;
