//! Target processes with exact samplers and closed-form log-densities,
//! plus the initial distributions used to start the descent.

mod ar;
mod bessel;
mod cir;
mod init;

pub use ar::ArProcess;
pub use bessel::log_bessel_i;
pub use cir::CirProcess;
pub use init::InitDistribution;

use rand::RngCore;

use crate::error::Result;

/// A stationary process with an exact sampler and an evaluable log-density,
/// used both to estimate target energies and as the reference density in
/// reverse-KL evaluation.
pub trait TargetModel: Send + Sync {
    /// Path length d.
    fn dim(&self) -> usize;

    /// Draw one path; deterministic given the generator state.
    fn sample_path(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Exact log-density of a full path.
    fn log_density(&self, x: &[f64]) -> Result<f64>;

    fn describe(&self) -> String;
}
