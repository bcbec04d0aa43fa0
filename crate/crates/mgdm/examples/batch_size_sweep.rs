//! Mean-field batch size sweep: the final reverse KL improves as N grows,
//! because the per-step entropy cost of matching the target energy is
//! shared across the batch.
//!
//!     cargo run --release --example batch_size_sweep

use mgdm::descent::Mode;
use mgdm::harness::{run_kl_trace, ExperimentConfig};

fn main() -> mgdm::error::Result<()> {
    let config = ExperimentConfig {
        target: "ar:0.1".into(),
        modes: vec![Mode::MfMgdm],
        d: 128,
        particles: 32,
        replicas: 16,
        steps: 150,
        seed: 7,
        sweep_n: vec![8, 32, 128],
        ..ExperimentConfig::default()
    };
    let output = run_kl_trace(config)?;

    println!("{:>6} {:>12} {:>12}", "N", "final KL", "KL se");
    for (n, run) in &output.sweep_runs {
        let last = run.final_row();
        println!(
            "{:>6} {:>12.4} {:>12.4}",
            n,
            last.reverse_kl.unwrap_or(f64::NAN),
            last.reverse_kl_se.unwrap_or(f64::NAN),
        );
    }
    Ok(())
}
