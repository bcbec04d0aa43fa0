//! Per-step reverse-KL decomposition: negative entropy and expected
//! log-likelihood traced through the descent, written as plot-ready CSV.
//!
//!     cargo run --release --example kl_trace

use mgdm::harness::{export, run_kl_trace, ExperimentConfig};

fn main() -> mgdm::error::Result<()> {
    let config = ExperimentConfig {
        target: "ar:0.1".into(),
        d: 128,
        particles: 32,
        replicas: 32,
        steps: 200,
        seed: 7,
        ..ExperimentConfig::default()
    };
    let output = run_kl_trace(config)?;

    std::fs::create_dir_all("out")?;
    for (mode, run) in &output.mode_runs {
        let path = format!("out/trace_{}.csv", mode.to_string().replace('-', "_"));
        export::write_metrics_csv(std::path::Path::new(&path), &run.rows)?;
        println!("wrote {path}");
        // print a coarse view of the curve
        println!("{:<6} {:>12} {:>14} {:>10}", "step", "-entropy", "E[log p]", "KL");
        for row in run.rows.iter().step_by(40) {
            println!(
                "{:<6} {:>12.3} {:>14.3} {:>10.4}",
                row.step,
                row.neg_entropy.unwrap_or(f64::NAN),
                row.expected_log_likelihood.unwrap_or(f64::NAN),
                row.reverse_kl.unwrap_or(f64::NAN),
            );
        }
        println!();
    }
    Ok(())
}
