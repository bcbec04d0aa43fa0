use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use mgdm::descent::Mode;
use mgdm::error::Result;
use mgdm::harness::{self, export, ExperimentConfig, ModeRun, Transform};

#[derive(Parser)]
#[command(
    name = "mgdm",
    about = "Microcanonical gradient descent sampling for stationary time series",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form-target benchmark reporting the minimum reverse KL per mode
    Benchmark(ExperimentArgs),
    /// Per-step KL trace, optionally sweeping mean-field batch sizes
    Trace(ExperimentArgs),
    /// Financial-statistics pipeline on a date,value CSV
    Finance(ExperimentArgs),
    /// Write a synthetic geometric-random-walk price CSV
    GenData(GenDataArgs),
    /// Quick internal consistency checks
    Selftest,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML config file; command-line flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target process, e.g. ar:0.1 or cir:0.5,1,1
    #[arg(long)]
    target: Option<String>,
    /// Energy, e.g. acf, acf:2,1,0, sqacf:20, sqacf:20:centered
    #[arg(long)]
    energy: Option<String>,
    /// Comma-separated modes: mgdm,mf-mgdm
    #[arg(long)]
    modes: Option<String>,
    /// Path length d
    #[arg(long)]
    d: Option<usize>,
    /// Mean-field batch size N
    #[arg(long)]
    particles: Option<usize>,
    /// Monte Carlo replica count M
    #[arg(long)]
    replicas: Option<usize>,
    /// Step cap T
    #[arg(long)]
    steps: Option<usize>,
    /// Fixed step size (0 = automatic)
    #[arg(long)]
    gamma: Option<f64>,
    /// Safety factor of the automatic step size
    #[arg(long)]
    gamma_c: Option<f64>,
    /// Energy-ball stopping radius (0 = disabled)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Use the spread-based suggested radius
    #[arg(long)]
    epsilon_auto: bool,
    /// Paths simulated to estimate the target energy
    #[arg(long)]
    target_paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Projected (positive-support) descent
    #[arg(long)]
    projection: bool,
    /// Initial distribution: auto, gaussian:<s2>, exponential:<rate>, positive-fit
    #[arg(long)]
    init: Option<String>,
    /// Mean-field batch sizes for the trace sweep, e.g. 8,32,128
    #[arg(long)]
    sweep_n: Option<String>,
    /// Publication-scale sizes (d=1024, N=M=128, 10000 target paths)
    #[arg(long)]
    full_scale: bool,
    /// Determinant evaluation cadence (0 = auto)
    #[arg(long)]
    logdet_every: Option<usize>,
    /// Record entropy-rate bound diagnostics
    #[arg(long)]
    bound_diagnostics: bool,
    /// Price CSV (finance)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Price transform: log-returns or differences
    #[arg(long)]
    transform: Option<String>,
    /// Autocorrelation report depth
    #[arg(long)]
    report_lags: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.target {
            cfg.target = v.clone();
        }
        if let Some(v) = &self.energy {
            cfg.energy = v.clone();
        }
        if let Some(v) = &self.modes {
            cfg.modes = v
                .split(',')
                .map(|m| match m.trim() {
                    "mgdm" => Ok(Mode::Mgdm),
                    "mf-mgdm" | "mf" => Ok(Mode::MfMgdm),
                    other => Err(mgdm::error::Error::InvalidConfig(format!(
                        "unknown mode {other:?}"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
        }
        if let Some(v) = self.d {
            cfg.d = v;
        }
        if let Some(v) = self.particles {
            cfg.particles = v;
        }
        if let Some(v) = self.replicas {
            cfg.replicas = v;
        }
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.gamma_c {
            cfg.gamma_c = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if self.epsilon_auto {
            cfg.epsilon_auto = true;
        }
        if let Some(v) = self.target_paths {
            cfg.target_paths = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.projection {
            cfg.projection = true;
        }
        if let Some(v) = &self.init {
            cfg.init = v.clone();
        }
        if let Some(v) = &self.sweep_n {
            cfg.sweep_n = v
                .split(',')
                .map(|s| {
                    s.trim().parse::<usize>().map_err(|e| {
                        mgdm::error::Error::InvalidConfig(format!("bad sweep size {s:?}: {e}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        }
        if self.full_scale {
            cfg.full_scale = true;
        }
        if let Some(v) = self.logdet_every {
            cfg.logdet_every = v;
        }
        if self.bound_diagnostics {
            cfg.bound_diagnostics = true;
        }
        if let Some(v) = &self.data {
            cfg.data = Some(v.display().to_string());
        }
        if let Some(v) = &self.transform {
            cfg.transform = v.clone();
        }
        if let Some(v) = self.report_lags {
            cfg.report_lags = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenDataArgs {
    /// Number of price rows
    #[arg(long, default_value_t = 4096)]
    rows: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Walk kind: sv (stochastic volatility) or gbm (plain)
    #[arg(long, default_value = "sv")]
    kind: String,
    /// Output CSV path
    #[arg(long, default_value = "synthetic_prices.csv")]
    out: PathBuf,
}

fn write_mode_outputs(out: &Path, mode_runs: &[(Mode, ModeRun)]) -> Result<()> {
    for (mode, run) in mode_runs {
        let file = out.join(format!("metrics_{}.csv", mode.to_string().replace('-', "_")));
        export::write_metrics_csv(&file, &run.rows)?;
    }
    Ok(())
}

fn cmd_benchmark(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.resolve()?;
    std::fs::create_dir_all(&args.out)?;
    let (summary, mode_runs) = harness::run_synthetic_benchmark(cfg)?;
    write_mode_outputs(&args.out, &mode_runs)?;
    export::write_json(&args.out.join("summary.json"), &summary)?;
    println!(
        "target {}  energy {}",
        summary.config.target, summary.config.energy
    );
    println!(
        "gamma {:.6e}  suggested epsilon {:.6e}",
        summary.resolved.gamma, summary.resolved.suggested_epsilon
    );
    println!(
        "{:<10} {:>12} {:>8} {:>12} {:>10}",
        "mode", "min KL", "argmin", "final KL", "diverged"
    );
    for m in &summary.modes {
        println!(
            "{:<10} {:>12} {:>8} {:>12} {:>10}",
            m.mode.to_string(),
            m.min_kl
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into()),
            m.argmin_step
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into()),
            m.final_kl
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into()),
            m.diverged,
        );
    }
    println!("results in {}", args.out.display());
    Ok(())
}

fn cmd_trace(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.resolve()?;
    std::fs::create_dir_all(&args.out)?;
    let output = harness::run_kl_trace(cfg)?;
    write_mode_outputs(&args.out, &output.mode_runs)?;
    for (n, run) in &output.sweep_runs {
        let file = args.out.join(format!("metrics_mf_mgdm_n{n}.csv"));
        export::write_metrics_csv(&file, &run.rows)?;
    }
    export::write_json(&args.out.join("summary.json"), &output.summary)?;
    for m in &output.summary.modes {
        println!(
            "{:<10} min KL {}  at step {}  final {}",
            m.mode.to_string(),
            m.min_kl
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into()),
            m.argmin_step
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into()),
            m.final_kl
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    println!("results in {}", args.out.display());
    Ok(())
}

fn cmd_finance(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let data = cfg
        .data
        .clone()
        .ok_or_else(|| mgdm::error::Error::InvalidConfig("finance requires --data <csv>".into()))?;
    let transform = Transform::from_str(&cfg.transform)?;
    let dataset = harness::ingest_prices(Path::new(&data), transform)?;
    std::fs::create_dir_all(&args.out)?;
    let report = harness::run_financial_pipeline(cfg, dataset)?;
    harness::write_finance_outputs(&args.out, &report)?;
    for m in &report.modes {
        println!(
            "{:<10} final distance {:.6e} (epsilon {:.6e}) converged={}",
            m.mode.to_string(),
            m.final_distance,
            m.epsilon,
            m.converged
        );
    }
    println!("results in {}", args.out.display());
    Ok(())
}

fn cmd_gen_data(args: &GenDataArgs) -> Result<()> {
    let kind = harness::SyntheticKind::from_str(&args.kind)?;
    let csv = harness::generate_synthetic_prices_kind(args.rows, args.seed, kind);
    std::fs::write(&args.out, csv)?;
    println!("wrote {} rows to {}", args.rows, args.out.display());
    Ok(())
}

fn cmd_selftest() -> Result<()> {
    use mgdm::descent::ParticleBatch;
    use mgdm::energy::AcfEnergy;
    use mgdm::likelihood::{step_logdet_mf_dense, step_logdet_mf_fast};
    use mgdm::rng::{stream_rng, StreamKind};
    use rand_distr::{Distribution, StandardNormal};

    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // determinant fast path against the dense oracle
    let mut worst: f64 = 0.0;
    for &(n, d) in &[(1usize, 8usize), (2, 8), (4, 16)] {
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = nalgebra::DVector::from_vec(vec![0.1, 1.0]);
        let mut rng = stream_rng(1, StreamKind::Test, (n * d) as u64);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let batch = ParticleBatch::from_rows(rows).unwrap();
        let fast = step_logdet_mf_fast(&batch, &alpha, &energy, 0.05).unwrap();
        let dense = step_logdet_mf_dense(&batch, &alpha, &energy, 0.05).unwrap();
        worst = worst.max((fast.log_abs - dense.log_abs).abs());
    }
    check("determinant fast path matches dense oracle", worst < 1e-8);

    // derivative check
    {
        use mgdm::energy::Energy as _;
        let d = 32;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let fd = mgdm::energy::FiniteDiffEnergy::new(&energy);
        let mut rng = stream_rng(2, StreamKind::Test, 0);
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let err = (energy.jacobian(&x) - fd.jacobian(&x)).norm();
        check("analytic Jacobian matches finite differences", err < 1e-6);
    }

    // deterministic experiments
    let cfg = ExperimentConfig {
        d: 32,
        particles: 4,
        replicas: 4,
        steps: 10,
        target_paths: 32,
        ..ExperimentConfig::default()
    };
    let a = harness::run_synthetic_benchmark(cfg.clone())?;
    let b = harness::run_synthetic_benchmark(cfg)?;
    check("experiments are reproducible", a.0 == b.0);

    if failures == 0 {
        println!("all checks passed");
        Ok(())
    } else {
        Err(mgdm::error::Error::InvalidInput(format!(
            "{failures} selftest check(s) failed"
        )))
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Trace(args) => cmd_trace(args),
        Command::Finance(args) => cmd_finance(args),
        Command::GenData(args) => cmd_gen_data(args),
        Command::Selftest => cmd_selftest(),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
