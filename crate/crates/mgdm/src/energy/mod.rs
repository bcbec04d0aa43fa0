//! Energy functions: differentiable statistic maps `Φ: R^d → R^K` with
//! analytic first and second derivatives, evaluated per path or averaged
//! over a particle batch.

mod acf;
mod finite_diff;
mod squared_acf;

pub use acf::AcfEnergy;
pub use finite_diff::FiniteDiffEnergy;
pub use squared_acf::SquaredAcfEnergy;

use nalgebra::{DMatrix, DVector};

use crate::descent::ParticleBatch;
use crate::error::{Error, Result};

/// K statistic values of one path.
pub type EnergyVector = DVector<f64>;

/// A differentiable statistic map. Evaluators are pure and reentrant; they
/// panic on mismatched input dimensions (a caller bug), while parameter
/// validation happens in the constructors.
pub trait Energy: Send + Sync {
    /// Path length d.
    fn input_dim(&self) -> usize;

    /// Number of statistic components K.
    fn output_dim(&self) -> usize;

    /// `Φ(x)`.
    fn value(&self, x: &[f64]) -> EnergyVector;

    /// K×d matrix of first derivatives.
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;

    /// `Σ_k w_k ∇²Φ_k(x)`; d×d and symmetric.
    fn weighted_hessian(&self, x: &[f64], w: &[f64]) -> DMatrix<f64>;

    /// True when `weighted_hessian` does not depend on `x`, so one
    /// evaluation can be shared across particles with a common weight.
    fn constant_hessian(&self) -> bool {
        false
    }

    /// Component estimating the marginal second moment, used to scale the
    /// default Gaussian initial distribution.
    fn variance_component(&self) -> Option<usize> {
        None
    }

    fn describe(&self) -> String;
}

impl Energy for &dyn Energy {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn value(&self, x: &[f64]) -> EnergyVector {
        (**self).value(x)
    }
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        (**self).jacobian(x)
    }
    fn weighted_hessian(&self, x: &[f64], w: &[f64]) -> DMatrix<f64> {
        (**self).weighted_hessian(x, w)
    }
    fn constant_hessian(&self) -> bool {
        (**self).constant_hessian()
    }
    fn variance_component(&self) -> Option<usize> {
        (**self).variance_component()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Batch-mean energy `(1/N) Σ_n Φ(x^{(n)})`.
pub fn batch_mean_energy(batch: &ParticleBatch, energy: &dyn Energy) -> Result<EnergyVector> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty particle batch".into()));
    }
    if batch.dim() != energy.input_dim() {
        return Err(Error::Dimension {
            context: "batch mean energy",
            expected: energy.input_dim(),
            got: batch.dim(),
        });
    }
    let mut acc = EnergyVector::zeros(energy.output_dim());
    for x in batch.particles() {
        acc += energy.value(x);
    }
    Ok(acc / batch.len() as f64)
}

/// Target energy estimated from training paths: the component mean `α`
/// and the per-component sample standard deviation.
#[derive(Clone, Debug)]
pub struct TargetEnergy {
    pub alpha: EnergyVector,
    pub component_std: EnergyVector,
    pub paths: usize,
}

impl TargetEnergy {
    /// Euclidean norm of the per-component standard deviations; a
    /// microcanonical width matching the statistic's own concentration.
    pub fn suggested_epsilon(&self) -> f64 {
        self.component_std.norm()
    }
}

/// Mean energy over training paths, with per-component spread.
pub fn estimate_target<P: AsRef<[f64]>>(paths: &[P], energy: &dyn Energy) -> Result<TargetEnergy> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("no training paths".into()));
    }
    let k = energy.output_dim();
    let mut values = Vec::with_capacity(paths.len());
    for p in paths {
        let p = p.as_ref();
        if p.len() != energy.input_dim() {
            return Err(Error::Dimension {
                context: "target estimation",
                expected: energy.input_dim(),
                got: p.len(),
            });
        }
        values.push(energy.value(p));
    }
    let m = values.len();
    let mut alpha = EnergyVector::zeros(k);
    for v in &values {
        alpha += v;
    }
    alpha /= m as f64;
    let mut std = EnergyVector::zeros(k);
    if m > 1 {
        for v in &values {
            let diff = v - &alpha;
            std += diff.component_mul(&diff);
        }
        std = (std / (m - 1) as f64).map(f64::sqrt);
    }
    Ok(TargetEnergy {
        alpha,
        component_std: std,
        paths: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ArProcess, TargetModel};
    use crate::rng::{stream_rng, StreamKind};

    fn seeded_path(d: usize, seed: u64) -> Vec<f64> {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = stream_rng(seed, StreamKind::Test, 0);
        (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn batch_mean_of_single_particle_is_path_energy() {
        let energy = AcfEnergy::ar1_sufficient(16).unwrap();
        let x = seeded_path(16, 3);
        let batch = ParticleBatch::from_rows(vec![x.clone()]).unwrap();
        let mean = batch_mean_energy(&batch, &energy).unwrap();
        assert_eq!(mean, energy.value(&x));
    }

    #[test]
    fn batch_mean_of_identical_paths_is_path_energy() {
        let energy = AcfEnergy::ar1_sufficient(16).unwrap();
        let x = seeded_path(16, 4);
        let batch = ParticleBatch::from_rows(vec![x.clone(); 5]).unwrap();
        let mean = batch_mean_energy(&batch, &energy).unwrap();
        let single = energy.value(&x);
        assert!((mean - single).norm() < 1e-14);
    }

    #[test]
    fn batch_mean_is_arithmetic_mean_of_per_path_energies() {
        let energy = AcfEnergy::ar1_sufficient(32).unwrap();
        let rows: Vec<Vec<f64>> = (0..3).map(|i| seeded_path(32, 10 + i)).collect();
        let batch = ParticleBatch::from_rows(rows.clone()).unwrap();
        let mean = batch_mean_energy(&batch, &energy).unwrap();
        let mut oracle = EnergyVector::zeros(2);
        for r in &rows {
            oracle += energy.value(r);
        }
        oracle /= 3.0;
        assert!((mean - oracle).norm() < 1e-14);
    }

    #[test]
    fn batch_mean_is_permutation_invariant() {
        let energy = AcfEnergy::ar1_sufficient(24).unwrap();
        let rows: Vec<Vec<f64>> = (0..6).map(|i| seeded_path(24, 20 + i)).collect();
        let batch = ParticleBatch::from_rows(rows).unwrap();
        let permuted = batch.permuted(&[5, 3, 0, 1, 4, 2]).unwrap();
        let a = batch_mean_energy(&batch, &energy).unwrap();
        let b = batch_mean_energy(&permuted, &energy).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn estimate_target_single_path_has_zero_spread() {
        let energy = AcfEnergy::ar1_sufficient(16).unwrap();
        let x = seeded_path(16, 5);
        let t = estimate_target(&[x.clone()], &energy).unwrap();
        assert_eq!(t.alpha, energy.value(&x));
        assert_eq!(t.component_std, EnergyVector::zeros(2));
        let copies = vec![x.clone(); 7];
        let t7 = estimate_target(&copies, &energy).unwrap();
        assert!((t7.alpha - energy.value(&x)).norm() < 1e-14);
        assert!(t7.component_std.norm() < 1e-12);
    }

    #[test]
    fn estimate_target_recovers_ar1_stationary_moments() {
        // lag-1 autocovariance φσ²/(1-φ²) = 0.1, lag-0 σ²/(1-φ²) = 1.0
        let d = 256;
        let proc = ArProcess::new(vec![0.1], 0.99f64.sqrt(), d).unwrap();
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let m = 10_000;
        let paths: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut rng = stream_rng(99, StreamKind::TargetPath, i);
                proc.sample_path(&mut rng)
            })
            .collect();
        let t = estimate_target(&paths, &energy).unwrap();
        // finite-length truncation biases offset by O(1/d); tolerances are
        // 3 standard errors plus that bias
        assert!((t.alpha[0] - 0.1).abs() < 0.005, "lag-1 {}", t.alpha[0]);
        assert!((t.alpha[1] - 1.0).abs() < 0.01, "lag-0 {}", t.alpha[1]);
        assert!(t.suggested_epsilon() > 0.0);
    }
}
