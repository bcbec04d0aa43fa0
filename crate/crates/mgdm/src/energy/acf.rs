use nalgebra::DMatrix;

use super::{Energy, EnergyVector};
use crate::error::{Error, Result};

/// Uncentered autocovariances at a configurable ordered set of lags,
/// normalized by the path length regardless of lag:
///
/// `Φ_ℓ(x) = (1/d) Σ_{i>ℓ} x_i x_{i-ℓ}`
///
/// With lags `[1, 0]` these are the sufficient statistics of a first-order
/// autoregression (lag-1 autocovariance, then second moment), which is the
/// default component ordering.
#[derive(Clone, Debug)]
pub struct AcfEnergy {
    lags: Vec<usize>,
    d: usize,
}

impl AcfEnergy {
    /// Components follow the declared lag order.
    pub fn new(lags: Vec<usize>, d: usize) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::InvalidConfig("at least one lag required".into()));
        }
        let mut seen = lags.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != lags.len() {
            return Err(Error::InvalidConfig(format!("duplicate lags in {lags:?}")));
        }
        if let Some(&bad) = lags.iter().find(|&&l| l >= d) {
            return Err(Error::InvalidConfig(format!(
                "lag {bad} out of range for path length {d}"
            )));
        }
        Ok(Self { lags, d })
    }

    /// Lag-1 autocovariance followed by the second moment: the AR(1)
    /// sufficient statistics.
    pub fn ar1_sufficient(d: usize) -> Result<Self> {
        Self::new(vec![1, 0], d)
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }
}

impl Energy for AcfEnergy {
    fn input_dim(&self) -> usize {
        self.d
    }

    fn output_dim(&self) -> usize {
        self.lags.len()
    }

    fn value(&self, x: &[f64]) -> EnergyVector {
        assert_eq!(x.len(), self.d, "path length mismatch");
        let inv_d = 1.0 / self.d as f64;
        EnergyVector::from_iterator(
            self.lags.len(),
            self.lags.iter().map(|&lag| {
                let sum: f64 = (lag..self.d).map(|i| x[i] * x[i - lag]).sum();
                sum * inv_d
            }),
        )
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.d, "path length mismatch");
        let d = self.d;
        let inv_d = 1.0 / d as f64;
        let mut jac = DMatrix::zeros(self.lags.len(), d);
        for (k, &lag) in self.lags.iter().enumerate() {
            for j in 0..d {
                let mut g = 0.0;
                if j >= lag {
                    g += x[j - lag];
                }
                if j + lag < d {
                    g += x[j + lag];
                }
                jac[(k, j)] = g * inv_d;
            }
        }
        jac
    }

    fn weighted_hessian(&self, _x: &[f64], w: &[f64]) -> DMatrix<f64> {
        assert_eq!(w.len(), self.lags.len(), "weight length mismatch");
        let d = self.d;
        let inv_d = 1.0 / d as f64;
        let mut h = DMatrix::zeros(d, d);
        for (k, &lag) in self.lags.iter().enumerate() {
            let wk = w[k];
            if wk == 0.0 {
                continue;
            }
            if lag == 0 {
                for i in 0..d {
                    h[(i, i)] += 2.0 * wk * inv_d;
                }
            } else {
                for i in lag..d {
                    h[(i, i - lag)] += wk * inv_d;
                    h[(i - lag, i)] += wk * inv_d;
                }
            }
        }
        h
    }

    fn constant_hessian(&self) -> bool {
        true
    }

    fn variance_component(&self) -> Option<usize> {
        self.lags.iter().position(|&l| l == 0)
    }

    fn describe(&self) -> String {
        format!("acf(lags={:?}, d={})", self.lags, self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::FiniteDiffEnergy;
    use crate::rng::{stream_rng, StreamKind};
    use rand_distr::{Distribution, StandardNormal};

    fn seeded_path(d: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, StreamKind::Test, 1);
        (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    /// Independent direct-summation oracle.
    fn acf_oracle(x: &[f64], lags: &[usize]) -> Vec<f64> {
        lags.iter()
            .map(|&lag| {
                let mut s = 0.0;
                for i in 0..x.len() {
                    if i >= lag {
                        s += x[i] * x[i - lag];
                    }
                }
                s / x.len() as f64
            })
            .collect()
    }

    #[test]
    fn constant_signal_values() {
        let e = AcfEnergy::ar1_sufficient(4).unwrap();
        let v = e.value(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(v[0], 0.75);
        assert_eq!(v[1], 1.0);
    }

    #[test]
    fn zero_signal_gives_zero_energy_and_jacobian() {
        let e = AcfEnergy::new(vec![2, 1, 0], 8).unwrap();
        let z = vec![0.0; 8];
        assert!(e.value(&z).iter().all(|&v| v == 0.0));
        assert!(e.jacobian(&z).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seeded_value_matches_direct_summation() {
        let x = seeded_path(64, 2);
        let e = AcfEnergy::ar1_sufficient(64).unwrap();
        let v = e.value(&x);
        let oracle = acf_oracle(&x, &[1, 0]);
        assert!((v[0] - oracle[0]).abs() < 1e-14);
        assert!((v[1] - oracle[1]).abs() < 1e-14);
    }

    #[test]
    fn lag_out_of_range_is_rejected() {
        assert!(AcfEnergy::new(vec![4], 4).is_err());
        assert!(AcfEnergy::new(vec![3], 4).is_ok());
    }

    #[test]
    fn jacobian_lag0_row_is_scaled_signal() {
        let e = AcfEnergy::new(vec![0], 4).unwrap();
        let jac = e.jacobian(&[1.0, 1.0, 1.0, 1.0]);
        for j in 0..4 {
            assert_eq!(jac[(0, j)], 0.5); // (2/d)x_j
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let x = seeded_path(32, 7);
        let e = AcfEnergy::ar1_sufficient(32).unwrap();
        let fd = FiniteDiffEnergy::new(&e);
        let analytic = e.jacobian(&x);
        let numeric = fd.jacobian(&x);
        let err = (&analytic - &numeric).norm() / analytic.norm().max(1.0);
        assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn weighted_hessian_zero_weights() {
        let e = AcfEnergy::ar1_sufficient(6).unwrap();
        let h = e.weighted_hessian(&seeded_path(6, 1), &[0.0, 0.0]);
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weighted_hessian_lag0_is_scaled_identity() {
        let e = AcfEnergy::new(vec![0], 8).unwrap();
        let h = e.weighted_hessian(&seeded_path(8, 2), &[1.0]);
        let expected = DMatrix::<f64>::identity(8, 8) * 0.25;
        assert_eq!(h, expected);
    }

    #[test]
    fn weighted_hessian_matches_finite_differences() {
        let x = seeded_path(4, 9);
        let e = AcfEnergy::ar1_sufficient(4).unwrap();
        let fd = FiniteDiffEnergy::new(&e);
        let w = [1.0, 1.0];
        let analytic = e.weighted_hessian(&x, &w);
        let numeric = fd.weighted_hessian(&x, &w);
        let err = (&analytic - &numeric).norm() / analytic.norm().max(1.0);
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn weighted_hessian_is_constant_in_x() {
        let e = AcfEnergy::new(vec![3, 1, 0], 12).unwrap();
        let w = [0.3, -1.2, 0.7];
        let h1 = e.weighted_hessian(&seeded_path(12, 3), &w);
        let h2 = e.weighted_hessian(&seeded_path(12, 4), &w);
        assert_eq!(h1, h2);
    }

    #[test]
    fn scaling_homogeneity() {
        let x = seeded_path(20, 5);
        let scaled: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let e = AcfEnergy::new(vec![2, 0], 20).unwrap();
        let v = e.value(&x);
        let vs = e.value(&scaled);
        for k in 0..2 {
            assert!((vs[k] - 9.0 * v[k]).abs() < 1e-12 * v[k].abs().max(1.0));
        }
    }

    #[test]
    #[should_panic(expected = "weight length mismatch")]
    fn wrong_weight_length_panics() {
        let e = AcfEnergy::ar1_sufficient(8).unwrap();
        e.weighted_hessian(&[0.0; 8], &[1.0]);
    }
}
