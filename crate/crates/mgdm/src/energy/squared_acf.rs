use nalgebra::DMatrix;

use super::{Energy, EnergyVector};
use crate::error::{Error, Result};

/// Volatility-clustering statistics of a return series: the variance of
/// `x`, its lag-1 autocovariance, and autocovariances of the squared
/// process `x²` at lags `1..=L` (default `L = 20`).
///
/// Component order is fixed:
///
/// | index    | statistic                         |
/// |----------|-----------------------------------|
/// | 0        | variance of `x`                   |
/// | 1        | autocovariance of `x` at lag 1    |
/// | 2..2+L-1 | autocovariance of `x²` at lag 1..L|
///
/// Second moments are uncentered by default; `center_signal` /
/// `center_squared` subtract the sample mean of the respective series
/// inside each statistic. All sums run over valid indices only and are
/// normalized by the path length `d` regardless of lag.
#[derive(Clone, Debug)]
pub struct SquaredAcfEnergy {
    d: usize,
    sq_lags: usize,
    center_signal: bool,
    center_squared: bool,
}

impl SquaredAcfEnergy {
    pub fn new(d: usize, sq_lags: usize, center_signal: bool, center_squared: bool) -> Result<Self> {
        if sq_lags < 1 {
            return Err(Error::InvalidConfig(
                "at least one squared-process lag required".into(),
            ));
        }
        if d <= sq_lags + 1 {
            return Err(Error::InvalidConfig(format!(
                "path length {d} too short for squared-process lags up to {sq_lags}"
            )));
        }
        Ok(Self {
            d,
            sq_lags,
            center_signal,
            center_squared,
        })
    }

    /// Uncentered moments throughout (the default convention).
    pub fn uncentered(d: usize, sq_lags: usize) -> Result<Self> {
        Self::new(d, sq_lags, false, false)
    }

    pub fn squared_lags(&self) -> usize {
        self.sq_lags
    }

    fn component_lag(&self, k: usize) -> (bool, usize, bool) {
        // (is_squared, lag, centered)
        match k {
            0 => (false, 0, self.center_signal),
            1 => (false, 1, self.center_signal),
            _ => (true, k - 1, self.center_squared),
        }
    }
}

/// `(1/d) Σ_{i≥lag} (z_i - c·m)(z_{i-lag} - c·m)` with `m` the series mean.
fn lagged_stat(z: &[f64], lag: usize, center: bool) -> f64 {
    let d = z.len();
    let m = if center {
        z.iter().sum::<f64>() / d as f64
    } else {
        0.0
    };
    let mut s = 0.0;
    for i in lag..d {
        s += (z[i] - m) * (z[i - lag] - m);
    }
    s / d as f64
}

/// Gradient of [`lagged_stat`] with respect to the series `z`.
fn lagged_stat_grad(z: &[f64], lag: usize, center: bool, out: &mut [f64]) {
    let d = z.len();
    let inv_d = 1.0 / d as f64;
    let m = if center {
        z.iter().sum::<f64>() / d as f64
    } else {
        0.0
    };
    let mut corr = 0.0;
    if center {
        for i in lag..d {
            corr += (z[i] - m) + (z[i - lag] - m);
        }
        corr *= inv_d;
    }
    for j in 0..d {
        let mut base = 0.0;
        if j >= lag {
            base += z[j - lag] - m;
        }
        if j + lag < d {
            base += z[j + lag] - m;
        }
        out[j] = (base - corr) * inv_d;
    }
}

/// Row sums `r = M·1` and total `σ = 1ᵀM1` of the symmetric lag band
/// matrix with ½ on the ±lag diagonals (identity for lag 0).
fn band_row_sums(d: usize, lag: usize) -> (Vec<f64>, f64) {
    let mut r = vec![0.0; d];
    if lag == 0 {
        r.iter_mut().for_each(|v| *v = 1.0);
        return (r, d as f64);
    }
    for i in lag..d {
        r[i] += 0.5;
        r[i - lag] += 0.5;
    }
    (r, (d - lag) as f64)
}

/// `Q z` for `Q = (1/d)·C M C`, all in O(d).
fn q_apply(z: &[f64], lag: usize, center: bool) -> Vec<f64> {
    let d = z.len();
    let m = if center {
        z.iter().sum::<f64>() / d as f64
    } else {
        0.0
    };
    let u: Vec<f64> = z.iter().map(|&v| v - m).collect();
    let mut t = vec![0.0; d];
    if lag == 0 {
        t.copy_from_slice(&u);
    } else {
        for i in lag..d {
            t[i] += 0.5 * u[i - lag];
            t[i - lag] += 0.5 * u[i];
        }
    }
    let tm = if center {
        t.iter().sum::<f64>() / d as f64
    } else {
        0.0
    };
    t.iter_mut().for_each(|v| *v = (*v - tm) / d as f64);
    t
}

impl Energy for SquaredAcfEnergy {
    fn input_dim(&self) -> usize {
        self.d
    }

    fn output_dim(&self) -> usize {
        self.sq_lags + 2
    }

    fn value(&self, x: &[f64]) -> EnergyVector {
        assert_eq!(x.len(), self.d, "path length mismatch");
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let mut out = EnergyVector::zeros(self.output_dim());
        out[0] = lagged_stat(x, 0, self.center_signal);
        out[1] = lagged_stat(x, 1, self.center_signal);
        for lag in 1..=self.sq_lags {
            out[1 + lag] = lagged_stat(&y, lag, self.center_squared);
        }
        out
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.d, "path length mismatch");
        let d = self.d;
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let mut jac = DMatrix::zeros(self.output_dim(), d);
        let mut g = vec![0.0; d];
        for k in 0..self.output_dim() {
            let (squared, lag, centered) = self.component_lag(k);
            if squared {
                lagged_stat_grad(&y, lag, centered, &mut g);
                for j in 0..d {
                    jac[(k, j)] = g[j] * 2.0 * x[j];
                }
            } else {
                lagged_stat_grad(x, lag, centered, &mut g);
                for j in 0..d {
                    jac[(k, j)] = g[j];
                }
            }
        }
        jac
    }

    fn weighted_hessian(&self, x: &[f64], w: &[f64]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.d, "path length mismatch");
        assert_eq!(w.len(), self.output_dim(), "weight length mismatch");
        let d = self.d;
        let inv_d = 1.0 / d as f64;
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let mut h = DMatrix::zeros(d, d);

        for k in 0..self.output_dim() {
            let wk = w[k];
            if wk == 0.0 {
                continue;
            }
            let (squared, lag, centered) = self.component_lag(k);
            if !squared {
                // Hessian of a quadratic form: 2Q, constant in x.
                let scale = 2.0 * wk * inv_d;
                if lag == 0 {
                    for i in 0..d {
                        h[(i, i)] += scale;
                    }
                } else {
                    for i in lag..d {
                        h[(i, i - lag)] += 0.5 * scale;
                        h[(i - lag, i)] += 0.5 * scale;
                    }
                }
                if centered {
                    let (r, sigma) = band_row_sums(d, lag);
                    for i in 0..d {
                        for j in 0..d {
                            h[(i, j)] += scale * (sigma * inv_d - (r[i] + r[j])) * inv_d;
                        }
                    }
                }
            } else {
                // 4·diag(Qy) + 8·D_x Q D_x
                let v = q_apply(&y, lag, centered);
                for i in 0..d {
                    h[(i, i)] += 4.0 * wk * v[i];
                }
                let scale = 8.0 * wk * inv_d;
                if lag == 0 {
                    for i in 0..d {
                        h[(i, i)] += scale * x[i] * x[i];
                    }
                } else {
                    for i in lag..d {
                        let prod = 0.5 * scale * x[i] * x[i - lag];
                        h[(i, i - lag)] += prod;
                        h[(i - lag, i)] += prod;
                    }
                }
                if centered {
                    let (r, sigma) = band_row_sums(d, lag);
                    for i in 0..d {
                        for j in 0..d {
                            h[(i, j)] += scale * (x[i] * x[j]) * (sigma * inv_d - (r[i] + r[j])) * inv_d;
                        }
                    }
                }
            }
        }
        h
    }

    fn variance_component(&self) -> Option<usize> {
        Some(0)
    }

    fn describe(&self) -> String {
        format!(
            "squared-acf(L={}, d={}, center_signal={}, center_squared={})",
            self.sq_lags, self.d, self.center_signal, self.center_squared
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::FiniteDiffEnergy;
    use crate::rng::{stream_rng, StreamKind};
    use rand_distr::{Distribution, StandardNormal};

    fn seeded_path(d: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, StreamKind::Test, 2);
        (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn zero_signal_gives_zeros() {
        let e = SquaredAcfEnergy::uncentered(32, 5).unwrap();
        let z = vec![0.0; 32];
        assert!(e.value(&z).iter().all(|&v| v == 0.0));
        assert!(e.jacobian(&z).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_signal_uncentered_values() {
        let d = 16;
        let e = SquaredAcfEnergy::uncentered(d, 3).unwrap();
        let v = e.value(&vec![1.0; d]);
        assert_eq!(v[0], 1.0); // variance component
        assert_eq!(v[1], (d as f64 - 1.0) / d as f64); // lag-1 of x
        for lag in 1..=3usize {
            assert_eq!(v[1 + lag], (d - lag) as f64 / d as f64);
        }
    }

    #[test]
    fn too_short_path_is_rejected() {
        assert!(SquaredAcfEnergy::uncentered(21, 20).is_err());
        assert!(SquaredAcfEnergy::uncentered(22, 20).is_ok());
    }

    #[test]
    fn jacobian_matches_finite_differences_uncentered() {
        let d = 128;
        let x = seeded_path(d, 31);
        let e = SquaredAcfEnergy::uncentered(d, 20).unwrap();
        let fd = FiniteDiffEnergy::new(&e);
        let analytic = e.jacobian(&x);
        let numeric = fd.jacobian(&x);
        let err = (&analytic - &numeric).norm() / analytic.norm().max(1.0);
        assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn jacobian_matches_finite_differences_centered() {
        let d = 64;
        let x = seeded_path(d, 32);
        let e = SquaredAcfEnergy::new(d, 6, true, true).unwrap();
        let fd = FiniteDiffEnergy::new(&e);
        let analytic = e.jacobian(&x);
        let numeric = fd.jacobian(&x);
        let err = (&analytic - &numeric).norm() / analytic.norm().max(1.0);
        assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn weighted_hessian_matches_finite_differences() {
        for (seed, centered) in [(41u64, false), (42, true)] {
            let d = 24;
            let x = seeded_path(d, seed);
            let e = SquaredAcfEnergy::new(d, 4, centered, centered).unwrap();
            let fd = FiniteDiffEnergy::new(&e);
            let mut rng = stream_rng(seed, StreamKind::Test, 3);
            let w: Vec<f64> = (0..e.output_dim())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let analytic = e.weighted_hessian(&x, &w);
            let numeric = fd.weighted_hessian(&x, &w);
            let err = (&analytic - &numeric).norm() / analytic.norm().max(1.0);
            assert!(err <= 1e-4, "relative error {err} (centered={centered})");
        }
    }

    #[test]
    fn weighted_hessian_is_exactly_symmetric() {
        let d = 20;
        let x = seeded_path(d, 50);
        let e = SquaredAcfEnergy::new(d, 5, true, false).unwrap();
        let w: Vec<f64> = (0..7).map(|k| 0.3 * k as f64 - 1.0).collect();
        let h = e.weighted_hessian(&x, &w);
        for i in 0..d {
            for j in 0..d {
                assert_eq!(h[(i, j)], h[(j, i)]);
            }
        }
    }
}
