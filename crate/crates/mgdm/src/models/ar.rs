use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::TargetModel;
use crate::error::{Error, Result};
use crate::linalg::lu_factor;

const LN_2PI: f64 = 1.8378770664093453;

/// Autoregression of order p with Gaussian innovations,
/// `x_i = Σ_j φ_j x_{i-j} + σ ε_i`. An empty coefficient list is plain
/// white noise.
#[derive(Clone, Debug)]
pub struct ArProcess {
    coeffs: Vec<f64>,
    sigma: f64,
    d: usize,
}

impl ArProcess {
    /// Rejects non-stationary coefficient sets (a root of
    /// `1 - Σ φ_j z^j` on or inside the unit circle).
    pub fn new(coeffs: Vec<f64>, sigma: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("path length must be positive".into()));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Model(format!("invalid innovation std {sigma}")));
        }
        if !Self::is_stationary(&coeffs) {
            return Err(Error::Model(format!(
                "non-stationary autoregression coefficients {coeffs:?}"
            )));
        }
        Ok(Self { coeffs, sigma, d })
    }

    /// Innovation std chosen so the stationary marginal variance is one.
    pub fn with_unit_variance(coeffs: Vec<f64>, d: usize) -> Result<Self> {
        let probe = Self::new(coeffs.clone(), 1.0, d)?;
        let gamma0 = probe.stationary_variance();
        if !(gamma0 > 0.0) {
            return Err(Error::Model(
                "could not normalize marginal variance".into(),
            ));
        }
        Self::new(coeffs, (1.0 / gamma0).sqrt(), d)
    }

    pub fn white_noise(sigma: f64, d: usize) -> Result<Self> {
        Self::new(Vec::new(), sigma, d)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// All eigenvalues of the companion matrix (the reciprocal roots of the
    /// characteristic polynomial) must lie strictly inside the unit circle.
    pub fn is_stationary(coeffs: &[f64]) -> bool {
        let p = coeffs.len();
        if p == 0 {
            return true;
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return false;
        }
        let mut companion = DMatrix::zeros(p, p);
        for (j, &c) in coeffs.iter().enumerate() {
            companion[(0, j)] = c;
        }
        for i in 1..p {
            companion[(i, i - 1)] = 1.0;
        }
        // strict inequality with a margin so boundary roots computed as
        // 0.999999... are still rejected
        companion
            .complex_eigenvalues()
            .iter()
            .all(|z| z.norm_sqr() < 1.0 - 1e-9)
    }

    /// Stationary marginal variance γ₀ from the Yule–Walker equations.
    pub fn stationary_variance(&self) -> f64 {
        let p = self.coeffs.len();
        let s2 = self.sigma * self.sigma;
        if p == 0 {
            return s2;
        }
        // unknowns γ_0..γ_p:  γ_k - Σ_j φ_j γ_{|k-j|} = σ²·1[k=0]
        let n = p + 1;
        let mut a = DMatrix::zeros(n, n);
        for k in 0..n {
            a[(k, k)] += 1.0;
            for (j, &phi) in self.coeffs.iter().enumerate() {
                let idx = k.abs_diff(j + 1);
                a[(k, idx)] -= phi;
            }
        }
        let mut b = DMatrix::zeros(n, 1);
        b[(0, 0)] = s2;
        let sol = lu_factor(a).solve_mat(&b);
        sol[(0, 0)]
    }

    fn log_normal_density(residual: f64, variance: f64) -> f64 {
        -0.5 * (LN_2PI + variance.ln()) - 0.5 * residual * residual / variance
    }
}

impl TargetModel for ArProcess {
    fn dim(&self) -> usize {
        self.d
    }

    /// For p ≤ 1 the head is drawn from the exact stationary marginal; for
    /// p > 1 the chain is burned in for 10·d steps from zeros.
    fn sample_path(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let p = self.coeffs.len();
        let d = self.d;
        let mut path = Vec::with_capacity(d);
        match p {
            0 => {
                for _ in 0..d {
                    let eps: f64 = StandardNormal.sample(rng);
                    path.push(self.sigma * eps);
                }
            }
            1 => {
                let phi = self.coeffs[0];
                let marginal_std = if self.sigma == 0.0 {
                    0.0
                } else {
                    (self.sigma * self.sigma / (1.0 - phi * phi)).sqrt()
                };
                let eps0: f64 = StandardNormal.sample(rng);
                path.push(marginal_std * eps0);
                for i in 1..d {
                    let eps: f64 = StandardNormal.sample(rng);
                    path.push(phi * path[i - 1] + self.sigma * eps);
                }
            }
            _ => {
                let burn = 10 * d;
                let total = burn + d;
                let mut buf = vec![0.0; total];
                for i in 0..total {
                    let mut v = 0.0;
                    for (j, &phi) in self.coeffs.iter().enumerate() {
                        if i > j {
                            v += phi * buf[i - j - 1];
                        }
                    }
                    let eps: f64 = StandardNormal.sample(rng);
                    buf[i] = v + self.sigma * eps;
                }
                path.extend_from_slice(&buf[burn..]);
            }
        }
        path
    }

    /// Exact joint log-density for p ≤ 1 (stationary marginal times the
    /// Gaussian conditionals); for p > 1 the density of `x_{p+1..d}`
    /// conditional on the first p values, which differs from the joint by
    /// an O(p/d) per-dimension boundary term.
    fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::Dimension {
                context: "autoregression log-density",
                expected: self.d,
                got: x.len(),
            });
        }
        if self.sigma == 0.0 {
            return Err(Error::Model(
                "zero innovation variance has no density".into(),
            ));
        }
        let s2 = self.sigma * self.sigma;
        let p = self.coeffs.len();
        let mut total = 0.0;
        match p {
            0 => {
                for &v in x {
                    total += Self::log_normal_density(v, s2);
                }
            }
            1 => {
                let phi = self.coeffs[0];
                total += Self::log_normal_density(x[0], s2 / (1.0 - phi * phi));
                for i in 1..x.len() {
                    total += Self::log_normal_density(x[i] - phi * x[i - 1], s2);
                }
            }
            _ => {
                for i in p..x.len() {
                    let mut mean = 0.0;
                    for (j, &phi) in self.coeffs.iter().enumerate() {
                        mean += phi * x[i - j - 1];
                    }
                    total += Self::log_normal_density(x[i] - mean, s2);
                }
            }
        }
        Ok(total)
    }

    fn describe(&self) -> String {
        format!("ar(coeffs={:?}, sigma={}, d={})", self.coeffs, self.sigma, self.d)
    }
}
