use rand::RngCore;
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::gamma::ln_gamma;

use super::bessel::log_bessel_i;
use super::TargetModel;
use crate::error::{Error, Result};

/// Square-root mean-reverting diffusion `dr = κ(θ - r)dt + σ√r dW`,
/// observed on a grid with spacing `Δt`. Transitions over one step follow a
/// scaled noncentral χ² law, so both exact sampling and the exact
/// autoregressive likelihood are available; the marginal is a gamma
/// distribution.
#[derive(Clone, Debug)]
pub struct CirProcess {
    kappa: f64,
    theta: f64,
    sigma: f64,
    dt: f64,
    d: usize,
}

impl CirProcess {
    pub fn new(kappa: f64, theta: f64, sigma: f64, dt: f64, d: usize) -> Result<Self> {
        if !(kappa > 0.0 && theta > 0.0 && sigma > 0.0 && dt > 0.0) || d == 0 {
            return Err(Error::Model(format!(
                "parameters must be positive: kappa={kappa}, theta={theta}, sigma={sigma}, dt={dt}, d={d}"
            )));
        }
        Ok(Self {
            kappa,
            theta,
            sigma,
            dt,
            d,
        })
    }

    /// Unit observation spacing.
    pub fn with_unit_step(kappa: f64, theta: f64, sigma: f64, d: usize) -> Result<Self> {
        Self::new(kappa, theta, sigma, 1.0, d)
    }

    fn decay(&self) -> f64 {
        (-self.kappa * self.dt).exp()
    }

    /// Scale factor of the noncentral χ² transition.
    fn chi2_scale(&self) -> f64 {
        2.0 * self.kappa / (self.sigma * self.sigma * (1.0 - self.decay()))
    }

    /// Degrees of freedom 4κθ/σ².
    pub fn dof(&self) -> f64 {
        4.0 * self.kappa * self.theta / (self.sigma * self.sigma)
    }

    pub fn transition_mean(&self, r_prev: f64) -> f64 {
        self.theta + (r_prev - self.theta) * self.decay()
    }

    pub fn transition_variance(&self, r_prev: f64) -> f64 {
        let e = self.decay();
        let s2 = self.sigma * self.sigma;
        r_prev * s2 * e * (1.0 - e) / self.kappa
            + self.theta * s2 * (1.0 - e) * (1.0 - e) / (2.0 * self.kappa)
    }

    /// Exact one-step transition log-density. `r_next = 0` is on the
    /// support boundary: the density there is zero for dof > 2, finite for
    /// dof = 2 and divergent below.
    pub fn transition_log_density(&self, r_next: f64, r_prev: f64) -> Result<f64> {
        if !(r_prev > 0.0) {
            return Err(Error::Domain(format!(
                "transition requires a positive previous value, got {r_prev}"
            )));
        }
        if r_next < 0.0 {
            return Err(Error::Domain(format!(
                "negative rate {r_next} outside the support"
            )));
        }
        let c = self.chi2_scale();
        let q = 0.5 * self.dof() - 1.0;
        let u = c * r_prev * self.decay();
        let v = c * r_next;
        if v == 0.0 {
            return Ok(if q > 0.0 {
                f64::NEG_INFINITY
            } else if q == 0.0 {
                c.ln() - u
            } else {
                f64::INFINITY
            });
        }
        Ok(c.ln() - u - v + 0.5 * q * (v / u).ln() + log_bessel_i(q, 2.0 * (u * v).sqrt()))
    }

    /// Exact transition draw via the Poisson mixture of gammas.
    pub fn sample_transition(&self, r_prev: f64, rng: &mut dyn RngCore) -> f64 {
        debug_assert!(r_prev > 0.0);
        let c = self.chi2_scale();
        let u = c * r_prev * self.decay();
        let j = if u > 0.0 {
            Poisson::new(u).expect("positive mean").sample(rng)
        } else {
            0.0
        };
        let shape = 0.5 * self.dof() + j;
        let g = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g / c
    }

    pub fn stationary_mean(&self) -> f64 {
        self.theta
    }

    pub fn stationary_std(&self) -> f64 {
        (self.theta * self.sigma * self.sigma / (2.0 * self.kappa)).sqrt()
    }

    /// Log-density of the stationary gamma marginal.
    pub fn stationary_log_density(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::Domain(format!("negative rate {r} outside the support")));
        }
        let shape = 0.5 * self.dof();
        let rate = 2.0 * self.kappa / (self.sigma * self.sigma);
        if r == 0.0 {
            return Ok(match shape.partial_cmp(&1.0).unwrap() {
                std::cmp::Ordering::Greater => f64::NEG_INFINITY,
                std::cmp::Ordering::Equal => rate.ln(),
                std::cmp::Ordering::Less => f64::INFINITY,
            });
        }
        Ok(shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * r.ln() - rate * r)
    }

    pub fn sample_stationary(&self, rng: &mut dyn RngCore) -> f64 {
        let shape = 0.5 * self.dof();
        let rate = 2.0 * self.kappa / (self.sigma * self.sigma);
        Gamma::new(shape, 1.0 / rate).expect("positive shape").sample(rng)
    }
}

impl TargetModel for CirProcess {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample_path(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut path = Vec::with_capacity(self.d);
        path.push(self.sample_stationary(rng));
        for i in 1..self.d {
            let next = self.sample_transition(path[i - 1], rng);
            path.push(next);
        }
        path
    }

    /// Stationary gamma density at the head plus exact transition terms.
    /// Every value feeding a transition must be strictly positive; a zero
    /// in the final position is merely a support-boundary point and yields
    /// the boundary density value.
    fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::Dimension {
                context: "cir log-density",
                expected: self.d,
                got: x.len(),
            });
        }
        for (i, &v) in x.iter().enumerate() {
            if i + 1 < x.len() && !(v > 0.0) {
                return Err(Error::Domain(format!(
                    "nonpositive interior value {v} at index {i}"
                )));
            }
        }
        let mut total = self.stationary_log_density(x[0])?;
        for i in 1..x.len() {
            total += self.transition_log_density(x[i], x[i - 1])?;
        }
        Ok(total)
    }

    fn describe(&self) -> String {
        format!(
            "cir(kappa={}, theta={}, sigma={}, dt={}, d={})",
            self.kappa, self.theta, self.sigma, self.dt, self.d
        )
    }
}
