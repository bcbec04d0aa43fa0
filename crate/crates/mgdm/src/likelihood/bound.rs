/// Entropy-rate lower-bound diagnostic assembled from run artifacts.
///
/// The bound on `(Nd)⁻¹ H(q_T)` after `T` steps is, up to O(γ²) terms,
///
/// `(Nd)⁻¹ H(q_0) - 2γ( η√K Σ_t E‖Φ̄ - α‖ + (K/Nd) β² T )`
///
/// where `β` bounds the spectral norm of the energy Jacobian and `η` the
/// spectral norm of each component Hessian. Quadratic statistics are not
/// globally Lipschitz, so batch-observed local constants are used and the
/// result is a diagnostic rather than a guarantee.
#[derive(Clone, Debug)]
pub struct BoundDiagnostics {
    /// Local spectral-norm bound of the Jacobian per step.
    pub beta: Vec<f64>,
    /// Local spectral-norm bound of the component Hessians per step.
    pub eta: Vec<f64>,
    /// Accumulated right-hand side; entry `t` bounds the entropy rate
    /// after `t` steps, entry 0 is the initial rate.
    pub bound_rate: Vec<f64>,
}

/// `distances[t]`, `betas[t]`, `etas[t]` describe the state before step
/// `t+1`. Running maxima of the local constants keep the accumulated bound
/// monotone in the observed quantities.
pub fn entropy_rate_bound(
    init_entropy_rate: f64,
    gamma: f64,
    k: usize,
    particles: usize,
    dim: usize,
    distances: &[f64],
    betas: &[f64],
    etas: &[f64],
) -> BoundDiagnostics {
    assert_eq!(distances.len(), betas.len());
    assert_eq!(distances.len(), etas.len());
    let steps = distances.len();
    let nd = (particles * dim) as f64;
    let sqrt_k = (k as f64).sqrt();
    let mut bound_rate = Vec::with_capacity(steps + 1);
    bound_rate.push(init_entropy_rate);
    let mut beta_max = 0.0f64;
    let mut eta_max = 0.0f64;
    let mut dist_sum = 0.0;
    for t in 0..steps {
        beta_max = beta_max.max(betas[t]);
        eta_max = eta_max.max(etas[t]);
        dist_sum += distances[t];
        let penalty = 2.0
            * gamma
            * (eta_max * sqrt_k * dist_sum + k as f64 / nd * beta_max * beta_max * (t + 1) as f64);
        bound_rate.push(init_entropy_rate - penalty);
    }
    BoundDiagnostics {
        beta: betas.to_vec(),
        eta: etas.to_vec(),
        bound_rate,
    }
}
