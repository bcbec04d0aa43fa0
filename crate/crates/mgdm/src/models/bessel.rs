use statrs::function::gamma::ln_gamma;

/// `log I_q(z)` for real order `q > -1` and `z ≥ 0`, evaluated entirely in
/// log space so large noncentrality never overflows.
///
/// Small and moderate arguments use the ascending series with running
/// log-sum-exp; large `z` switches to the Hankel asymptotic expansion
/// (valid once `z` dominates `q²`).
pub fn log_bessel_i(q: f64, z: f64) -> f64 {
    assert!(q > -1.0, "order must exceed -1, got {q}");
    assert!(z >= 0.0 && z.is_finite(), "argument must be finite and nonnegative");
    if z == 0.0 {
        return if q == 0.0 {
            0.0
        } else if q > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
    }
    let switch = (4.0 * q * q).max(40.0) + 10.0;
    if z < switch {
        log_bessel_i_series(q, z)
    } else {
        log_bessel_i_asymptotic(q, z)
    }
}

fn log_bessel_i_series(q: f64, z: f64) -> f64 {
    let log_half_z = (0.5 * z).ln();
    let mut max_log = f64::NEG_INFINITY;
    let mut acc = 0.0;
    let peak = 0.5 * z + 5.0;
    for m in 0..200_000u64 {
        let mf = m as f64;
        let t = (2.0 * mf + q) * log_half_z - ln_gamma(mf + 1.0) - ln_gamma(mf + q + 1.0);
        if t > max_log {
            acc = acc * (max_log - t).exp() + 1.0;
            max_log = t;
        } else {
            acc += (t - max_log).exp();
        }
        if mf > peak && t < max_log - 45.0 {
            break;
        }
    }
    max_log + acc.ln()
}

fn log_bessel_i_asymptotic(q: f64, z: f64) -> f64 {
    let mu = 4.0 * q * q;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..=40u32 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= -(mu - odd * odd) / (8.0 * kf * z);
        if term.abs() >= prev {
            break; // divergent tail of the asymptotic series
        }
        sum += term;
        prev = term.abs();
        if prev < 1e-18 {
            break;
        }
    }
    z - 0.5 * (2.0 * std::f64::consts::PI * z).ln() + sum.ln()
}
