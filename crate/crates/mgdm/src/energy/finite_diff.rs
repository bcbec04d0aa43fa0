use nalgebra::DMatrix;

use super::{Energy, EnergyVector};

/// Derivative oracle wrapping any energy's value map with central finite
/// differences. Only the value evaluator of the inner energy is ever
/// called, so this stays independent of its analytic derivative paths.
/// Meant for tests and derivative checks, not production descent.
pub struct FiniteDiffEnergy<'a> {
    inner: &'a dyn Energy,
    rel_step: f64,
}

impl<'a> FiniteDiffEnergy<'a> {
    /// Default relative step 1e-5, scaled per coordinate by `max(|x_i|, 1)`.
    pub fn new(inner: &'a dyn Energy) -> Self {
        Self {
            inner,
            rel_step: 1e-5,
        }
    }

    pub fn with_step(inner: &'a dyn Energy, rel_step: f64) -> Self {
        Self { inner, rel_step }
    }

    fn step(&self, xi: f64) -> f64 {
        self.rel_step * xi.abs().max(1.0)
    }
}

impl Energy for FiniteDiffEnergy<'_> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn value(&self, x: &[f64]) -> EnergyVector {
        self.inner.value(x)
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (d, k) = (self.input_dim(), self.output_dim());
        let mut jac = DMatrix::zeros(k, d);
        let mut probe = x.to_vec();
        for j in 0..d {
            let h = self.step(x[j]);
            probe[j] = x[j] + h;
            let up = self.inner.value(&probe);
            probe[j] = x[j] - h;
            let down = self.inner.value(&probe);
            probe[j] = x[j];
            for i in 0..k {
                jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
            }
        }
        jac
    }

    fn weighted_hessian(&self, x: &[f64], w: &[f64]) -> DMatrix<f64> {
        assert_eq!(w.len(), self.output_dim(), "weight length mismatch");
        let d = self.input_dim();
        let f = |p: &[f64]| -> f64 {
            self.inner
                .value(p)
                .iter()
                .zip(w)
                .map(|(v, wk)| v * wk)
                .sum()
        };
        let mut hess = DMatrix::zeros(d, d);
        let mut probe = x.to_vec();
        for i in 0..d {
            let hi = self.step(x[i]);
            for j in 0..=i {
                let hj = self.step(x[j]);
                probe[i] += hi;
                probe[j] += hj;
                let pp = f(&probe);
                probe[j] -= 2.0 * hj;
                let pm = f(&probe);
                probe[i] -= 2.0 * hi;
                let mm = f(&probe);
                probe[j] += 2.0 * hj;
                let mp = f(&probe);
                probe[i] = x[i];
                probe[j] = x[j];
                let v = (pp - pm - mp + mm) / (4.0 * hi * hj);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        hess
    }

    fn describe(&self) -> String {
        format!("finite-diff({})", self.inner.describe())
    }
}
