//! Exact change-of-variables bookkeeping for the descent flow.
//!
//! Each gradient step is a smooth map whose Jacobian log-determinant
//! converts initial log-density into final log-density. Coupled batches
//! have one `Nd × Nd` Jacobian per step; the block structure (block
//! diagonal plus rank-K) lets the matrix determinant lemma reduce the cost
//! to one d×d factorization per particle plus a K×K determinant, without
//! ever materializing the full matrix. A dense assembly of the full matrix
//! is kept as a test oracle.

mod bound;
mod estimate;
mod trace;

pub use bound::{entropy_rate_bound, BoundDiagnostics};
pub use estimate::{
    entropy_estimate, reverse_kl, EntropyEstimate, EntropyScale, KlEstimate, Normalization,
};
pub use trace::FlowTrace;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::descent::ParticleBatch;
use crate::energy::{batch_mean_energy, Energy, EnergyVector};
use crate::error::{Error, Result};
use crate::linalg::{log_abs_det, lu_factor, LuFactor, SINGULAR_LOG_DET};

/// Log-magnitude and sign of a step Jacobian determinant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLogDet {
    pub log_abs: f64,
    pub sign: f64,
}

impl SignedLogDet {
    const IDENTITY: Self = Self {
        log_abs: 0.0,
        sign: 1.0,
    };

    fn checked(log_abs: f64, sign: f64, particle: Option<usize>) -> Result<Self> {
        if sign == 0.0 || log_abs < SINGULAR_LOG_DET {
            return Err(Error::SingularFlow { particle });
        }
        Ok(Self { log_abs, sign })
    }

    fn combine(self, other: Self) -> Self {
        Self {
            log_abs: self.log_abs + other.log_abs,
            sign: self.sign * other.sign,
        }
    }
}

fn residual(value: &EnergyVector, alpha: &EnergyVector) -> Vec<f64> {
    assert_eq!(value.len(), alpha.len(), "energy/target length mismatch");
    value.iter().zip(alpha.iter()).map(|(v, a)| v - a).collect()
}

/// Jacobian `I - γ(H_w + JᵀJ)` of the single-particle gradient step, with
/// `w = Φ(x) - α`.
pub fn gd_step_jacobian_dense(
    x: &[f64],
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
) -> DMatrix<f64> {
    let d = energy.input_dim();
    let w = residual(&energy.value(x), alpha);
    let jac = energy.jacobian(x);
    let mut m = energy.weighted_hessian(x, &w);
    m.gemm(1.0, &jac.transpose(), &jac, 1.0); // m = H_w + JᵀJ
    let mut out = DMatrix::identity(d, d);
    out -= &m * gamma;
    out
}

/// `log|det|` of the single-particle step Jacobian by dense factorization.
pub fn step_logdet_single(
    x: &[f64],
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
) -> Result<SignedLogDet> {
    let m = gd_step_jacobian_dense(x, alpha, energy, gamma);
    let (log_abs, sign) = log_abs_det(m);
    SignedLogDet::checked(log_abs, sign, None)
}

/// Full `Nd × Nd` Jacobian of the coupled mean-field step: block (n,m) is
/// `δ_nm (I - γ H^{(n)}_w) - (γ/N) J_nᵀ J_m` with `w = Φ̄(x) - α`.
pub fn mf_step_jacobian_dense(
    batch: &ParticleBatch,
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    let n = batch.len();
    let d = batch.dim();
    let w = residual(&batch_mean_energy(batch, energy)?, alpha);
    let jacs: Vec<DMatrix<f64>> = batch.particles().map(|x| energy.jacobian(x)).collect();
    let mut m = DMatrix::identity(n * d, n * d);
    for (i, x) in batch.particles().enumerate() {
        let h = energy.weighted_hessian(x, &w);
        let mut block = m.view_mut((i * d, i * d), (d, d));
        block -= &h * gamma;
    }
    let coupling = gamma / n as f64;
    for i in 0..n {
        for j in 0..n {
            let prod = jacs[i].transpose() * &jacs[j];
            let mut block = m.view_mut((i * d, j * d), (d, d));
            block -= &prod * coupling;
        }
    }
    Ok(m)
}

/// Default total-dimension cap of the dense oracle.
pub const DENSE_ORACLE_CAP: usize = 4096;

/// Dense `log|det|` of the coupled step Jacobian. Test oracle: cost and
/// memory are cubic/quadratic in `N·d`, so it refuses large problems.
pub fn step_logdet_mf_dense(
    batch: &ParticleBatch,
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
) -> Result<SignedLogDet> {
    step_logdet_mf_dense_with_cap(batch, alpha, energy, gamma, DENSE_ORACLE_CAP)
}

pub fn step_logdet_mf_dense_with_cap(
    batch: &ParticleBatch,
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
    cap: usize,
) -> Result<SignedLogDet> {
    let total = batch.len() * batch.dim();
    if total > cap {
        return Err(Error::OracleScale { cap, got: total });
    }
    let m = mf_step_jacobian_dense(batch, alpha, energy, gamma)?;
    let (log_abs, sign) = log_abs_det(m);
    SignedLogDet::checked(log_abs, sign, None)
}

/// Matrix-determinant-lemma evaluation of the coupled step determinant:
///
/// `Σ_n log|det B_n| + log|det(I_K - (γ/N) Σ_n J_n B_n⁻¹ J_nᵀ)|`
///
/// with `B_n = I - γ H^{(n)}_w`. Costs O(N·d³ + K³); one factorization per
/// particle is reused for all K right-hand sides, and energies whose
/// Hessian is constant in `x` share a single factorization across the
/// batch.
pub fn step_logdet_mf_fast(
    batch: &ParticleBatch,
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
) -> Result<SignedLogDet> {
    let n = batch.len();
    let k = energy.output_dim();
    let w = residual(&batch_mean_energy(batch, energy)?, alpha);

    let shared: Option<LuFactor> = if energy.constant_hessian() {
        Some(lu_factor(block_diag_factor(
            batch.particle(0),
            &w,
            energy,
            gamma,
        )))
    } else {
        None
    };

    let parts: Vec<Result<(SignedLogDet, DMatrix<f64>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = batch.particle(i);
            let jac = energy.jacobian(x);
            let jac_t = jac.transpose();
            let (logdet, solved) = match &shared {
                Some(factor) => {
                    let (la, sign) = factor.log_abs_det();
                    (
                        SignedLogDet::checked(la, sign, Some(i))?,
                        factor.solve_mat(&jac_t),
                    )
                }
                None => {
                    let factor = lu_factor(block_diag_factor(x, &w, energy, gamma));
                    let (la, sign) = factor.log_abs_det();
                    (
                        SignedLogDet::checked(la, sign, Some(i))?,
                        factor.solve_mat(&jac_t),
                    )
                }
            };
            Ok((logdet, &jac * solved))
        })
        .collect();

    let mut total = SignedLogDet::IDENTITY;
    let mut csum = DMatrix::zeros(k, k);
    for part in parts {
        let (logdet, cmat) = part?;
        total = total.combine(logdet);
        csum += cmat;
    }
    let mut s = DMatrix::identity(k, k);
    s -= &csum * (gamma / n as f64);
    let (la, sign) = log_abs_det(s);
    let tail = SignedLogDet::checked(la, sign, None)?;
    let out = total.combine(tail);
    SignedLogDet::checked(out.log_abs, out.sign, None)
}

fn block_diag_factor(x: &[f64], w: &[f64], energy: &dyn Energy, gamma: f64) -> DMatrix<f64> {
    let d = energy.input_dim();
    let mut b = DMatrix::identity(d, d);
    b -= energy.weighted_hessian(x, w) * gamma;
    b
}

fn active_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &a)| a.then_some(i))
        .collect()
}

/// `log|det|` of the single-particle step Jacobian restricted to the
/// components the projected step actually updated. Retained components
/// contribute identity rows, so the determinant reduces to the active
/// submatrix.
pub fn step_logdet_projected_single(
    x: &[f64],
    mask: &[bool],
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
) -> Result<SignedLogDet> {
    assert_eq!(mask.len(), x.len(), "mask length mismatch");
    let idx = active_indices(mask);
    if idx.is_empty() {
        return Ok(SignedLogDet::IDENTITY);
    }
    let full = gd_step_jacobian_dense(x, alpha, energy, gamma);
    let sub = full.select_rows(idx.iter()).select_columns(idx.iter());
    let (log_abs, sign) = log_abs_det(sub);
    SignedLogDet::checked(log_abs, sign, None)
}

/// Mean-field analogue of [`step_logdet_projected_single`]: the lemma is
/// applied with each particle's Jacobian columns and Hessian rows/columns
/// restricted to that particle's active set (taken from `batch.active`).
pub fn step_logdet_projected_mf(
    batch: &ParticleBatch,
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
) -> Result<SignedLogDet> {
    let n = batch.len();
    let k = energy.output_dim();
    let w = residual(&batch_mean_energy(batch, energy)?, alpha);

    let parts: Vec<Result<(SignedLogDet, DMatrix<f64>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = batch.particle(i);
            let idx = match batch.particle_mask(i) {
                Some(mask) => active_indices(mask),
                None => (0..batch.dim()).collect(),
            };
            if idx.is_empty() {
                return Ok((SignedLogDet::IDENTITY, DMatrix::zeros(k, k)));
            }
            let b = block_diag_factor(x, &w, energy, gamma)
                .select_rows(idx.iter())
                .select_columns(idx.iter());
            let jac_sub = energy.jacobian(x).select_columns(idx.iter());
            let factor = lu_factor(b);
            let (la, sign) = factor.log_abs_det();
            let logdet = SignedLogDet::checked(la, sign, Some(i))?;
            let solved = factor.solve_mat(&jac_sub.transpose());
            Ok((logdet, &jac_sub * solved))
        })
        .collect();

    let mut total = SignedLogDet::IDENTITY;
    let mut csum = DMatrix::zeros(k, k);
    for part in parts {
        let (logdet, cmat) = part?;
        total = total.combine(logdet);
        csum += cmat;
    }
    let mut s = DMatrix::identity(k, k);
    s -= &csum * (gamma / n as f64);
    let (la, sign) = log_abs_det(s);
    let out = total.combine(SignedLogDet::checked(la, sign, None)?);
    SignedLogDet::checked(out.log_abs, out.sign, None)
}

/// Dense restricted oracle for the projected coupled step: assemble the
/// full coupled Jacobian, then keep only globally active rows and columns.
pub fn step_logdet_projected_dense(
    batch: &ParticleBatch,
    alpha: &EnergyVector,
    energy: &dyn Energy,
    gamma: f64,
) -> Result<SignedLogDet> {
    let total = batch.len() * batch.dim();
    if total > DENSE_ORACLE_CAP {
        return Err(Error::OracleScale {
            cap: DENSE_ORACLE_CAP,
            got: total,
        });
    }
    let full = mf_step_jacobian_dense(batch, alpha, energy, gamma)?;
    let idx: Vec<usize> = match &batch.active {
        Some(mask) => active_indices(mask),
        None => (0..total).collect(),
    };
    if idx.is_empty() {
        return Ok(SignedLogDet::IDENTITY);
    }
    let sub = full.select_rows(idx.iter()).select_columns(idx.iter());
    let (log_abs, sign) = log_abs_det(sub);
    SignedLogDet::checked(log_abs, sign, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descent::{gd_step, mf_step};
    use crate::energy::AcfEnergy;
    use crate::rng::{stream_rng, StreamKind};
    use nalgebra::DVector;
    use rand_distr::{Distribution, StandardNormal};

    fn seeded_path(d: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, StreamKind::Test, 5);
        (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn seeded_batch(n: usize, d: usize, seed: u64) -> ParticleBatch {
        ParticleBatch::from_rows((0..n).map(|i| seeded_path(d, seed * 1000 + i as u64)).collect())
            .unwrap()
    }

    /// Test-only linear statistic Φ(x) = βx: J = βI, zero Hessian, so the
    /// step map is the exact contraction x ↦ (1 - γβ²)x.
    struct LinearEnergy {
        beta: f64,
        d: usize,
    }

    impl Energy for LinearEnergy {
        fn input_dim(&self) -> usize {
            self.d
        }
        fn output_dim(&self) -> usize {
            self.d
        }
        fn value(&self, x: &[f64]) -> EnergyVector {
            DVector::from_iterator(self.d, x.iter().map(|v| self.beta * v))
        }
        fn jacobian(&self, _x: &[f64]) -> DMatrix<f64> {
            DMatrix::identity(self.d, self.d) * self.beta
        }
        fn weighted_hessian(&self, _x: &[f64], w: &[f64]) -> DMatrix<f64> {
            assert_eq!(w.len(), self.d);
            DMatrix::zeros(self.d, self.d)
        }
        fn constant_hessian(&self) -> bool {
            true
        }
        fn describe(&self) -> String {
            "linear".into()
        }
    }

    /// Constant statistic: zero Jacobian and Hessian.
    struct ConstantEnergy {
        d: usize,
    }

    impl Energy for ConstantEnergy {
        fn input_dim(&self) -> usize {
            self.d
        }
        fn output_dim(&self) -> usize {
            2
        }
        fn value(&self, _x: &[f64]) -> EnergyVector {
            DVector::from_vec(vec![1.0, -0.5])
        }
        fn jacobian(&self, _x: &[f64]) -> DMatrix<f64> {
            DMatrix::zeros(2, self.d)
        }
        fn weighted_hessian(&self, _x: &[f64], w: &[f64]) -> DMatrix<f64> {
            assert_eq!(w.len(), 2);
            DMatrix::zeros(self.d, self.d)
        }
        fn constant_hessian(&self) -> bool {
            true
        }
        fn describe(&self) -> String {
            "constant".into()
        }
    }

    #[test]
    fn zero_gamma_gives_zero_logdet() {
        let d = 8;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let x = seeded_path(d, 1);
        let single = step_logdet_single(&x, &alpha, &energy, 0.0).unwrap();
        assert_eq!(single.log_abs, 0.0);
        assert_eq!(single.sign, 1.0);
        let batch = seeded_batch(3, d, 2);
        let fast = step_logdet_mf_fast(&batch, &alpha, &energy, 0.0).unwrap();
        assert_eq!(fast.log_abs, 0.0);
    }

    #[test]
    fn constant_statistic_gives_zero_logdet() {
        let d = 6;
        let energy = ConstantEnergy { d };
        let alpha = DVector::from_vec(vec![0.0, 0.0]);
        let x = seeded_path(d, 3);
        let got = step_logdet_single(&x, &alpha, &energy, 0.2).unwrap();
        assert_eq!(got.log_abs, 0.0);
    }

    /// Finite-difference Jacobian of an arbitrary map R^n → R^n.
    fn fd_map_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
        let n = x.len();
        let mut jac = DMatrix::zeros(n, n);
        let mut probe = x.to_vec();
        for j in 0..n {
            let step = h * x[j].abs().max(1.0);
            probe[j] = x[j] + step;
            let up = f(&probe);
            probe[j] = x[j] - step;
            let down = f(&probe);
            probe[j] = x[j];
            for i in 0..n {
                jac[(i, j)] = (up[i] - down[i]) / (2.0 * step);
            }
        }
        jac
    }

    #[test]
    fn single_logdet_matches_fd_jacobian_of_step_map() {
        let d = 8;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let gamma = 0.05;
        let x = seeded_path(d, 4);
        let jac = fd_map_jacobian(
            |p| gd_step(p, &alpha, &energy, gamma).unwrap(),
            &x,
            1e-6,
        );
        let (oracle, _) = crate::linalg::log_abs_det(jac);
        let got = step_logdet_single(&x, &alpha, &energy, gamma).unwrap();
        assert!(
            (got.log_abs - oracle).abs() < 1e-6,
            "{} vs {oracle}",
            got.log_abs
        );
    }

    #[test]
    fn dense_block_structure_matches_definition() {
        let (n, d) = (3, 4);
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.0, 1.0]);
        let gamma = 0.07;
        let batch = seeded_batch(n, d, 5);
        let full = mf_step_jacobian_dense(&batch, &alpha, &energy, gamma).unwrap();
        let jacs: Vec<DMatrix<f64>> = batch.particles().map(|x| energy.jacobian(x)).collect();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let block = full.view((i * d, j * d), (d, d)).clone_owned();
                let expected = jacs[i].transpose() * &jacs[j] * (-gamma / n as f64);
                assert!((block - expected).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn dense_matches_fd_jacobian_of_coupled_map() {
        let (n, d) = (2, 4);
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let gamma = 0.04;
        let batch = seeded_batch(n, d, 6);
        let flat: Vec<f64> = batch.particles().flatten().copied().collect();
        let coupled = |p: &[f64]| -> Vec<f64> {
            let b = ParticleBatch::from_rows(vec![p[..d].to_vec(), p[d..].to_vec()]).unwrap();
            let next = mf_step(&b, &alpha, &energy, gamma).unwrap();
            next.particles().flatten().copied().collect()
        };
        let fd = fd_map_jacobian(coupled, &flat, 1e-6);
        let dense = mf_step_jacobian_dense(&batch, &alpha, &energy, gamma).unwrap();
        assert!((&fd - &dense).norm() < 1e-5, "norm {}", (&fd - &dense).norm());
        let (oracle, _) = crate::linalg::log_abs_det(fd);
        let got = step_logdet_mf_dense(&batch, &alpha, &energy, gamma).unwrap();
        assert!((got.log_abs - oracle).abs() < 1e-5);
    }

    #[test]
    fn fast_equals_dense_over_size_grid() {
        for &n in &[1usize, 2, 4] {
            for &d in &[4usize, 8, 16] {
                for seed in 0..5u64 {
                    let energy = AcfEnergy::ar1_sufficient(d).unwrap();
                    let alpha = DVector::from_vec(vec![0.1, 1.0]);
                    let gamma = 0.03;
                    let batch = seeded_batch(n, d, 100 + seed * 10 + (n * d) as u64);
                    let fast = step_logdet_mf_fast(&batch, &alpha, &energy, gamma).unwrap();
                    let dense = step_logdet_mf_dense(&batch, &alpha, &energy, gamma).unwrap();
                    let tol = 1e-8 * dense.log_abs.abs().max(1.0);
                    assert!(
                        (fast.log_abs - dense.log_abs).abs() <= tol,
                        "N={n}, d={d}, seed={seed}: {} vs {}",
                        fast.log_abs,
                        dense.log_abs
                    );
                }
            }
        }
    }

    #[test]
    fn fast_reduces_to_single_at_one_particle() {
        let d = 12;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let gamma = 0.05;
        let x = seeded_path(d, 7);
        let batch = ParticleBatch::from_rows(vec![x.clone()]).unwrap();
        let fast = step_logdet_mf_fast(&batch, &alpha, &energy, gamma).unwrap();
        let single = step_logdet_single(&x, &alpha, &energy, gamma).unwrap();
        assert!((fast.log_abs - single.log_abs).abs() < 1e-10);
    }

    #[test]
    fn dense_oracle_refuses_large_problems() {
        let d = 16;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let batch = seeded_batch(2, d, 8);
        let err = step_logdet_mf_dense_with_cap(&batch, &alpha, &energy, 0.01, 16);
        assert!(matches!(err, Err(Error::OracleScale { .. })));
    }

    #[test]
    fn projected_all_true_equals_unrestricted() {
        let d = 10;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let gamma = 0.05;
        let x: Vec<f64> = seeded_path(d, 9).iter().map(|v| v.abs() + 0.1).collect();
        let mask = vec![true; d];
        let a = step_logdet_projected_single(&x, &mask, &alpha, &energy, gamma).unwrap();
        let b = step_logdet_single(&x, &alpha, &energy, gamma).unwrap();
        assert!((a.log_abs - b.log_abs).abs() < 1e-12);
    }

    #[test]
    fn projected_all_false_is_identity() {
        let d = 6;
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let x = vec![0.5; d];
        let mask = vec![false; d];
        let got = step_logdet_projected_single(&x, &mask, &alpha, &energy, 0.05).unwrap();
        assert_eq!(got.log_abs, 0.0);
    }

    #[test]
    fn projected_mf_matches_dense_masked_oracle() {
        let (n, d) = (2, 6);
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let alpha = DVector::from_vec(vec![0.1, 1.0]);
        let gamma = 0.06;
        for seed in 0..5u64 {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    seeded_path(d, 300 + seed * 10 + i as u64)
                        .iter()
                        .map(|v| v.abs() + 0.05)
                        .collect()
                })
                .collect();
            let mut batch = ParticleBatch::from_rows(rows).unwrap();
            // craft a mixed mask
            let mut mask = vec![true; n * d];
            mask[1] = false;
            mask[d + 3] = false;
            mask[d + 4] = false;
            batch.active = Some(mask);
            let fast = step_logdet_projected_mf(&batch, &alpha, &energy, gamma).unwrap();
            let dense = step_logdet_projected_dense(&batch, &alpha, &energy, gamma).unwrap();
            assert!(
                (fast.log_abs - dense.log_abs).abs() <= 1e-8 * dense.log_abs.abs().max(1.0),
                "seed {seed}: {} vs {}",
                fast.log_abs,
                dense.log_abs
            );
        }
    }

    #[test]
    fn linear_contraction_logdet_is_exact() {
        let d = 5;
        let beta = 0.8;
        let gamma = 0.3;
        let energy = LinearEnergy { beta, d };
        let alpha = DVector::zeros(d);
        let x = seeded_path(d, 11);
        let c: f64 = 1.0 - gamma * beta * beta;
        let got = step_logdet_single(&x, &alpha, &energy, gamma).unwrap();
        assert!((got.log_abs - d as f64 * c.abs().ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_estimator_recovers_linear_contraction_exactly() {
        // every step contributes d·log c, so the entropy after t steps is
        // H(q_0) + t·d·log c
        let d = 5;
        let c: f64 = 0.9;
        let per_step = d as f64 * c.ln();
        let mut trace = FlowTrace::new(true, 3);
        for _ in 0..4 {
            trace.push_step(vec![per_step; 3]).unwrap();
        }
        let h0 = 2.0;
        let scale = EntropyScale { particles: 1, dim: d };
        for t in 0..=4 {
            let est = entropy_estimate(h0, &trace, t, scale, Normalization::Total).unwrap();
            assert!((est.value - (h0 + t as f64 * per_step)).abs() < 1e-12);
        }
    }

    #[test]
    fn concatenated_jacobian_trace_identity() {
        // tr(𝒥ᵀ𝒥) over the concatenated Jacobian equals the sum of the
        // per-particle traces
        let (n, d) = (4, 8);
        let energy = AcfEnergy::ar1_sufficient(d).unwrap();
        let batch = seeded_batch(n, d, 12);
        let jacs: Vec<DMatrix<f64>> = batch.particles().map(|x| energy.jacobian(x)).collect();
        let mut concat = DMatrix::zeros(2, n * d);
        for (i, j) in jacs.iter().enumerate() {
            concat.view_mut((0, i * d), (2, d)).copy_from(j);
        }
        let full = (concat.transpose() * &concat).trace();
        let sum: f64 = jacs.iter().map(|j| (j.transpose() * j).trace()).sum();
        assert!((full - sum).abs() < 1e-10 * full.abs().max(1.0));
    }

    #[test]
    fn taylor_expansion_order_of_logdet() {
        // |log det(I - γA) + γ tr A| should shrink at order γ²
        let d = 12;
        let mut rng = stream_rng(13, StreamKind::Test, 6);
        let raw = DMatrix::from_fn(d, d, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let a = (&raw + raw.transpose()) * 0.5;
        let tr = a.trace();
        let gammas = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4];
        let mut points = Vec::new();
        for &g in &gammas {
            let m = DMatrix::identity(d, d) - &a * g;
            let (logdet, _) = crate::linalg::log_abs_det(m);
            let err = (logdet + g * tr).abs();
            points.push((g.ln(), err.ln()));
        }
        // least-squares slope in log-log
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope >= 1.9, "fitted order {slope}");
    }
}
