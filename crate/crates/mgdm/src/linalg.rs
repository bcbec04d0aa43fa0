//! Dense LU with log-magnitude determinant bookkeeping.
//!
//! Flow likelihoods accumulate log|det| over hundreds of steps, so the
//! determinant is never materialized as a plain float; the factorization
//! tracks `(log|det|, sign)` and flags underflow instead of returning 0.

use nalgebra::{DMatrix, DVector};

/// |det| below this is treated as numerically singular.
pub const SINGULAR_LOG_DET: f64 = -690.0; // ln(1e-300) ≈ -690.8

/// Packed LU factors of a square matrix with partial pivoting.
pub struct LuFactor {
    data: Vec<f64>, // column-major n×n, L below diagonal (unit), U on/above
    pivots: Vec<usize>,
    perm_sign: f64,
    n: usize,
}

/// Factor `a` in place. Always succeeds; exact singularity shows up as a
/// zero pivot and is reported by [`LuFactor::log_abs_det`] as sign 0.
pub fn lu_factor(a: DMatrix<f64>) -> LuFactor {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "LU requires a square matrix");
    let mut data = a.as_slice().to_vec();
    let mut pivots = vec![0usize; n];
    let mut perm_sign = 1.0;

    for k in 0..n {
        // pivot search in column k
        let col = k * n;
        let mut p = k;
        let mut best = data[col + k].abs();
        for r in (k + 1)..n {
            let v = data[col + r].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        pivots[k] = p;
        if p != k {
            perm_sign = -perm_sign;
            for c in 0..n {
                data.swap(c * n + k, c * n + p);
            }
        }
        let pivot = data[col + k];
        if pivot == 0.0 {
            continue; // exactly singular; remaining updates are no-ops
        }
        let inv = 1.0 / pivot;
        for r in (k + 1)..n {
            data[col + r] *= inv;
        }
        // trailing update: columns k+1.. read the multipliers in column k
        let (left, right) = data.split_at_mut((k + 1) * n);
        let lcol = &left[col + k + 1..col + n];
        for c in 0..(n - k - 1) {
            let base = c * n;
            let ukc = right[base + k];
            if ukc != 0.0 {
                for (dst, l) in right[base + k + 1..base + n].iter_mut().zip(lcol) {
                    *dst -= l * ukc;
                }
            }
        }
    }

    LuFactor {
        data,
        pivots,
        perm_sign,
        n,
    }
}

impl LuFactor {
    /// `(log|det|, sign)`; sign is 0.0 when a pivot vanished exactly.
    pub fn log_abs_det(&self) -> (f64, f64) {
        let mut log_abs = 0.0;
        let mut sign = self.perm_sign;
        for k in 0..self.n {
            let u = self.data[k * self.n + k];
            if u == 0.0 {
                return (f64::NEG_INFINITY, 0.0);
            }
            if u < 0.0 {
                sign = -sign;
            }
            log_abs += u.abs().ln();
        }
        (log_abs, sign)
    }

    /// Solve `A X = B` for all columns of `b`.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        assert_eq!(b.nrows(), n, "rhs row count must match factor size");
        let ncols = b.ncols();
        let mut x = b.clone();
        let xdata = x.as_mut_slice();
        for c in 0..ncols {
            let col = &mut xdata[c * n..(c + 1) * n];
            for (k, &p) in self.pivots.iter().enumerate() {
                if p != k {
                    col.swap(k, p);
                }
            }
            // forward substitution (unit lower)
            for k in 0..n {
                let v = col[k];
                if v != 0.0 {
                    for r in (k + 1)..n {
                        col[r] -= self.data[k * n + r] * v;
                    }
                }
            }
            // back substitution
            for k in (0..n).rev() {
                let mut v = col[k];
                for r in (k + 1)..n {
                    v -= self.data[r * n + k] * col[r];
                }
                col[k] = v / self.data[k * n + k];
            }
        }
        x
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mat = DMatrix::from_column_slice(self.n, 1, b.as_slice());
        DVector::from_column_slice(self.solve_mat(&mat).column(0).as_slice())
    }
}

/// `(log|det a|, sign)` by LU.
pub fn log_abs_det(a: DMatrix<f64>) -> (f64, f64) {
    lu_factor(a).log_abs_det()
}

/// Largest absolute eigenvalue of a symmetric matrix by power iteration.
pub fn sym_spectral_norm(a: &DMatrix<f64>, iters: usize) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 0 {
        return 0.0;
    }
    // fixed pseudo-random start vector keeps the estimate deterministic
    let mut v = DVector::from_fn(n, |i, _| {
        let z = ((i as u64).wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407) >> 33) as f64;
        z / (1u64 << 31) as f64 - 1.0 + 1e-3
    });
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..iters {
        let av = a * &v;
        let an = av.norm();
        if an == 0.0 {
            return 0.0;
        }
        let next = av / an;
        let delta = (an - lambda).abs();
        lambda = an;
        v = next;
        if delta <= 1e-12 * lambda.max(1.0) {
            break;
        }
    }
    lambda
}
