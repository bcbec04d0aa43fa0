use rand::RngCore;

use crate::error::{Error, Result};
use crate::models::InitDistribution;

/// N sample paths of length d, stored row-major, plus the per-component
/// active mask maintained by projected descent.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleBatch {
    data: Vec<f64>,
    n: usize,
    d: usize,
    /// Components updated by the most recent step; `None` means all active.
    pub active: Option<Vec<bool>>,
    /// Number of descent steps applied so far.
    pub step: usize,
}

impl ParticleBatch {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("empty particle batch".into()));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::InvalidInput("zero-length particle".into()));
        }
        let n = rows.len();
        let mut data = Vec::with_capacity(n * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::Dimension {
                    context: "particle batch rows",
                    expected: d,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            data,
            n,
            d,
            active: None,
            step: 0,
        })
    }

    pub(crate) fn from_flat(data: Vec<f64>, n: usize, d: usize) -> Self {
        debug_assert_eq!(data.len(), n * d);
        Self {
            data,
            n,
            d,
            active: None,
            step: 0,
        }
    }

    /// Draw `n` independent paths from the initial distribution.
    pub fn sample_init(init: &InitDistribution, n: usize, rng: &mut dyn RngCore) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("empty particle batch".into()));
        }
        let d = init.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            data.extend_from_slice(&init.sample(rng));
        }
        Ok(Self {
            data,
            n,
            d,
            active: None,
            step: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn particles(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Active mask of particle `i` (all-true when no projection ran).
    pub fn particle_mask(&self, i: usize) -> Option<&[bool]> {
        self.active
            .as_ref()
            .map(|m| &m[i * self.d..(i + 1) * self.d])
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Reorder particles; the mask, if any, is permuted alongside.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n {
            return Err(Error::Dimension {
                context: "particle permutation",
                expected: self.n,
                got: order.len(),
            });
        }
        let mut data = Vec::with_capacity(self.n * self.d);
        let mut active = self.active.as_ref().map(|_| Vec::with_capacity(self.n * self.d));
        for &i in order {
            data.extend_from_slice(self.particle(i));
            if let (Some(dst), Some(src)) = (active.as_mut(), self.active.as_ref()) {
                dst.extend_from_slice(&src[i * self.d..(i + 1) * self.d]);
            }
        }
        Ok(Self {
            data,
            n: self.n,
            d: self.d,
            active,
            step: self.step,
        })
    }
}
