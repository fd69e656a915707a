use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Running first and second moments of a vector-valued stream.
///
/// Partial accumulators merge exactly (Chan et al. pairwise update), so
/// parallel chunks can be combined in a fixed order for reproducible totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    dim: usize,
    count: usize,
    mean: Vec<f64>,
    /// Centred cross-products `Σ (x − x̄)(x − x̄)ᵀ`, row-major.
    m2: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim * dim],
        }
    }

    /// Two-pass moments of `rows`, a row-major block of `dim`-vectors.
    pub fn from_rows(dim: usize, rows: &[f64]) -> Self {
        assert!(dim > 0 && rows.len().is_multiple_of(dim), "ragged sample block");
        let count = rows.len() / dim;
        let mut acc = Self::new(dim);
        if count == 0 {
            return acc;
        }
        for row in rows.chunks_exact(dim) {
            for (m, x) in acc.mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut acc.mean {
            *m /= count as f64;
        }
        let mut centred = vec![0.0; dim];
        for row in rows.chunks_exact(dim) {
            for k in 0..dim {
                centred[k] = row[k] - acc.mean[k];
            }
            for i in 0..dim {
                let ci = centred[i];
                let line = &mut acc.m2[i * dim..(i + 1) * dim];
                for j in i..dim {
                    line[j] += ci * centred[j];
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                acc.m2[i * dim + j] = acc.m2[j * dim + i];
            }
        }
        acc.count = count;
        acc
    }

    /// Welford update with one observation.
    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim);
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for (row, di) in self.m2.chunks_mut(self.dim).zip(&delta) {
            for ((cell, xj), mj) in row.iter_mut().zip(x).zip(&self.mean) {
                *cell += di * (xj - mj);
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.dim, other.dim);
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let w = na * nb / n;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let k = i * self.dim + j;
                self.m2[k] += other.m2[k] + delta[i] * delta[j] * w;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * nb / n;
        }
        self.count += other.count;
    }

    pub fn merged<'a>(dim: usize, parts: impl IntoIterator<Item = &'a Self>) -> Self {
        let mut acc = Self::new(dim);
        for p in parts {
            acc.merge(p);
        }
        acc
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.mean)
    }

    /// Unbiased sample covariance (divides by `n − 1`).
    pub fn covariance(&self) -> DMatrix<f64> {
        let denom = (self.count.max(2) - 1) as f64;
        DMatrix::from_row_slice(self.dim, self.dim, &self.m2) / denom
    }
}
