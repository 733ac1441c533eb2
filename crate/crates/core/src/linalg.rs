//! Dense matrix primitives, column-blocked Gram matrices and the power method.
//!
//! Every reduction here runs in a fixed order: blocks in ascending index,
//! and entries left to right within a block. Results therefore do not depend
//! on how many rayon workers execute the per-block work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `n x p` design matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite entry at row {}, column {}",
                k / cols,
                k % cols
            )));
        }
        Ok(DesignMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::dim("ragged rows"));
        }
        Self::new(n, p, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        DesignMatrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// `X v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::dim(format!(
                "matvec: vector has length {}, matrix has {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `Xᵀ v`.
    pub fn t_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::dim(format!(
                "t_matvec: vector has length {}, matrix has {} rows",
                v.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            axpy(vi, self.row(i), &mut out);
        }
        Ok(out)
    }
}

/// Contiguous column blocks `p_1, ..., p_K` of a `p`-dimensional coefficient vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    offsets: Vec<usize>,
}

impl Partition {
    /// Splits `p` columns into `k` blocks whose sizes differ by at most one;
    /// the leading blocks take the remainder.
    pub fn even(p: usize, k: usize) -> Result<Self> {
        if k == 0 || k > p {
            return Err(Error::arg(format!(
                "block count must satisfy 1 <= K <= p, got K={k}, p={p}"
            )));
        }
        let base = p / k;
        let extra = p % k;
        let sizes: Vec<usize> = (0..k).map(|i| base + usize::from(i < extra)).collect();
        Self::from_sizes(&sizes)
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::arg("partition needs at least one block"));
        }
        if sizes.contains(&0) {
            return Err(Error::arg("partition blocks must be non-empty"));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Partition { offsets })
    }

    pub fn block_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn max_block(&self) -> usize {
        self.sizes().into_iter().max().unwrap_or(0)
    }

    /// Index of the block holding coordinate `j`.
    pub fn block_of(&self, j: usize) -> usize {
        self.offsets.partition_point(|&o| o <= j) - 1
    }

    /// Borrows the per-block slices of `v`.
    pub fn split<'a>(&self, v: &'a [f64]) -> Vec<&'a [f64]> {
        (0..self.block_count()).map(|i| &v[self.range(i)]).collect()
    }
}

/// The column blocks `A_i = Xᵀ X_i` of the Gram matrix `A = XᵀX`.
///
/// Block `i` is held transposed (`p_i` rows of length `p`) so that both
/// `A_iᵀ u` and `A_i β_i` walk contiguous memory.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlocks {
    partition: Partition,
    dim: usize,
    blocks: Vec<Vec<f64>>,
}

impl GramBlocks {
    /// Assembles blocks from an explicit symmetric `p x p` row-major matrix.
    pub fn from_dense(a: &[f64], p: usize, partition: Partition) -> Result<Self> {
        if a.len() != p * p || partition.dim() != p {
            return Err(Error::dim("gram matrix / partition shape mismatch"));
        }
        let blocks = (0..partition.block_count())
            .map(|i| {
                let r = partition.range(i);
                let mut b = Vec::with_capacity(r.len() * p);
                for j in r {
                    for k in 0..p {
                        b.push(a[k * p + j]);
                    }
                }
                b
            })
            .collect();
        Ok(GramBlocks {
            partition,
            dim: p,
            blocks,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// The same matrix grouped under another partition. Columns are copied,
    /// not recomputed, so every entry is bitwise unchanged.
    pub fn regroup(&self, partition: &Partition) -> Result<Self> {
        if partition.dim() != self.dim {
            return Err(Error::dim("partition does not match gram dimension"));
        }
        let blocks = (0..partition.block_count())
            .map(|i| {
                let mut b = Vec::with_capacity(partition.range(i).len() * self.dim);
                for j in partition.range(i) {
                    let src = self.partition.block_of(j);
                    b.extend_from_slice(self.column(src, j - self.partition.offsets()[src]));
                }
                b
            })
            .collect();
        Ok(GramBlocks {
            partition: partition.clone(),
            dim: self.dim,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_count(&self) -> usize {
        self.partition.block_count()
    }

    /// Column `j` (block-local) of `A_i`.
    pub fn column(&self, i: usize, j: usize) -> &[f64] {
        &self.blocks[i][j * self.dim..(j + 1) * self.dim]
    }

    /// Entry `(k, j)` of `A_i`, `j` block-local.
    pub fn get(&self, i: usize, k: usize, j: usize) -> f64 {
        self.blocks[i][j * self.dim + k]
    }

    /// Entry `(k, j)` of the reassembled `A`.
    pub fn entry(&self, k: usize, j: usize) -> f64 {
        let i = self.partition.block_of(j);
        self.get(i, k, j - self.partition.offsets()[i])
    }

    /// Reassembles the full row-major `p x p` matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let p = self.dim;
        let mut a = vec![0.0; p * p];
        for i in 0..self.block_count() {
            let off = self.partition.offsets()[i];
            for j in 0..self.partition.range(i).len() {
                for (k, v) in self.column(i, j).iter().enumerate() {
                    a[k * p + off + j] = *v;
                }
            }
        }
        a
    }

    /// `A_iᵀ u` for one block.
    pub fn block_t_matvec(&self, i: usize, u: &[f64]) -> Vec<f64> {
        (0..self.partition.range(i).len())
            .map(|j| dot(self.column(i, j), u))
            .collect()
    }

    /// `A_i β_i` for one block, skipping zero coefficients.
    pub fn block_matvec(&self, i: usize, beta_i: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, &b) in beta_i.iter().enumerate() {
            if b != 0.0 {
                axpy(b, self.column(i, j), &mut out);
            }
        }
        out
    }

    /// `Aᵀ u` for all blocks at once, computed per block in parallel. Each
    /// output coordinate is a single dot product, so the result is
    /// independent of both the partition and the worker count.
    pub fn t_matvec(&self, u: &[f64]) -> Vec<f64> {
        let parts = map_indexed(self.block_count(), self.dim * self.dim, |i| {
            self.block_t_matvec(i, u)
        });
        parts.concat()
    }

    /// `μ A_iᵀ A_i v` for a block-local vector `v`.
    ///
    /// `A_i v` is formed row by row from the symmetric copy of `A`, so with a
    /// single block this performs exactly the operations of [`gram_apply`].
    ///
    /// [`gram_apply`]: GramBlocks::gram_apply
    pub fn block_gram_apply(&self, i: usize, mu: f64, v: &[f64]) -> Vec<f64> {
        let range = self.partition.range(i);
        let w = map_indexed(self.dim, self.dim * range.len(), |k| {
            let b = self.partition.block_of(k);
            let col = self.column(b, k - self.partition.offsets()[b]);
            dot(&col[range.clone()], v)
        });
        let mut out = self.block_t_matvec(i, &w);
        scale(mu, &mut out);
        out
    }

    /// `μ AᵀA v`.
    pub fn gram_apply(&self, mu: f64, v: &[f64]) -> Vec<f64> {
        let w = self.t_matvec(v); // A symmetric: A v = Aᵀ v
        let mut out = self.t_matvec(&w);
        scale(mu, &mut out);
        out
    }
}

/// Computes the Gram column blocks `A_i = Xᵀ X_i`.
///
/// Entry `(k, j)` accumulates `x_rj * x_rk` over rows `r` in ascending
/// order, so the reassembled matrix is exactly symmetric and identical for
/// every partition of the same `X`.
pub fn gram_blocks(x: &DesignMatrix, partition: &Partition) -> Result<GramBlocks> {
    let p = x.cols();
    if partition.dim() != p {
        return Err(Error::dim(format!(
            "partition covers {} columns, design has {p}",
            partition.dim()
        )));
    }
    const TILE: usize = 16;
    let blocks = (0..partition.block_count())
        .into_par_iter()
        .map(|i| {
            let range = partition.range(i);
            let width = range.len();
            let mut block = vec![0.0; width * p];
            let mut start = 0;
            while start < width {
                let end = (start + TILE).min(width);
                let tile = &mut block[start * p..end * p];
                for r in 0..x.rows() {
                    let row = x.row(r);
                    for (jj, acc) in tile.chunks_exact_mut(p).enumerate() {
                        let coef = row[range.start + start + jj];
                        if coef != 0.0 {
                            axpy(coef, row, acc);
                        }
                    }
                }
                start = end;
            }
            block
        })
        .collect();
    Ok(GramBlocks {
        partition: partition.clone(),
        dim: p,
        blocks,
    })
}

/// `Σ_i A_i β_i` with the block partial products reduced in ascending block
/// order.
pub fn blocked_matvec(g: &GramBlocks, beta_blocks: &[&[f64]]) -> Result<Vec<f64>> {
    if beta_blocks.len() != g.block_count() {
        return Err(Error::dim(format!(
            "{} coefficient blocks supplied for {} gram blocks",
            beta_blocks.len(),
            g.block_count()
        )));
    }
    for (i, b) in beta_blocks.iter().enumerate() {
        if b.len() != g.partition.range(i).len() {
            return Err(Error::dim(format!(
                "block {i} has {} coefficients, expected {}",
                b.len(),
                g.partition.range(i).len()
            )));
        }
    }
    Ok(blocked_matvec_unchecked(g, beta_blocks))
}

pub(crate) fn blocked_matvec_unchecked(g: &GramBlocks, beta_blocks: &[&[f64]]) -> Vec<f64> {
    let partials = map_indexed(beta_blocks.len(), g.dim * g.dim, |i| {
        g.block_matvec(i, beta_blocks[i])
    });
    reduce_in_order(partials, g.dim)
}

/// Below this many flops per call the per-block work runs on the calling
/// thread; task dispatch would cost more than it saves.
const PAR_MIN_WORK: usize = 1 << 14;

/// Maps `f` over `0..count` in parallel when `work` is large enough. The
/// output order, and therefore every result, is the same either way.
pub(crate) fn map_indexed<T, F>(count: usize, work: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if work < PAR_MIN_WORK {
        (0..count).map(f).collect()
    } else {
        (0..count).into_par_iter().map(f).collect()
    }
}

/// Sums vectors in their given order.
pub(crate) fn reduce_in_order(parts: Vec<Vec<f64>>, dim: usize) -> Vec<f64> {
    let mut it = parts.into_iter();
    let mut acc = it.next().unwrap_or_else(|| vec![0.0; dim]);
    for part in it {
        for (a, b) in acc.iter_mut().zip(&part) {
            *a += b;
        }
    }
    acc
}

/// Power iteration for the largest eigenvalue of a symmetric positive
/// semidefinite operator.
///
/// Starts from the normalized all-ones vector and stops once the Rayleigh
/// quotient changes by less than `tol` relative to its magnitude. If the
/// iterate stays at zero for five consecutive steps, the method restarts
/// once from a seeded random vector.
pub fn power_method_max_eigen<F>(apply: F, dim: usize, tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if dim == 0 {
        return Err(Error::arg("power method on a zero-dimensional operator"));
    }
    if !(tol > 0.0) {
        return Err(Error::arg(format!(
            "power method tolerance must be > 0, got {tol}"
        )));
    }
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut estimate = 0.0_f64;
    let mut stalled = 0;
    let mut restarted = false;
    for _ in 0..max_iter.max(1) {
        let w = apply(&v);
        if w.len() != dim {
            return Err(Error::dim("power method operator changed dimension"));
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(
                "power method operator returned a non-finite value".into(),
            ));
        }
        let rayleigh = dot(&v, &w);
        let norm = norm2(&w);
        let change = (rayleigh - estimate).abs();
        estimate = rayleigh;
        if norm == 0.0 || (rayleigh == 0.0 && change < f64::EPSILON) {
            stalled += 1;
            if stalled >= 5 {
                if restarted {
                    return Ok(0.0);
                }
                restarted = true;
                stalled = 0;
                let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
                v = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
                let nv = norm2(&v);
                scale(1.0 / nv, &mut v);
            }
            continue;
        }
        stalled = 0;
        v = w;
        scale(1.0 / norm, &mut v);
        if change <= tol * rayleigh.abs() {
            break;
        }
    }
    Ok(estimate)
}

/// Inner product with eight interleaved partial sums, combined in a fixed
/// order so the result is reproducible while still vectorizing.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, p: usize, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DesignMatrix::new(
            n,
            p,
            (0..n * p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
        )
        .unwrap()
    }

    fn naive_gram(x: &DesignMatrix) -> Vec<f64> {
        let p = x.cols();
        let mut a = vec![0.0; p * p];
        for j in 0..p {
            for k in 0..p {
                let mut s = 0.0;
                for r in 0..x.rows() {
                    s += x.get(r, j) * x.get(r, k);
                }
                a[j * p + k] = s;
            }
        }
        a
    }

    #[test]
    fn identity_gram_is_identity() {
        let x = DesignMatrix::identity(3);
        let g = gram_blocks(&x, &Partition::even(3, 1).unwrap()).unwrap();
        assert_eq!(g.to_dense(), DesignMatrix::identity(3).data());
    }

    #[test]
    fn gram_single_block_is_symmetric() {
        let x = random_matrix(7, 5, 1);
        let a = gram_blocks(&x, &Partition::even(5, 1).unwrap())
            .unwrap()
            .to_dense();
        for j in 0..5 {
            for k in 0..5 {
                assert_eq!(a[j * 5 + k], a[k * 5 + j]);
            }
        }
    }

    #[test]
    fn gram_blocks_match_naive_product() {
        let x = random_matrix(6, 4, 2);
        let naive = naive_gram(&x);
        let g = gram_blocks(&x, &Partition::even(4, 2).unwrap()).unwrap();
        for (a, b) in g.to_dense().iter().zip(&naive) {
            assert!((a - b).abs() <= 1e-12);
        }
        // block 1 column 0 is column 2 of A
        for k in 0..4 {
            assert!((g.get(1, k, 0) - naive[k * 4 + 2]).abs() <= 1e-12);
        }
    }

    #[test]
    fn gram_rejects_partition_mismatch() {
        let x = random_matrix(3, 4, 3);
        let err = gram_blocks(&x, &Partition::even(5, 2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::even(3, 4).is_err());
        assert!(Partition::even(3, 0).is_err());
        assert!(Partition::from_sizes(&[2, 0, 1]).is_err());
        let p = Partition::even(10, 3).unwrap();
        assert_eq!(p.sizes(), vec![4, 3, 3]);
        assert_eq!(p.block_of(0), 0);
        assert_eq!(p.block_of(4), 1);
        assert_eq!(p.block_of(9), 2);
    }

    #[test]
    fn blocked_matvec_zero_and_single_block() {
        let x = random_matrix(8, 5, 4);
        let part = Partition::even(5, 1).unwrap();
        let g = gram_blocks(&x, &part).unwrap();
        let zero = vec![0.0; 5];
        assert_eq!(blocked_matvec(&g, &part.split(&zero)).unwrap(), vec![0.0; 5]);

        let beta = [0.3, -1.0, 2.0, 0.0, 0.5];
        let got = blocked_matvec(&g, &part.split(&beta)).unwrap();
        let a = g.to_dense();
        for k in 0..5 {
            let direct: f64 = (0..5).map(|j| a[k * 5 + j] * beta[j]).sum();
            assert!((got[k] - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn blocked_matvec_three_blocks_matches_unblocked() {
        let x = random_matrix(9, 7, 5);
        let beta: Vec<f64> = (0..7).map(|j| (j as f64 - 3.0) * 0.7).collect();
        let one = Partition::even(7, 1).unwrap();
        let three = Partition::even(7, 3).unwrap();
        let g1 = gram_blocks(&x, &one).unwrap();
        let g3 = gram_blocks(&x, &three).unwrap();
        let a = blocked_matvec(&g1, &one.split(&beta)).unwrap();
        let b = blocked_matvec(&g3, &three.split(&beta)).unwrap();
        let scale = norm_inf(&a);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn blocked_matvec_shape_errors() {
        let x = random_matrix(4, 4, 6);
        let part = Partition::even(4, 2).unwrap();
        let g = gram_blocks(&x, &part).unwrap();
        let a = [1.0, 2.0];
        let b = [1.0];
        assert!(blocked_matvec(&g, &[&a[..]]).is_err());
        assert!(blocked_matvec(&g, &[&a[..], &b[..]]).is_err());
    }

    #[test]
    fn power_method_identity_and_diagonal() {
        let ident = power_method_max_eigen(|v| v.to_vec(), 4, 1e-12, 100).unwrap();
        assert!((ident - 1.0).abs() < 1e-12);

        // A = diag(1, 2, 3), operator AᵀA = diag(1, 4, 9)
        let d = [1.0, 4.0, 9.0];
        let est = power_method_max_eigen(
            |v| v.iter().zip(&d).map(|(a, b)| a * b).collect(),
            3,
            1e-14,
            10_000,
        )
        .unwrap();
        assert!((est - 9.0).abs() < 1e-9);
    }

    #[test]
    fn power_method_zero_operator_returns_zero() {
        let est = power_method_max_eigen(|v| vec![0.0; v.len()], 3, 1e-6, 100).unwrap();
        assert_eq!(est, 0.0);
    }

    #[test]
    fn power_method_rejects_non_finite() {
        let err = power_method_max_eigen(|v| vec![f64::NAN; v.len()], 3, 1e-6, 10).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn power_method_restarts_when_start_is_in_kernel() {
        // diag(1, -1) ⊗ ... : the operator [[1,-1],[-1,1]] kills the ones vector
        let est = power_method_max_eigen(|v| vec![v[0] - v[1], v[1] - v[0]], 2, 1e-12, 1000).unwrap();
        assert!((est - 2.0).abs() < 1e-9);
    }

    #[test]
    fn design_matrix_rejects_bad_input() {
        assert!(DesignMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DesignMatrix::new(0, 2, vec![]).is_err());
        assert!(matches!(
            DesignMatrix::new(1, 2, vec![1.0, f64::INFINITY]),
            Err(Error::Data(_))
        ));
    }
}
