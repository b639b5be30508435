//! Compressed sparse row matrices and a banded LU direct solver.
//!
//! Both linear systems in this crate (exact policy evaluation and the P1
//! Galerkin system) come from structured grids numbered row by row, so their
//! bandwidth is about one grid row. Banded Gaussian elimination with partial
//! pivoting then costs `O(n * kl * (kl + ku))`.

use crate::error::{Error, Result};

/// Square sparse matrix in CSR layout with sorted, duplicate-free columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) out of range for n = {n}");
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..n {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|&(c, _)| c);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &triplets)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Lower and upper bandwidths `(kl, ku)`.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for r in 0..self.n {
            for (c, _) in self.row(r) {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    /// Maximum `|A - Aᵀ|` entry relative to the maximum `|A|` entry.
    pub fn asymmetry(&self) -> f64 {
        let mut max_abs = 0.0f64;
        let mut max_diff = 0.0f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                max_abs = max_abs.max(v.abs());
                max_diff = max_diff.max((v - self.get(c, r)).abs());
            }
        }
        if max_abs == 0.0 {
            0.0
        } else {
            max_diff / max_abs
        }
    }
}

/// LU factorization of a banded matrix with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    /// Width of the stored upper part: `kl + ku` after fill-in from pivoting.
    ku_fill: usize,
    /// Row `i` holds columns `i ..= i + ku_fill` of U.
    upper: Vec<f64>,
    /// Column `k` holds multipliers for rows `k+1 ..= k+kl`.
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let ku_fill = kl + ku;
        // working rows span columns i - kl ..= i + ku_fill
        let width = kl + ku_fill + 1;
        let mut work = vec![0.0; n * width];
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        for r in 0..n {
            for (c, v) in a.row(r) {
                work[idx(r, c)] = v;
            }
        }

        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE) * n as f64;
        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku_fill).min(n - 1);
            let mut p = k;
            let mut best = work[idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = work[idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::numerical(
                    format!("matrix is singular to working precision at pivot {k}"),
                    best,
                ));
            }
            pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    work.swap(idx(k, c), idx(p, c));
                }
            }
            let pivot = work[idx(k, k)];
            for r in k + 1..=last_row {
                let m = work[idx(r, k)] / pivot;
                lower[k * kl + (r - k - 1)] = m;
                if m != 0.0 {
                    for c in k + 1..=last_col {
                        work[idx(r, c)] -= m * work[idx(k, c)];
                    }
                }
            }
        }

        let mut upper = vec![0.0; n * (ku_fill + 1)];
        for i in 0..n {
            for c in i..=(i + ku_fill).min(n - 1) {
                upper[i * (ku_fill + 1) + (c - i)] = work[idx(i, c)];
            }
        }
        Ok(Self {
            n,
            kl,
            ku_fill,
            upper,
            lower,
            pivots,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for r in k + 1..=(k + self.kl).min(n - 1) {
                x[r] -= self.lower[k * self.kl + (r - k - 1)] * xk;
            }
        }
        let w = self.ku_fill + 1;
        for i in (0..n).rev() {
            let row = &self.upper[i * w..(i + 1) * w];
            let mut s = x[i];
            for c in i + 1..=(i + self.ku_fill).min(n - 1) {
                s -= row[c - i] * x[c];
            }
            x[i] = s / row[0];
        }
        x
    }
}

/// `‖A x − b‖∞`.
pub fn residual_inf(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    a.mul_vec(x)
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (ax, bi)| m.max((ax - bi).abs()))
}

/// Direct solve with one step of iterative refinement.
///
/// Returns the solution and the relative residual
/// `‖A x − b‖∞ / max(1, ‖b‖∞)`; fails if that exceeds `tol`.
pub fn solve_direct(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    let lu = BandLu::factor(a)?;
    let mut x = lu.solve(b);
    let r: Vec<f64> = b.iter().zip(a.mul_vec(&x)).map(|(bi, ax)| bi - ax).collect();
    let dx = lu.solve(&r);
    for (xi, d) in x.iter_mut().zip(dx) {
        *xi += d;
    }
    let b_norm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel = residual_inf(a, &x, b) / b_norm.max(1.0);
    if !(rel < tol) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("direct solve missed residual target", rel));
    }
    Ok((x, rel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triplets_are_summed_and_sorted() {
        let a = CsrMatrix::from_triplets(2, &[(0, 1, 1.0), (0, 0, 2.0), (0, 1, 0.5), (1, 1, 3.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 1.5);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.row(0).collect::<Vec<_>>(), vec![(0, 2.0), (1, 1.5)]);
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        let (x, res) = solve_direct(&a, &b, 1e-12).unwrap();
        assert_eq!(x, b);
        assert_eq!(res, 0.0);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 4.0)]);
        assert!(matches!(BandLu::factor(&a), Err(Error::Numerical { .. })));
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let a = CsrMatrix::from_triplets(3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 1.0)]);
        let b = [1.0, 2.0, 3.0];
        let (x, _) = solve_direct(&a, &b, 1e-12).unwrap();
        assert!(residual_inf(&a, &x, &b) < 1e-12);
    }

    #[test]
    fn random_banded_matches_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(n, kl, ku) in &[(30usize, 3usize, 5usize), (50, 7, 2), (12, 11, 11)] {
            let mut trip = Vec::new();
            let mut dense = DMatrix::<f64>::zeros(n, n);
            for r in 0..n {
                for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                    if rng.random_bool(0.7) || r == c {
                        let v: f64 = rng.random_range(-1.0..1.0);
                        trip.push((r, c, v));
                        dense[(r, c)] += v;
                    }
                }
            }
            let a = CsrMatrix::from_triplets(n, &trip);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let Some(expected) = dense.clone().lu().solve(&DVector::from_vec(b.clone())) else {
                continue;
            };
            let x = BandLu::factor(&a).unwrap().solve(&b);
            for i in 0..n {
                assert!((x[i] - expected[i]).abs() < 1e-8 * (1.0 + expected[i].abs()));
            }
        }
    }
}
