//! Sparse matrices and linear solves.
//!
//! Matrices are assembled from triplets into CSR. Square systems go to a
//! sparse LU factorization up to [`DIRECT_LIMIT`] unknowns and to a
//! Jacobi-preconditioned BiCGSTAB iteration beyond that.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Largest system handed to the direct factorization.
pub const DIRECT_LIMIT: usize = 250_000;

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix, summing duplicate entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of range");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }

        // sort each row and merge duplicates
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|e| e.0);
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
        SparseMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).filter(|&(j, _)| j == c).map(|(_, v)| v).sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        SparseMatrix::from_triplets(self.ncols, self.nrows, &t)
    }

    /// Restriction to the rows and columns listed in `keep` (in that order).
    pub fn submatrix(&self, keep: &[usize]) -> SparseMatrix {
        let mut map = vec![usize::MAX; self.ncols];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut t = Vec::new();
        for (k, &r) in keep.iter().enumerate() {
            for (c, v) in self.row(r) {
                if map[c] != usize::MAX {
                    t.push((k, map[c], v));
                }
            }
        }
        SparseMatrix::from_triplets(keep.len(), keep.len(), &t)
    }

    /// `a·self + b·other`, both of the same shape.
    pub fn combine(&self, a: f64, other: &SparseMatrix, b: f64) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            t.extend(self.row(r).map(|(c, v)| (r, c, a * v)));
            t.extend(other.row(r).map(|(c, v)| (r, c, b * v)));
        }
        SparseMatrix::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn scaled(&self, a: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= a);
        m
    }

    /// Adds `shift` to every diagonal entry (inserting missing ones).
    pub fn shifted(&self, shift: f64) -> SparseMatrix {
        let id = SparseMatrix::identity(self.nrows);
        self.combine(1.0, &id, shift)
    }

    pub fn identity(n: usize) -> SparseMatrix {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.get(r, r)).collect()
    }

    /// Max absolute difference between the matrix and its transpose.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let d = self.combine(1.0, &t, -1.0);
        d.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Writes `row col value` lines, one per stored entry, 0-based.
    pub fn write_triplets<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(w, "{r} {c} {v:.16e}")?;
            }
        }
        Ok(())
    }
}

/// A factored square matrix that can solve repeatedly.
pub enum Factorization {
    Direct(faer::sparse::linalg::solvers::Lu<usize, f64>, usize),
    Iterative(SparseMatrix),
}

impl Factorization {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::LinearSolver("matrix is not square".into()));
        }
        if a.nrows > DIRECT_LIMIT {
            return Ok(Factorization::Iterative(a.clone()));
        }
        let mut t = Vec::with_capacity(a.nnz());
        for r in 0..a.nrows {
            for (c, v) in a.row(r) {
                t.push(Triplet::new(r, c, v));
            }
        }
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &t)
            .map_err(|e| Error::LinearSolver(format!("assembly: {e:?}")))?;
        let lu = csc
            .sp_lu()
            .map_err(|e| Error::LinearSolver(format!("LU factorization: {e:?}")))?;
        Ok(Factorization::Direct(lu, a.nrows))
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Factorization::Direct(lu, n) => {
                assert_eq!(b.len(), *n);
                let rhs = Mat::from_fn(*n, 1, |i, _| b[i]);
                let x = lu.solve(&rhs);
                let out: Vec<f64> = (0..*n).map(|i| x[(i, 0)]).collect();
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(Error::LinearSolver("singular matrix".into()));
                }
                Ok(out)
            }
            Factorization::Iterative(a) => bicgstab(a, b, 1e-10, 20_000),
        }
    }
}

/// One-shot solve of `a x = b`.
pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Factorization::new(a)?.solve(b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Jacobi-preconditioned BiCGSTAB to relative residual `tol`.
pub fn bicgstab(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 })
        .collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(x, d)| x * d).collect() };

    let bnorm = norm2(b).max(1e-300);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for _ in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = precond(&p);
        v = a.matvec(&y);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<f64> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        if norm2(&s) / bnorm < tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(x);
        }
        let z = precond(&s);
        let t = a.matvec(&z);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) / bnorm < tol {
            return Ok(x);
        }
    }
    let res: Vec<f64> = a.matvec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    if norm2(&res) / bnorm < tol {
        Ok(x)
    } else {
        Err(Error::LinearSolver(format!(
            "BiCGSTAB stalled at relative residual {:.3e}",
            norm2(&res) / bnorm
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.5), (1, 0, -1.0)]);
        assert_eq!(m.get(0, 1), 3.5);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn direct_and_iterative_agree() {
        let a = laplace_1d(200).shifted(0.1);
        let b: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
        let x1 = solve(&a, &b).unwrap();
        let x2 = bicgstab(&a, &b, 1e-12, 5000).unwrap();
        let diff = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
        let r: Vec<f64> = a.matvec(&x1).iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!(norm_inf(&r) < 1e-10);
    }

    #[test]
    fn submatrix_and_transpose() {
        let a = laplace_1d(5);
        let s = a.submatrix(&[1, 2, 3]);
        assert_eq!(s.nrows, 3);
        assert_eq!(s.get(0, 1), -1.0);
        assert_eq!(a.asymmetry(), 0.0);
        let ns = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]);
        assert_eq!(ns.transpose().get(1, 0), 1.0);
        assert_eq!(ns.asymmetry(), 1.0);
    }
}
