//! Small dense linear algebra kernels: one-sided Jacobi SVD, pivoted
//! thin QR via modified Gram-Schmidt, nullspace bases, and LU solves.
//! Everything targets desk scale (dimensions well below 100); all
//! operations are pure and reentrant.

use crate::error::{Error, Result};
use crate::tol;

// ── DenseMatrix ──────────────────────────────────────────────────────

/// Row-major dense matrix of finite f64 entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Build from row-major data. Rejects empty shapes, shape/data
    /// mismatches, and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix shape {rows}x{cols} must have at least one row and column"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "matrix shape {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from nested row slices; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("rows have inconsistent lengths".into()));
        }
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `A x` for a length-cols vector.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += row[j] * x[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `A^T x` for a length-rows vector.
    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "t_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            let xi = x[i];
            for j in 0..self.cols {
                out[j] += row[j] * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    /// Stack `self` on top of one extra row.
    pub fn with_appended_row(&self, row: &[f64]) -> Result<DenseMatrix> {
        if row.len() != self.cols {
            return Err(Error::InvalidInput("appended row has wrong length".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(row);
        DenseMatrix::new(self.rows + 1, self.cols, data)
    }

    /// Keep only the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, keep.len());
        for i in 0..self.rows {
            for (jj, &j) in keep.iter().enumerate() {
                out.set(i, jj, self.get(i, j));
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

// ── vector helpers ───────────────────────────────────────────────────

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

// ── SVD via one-sided Jacobi ─────────────────────────────────────────

/// Singular values (non-increasing) and numerical rank of a matrix.
#[derive(Clone, Debug)]
pub struct SvdSummary {
    singular_values: Vec<f64>,
    rank: usize,
}

impl SvdSummary {
    /// All min(rows, cols) singular values, non-increasing.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Count of singular values above the rank tolerance.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Largest singular value, i.e. the operator norm.
    pub fn op_norm(&self) -> f64 {
        self.singular_values[0]
    }

    /// Smallest singular value among the first min(rows, cols).
    pub fn sigma_min(&self) -> f64 {
        *self.singular_values.last().unwrap()
    }
}

/// Default rank cutoff for a matrix with largest singular value sigma1.
pub fn default_rank_tol(rows: usize, cols: usize, sigma1: f64) -> f64 {
    rows.max(cols) as f64 * sigma1 * tol::RANK_REL
}

/// One-sided Jacobi on the columns of A: returns (column norms sorted
/// non-increasing, accumulated right rotations V) with `A V = W`, the
/// columns of W mutually orthogonal and `||w_j|| = sigma_j`. V is
/// orthogonal to machine precision by construction.
fn one_sided_jacobi(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let m = a.rows();
    let n = a.cols();
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(n);
    // convergence threshold on the normalized off-diagonal Gram entries
    let eps = 1e-15;
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut aii = 0.0;
                let mut ajj = 0.0;
                let mut aij = 0.0;
                for k in 0..m {
                    let wi = w.get(k, i);
                    let wj = w.get(k, j);
                    aii += wi * wi;
                    ajj += wj * wj;
                    aij += wi * wj;
                }
                if aij.abs() <= eps * (aii * ajj).sqrt() || aii == 0.0 || ajj == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (ajj - aii) / (2.0 * aij);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for k in 0..m {
                    let wi = w.get(k, i);
                    let wj = w.get(k, j);
                    w.set(k, i, cs * wi - sn * wj);
                    w.set(k, j, sn * wi + cs * wj);
                }
                for k in 0..n {
                    let vi = v.get(k, i);
                    let vj = v.get(k, j);
                    v.set(k, i, cs * vi - sn * vj);
                    v.set(k, j, sn * vi + cs * vj);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut norms: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let s: f64 = (0..m).map(|k| w.get(k, j).powi(2)).sum();
            (s.sqrt(), j)
        })
        .collect();
    norms.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let perm: Vec<usize> = norms.iter().map(|&(_, j)| j).collect();
    let sigma: Vec<f64> = norms.iter().map(|&(s, _)| s).collect();
    let v_sorted = v.select_columns(&perm);
    (sigma, v_sorted)
}

/// Singular values and numerical rank. `tol` is the absolute cutoff a
/// singular value must exceed to count toward the rank; pass a
/// non-positive value to use `default_rank_tol`.
pub fn svd_summary(a: &DenseMatrix, tol: f64) -> Result<SvdSummary> {
    let (sigma_all, _) = one_sided_jacobi(a);
    let k = a.rows().min(a.cols());
    let singular_values: Vec<f64> = sigma_all[..k].to_vec();
    let cutoff = if tol > 0.0 {
        tol
    } else {
        default_rank_tol(a.rows(), a.cols(), singular_values[0])
    };
    let rank = singular_values.iter().filter(|&&s| s > cutoff).count();
    Ok(SvdSummary { singular_values, rank })
}

// ── thin QR via pivoted modified Gram-Schmidt ────────────────────────

/// Thin QR with rank truncation: Q (rows x r) has orthonormal columns
/// spanning the column space of A, and R = Q^T A (r x cols) satisfies
/// `Q R = A` up to the rank tolerance. Columns are selected greedily by
/// largest residual norm with one reorthogonalization pass, so R is
/// upper triangular under that pivot order (and in the original order
/// whenever no pivoting occurs).
///
/// Errors on the zero matrix, which admits no orthonormal factor.
pub fn thin_qr(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let m = a.rows();
    let n = a.cols();
    let scale = a.max_abs();
    if scale == 0.0 {
        return Err(Error::InvalidInput("thin_qr of the zero matrix".into()));
    }
    // residual columns, orthogonalized in place
    let mut work: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut q_cols: Vec<Vec<f64>> = Vec::new();
    let cutoff = default_rank_tol(m, n, a.frobenius_norm());
    while q_cols.len() < m.min(n) {
        let (pick, &best) = match remaining
            .iter()
            .enumerate()
            .max_by(|(_, &i), (_, &j)| norm2(&work[i]).partial_cmp(&norm2(&work[j])).unwrap())
        {
            Some(p) => p,
            None => break,
        };
        let best_norm = norm2(&work[best]);
        if best_norm <= cutoff {
            break;
        }
        let mut q = work[best].clone();
        // reorthogonalization pass: MGS residuals can retain O(eps*kappa)
        // components along earlier directions
        for prev in &q_cols {
            let c = dot(&q, prev);
            for k in 0..m {
                q[k] -= c * prev[k];
            }
        }
        let nq = norm2(&q);
        if nq <= cutoff {
            remaining.remove(pick);
            continue;
        }
        for x in q.iter_mut() {
            *x /= nq;
        }
        remaining.remove(pick);
        for &j in &remaining {
            let c = dot(&work[j], &q);
            for k in 0..m {
                work[j][k] -= c * q[k];
            }
        }
        q_cols.push(q);
    }
    let r_rank = q_cols.len();
    if r_rank == 0 {
        return Err(Error::InvalidInput("thin_qr found no columns above tolerance".into()));
    }
    let mut q = DenseMatrix::zeros(m, r_rank);
    for (j, col) in q_cols.iter().enumerate() {
        for i in 0..m {
            q.set(i, j, col[i]);
        }
    }
    // R = Q^T A reproduces A exactly on the captured column space
    let r = q.transpose().matmul(a);
    Ok((q, r))
}

// ── nullspace ────────────────────────────────────────────────────────

/// Orthonormal basis of Null(A) as an `a.cols() x (cols - rank)` matrix
/// (zero columns if the nullspace is trivial). Columns come from the
/// accumulated Jacobi rotations, so `B^T B = I` holds to machine
/// precision and `||A B||_max <= tol * ||A||_op` by construction.
pub fn nullspace_basis(a: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    let n = a.cols();
    let (sigma, v) = one_sided_jacobi(a);
    let cutoff = if tol > 0.0 { tol } else { default_rank_tol(a.rows(), n, sigma[0]) };
    let rank = sigma.iter().filter(|&&s| s > cutoff).count();
    let keep: Vec<usize> = (rank..n).collect();
    Ok(v.select_columns(&keep))
}

/// Apply the orthogonal projector onto Null(A) given its basis:
/// `P v = B (B^T v)`.
pub fn nullspace_project(basis: &DenseMatrix, v: &[f64]) -> Vec<f64> {
    if basis.cols() == 0 {
        return vec![0.0; v.len()];
    }
    let w = basis.t_matvec(v);
    basis.matvec(&w)
}

// ── LU factorization ─────────────────────────────────────────────────

/// Partial-pivot LU of a square matrix, reusable across right-hand
/// sides. Dimensions here stay tiny, so no blocking.
pub struct LuFactor {
    lu: DenseMatrix,
    piv: Vec<usize>,
}

impl LuFactor {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::InvalidInput("LU needs a square matrix".into()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu.get(k, k).abs();
            for i in (k + 1)..n {
                let v = lu.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Numerical("singular matrix in LU factorization".into()));
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, tmp);
                }
                piv.swap(k, p);
            }
            let pivot = lu.get(k, k);
            for i in (k + 1)..n {
                let factor = lu.get(i, k) / pivot;
                lu.set(i, k, factor);
                for j in (k + 1)..n {
                    let v = lu.get(i, j) - factor * lu.get(k, j);
                    lu.set(i, j, v);
                }
            }
        }
        Ok(Self { lu, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "LU solve dimension mismatch");
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc / self.lu.get(i, i);
        }
        x
    }
}

/// One-shot dense solve `A x = b`.
pub fn solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Ok(LuFactor::new(a)?.solve(b))
}

/// Least-squares solution of `A x = b` via the normal equations of A^T
/// (minimum-norm when A has full row rank): `x = A^T (A A^T)^{-1} b`.
pub fn min_norm_solution(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let at = a.transpose();
    let gram = a.matmul(&at);
    let lambda = solve(&gram, b)?;
    Ok(a.t_matvec(&lambda))
}
