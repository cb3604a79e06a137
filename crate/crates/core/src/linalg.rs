//! Dense row-major matrices and the handful of factorizations the mapper and
//! the regression post-processing need: one-sided Jacobi SVD and Householder
//! QR least squares.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = out.row_mut(i);
            for (k, &aik) in a.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                for (oj, &bkj) in o.iter_mut().zip(other.row(k)) {
                    *oj += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            add_outer(&mut out, self.row(r), other.row(r), 1.0);
        }
        Ok(out)
    }

    /// Row vector times matrix: `x * self`, written into `out`.
    pub fn vec_mul_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, &xk) in x.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.row(k)) {
                *o += xk * w;
            }
        }
    }

    /// Largest absolute entry of `selfᵀ self − I`.
    pub fn orthogonality_error(&self) -> f64 {
        let gram = self.t_matmul(self).expect("square gram");
        let mut worst = 0.0f64;
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(libm::fabs(gram[(i, j)] - target));
            }
        }
        worst
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    /// Copies the listed rows into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `m += scale * aᵀ b` for row vectors `a`, `b`.
pub(crate) fn add_outer(m: &mut Matrix, a: &[f64], b: &[f64], scale: f64) {
    for (i, &ai) in a.iter().enumerate() {
        let s = scale * ai;
        if s == 0.0 {
            continue;
        }
        for (mij, &bj) in m.row_mut(i).iter_mut().zip(b) {
            *mij += s * bj;
        }
    }
}

/// Dot product with four independent accumulators; fixed summation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Singular value decomposition `A = U diag(σ) Vᵀ` of a square or tall matrix.
///
/// `u` is `m×n` with orthonormal columns (completed to an orthonormal set
/// when `A` is rank deficient), `v` is `n×n` orthogonal and `sigma` is sorted
/// in descending order. Signs are canonical: the largest-magnitude entry of
/// every column of `u` is non-negative.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
    pub sweeps: usize,
}

const JACOBI_EPS: f64 = 1e-15;
const MAX_SWEEPS: usize = 80;

/// One-sided Jacobi SVD.
pub fn svd(a: &Matrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::NonFinite {
            what: "SVD input".into(),
        });
    }
    if a.rows < a.cols {
        let t = svd(&a.transpose())?;
        // Aᵀ = U Σ Vᵀ  =>  A = V Σ Uᵀ; only the leading `rows` columns of V pair
        // with non-trivial singular values.
        let m = a.rows;
        let n = a.cols;
        let mut u = Matrix::zeros(m, m);
        let mut v = Matrix::zeros(n, n);
        for i in 0..m {
            for j in 0..m {
                u[(i, j)] = t.v[(i, j)];
            }
        }
        // Build V (n×n) from t.u (n×m), completed to an orthogonal basis.
        let mut cols: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| t.u[(i, j)]).collect()).collect();
        complete_basis(&mut cols, n);
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n {
                v[(i, j)] = c[i];
            }
        }
        let mut out = Svd {
            u,
            sigma: t.sigma,
            v,
            sweeps: t.sweeps,
        };
        canonicalize_signs(&mut out);
        return Ok(out);
    }

    let m = a.rows;
    let n = a.cols;
    // Work on columns stored contiguously: w[j] = column j of A, vt[j] = column j of V.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut vt: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut sweeps = 0;
    let mut last_off = 0.0;
    let mut converged = n < 2;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        last_off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let rel = libm::fabs(gamma) / libm::sqrt(alpha * beta);
                last_off = f64::max(last_off, rel);
                if rel <= JACOBI_EPS {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut vt, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        let norms: Vec<f64> = w.iter().map(|c| norm(c)).collect();
        let max = norms.iter().cloned().fold(0.0, f64::max);
        let min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
        return Err(Error::SvdNoConvergence {
            sweeps,
            off_diagonal: last_off,
            condition: if min > 0.0 { max / min } else { f64::INFINITY },
        });
    }

    let mut order: Vec<(usize, f64)> = w.iter().map(|c| norm(c)).enumerate().collect();
    // Descending by value, stable on index.
    order.sort_by(|x, y| {
        y.1.partial_cmp(&x.1)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(x.0.cmp(&y.0))
    });
    let scale = order.first().map_or(0.0, |o| o.1);
    let tiny = scale * (m.max(n) as f64) * f64::EPSILON;

    let mut sigma = Vec::with_capacity(n);
    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut vcols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut rank = 0;
    for &(j, s) in &order {
        if s > tiny && s > 0.0 {
            ucols.push(w[j].iter().map(|x| x / s).collect());
            sigma.push(s);
            rank += 1;
        } else {
            sigma.push(0.0);
        }
        vcols.push(vt[j].clone());
    }
    complete_basis(&mut ucols, m);
    ucols.truncate(n);
    debug_assert!(rank <= n);

    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..m {
            u[(i, j)] = ucols[j][i];
        }
        for i in 0..n {
            v[(i, j)] = vcols[j][i];
        }
    }
    let mut out = Svd { u, sigma, v, sweeps };
    canonicalize_signs(&mut out);
    Ok(out)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Extends `cols` (orthonormal vectors of length `dim`) to `dim` orthonormal
/// vectors by Gram-Schmidt against the standard basis, in index order.
fn complete_basis(cols: &mut Vec<Vec<f64>>, dim: usize) {
    let mut k = 0;
    while cols.len() < dim && k < dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        k += 1;
        // Two passes of classical Gram-Schmidt for numerical orthogonality.
        for _ in 0..2 {
            for c in cols.iter() {
                let proj = dot(&e, c);
                for (ei, ci) in e.iter_mut().zip(c) {
                    *ei -= proj * ci;
                }
            }
        }
        let nrm = norm(&e);
        if nrm > 1e-8 {
            e.iter_mut().for_each(|x| *x /= nrm);
            cols.push(e);
        }
    }
}

fn canonicalize_signs(svd: &mut Svd) {
    let m = svd.u.rows;
    let n = svd.u.cols;
    for j in 0..n {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..m {
            let a = libm::fabs(svd.u[(i, j)]);
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if svd.u[(best, j)] < 0.0 {
            for i in 0..m {
                svd.u[(i, j)] = -svd.u[(i, j)];
            }
            for i in 0..svd.v.rows {
                svd.v[(i, j)] = -svd.v[(i, j)];
            }
        }
    }
}

/// Householder QR of a tall matrix: returns (Householder vectors, R diagonal
/// and upper triangle) packed for [`qr_solve`].
struct Qr {
    m: usize,
    n: usize,
    // Column-major copy of the factored matrix.
    cols: Vec<Vec<f64>>,
    rdiag: Vec<f64>,
}

fn qr_factor(a: &Matrix) -> Qr {
    let m = a.rows;
    let n = a.cols;
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut rdiag = vec![0.0; n];
    for k in 0..n {
        let nrm = libm::sqrt(cols[k][k..].iter().map(|x| x * x).sum::<f64>());
        if nrm != 0.0 {
            let nrm = if cols[k][k] < 0.0 { -nrm } else { nrm };
            for x in cols[k][k..].iter_mut() {
                *x /= nrm;
            }
            cols[k][k] += 1.0;
            let (head, tail) = cols.split_at_mut(k + 1);
            let hk = &head[k];
            for cj in tail.iter_mut() {
                let s: f64 = -(hk[k..].iter().zip(&cj[k..]).map(|(a, b)| a * b).sum::<f64>()) / hk[k];
                for (x, h) in cj[k..].iter_mut().zip(&hk[k..]) {
                    *x += s * h;
                }
            }
            rdiag[k] = -nrm;
        }
    }
    Qr { m, n, cols, rdiag }
}

impl Qr {
    fn is_full_rank(&self, rel_tol: f64) -> bool {
        let max = self.rdiag.iter().map(|d| libm::fabs(*d)).fold(0.0, f64::max);
        max > 0.0 && self.rdiag.iter().all(|d| libm::fabs(*d) > rel_tol * max)
    }

    /// Least-squares solution of `A X = B` column by column.
    fn solve(&self, b: &Matrix) -> Matrix {
        let mut x = Matrix::zeros(self.n, b.cols);
        for c in 0..b.cols {
            let mut y: Vec<f64> = (0..self.m).map(|i| b[(i, c)]).collect();
            for k in 0..self.n {
                let hk = &self.cols[k];
                if hk[k] == 0.0 {
                    continue;
                }
                let s: f64 = -(hk[k..].iter().zip(&y[k..]).map(|(a, b)| a * b).sum::<f64>()) / hk[k];
                for (yi, h) in y[k..].iter_mut().zip(&hk[k..]) {
                    *yi += s * h;
                }
            }
            for k in (0..self.n).rev() {
                let mut v = y[k];
                for j in (k + 1)..self.n {
                    v -= self.cols[j][k] * x[(j, c)];
                }
                x[(k, c)] = v / self.rdiag[k];
            }
        }
        x
    }
}

/// Outcome of [`least_squares`].
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: Matrix,
    /// Ridge strength actually applied (0 when the plain problem was well posed).
    pub ridge: f64,
}

/// Relative rank threshold on the diagonal of R below which the problem is
/// treated as degenerate.
const RANK_TOL: f64 = 1e-10;

/// Solves `min ‖A X − B‖_F`. When `A` has fewer rows than columns or is
/// numerically rank deficient, solves the ridge problem
/// `min ‖A X − B‖² + λ‖X‖²` instead, with `λ = ridge_fallback`.
pub fn least_squares(a: &Matrix, b: &Matrix, ridge_fallback: f64) -> Result<LeastSquares> {
    if a.rows != b.rows {
        return Err(Error::DimensionMismatch {
            expected: a.rows,
            found: b.rows,
        });
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite {
            what: "least-squares input".into(),
        });
    }
    if a.rows >= a.cols {
        let qr = qr_factor(a);
        if qr.is_full_rank(RANK_TOL) {
            return Ok(LeastSquares {
                solution: qr.solve(b),
                ridge: 0.0,
            });
        }
    }
    // Augmented system [A; sqrt(λ) I] X = [B; 0].
    let n = a.cols;
    let lam = libm::sqrt(ridge_fallback);
    let mut aug = Matrix::zeros(a.rows + n, n);
    let mut baug = Matrix::zeros(a.rows + n, b.cols);
    for i in 0..a.rows {
        aug.row_mut(i).copy_from_slice(a.row(i));
        baug.row_mut(i).copy_from_slice(b.row(i));
    }
    for j in 0..n {
        aug[(a.rows + j, j)] = lam;
    }
    let qr = qr_factor(&aug);
    Ok(LeastSquares {
        solution: qr.solve(&baug),
        ridge: ridge_fallback,
    })
}

/// Orthogonal factor of the QR decomposition of a square matrix, with signs
/// fixed so that R has a non-negative diagonal. Applied to a matrix of i.i.d.
/// Gaussians this yields a Haar-distributed random orthogonal matrix.
pub fn orthogonal_factor(a: &Matrix) -> Result<Matrix> {
    if a.rows != a.cols {
        return Err(Error::DimensionMismatch {
            expected: a.rows,
            found: a.cols,
        });
    }
    let n = a.rows;
    // Modified Gram-Schmidt over the columns.
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut c: Vec<f64> = (0..n).map(|i| a[(i, j)]).collect();
        for _ in 0..2 {
            for prev in &q {
                let p = dot(&c, prev);
                for (x, y) in c.iter_mut().zip(prev) {
                    *x -= p * y;
                }
            }
        }
        let nrm = norm(&c);
        if nrm < 1e-12 {
            return Err(Error::InvalidArgument("matrix is singular".into()));
        }
        c.iter_mut().for_each(|x| *x /= nrm);
        q.push(c);
    }
    let mut out = Matrix::zeros(n, n);
    for (j, c) in q.iter().enumerate() {
        for i in 0..n {
            out[(i, j)] = c[i];
        }
    }
    Ok(out)
}
