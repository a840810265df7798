//! Small dense linear algebra kernels.
//!
//! Everything here works on row-major storage and is sized for the per-slice
//! problems of the reconstruction (a few hundred rows at most), where a
//! cache-friendly loop beats pulling in a general-purpose matrix library.

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Real};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
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
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x = Aᵀ y`
    pub fn tr_mul_vec_into(&self, y: &[T], x: &mut [T]) {
        assert_eq!(y.len(), self.rows);
        assert_eq!(x.len(), self.cols);
        x.iter_mut().for_each(|v| *v = T::zero());
        for (i, &yi) in y.iter().enumerate() {
            if yi != T::zero() {
                axpy(yi, self.row(i), x);
            }
        }
    }

    pub fn tr_mul_vec(&self, y: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.cols];
        self.tr_mul_vec_into(y, &mut x);
        x
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a != T::zero() {
                    axpy(a, other.row(k), orow);
                }
            }
        }
        Ok(out)
    }

    /// Lower triangle of `A Aᵀ` mirrored into a full symmetric matrix.
    pub fn gram_rows(&self) -> Self {
        let m = self.rows;
        let mut g = Self::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Select a subset of columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                out[(i, k)] = self[(i, j)];
            }
        }
        out
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: DenseMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::Shape("Cholesky of a non-square matrix".into()));
        }
        let mut l = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                if i == j {
                    if !(s > T::zero()) {
                        return Err(Error::Numerical(format!(
                            "matrix not positive definite at pivot {i}"
                        )));
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &DenseMatrix<T> {
        &self.l
    }

    /// In place `b ← L⁻¹ b`.
    pub fn forward(&self, b: &mut [T]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        for i in 0..n {
            let s = b[i] - dot(&self.l.row(i)[..i], &b[..i]);
            b[i] = s / self.l[(i, i)];
        }
    }

    /// In place `b ← L⁻ᵀ b`.
    pub fn backward(&self, b: &mut [T]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        for i in (0..n).rev() {
            b[i] = b[i] / self.l[(i, i)];
            let bi = b[i];
            // column i of Lᵀ above the diagonal is row i of L left of it
            axpy(-bi, &self.l.row(i)[..i], &mut b[..i]);
        }
    }

    /// In place `b ← A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [T]) {
        self.forward(b);
        self.backward(b);
    }

    /// `L⁻¹ B` applied to the rows of `B` (i.e. whitening of a row space).
    pub fn forward_rows(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let mut q = b.clone();
        for i in 0..n {
            for j in 0..i {
                let lij = self.l[(i, j)];
                if lij != T::zero() {
                    let (done, rest) = q.data.split_at_mut(i * q.cols);
                    let rj = &done[j * q.cols..(j + 1) * q.cols];
                    axpy(-lij, rj, &mut rest[..q.cols]);
                }
            }
            let d = T::one() / self.l[(i, i)];
            q.row_mut(i).iter_mut().for_each(|v| *v = *v * d);
        }
        q
    }
}

/// Least-squares solution of `min ‖A x − b‖₂` via the normal equations.
///
/// Used for small active sets (OMP refits, exhaustive support search). A
/// rank-deficient `A` yields `Error::Numerical`.
pub fn least_squares<T: Real>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    if a.rows() != b.len() {
        return Err(Error::Shape(format!(
            "least squares: {} rows vs rhs of length {}",
            a.rows(),
            b.len()
        )));
    }
    let at = a.transpose();
    let g = at.gram_rows();
    let mut rhs = at.mul_vec(b);
    let ch = Cholesky::factor(&g)?;
    ch.solve_in_place(&mut rhs);
    Ok(rhs)
}

/// Conjugate gradient for a symmetric positive-definite operator.
///
/// Returns the number of iterations taken. `x` holds the initial guess on
/// entry.
pub fn conjugate_gradient<T: Real>(
    apply: impl Fn(&[T], &mut [T]),
    b: &[T],
    x: &mut [T],
    rel_tol: T,
    max_iters: usize,
) -> usize {
    let n = b.len();
    let mut r = vec![T::zero(); n];
    let mut ap = vec![T::zero(); n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return 0;
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..max_iters {
        if rr.sqrt() <= rel_tol * bnorm {
            return it;
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= T::zero() {
            return it;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    max_iters
}
