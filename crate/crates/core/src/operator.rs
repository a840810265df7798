//! Linear operators as seen by the sparse-recovery solvers.

use crate::linalg::{Cholesky, DenseMatrix};
use crate::scalar::Real;

/// A linear map `A: R^n → R^m` with its adjoint.
pub trait LinearOperator<T: Real>: Send + Sync {
    /// Output dimension `m`.
    fn nrows(&self) -> usize;

    /// Input dimension `n`.
    fn ncols(&self) -> usize;

    /// `y = A x`
    fn apply(&self, x: &[T], y: &mut [T]);

    /// `x = Aᵀ y`
    fn apply_adjoint(&self, y: &[T], x: &mut [T]);

    /// Cholesky factorization of `A Aᵀ`, when the operator can provide one
    /// cheaply. Solvers fall back to conjugate gradients otherwise.
    fn gram_factor(&self) -> Option<GramFactor<T>> {
        None
    }

    /// The operator as an explicit matrix, if it is one.
    fn as_dense(&self) -> Option<&DenseMatrix<T>> {
        None
    }
}

/// Factor `L` of `A Aᵀ = L Lᵀ`, possibly block diagonal.
#[derive(Debug, Clone)]
pub enum GramFactor<T> {
    Dense(Cholesky<T>),
    BlockDiagonal(Vec<Cholesky<T>>),
}

impl<T: Real> GramFactor<T> {
    fn for_each_block(&self, v: &mut [T], mut f: impl FnMut(&Cholesky<T>, &mut [T])) {
        match self {
            GramFactor::Dense(ch) => f(ch, v),
            GramFactor::BlockDiagonal(blocks) => {
                let mut off = 0;
                for ch in blocks {
                    let d = ch.dim();
                    f(ch, &mut v[off..off + d]);
                    off += d;
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GramFactor::Dense(ch) => ch.dim(),
            GramFactor::BlockDiagonal(b) => b.iter().map(Cholesky::dim).sum(),
        }
    }

    /// `v ← L⁻¹ v`
    pub fn whiten(&self, v: &mut [T]) {
        self.for_each_block(v, |ch, s| ch.forward(s));
    }

    /// `v ← L⁻ᵀ v`
    pub fn whiten_adjoint(&self, v: &mut [T]) {
        self.for_each_block(v, |ch, s| ch.backward(s));
    }

    /// `v ← L v`
    pub fn color(&self, v: &mut [T]) {
        self.for_each_block(v, |ch, s| {
            let l = ch.lower();
            for i in (0..s.len()).rev() {
                s[i] = crate::scalar::dot(&l.row(i)[..=i], &s[..=i]);
            }
        });
    }

    /// Spectral norm of `L`, i.e. `sqrt(λ_max(A Aᵀ))`, by power iteration on
    /// each block.
    pub fn spectral_norm(&self) -> T {
        let mut best = T::zero();
        self.for_each_block(&mut vec![T::zero(); self.dim()], |ch, _| {
            let l = ch.lower();
            let n = ch.dim();
            let mut v: Vec<T> = (0..n).map(|i| T::one() + T::of(i as f64 * 1e-3)).collect();
            let mut lam = T::zero();
            for _ in 0..100 {
                // w = L Lᵀ v
                let mut w = vec![T::zero(); n];
                for i in 0..n {
                    for j in 0..=i {
                        w[j] = w[j] + l[(i, j)] * v[i];
                    }
                }
                let mut u = vec![T::zero(); n];
                for i in 0..n {
                    u[i] = crate::scalar::dot(&l.row(i)[..=i], &w[..=i]);
                }
                let nu = crate::scalar::norm2(&u);
                if nu == T::zero() {
                    break;
                }
                let next = nu / crate::scalar::norm2(&v);
                v = u.iter().map(|&x| x / nu).collect();
                let done = (next - lam).abs() <= T::of(1e-10) * next;
                lam = next;
                if done {
                    break;
                }
            }
            best = best.max(lam.sqrt());
        });
        best
    }
}

/// Dense matrix as an operator.
#[derive(Debug, Clone)]
pub struct DenseOperator<T> {
    pub matrix: DenseMatrix<T>,
}

impl<T: Real> DenseOperator<T> {
    pub fn new(matrix: DenseMatrix<T>) -> Self {
        Self { matrix }
    }
}

impl<T: Real> LinearOperator<T> for DenseOperator<T> {
    fn nrows(&self) -> usize {
        self.matrix.rows()
    }

    fn ncols(&self) -> usize {
        self.matrix.cols()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matrix.mul_vec_into(x, y);
    }

    fn apply_adjoint(&self, y: &[T], x: &mut [T]) {
        self.matrix.tr_mul_vec_into(y, x);
    }

    fn gram_factor(&self) -> Option<GramFactor<T>> {
        Cholesky::factor(&self.matrix.gram_rows())
            .ok()
            .map(GramFactor::Dense)
    }

    fn as_dense(&self) -> Option<&DenseMatrix<T>> {
        Some(&self.matrix)
    }
}

/// `diag(A_1, …, A_k)` over equally sized dense blocks, applied blockwise.
#[derive(Debug, Clone)]
pub struct BlockDiagonalOperator<T> {
    blocks: Vec<DenseMatrix<T>>,
}

impl<T: Real> BlockDiagonalOperator<T> {
    pub fn new(blocks: Vec<DenseMatrix<T>>) -> crate::Result<Self> {
        if let Some(first) = blocks.first() {
            if blocks
                .iter()
                .any(|b| b.rows() != first.rows() || b.cols() != first.cols())
            {
                return Err(crate::Error::Shape("blocks must share one shape".into()));
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[DenseMatrix<T>] {
        &self.blocks
    }

    fn block_shape(&self) -> (usize, usize) {
        self.blocks
            .first()
            .map(|b| (b.rows(), b.cols()))
            .unwrap_or((0, 0))
    }
}

impl<T: Real> LinearOperator<T> for BlockDiagonalOperator<T> {
    fn nrows(&self) -> usize {
        self.blocks.len() * self.block_shape().0
    }

    fn ncols(&self) -> usize {
        self.blocks.len() * self.block_shape().1
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let (m, n) = self.block_shape();
        for (i, b) in self.blocks.iter().enumerate() {
            b.mul_vec_into(&x[i * n..(i + 1) * n], &mut y[i * m..(i + 1) * m]);
        }
    }

    fn apply_adjoint(&self, y: &[T], x: &mut [T]) {
        let (m, n) = self.block_shape();
        for (i, b) in self.blocks.iter().enumerate() {
            b.tr_mul_vec_into(&y[i * m..(i + 1) * m], &mut x[i * n..(i + 1) * n]);
        }
    }

    fn gram_factor(&self) -> Option<GramFactor<T>> {
        self.blocks
            .iter()
            .map(|b| Cholesky::factor(&b.gram_rows()).ok())
            .collect::<Option<Vec<_>>>()
            .map(GramFactor::BlockDiagonal)
    }
}

/// Operator given by closures; has no Gram factor.
pub struct FnOperator<F, G> {
    pub rows: usize,
    pub cols: usize,
    pub forward: F,
    pub adjoint: G,
}

impl<T, F, G> LinearOperator<T> for FnOperator<F, G>
where
    T: Real,
    F: Fn(&[T], &mut [T]) + Send + Sync,
    G: Fn(&[T], &mut [T]) + Send + Sync,
{
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (self.forward)(x, y)
    }

    fn apply_adjoint(&self, y: &[T], x: &mut [T]) {
        (self.adjoint)(y, x)
    }
}
