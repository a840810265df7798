//! Orthonormal sparsity bases.
//!
//! A [`SparsityBasis`] is a separable synthesis operator over a tensor whose
//! axes are listed fastest-varying first (the column-major `vect` order). Each
//! axis carries a 1D factor, either the identity or the orthonormal DCT. The
//! synthesis `x = Ψ θ` applies the DCT-III (inverse of the orthonormal
//! DCT-II) along every DCT axis; analysis applies the DCT-II. For a 2D frame
//! with dims `[rows, cols]` this is exactly `(Ψ_COLᵀ ⊗ Ψ_ROWᵀ) vect(θ)` with
//! `Ψ_ROW`, `Ψ_COL` the DCT-II matrices. In general, the equivalent dense
//! matrix is the Kronecker product of the per-axis synthesis matrices taken
//! slowest axis first.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{shape_err, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Identity,
    Dct1D,
    Separable2D,
    Separable3D,
}

/// Per-axis 1D factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisTransform {
    Identity,
    Dct,
}

impl AxisTransform {
    pub fn name(self) -> &'static str {
        match self {
            AxisTransform::Identity => "identity",
            AxisTransform::Dct => "dct",
        }
    }
}

impl std::str::FromStr for AxisTransform {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(AxisTransform::Identity),
            "dct" => Ok(AxisTransform::Dct),
            _ => Err(crate::error::Error::Config(format!("unknown basis '{s}'"))),
        }
    }
}

#[derive(Clone)]
pub struct SparsityBasis<T: Real> {
    kind: BasisKind,
    dims: Vec<usize>,
    factors: Vec<AxisTransform>,
    plans: Vec<Option<Arc<dyn TransformType2And3<T>>>>,
}

impl<T: Real> std::fmt::Debug for SparsityBasis<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparsityBasis")
            .field("kind", &self.kind)
            .field("dims", &self.dims)
            .field("factors", &self.factors)
            .finish()
    }
}

impl<T: Real> SparsityBasis<T> {
    fn build(kind: BasisKind, dims: Vec<usize>, factors: Vec<AxisTransform>) -> Result<Self> {
        if dims.is_empty() || dims.len() != factors.len() {
            return Err(Error::Config("one factor per axis is required".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("zero-length axis in {dims:?}")));
        }
        let mut planner = DctPlanner::new();
        let plans = dims
            .iter()
            .zip(&factors)
            .map(|(&d, f)| match f {
                AxisTransform::Dct => Some(planner.plan_dct2(d)),
                AxisTransform::Identity => None,
            })
            .collect();
        Ok(Self {
            kind,
            dims,
            factors,
            plans,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::build(BasisKind::Identity, vec![n], vec![AxisTransform::Identity])
    }

    pub fn dct1d(n: usize) -> Result<Self> {
        Self::build(BasisKind::Dct1D, vec![n], vec![AxisTransform::Dct])
    }

    /// Separable basis over a (rows × cols) frame stored column-major.
    pub fn separable2d(rows: usize, cols: usize, factor: AxisTransform) -> Result<Self> {
        Self::build(BasisKind::Separable2D, vec![rows, cols], vec![factor; 2])
    }

    /// Separable basis over an (n0 × n1 × n2) tensor, axis 0 fastest. The
    /// last factor is the spectral one in the band-sequential layout.
    pub fn separable3d(dims: [usize; 3], factors: [AxisTransform; 3]) -> Result<Self> {
        Self::build(BasisKind::Separable3D, dims.to_vec(), factors.to_vec())
    }

    /// Basis over `count` stacked copies of a slice signal, with `factor`
    /// applied across slices (the slowest axis).
    pub fn stacked(&self, count: usize, factor: AxisTransform) -> Result<Self> {
        let kind = match self.dims.len() {
            1 => BasisKind::Separable2D,
            2 => BasisKind::Separable3D,
            d => return Err(Error::Unsupported(format!("stacking a {d}-axis basis"))),
        };
        let mut dims = self.dims.clone();
        dims.push(count);
        let mut factors = self.factors.clone();
        factors.push(factor);
        Self::build(kind, dims, factors)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn factors(&self) -> &[AxisTransform] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(|f| *f == AxisTransform::Identity)
    }

    /// `x = Ψ θ`.
    pub fn synthesize(&self, theta: &[T]) -> Result<Vec<T>> {
        let mut v = theta.to_vec();
        self.synthesize_in_place(&mut v)?;
        Ok(v)
    }

    /// `θ = Ψᵀ x`.
    pub fn analyze(&self, x: &[T]) -> Result<Vec<T>> {
        let mut v = x.to_vec();
        self.analyze_in_place(&mut v)?;
        Ok(v)
    }

    pub fn synthesize_in_place(&self, v: &mut [T]) -> Result<()> {
        self.apply(v, false)
    }

    pub fn analyze_in_place(&self, v: &mut [T]) -> Result<()> {
        self.apply(v, true)
    }

    fn apply(&self, v: &mut [T], forward: bool) -> Result<()> {
        if v.len() != self.len() {
            return Err(shape_err(format!(
                "vector of length {} for basis of size {}",
                v.len(),
                self.len()
            )));
        }
        let mut stride = 1;
        for (axis, &n) in self.dims.iter().enumerate() {
            if let Some(plan) = &self.plans[axis] {
                apply_axis(plan.as_ref(), v, n, stride, forward);
            }
            stride *= n;
        }
        Ok(())
    }

    /// Dense synthesis matrix, column `j` = Ψ e_j. Only sensible for small sizes.
    pub fn synthesis_matrix(&self) -> crate::linalg::DenseMatrix<T> {
        let n = self.len();
        let mut m = crate::linalg::DenseMatrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            self.synthesize_in_place(&mut e).expect("length matches");
            for i in 0..n {
                m[(i, j)] = e[i];
            }
        }
        m
    }
}

/// Orthonormal DCT-II (forward) or DCT-III (inverse) along one axis.
fn apply_axis<T: Real>(
    plan: &dyn TransformType2And3<T>,
    v: &mut [T],
    n: usize,
    stride: usize,
    forward: bool,
) {
    let total = v.len();
    let block = n * stride;
    let mut line = vec![T::zero(); n];
    let mut scratch = vec![T::zero(); plan.get_scratch_len()];
    let nf = T::of(n as f64);
    let dc_scale = T::one() / nf.sqrt();
    let ac_scale = (T::of(2.0) / nf).sqrt();
    for outer in (0..total).step_by(block) {
        for inner in 0..stride {
            let base = outer + inner;
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = v[base + k * stride];
            }
            if forward {
                plan.process_dct2_with_scratch(&mut line, &mut scratch);
                line[0] = line[0] * dc_scale;
                for c in line.iter_mut().skip(1) {
                    *c = *c * ac_scale;
                }
            } else {
                // rustdct's DCT-III computes X_0/2 + Σ X_k cos(·)
                line[0] = line[0] * dc_scale * T::of(2.0);
                for c in line.iter_mut().skip(1) {
                    *c = *c * ac_scale;
                }
                plan.process_dct3_with_scratch(&mut line, &mut scratch);
            }
            for (k, &val) in line.iter().enumerate() {
                v[base + k * stride] = val;
            }
        }
    }
}
