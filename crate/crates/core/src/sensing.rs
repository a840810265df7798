//! Progressive compressive acquisition.
//!
//! A signal is split into slices (image rows, vectorized bands, or vectorized
//! spectral rows) and each slice `i` is measured with its own Gaussian matrix
//! `Φ^i` (m × n, entries N(0, 1/m)). Matrices are never stored: they are
//! re-derived on demand from the ensemble's master seed.

use std::io::{Read, Write};

use crate::error::{shape_err, Error, Result};
use crate::linalg::DenseMatrix;
use crate::operator::{BlockDiagonalOperator, DenseOperator};
use crate::rng::{derive_seed, GaussianStream};
use crate::scalar::Real;
use crate::signal::{Cube3D, Image2D};

/// How slice `i` maps back into the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    /// Slice `i` is image row `i`.
    Rows2D,
    /// Slice `i` is `vect(F^i)`, band `i` of a cube.
    Bands3D,
    /// Slice `i` is `vect(F_{i,:,:})`, the (cols × bands) spectral row `i`.
    SpectralRows3D,
}

impl Layout {
    pub fn code(self) -> u8 {
        match self {
            Layout::Rows2D => 0,
            Layout::Bands3D => 1,
            Layout::SpectralRows3D => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Layout::Rows2D),
            1 => Ok(Layout::Bands3D),
            2 => Ok(Layout::SpectralRows3D),
            _ => Err(Error::Format(format!("unknown layout code {c}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layout::Rows2D => "rows2d",
            Layout::Bands3D => "bands3d",
            Layout::SpectralRows3D => "spectral-rows3d",
        }
    }

    /// (num_slices, slice length) for a signal of the given dims.
    pub fn slicing(self, dims: SignalDims) -> (usize, usize) {
        let SignalDims { rows, cols, bands } = dims;
        match self {
            Layout::Rows2D => (rows, cols),
            Layout::Bands3D => (bands, rows * cols),
            Layout::SpectralRows3D => (rows, cols * bands),
        }
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rows2d" | "rows" => Ok(Layout::Rows2D),
            "bands3d" | "bands" => Ok(Layout::Bands3D),
            "spectral-rows3d" | "spectral-rows" => Ok(Layout::SpectralRows3D),
            _ => Err(Error::Config(format!("unknown layout '{s}'"))),
        }
    }
}

/// Shape of the acquired signal; `bands == 1` for images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignalDims {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
}

impl SignalDims {
    pub fn image(rows: usize, cols: usize) -> Self {
        Self { rows, cols, bands: 1 }
    }

    pub fn cube(rows: usize, cols: usize, bands: usize) -> Self {
        Self { rows, cols, bands }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols * self.bands
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The family of per-slice Gaussian sensing matrices, described by seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededSensingEnsemble {
    pub master_seed: u64,
    pub num_slices: usize,
    pub m: usize,
    pub n: usize,
    /// Reuse slice 0's matrix for every slice (ablation switch).
    pub shared_matrix: bool,
    /// Allow `m ≥ n`.
    pub non_compressive: bool,
}

impl SeededSensingEnsemble {
    /// Compressive ensemble, `0 < m < n`.
    pub fn new(master_seed: u64, num_slices: usize, m: usize, n: usize) -> Result<Self> {
        let e = Self {
            master_seed,
            num_slices,
            m,
            n,
            shared_matrix: false,
            non_compressive: false,
        };
        e.validate()?;
        Ok(e)
    }

    /// Reference ensemble that permits `m ≥ n`.
    pub fn non_compressive(master_seed: u64, num_slices: usize, m: usize, n: usize) -> Result<Self> {
        let e = Self {
            master_seed,
            num_slices,
            m,
            n,
            shared_matrix: false,
            non_compressive: true,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn with_shared_matrix(mut self, shared: bool) -> Self {
        self.shared_matrix = shared;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.num_slices == 0 {
            return Err(Error::Config(format!(
                "ensemble needs m, n, num_slices ≥ 1 (got m={}, n={}, slices={})",
                self.m, self.n, self.num_slices
            )));
        }
        if self.m >= self.n && !self.non_compressive {
            return Err(Error::Config(format!(
                "m={} is not below the slice length n={}; use the non-compressive mode",
                self.m, self.n
            )));
        }
        Ok(())
    }

    /// Seed of slice `i`'s stream; a pure function of `(master_seed, i)`.
    pub fn slice_seed(&self, i: usize) -> u64 {
        let idx = if self.shared_matrix { 0 } else { i as u64 };
        derive_seed(self.master_seed, idx)
    }

    pub fn compression_ratio(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

/// Draw `Φ^i`, an m × n matrix with i.i.d. N(0, 1/m) entries, row-major.
pub fn draw_sensing_matrix<T: Real>(ens: &SeededSensingEnsemble, i: usize) -> Result<DenseMatrix<T>> {
    if i >= ens.num_slices {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: ens.num_slices,
        });
    }
    let mut g = GaussianStream::new(ens.slice_seed(i));
    let sd = 1.0 / (ens.m as f64).sqrt();
    let data = (0..ens.m * ens.n)
        .map(|_| T::of(sd * g.standard_normal()))
        .collect();
    DenseMatrix::from_row_major(ens.m, ens.n, data)
}

/// `Φ^i` wrapped as a solver operator.
pub fn slice_operator<T: Real>(ens: &SeededSensingEnsemble, i: usize) -> Result<DenseOperator<T>> {
    Ok(DenseOperator::new(draw_sensing_matrix(ens, i)?))
}

/// Block-diagonal operator over all slices, with every block drawn once.
pub fn block_diagonal_operator<T: Real>(ens: &SeededSensingEnsemble) -> Result<BlockDiagonalOperator<T>> {
    let blocks = (0..ens.num_slices)
        .map(|i| draw_sensing_matrix(ens, i))
        .collect::<Result<Vec<_>>>()?;
    BlockDiagonalOperator::new(blocks)
}

/// Measurements of every slice plus the ensemble that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet<T> {
    /// num_slices × m; row `i` holds `y_i = Φ^i s_i`.
    pub y: DenseMatrix<T>,
    pub ensemble: SeededSensingEnsemble,
    pub layout: Layout,
    pub dims: SignalDims,
}

impl<T: Real> MeasurementSet<T> {
    pub fn new(
        y: DenseMatrix<T>,
        ensemble: SeededSensingEnsemble,
        layout: Layout,
        dims: SignalDims,
    ) -> Result<Self> {
        let (slices, n) = layout.slicing(dims);
        if slices != ensemble.num_slices || n != ensemble.n {
            return Err(shape_err(format!(
                "{} layout of {dims:?} gives {slices} slices of {n}, ensemble has {} of {}",
                layout.name(),
                ensemble.num_slices,
                ensemble.n
            )));
        }
        if y.rows() != ensemble.num_slices || y.cols() != ensemble.m {
            return Err(shape_err(format!(
                "measurement matrix {}x{} vs ensemble {}x{}",
                y.rows(),
                y.cols(),
                ensemble.num_slices,
                ensemble.m
            )));
        }
        Ok(Self {
            y,
            ensemble,
            layout,
            dims,
        })
    }

    pub fn slice(&self, i: usize) -> &[T] {
        self.y.row(i)
    }

    /// `vect(Yᵀ)`: all slice measurements concatenated.
    pub fn stacked(&self) -> Vec<T> {
        self.y.as_slice().to_vec()
    }

    /// Add i.i.d. N(0, σ²) noise to every measurement (for the relaxed
    /// recovery mode). Deterministic in `seed`.
    pub fn add_gaussian_noise(&mut self, sigma: f64, seed: u64) {
        let mut g = GaussianStream::new(derive_seed(seed, u64::MAX));
        for i in 0..self.y.rows() {
            for v in self.y.row_mut(i) {
                *v = *v + T::of(sigma * g.standard_normal());
            }
        }
    }

    pub fn cast<U: Real>(&self) -> MeasurementSet<U> {
        let data = self.y.as_slice().iter().map(|v| U::of(v.to_f64_lossy())).collect();
        MeasurementSet {
            y: DenseMatrix::from_row_major(self.y.rows(), self.y.cols(), data).expect("same shape"),
            ensemble: self.ensemble,
            layout: self.layout,
            dims: self.dims,
        }
    }
}

fn measure_slices<T: Real>(
    ens: &SeededSensingEnsemble,
    slice: impl Fn(usize) -> Vec<T>,
) -> Result<DenseMatrix<T>> {
    let mut y = DenseMatrix::zeros(ens.num_slices, ens.m);
    let mut shared = None;
    for i in 0..ens.num_slices {
        let phi = match (&shared, ens.shared_matrix) {
            (Some(p), true) => std::borrow::Cow::Borrowed(p),
            _ => {
                let p = draw_sensing_matrix::<T>(ens, i)?;
                if ens.shared_matrix {
                    shared = Some(p);
                    std::borrow::Cow::Borrowed(shared.as_ref().unwrap())
                } else {
                    std::borrow::Cow::Owned(p)
                }
            }
        };
        phi.mul_vec_into(&slice(i), y.row_mut(i));
    }
    Ok(y)
}

/// Measure every image row: `(Y)_iᵀ = Φ^i (X)_iᵀ`.
pub fn acquire_rows_2d<T: Real>(x: &Image2D<T>, ens: &SeededSensingEnsemble) -> Result<MeasurementSet<T>> {
    let dims = SignalDims::image(x.rows(), x.cols());
    check_ensemble(ens, Layout::Rows2D, dims)?;
    let y = measure_slices(ens, |i| x.row(i).to_vec())?;
    MeasurementSet::new(y, *ens, Layout::Rows2D, dims)
}

/// Measure every band: `y_i = Φ^i vect(F^i)`.
pub fn acquire_bands_3d<T: Real>(f: &Cube3D<T>, ens: &SeededSensingEnsemble) -> Result<MeasurementSet<T>> {
    let (rows, cols, bands) = f.shape();
    let dims = SignalDims::cube(rows, cols, bands);
    check_ensemble(ens, Layout::Bands3D, dims)?;
    let y = measure_slices(ens, |i| f.band(i).to_vec())?;
    MeasurementSet::new(y, *ens, Layout::Bands3D, dims)
}

/// Measure every spectral row: `y_i = Φ^i vect(F_{i,:,:})`.
pub fn acquire_spectral_rows_3d<T: Real>(
    f: &Cube3D<T>,
    ens: &SeededSensingEnsemble,
) -> Result<MeasurementSet<T>> {
    let (rows, cols, bands) = f.shape();
    let dims = SignalDims::cube(rows, cols, bands);
    check_ensemble(ens, Layout::SpectralRows3D, dims)?;
    let y = measure_slices(ens, |i| f.spectral_row(i))?;
    MeasurementSet::new(y, *ens, Layout::SpectralRows3D, dims)
}

fn check_ensemble(ens: &SeededSensingEnsemble, layout: Layout, dims: SignalDims) -> Result<()> {
    ens.validate()?;
    let (slices, n) = layout.slicing(dims);
    if ens.num_slices != slices || ens.n != n {
        return Err(shape_err(format!(
            "{} acquisition of {dims:?} needs {slices} slices of length {n}, ensemble has {} of {}",
            layout.name(),
            ens.num_slices,
            ens.n
        )));
    }
    Ok(())
}

/// `diag(Φ^1, …, Φ^k) v`, drawing one block at a time.
pub fn block_diag_apply<T: Real>(ens: &SeededSensingEnsemble, v: &[T]) -> Result<Vec<T>> {
    if v.len() != ens.num_slices * ens.n {
        return Err(shape_err(format!(
            "stacked vector of length {} vs {} slices of {}",
            v.len(),
            ens.num_slices,
            ens.n
        )));
    }
    let mut out = vec![T::zero(); ens.num_slices * ens.m];
    for i in 0..ens.num_slices {
        let phi = draw_sensing_matrix::<T>(ens, i)?;
        phi.mul_vec_into(&v[i * ens.n..(i + 1) * ens.n], &mut out[i * ens.m..(i + 1) * ens.m]);
    }
    Ok(out)
}

/// `diag(Φ^1, …, Φ^k)ᵀ w`, drawing one block at a time.
pub fn block_diag_apply_adjoint<T: Real>(ens: &SeededSensingEnsemble, w: &[T]) -> Result<Vec<T>> {
    if w.len() != ens.num_slices * ens.m {
        return Err(shape_err(format!(
            "stacked measurements of length {} vs {} slices of {}",
            w.len(),
            ens.num_slices,
            ens.m
        )));
    }
    let mut out = vec![T::zero(); ens.num_slices * ens.n];
    for i in 0..ens.num_slices {
        let phi = draw_sensing_matrix::<T>(ens, i)?;
        phi.tr_mul_vec_into(&w[i * ens.m..(i + 1) * ens.m], &mut out[i * ens.n..(i + 1) * ens.n]);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Measurement file
//
// All integers little-endian. 48-byte header followed by num_slices × m
// float64 values (row-major Y):
//
//   0   4  magic "PCSM"
//   4   2  version (1)
//   6   1  layout code (0 rows2d, 1 bands3d, 2 spectral-rows3d)
//   7   1  flags (bit 0 shared matrix, bit 1 non-compressive)
//   8   8  master seed
//  16   4  rows
//  20   4  cols
//  24   4  bands
//  28   4  num_slices
//  32   4  m
//  36   4  n
//  40   8  reserved, zero
// ---------------------------------------------------------------------------

pub const MEASUREMENT_MAGIC: &[u8; 4] = b"PCSM";
pub const MEASUREMENT_VERSION: u16 = 1;
pub const MEASUREMENT_HEADER_LEN: usize = 48;

pub fn write_measurements<T: Real, W: Write>(ms: &MeasurementSet<T>, mut w: W) -> Result<()> {
    let e = &ms.ensemble;
    let mut h = Vec::with_capacity(MEASUREMENT_HEADER_LEN);
    h.extend_from_slice(MEASUREMENT_MAGIC);
    h.extend_from_slice(&MEASUREMENT_VERSION.to_le_bytes());
    h.push(ms.layout.code());
    h.push(u8::from(e.shared_matrix) | (u8::from(e.non_compressive) << 1));
    h.extend_from_slice(&e.master_seed.to_le_bytes());
    for v in [ms.dims.rows, ms.dims.cols, ms.dims.bands, e.num_slices, e.m, e.n] {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("dimension {v} exceeds u32")))?;
        h.extend_from_slice(&v.to_le_bytes());
    }
    h.extend_from_slice(&[0u8; 8]);
    debug_assert_eq!(h.len(), MEASUREMENT_HEADER_LEN);
    w.write_all(&h)?;
    let mut payload = Vec::with_capacity(ms.y.as_slice().len() * 8);
    for v in ms.y.as_slice() {
        payload.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    w.write_all(&payload)?;
    Ok(())
}

pub fn read_measurements<T: Real, R: Read>(mut r: R) -> Result<MeasurementSet<T>> {
    let mut h = [0u8; MEASUREMENT_HEADER_LEN];
    r.read_exact(&mut h)
        .map_err(|_| Error::Format("truncated measurement header".into()))?;
    if &h[0..4] != MEASUREMENT_MAGIC {
        return Err(Error::Format("not a measurement file (bad magic)".into()));
    }
    let version = u16::from_le_bytes([h[4], h[5]]);
    if version != MEASUREMENT_VERSION {
        return Err(Error::Format(format!("unsupported measurement version {version}")));
    }
    let layout = Layout::from_code(h[6])?;
    let flags = h[7];
    let seed = u64::from_le_bytes(h[8..16].try_into().unwrap());
    let u = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap()) as usize;
    let dims = SignalDims::cube(u(16), u(20), u(24));
    let ensemble = SeededSensingEnsemble {
        master_seed: seed,
        num_slices: u(28),
        m: u(32),
        n: u(36),
        shared_matrix: flags & 1 != 0,
        non_compressive: flags & 2 != 0,
    };
    ensemble.validate()?;
    let count = ensemble.num_slices * ensemble.m;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != count * 8 {
        return Err(Error::Format(format!(
            "measurement payload has {} bytes, header implies {}",
            payload.len(),
            count * 8
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let y = DenseMatrix::from_row_major(ensemble.num_slices, ensemble.m, data)?;
    MeasurementSet::new(y, ensemble, layout, dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::least_squares;
    use crate::operator::LinearOperator;

    fn random_image(rows: usize, cols: usize, seed: u64) -> Image2D<f64> {
        let mut g = GaussianStream::new(seed);
        let samples = (0..rows * cols).map(|_| g.uniform()).collect();
        Image2D::from_rows(rows, cols, samples).unwrap()
    }

    fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut g = GaussianStream::new(seed);
        (0..n).map(|_| g.standard_normal()).collect()
    }

    #[test]
    fn draw_is_deterministic_and_seed_sensitive() {
        let e = SeededSensingEnsemble::new(7, 5, 4, 9).unwrap();
        let a = draw_sensing_matrix::<f64>(&e, 3).unwrap();
        let b = draw_sensing_matrix::<f64>(&e, 3).unwrap();
        assert_eq!(a, b);
        let e0 = SeededSensingEnsemble::non_compressive(0, 1, 2, 2).unwrap();
        let e1 = SeededSensingEnsemble::non_compressive(1, 1, 2, 2).unwrap();
        assert_ne!(
            draw_sensing_matrix::<f64>(&e0, 0).unwrap(),
            draw_sensing_matrix::<f64>(&e1, 0).unwrap()
        );
        assert!(matches!(
            draw_sensing_matrix::<f64>(&e, 5),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn entries_have_variance_one_over_m() {
        let (m, n) = (128, 512);
        let e = SeededSensingEnsemble::new(3, 1, m, n).unwrap();
        let phi = draw_sensing_matrix::<f64>(&e, 0).unwrap();
        let xs = phi.as_slice();
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
        let target = 1.0 / m as f64;
        assert!(var >= 0.9 * target && var <= 1.1 * target, "var={var}");
        assert!(mean.abs() <= 4.0 * (target / k).sqrt(), "mean={mean}");
    }

    #[test]
    fn compression_is_enforced_unless_requested() {
        assert!(SeededSensingEnsemble::new(1, 4, 8, 8).is_err());
        assert!(SeededSensingEnsemble::new(1, 4, 0, 8).is_err());
        assert!(SeededSensingEnsemble::non_compressive(1, 4, 8, 8).is_ok());
    }

    #[test]
    fn zero_image_gives_zero_measurements() {
        let x = Image2D::<f64>::zeros(4, 8);
        let e = SeededSensingEnsemble::new(2, 4, 3, 8).unwrap();
        let ms = acquire_rows_2d(&x, &e).unwrap();
        assert!(ms.y.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!((ms.y.rows(), ms.y.cols()), (4, 3));
    }

    #[test]
    fn one_hot_pixel_selects_a_column() {
        let mut x = Image2D::<f64>::zeros(4, 8);
        x.set(2, 5, 1.0);
        let e = SeededSensingEnsemble::new(9, 4, 3, 8).unwrap();
        let ms = acquire_rows_2d(&x, &e).unwrap();
        let phi2 = draw_sensing_matrix::<f64>(&e, 2).unwrap();
        assert_eq!(ms.slice(2), phi2.column(5).as_slice());
        for i in [0, 1, 3] {
            assert!(ms.slice(i).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn square_rows_are_recovered_by_linear_solve() {
        let x = random_image(8, 16, 4);
        let e = SeededSensingEnsemble::non_compressive(11, 8, 16, 16).unwrap();
        let ms = acquire_rows_2d(&x, &e).unwrap();
        for i in 0..8 {
            let phi = draw_sensing_matrix::<f64>(&e, i).unwrap();
            let row = least_squares(&phi, ms.slice(i)).unwrap();
            for (a, b) in row.iter().zip(x.row(i)) {
                assert!((a - b).abs() < 1e-8);
            }
        }
        assert_eq!(ms.layout, Layout::Rows2D);
    }

    #[test]
    fn band_acquisition_uses_column_major_vect() {
        let mut f = Cube3D::<f64>::zeros(4, 3, 2);
        f.set(2, 1, 1, 1.0);
        let e = SeededSensingEnsemble::new(5, 2, 5, 12).unwrap();
        let ms = acquire_bands_3d(&f, &e).unwrap();
        assert!(ms.slice(0).iter().all(|&v| v == 0.0));
        let phi = draw_sensing_matrix::<f64>(&e, 1).unwrap();
        // (F^1)_{2,1} sits at position rows·1 + 2 of vect(F^1)
        assert_eq!(ms.slice(1), phi.column(4 + 2).as_slice());
    }

    #[test]
    fn square_bands_and_spectral_rows_are_recovered() {
        let f = Cube3D::from_fn(4, 4, 2, |r, c, b| ((r * 7 + c * 3 + b * 5) % 11) as f64 / 10.0);
        let e = SeededSensingEnsemble::non_compressive(8, 2, 16, 16).unwrap();
        let ms = acquire_bands_3d(&f, &e).unwrap();
        for b in 0..2 {
            let phi = draw_sensing_matrix::<f64>(&e, b).unwrap();
            let v = least_squares(&phi, ms.slice(b)).unwrap();
            for (p, q) in v.iter().zip(f.band(b)) {
                assert!((p - q).abs() < 1e-8);
            }
        }
        let g = Cube3D::from_fn(4, 4, 4, |r, c, b| ((r + 2 * c + 3 * b) % 5) as f64);
        let e = SeededSensingEnsemble::non_compressive(8, 4, 16, 16).unwrap();
        let ms = acquire_spectral_rows_3d(&g, &e).unwrap();
        for r in 0..4 {
            let phi = draw_sensing_matrix::<f64>(&e, r).unwrap();
            let v = least_squares(&phi, ms.slice(r)).unwrap();
            for (p, q) in v.iter().zip(g.spectral_row(r)) {
                assert!((p - q).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn spectral_rows_differ_unless_matrix_is_shared() {
        let f = Cube3D::from_fn(3, 4, 2, |_, c, b| (c + b) as f64);
        let e = SeededSensingEnsemble::new(1, 3, 4, 8).unwrap();
        let distinct = acquire_spectral_rows_3d(&f, &e).unwrap();
        assert_ne!(distinct.slice(0), distinct.slice(1));
        let shared = acquire_spectral_rows_3d(&f, &e.with_shared_matrix(true)).unwrap();
        assert_eq!(shared.slice(0), shared.slice(1));
        assert_eq!(shared.slice(1), shared.slice(2));
        let zero = acquire_spectral_rows_3d(&Cube3D::<f64>::zeros(3, 4, 2), &e).unwrap();
        assert!(zero.y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let x = Image2D::<f64>::zeros(4, 8);
        let e = SeededSensingEnsemble::new(1, 4, 3, 7).unwrap();
        assert!(acquire_rows_2d(&x, &e).is_err());
        let f = Cube3D::<f64>::zeros(2, 2, 3);
        let e = SeededSensingEnsemble::new(1, 2, 2, 4).unwrap();
        assert!(acquire_bands_3d(&f, &e).is_err());
    }

    #[test]
    fn block_diag_single_slice_and_support() {
        let e = SeededSensingEnsemble::new(4, 1, 3, 6).unwrap();
        let v = rand_vec(6, 1);
        let want = draw_sensing_matrix::<f64>(&e, 0).unwrap().mul_vec(&v);
        assert_eq!(block_diag_apply(&e, &v).unwrap(), want);

        let e = SeededSensingEnsemble::new(4, 4, 3, 6).unwrap();
        let mut v = vec![0.0; 24];
        v[12..18].copy_from_slice(&rand_vec(6, 2));
        let out = block_diag_apply(&e, &v).unwrap();
        for (k, val) in out.iter().enumerate() {
            if !(6..9).contains(&k) {
                assert_eq!(*val, 0.0);
            }
        }
        assert!(block_diag_apply(&e, &v[..23]).is_err());
    }

    #[test]
    fn block_diag_matches_dense_materialization() {
        let e = SeededSensingEnsemble::new(6, 3, 4, 8).unwrap();
        let mut dense = DenseMatrix::<f64>::zeros(12, 24);
        for b in 0..3 {
            let phi = draw_sensing_matrix::<f64>(&e, b).unwrap();
            for i in 0..4 {
                for j in 0..8 {
                    dense[(4 * b + i, 8 * b + j)] = phi[(i, j)];
                }
            }
        }
        let v = rand_vec(24, 3);
        let got = block_diag_apply(&e, &v).unwrap();
        for (p, q) in got.iter().zip(dense.mul_vec(&v)) {
            assert!((p - q).abs() < 1e-12);
        }
        let w = rand_vec(12, 4);
        let got = block_diag_apply_adjoint(&e, &w).unwrap();
        for (p, q) in got.iter().zip(dense.tr_mul_vec(&w)) {
            assert!((p - q).abs() < 1e-12);
        }
        let op = block_diagonal_operator::<f64>(&e).unwrap();
        let mut y = vec![0.0; 12];
        op.apply(&v, &mut y);
        assert_eq!(y, block_diag_apply(&e, &v).unwrap());
    }

    #[test]
    fn measurement_file_round_trip_and_errors() {
        let x = random_image(5, 9, 12);
        let e = SeededSensingEnsemble::new(77, 5, 4, 9).unwrap();
        let ms = acquire_rows_2d(&x, &e).unwrap();
        let mut buf = Vec::new();
        write_measurements(&ms, &mut buf).unwrap();
        assert_eq!(buf.len(), MEASUREMENT_HEADER_LEN + 5 * 4 * 8);
        assert_eq!(&buf[..4], b"PCSM");
        let back: MeasurementSet<f64> = read_measurements(buf.as_slice()).unwrap();
        assert_eq!(back, ms);
        assert!(read_measurements::<f64, _>(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_measurements::<f64, _>(bad.as_slice()).is_err());
    }
}
