//! Reconstruction quality and compressibility.

use std::io::Write;

use crate::error::{shape_err, Error, Result};
use crate::scalar::Real;
use crate::signal::{Cube3D, Image2D};
use crate::transforms::SparsityBasis;

/// Mean squared difference of two equally long sample vectors.
pub fn mse<T: Real>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(shape_err(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.to_f64_lossy() - y.to_f64_lossy();
            d * d
        })
        .sum();
    Ok(s / a.len() as f64)
}

pub fn mse_image<T: Real>(a: &Image2D<T>, b: &Image2D<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(shape_err(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    mse(a.as_slice(), b.as_slice())
}

pub fn mse_cube<T: Real>(a: &Cube3D<T>, b: &Cube3D<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(shape_err(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    mse(a.as_slice(), b.as_slice())
}

/// MSE of every band.
pub fn per_band_mse<T: Real>(a: &Cube3D<T>, b: &Cube3D<T>) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(shape_err(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    (0..a.bands()).map(|k| mse(a.band(k), b.band(k))).collect()
}

/// `10 log10(mse_init / mse_final)`.
pub fn gain_db(mse_init: f64, mse_final: f64) -> Result<f64> {
    if !(mse_init > 0.0 && mse_final > 0.0) {
        return Err(Error::Config(format!(
            "gain needs positive MSEs (got {mse_init}, {mse_final})"
        )));
    }
    Ok(10.0 * (mse_init / mse_final).log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressibilityConfig {
    /// `c` in the per-row threshold `c · ‖θ‖₁ / N_COL`.
    pub threshold_multiplier: f64,
}

impl Default for CompressibilityConfig {
    fn default() -> Self {
        Self {
            threshold_multiplier: 5.0,
        }
    }
}

/// Fraction of a row's DCT coefficients with `|θ_j| ≤ c‖θ‖₁/N`, averaged over
/// rows. An all-zero row counts as fully compressible.
pub fn row_compressibility<T: Real>(x: &Image2D<T>, cfg: &CompressibilityConfig) -> Result<f64> {
    if !(cfg.threshold_multiplier > 0.0) {
        return Err(Error::Config("threshold multiplier must be positive".into()));
    }
    let (rows, cols) = x.shape();
    if rows == 0 || cols == 0 {
        return Err(shape_err("empty image"));
    }
    let basis = SparsityBasis::<T>::dct1d(cols)?;
    let mut total = 0.0;
    for r in 0..rows {
        let theta = basis.analyze(x.row(r))?;
        let l1: f64 = theta.iter().map(|v| v.to_f64_lossy().abs()).sum();
        let thr = cfg.threshold_multiplier * l1 / cols as f64;
        let below = theta.iter().filter(|v| v.to_f64_lossy().abs() <= thr).count();
        total += below as f64 / cols as f64;
    }
    Ok(total / rows as f64)
}

/// Write `iteration,mean_compressibility` rows.
pub fn write_compressibility_csv<W: Write>(values: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "iteration,mean_compressibility")?;
    for (k, v) in values.iter().enumerate() {
        writeln!(w, "{k},{v:.6}")?;
    }
    Ok(())
}
