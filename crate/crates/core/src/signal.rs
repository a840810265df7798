//! Sample containers for images and hyperspectral cubes.
//!
//! The stack operator `vect(·)` used everywhere in this crate is column-major:
//! columns are stacked top to bottom, left to right. A cube stores each band
//! as `vect` of its frame, bands one after another, so the measurement vector
//! of a band is a contiguous slice.

use crate::error::{shape_err, Error, Result};
use crate::scalar::Real;

/// Nominal sample range after normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
}

impl ValueRange {
    pub const UNIT: ValueRange = ValueRange { lo: 0.0, hi: 1.0 };
}

impl Default for ValueRange {
    fn default() -> Self {
        Self::UNIT
    }
}

/// Row-major 2D image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D<T> {
    rows: usize,
    cols: usize,
    samples: Vec<T>,
    pub value_range: ValueRange,
}

impl<T: Real> Image2D<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            samples: vec![T::zero(); rows * cols],
            value_range: ValueRange::UNIT,
        }
    }

    /// Build from row-major samples. All samples must be finite.
    pub fn from_rows(rows: usize, cols: usize, samples: Vec<T>) -> Result<Self> {
        if samples.len() != rows * cols {
            return Err(shape_err(format!(
                "{} samples for a {rows}x{cols} image",
                samples.len()
            )));
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite sample at index {k}")));
        }
        Ok(Self {
            rows,
            cols,
            samples,
            value_range: ValueRange::UNIT,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut samples = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                samples.push(f(r, c));
            }
        }
        Self {
            rows,
            cols,
            samples,
            value_range: ValueRange::UNIT,
        }
    }

    /// Inverse of [`Image2D::vect`].
    pub fn from_vect(rows: usize, cols: usize, v: &[T]) -> Result<Self> {
        if v.len() != rows * cols {
            return Err(shape_err(format!(
                "vector of length {} for a {rows}x{cols} frame",
                v.len()
            )));
        }
        Ok(Self::from_fn(rows, cols, |r, c| v[r + rows * c]))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.samples[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.samples[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.samples[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.samples[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.samples
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.samples
    }

    /// Column-major stack of the frame.
    pub fn vect(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                v.push(self.get(r, c));
            }
        }
        v
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
            value_range: self.value_range,
        }
    }

    pub fn cast<U: Real>(&self) -> Image2D<U> {
        Image2D {
            rows: self.rows,
            cols: self.cols,
            samples: self.samples.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
            value_range: self.value_range,
        }
    }

    /// Keep every `step`-th row and column, starting at 0.
    pub fn decimate(&self, step: usize) -> Self {
        assert!(step >= 1);
        let rows = self.rows.div_ceil(step);
        let cols = self.cols.div_ceil(step);
        let mut out = Self::from_fn(rows, cols, |r, c| self.get(r * step, c * step));
        out.value_range = self.value_range;
        out
    }

    pub fn crop(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Result<Self> {
        if r0 + rows > self.rows || c0 + cols > self.cols {
            return Err(shape_err(format!(
                "crop {rows}x{cols}@({r0},{c0}) exceeds {}x{}",
                self.rows, self.cols
            )));
        }
        let mut out = Self::from_fn(rows, cols, |r, c| self.get(r0 + r, c0 + c));
        out.value_range = self.value_range;
        Ok(out)
    }
}

/// Hyperspectral cube of shape (rows, cols, bands), band-sequential.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube3D<T> {
    rows: usize,
    cols: usize,
    bands: usize,
    samples: Vec<T>,
    pub value_range: ValueRange,
}

impl<T: Real> Cube3D<T> {
    pub fn zeros(rows: usize, cols: usize, bands: usize) -> Self {
        Self {
            rows,
            cols,
            bands,
            samples: vec![T::zero(); rows * cols * bands],
            value_range: ValueRange::UNIT,
        }
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        bands: usize,
        f: impl Fn(usize, usize, usize) -> T,
    ) -> Self {
        let mut cube = Self::zeros(rows, cols, bands);
        for b in 0..bands {
            for c in 0..cols {
                for r in 0..rows {
                    cube.set(r, c, b, f(r, c, b));
                }
            }
        }
        cube
    }

    /// Build from band frames; every frame must share one shape.
    pub fn from_bands(frames: &[Image2D<T>]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| shape_err("a cube needs at least one band"))?;
        let (rows, cols) = first.shape();
        let mut cube = Self::zeros(rows, cols, frames.len());
        for (b, f) in frames.iter().enumerate() {
            cube.set_band_image(b, f)?;
        }
        Ok(cube)
    }

    /// Build from the concatenation of `vect(F^b)` for every band.
    pub fn from_band_vects(rows: usize, cols: usize, bands: usize, samples: Vec<T>) -> Result<Self> {
        if samples.len() != rows * cols * bands {
            return Err(shape_err(format!(
                "{} samples for a {rows}x{cols}x{bands} cube",
                samples.len()
            )));
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite sample at index {k}")));
        }
        Ok(Self {
            rows,
            cols,
            bands,
            samples,
            value_range: ValueRange::UNIT,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.bands)
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
    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    fn index(&self, r: usize, c: usize, b: usize) -> usize {
        r + self.rows * (c + self.cols * b)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, b: usize) -> T {
        self.samples[self.index(r, c, b)]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, b: usize, v: T) {
        let k = self.index(r, c, b);
        self.samples[k] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.samples
    }

    /// `vect(F^b)`.
    pub fn band(&self, b: usize) -> &[T] {
        let n = self.rows * self.cols;
        &self.samples[b * n..(b + 1) * n]
    }

    pub fn band_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.rows * self.cols;
        &mut self.samples[b * n..(b + 1) * n]
    }

    pub fn band_image(&self, b: usize) -> Image2D<T> {
        let mut im = Image2D::from_vect(self.rows, self.cols, self.band(b))
            .expect("band length matches frame");
        im.value_range = self.value_range;
        im
    }

    pub fn set_band_image(&mut self, b: usize, im: &Image2D<T>) -> Result<()> {
        if im.shape() != (self.rows, self.cols) {
            return Err(shape_err(format!(
                "band frame {:?} vs cube frame {:?}",
                im.shape(),
                (self.rows, self.cols)
            )));
        }
        let v = im.vect();
        self.band_mut(b).copy_from_slice(&v);
        Ok(())
    }

    /// `vect(F_{r,:,:})`: the (cols × bands) spectral row, column-major.
    pub fn spectral_row(&self, r: usize) -> Vec<T> {
        let mut v = Vec::with_capacity(self.cols * self.bands);
        for b in 0..self.bands {
            for c in 0..self.cols {
                v.push(self.get(r, c, b));
            }
        }
        v
    }

    pub fn set_spectral_row(&mut self, r: usize, v: &[T]) -> Result<()> {
        if v.len() != self.cols * self.bands {
            return Err(shape_err(format!(
                "spectral row of length {} vs {}",
                v.len(),
                self.cols * self.bands
            )));
        }
        for b in 0..self.bands {
            for c in 0..self.cols {
                self.set(r, c, b, v[c + self.cols * b]);
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Cube3D<U> {
        Cube3D {
            rows: self.rows,
            cols: self.cols,
            bands: self.bands,
            samples: self.samples.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
            value_range: self.value_range,
        }
    }

    pub fn crop(
        &self,
        origin: (usize, usize, usize),
        shape: (usize, usize, usize),
    ) -> Result<Self> {
        let (r0, c0, b0) = origin;
        let (rows, cols, bands) = shape;
        if r0 + rows > self.rows || c0 + cols > self.cols || b0 + bands > self.bands {
            return Err(shape_err(format!(
                "crop {shape:?}@{origin:?} exceeds {:?}",
                self.shape()
            )));
        }
        let mut out = Self::from_fn(rows, cols, bands, |r, c, b| self.get(r0 + r, c0 + c, b0 + b));
        out.value_range = self.value_range;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vect_is_column_major() {
        let im = Image2D::from_rows(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(im.vect(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let back = Image2D::from_vect(2, 3, &im.vect()).unwrap();
        assert_eq!(back, im);
    }

    #[test]
    fn cube_band_and_spectral_row_views() {
        let cube = Cube3D::from_fn(2, 3, 2, |r, c, b| (100 * b + 10 * r + c) as f64);
        assert_eq!(cube.band(1), &[100.0, 110.0, 101.0, 111.0, 102.0, 112.0]);
        assert_eq!(cube.spectral_row(1), vec![10.0, 11.0, 12.0, 110.0, 111.0, 112.0]);
        let mut c2 = Cube3D::zeros(2, 3, 2);
        for r in 0..2 {
            c2.set_spectral_row(r, &cube.spectral_row(r)).unwrap();
        }
        assert_eq!(c2, cube);
        assert_eq!(cube.band_image(0).get(1, 2), 12.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Image2D::from_rows(2, 2, vec![0.0; 3]).is_err());
        assert!(Image2D::from_rows(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(Cube3D::<f64>::from_band_vects(2, 2, 2, vec![0.0; 7]).is_err());
    }
}
