//! Reproducible synthetic test signals.
//!
//! Both generators draw from a [`GaussianStream`] seeded with the caller's
//! seed, so a given (seed, shape, profile, [`SYNTH_VERSION`]) always yields the
//! same samples. Any change to the recipes below must bump the version. The
//! stream indices sit far above any slice index, so a signal seed can double
//! as a sensing seed without the two sharing a stream.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, GaussianStream};
use crate::signal::{Cube3D, Image2D, ValueRange};
use crate::transforms::{AxisTransform, SparsityBasis};

pub const SYNTH_VERSION: u32 = 1;

/// Parameters of the synthetic image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageProfile {
    /// Number of random low-frequency DCT atoms.
    pub atoms: usize,
    /// Atoms are drawn from the lowest `band_limit × band_limit` frequencies.
    pub band_limit: usize,
    /// Amplitude decay exponent over the frequency radius.
    pub decay: f64,
    /// Number of soft-edged elliptical blobs added on top.
    pub blobs: usize,
    /// Blob edge width in pixels.
    pub edge_width: f64,
}

impl Default for ImageProfile {
    fn default() -> Self {
        Self {
            atoms: 40,
            band_limit: 16,
            decay: 1.2,
            blobs: 6,
            edge_width: 2.0,
        }
    }
}

/// Parameters of the synthetic cube: a base band sparse in the 2D DCT, seen
/// through per-band gains and offsets that drift as random walks, plus a
/// sparse innovation that also accumulates from band to band. Accumulation
/// makes correlation fall off with band distance.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeProfile {
    /// Nonzero DCT coefficients of the base band.
    pub base_atoms: usize,
    /// Base coefficients come from the lowest `band_limit²` frequencies.
    pub band_limit: usize,
    /// Standard deviation of the per-band relative gain step.
    pub gain_step: f64,
    /// Standard deviation of the per-band offset step, relative to the base
    /// band's standard deviation.
    pub offset_step: f64,
    /// New nonzero DCT coefficients added to the innovation at each band.
    pub innovation_atoms: usize,
    /// Innovation coefficient scale relative to the base coefficients.
    pub innovation_scale: f64,
}

impl Default for CubeProfile {
    fn default() -> Self {
        Self {
            base_atoms: 12,
            band_limit: 6,
            gain_step: 0.05,
            offset_step: 0.05,
            innovation_atoms: 2,
            innovation_scale: 0.15,
        }
    }
}

impl CubeProfile {
    /// Every band identical to the base band.
    pub fn frozen() -> Self {
        Self {
            gain_step: 0.0,
            offset_step: 0.0,
            innovation_atoms: 0,
            innovation_scale: 0.0,
            ..Self::default()
        }
    }
}

/// Row-correlated grayscale image in [0, 1].
pub fn synth_image(seed: u64, rows: usize, cols: usize, profile: &ImageProfile) -> Result<Image2D<f64>> {
    if rows < 2 || cols < 2 {
        return Err(Error::Config(format!("synthetic image needs ≥ 2x2, got {rows}x{cols}")));
    }
    if profile.band_limit == 0 {
        return Err(Error::Config("band_limit must be ≥ 1".into()));
    }
    let mut g = GaussianStream::new(derive_seed(seed, 0x5EED_0000_1A6E));
    let basis = SparsityBasis::separable2d(rows, cols, AxisTransform::Dct)?;
    let lu = profile.band_limit.min(rows);
    let lv = profile.band_limit.min(cols);
    let mut theta = vec![0.0; rows * cols];
    for _ in 0..profile.atoms {
        let u = g.below(lu);
        let v = g.below(lv);
        let radius = 1.0 + ((u * u + v * v) as f64).sqrt();
        theta[u + rows * v] += g.standard_normal() / radius.powf(profile.decay);
    }
    let mut x = basis.synthesize(&theta)?;
    let spread = std_dev(&x).max(1e-12);
    for _ in 0..profile.blobs {
        let r0 = g.uniform() * rows as f64;
        let c0 = g.uniform() * cols as f64;
        let a = (0.08 + 0.2 * g.uniform()) * rows as f64;
        let b = (0.08 + 0.2 * g.uniform()) * cols as f64;
        let level = 1.5 * spread * g.standard_normal();
        let w = profile.edge_width.max(1e-6);
        for c in 0..cols {
            for r in 0..rows {
                let d = (((r as f64 - r0) / a).powi(2) + ((c as f64 - c0) / b).powi(2)).sqrt();
                // signed distance to the ellipse edge, roughly in pixels
                let s = (1.0 - d) * a.min(b) / w;
                x[r + rows * c] += level * 0.5 * (1.0 + s.tanh());
            }
        }
    }
    normalize(&mut x);
    let mut im = Image2D::from_vect(rows, cols, &x)?;
    im.value_range = ValueRange::UNIT;
    Ok(im)
}

/// Band-correlated cube in [0, 1] (global min-max normalization).
pub fn synth_cube(seed: u64, rows: usize, cols: usize, bands: usize, profile: &CubeProfile) -> Result<Cube3D<f64>> {
    if rows < 2 || cols < 2 || bands < 2 {
        return Err(Error::Config(format!(
            "synthetic cube needs every dimension ≥ 2, got {rows}x{cols}x{bands}"
        )));
    }
    if profile.band_limit == 0 {
        return Err(Error::Config("band_limit must be ≥ 1".into()));
    }
    let n = rows * cols;
    let mut g = GaussianStream::new(derive_seed(seed, 0x5EED_0000_C0BE));
    let basis = SparsityBasis::separable2d(rows, cols, AxisTransform::Dct)?;
    let lu = profile.band_limit.min(rows);
    let lv = profile.band_limit.min(cols);

    let mut base_theta = vec![0.0; n];
    for _ in 0..profile.base_atoms {
        let k = g.below(lu) + rows * g.below(lv);
        base_theta[k] += g.standard_normal();
    }
    let base = basis.synthesize(&base_theta)?;
    let spread = std_dev(&base).max(1e-12);

    let mut gain = 1.0;
    let mut offset = 0.0;
    let mut innov_theta = vec![0.0; n];
    let mut out = Vec::with_capacity(n * bands);
    for b in 0..bands {
        if b > 0 {
            gain *= 1.0 + profile.gain_step * g.standard_normal();
            offset += profile.offset_step * spread * g.standard_normal();
            for _ in 0..profile.innovation_atoms {
                let k = g.below(n);
                innov_theta[k] += profile.innovation_scale * g.standard_normal();
            }
        }
        let innov = basis.synthesize(&innov_theta)?;
        out.extend(base.iter().zip(&innov).map(|(x, e)| gain * x + offset + e));
    }
    normalize(&mut out);
    Cube3D::from_band_vects(rows, cols, bands, out)
}

fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn normalize(x: &mut [f64]) {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span > 0.0 {
        x.iter_mut().for_each(|v| *v = (*v - lo) / span);
    } else {
        x.iter_mut().for_each(|v| *v = 0.5);
    }
}
