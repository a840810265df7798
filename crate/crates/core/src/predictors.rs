//! Linear predictors of a slice from its neighbours.
//!
//! Row filters predict an image row from the rows above and below. The band
//! predictor fits, per spatial block, a gain/offset model from a neighbouring
//! band onto the current band's statistics.

use crate::error::{shape_err, Error, Result};
use crate::scalar::Real;
use crate::signal::Image2D;

/// Row prediction filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowFilter {
    /// Mean of the pixels directly above and below.
    P1,
    /// Mean of the six pixels in the rows above and below.
    P2,
    /// Six-pixel weighted mean: `a` on the diagonal neighbours, `b` on the
    /// vertical ones.
    P3,
}

impl RowFilter {
    pub const ALL: [RowFilter; 3] = [RowFilter::P1, RowFilter::P2, RowFilter::P3];

    /// Diagonal weight of P3, `(2 − √2)/4`.
    pub fn p3_diagonal<T: Real>() -> T {
        (T::of(2.0) - T::SQRT_2()) / T::of(4.0)
    }

    /// Vertical weight of P3, `(√2 − 1)/2`.
    pub fn p3_vertical<T: Real>() -> T {
        (T::SQRT_2() - T::one()) / T::of(2.0)
    }

    pub fn name(self) -> &'static str {
        match self {
            RowFilter::P1 => "p1",
            RowFilter::P2 => "p2",
            RowFilter::P3 => "p3",
        }
    }
}

impl std::str::FromStr for RowFilter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(RowFilter::P1),
            "p2" => Ok(RowFilter::P2),
            "p3" => Ok(RowFilter::P3),
            _ => Err(Error::Config(format!("unknown row filter '{s}'"))),
        }
    }
}

impl std::fmt::Display for RowFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Predict a row from the rows above (`upper`) and below (`lower`).
///
/// Horizontal neighbours past the image edge are replicated from the edge
/// pixel.
pub fn predict_row<T: Real>(filter: RowFilter, upper: &[T], lower: &[T]) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); upper.len()];
    predict_row_into(filter, upper, lower, &mut out)?;
    Ok(out)
}

pub fn predict_row_into<T: Real>(filter: RowFilter, upper: &[T], lower: &[T], out: &mut [T]) -> Result<()> {
    let n = upper.len();
    if lower.len() != n || out.len() != n {
        return Err(shape_err(format!(
            "row lengths differ: {}, {}, {}",
            n,
            lower.len(),
            out.len()
        )));
    }
    if n < 2 {
        return Err(shape_err("rows must have at least 2 samples"));
    }
    let half = T::of(0.5);
    match filter {
        RowFilter::P1 => {
            for j in 0..n {
                out[j] = half * (upper[j] + lower[j]);
            }
        }
        RowFilter::P2 | RowFilter::P3 => {
            let (wd, wv) = match filter {
                RowFilter::P2 => (T::one() / T::of(6.0), T::one() / T::of(6.0)),
                _ => (RowFilter::p3_diagonal(), RowFilter::p3_vertical()),
            };
            for j in 0..n {
                let l = j.saturating_sub(1);
                let r = (j + 1).min(n - 1);
                out[j] = wd * (upper[l] + upper[r] + lower[l] + lower[r]) + wv * (upper[j] + lower[j]);
            }
        }
    }
    Ok(())
}

/// Settings of the blockwise least-squares band predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLsConfig {
    /// Edge of the square spatial blocks; trailing blocks may be smaller.
    pub block_size: usize,
}

impl Default for BlockLsConfig {
    fn default() -> Self {
        Self { block_size: 16 }
    }
}

impl BlockLsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size < 2 {
            return Err(Error::Config("block size must be ≥ 2".into()));
        }
        Ok(())
    }
}

/// Fitted model of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockFit<T> {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
    /// Mean of the reference band over the block.
    pub mu_ref: T,
    /// Mean of the current band statistics over the block.
    pub mu_target: T,
    pub alpha: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandPrediction<T: Real> {
    pub band: Image2D<T>,
    pub fits: Vec<BlockFit<T>>,
}

/// Blockwise gain/offset prediction of a band from a reference band.
///
/// For every block, `α = Σ(r − μ_r)(t − μ_t) / Σ(r − μ_r)²` where `r` is the
/// reference and `t` the current band statistics (the previous estimate of
/// the band being predicted), and the prediction is `μ_t + α(r − μ_r)`. A
/// flat reference block gives `α = 0`.
pub fn predict_band_blockls<T: Real>(
    reference: &Image2D<T>,
    target_stats: &Image2D<T>,
    cfg: &BlockLsConfig,
) -> Result<BandPrediction<T>> {
    cfg.validate()?;
    if reference.shape() != target_stats.shape() {
        return Err(shape_err(format!(
            "reference {:?} vs target {:?}",
            reference.shape(),
            target_stats.shape()
        )));
    }
    let (rows, cols) = reference.shape();
    let bs = cfg.block_size;
    let mut band = Image2D::zeros(rows, cols);
    band.value_range = target_stats.value_range;
    let mut fits = Vec::with_capacity(rows.div_ceil(bs) * cols.div_ceil(bs));
    for row0 in (0..rows).step_by(bs) {
        let h = bs.min(rows - row0);
        for col0 in (0..cols).step_by(bs) {
            let w = bs.min(cols - col0);
            let count = T::of((h * w) as f64);
            let mut sr = T::zero();
            let mut st = T::zero();
            let mut peak = T::zero();
            for r in row0..row0 + h {
                for c in col0..col0 + w {
                    let v = reference.get(r, c);
                    sr = sr + v;
                    st = st + target_stats.get(r, c);
                    peak = peak.max(v.abs());
                }
            }
            let (mu_ref, mu_target) = (sr / count, st / count);
            let mut num = T::zero();
            let mut den = T::zero();
            for r in row0..row0 + h {
                for c in col0..col0 + w {
                    let d = reference.get(r, c) - mu_ref;
                    num = num + d * (target_stats.get(r, c) - mu_target);
                    den = den + d * d;
                }
            }
            // deviations within the rounding error of the block mean mean the
            // block is flat
            let floor = count * (count * T::epsilon() * peak).powi(2);
            let alpha = if den > floor { num / den } else { T::zero() };
            for r in row0..row0 + h {
                for c in col0..col0 + w {
                    band.set(r, c, mu_target + alpha * (reference.get(r, c) - mu_ref));
                }
            }
            fits.push(BlockFit {
                row0,
                col0,
                rows: h,
                cols: w,
                mu_ref,
                mu_target,
                alpha,
            });
        }
    }
    Ok(BandPrediction { band, fits })
}

/// Average of the block-LS predictions from the previous and next bands, or
/// the single available one at the ends of the cube.
pub fn predict_band_twosided<T: Real>(
    prev: Option<&Image2D<T>>,
    next: Option<&Image2D<T>>,
    current_stats: &Image2D<T>,
    cfg: &BlockLsConfig,
) -> Result<Image2D<T>> {
    match (prev, next) {
        (None, None) => Err(Error::Config(
            "two-sided prediction needs at least one neighbouring band".into(),
        )),
        (Some(p), None) => Ok(predict_band_blockls(p, current_stats, cfg)?.band),
        (None, Some(n)) => Ok(predict_band_blockls(n, current_stats, cfg)?.band),
        (Some(p), Some(n)) => {
            let a = predict_band_blockls(p, current_stats, cfg)?.band;
            let b = predict_band_blockls(n, current_stats, cfg)?.band;
            let half = T::of(0.5);
            let mut out = a;
            for (o, &v) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *o = half * (*o + v);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::GaussianStream;

    fn random_image(rows: usize, cols: usize, seed: u64) -> Image2D<f64> {
        let mut g = GaussianStream::new(seed);
        Image2D::from_rows(rows, cols, (0..rows * cols).map(|_| g.uniform()).collect()).unwrap()
    }

    #[test]
    fn p3_weights_sum_to_one() {
        let a: f64 = RowFilter::p3_diagonal();
        let b: f64 = RowFilter::p3_vertical();
        assert!((4.0 * a + 2.0 * b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p1_is_the_mean() {
        assert_eq!(predict_row(RowFilter::P1, &[2.0, 4.0], &[4.0, 8.0]).unwrap(), vec![3.0, 6.0]);
    }

    #[test]
    fn p3_on_vertical_line() {
        let p = predict_row::<f64>(RowFilter::P3, &[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!((p[1] - 0.414_213_562_373_095).abs() < 1e-12);
        assert!((p[1] - (2f64.sqrt() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn constants_are_preserved() {
        for f in RowFilter::ALL {
            let p = predict_row::<f64>(f, &[2.5; 7], &[2.5; 7]).unwrap();
            assert!(p.iter().all(|&v| (v - 2.5).abs() < 1e-14), "{f}");
        }
    }

    #[test]
    fn row_length_errors() {
        assert!(predict_row(RowFilter::P1, &[1.0, 2.0], &[1.0]).is_err());
        assert!(predict_row(RowFilter::P2, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn affine_target_gives_alpha_two() {
        let r = random_image(32, 32, 1);
        let t = r.map(|v| 2.0 * v + 5.0);
        let p = predict_band_blockls(&r, &t, &BlockLsConfig::default()).unwrap();
        assert_eq!(p.fits.len(), 4);
        for f in &p.fits {
            assert!((f.alpha - 2.0).abs() < 1e-12);
        }
        for (a, b) in p.band.as_slice().iter().zip(t.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_reference_falls_back_to_target_mean() {
        let r = Image2D::from_fn(16, 16, |_, _| 0.3);
        let t = random_image(16, 16, 2);
        let p = predict_band_blockls(&r, &t, &BlockLsConfig::default()).unwrap();
        let mean = t.as_slice().iter().sum::<f64>() / 256.0;
        assert_eq!(p.fits[0].alpha, 0.0);
        assert!(p.band.as_slice().iter().all(|&v| (v - mean).abs() < 1e-12));
    }

    #[test]
    fn alpha_matches_normal_equations() {
        // fit t ≈ c0 + α r by least squares on the block and compare slopes
        let r = random_image(16, 16, 3);
        let t = random_image(16, 16, 4);
        let p = predict_band_blockls(&r, &t, &BlockLsConfig::default()).unwrap();
        let a = crate::linalg::DenseMatrix::from_row_major(
            256,
            2,
            r.as_slice().iter().flat_map(|&v| [1.0, v]).collect(),
        )
        .unwrap();
        let coef = crate::linalg::least_squares(&a, t.as_slice()).unwrap();
        assert!((p.fits[0].alpha - coef[1]).abs() < 1e-10);
    }

    #[test]
    fn partial_blocks_cover_the_frame() {
        let r = random_image(20, 13, 5);
        let t = r.map(|v| 0.5 * v - 1.0);
        let p = predict_band_blockls(&r, &t, &BlockLsConfig { block_size: 8 }).unwrap();
        assert_eq!(p.fits.len(), 3 * 2);
        assert_eq!((p.fits[5].rows, p.fits[5].cols), (4, 5));
        for (a, b) in p.band.as_slice().iter().zip(t.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_sided_rules() {
        let prev = random_image(16, 16, 6);
        let next = random_image(16, 16, 7);
        let cur = random_image(16, 16, 8);
        let cfg = BlockLsConfig::default();
        let both_same = predict_band_twosided(Some(&prev), Some(&prev), &cur, &cfg).unwrap();
        let one = predict_band_twosided(Some(&prev), None, &cur, &cfg).unwrap();
        for (a, b) in both_same.as_slice().iter().zip(one.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
        let first = predict_band_twosided(None, Some(&next), &cur, &cfg).unwrap();
        assert_eq!(first, predict_band_blockls(&next, &cur, &cfg).unwrap().band);
        let avg = predict_band_twosided(Some(&prev), Some(&next), &cur, &cfg).unwrap();
        let a = predict_band_blockls(&prev, &cur, &cfg).unwrap().band;
        let b = predict_band_blockls(&next, &cur, &cfg).unwrap().band;
        for k in 0..256 {
            assert!((avg.as_slice()[k] - 0.5 * (a.as_slice()[k] + b.as_slice()[k])).abs() < 1e-12);
        }
        assert!(predict_band_twosided::<f64>(None, None, &cur, &cfg).is_err());
    }
}
