use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use super::{check_basis, Predictor, ReconConfig, ReconReport, Signal};
use crate::error::{shape_err, Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};
use crate::metrics::{row_compressibility, CompressibilityConfig};
use crate::predictors::{predict_band_twosided, predict_row_into};
use crate::scalar::{norm2, Real};
use crate::sensing::{block_diagonal_operator, draw_sensing_matrix, Layout, MeasurementSet};
use crate::signal::{Cube3D, Image2D};
use crate::solvers::{solve_l1, DenseL1, SolveConfig, SolveResult};
use crate::transforms::{AxisTransform, SparsityBasis};

/// Per-slice recovery problem.
enum SliceSolver<T: Real> {
    Pursuit(DenseL1<T>),
    /// More measurements than unknowns: plain least squares on `B = ΦΨ`.
    LeastSquares { b: DenseMatrix<T>, normal: Cholesky<T> },
}

impl<T: Real> SliceSolver<T> {
    fn build(phi: &DenseMatrix<T>, basis: &SparsityBasis<T>) -> Result<Self> {
        if phi.rows() <= phi.cols() {
            return Ok(Self::Pursuit(DenseL1::new(phi, basis)?));
        }
        let mut data = Vec::with_capacity(phi.rows() * phi.cols());
        for i in 0..phi.rows() {
            data.extend(basis.analyze(phi.row(i))?);
        }
        let b = DenseMatrix::from_row_major(phi.rows(), phi.cols(), data)?;
        let normal = Cholesky::factor(&b.transpose().gram_rows())?;
        Ok(Self::LeastSquares { b, normal })
    }

    fn footprint(&self) -> usize {
        let sz = std::mem::size_of::<T>();
        match self {
            Self::Pursuit(p) => p.footprint(),
            Self::LeastSquares { b, normal } => (b.rows() * b.cols() + normal.dim().pow(2)) * sz,
        }
    }

    fn measure(&self, theta: &[T]) -> Result<Vec<T>> {
        match self {
            Self::Pursuit(p) => p.measure(theta),
            Self::LeastSquares { b, .. } => Ok(b.mul_vec(theta)),
        }
    }

    fn solve(&self, y: &[T], cfg: &SolveConfig) -> Result<SolveResult<T>> {
        match self {
            Self::Pursuit(p) => p.solve(y, cfg),
            Self::LeastSquares { b, normal } => {
                let mut theta = b.tr_mul_vec(y);
                normal.solve_in_place(&mut theta);
                let r: Vec<T> = b.mul_vec(&theta).iter().zip(y).map(|(&p, &q)| p - q).collect();
                let residual = norm2(&r);
                Ok(SolveResult {
                    l1_objective: crate::scalar::norm1(&theta),
                    converged: residual <= T::of(cfg.residual_bound()) * norm2(y),
                    residual_l2: residual,
                    theta_hat: theta,
                    iterations: 1,
                    objective_trace: Vec::new(),
                })
            }
        }
    }
}

/// Result of an initialization strategy, as per-slice vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct InitOutcome<T> {
    pub slices: Vec<Vec<T>>,
    pub converged: bool,
    /// Slices whose solve did not converge (all of them for a failed joint solve).
    pub unconverged_slices: Vec<usize>,
    /// Largest relative measurement residual over the slices.
    pub max_residual: f64,
}

struct SliceUpdate<T> {
    slice: Vec<T>,
    prediction: Vec<T>,
    correction: Vec<T>,
    rel_residual: f64,
    converged: bool,
}

/// Reconstruction state tied to one measurement set: the slice geometry and
/// a cache of per-slice factorizations shared by every run over it.
pub struct Reconstructor<'a, T: Real> {
    ms: &'a MeasurementSet<T>,
    basis: &'a SparsityBasis<T>,
    cache: Vec<OnceLock<Arc<SliceSolver<T>>>>,
    budget: usize,
    used: AtomicUsize,
}

impl<'a, T: Real> Reconstructor<'a, T> {
    /// `cache_budget_bytes` bounds the memory kept for factorizations;
    /// slices beyond it are re-factored on every use.
    pub fn new(ms: &'a MeasurementSet<T>, basis: &'a SparsityBasis<T>, cache_budget_bytes: usize) -> Result<Self> {
        ms.ensemble.validate()?;
        check_basis(ms, basis)?;
        let distinct = if ms.ensemble.shared_matrix { 1 } else { ms.ensemble.num_slices };
        Ok(Self {
            ms,
            basis,
            cache: (0..distinct).map(|_| OnceLock::new()).collect(),
            budget: cache_budget_bytes,
            used: AtomicUsize::new(0),
        })
    }

    pub fn num_slices(&self) -> usize {
        self.ms.ensemble.num_slices
    }

    pub fn slice_len(&self) -> usize {
        self.ms.ensemble.n
    }

    fn solver(&self, i: usize) -> Result<Arc<SliceSolver<T>>> {
        let key = if self.ms.ensemble.shared_matrix { 0 } else { i };
        if let Some(s) = self.cache[key].get() {
            return Ok(s.clone());
        }
        let phi = draw_sensing_matrix::<T>(&self.ms.ensemble, i)?;
        let s = Arc::new(SliceSolver::build(&phi, self.basis)?);
        let size = s.footprint();
        if self.used.fetch_add(size, Ordering::Relaxed) + size <= self.budget {
            if self.cache[key].set(s.clone()).is_err() {
                self.used.fetch_sub(size, Ordering::Relaxed);
            }
        } else {
            self.used.fetch_sub(size, Ordering::Relaxed);
        }
        Ok(s)
    }

    /// Split a signal into this measurement set's slices.
    pub fn slices_of(&self, signal: &Signal<T>) -> Result<Vec<Vec<T>>> {
        let d = self.ms.dims;
        match (self.ms.layout, signal) {
            (Layout::Rows2D, Signal::Image(im)) if im.shape() == (d.rows, d.cols) => {
                Ok((0..d.rows).map(|r| im.row(r).to_vec()).collect())
            }
            (Layout::Bands3D, Signal::Cube(c)) if c.shape() == (d.rows, d.cols, d.bands) => {
                Ok((0..d.bands).map(|b| c.band(b).to_vec()).collect())
            }
            (Layout::SpectralRows3D, Signal::Cube(c)) if c.shape() == (d.rows, d.cols, d.bands) => {
                Ok((0..d.rows).map(|r| c.spectral_row(r)).collect())
            }
            _ => Err(shape_err(format!(
                "signal does not match {} measurements of {:?}",
                self.ms.layout.name(),
                d
            ))),
        }
    }

    /// Reassemble slices into the signal container.
    pub fn assemble(&self, slices: &[Vec<T>]) -> Result<Signal<T>> {
        let d = self.ms.dims;
        self.check_slices(slices)?;
        let flat: Vec<T> = slices.iter().flatten().copied().collect();
        match self.ms.layout {
            Layout::Rows2D => Ok(Signal::Image(Image2D::from_rows(d.rows, d.cols, flat)?)),
            Layout::Bands3D => Ok(Signal::Cube(Cube3D::from_band_vects(d.rows, d.cols, d.bands, flat)?)),
            Layout::SpectralRows3D => {
                let mut c = Cube3D::zeros(d.rows, d.cols, d.bands);
                for (r, s) in slices.iter().enumerate() {
                    c.set_spectral_row(r, s)?;
                }
                if c.as_slice().iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical("non-finite sample in reconstruction".into()));
                }
                Ok(Signal::Cube(c))
            }
        }
    }

    fn check_slices(&self, slices: &[Vec<T>]) -> Result<()> {
        if slices.len() != self.num_slices() || slices.iter().any(|s| s.len() != self.slice_len()) {
            return Err(shape_err(format!(
                "expected {} slices of length {}",
                self.num_slices(),
                self.slice_len()
            )));
        }
        Ok(())
    }

    /// Independent basis pursuit on every slice.
    pub fn init_separate(&self, cfg: &SolveConfig) -> Result<InitOutcome<T>> {
        self.init_separate_threads(cfg, 1)
    }

    pub fn init_separate_threads(&self, cfg: &SolveConfig, threads: usize) -> Result<InitOutcome<T>> {
        cfg.validate()?;
        let idx: Vec<usize> = (0..self.num_slices()).collect();
        let results = par_map(threads, &idx, |i| -> Result<(Vec<T>, f64, bool)> {
            let y = self.ms.slice(i);
            let r = self.solver(i)?.solve(y, cfg)?;
            let mut x = r.theta_hat;
            self.basis.synthesize_in_place(&mut x)?;
            Ok((x, relative(r.residual_l2, norm2(y)), r.converged))
        });
        let mut out = InitOutcome {
            slices: Vec::with_capacity(idx.len()),
            converged: true,
            unconverged_slices: Vec::new(),
            max_residual: 0.0,
        };
        for (i, r) in results.into_iter().enumerate() {
            let (x, res, ok) = r?;
            out.slices.push(x);
            out.max_residual = out.max_residual.max(res);
            if !ok {
                out.converged = false;
                out.unconverged_slices.push(i);
            }
        }
        Ok(out)
    }

    /// One basis pursuit over all slices: block-diagonal sensing operator and
    /// the slice basis extended by a DCT across slices.
    pub fn init_kcs(&self, cfg: &SolveConfig, max_unknowns: usize) -> Result<InitOutcome<T>> {
        cfg.validate()?;
        let (ns, n) = (self.num_slices(), self.slice_len());
        let total = ns * n;
        if total > max_unknowns {
            return Err(Error::TooLarge(format!(
                "joint recovery of {total} unknowns exceeds the limit of {max_unknowns}; crop the signal"
            )));
        }
        let op = block_diagonal_operator::<T>(&self.ms.ensemble)?;
        let kbasis = self.basis.stacked(ns, AxisTransform::Dct)?;
        let y = self.ms.stacked();
        let r = solve_l1(&op, &kbasis, &y, cfg)?;
        let x = kbasis.synthesize(&r.theta_hat)?;
        Ok(InitOutcome {
            slices: x.chunks(n).map(<[T]>::to_vec).collect(),
            converged: r.converged,
            unconverged_slices: if r.converged { Vec::new() } else { (0..ns).collect() },
            max_residual: relative(r.residual_l2, norm2(&y)),
        })
    }

    fn update_targets(&self) -> Vec<usize> {
        let ns = self.num_slices();
        match self.ms.layout {
            Layout::Bands3D => (0..ns).collect(),
            // the first and last rows are carried over unchanged
            Layout::Rows2D | Layout::SpectralRows3D => (1..ns.saturating_sub(1)).collect(),
        }
    }

    fn predict(&self, i: usize, src: &[Vec<T>], predictor: &Predictor) -> Result<Vec<T>> {
        let d = self.ms.dims;
        match (self.ms.layout, predictor) {
            (Layout::Rows2D, Predictor::Row(f)) => {
                let mut out = vec![T::zero(); self.slice_len()];
                predict_row_into(*f, &src[i - 1], &src[i + 1], &mut out)?;
                Ok(out)
            }
            (Layout::SpectralRows3D, Predictor::Row(f)) => {
                let mut out = vec![T::zero(); self.slice_len()];
                for ((u, l), o) in src[i - 1]
                    .chunks(d.cols)
                    .zip(src[i + 1].chunks(d.cols))
                    .zip(out.chunks_mut(d.cols))
                {
                    predict_row_into(*f, u, l, o)?;
                }
                Ok(out)
            }
            (Layout::Bands3D, Predictor::BlockLs(cfg)) => {
                let frame = |k: usize| Image2D::from_vect(d.rows, d.cols, &src[k]);
                let prev = if i > 0 { Some(frame(i - 1)?) } else { None };
                let next = if i + 1 < src.len() { Some(frame(i + 1)?) } else { None };
                let stats = frame(i)?;
                Ok(predict_band_twosided(prev.as_ref(), next.as_ref(), &stats, cfg)?.vect())
            }
            (layout, p) => Err(Error::Config(format!(
                "predictor {} does not apply to {} measurements",
                p.name(),
                layout.name()
            ))),
        }
    }

    fn correct(&self, i: usize, prediction: Vec<T>, cfg: &SolveConfig) -> Result<SliceUpdate<T>> {
        let solver = self.solver(i)?;
        let mut theta_p = prediction.clone();
        self.basis.analyze_in_place(&mut theta_p)?;
        let y = self.ms.slice(i);
        let ey: Vec<T> = solver
            .measure(&theta_p)?
            .iter()
            .zip(y)
            .map(|(&p, &m)| m - p)
            .collect();
        let r = solver.solve(&ey, cfg)?;
        let mut correction = r.theta_hat;
        self.basis.synthesize_in_place(&mut correction)?;
        let slice = prediction.iter().zip(&correction).map(|(&p, &c)| p + c).collect();
        Ok(SliceUpdate {
            slice,
            prediction,
            correction,
            rel_residual: relative(r.residual_l2, norm2(y)),
            converged: r.converged,
        })
    }

    fn sweep(&self, current: &[Vec<T>], cfg: &ReconConfig) -> Result<(Vec<Vec<T>>, Vec<(usize, SliceUpdate<T>)>)> {
        let targets = self.update_targets();
        let mut next = current.to_vec();
        let mut updates = Vec::with_capacity(targets.len());
        if cfg.gauss_seidel {
            for &i in &targets {
                let p = self.predict(i, &next, &cfg.predictor)?;
                let u = self.correct(i, p, &cfg.solver)?;
                next[i].clone_from(&u.slice);
                updates.push((i, u));
            }
        } else {
            let results = par_map(cfg.threads, &targets, |i| {
                let p = self.predict(i, current, &cfg.predictor)?;
                self.correct(i, p, &cfg.solver)
            });
            for (&i, u) in targets.iter().zip(results) {
                let u = u?;
                next[i].clone_from(&u.slice);
                updates.push((i, u));
            }
        }
        Ok((next, updates))
    }

    /// Run the outer iterations from `init`. `truth`, when given, enables the
    /// MSE trace and the ground-truth residual compressibility.
    pub fn iterate(
        &self,
        init: Vec<Vec<T>>,
        cfg: &ReconConfig,
        truth: Option<&[Vec<T>]>,
    ) -> Result<(Vec<Vec<T>>, ReconReport)> {
        cfg.validate()?;
        cfg.check_layout(self.ms.layout)?;
        self.check_slices(&init)?;
        if let Some(t) = truth {
            self.check_slices(t)?;
        }
        if self.ms.layout == Layout::Bands3D && self.num_slices() < 2 {
            return Err(Error::Config("band iteration needs at least two bands".into()));
        }
        let start = Instant::now();
        let ns = self.num_slices();
        let track_compress = self.ms.layout == Layout::Rows2D && ns >= 3;
        let ccfg = CompressibilityConfig::default();

        let mut report = ReconReport {
            mse: truth.map(|t| slices_mse(&init, t)).map(|v| vec![v]),
            relative_change: vec![f64::NAN],
            elapsed_seconds: vec![0.0],
            max_slice_residual: vec![f64::NAN],
            solver_failures: vec![0],
            init_converged: true,
            ..ReconReport::default()
        };
        if track_compress {
            let base = truth.unwrap_or(&init);
            report.compressibility = Some(vec![row_compressibility(&self.rows_image(base.iter())?, &ccfg)?]);
        }

        let mut current = init;
        for it in 1..=cfg.max_outer_iters {
            let (next, updates) = self.sweep(&current, cfg)?;
            let change = relative_change(&current, &next);
            if let (Some(m), Some(t)) = (report.mse.as_mut(), truth) {
                m.push(slices_mse(&next, t));
            }
            if let Some(c) = report.compressibility.as_mut() {
                let rows: Vec<Vec<T>> = updates
                    .iter()
                    .map(|(i, u)| match truth {
                        Some(t) => t[*i].iter().zip(&u.prediction).map(|(&a, &b)| a - b).collect(),
                        None => u.correction.clone(),
                    })
                    .collect();
                c.push(row_compressibility(&self.rows_image(rows.iter())?, &ccfg)?);
            }
            report.relative_change.push(change);
            report
                .max_slice_residual
                .push(updates.iter().map(|(_, u)| u.rel_residual).fold(0.0, f64::max));
            report
                .solver_failures
                .push(updates.iter().filter(|(_, u)| !u.converged).count());
            report.elapsed_seconds.push(start.elapsed().as_secs_f64());
            report.iterations_run = it;
            current = next;
            if change < cfg.convergence_tol {
                report.converged = true;
                break;
            }
        }
        report.wall_seconds = start.elapsed().as_secs_f64();
        Ok((current, report))
    }

    fn rows_image<'b>(&self, rows: impl Iterator<Item = &'b Vec<T>>) -> Result<Image2D<T>>
    where
        T: 'b,
    {
        let flat: Vec<T> = rows.flatten().copied().collect();
        let n = self.slice_len();
        Image2D::from_rows(flat.len() / n, n, flat)
    }
}

fn relative(num: impl Real, den: impl Real) -> f64 {
    let (n, d) = (num.to_f64_lossy(), den.to_f64_lossy());
    if d > 0.0 {
        n / d
    } else {
        n
    }
}

fn slices_mse<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> f64 {
    let mut s = 0.0;
    let mut count = 0usize;
    for (x, y) in a.iter().zip(b) {
        for (&p, &q) in x.iter().zip(y) {
            let d = p.to_f64_lossy() - q.to_f64_lossy();
            s += d * d;
        }
        count += x.len();
    }
    if count == 0 {
        0.0
    } else {
        s / count as f64
    }
}

fn relative_change<T: Real>(prev: &[Vec<T>], next: &[Vec<T>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, n) in prev.iter().zip(next) {
        for (&a, &b) in p.iter().zip(n) {
            let (a, b) = (a.to_f64_lossy(), b.to_f64_lossy());
            num += (b - a) * (b - a);
            den += a * a;
        }
    }
    match (num, den) {
        (n, _) if n == 0.0 => 0.0,
        (_, d) if d == 0.0 => f64::INFINITY,
        (n, d) => (n / d).sqrt(),
    }
}

/// Map `f` over `idx` with up to `threads` scoped workers, preserving order.
/// Map `f` over `idx` on up to `threads` scoped workers pulling from a shared
/// counter; results come back in `idx` order.
pub(crate) fn par_map<R: Send>(threads: usize, idx: &[usize], f: impl Fn(usize) -> R + Sync) -> Vec<R> {
    if threads <= 1 || idx.len() < 2 {
        return idx.iter().map(|&i| f(i)).collect();
    }
    let next = AtomicUsize::new(0);
    let (f, next) = (&f, &next);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads.min(idx.len()))
            .map(|_| {
                s.spawn(move || {
                    let mut done = Vec::new();
                    loop {
                        let k = next.fetch_add(1, Ordering::Relaxed);
                        if k >= idx.len() {
                            break;
                        }
                        done.push((k, f(idx[k])));
                    }
                    done
                })
            })
            .collect();
        let mut slots: Vec<Option<R>> = (0..idx.len()).map(|_| None).collect();
        for h in handles {
            for (k, r) in h.join().expect("worker panicked") {
                slots[k] = Some(r);
            }
        }
        slots.into_iter().map(|r| r.expect("every index is claimed once")).collect()
    })
}
