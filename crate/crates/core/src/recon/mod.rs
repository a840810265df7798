//! Iterative prediction-residual reconstruction.
//!
//! Starting from an initial estimate (independent per-slice recovery, or a
//! joint Kronecker recovery of all slices), every outer iteration predicts
//! each slice from its neighbours in the previous estimate, measures the
//! prediction with the slice's own sensing matrix, recovers the sparse
//! correction from the measurement mismatch, and adds it back.

mod engine;
mod report;

use crate::error::{shape_err, Error, Result};
use crate::predictors::{BlockLsConfig, RowFilter};
use crate::scalar::Real;
use crate::sensing::{Layout, MeasurementSet, SignalDims};
use crate::signal::{Cube3D, Image2D};
use crate::solvers::SolveConfig;
use crate::transforms::{AxisTransform, SparsityBasis};

pub use crate::metrics::gain_db;
pub(crate) use engine::par_map;
pub use engine::{InitOutcome, Reconstructor};
pub use report::ReconReport;

/// How the first estimate is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitStrategy {
    /// Independent basis pursuit per slice.
    Separate,
    /// One basis pursuit over all slices with a Kronecker basis.
    Kcs,
}

impl std::str::FromStr for InitStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "separate" => Ok(InitStrategy::Separate),
            "kcs" => Ok(InitStrategy::Kcs),
            _ => Err(Error::Config(format!("unknown init strategy '{s}'"))),
        }
    }
}

impl InitStrategy {
    pub fn name(self) -> &'static str {
        match self {
            InitStrategy::Separate => "separate",
            InitStrategy::Kcs => "kcs",
        }
    }
}

/// Slice predictor used by the outer iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    /// Row filter over image rows (or over each band segment of a spectral row).
    Row(RowFilter),
    /// Blockwise least-squares band prediction, two-sided.
    BlockLs(BlockLsConfig),
}

impl Predictor {
    pub fn name(&self) -> String {
        match self {
            Predictor::Row(f) => f.name().to_string(),
            Predictor::BlockLs(_) => "blockls".to_string(),
        }
    }
}

impl std::str::FromStr for Predictor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("blockls") {
            Ok(Predictor::BlockLs(BlockLsConfig::default()))
        } else {
            Ok(Predictor::Row(s.parse()?))
        }
    }
}

/// Which slicing a 3D reconstruction iterates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IterateAxis {
    Bands,
    SpectralRows,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    pub init: InitStrategy,
    pub predictor: Predictor,
    pub max_outer_iters: usize,
    /// Stop once `‖X⁽ⁿ⁾ − X⁽ⁿ⁻¹⁾‖₂ / ‖X⁽ⁿ⁻¹⁾‖₂` falls below this.
    pub convergence_tol: f64,
    /// Solver used for the initial estimate and for every correction.
    pub solver: SolveConfig,
    /// 3D only; must agree with the measurement layout.
    pub iterate_axis: IterateAxis,
    /// Predict from slices already updated in the current iteration.
    pub gauss_seidel: bool,
    /// Refuse Kronecker initialization above this many unknowns.
    pub kcs_max_unknowns: usize,
    /// Memory allowed for cached per-slice solver factorizations.
    pub cache_budget_bytes: usize,
    /// Worker threads for per-slice work (1 = sequential).
    pub threads: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            init: InitStrategy::Separate,
            predictor: Predictor::Row(RowFilter::P3),
            max_outer_iters: 40,
            convergence_tol: 1e-4,
            solver: Self::default_solver(),
            iterate_axis: IterateAxis::Bands,
            gauss_seidel: false,
            kcs_max_unknowns: 1 << 18,
            cache_budget_bytes: 1 << 30,
            threads: 1,
        }
    }
}

impl ReconConfig {
    /// Solver settings for the many small per-slice problems: a bounded
    /// iteration budget instead of the standalone solver's tight defaults.
    pub fn default_solver() -> SolveConfig {
        SolveConfig {
            feasibility_tol: 1e-6,
            objective_tol: 1e-6,
            max_solver_iters: 300,
            record_trace: false,
            ..SolveConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be ≥ 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Config("convergence tolerance must be positive".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be ≥ 1".into()));
        }
        if let Predictor::BlockLs(b) = &self.predictor {
            b.validate()?;
        }
        self.solver.validate()
    }

    /// Check that the predictor and axis suit the measurement layout.
    pub fn check_layout(&self, layout: Layout) -> Result<()> {
        match (layout, &self.predictor) {
            (Layout::Rows2D, Predictor::BlockLs(_)) => Err(Error::Config(
                "the block least-squares predictor needs band measurements, not image rows".into(),
            )),
            (Layout::Bands3D, Predictor::Row(_)) => Err(Error::Config(
                "band iteration uses the block least-squares predictor".into(),
            )),
            (Layout::SpectralRows3D, Predictor::BlockLs(_)) => Err(Error::Config(
                "spectral-row iteration uses a row filter".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Basis for the slices a layout produces: 1D over an image row, 2D over a
/// band frame (rows × cols), or 2D over a spectral row (cols × bands).
pub fn slice_basis<T: Real>(layout: Layout, dims: SignalDims, factor: AxisTransform) -> Result<SparsityBasis<T>> {
    match (layout, factor) {
        (Layout::Rows2D, AxisTransform::Dct) => SparsityBasis::dct1d(dims.cols),
        (Layout::Rows2D, AxisTransform::Identity) => SparsityBasis::identity(dims.cols),
        (Layout::Bands3D, f) => SparsityBasis::separable2d(dims.rows, dims.cols, f),
        (Layout::SpectralRows3D, f) => SparsityBasis::separable2d(dims.cols, dims.bands, f),
    }
}

fn check_basis<T: Real>(ms: &MeasurementSet<T>, basis: &SparsityBasis<T>) -> Result<()> {
    if basis.len() != ms.ensemble.n {
        return Err(shape_err(format!(
            "basis of size {} for slices of length {}",
            basis.len(),
            ms.ensemble.n
        )));
    }
    Ok(())
}

/// Recovered signal in its natural container.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal<T> {
    Image(Image2D<T>),
    Cube(Cube3D<T>),
}

impl<T: Real> Signal<T> {
    pub fn into_image(self) -> Result<Image2D<T>> {
        match self {
            Signal::Image(i) => Ok(i),
            Signal::Cube(_) => Err(Error::Unsupported("expected an image, got a cube".into())),
        }
    }

    pub fn into_cube(self) -> Result<Cube3D<T>> {
        match self {
            Signal::Cube(c) => Ok(c),
            Signal::Image(_) => Err(Error::Unsupported("expected a cube, got an image".into())),
        }
    }
}

/// Independent recovery of every slice.
pub fn init_separate<T: Real>(
    ms: &MeasurementSet<T>,
    basis: &SparsityBasis<T>,
    solver: &SolveConfig,
) -> Result<(Signal<T>, InitOutcome<T>)> {
    let rec = Reconstructor::new(ms, basis, 0)?;
    let out = rec.init_separate(solver)?;
    Ok((rec.assemble(&out.slices)?, out))
}

/// Joint recovery of all slices under the slice basis extended with a DCT
/// across slices, subject to the block-diagonal measurement operator.
pub fn init_kcs<T: Real>(
    ms: &MeasurementSet<T>,
    basis: &SparsityBasis<T>,
    solver: &SolveConfig,
    max_unknowns: usize,
) -> Result<(Signal<T>, InitOutcome<T>)> {
    let rec = Reconstructor::new(ms, basis, 0)?;
    let out = rec.init_kcs(solver, max_unknowns)?;
    Ok((rec.assemble(&out.slices)?, out))
}

/// Reconstruct an image from row measurements.
pub fn reconstruct_2d<T: Real>(
    ms: &MeasurementSet<T>,
    basis: &SparsityBasis<T>,
    cfg: &ReconConfig,
    truth: Option<&Image2D<T>>,
) -> Result<(Image2D<T>, ReconReport)> {
    if ms.layout != Layout::Rows2D {
        return Err(Error::Config(format!(
            "2D reconstruction needs row measurements, got {}",
            ms.layout.name()
        )));
    }
    let truth = truth.map(|t| Signal::Image(t.clone()));
    let (sig, report) = reconstruct(ms, basis, cfg, truth.as_ref())?;
    Ok((sig.into_image()?, report))
}

/// Reconstruct a cube from band or spectral-row measurements.
pub fn reconstruct_3d<T: Real>(
    ms: &MeasurementSet<T>,
    basis: &SparsityBasis<T>,
    cfg: &ReconConfig,
    truth: Option<&Cube3D<T>>,
) -> Result<(Cube3D<T>, ReconReport)> {
    let want = match cfg.iterate_axis {
        IterateAxis::Bands => Layout::Bands3D,
        IterateAxis::SpectralRows => Layout::SpectralRows3D,
    };
    if ms.layout != want {
        return Err(Error::Config(format!(
            "iteration axis {:?} needs {} measurements, got {}",
            cfg.iterate_axis,
            want.name(),
            ms.layout.name()
        )));
    }
    let truth = truth.map(|t| Signal::Cube(t.clone()));
    let (sig, report) = reconstruct(ms, basis, cfg, truth.as_ref())?;
    Ok((sig.into_cube()?, report))
}

/// Layout-agnostic driver behind [`reconstruct_2d`] and [`reconstruct_3d`].
pub fn reconstruct<T: Real>(
    ms: &MeasurementSet<T>,
    basis: &SparsityBasis<T>,
    cfg: &ReconConfig,
    truth: Option<&Signal<T>>,
) -> Result<(Signal<T>, ReconReport)> {
    cfg.validate()?;
    cfg.check_layout(ms.layout)?;
    let rec = Reconstructor::new(ms, basis, cfg.cache_budget_bytes)?;
    let start = std::time::Instant::now();
    let init = match cfg.init {
        InitStrategy::Separate => rec.init_separate_threads(&cfg.solver, cfg.threads)?,
        InitStrategy::Kcs => rec.init_kcs(&cfg.solver, cfg.kcs_max_unknowns)?,
    };
    let init_seconds = start.elapsed().as_secs_f64();
    let truth_slices = truth.map(|t| rec.slices_of(t)).transpose()?;
    let (slices, mut report) = rec.iterate(init.slices, cfg, truth_slices.as_deref())?;
    report.init_converged = init.converged;
    report.max_slice_residual[0] = init.max_residual;
    report.solver_failures[0] = init.unconverged_slices.len();
    report.elapsed_seconds.iter_mut().for_each(|t| *t += init_seconds);
    report.wall_seconds += init_seconds;
    Ok((rec.assemble(&slices)?, report))
}
