//! Progressive compressive acquisition of images and hyperspectral cubes,
//! with iterative prediction-residual reconstruction.
//!
//! The numerical core is generic over the sample type ([`Real`], implemented
//! for `f32` and `f64`); the aliases at the crate root pick `f64`.

pub mod bench;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod operator;
pub mod predictors;
pub mod recon;
pub mod rng;
pub mod scalar;
pub mod sensing;
pub mod signal;
pub mod solvers;
pub mod transforms;

pub use error::{Error, Result};
pub use operator::{BlockDiagonalOperator, DenseOperator, FnOperator, GramFactor, LinearOperator};
pub use metrics::{gain_db, mse, row_compressibility, CompressibilityConfig};
pub use predictors::{predict_band_blockls, predict_band_twosided, predict_row, BlockLsConfig, RowFilter};
pub use recon::{
    init_kcs, init_separate, reconstruct, reconstruct_2d, reconstruct_3d, InitStrategy, IterateAxis, Predictor, ReconConfig,
    ReconReport, Reconstructor, Signal, slice_basis,
};
pub use scalar::Real;
pub use sensing::{
    acquire_bands_3d, acquire_rows_2d, acquire_spectral_rows_3d, block_diag_apply, block_diag_apply_adjoint,
    draw_sensing_matrix, Layout, MeasurementSet, SeededSensingEnsemble, SignalDims,
};
pub use signal::{Cube3D, Image2D, ValueRange};
pub use solvers::{solve_l0_bruteforce, solve_l1, solve_omp, OmpConfig, SolveConfig, SolveResult};
pub use transforms::{AxisTransform, BasisKind, SparsityBasis};

pub type Image = Image2D<f64>;
pub type Cube = Cube3D<f64>;
pub type Measurements = MeasurementSet<f64>;
pub type Basis = SparsityBasis<f64>;
pub type Matrix = linalg::DenseMatrix<f64>;

pub type ImageF32 = Image2D<f32>;
pub type CubeF32 = Cube3D<f32>;
pub type MeasurementsF32 = MeasurementSet<f32>;
pub type BasisF32 = SparsityBasis<f32>;
