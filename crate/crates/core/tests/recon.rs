mod common;

use pcs_core::io::{synth_cube, synth_image, CubeProfile, ImageProfile};
use pcs_core::recon::{reconstruct, IterateAxis};
use pcs_core::transforms::AxisTransform;
use pcs_core::{
    acquire_bands_3d, acquire_rows_2d, acquire_spectral_rows_3d, draw_sensing_matrix, init_kcs, init_separate,
    reconstruct_2d, reconstruct_3d, slice_basis, Basis, Cube, Error, Image, InitStrategy, Layout, Predictor,
    ReconConfig, Reconstructor, RowFilter, SeededSensingEnsemble, Signal, SolveConfig,
};

fn row_cfg(f: RowFilter, iters: usize) -> ReconConfig {
    ReconConfig {
        predictor: Predictor::Row(f),
        max_outer_iters: iters,
        ..ReconConfig::default()
    }
}

fn blockls_cfg(iters: usize) -> ReconConfig {
    ReconConfig {
        predictor: "blockls".parse().unwrap(),
        max_outer_iters: iters,
        ..ReconConfig::default()
    }
}

fn flat_dist(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn square_sensing_gives_exact_init_and_a_fixed_point() {
    let x = Image::from_rows(8, 12, common::uniform_vec(4, 96)).unwrap();
    let ens = SeededSensingEnsemble::non_compressive(9, 8, 12, 12).unwrap();
    let ms = acquire_rows_2d(&x, &ens).unwrap();
    let basis = Basis::dct1d(12).unwrap();
    for f in RowFilter::ALL {
        let (rec, report) = reconstruct_2d(&ms, &basis, &row_cfg(f, 1), Some(&x)).unwrap();
        assert!(report.init_mse().unwrap() < 1e-20);
        assert!(report.relative_change[1] * common::norm(x.as_slice()) < 10.0 * 1e-6);
        assert!(pcs_core::metrics::mse_image(&rec, &x).unwrap() < 1e-18);
    }
}

#[test]
fn identical_rows_are_a_fixed_point_of_p1() {
    let row = common::uniform_vec(8, 16);
    let x = Image::from_fn(10, 16, |_, c| row[c]);
    let ens = SeededSensingEnsemble::new(3, 10, 6, 16).unwrap();
    let ms = acquire_rows_2d(&x, &ens).unwrap();
    let basis = Basis::dct1d(16).unwrap();
    let rec = Reconstructor::new(&ms, &basis, 1 << 24).unwrap();
    let truth = rec.slices_of(&Signal::Image(x)).unwrap();
    let (out, report) = rec.iterate(truth.clone(), &row_cfg(RowFilter::P1, 1), Some(&truth)).unwrap();
    assert!(flat_dist(&out, &truth) < 10.0 * 1e-6);
    assert!(report.converged);
}

#[test]
fn identical_bands_are_a_fixed_point_of_blockls() {
    let frame = common::uniform_vec(2, 64);
    let cube = Cube::from_fn(8, 8, 5, |r, c, _| frame[r + 8 * c]);
    let ens = SeededSensingEnsemble::new(5, 5, 20, 64).unwrap();
    let ms = acquire_bands_3d(&cube, &ens).unwrap();
    let basis = slice_basis(Layout::Bands3D, ms.dims, AxisTransform::Dct).unwrap();
    let rec = Reconstructor::new(&ms, &basis, 1 << 24).unwrap();
    let truth = rec.slices_of(&Signal::Cube(cube)).unwrap();
    let (out, _) = rec.iterate(truth.clone(), &blockls_cfg(1), Some(&truth)).unwrap();
    assert!(flat_dist(&out, &truth) < 10.0 * 1e-6);
}

#[test]
fn updated_rows_stay_consistent_with_their_measurements() {
    let x = synth_image(7, 16, 32, &ImageProfile::default()).unwrap();
    let ens = SeededSensingEnsemble::new(11, 16, 16, 32).unwrap();
    let ms = acquire_rows_2d(&x, &ens).unwrap();
    let basis = Basis::dct1d(32).unwrap();
    let cfg = row_cfg(RowFilter::P3, 3);
    let (rec, report) = reconstruct_2d(&ms, &basis, &cfg, Some(&x)).unwrap();
    let mut worst: f64 = 0.0;
    for i in 1..15 {
        let phi: pcs_core::Matrix = draw_sensing_matrix(&ens, i).unwrap();
        let y = ms.slice(i);
        let r: Vec<f64> = phi.mul_vec(rec.row(i)).iter().zip(y).map(|(a, b)| a - b).collect();
        let rel = common::norm(&r) / common::norm(y);
        worst = worst.max(rel);
        if *report.solver_failures.last().unwrap() == 0 {
            assert!(rel <= cfg.solver.residual_bound() * (1.0 + 1e-6), "row {i}: {rel}");
        }
    }
    let reported = *report.max_slice_residual.last().unwrap();
    assert!((worst - reported).abs() <= 1e-9 + 1e-6 * reported, "{worst} vs {reported}");
}

#[test]
fn runs_are_deterministic() {
    let x = synth_image(1, 12, 24, &ImageProfile::default()).unwrap();
    let ens = SeededSensingEnsemble::new(2, 12, 8, 24).unwrap();
    let ms = acquire_rows_2d(&x, &ens).unwrap();
    let basis = Basis::dct1d(24).unwrap();
    let cfg = row_cfg(RowFilter::P2, 3);
    let (a, ra) = reconstruct_2d(&ms, &basis, &cfg, Some(&x)).unwrap();
    let (b, rb) = reconstruct_2d(&ms, &basis, &ReconConfig { threads: 3, ..cfg }, Some(&x)).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.mse, rb.mse);
    assert_eq!(ra.compressibility, rb.compressibility);
    assert_eq!(ra.relative_change[1..], rb.relative_change[1..]);
}

#[test]
fn kcs_init_beats_separate_on_3d_sparse_cubes() {
    let (rows, cols, bands) = (8, 8, 4);
    let b3 = pcs_core::transforms::SparsityBasis::<f64>::separable3d([rows, cols, bands], [AxisTransform::Dct; 3])
        .unwrap();
    let solver = SolveConfig::default();
    let mut wins = 0;
    for seed in 0..100 {
        let theta = common::planted(seed, rows * cols * bands, 6);
        let cube = Cube::from_band_vects(rows, cols, bands, b3.synthesize(&theta).unwrap()).unwrap();
        let ens = SeededSensingEnsemble::new(1000 + seed, bands, 24, rows * cols).unwrap();
        let ms = acquire_bands_3d(&cube, &ens).unwrap();
        let basis = slice_basis(Layout::Bands3D, ms.dims, AxisTransform::Dct).unwrap();
        let (sep, _) = init_separate(&ms, &basis, &solver).unwrap();
        let (kcs, _) = init_kcs(&ms, &basis, &solver, 1 << 18).unwrap();
        let err = |s: Signal<f64>| pcs_core::metrics::mse_cube(&s.into_cube().unwrap(), &cube).unwrap();
        if err(kcs) < err(sep) {
            wins += 1;
        }
    }
    assert!(wins >= 90, "KCS init won on {wins}/100 cubes");
}

#[test]
fn correlated_cube_gains_at_least_3db() {
    let cube = synth_cube(1, 16, 16, 8, &CubeProfile::default()).unwrap();
    let ens = SeededSensingEnsemble::new(1, 8, 64, 256).unwrap();
    let ms = acquire_bands_3d(&cube, &ens).unwrap();
    let basis = slice_basis(Layout::Bands3D, ms.dims, AxisTransform::Dct).unwrap();
    let (_, report) = reconstruct_3d(&ms, &basis, &blockls_cfg(40), Some(&cube)).unwrap();
    assert!(report.gain_db().unwrap() >= 3.0, "{:?}", report.gain_db());
    assert_eq!(report.mse.as_ref().unwrap().len(), report.iterations_run + 1);
    assert_eq!(report.relative_change.len(), report.iterations_run + 1);
}

#[test]
fn spectral_row_iteration_runs_with_p1() {
    let smooth = CubeProfile {
        band_limit: 3,
        innovation_atoms: 0,
        ..CubeProfile::default()
    };
    let cube = synth_cube(4, 16, 8, 4, &smooth).unwrap();
    let ens = SeededSensingEnsemble::new(4, 16, 12, 32).unwrap();
    let ms = acquire_spectral_rows_3d(&cube, &ens).unwrap();
    let basis = slice_basis(Layout::SpectralRows3D, ms.dims, AxisTransform::Dct).unwrap();
    let cfg = ReconConfig {
        iterate_axis: IterateAxis::SpectralRows,
        ..row_cfg(RowFilter::P1, 5)
    };
    let (out, report) = reconstruct_3d(&ms, &basis, &cfg, Some(&cube)).unwrap();
    assert_eq!(out.shape(), cube.shape());
    assert!(report.final_mse().unwrap() < report.init_mse().unwrap());
}

#[test]
fn gauss_seidel_is_available_and_differs() {
    let x = synth_image(3, 16, 16, &ImageProfile::default()).unwrap();
    let ens = SeededSensingEnsemble::new(3, 16, 6, 16).unwrap();
    let ms = acquire_rows_2d(&x, &ens).unwrap();
    let basis = Basis::dct1d(16).unwrap();
    let jacobi = row_cfg(RowFilter::P3, 2);
    let gs = ReconConfig {
        gauss_seidel: true,
        ..jacobi.clone()
    };
    let (a, _) = reconstruct_2d(&ms, &basis, &jacobi, Some(&x)).unwrap();
    let (b, _) = reconstruct_2d(&ms, &basis, &gs, Some(&x)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn single_precision_pipeline() {
    let x = synth_image(2, 16, 16, &ImageProfile::default()).unwrap().cast::<f32>();
    let ens = SeededSensingEnsemble::new(2, 16, 8, 16).unwrap();
    let ms = acquire_rows_2d(&x, &ens).unwrap();
    let basis = pcs_core::BasisF32::dct1d(16).unwrap();
    let cfg = ReconConfig {
        solver: SolveConfig {
            feasibility_tol: 1e-4,
            ..ReconConfig::default_solver()
        },
        ..row_cfg(RowFilter::P3, 3)
    };
    let (_, report) = reconstruct_2d(&ms, &basis, &cfg, Some(&x)).unwrap();
    assert!(report.final_mse().unwrap() < report.init_mse().unwrap());
}

#[test]
fn misconfigurations_are_refused() {
    let x = synth_image(2, 8, 8, &ImageProfile::default()).unwrap();
    let ens = SeededSensingEnsemble::new(2, 8, 4, 8).unwrap();
    let ms = acquire_rows_2d(&x, &ens).unwrap();
    let basis = Basis::dct1d(8).unwrap();
    assert!(matches!(
        reconstruct_2d(&ms, &basis, &blockls_cfg(1), None),
        Err(Error::Config(_))
    ));
    assert!(reconstruct_3d(&ms, &basis, &row_cfg(RowFilter::P1, 1), None).is_err());
    assert!(reconstruct_2d(&ms, &Basis::dct1d(9).unwrap(), &row_cfg(RowFilter::P1, 1), None).is_err());
    let zero_iters = ReconConfig {
        max_outer_iters: 0,
        ..ReconConfig::default()
    };
    assert!(reconstruct_2d(&ms, &basis, &zero_iters, None).is_err());
}

#[test]
fn kcs_size_guard() {
    let x = synth_image(2, 16, 16, &ImageProfile::default()).unwrap();
    let ens = SeededSensingEnsemble::new(2, 16, 8, 16).unwrap();
    let ms = acquire_rows_2d(&x, &ens).unwrap();
    let basis = Basis::dct1d(16).unwrap();
    let cfg = ReconConfig {
        init: InitStrategy::Kcs,
        kcs_max_unknowns: 100,
        ..ReconConfig::default()
    };
    assert!(matches!(
        reconstruct(&ms, &basis, &cfg, None),
        Err(Error::TooLarge(_))
    ));
}
