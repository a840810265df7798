#![allow(dead_code)]

use pcs_core::linalg::DenseMatrix;
use pcs_core::rng::{derive_seed, GaussianStream};
use pcs_core::{draw_sensing_matrix, SeededSensingEnsemble};

/// K-sparse vector of length n with coefficients of magnitude in [1, 2).
pub fn planted(seed: u64, n: usize, k: usize) -> Vec<f64> {
    let mut g = GaussianStream::new(derive_seed(seed, 1 << 40));
    let mut theta = vec![0.0; n];
    let mut placed = 0;
    while placed < k {
        let j = g.below(n);
        if theta[j] == 0.0 {
            let sign = if g.uniform() < 0.5 { -1.0 } else { 1.0 };
            theta[j] = sign * (1.0 + g.uniform());
            placed += 1;
        }
    }
    theta
}

/// Gaussian m×n sensing matrix with N(0, 1/m) entries.
pub fn gaussian(seed: u64, m: usize, n: usize) -> DenseMatrix<f64> {
    let ens = if m < n {
        SeededSensingEnsemble::new(seed, 1, m, n)
    } else {
        SeededSensingEnsemble::non_compressive(seed, 1, m, n)
    }
    .unwrap();
    draw_sensing_matrix(&ens, 0).unwrap()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

pub fn uniform_vec(seed: u64, n: usize) -> Vec<f64> {
    let mut g = GaussianStream::new(seed);
    (0..n).map(|_| g.uniform()).collect()
}
