//! Exhaustive sparse least squares, usable as a ground-truth oracle.

use super::SolveResult;
use crate::error::{shape_err, Error, Result};
use crate::linalg::{least_squares, DenseMatrix};
use crate::scalar::{axpy, norm1, norm2, Real};

pub const L0_MAX_N: usize = 20;
pub const L0_MAX_SPARSITY: usize = 3;

/// Minimum-residual solution of `y ≈ Aθ` over all supports of size ≤ `k`.
///
/// Ties within rounding favour the smaller support, then the
/// lexicographically first one. `iterations` counts the supports examined.
pub fn solve_l0_bruteforce<T: Real>(a: &DenseMatrix<T>, y: &[T], k: usize) -> Result<SolveResult<T>> {
    let (m, n) = (a.rows(), a.cols());
    if y.len() != m {
        return Err(shape_err(format!("{m} rows vs {} measurements", y.len())));
    }
    if n > L0_MAX_N || k > L0_MAX_SPARSITY {
        return Err(Error::TooLarge(format!(
            "exhaustive search limited to N ≤ {L0_MAX_N}, K ≤ {L0_MAX_SPARSITY} (got N={n}, K={k})"
        )));
    }
    let y_norm = norm2(y);
    let slack = T::of(1e3) * T::epsilon() * y_norm.max(T::min_positive_value());
    let mut best_theta = vec![T::zero(); n];
    let mut best_res = y_norm;
    let mut examined = 1;
    let mut support = Vec::with_capacity(k);
    for size in 1..=k.min(m) {
        for_each_subset(n, size, &mut support, &mut |s| {
            examined += 1;
            let sub = a.select_columns(s);
            let Ok(c) = least_squares(&sub, y) else { return };
            let mut r = y.to_vec();
            for (&j, &cj) in s.iter().zip(&c) {
                axpy(-cj, &a.column(j), &mut r);
            }
            let res = norm2(&r);
            if res + slack < best_res {
                best_res = res;
                best_theta.iter_mut().for_each(|v| *v = T::zero());
                for (&j, &cj) in s.iter().zip(&c) {
                    best_theta[j] = cj;
                }
            }
        });
    }
    Ok(SolveResult {
        l1_objective: norm1(&best_theta),
        residual_l2: best_res,
        theta_hat: best_theta,
        iterations: examined,
        converged: true,
        objective_trace: Vec::new(),
    })
}

fn for_each_subset(n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for j in start..n {
            cur.push(j);
            go(j + 1, n, k, cur, f);
            cur.pop();
        }
    }
    cur.clear();
    go(0, n, k, cur, f);
}
