//! Orthogonal matching pursuit.

use super::SolveResult;
use crate::error::{shape_err, Error, Result};
use crate::operator::LinearOperator;
use crate::scalar::{axpy, dot, norm1, norm2, Real};
use crate::transforms::SparsityBasis;

/// Stopping rule for [`solve_omp`]. At least one of the two must be active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpConfig {
    /// Maximum number of atoms.
    pub sparsity_budget: Option<usize>,
    /// Stop once `‖r‖₂ ≤ residual_tol · ‖y‖₂`; 0 disables the test.
    pub residual_tol: f64,
}

impl OmpConfig {
    pub fn budget(k: usize) -> Self {
        Self {
            sparsity_budget: Some(k),
            residual_tol: 0.0,
        }
    }

    pub fn residual(tol: f64) -> Self {
        Self {
            sparsity_budget: None,
            residual_tol: tol,
        }
    }
}

/// Greedy recovery of `θ` from `y ≈ AΨθ`.
///
/// Each step picks the atom (column of `AΨ`) with the largest absolute
/// correlation with the current residual, that is the largest
/// `|⟨AΨe_j, r⟩| / ‖AΨe_j‖₂` (lowest index on ties), and refits
/// all active coefficients by least squares, kept incremental through a
/// Gram–Schmidt QR of the active columns.
pub fn solve_omp<T, O>(op: &O, basis: &SparsityBasis<T>, y: &[T], cfg: &OmpConfig) -> Result<SolveResult<T>>
where
    T: Real,
    O: LinearOperator<T> + ?Sized,
{
    let (m, n) = (op.nrows(), op.ncols());
    if basis.len() != n || y.len() != m {
        return Err(shape_err(format!(
            "operator {m}x{n}, basis {}, measurements {}",
            basis.len(),
            y.len()
        )));
    }
    let budget = match (cfg.sparsity_budget, cfg.residual_tol) {
        (Some(0), _) => return Err(Error::Config("OMP budget must be ≥ 1".into())),
        (None, t) if !(t > 0.0) => {
            return Err(Error::Config("OMP needs a budget or a positive residual tolerance".into()))
        }
        (b, _) => b.unwrap_or(m).min(m).min(n),
    };
    let y_norm = norm2(y);
    if y_norm == T::zero() {
        return Ok(SolveResult::zero(n));
    }
    let tol = T::of(cfg.residual_tol) * y_norm;
    let atom_norms = atom_norms(op, basis)?;

    let mut residual = y.to_vec();
    let mut active: Vec<usize> = Vec::new();
    let mut excluded = vec![false; n];
    // orthonormal basis of the active columns and the R factor, column by column
    let mut qs: Vec<Vec<T>> = Vec::new();
    let mut r_cols: Vec<Vec<T>> = Vec::new();
    let mut qty: Vec<T> = Vec::new();
    let mut corr = vec![T::zero(); n];
    let mut atom = vec![T::zero(); n];
    let mut col = vec![T::zero(); m];
    let mut reached_tol = false;

    while active.len() < budget {
        if norm2(&residual) <= tol {
            reached_tol = true;
            break;
        }
        op.apply_adjoint(&residual, &mut corr);
        basis.analyze_in_place(&mut corr)?;
        let mut pick = None;
        let mut best = T::zero();
        for (j, &c) in corr.iter().enumerate() {
            if excluded[j] || atom_norms[j] == T::zero() {
                continue;
            }
            let score = c.abs() / atom_norms[j];
            if score > best {
                best = score;
                pick = Some(j);
            }
        }
        let Some(j) = pick else { break };
        excluded[j] = true;

        atom.iter_mut().for_each(|v| *v = T::zero());
        atom[j] = T::one();
        basis.synthesize_in_place(&mut atom)?;
        op.apply(&atom, &mut col);
        let col_norm = norm2(&col);
        let mut rj = Vec::with_capacity(qs.len() + 1);
        let mut v = col.clone();
        for q in &qs {
            let c = dot(q, &v);
            axpy(-c, q, &mut v);
            rj.push(c);
        }
        // second pass keeps the basis orthogonal in floating point
        for (q, c0) in qs.iter().zip(rj.iter_mut()) {
            let c = dot(q, &v);
            axpy(-c, q, &mut v);
            *c0 = *c0 + c;
        }
        let d = norm2(&v);
        if d <= T::of(1e3) * T::epsilon() * col_norm {
            continue;
        }
        v.iter_mut().for_each(|x| *x = *x / d);
        rj.push(d);
        let c = dot(&v, y);
        axpy(-c, &v, &mut residual);
        qty.push(c);
        qs.push(v);
        r_cols.push(rj);
        active.push(j);
    }
    if !reached_tol && norm2(&residual) <= tol {
        reached_tol = true;
    }

    // back substitution R c = Qᵀy
    let k = active.len();
    let mut coef = qty.clone();
    for i in (0..k).rev() {
        let mut s = coef[i];
        for jj in i + 1..k {
            s = s - r_cols[jj][i] * coef[jj];
        }
        coef[i] = s / r_cols[i][i];
    }
    let mut theta = vec![T::zero(); n];
    for (&j, &c) in active.iter().zip(&coef) {
        theta[j] = c;
    }
    let x = basis.synthesize(&theta)?;
    let mut ax = vec![T::zero(); m];
    op.apply(&x, &mut ax);
    axpy(-T::one(), y, &mut ax);
    let converged = reached_tol || Some(k) == cfg.sparsity_budget;
    Ok(SolveResult {
        l1_objective: norm1(&theta),
        residual_l2: norm2(&ax),
        theta_hat: theta,
        iterations: k,
        converged,
        objective_trace: Vec::new(),
    })
}

/// `‖AΨe_j‖₂` for every atom, from the rows of `AΨ` (row `i` is `Ψᵀaᵢ`).
fn atom_norms<T, O>(op: &O, basis: &SparsityBasis<T>) -> Result<Vec<T>>
where
    T: Real,
    O: LinearOperator<T> + ?Sized,
{
    let (m, n) = (op.nrows(), op.ncols());
    let mut sq = vec![T::zero(); n];
    let mut row = vec![T::zero(); n];
    let mut unit = vec![T::zero(); m];
    for i in 0..m {
        match op.as_dense() {
            Some(a) => row.copy_from_slice(a.row(i)),
            None => {
                unit[i] = T::one();
                op.apply_adjoint(&unit, &mut row);
                unit[i] = T::zero();
            }
        }
        basis.analyze_in_place(&mut row)?;
        for (s, &v) in sq.iter_mut().zip(&row) {
            *s = *s + v * v;
        }
    }
    Ok(sq.into_iter().map(|v| v.sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::operator::DenseOperator;
    use crate::rng::GaussianStream;

    fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix<f64> {
        let mut g = GaussianStream::new(seed);
        DenseMatrix::from_row_major(m, n, (0..m * n).map(|_| g.standard_normal()).collect()).unwrap()
    }

    #[test]
    fn single_atom_selected_first() {
        let a = gaussian(10, 16, 4);
        let y = a.column(7);
        let r = solve_omp(
            &DenseOperator::new(a),
            &SparsityBasis::identity(16).unwrap(),
            &y,
            &OmpConfig::budget(1),
        )
        .unwrap();
        assert_eq!(r.support(1e-12), vec![7]);
        assert!(r.residual_l2 < 1e-12);
        assert!((r.theta_hat[7] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_rule_stops_early() {
        let a = gaussian(12, 20, 9);
        let mut theta = vec![0.0; 20];
        theta[3] = 2.0;
        theta[15] = -1.0;
        let y = a.mul_vec(&theta);
        let r = solve_omp(
            &DenseOperator::new(a),
            &SparsityBasis::identity(20).unwrap(),
            &y,
            &OmpConfig::residual(1e-10),
        )
        .unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 2);
        assert_eq!(r.support(1e-9), vec![3, 15]);
    }

    #[test]
    fn dct_atom_in_transform_domain() {
        let n = 32;
        let basis = SparsityBasis::dct1d(n).unwrap();
        let a = gaussian(12, n, 2);
        let mut theta = vec![0.0; n];
        theta[5] = 1.5;
        let y = a.mul_vec(&basis.synthesize(&theta).unwrap());
        let r = solve_omp(&DenseOperator::new(a), &basis, &y, &OmpConfig::budget(1)).unwrap();
        assert_eq!(r.support(1e-9), vec![5]);
        assert!((r.theta_hat[5] - 1.5).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_config_and_shapes() {
        let op = DenseOperator::new(gaussian(4, 8, 1));
        let b = SparsityBasis::identity(8).unwrap();
        assert!(solve_omp(&op, &b, &[1.0; 4], &OmpConfig::budget(0)).is_err());
        assert!(solve_omp(&op, &b, &[1.0; 4], &OmpConfig::residual(0.0)).is_err());
        assert!(solve_omp(&op, &b, &[1.0; 3], &OmpConfig::budget(2)).is_err());
        let z = solve_omp(&op, &b, &[0.0; 4], &OmpConfig::budget(2)).unwrap();
        assert!(z.theta_hat.iter().all(|&v| v == 0.0));
    }
}
