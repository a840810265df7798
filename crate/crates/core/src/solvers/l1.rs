//! Basis pursuit by Douglas–Rachford splitting.
//!
//! The problem `min ‖θ‖₁ s.t. θ ∈ C` with `C = {θ : Bθ = y}` (`B = AΨ`) is
//! split into the ℓ1 prox (soft thresholding) and the projection onto `C`.
//! With `G = AAᵀ = BBᵀ = LLᵀ` (Ψ is orthonormal) the projection is
//! `θ − Bᵀ L⁻ᵀ (L⁻¹Bθ − L⁻¹y)`, so only `L` is needed. When the operator
//! cannot provide `L`, the Gram system is solved by conjugate gradients.
//!
//! The relaxed problem uses the set `{θ : ‖L⁻¹(Bθ − y)‖₂ ≤ ε‖y‖₂ / ‖L‖₂}`,
//! which lies inside `{θ : ‖Bθ − y‖₂ ≤ ε‖y‖₂}` and has an exact projection.

use std::sync::OnceLock;

use super::{SolveConfig, SolveResult};
use crate::error::{shape_err, Result};
use crate::linalg::{conjugate_gradient, Cholesky, DenseMatrix};
use crate::operator::{GramFactor, LinearOperator};
use crate::scalar::{axpy, dot, norm1, norm2, Real};
use crate::transforms::SparsityBasis;

/// Solve `min ‖θ‖₁` subject to `‖AΨθ − y‖₂ ≤ ε‖y‖₂` (`ε = 0`: equality).
///
/// Dense operators take the precomputed-projection path of [`DenseL1`];
/// others are applied matrix-free. Non-convergence is reported through
/// `converged = false` with the best iterate found.
pub fn solve_l1<T, O>(op: &O, basis: &SparsityBasis<T>, y: &[T], cfg: &SolveConfig) -> Result<SolveResult<T>>
where
    T: Real,
    O: LinearOperator<T> + ?Sized,
{
    cfg.validate()?;
    check_dims(op.nrows(), op.ncols(), basis, y)?;
    if let Some(a) = op.as_dense() {
        if let Ok(p) = DenseL1::new(a, basis) {
            return p.solve(y, cfg);
        }
    }
    let y_norm = norm2(y);
    match op.gram_factor() {
        Some(gram) => {
            let mut yt = y.to_vec();
            gram.whiten(&mut yt);
            let radius = if cfg.relaxed_epsilon > 0.0 {
                T::of(cfg.relaxed_epsilon) * y_norm / gram.spectral_norm()
            } else {
                T::zero()
            };
            let mut p = OperatorProjector {
                op,
                basis,
                gram,
                yt,
                y,
                radius,
                sig: vec![T::zero(); op.ncols()],
                meas: vec![T::zero(); op.nrows()],
            };
            douglas_rachford(&mut p, y_norm, cfg)
        }
        None => {
            let radius = if cfg.relaxed_epsilon > 0.0 {
                T::of(cfg.relaxed_epsilon) * y_norm / gram_lambda_max(op).sqrt()
            } else {
                T::zero()
            };
            let cg_tol = T::of(cfg.feasibility_tol * 1e-3).max(T::of(16.0) * T::epsilon());
            let mut p = CgProjector {
                op,
                basis,
                y,
                radius,
                cg_tol,
                u: vec![T::zero(); op.nrows()],
                sig: vec![T::zero(); op.ncols()],
                meas: vec![T::zero(); op.nrows()],
            };
            douglas_rachford(&mut p, y_norm, cfg)
        }
    }
}

fn check_dims<T: Real>(m: usize, n: usize, basis: &SparsityBasis<T>, y: &[T]) -> Result<()> {
    if basis.len() != n {
        return Err(shape_err(format!(
            "operator has {n} columns, basis has size {}",
            basis.len()
        )));
    }
    if y.len() != m {
        return Err(shape_err(format!(
            "operator has {m} rows, got {} measurements",
            y.len()
        )));
    }
    Ok(())
}

/// A dense sensing matrix prepared for repeated basis-pursuit solves.
///
/// Holds `Q = L⁻¹AΨ`, whose rows are orthonormal, and `L`. Preparing costs
/// one basis analysis per row of `A` plus an `m × m` Cholesky factorization;
/// every subsequent solve only needs products with `Q` and `Qᵀ`.
#[derive(Debug, Clone)]
pub struct DenseL1<T: Real> {
    q: DenseMatrix<T>,
    gram: GramFactor<T>,
    l_norm: OnceLock<T>,
}

impl<T: Real> DenseL1<T> {
    pub fn new(a: &DenseMatrix<T>, basis: &SparsityBasis<T>) -> Result<Self> {
        if basis.len() != a.cols() {
            return Err(shape_err(format!(
                "matrix has {} columns, basis has size {}",
                a.cols(),
                basis.len()
            )));
        }
        let b = if basis.is_identity() {
            a.clone()
        } else {
            let mut data = Vec::with_capacity(a.rows() * a.cols());
            for i in 0..a.rows() {
                data.extend(basis.analyze(a.row(i))?);
            }
            DenseMatrix::from_row_major(a.rows(), a.cols(), data)?
        };
        let ch = Cholesky::factor(&b.gram_rows())?;
        let q = ch.forward_rows(&b);
        Ok(Self {
            q,
            gram: GramFactor::Dense(ch),
            l_norm: OnceLock::new(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.q.rows()
    }

    pub fn ncols(&self) -> usize {
        self.q.cols()
    }

    /// Approximate heap footprint in bytes.
    pub fn footprint(&self) -> usize {
        let m = self.q.rows();
        (self.q.rows() * self.q.cols() + m * m) * std::mem::size_of::<T>()
    }

    /// `AΨθ`, evaluated as `L(Qθ)`.
    pub fn measure(&self, theta: &[T]) -> Result<Vec<T>> {
        if theta.len() != self.q.cols() {
            return Err(shape_err(format!(
                "coefficient vector of length {} vs {}",
                theta.len(),
                self.q.cols()
            )));
        }
        let mut out = self.q.mul_vec(theta);
        self.gram.color(&mut out);
        Ok(out)
    }

    pub fn solve(&self, y: &[T], cfg: &SolveConfig) -> Result<SolveResult<T>> {
        cfg.validate()?;
        if y.len() != self.q.rows() {
            return Err(shape_err(format!(
                "prepared problem has {} rows, got {} measurements",
                self.q.rows(),
                y.len()
            )));
        }
        let y_norm = norm2(y);
        let mut yt = y.to_vec();
        self.gram.whiten(&mut yt);
        let radius = if cfg.relaxed_epsilon > 0.0 {
            let l = *self.l_norm.get_or_init(|| self.gram.spectral_norm());
            T::of(cfg.relaxed_epsilon) * y_norm / l
        } else {
            T::zero()
        };
        let mut p = DenseProjector {
            q: &self.q,
            gram: &self.gram,
            yt,
            radius,
            r: vec![T::zero(); self.q.rows()],
        };
        douglas_rachford(&mut p, y_norm, cfg)
    }
}

trait Projector<T: Real> {
    fn dim(&self) -> usize;
    /// `out ← P_C(z)`
    fn project(&mut self, z: &[T], out: &mut [T]) -> Result<()>;
    /// `‖Bθ − y‖₂`
    fn residual(&mut self, theta: &[T]) -> Result<T>;
}

/// Shrink `r` onto the ball of the given radius; returns false when `r` is
/// already inside (no correction needed).
fn shrink_to_ball<T: Real>(r: &mut [T], radius: T) -> bool {
    if radius <= T::zero() {
        return true;
    }
    let s = norm2(r);
    if s <= radius {
        return false;
    }
    let f = T::one() - radius / s;
    r.iter_mut().for_each(|v| *v = *v * f);
    true
}

struct DenseProjector<'a, T: Real> {
    q: &'a DenseMatrix<T>,
    gram: &'a GramFactor<T>,
    yt: Vec<T>,
    radius: T,
    r: Vec<T>,
}

impl<T: Real> Projector<T> for DenseProjector<'_, T> {
    fn dim(&self) -> usize {
        self.q.cols()
    }

    fn project(&mut self, z: &[T], out: &mut [T]) -> Result<()> {
        out.copy_from_slice(z);
        for (i, ri) in self.r.iter_mut().enumerate() {
            *ri = dot(self.q.row(i), z) - self.yt[i];
        }
        if shrink_to_ball(&mut self.r, self.radius) {
            for (i, &ri) in self.r.iter().enumerate() {
                axpy(-ri, self.q.row(i), out);
            }
        }
        Ok(())
    }

    fn residual(&mut self, theta: &[T]) -> Result<T> {
        for (i, ri) in self.r.iter_mut().enumerate() {
            *ri = dot(self.q.row(i), theta) - self.yt[i];
        }
        self.gram.color(&mut self.r);
        Ok(norm2(&self.r))
    }
}

struct OperatorProjector<'a, T: Real, O: ?Sized> {
    op: &'a O,
    basis: &'a SparsityBasis<T>,
    gram: GramFactor<T>,
    yt: Vec<T>,
    y: &'a [T],
    radius: T,
    sig: Vec<T>,
    meas: Vec<T>,
}

impl<T: Real, O: LinearOperator<T> + ?Sized> Projector<T> for OperatorProjector<'_, T, O> {
    fn dim(&self) -> usize {
        self.op.ncols()
    }

    fn project(&mut self, z: &[T], out: &mut [T]) -> Result<()> {
        self.sig.copy_from_slice(z);
        self.basis.synthesize_in_place(&mut self.sig)?;
        self.op.apply(&self.sig, &mut self.meas);
        self.gram.whiten(&mut self.meas);
        axpy(-T::one(), &self.yt, &mut self.meas);
        out.copy_from_slice(z);
        if shrink_to_ball(&mut self.meas, self.radius) {
            self.gram.whiten_adjoint(&mut self.meas);
            self.op.apply_adjoint(&self.meas, &mut self.sig);
            self.basis.analyze_in_place(&mut self.sig)?;
            axpy(-T::one(), &self.sig, out);
        }
        Ok(())
    }

    fn residual(&mut self, theta: &[T]) -> Result<T> {
        measurement_residual(self.op, self.basis, theta, self.y, &mut self.sig, &mut self.meas)
    }
}

struct CgProjector<'a, T: Real, O: ?Sized> {
    op: &'a O,
    basis: &'a SparsityBasis<T>,
    y: &'a [T],
    radius: T,
    cg_tol: T,
    /// Warm start for the Gram solve.
    u: Vec<T>,
    sig: Vec<T>,
    meas: Vec<T>,
}

impl<T: Real, O: LinearOperator<T> + ?Sized> Projector<T> for CgProjector<'_, T, O> {
    fn dim(&self) -> usize {
        self.op.ncols()
    }

    fn project(&mut self, z: &[T], out: &mut [T]) -> Result<()> {
        let op = self.op;
        self.sig.copy_from_slice(z);
        self.basis.synthesize_in_place(&mut self.sig)?;
        op.apply(&self.sig, &mut self.meas);
        axpy(-T::one(), self.y, &mut self.meas);
        let mut tmp = vec![T::zero(); op.ncols()];
        let gram = |v: &[T], out: &mut [T]| {
            let mut t = vec![T::zero(); op.ncols()];
            op.apply_adjoint(v, &mut t);
            op.apply(&t, out);
        };
        let m = op.nrows();
        conjugate_gradient(gram, &self.meas, &mut self.u, self.cg_tol, 2 * m + 50);
        let mut factor = T::one();
        if self.radius > T::zero() {
            // whitened residual norm: sqrt(rᵀ G⁻¹ r)
            let s = dot(&self.meas, &self.u).max(T::zero()).sqrt();
            factor = if s <= self.radius { T::zero() } else { T::one() - self.radius / s };
        }
        out.copy_from_slice(z);
        if factor > T::zero() {
            op.apply_adjoint(&self.u, &mut tmp);
            self.basis.analyze_in_place(&mut tmp)?;
            axpy(-factor, &tmp, out);
        }
        Ok(())
    }

    fn residual(&mut self, theta: &[T]) -> Result<T> {
        measurement_residual(self.op, self.basis, theta, self.y, &mut self.sig, &mut self.meas)
    }
}

fn measurement_residual<T: Real, O: LinearOperator<T> + ?Sized>(
    op: &O,
    basis: &SparsityBasis<T>,
    theta: &[T],
    y: &[T],
    sig: &mut [T],
    meas: &mut [T],
) -> Result<T> {
    sig.copy_from_slice(theta);
    basis.synthesize_in_place(sig)?;
    op.apply(sig, meas);
    axpy(-T::one(), y, meas);
    Ok(norm2(meas))
}

/// Largest eigenvalue of `AAᵀ` by power iteration.
fn gram_lambda_max<T: Real, O: LinearOperator<T> + ?Sized>(op: &O) -> T {
    let (m, n) = (op.nrows(), op.ncols());
    let mut v: Vec<T> = (0..m).map(|i| T::one() + T::of((i % 7) as f64 * 0.1)).collect();
    let mut t = vec![T::zero(); n];
    let mut w = vec![T::zero(); m];
    let mut lam = T::zero();
    for _ in 0..200 {
        let nv = norm2(&v);
        if nv == T::zero() {
            break;
        }
        v.iter_mut().for_each(|x| *x = *x / nv);
        op.apply_adjoint(&v, &mut t);
        op.apply(&t, &mut w);
        let next = dot(&v, &w);
        std::mem::swap(&mut v, &mut w);
        let done = (next - lam).abs() <= T::of(1e-9) * next;
        lam = next;
        if done {
            break;
        }
    }
    lam
}

fn soft_threshold<T: Real>(v: T, gamma: T) -> T {
    if v > gamma {
        v - gamma
    } else if v < -gamma {
        v + gamma
    } else {
        T::zero()
    }
}

fn douglas_rachford<T: Real, P: Projector<T>>(p: &mut P, y_norm: T, cfg: &SolveConfig) -> Result<SolveResult<T>> {
    let n = p.dim();
    let mut z = vec![T::zero(); n];
    let mut x = vec![T::zero(); n];
    p.project(&z, &mut x)?;
    let x0_norm = norm2(&x);
    if x0_norm == T::zero() {
        // zero is feasible, hence optimal
        let mut res = SolveResult::zero(n);
        res.residual_l2 = p.residual(&res.theta_hat)?;
        res.converged = res.residual_l2 <= T::of(cfg.residual_bound()) * y_norm;
        return Ok(res);
    }
    let gamma = T::of(cfg.step_scale) * x0_norm / T::of(n as f64).sqrt();
    let obj_tol = T::of(cfg.objective_tol);
    let gap_tol = obj_tol.sqrt();

    let mut best = x.clone();
    let mut best_obj = norm1(&x);
    let mut prev_obj = T::infinity();
    let mut trace = Vec::new();
    let mut w = vec![T::zero(); n];
    let mut iterations = 0;
    let mut settled = false;
    for k in 0..cfg.max_solver_iters {
        if k > 0 {
            p.project(&z, &mut x)?;
        }
        iterations = k + 1;
        let obj = norm1(&x);
        if cfg.record_trace {
            trace.push(obj);
        }
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&x);
        }
        let two = T::of(2.0);
        let mut gap2 = T::zero();
        for j in 0..n {
            w[j] = soft_threshold(two * x[j] - z[j], gamma);
            let d = w[j] - x[j];
            gap2 = gap2 + d * d;
            z[j] = z[j] + d;
        }
        let obj_change = (obj - prev_obj).abs();
        prev_obj = obj;
        if obj_change <= obj_tol * obj && gap2.sqrt() <= gap_tol * norm2(&x) {
            settled = true;
            break;
        }
    }
    let residual = p.residual(&best)?;
    let feasible = residual <= T::of(cfg.residual_bound()) * y_norm;
    Ok(SolveResult {
        theta_hat: best,
        residual_l2: residual,
        l1_objective: best_obj,
        iterations,
        converged: settled && feasible,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{DenseOperator, FnOperator};
    use crate::rng::GaussianStream;

    fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix<f64> {
        let mut g = GaussianStream::new(seed);
        let sd = 1.0 / (m as f64).sqrt();
        DenseMatrix::from_row_major(m, n, (0..m * n).map(|_| sd * g.standard_normal()).collect()).unwrap()
    }

    fn planted(n: usize, k: usize, seed: u64) -> Vec<f64> {
        let mut g = GaussianStream::new(seed ^ 0x55);
        let mut v = vec![0.0; n];
        let mut placed = 0;
        while placed < k {
            let j = g.below(n);
            if v[j] == 0.0 {
                v[j] = g.standard_normal().signum() * (1.0 + g.uniform());
                placed += 1;
            }
        }
        v
    }

    #[test]
    fn zero_measurements_give_zero() {
        let a = gaussian(6, 12, 1);
        let op = DenseOperator::new(a);
        let basis = SparsityBasis::identity(12).unwrap();
        let r = solve_l1(&op, &basis, &[0.0; 6], &SolveConfig::default()).unwrap();
        assert!(r.theta_hat.iter().all(|&v| v == 0.0));
        assert_eq!(r.l1_objective, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn recovers_planted_sparse_vector() {
        let (m, n, k) = (32, 64, 5);
        let a = gaussian(m, n, 3);
        let theta = planted(n, k, 3);
        let y = a.mul_vec(&theta);
        let op = DenseOperator::new(a);
        let basis = SparsityBasis::identity(n).unwrap();
        let r = solve_l1(&op, &basis, &y, &SolveConfig::default()).unwrap();
        assert!(r.converged, "iters {}", r.iterations);
        let err: f64 = r.theta_hat.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-4 * norm2(&theta), "err {err}");
    }

    #[test]
    fn matrix_free_paths_agree_with_dense() {
        let (m, n) = (20, 48);
        let a = gaussian(m, n, 8);
        let basis = SparsityBasis::dct1d(n).unwrap();
        let theta = planted(n, 3, 8);
        let x = basis.synthesize(&theta).unwrap();
        let y = a.mul_vec(&x);
        let cfg = SolveConfig::default();
        let dense = solve_l1(&DenseOperator::new(a.clone()), &basis, &y, &cfg).unwrap();

        let block = crate::operator::BlockDiagonalOperator::new(vec![a.clone()]).unwrap();
        let gram = solve_l1(&block, &basis, &y, &cfg).unwrap();

        let a2 = a.clone();
        let fnop = FnOperator {
            rows: m,
            cols: n,
            forward: move |x: &[f64], y: &mut [f64]| a.mul_vec_into(x, y),
            adjoint: move |y: &[f64], x: &mut [f64]| a2.tr_mul_vec_into(y, x),
        };
        let cg = solve_l1(&fnop, &basis, &y, &cfg).unwrap();
        for r in [&dense, &gram, &cg] {
            assert!(r.converged);
            for (p, q) in r.theta_hat.iter().zip(&theta) {
                assert!((p - q).abs() < 1e-5, "{p} vs {q}");
            }
        }
    }

    #[test]
    fn relaxed_mode_respects_ball() {
        let (m, n) = (24, 64);
        let a = gaussian(m, n, 21);
        let theta = planted(n, 4, 21);
        let mut y = a.mul_vec(&theta);
        let mut g = GaussianStream::new(99);
        y.iter_mut().for_each(|v| *v += 0.01 * g.standard_normal());
        let eps = 0.05;
        let cfg = SolveConfig {
            relaxed_epsilon: eps,
            ..SolveConfig::default()
        };
        let r = solve_l1(&DenseOperator::new(a.clone()), &SparsityBasis::identity(n).unwrap(), &y, &cfg).unwrap();
        let res = norm2(&a.mul_vec(&r.theta_hat).iter().zip(&y).map(|(p, q)| p - q).collect::<Vec<_>>());
        assert!(res <= eps * norm2(&y) * (1.0 + 1e-9));
        // the relaxed optimum is no larger in ℓ1 than the equality one
        let eq = solve_l1(&DenseOperator::new(a), &SparsityBasis::identity(n).unwrap(), &y, &SolveConfig::default()).unwrap();
        assert!(r.l1_objective <= eq.l1_objective + 1e-9);
    }

    #[test]
    fn stored_residual_and_objective_are_consistent() {
        let (m, n) = (16, 40);
        let a = gaussian(m, n, 5);
        let basis = SparsityBasis::dct1d(n).unwrap();
        let mut g = GaussianStream::new(6);
        let y: Vec<f64> = (0..m).map(|_| g.standard_normal()).collect();
        let r = solve_l1(&DenseOperator::new(a.clone()), &basis, &y, &SolveConfig::default()).unwrap();
        let x = basis.synthesize(&r.theta_hat).unwrap();
        let res = norm2(&a.mul_vec(&x).iter().zip(&y).map(|(p, q)| p - q).collect::<Vec<_>>());
        assert!((res - r.residual_l2).abs() <= 1e-10 * norm2(&y));
        assert!((norm1(&r.theta_hat) - r.l1_objective).abs() <= 1e-10 * r.l1_objective);
        let best = r.best_objective_trace();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*best.last().unwrap(), r.l1_objective);
        let mut csv = Vec::new();
        r.write_trace_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("iteration,objective,best_objective\n"));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let op = DenseOperator::new(gaussian(4, 8, 1));
        let basis = SparsityBasis::identity(8).unwrap();
        assert!(solve_l1(&op, &basis, &[1.0; 5], &SolveConfig::default()).is_err());
        let basis = SparsityBasis::identity(9).unwrap();
        assert!(solve_l1(&op, &basis, &[1.0; 4], &SolveConfig::default()).is_err());
        let bad = SolveConfig {
            max_solver_iters: 0,
            ..SolveConfig::default()
        };
        let basis = SparsityBasis::identity(8).unwrap();
        assert!(solve_l1(&op, &basis, &[1.0; 4], &bad).is_err());
    }

    #[test]
    fn single_precision_solve() {
        let (m, n) = (24, 48);
        let a = gaussian(m, n, 2);
        let theta = planted(n, 3, 2);
        let y = a.mul_vec(&theta);
        let af = DenseMatrix::from_row_major(m, n, a.as_slice().iter().map(|&v| v as f32).collect()).unwrap();
        let yf: Vec<f32> = y.iter().map(|&v| v as f32).collect();
        let cfg = SolveConfig {
            feasibility_tol: 1e-4,
            objective_tol: 1e-6,
            ..SolveConfig::default()
        };
        let r = solve_l1(&DenseOperator::new(af), &SparsityBasis::identity(n).unwrap(), &yf, &cfg).unwrap();
        for (p, q) in r.theta_hat.iter().zip(&theta) {
            assert!((*p as f64 - q).abs() < 1e-3);
        }
    }
}
