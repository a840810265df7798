//! Sparse-recovery engines.
//!
//! * [`solve_l1`]: basis pursuit `min ‖θ‖₁ s.t. AΨθ = y`, or its relaxed form
//!   `‖AΨθ − y‖₂ ≤ ε‖y‖₂`, by Douglas–Rachford splitting.
//! * [`solve_omp`]: orthogonal matching pursuit.
//! * [`solve_l0_bruteforce`]: exhaustive support search for tiny instances.

mod l0;
mod l1;
mod omp;

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use l0::{solve_l0_bruteforce, L0_MAX_N, L0_MAX_SPARSITY};
pub use l1::{solve_l1, DenseL1};
pub use omp::{solve_omp, OmpConfig};

/// Tolerances and budget for [`solve_l1`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    /// Bound on `‖AΨθ − y‖₂ / ‖y‖₂` for a result to count as feasible.
    pub feasibility_tol: f64,
    /// Stop once the relative change of `‖θ‖₁` between iterates falls below
    /// this and the splitting gap is below its square root.
    pub objective_tol: f64,
    pub max_solver_iters: usize,
    /// ε of the relaxed problem; 0 selects the equality-constrained form.
    pub relaxed_epsilon: f64,
    /// Soft-threshold level relative to the RMS of the minimum-norm solution.
    pub step_scale: f64,
    /// Keep the per-iteration objective trace.
    pub record_trace: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-6,
            objective_tol: 1e-8,
            max_solver_iters: 5000,
            relaxed_epsilon: 0.0,
            step_scale: 0.1,
            record_trace: true,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.feasibility_tol) || !pos(self.objective_tol) || !pos(self.step_scale) {
            return Err(Error::Config(
                "solver tolerances and step scale must be positive".into(),
            ));
        }
        if !(self.relaxed_epsilon.is_finite() && self.relaxed_epsilon >= 0.0) {
            return Err(Error::Config("relaxed epsilon must be ≥ 0".into()));
        }
        if self.max_solver_iters == 0 {
            return Err(Error::Config("max_solver_iters must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Residual bound relative to `‖y‖₂` that a converged result satisfies.
    pub fn residual_bound(&self) -> f64 {
        self.feasibility_tol.max(self.relaxed_epsilon)
    }
}

/// Outcome of a sparse-recovery solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub theta_hat: Vec<T>,
    /// `‖AΨθ̂ − y‖₂`
    pub residual_l2: T,
    /// `‖θ̂‖₁`
    pub l1_objective: T,
    pub iterations: usize,
    pub converged: bool,
    /// `‖θ_k‖₁` of every iterate, when recorded.
    pub objective_trace: Vec<T>,
}

impl<T: Real> SolveResult<T> {
    pub(crate) fn zero(n: usize) -> Self {
        Self {
            theta_hat: vec![T::zero(); n],
            residual_l2: T::zero(),
            l1_objective: T::zero(),
            iterations: 0,
            converged: true,
            objective_trace: Vec::new(),
        }
    }

    /// Running minimum of the objective trace.
    pub fn best_objective_trace(&self) -> Vec<T> {
        let mut best = T::infinity();
        self.objective_trace
            .iter()
            .map(|&v| {
                best = best.min(v);
                best
            })
            .collect()
    }

    /// Indices with `|θ_j| > rel_tol · ‖θ‖∞`.
    pub fn support(&self, rel_tol: f64) -> Vec<usize> {
        support(&self.theta_hat, rel_tol)
    }

    /// Write `iteration,objective,best_objective` rows.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,objective,best_objective")?;
        for (k, (o, b)) in self
            .objective_trace
            .iter()
            .zip(self.best_objective_trace())
            .enumerate()
        {
            writeln!(w, "{},{:e},{:e}", k + 1, o.to_f64_lossy(), b.to_f64_lossy())?;
        }
        Ok(())
    }
}

/// Indices with `|v_j| > rel_tol · ‖v‖∞`.
pub fn support<T: Real>(v: &[T], rel_tol: f64) -> Vec<usize> {
    let peak = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if peak == T::zero() {
        return Vec::new();
    }
    let thr = peak * T::of(rel_tol);
    (0..v.len()).filter(|&j| v[j].abs() > thr).collect()
}
