use std::io::Write;

use crate::error::Result;
use crate::metrics::gain_db;

/// Per-iteration record of a reconstruction. Entry 0 of every trace is the
/// initial estimate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReconReport {
    /// MSE against the ground truth, when one was supplied.
    pub mse: Option<Vec<f64>>,
    /// Relative ℓ2 change from the previous estimate (NaN at entry 0).
    pub relative_change: Vec<f64>,
    /// Seconds since the start of the run, at the end of each step.
    pub elapsed_seconds: Vec<f64>,
    /// Row images only: mean row compressibility of the prediction residual
    /// (entry 0: of the signal itself). Uses the ground truth when available,
    /// the recovered corrections otherwise.
    pub compressibility: Option<Vec<f64>>,
    /// Largest `‖Φ^i s_i − y_i‖₂ / ‖y_i‖₂` over the slices updated in each
    /// iteration.
    pub max_slice_residual: Vec<f64>,
    /// Slices whose correction solve did not converge, per iteration.
    pub solver_failures: Vec<usize>,
    pub iterations_run: usize,
    pub converged: bool,
    pub init_converged: bool,
    pub wall_seconds: f64,
}

impl ReconReport {
    pub fn init_mse(&self) -> Option<f64> {
        self.mse.as_ref().and_then(|m| m.first().copied())
    }

    pub fn final_mse(&self) -> Option<f64> {
        self.mse.as_ref().and_then(|m| m.last().copied())
    }

    /// Gain of the final estimate over the initial one, in dB.
    pub fn gain_db(&self) -> Option<f64> {
        gain_db(self.init_mse()?, self.final_mse()?).ok()
    }

    /// Write `iteration,mse,relative_change,elapsed_seconds`; unknown values
    /// are left empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,mse,relative_change,elapsed_seconds")?;
        for k in 0..=self.iterations_run {
            let mse = self
                .mse
                .as_ref()
                .and_then(|m| m.get(k))
                .map(|v| format!("{v:.9e}"))
                .unwrap_or_default();
            let chg = self
                .relative_change
                .get(k)
                .filter(|v| v.is_finite())
                .map(|v| format!("{v:.6e}"))
                .unwrap_or_default();
            let t = self
                .elapsed_seconds
                .get(k)
                .map(|v| format!("{v:.3}"))
                .unwrap_or_default();
            writeln!(w, "{k},{mse},{chg},{t}")?;
        }
        Ok(())
    }
}
