//! Time integration: a variable-order BDF integrator with Newton iteration on
//! sparse LU factors, an Euler-backward-iterative reference scheme, and a
//! finite-difference Jacobian used as a test oracle.

pub mod bdf;
pub mod ebi;
pub mod fd;
pub mod lu;

use std::sync::Arc;

use crate::sparse::{CscMatrix, SparsityPattern};

pub use bdf::{integrate, NonNegPolicy, SolveStats, SolverError, SolverErrorKind, SolverOptions};
pub use ebi::{ebi_reference_solve, EbiOptions, ProductionLoss};
pub use fd::{finite_difference_jacobian, FdOptions};
pub use lu::{LuError, LuFactors, SymbolicLu};

/// An autonomous ODE system `y' = f(y)` with a sparse analytic Jacobian.
pub trait OdeSystem {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fixed pattern of `∂f/∂y`.
    fn jacobian_pattern(&self) -> Arc<SparsityPattern>;

    fn rhs(&mut self, y: &[f64], f: &mut [f64]) -> Result<(), String>;

    /// Overwrite `jac` (same pattern as [`OdeSystem::jacobian_pattern`]) with `∂f/∂y`.
    fn jacobian(&mut self, y: &[f64], jac: &mut CscMatrix) -> Result<(), String>;

    /// Components that nothing in the system reads or writes. They are left
    /// out of error norms so that padding the state does not change step
    /// selection. Empty means none.
    fn inert_mask(&self) -> Vec<bool> {
        Vec::new()
    }
}

/// Weighted root-mean-square norm. Components with an infinite weight are
/// skipped and not counted.
pub fn rms_norm(x: &[f64], scale: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for (a, w) in x.iter().zip(scale) {
        if w.is_finite() {
            s += (a / w) * (a / w);
            n += 1;
        }
    }
    if n == 0 {
        return 0.0;
    }
    (s / n as f64).sqrt()
}
