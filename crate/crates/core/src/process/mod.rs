//! Chemical processes: rate constants, forcing and analytic Jacobian contributions.
//!
//! Every process follows the same lifecycle. At initialisation it registers
//! the Jacobian slots it will ever write, then resolves those slots against
//! the frozen pattern. Environment-dependent constants are cached whenever
//! temperature or pressure change. During solving it only accumulates into the
//! forcing vector and its own registered slots.

mod condensed;
mod gas;
pub mod rates;
mod transfer;

use std::fmt;

use thiserror::Error;

use crate::aero::AerosolRep;
use crate::config::{MechanismConfig, ProcessConfig, ProcessShape, ProcessType};
use crate::sparse::{CscMatrix, SparsityBuilder, SparsityPattern};
use crate::state::{EnvironmentalState, StateLayout};

pub use condensed::CondensedReaction;
pub use gas::{GasReaction, GasSource};
pub use transfer::PhaseTransfer;

#[derive(Debug, Error, PartialEq)]
pub enum ProcessError {
    #[error("process `{0}` not found")]
    UnknownLabel(String),
    #[error("process `{label}` ({process_type}) has no runtime-updatable rate")]
    NotUpdatable {
        label: String,
        process_type: ProcessType,
    },
    #[error("rates must be finite and non-negative, got {0}")]
    NegativeRate(f64),
}

/// What a process sees while computing forcing or Jacobian contributions.
pub struct EvalContext<'a> {
    /// State with diagnosed parameters already written into their slots.
    pub state: &'a [f64],
    pub aero: &'a AerosolRep,
}

/// Registers Jacobian slots, silently dropping rows the solver holds fixed.
pub struct JacobianBuilder {
    inner: SparsityBuilder,
    fixed_rows: Vec<bool>,
}

impl JacobianBuilder {
    pub fn new(n: usize, fixed_rows: Vec<bool>) -> Self {
        assert_eq!(fixed_rows.len(), n);
        Self {
            inner: SparsityBuilder::square(n),
            fixed_rows,
        }
    }

    pub fn register(&mut self, row: usize, col: usize) {
        if !self.fixed_rows[row] {
            self.inner.register(row, col);
        }
    }

    pub fn register_block(&mut self, rows: &[usize], cols: &[usize]) {
        for &r in rows {
            for &c in cols {
                self.register(r, c);
            }
        }
    }

    pub fn into_inner(self) -> SparsityBuilder {
        self.inner
    }
}

#[inline]
pub(crate) fn add_opt(jac: &mut CscMatrix, slot: Option<usize>, v: f64) {
    if let Some(s) = slot {
        jac.add_at(s, v);
    }
}

pub trait Process: fmt::Debug + Send + Sync {
    fn process_type(&self) -> ProcessType;

    fn label(&self) -> Option<&str>;

    fn register_jacobian_elements(&self, jac: &mut JacobianBuilder);

    /// Resolve registered `(row, col)` pairs to storage slots.
    fn update_ids(&mut self, pattern: &SparsityPattern);

    fn update_for_new_environmental_state(&mut self, env: &EnvironmentalState);

    /// Accumulate `dy/dt` contributions into `forcing`.
    fn calculate_derivative_contribution(&self, ctx: &EvalContext<'_>, forcing: &mut [f64]);

    /// Accumulate `∂f/∂y` contributions into registered slots of `jac`.
    fn calculate_jacobian_contribution(&self, ctx: &EvalContext<'_>, jac: &mut CscMatrix);

    /// Current value of the runtime-updatable rate, if this type has one.
    fn rate(&self) -> Option<f64> {
        None
    }

    /// Returns `false` when the type has no updatable rate.
    fn set_rate(&mut self, _value: f64) -> bool {
        false
    }
}

/// Instantiate every configured process against a layout and representation.
pub fn build_processes(
    config: &MechanismConfig,
    layout: &StateLayout,
    aero: &AerosolRep,
) -> Vec<Box<dyn Process>> {
    config
        .processes
        .iter()
        .map(|p| build_process(config, layout, aero, p))
        .collect()
}

pub fn build_process(
    config: &MechanismConfig,
    layout: &StateLayout,
    aero: &AerosolRep,
    p: &ProcessConfig,
) -> Box<dyn Process> {
    match p.process_type.shape() {
        ProcessShape::GasReaction => Box::new(GasReaction::new(config, layout, p)),
        ProcessShape::GasSource => Box::new(GasSource::new(layout, p)),
        ProcessShape::Condensed => Box::new(CondensedReaction::new(config, layout, p)),
        ProcessShape::PhaseTransfer => Box::new(PhaseTransfer::new(config, layout, aero, p)),
    }
}

/// `∏ x_i^{q_i}` over `(offset, qty)` terms.
pub(crate) fn mass_action(x: &[f64], terms: &[(usize, u32)]) -> f64 {
    terms.iter().map(|&(o, q)| powi(x[o], q)).product()
}

/// `∂/∂x_j ∏ x_i^{q_i}` for the `j`-th term.
pub(crate) fn mass_action_partial(x: &[f64], terms: &[(usize, u32)], j: usize) -> f64 {
    let mut v = 1.0;
    for (i, &(o, q)) in terms.iter().enumerate() {
        if i == j {
            v *= q as f64 * powi(x[o], q - 1);
        } else {
            v *= powi(x[o], q);
        }
    }
    v
}

#[inline]
fn powi(x: f64, q: u32) -> f64 {
    match q {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(q as i32),
    }
}
