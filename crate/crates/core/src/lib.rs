//! Multiphase atmospheric chemistry: mechanism configuration, state layout,
//! aerosol representations, process and parameter models, a sparse BDF
//! solver, and a scenario box model.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aero;
pub mod boxmodel;
pub mod config;
pub mod core;
pub mod param;
pub mod process;
pub mod solver;
pub mod sparse;
pub mod state;

pub use crate::aero::AerosolRep;
pub use crate::boxmodel::{Representation, Scenario};
pub use crate::config::{MechanismConfig, ProcessType};
pub use crate::core::{Core, CoreError, CoreOptions, RateHandle};
pub use crate::solver::{SolveStats, SolverOptions};
pub use crate::sparse::{CscMatrix, SparsityPattern};
pub use crate::state::{EnvironmentalState, StateLayout};
