//! The chemistry core: one mechanism, one layout, one frozen Jacobian pattern.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aero::{AeroError, AerosolRep};
use crate::config::{self, ConfigError, Diagnostic, MechanismConfig, SpeciesKind};
use crate::param::{ParamError, Parameters};
use crate::process::{build_processes, EvalContext, JacobianBuilder, Process, ProcessError};
use crate::solver::{
    self, NonNegPolicy, OdeSystem, ProductionLoss, SolveStats, SolverError, SolverOptions,
};
use crate::sparse::{CscMatrix, SparsityBuilder, SparsityPattern};
use crate::state::{EnvironmentalState, StateLayout};

pub const DEFAULT_REL_TOL: f64 = 1.0e-4;
/// ppm
pub const DEFAULT_GAS_ABS_TOL: f64 = 1.0e-14;
/// kg m⁻³
pub const DEFAULT_AEROSOL_ABS_TOL: f64 = 1.0e-20;

const CORE_MAGIC: &[u8; 4] = b"MPCR";
pub const CORE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("configuration is invalid:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Aero(#[from] AeroError),
    #[error(transparent)]
    Solver(#[from] Box<SolverError>),
    #[error("invalid environmental state: T = {temperature} K, P = {pressure} Pa, RH = {relative_humidity}")]
    Environment {
        temperature: f64,
        pressure: f64,
        relative_humidity: f64,
    },
    #[error("state has {found} values, layout expects {expected}")]
    StateLength { expected: usize, found: usize },
    #[error("time step must be positive, got {0}")]
    TimeStep(f64),
    #[error("core buffer: {0}")]
    Format(String),
    #[error("core buffer version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
}

fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter()
        .map(|x| format!("  {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Solver settings that do not depend on the state layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreOptions {
    /// Falls back to the configuration's value, then [`DEFAULT_REL_TOL`].
    pub rel_tol: Option<f64>,
    pub gas_abs_tol: f64,
    pub aerosol_abs_tol: f64,
    pub max_steps: usize,
    pub max_order: usize,
    pub newton_max_iters: usize,
    pub nonneg: NonNegSetting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonNegSetting {
    Allow,
    Clamp,
    Reject,
}

impl Default for CoreOptions {
    fn default() -> Self {
        Self {
            rel_tol: None,
            gas_abs_tol: DEFAULT_GAS_ABS_TOL,
            aerosol_abs_tol: DEFAULT_AEROSOL_ABS_TOL,
            max_steps: 100_000,
            max_order: 5,
            newton_max_iters: 4,
            nonneg: NonNegSetting::Clamp,
        }
    }
}

/// Addresses the updatable rate of one labelled process.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RateHandle {
    label: String,
    index: usize,
}

impl RateHandle {
    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Debug)]
pub struct Core {
    config: MechanismConfig,
    options: CoreOptions,
    layout: StateLayout,
    aero: AerosolRep,
    processes: Vec<Box<dyn Process>>,
    params: Parameters,
    /// Rows with no dynamics: constant species and diagnosed water.
    fixed: Vec<bool>,
    /// Process Jacobian over the effective state.
    eff_pattern: Arc<SparsityPattern>,
    p_pattern: Arc<SparsityPattern>,
    solver_pattern: Arc<SparsityPattern>,
    /// Effective slot → solver slot (`None` for diagnosed columns).
    eff_to_solver: Vec<Option<usize>>,
    /// `(solver slot, effective slot at (row, w), ∂λ slot at (w, col))`
    compose: Vec<(usize, usize, usize)>,
    /// Parameter row for each diagnosed state offset.
    param_row_of: BTreeMap<usize, usize>,
    env: EnvironmentalState,
    cached_env: Option<EnvironmentalState>,
    solver_options: SolverOptions,
}

impl Core {
    /// Parse, validate and initialise from configuration files.
    pub fn initialize<P: AsRef<Path>>(
        paths: &[P],
        options: CoreOptions,
    ) -> Result<Self, CoreError> {
        let cfg = config::load_config_files(paths)?;
        Self::from_config(cfg, options)
    }

    pub fn from_config(mut cfg: MechanismConfig, options: CoreOptions) -> Result<Self, CoreError> {
        cfg.canonicalize();
        let diags = config::validate(&cfg);
        if config::has_errors(&diags) {
            return Err(CoreError::Invalid(diags));
        }
        let layout = StateLayout::build(&cfg);
        let aero = AerosolRep::build(&cfg, &layout);
        let mut processes = build_processes(&cfg, &layout, &aero);
        let mut params = Parameters::build(&cfg, &layout);
        let n = layout.n_total();

        let mut fixed = vec![false; n];
        for (i, name) in layout.gas_names().iter().enumerate() {
            if cfg
                .species(SpeciesKind::Gas, name)
                .is_some_and(|s| s.constant)
            {
                fixed[i] = true;
            }
        }
        let outputs = params.output_offsets();
        for &o in &outputs {
            fixed[o] = true;
        }
        let param_row_of: BTreeMap<usize, usize> =
            outputs.iter().enumerate().map(|(k, &o)| (o, k)).collect();

        let mut jb = JacobianBuilder::new(n, fixed.clone());
        for p in &processes {
            p.register_jacobian_elements(&mut jb);
        }
        let eff_pattern = jb.into_inner().freeze();
        let p_pattern = params.jacobian_pattern();
        let mut p_cols: Vec<Vec<usize>> = vec![Vec::new(); params.len()];
        for (k, j, _) in p_pattern.iter() {
            p_cols[k].push(j);
        }

        let mut sb = SparsityBuilder::square(n);
        for (r, c, _) in eff_pattern.iter() {
            if let Some(&k) = param_row_of.get(&c) {
                for &j in &p_cols[k] {
                    sb.register(r, j);
                }
            } else {
                sb.register(r, c);
            }
        }
        let solver_pattern = sb.freeze();
        let mut eff_to_solver = Vec::with_capacity(eff_pattern.nnz());
        let mut compose = Vec::new();
        for (r, c, s) in eff_pattern.iter() {
            match param_row_of.get(&c) {
                Some(&k) => {
                    eff_to_solver.push(None);
                    for &j in &p_cols[k] {
                        let ps = p_pattern.slot(k, j).expect("registered");
                        let ss = solver_pattern.slot(r, j).expect("registered at init");
                        compose.push((ss, s, ps));
                    }
                }
                None => eff_to_solver.push(Some(solver_pattern.slot(r, c).expect("registered"))),
            }
        }

        for p in processes.iter_mut() {
            p.update_ids(&eff_pattern);
        }
        params.update_ids(&p_pattern);

        let rel_tol = options
            .rel_tol
            .or(cfg.relative_tolerance)
            .unwrap_or(DEFAULT_REL_TOL);
        let abs_tol = abs_tolerances(&cfg, &layout, &options);
        let mut solver_options = SolverOptions::new(rel_tol, abs_tol);
        solver_options.max_steps = options.max_steps;
        solver_options.max_order = options.max_order;
        solver_options.newton_max_iters = options.newton_max_iters;
        solver_options.nonneg_policy = match options.nonneg {
            NonNegSetting::Allow => NonNegPolicy::Allow,
            NonNegSetting::Clamp => NonNegPolicy::Clamp,
            NonNegSetting::Reject => NonNegPolicy::Reject,
        };

        Ok(Self {
            config: cfg,
            options,
            layout,
            aero,
            processes,
            params,
            fixed,
            eff_pattern,
            p_pattern,
            solver_pattern,
            eff_to_solver,
            compose,
            param_row_of,
            env: EnvironmentalState::new(298.15, 101_325.0),
            cached_env: None,
            solver_options,
        })
    }

    pub fn config(&self) -> &MechanismConfig {
        &self.config
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn aero(&self) -> &AerosolRep {
        &self.aero
    }

    pub fn n_total(&self) -> usize {
        self.layout.n_total()
    }

    /// Non-zeros of the solver Jacobian pattern.
    pub fn nnz(&self) -> usize {
        self.solver_pattern.nnz()
    }

    pub fn jacobian_pattern(&self) -> &Arc<SparsityPattern> {
        &self.solver_pattern
    }

    pub fn solver_options(&self) -> &SolverOptions {
        &self.solver_options
    }

    pub fn solver_options_mut(&mut self) -> &mut SolverOptions {
        &mut self.solver_options
    }

    pub fn n_processes(&self) -> usize {
        self.processes.len()
    }

    pub fn process(&self, index: usize) -> &dyn Process {
        self.processes[index].as_ref()
    }

    pub fn n_parameters(&self) -> usize {
        self.params.len()
    }

    /// State offsets overwritten by diagnosed parameters.
    pub fn diagnosed_offsets(&self) -> Vec<usize> {
        self.param_row_of.keys().copied().collect()
    }

    /// Aerosol entries in phases that no process or parameter refers to.
    pub fn inert_mask(&self) -> Vec<bool> {
        let used = |phase: &str| {
            self.config
                .processes
                .iter()
                .any(|p| p.phase.as_deref() == Some(phase))
                || self.config.parameters.iter().any(|p| p.phase == phase)
        };
        let mut mask = vec![false; self.n_total()];
        for pi in self.layout.phase_instances() {
            if !used(&pi.phase) {
                for &o in &pi.offsets {
                    mask[o] = true;
                }
            }
        }
        mask
    }

    pub fn is_fixed(&self, offset: usize) -> bool {
        self.fixed[offset]
    }

    pub fn environment(&self) -> &EnvironmentalState {
        &self.env
    }

    pub fn set_environment(&mut self, env: EnvironmentalState) -> Result<(), CoreError> {
        if !env.is_valid() {
            return Err(CoreError::Environment {
                temperature: env.temperature,
                pressure: env.pressure,
                relative_humidity: env.relative_humidity,
            });
        }
        self.env = env;
        self.refresh_environment();
        Ok(())
    }

    fn refresh_environment(&mut self) {
        if self.cached_env.as_ref() == Some(&self.env) {
            return;
        }
        for p in self.processes.iter_mut() {
            p.update_for_new_environmental_state(&self.env);
        }
        self.params.update_for_new_environmental_state(&self.env);
        self.cached_env = Some(self.env);
    }

    pub fn set_particle_weights(&mut self, weights: &[f64]) -> Result<(), CoreError> {
        self.aero.set_particle_weights(weights)?;
        Ok(())
    }

    pub fn get_rate_handle(&self, label: &str) -> Result<RateHandle, CoreError> {
        let (index, p) = self
            .processes
            .iter()
            .enumerate()
            .find(|(_, p)| p.label() == Some(label))
            .ok_or_else(|| ProcessError::UnknownLabel(label.to_string()))?;
        if !p.process_type().is_updatable() {
            return Err(ProcessError::NotUpdatable {
                label: label.to_string(),
                process_type: p.process_type(),
            }
            .into());
        }
        Ok(RateHandle {
            label: label.to_string(),
            index,
        })
    }

    pub fn set_rate(&mut self, handle: &RateHandle, value: f64) -> Result<(), CoreError> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(ProcessError::NegativeRate(value).into());
        }
        let p = self
            .processes
            .get_mut(handle.index)
            .filter(|p| p.label() == Some(handle.label.as_str()))
            .ok_or_else(|| ProcessError::UnknownLabel(handle.label.clone()))?;
        p.set_rate(value);
        Ok(())
    }

    pub fn rate(&self, handle: &RateHandle) -> Option<f64> {
        self.processes.get(handle.index).and_then(|p| p.rate())
    }

    fn check_len(&self, state: &[f64]) -> Result<(), CoreError> {
        if state.len() != self.n_total() {
            return Err(CoreError::StateLength {
                expected: self.n_total(),
                found: state.len(),
            });
        }
        Ok(())
    }

    /// State with diagnosed parameters written into their slots.
    pub fn effective_state(&self, state: &[f64]) -> Result<Vec<f64>, CoreError> {
        let mut eff = state.to_vec();
        self.params.calculate(&mut eff)?;
        Ok(eff)
    }

    fn forcing_into(
        &self,
        state: &[f64],
        out: &mut [f64],
        eff: &mut Vec<f64>,
    ) -> Result<(), ParamError> {
        eff.clear();
        eff.extend_from_slice(state);
        self.params.calculate(eff)?;
        out.iter_mut().for_each(|v| *v = 0.0);
        let ctx = EvalContext {
            state: eff,
            aero: &self.aero,
        };
        for p in &self.processes {
            p.calculate_derivative_contribution(&ctx, out);
        }
        for (f, fixed) in out.iter_mut().zip(&self.fixed) {
            if *fixed {
                *f = 0.0;
            }
        }
        Ok(())
    }

    fn jacobian_into(
        &self,
        state: &[f64],
        jac: &mut CscMatrix,
        eff: &mut Vec<f64>,
    ) -> Result<(), ParamError> {
        eff.clear();
        eff.extend_from_slice(state);
        self.params.calculate(eff)?;
        let ctx = EvalContext {
            state: eff,
            aero: &self.aero,
        };
        let mut ej = CscMatrix::zeros(self.eff_pattern.clone());
        for p in &self.processes {
            p.calculate_jacobian_contribution(&ctx, &mut ej);
        }
        let mut pj = CscMatrix::zeros(self.p_pattern.clone());
        self.params.calculate_param_jacobian(eff, &mut pj);
        jac.clear();
        let vals = jac.values_mut();
        for (target, v) in self.eff_to_solver.iter().zip(ej.values()) {
            if let Some(t) = target {
                vals[*t] += v;
            }
        }
        for &(ss, es, ps) in &self.compose {
            vals[ss] += ej.values()[es] * pj.values()[ps];
        }
        Ok(())
    }

    /// `f(y)` in ppm s⁻¹ (gas) and kg m⁻³ s⁻¹ (aerosol) at the current environment.
    pub fn compute_forcing(&mut self, state: &[f64]) -> Result<Vec<f64>, CoreError> {
        self.check_len(state)?;
        self.refresh_environment();
        let mut out = vec![0.0; self.n_total()];
        self.forcing_into(state, &mut out, &mut Vec::new())?;
        Ok(out)
    }

    /// Forcing of a single process, evaluated in isolation.
    pub fn compute_process_forcing(
        &mut self,
        state: &[f64],
        index: usize,
    ) -> Result<Vec<f64>, CoreError> {
        self.check_len(state)?;
        self.refresh_environment();
        let eff = self.effective_state(state)?;
        let mut out = vec![0.0; self.n_total()];
        let ctx = EvalContext {
            state: &eff,
            aero: &self.aero,
        };
        self.processes[index].calculate_derivative_contribution(&ctx, &mut out);
        for (f, fixed) in out.iter_mut().zip(&self.fixed) {
            if *fixed {
                *f = 0.0;
            }
        }
        Ok(out)
    }

    /// Solver Jacobian `J_direct + J_param·∂λ/∂y` on the frozen pattern.
    pub fn compute_jacobian(&mut self, state: &[f64]) -> Result<CscMatrix, CoreError> {
        self.check_len(state)?;
        self.refresh_environment();
        let mut jac = CscMatrix::zeros(self.solver_pattern.clone());
        self.jacobian_into(state, &mut jac, &mut Vec::new())?;
        Ok(jac)
    }

    /// Advance `state` by `dt` seconds under `env` and the current rates.
    pub fn solve(
        &mut self,
        state: &mut [f64],
        env: &EnvironmentalState,
        dt: f64,
    ) -> Result<SolveStats, CoreError> {
        self.check_len(state)?;
        if !(dt > 0.0) {
            return Err(CoreError::TimeStep(dt));
        }
        self.set_environment(*env)?;
        let opts = self.solver_options.clone();
        let mut sys = CoreSystem {
            core: self,
            eff: Vec::new(),
        };
        let result = solver::integrate(&mut sys, state, dt, &opts);
        match result {
            Ok((mut y, stats)) => {
                self.params.calculate(&mut y)?;
                state.copy_from_slice(&y);
                Ok(stats)
            }
            Err(mut e) => {
                let _ = self.params.calculate(&mut e.y);
                Err(CoreError::Solver(Box::new(e)))
            }
        }
    }

    /// View of the core as an ODE system at the current environment.
    pub fn ode_system(&mut self) -> CoreSystem<'_> {
        self.refresh_environment();
        CoreSystem {
            core: self,
            eff: Vec::new(),
        }
    }

    /// View of the core as a production/loss system for the reference solver.
    pub fn production_loss_system(&mut self) -> CoreProductionLoss<'_> {
        self.refresh_environment();
        CoreProductionLoss { core: self }
    }

    /// Pack configuration, options, environment, rates and particle weights.
    pub fn serialize_core(&self) -> Vec<u8> {
        let rates: BTreeMap<String, f64> = self
            .processes
            .iter()
            .filter_map(|p| Some((p.label()?.to_string(), p.rate()?)))
            .collect();
        let payload = serde_json::json!({
            "config": self.config.to_json(),
            "options": self.options,
            "environment": [self.env.temperature, self.env.pressure, self.env.relative_humidity],
            "rates": rates,
            "particle_weights": self.aero.particle_weights(),
            "solver": {
                "rel_tol": self.solver_options.rel_tol,
                "abs_tol": self.solver_options.abs_tol,
            },
        });
        let body = serde_json::to_vec(&payload).expect("serializable payload");
        let mut out = Vec::with_capacity(16 + body.len());
        out.extend_from_slice(CORE_MAGIC);
        out.extend_from_slice(&CORE_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    pub fn deserialize_core(bytes: &[u8]) -> Result<Self, CoreError> {
        if bytes.len() < 16 || &bytes[..4] != CORE_MAGIC {
            return Err(CoreError::Format("missing core header".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CORE_FORMAT_VERSION {
            return Err(CoreError::Version {
                found: version,
                expected: CORE_FORMAT_VERSION,
            });
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes
            .get(16..16 + len)
            .filter(|_| bytes.len() == 16 + len)
            .ok_or_else(|| CoreError::Format("payload length mismatch".into()))?;
        let v: serde_json::Value =
            serde_json::from_slice(body).map_err(|e| CoreError::Format(e.to_string()))?;
        let cfg_text = v["config"].to_string();
        let cfg = config::parse_config([("core buffer", cfg_text.as_str())])?;
        let options: CoreOptions = serde_json::from_value(v["options"].clone())
            .map_err(|e| CoreError::Format(e.to_string()))?;
        let mut core = Core::from_config(cfg, options)?;
        let env: [f64; 3] = serde_json::from_value(v["environment"].clone())
            .map_err(|e| CoreError::Format(e.to_string()))?;
        let rates: BTreeMap<String, f64> = serde_json::from_value(v["rates"].clone())
            .map_err(|e| CoreError::Format(e.to_string()))?;
        let weights: Vec<f64> = serde_json::from_value(v["particle_weights"].clone())
            .map_err(|e| CoreError::Format(e.to_string()))?;
        let rel_tol: f64 = serde_json::from_value(v["solver"]["rel_tol"].clone())
            .map_err(|e| CoreError::Format(e.to_string()))?;
        let abs_tol: Vec<f64> = serde_json::from_value(v["solver"]["abs_tol"].clone())
            .map_err(|e| CoreError::Format(e.to_string()))?;
        if abs_tol.len() != core.n_total() {
            return Err(CoreError::Format(
                "tolerance vector does not match layout".into(),
            ));
        }
        core.solver_options.rel_tol = rel_tol;
        core.solver_options.abs_tol = abs_tol;
        core.set_environment(EnvironmentalState {
            temperature: env[0],
            pressure: env[1],
            relative_humidity: env[2],
        })?;
        for (label, value) in rates {
            let h = core.get_rate_handle(&label)?;
            core.set_rate(&h, value)?;
        }
        if !weights.is_empty() {
            core.set_particle_weights(&weights)?;
        }
        Ok(core)
    }
}

fn abs_tolerances(cfg: &MechanismConfig, layout: &StateLayout, options: &CoreOptions) -> Vec<f64> {
    (0..layout.n_total())
        .map(|o| {
            let (kind, name) = match layout.entry(o).expect("offset in range") {
                crate::state::StateEntry::Gas { species } => (SpeciesKind::Gas, species),
                crate::state::StateEntry::Aerosol { species, .. } => {
                    (SpeciesKind::Aerosol, species)
                }
            };
            let default = match kind {
                SpeciesKind::Gas => options.gas_abs_tol,
                SpeciesKind::Aerosol => options.aerosol_abs_tol,
            };
            cfg.species(kind, &name)
                .and_then(|s| s.absolute_tolerance)
                .unwrap_or(default)
        })
        .collect()
}

/// Forcing and Jacobian callbacks handed to the integrator.
pub struct CoreSystem<'a> {
    core: &'a Core,
    eff: Vec<f64>,
}

impl OdeSystem for CoreSystem<'_> {
    fn len(&self) -> usize {
        self.core.n_total()
    }

    fn jacobian_pattern(&self) -> Arc<SparsityPattern> {
        self.core.solver_pattern.clone()
    }

    fn rhs(&mut self, y: &[f64], f: &mut [f64]) -> Result<(), String> {
        self.core
            .forcing_into(y, f, &mut self.eff)
            .map_err(|e| e.to_string())
    }

    fn jacobian(&mut self, y: &[f64], jac: &mut CscMatrix) -> Result<(), String> {
        self.core
            .jacobian_into(y, jac, &mut self.eff)
            .map_err(|e| e.to_string())
    }

    fn inert_mask(&self) -> Vec<bool> {
        self.core.inert_mask()
    }
}

/// Splits every process contribution by sign: gains are production, losses
/// become a first-order loss rate relative to the current concentration.
pub struct CoreProductionLoss<'a> {
    core: &'a Core,
}

impl ProductionLoss for CoreProductionLoss<'_> {
    fn len(&self) -> usize {
        self.core.n_total()
    }

    fn production_loss(&mut self, y: &[f64], p: &mut [f64], l: &mut [f64]) -> Result<(), String> {
        let core = self.core;
        let eff = core.effective_state(y).map_err(|e| e.to_string())?;
        let ctx = EvalContext {
            state: &eff,
            aero: &core.aero,
        };
        let mut tmp = vec![0.0; y.len()];
        for proc_ in &core.processes {
            tmp.iter_mut().for_each(|v| *v = 0.0);
            proc_.calculate_derivative_contribution(&ctx, &mut tmp);
            for i in 0..y.len() {
                let v = tmp[i];
                if core.fixed[i] || v == 0.0 {
                    continue;
                }
                if v > 0.0 || y[i] <= 0.0 {
                    p[i] += v;
                } else {
                    l[i] += -v / y[i];
                }
            }
        }
        Ok(())
    }
}
