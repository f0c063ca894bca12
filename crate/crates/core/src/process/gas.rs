use std::collections::BTreeMap;

use super::rates::{
    custom_h2o2_rate_constant, custom_oh_hno3_rate_constant, troe_rate_constant,
    wennberg_no_ro2_rate_constants, wennberg_tunneling_rate_constant, ArrheniusParams, TroeParams,
    WennbergNoRo2Params,
};
use super::{add_opt, mass_action, mass_action_partial, EvalContext, JacobianBuilder, Process};
use crate::config::{MechanismConfig, ProcessConfig, ProcessType, SpeciesKind};
use crate::sparse::{CscMatrix, SparsityPattern};
use crate::state::{EnvironmentalState, StateLayout};

#[derive(Debug, Clone, PartialEq)]
enum GasRate {
    Arrhenius(ArrheniusParams),
    Troe(TroeParams),
    CustomH2o2(ArrheniusParams, ArrheniusParams),
    CustomOhHno3(ArrheniusParams, ArrheniusParams, ArrheniusParams),
    Photolysis(f64),
    Tunneling { a: f64, b: f64, c: f64 },
    NoRo2(WennbergNoRo2Params),
}

impl GasRate {
    fn from_config(p: &ProcessConfig) -> Self {
        match p.process_type {
            ProcessType::Arrhenius => GasRate::Arrhenius(ArrheniusParams::from_config(p)),
            ProcessType::Troe => GasRate::Troe(TroeParams::from_config(p)),
            ProcessType::CustomH2o2 => GasRate::CustomH2o2(
                ArrheniusParams::from_prefixed(p, "k1"),
                ArrheniusParams::from_prefixed(p, "k2"),
            ),
            ProcessType::CustomOhHno3 => GasRate::CustomOhHno3(
                ArrheniusParams::from_prefixed(p, "k0"),
                ArrheniusParams::from_prefixed(p, "k2"),
                ArrheniusParams::from_prefixed(p, "k3"),
            ),
            ProcessType::Photolysis => GasRate::Photolysis(p.param("rate_constant")),
            ProcessType::WennbergTunneling => GasRate::Tunneling {
                a: p.param("A"),
                b: p.param("B"),
                c: p.param("C"),
            },
            ProcessType::WennbergNoRo2 => GasRate::NoRo2(WennbergNoRo2Params::from_config(p)),
            other => unreachable!("{other} is not a gas reaction"),
        }
    }

    /// Rate constants per branch in molecule-cm⁻³ units.
    fn evaluate(&self, env: &EnvironmentalState) -> [f64; 2] {
        let t = env.temperature;
        let m = env.air_number_density_cm3();
        match self {
            GasRate::Arrhenius(a) => [a.rate_constant(t, env.pressure), 0.0],
            GasRate::Troe(p) => [troe_rate_constant(p, t, m), 0.0],
            GasRate::CustomH2o2(k1, k2) => [custom_h2o2_rate_constant(k1, k2, t, m), 0.0],
            GasRate::CustomOhHno3(k0, k2, k3) => {
                [custom_oh_hno3_rate_constant(k0, k2, k3, t, m), 0.0]
            }
            GasRate::Photolysis(k) => [*k, 0.0],
            GasRate::Tunneling { a, b, c } => {
                [wennberg_tunneling_rate_constant(*a, *b, *c, t), 0.0]
            }
            GasRate::NoRo2(p) => {
                let (nitrate, alkoxy) = wennberg_no_ro2_rate_constants(p, t, m);
                [alkoxy, nitrate]
            }
        }
    }
}

/// Mass-action gas-phase reaction, optionally with two product branches.
#[derive(Debug, Clone)]
pub struct GasReaction {
    process_type: ProcessType,
    label: Option<String>,
    rate: GasRate,
    reactants: Vec<(usize, u32)>,
    n_reactant: u32,
    /// Affected rows with their stoichiometric coefficient in each branch.
    rows: Vec<(usize, [f64; 2])>,
    /// Branch rate constants in ppm units.
    k: [f64; 2],
    /// ppm conversion factor `(1e-6·[M])^(n−1)`.
    conv: f64,
    /// Per-row `Σ_b coef_b·k_b`.
    eff: Vec<f64>,
    /// `slots[j][i]` is the slot of (rows[i], reactants[j]).
    slots: Vec<Vec<Option<usize>>>,
}

fn product_yields(
    config: &MechanismConfig,
    p: &ProcessConfig,
    set: &BTreeMap<String, crate::config::Product>,
) -> Vec<(String, f64)> {
    let mw = |s: &str| {
        config
            .species(SpeciesKind::Gas, s)
            .map(|d| d.molecular_weight)
            .unwrap_or(f64::NAN)
    };
    set.iter()
        .map(|(name, prod)| {
            let y = if prod.mass_yield {
                let basis = p.mass_basis.as_deref().expect("validated mass basis");
                let q = p.reactants[basis].qty as f64;
                prod.yield_ * q * mw(basis) / mw(name)
            } else {
                prod.yield_
            };
            (name.clone(), y)
        })
        .collect()
}

impl GasReaction {
    pub fn new(config: &MechanismConfig, layout: &StateLayout, p: &ProcessConfig) -> Self {
        let off = |s: &str| layout.gas_offset(s).expect("validated gas species");
        let reactants: Vec<(usize, u32)> =
            p.reactants.iter().map(|(s, r)| (off(s), r.qty)).collect();
        let n_reactant = reactants.iter().map(|r| r.1).sum();

        let mut coef: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
        for &(o, q) in &reactants {
            let c = coef.entry(o).or_default();
            c[0] -= q as f64;
            c[1] -= q as f64;
        }
        for (b, set) in [&p.products, &p.nitrate_products].into_iter().enumerate() {
            for (name, y) in product_yields(config, p, set) {
                coef.entry(off(&name)).or_default()[b] += y;
            }
        }
        let rows: Vec<(usize, [f64; 2])> = coef.into_iter().collect();
        Self {
            process_type: p.process_type,
            label: p.label.clone(),
            rate: GasRate::from_config(p),
            n_reactant,
            eff: vec![0.0; rows.len()],
            slots: vec![vec![None; rows.len()]; reactants.len()],
            reactants,
            rows,
            k: [0.0; 2],
            conv: 1.0,
        }
    }

    /// Branch rate constants in ppm units at the cached environment.
    pub fn rate_constants_ppm(&self) -> [f64; 2] {
        self.k
    }

    fn refresh(&mut self, raw: [f64; 2]) {
        self.k = [raw[0] * self.conv, raw[1] * self.conv];
        for (e, (_, c)) in self.eff.iter_mut().zip(&self.rows) {
            *e = c[0] * self.k[0] + c[1] * self.k[1];
        }
    }
}

impl Process for GasReaction {
    fn process_type(&self) -> ProcessType {
        self.process_type
    }

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn register_jacobian_elements(&self, jac: &mut JacobianBuilder) {
        for &(col, _) in &self.reactants {
            for &(row, _) in &self.rows {
                jac.register(row, col);
            }
        }
    }

    fn update_ids(&mut self, pattern: &SparsityPattern) {
        for (j, &(col, _)) in self.reactants.iter().enumerate() {
            for (i, &(row, _)) in self.rows.iter().enumerate() {
                self.slots[j][i] = pattern.slot(row, col);
            }
        }
    }

    fn update_for_new_environmental_state(&mut self, env: &EnvironmentalState) {
        let per_ppm = 1.0e-6 * env.air_number_density_cm3();
        self.conv = per_ppm.powi(self.n_reactant as i32 - 1);
        let raw = self.rate.evaluate(env);
        self.refresh(raw);
    }

    fn calculate_derivative_contribution(&self, ctx: &EvalContext<'_>, forcing: &mut [f64]) {
        let r = mass_action(ctx.state, &self.reactants);
        if r == 0.0 {
            return;
        }
        for (&(row, _), e) in self.rows.iter().zip(&self.eff) {
            forcing[row] += e * r;
        }
    }

    fn calculate_jacobian_contribution(&self, ctx: &EvalContext<'_>, jac: &mut CscMatrix) {
        for j in 0..self.reactants.len() {
            let d = mass_action_partial(ctx.state, &self.reactants, j);
            if d == 0.0 {
                continue;
            }
            for (i, e) in self.eff.iter().enumerate() {
                add_opt(jac, self.slots[j][i], e * d);
            }
        }
    }

    fn rate(&self) -> Option<f64> {
        match self.rate {
            GasRate::Photolysis(k) => Some(k),
            _ => None,
        }
    }

    fn set_rate(&mut self, value: f64) -> bool {
        match &mut self.rate {
            GasRate::Photolysis(k) => {
                *k = value;
                self.refresh([value, 0.0]);
                true
            }
            _ => false,
        }
    }
}

/// Emission source or first-order loss of one gas species.
#[derive(Debug, Clone)]
pub struct GasSource {
    process_type: ProcessType,
    label: Option<String>,
    species: usize,
    /// ppm s⁻¹ for emissions, s⁻¹ for losses.
    value: f64,
    slot: Option<usize>,
}

impl GasSource {
    pub fn new(layout: &StateLayout, p: &ProcessConfig) -> Self {
        let species = p
            .species
            .as_deref()
            .and_then(|s| layout.gas_offset(s))
            .expect("validated target species");
        let value = match p.process_type {
            ProcessType::Emission => p.param("rate"),
            _ => p.param("rate_constant"),
        };
        Self {
            process_type: p.process_type,
            label: p.label.clone(),
            species,
            value,
            slot: None,
        }
    }

    fn is_loss(&self) -> bool {
        self.process_type == ProcessType::FirstOrderLoss
    }
}

impl Process for GasSource {
    fn process_type(&self) -> ProcessType {
        self.process_type
    }

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn register_jacobian_elements(&self, jac: &mut JacobianBuilder) {
        if self.is_loss() {
            jac.register(self.species, self.species);
        }
    }

    fn update_ids(&mut self, pattern: &SparsityPattern) {
        if self.is_loss() {
            self.slot = pattern.slot(self.species, self.species);
        }
    }

    fn update_for_new_environmental_state(&mut self, _env: &EnvironmentalState) {}

    fn calculate_derivative_contribution(&self, ctx: &EvalContext<'_>, forcing: &mut [f64]) {
        if self.is_loss() {
            forcing[self.species] -= self.value * ctx.state[self.species];
        } else {
            forcing[self.species] += self.value;
        }
    }

    fn calculate_jacobian_contribution(&self, _ctx: &EvalContext<'_>, jac: &mut CscMatrix) {
        if self.is_loss() {
            add_opt(jac, self.slot, -self.value);
        }
    }

    fn rate(&self) -> Option<f64> {
        Some(self.value)
    }

    fn set_rate(&mut self, value: f64) -> bool {
        self.value = value;
        true
    }
}
