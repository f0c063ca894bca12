use super::rates::{
    condensation_rate, henrys_law_constant, mean_molecular_speed, simpol_vapor_pressure,
};
use super::{add_opt, EvalContext, JacobianBuilder, Process};
use crate::aero::AerosolRep;
use crate::config::{MechanismConfig, ProcessConfig, ProcessType, SpeciesKind};
use crate::sparse::{CscMatrix, SparsityPattern};
use crate::state::{EnvironmentalState, StateLayout, GAS_CONSTANT};

const PA_PER_ATM: f64 = 101_325.0;

#[derive(Debug, Clone)]
struct Instance {
    /// Index into the layout's phase instances.
    phase_instance: usize,
    aerosol: usize,
    water: Option<usize>,
    /// Sorted, unique Jacobian columns.
    cols: Vec<usize>,
    gas_slots: Vec<Option<usize>>,
    aerosol_slots: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Equilibrium {
    Henry { h298: f64, c: f64 },
    Simpol { b: [f64; 4] },
}

/// Gas ⇌ aerosol mass transfer replicated over every instance of a phase.
#[derive(Debug, Clone)]
pub struct PhaseTransfer {
    process_type: ProcessType,
    label: Option<String>,
    equilibrium: Equilibrium,
    gas: usize,
    gas_mw: f64,
    diffusion: f64,
    alpha: f64,
    aerosol_mw: f64,
    instances: Vec<Instance>,
    // environment cache
    /// mol m⁻³ per ppm
    ppm_to_mol: f64,
    mean_free_path: f64,
    /// Henry: c_eq = coeff·m/W; SIMPOL: c_eq = coeff·x.
    eq_coeff: f64,
}

impl PhaseTransfer {
    pub fn new(
        config: &MechanismConfig,
        layout: &StateLayout,
        aero: &AerosolRep,
        p: &ProcessConfig,
    ) -> Self {
        let gas_name = p.gas_species.as_deref().expect("validated gas species");
        let gas_def = config
            .species(SpeciesKind::Gas, gas_name)
            .expect("validated gas species");
        let aero_name = p
            .aerosol_species
            .as_deref()
            .expect("validated aerosol species");
        let aero_def = config
            .species(SpeciesKind::Aerosol, aero_name)
            .expect("validated aerosol species");
        let phase = p.phase.as_deref().expect("validated phase");
        let gas = layout.gas_offset(gas_name).expect("gas offset");
        let henry = p.process_type == ProcessType::HenrysLawPhaseTransfer;
        let instances = layout
            .instances_of(phase)
            .map(|(idx, pi)| {
                let off =
                    |s: &str| pi.offsets[pi.species.iter().position(|x| x == s).expect("in phase")];
                let aerosol = off(aero_name);
                let water = if henry {
                    p.water_species.as_deref().map(off)
                } else {
                    None
                };
                let mut cols = vec![gas, aerosol];
                cols.extend(water);
                cols.extend(aero.radius_support(idx));
                cols.extend(aero.number_support(idx));
                if !henry {
                    cols.extend(aero.phase_support(idx));
                }
                cols.sort_unstable();
                cols.dedup();
                Instance {
                    phase_instance: idx,
                    aerosol,
                    water,
                    gas_slots: vec![None; cols.len()],
                    aerosol_slots: vec![None; cols.len()],
                    cols,
                }
            })
            .collect();
        let equilibrium = if henry {
            Equilibrium::Henry {
                h298: p.param("H298"),
                c: p.param("C"),
            }
        } else {
            Equilibrium::Simpol {
                b: [p.param("B1"), p.param("B2"), p.param("B3"), p.param("B4")],
            }
        };
        Self {
            process_type: p.process_type,
            label: p.label.clone(),
            equilibrium,
            gas,
            gas_mw: gas_def.molecular_weight,
            diffusion: gas_def.diffusion_coeff.unwrap_or(f64::NAN),
            alpha: gas_def.mass_accommodation,
            aerosol_mw: aero_def.molecular_weight,
            instances,
            ppm_to_mol: 0.0,
            mean_free_path: 0.0,
            eq_coeff: 0.0,
        }
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    /// Net gas → aerosol flux (mol m⁻³ s⁻¹) into one phase instance, with its
    /// gradient when `want_grad` is set. `None` when the instance cannot take up
    /// the species (no water for Henry's law).
    fn net_flux(
        &self,
        inst: &Instance,
        ctx: &EvalContext<'_>,
        want_grad: bool,
    ) -> Option<(f64, Vec<(usize, f64)>)> {
        let y = ctx.state;
        let idx = inst.phase_instance;
        let mut grad_drive: Vec<(usize, f64)> = Vec::new();
        let c_gas = y[self.gas] * self.ppm_to_mol;
        let c_eq = match self.equilibrium {
            Equilibrium::Henry { .. } => {
                let w = y[inst.water.expect("henry water")];
                if !(w > 0.0) {
                    return None;
                }
                let m = y[inst.aerosol];
                if want_grad {
                    grad_drive.push((inst.aerosol, -self.eq_coeff / w));
                    grad_drive.push((inst.water.unwrap(), self.eq_coeff * m / (w * w)));
                }
                self.eq_coeff * m / w
            }
            Equilibrium::Simpol { .. } => {
                let mass = ctx.aero.aerosol_phase_mass_kg_m3(idx, y);
                match ctx
                    .aero
                    .aerosol_phase_average_molecular_weight_kg_mol(idx, y)
                {
                    Ok(mw) if mass.value > 0.0 => {
                        let m_i = y[inst.aerosol];
                        let denom = self.aerosol_mw * mass.value;
                        let x = m_i * mw.value / denom;
                        if want_grad {
                            grad_drive.push((inst.aerosol, -self.eq_coeff * mw.value / denom));
                            for &(c, g) in &mw.grad {
                                grad_drive.push((c, -self.eq_coeff * m_i * g / denom));
                            }
                            for &(c, g) in &mass.grad {
                                grad_drive.push((c, self.eq_coeff * x * g / mass.value));
                            }
                        }
                        self.eq_coeff * x
                    }
                    _ => 0.0,
                }
            }
        };
        let drive = c_gas - c_eq;

        let r = ctx.aero.effective_radius_m(idx, y);
        let n = ctx.aero.number_concentration_n_m3(idx, y);
        let (kc, dkc_dr) =
            condensation_rate(r.value, self.diffusion, self.mean_free_path, self.alpha);
        let kcn = kc * n.value;
        let net = kcn * drive;
        if !want_grad {
            return Some((net, Vec::new()));
        }
        let mut grad = Vec::with_capacity(grad_drive.len() + r.grad.len() + n.grad.len() + 1);
        grad.push((self.gas, kcn * self.ppm_to_mol));
        grad.extend(grad_drive.into_iter().map(|(c, g)| (c, kcn * g)));
        grad.extend(
            r.grad
                .iter()
                .map(|&(c, g)| (c, dkc_dr * g * n.value * drive)),
        );
        grad.extend(n.grad.iter().map(|&(c, g)| (c, kc * g * drive)));
        Some((net, grad))
    }
}

impl Process for PhaseTransfer {
    fn process_type(&self) -> ProcessType {
        self.process_type
    }

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn register_jacobian_elements(&self, jac: &mut JacobianBuilder) {
        for inst in &self.instances {
            jac.register_block(&[self.gas, inst.aerosol], &inst.cols);
        }
    }

    fn update_ids(&mut self, pattern: &SparsityPattern) {
        let gas = self.gas;
        for inst in &mut self.instances {
            for (k, &c) in inst.cols.iter().enumerate() {
                inst.gas_slots[k] = pattern.slot(gas, c);
                inst.aerosol_slots[k] = pattern.slot(inst.aerosol, c);
            }
        }
    }

    fn update_for_new_environmental_state(&mut self, env: &EnvironmentalState) {
        let t = env.temperature;
        self.ppm_to_mol = env.ppm_to_mol_m3();
        self.mean_free_path = 3.0 * self.diffusion / mean_molecular_speed(t, self.gas_mw);
        self.eq_coeff = match self.equilibrium {
            Equilibrium::Henry { h298, c } => {
                1.0 / (self.aerosol_mw * henrys_law_constant(h298, c, t) * GAS_CONSTANT * t)
            }
            Equilibrium::Simpol { b } => {
                simpol_vapor_pressure(b, t) * PA_PER_ATM / (GAS_CONSTANT * t)
            }
        };
    }

    fn calculate_derivative_contribution(&self, ctx: &EvalContext<'_>, forcing: &mut [f64]) {
        for inst in &self.instances {
            if let Some((net, _)) = self.net_flux(inst, ctx, false) {
                forcing[self.gas] -= net / self.ppm_to_mol;
                forcing[inst.aerosol] += net * self.aerosol_mw;
            }
        }
    }

    fn calculate_jacobian_contribution(&self, ctx: &EvalContext<'_>, jac: &mut CscMatrix) {
        for inst in &self.instances {
            let Some((_, grad)) = self.net_flux(inst, ctx, true) else {
                continue;
            };
            for (c, g) in grad {
                if g == 0.0 {
                    continue;
                }
                let k = inst.cols.binary_search(&c).expect("registered column");
                add_opt(jac, inst.gas_slots[k], -g / self.ppm_to_mol);
                add_opt(jac, inst.aerosol_slots[k], g * self.aerosol_mw);
            }
        }
    }
}
