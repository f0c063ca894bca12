//! Aerosol representations.
//!
//! Processes never look at how particles are stored. They ask the
//! representation for the effective radius, number concentration, phase mass,
//! and mean molecular weight of the particle(s) hosting a given phase instance,
//! each paired with its partial derivatives with respect to the state vector.

use std::f64::consts::PI;

use thiserror::Error;

use crate::config::{AeroRepConfig, MechanismConfig, SpeciesKind};
use crate::state::StateLayout;

/// Radius assigned to an empty computational particle, m.
pub const MIN_PARTICLE_RADIUS: f64 = 1.0e-10;

#[derive(Debug, Error, PartialEq)]
pub enum AeroError {
    #[error("phase instance {0} holds no mass; mean molecular weight is undefined")]
    ZeroMass(usize),
    #[error("expected {expected} particle weights, got {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("particle weights must be positive and finite")]
    BadWeight,
    #[error("representation has no computational particles")]
    NotParticleResolved,
}

/// A property value and its sparse gradient over state offsets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropertyWithGradient {
    pub value: f64,
    pub grad: Vec<(usize, f64)>,
}

impl PropertyWithGradient {
    fn constant(value: f64) -> Self {
        Self {
            value,
            grad: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Member {
    offset: usize,
    density: f64,
    mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotShape {
    Mode { gmd: f64, gsd: f64 },
    Section { mid_diameter: f64 },
    Particle,
}

#[derive(Debug, Clone, PartialEq)]
struct RepSlot {
    shape: SlotShape,
    /// Every species of every phase hosted by the slot.
    members: Vec<Member>,
}

#[derive(Debug, Clone, PartialEq)]
struct RepInstance {
    slot: usize,
    members: Vec<Member>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepKind {
    /// No aerosol: gas-only mechanism.
    None,
    ModalSectional,
    SingleParticle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AerosolRep {
    kind: RepKind,
    slots: Vec<RepSlot>,
    instances: Vec<RepInstance>,
    /// Real particles per m³ represented by each computational particle.
    weights: Vec<f64>,
}

/// Surface-area-weighted mean radius of a lognormal mode (third over second moment).
pub fn modal_effective_radius(gmd: f64, gsd: f64) -> f64 {
    let l = gsd.ln();
    0.5 * gmd * (2.5 * l * l).exp()
}

/// Mean particle volume of a lognormal mode, m³.
pub fn modal_mean_volume(gmd: f64, gsd: f64) -> f64 {
    let l = gsd.ln();
    PI / 6.0 * gmd.powi(3) * (4.5 * l * l).exp()
}

impl AerosolRep {
    pub fn build(config: &MechanismConfig, layout: &StateLayout) -> Self {
        let member = |species: &str, offset: usize| {
            let def = config
                .species(SpeciesKind::Aerosol, species)
                .expect("validated config");
            Member {
                offset,
                density: def.density.unwrap_or(f64::NAN),
                mw: def.molecular_weight,
            }
        };
        let instances: Vec<RepInstance> = layout
            .phase_instances()
            .iter()
            .map(|pi| RepInstance {
                slot: pi.slot,
                members: pi
                    .species
                    .iter()
                    .zip(&pi.offsets)
                    .map(|(s, &o)| member(s, o))
                    .collect(),
            })
            .collect();
        let (kind, shapes): (RepKind, Vec<SlotShape>) = match &config.aero_rep {
            None => (RepKind::None, Vec::new()),
            Some(AeroRepConfig::ModalSectional { modes, sections }) => (
                RepKind::ModalSectional,
                modes
                    .iter()
                    .map(|m| SlotShape::Mode {
                        gmd: m.gmd,
                        gsd: m.gsd,
                    })
                    .chain(sections.iter().map(|s| SlotShape::Section {
                        mid_diameter: s.mid_diameter,
                    }))
                    .collect(),
            ),
            Some(AeroRepConfig::SingleParticle {
                max_computational_particles,
                ..
            }) => (
                RepKind::SingleParticle,
                vec![SlotShape::Particle; *max_computational_particles],
            ),
        };
        let slots: Vec<RepSlot> = shapes
            .into_iter()
            .enumerate()
            .map(|(i, shape)| RepSlot {
                shape,
                members: layout.slots()[i]
                    .instances
                    .iter()
                    .flat_map(|&k| instances[k].members.iter().copied())
                    .collect(),
            })
            .collect();
        let weights = match kind {
            RepKind::SingleParticle => vec![1.0; slots.len()],
            _ => Vec::new(),
        };
        Self {
            kind,
            slots,
            instances,
            weights,
        }
    }

    pub fn kind(&self) -> RepKind {
        self.kind
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn slot_shape(&self, slot: usize) -> SlotShape {
        self.slots[slot].shape
    }

    pub fn particle_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_particle_weights(&mut self, weights: &[f64]) -> Result<(), AeroError> {
        if self.kind != RepKind::SingleParticle {
            return Err(AeroError::NotParticleResolved);
        }
        if weights.len() != self.weights.len() {
            return Err(AeroError::WeightCount {
                expected: self.weights.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(AeroError::BadWeight);
        }
        self.weights.copy_from_slice(weights);
        Ok(())
    }

    fn slot_of(&self, instance: usize) -> &RepSlot {
        &self.slots[self.instances[instance].slot]
    }

    /// State offsets the effective radius can depend on.
    pub fn radius_support(&self, instance: usize) -> Vec<usize> {
        let slot = self.slot_of(instance);
        match slot.shape {
            SlotShape::Particle => slot.members.iter().map(|m| m.offset).collect(),
            _ => Vec::new(),
        }
    }

    /// State offsets the number concentration can depend on.
    pub fn number_support(&self, instance: usize) -> Vec<usize> {
        let slot = self.slot_of(instance);
        match slot.shape {
            SlotShape::Particle => Vec::new(),
            _ => slot.members.iter().map(|m| m.offset).collect(),
        }
    }

    /// State offsets of the species in the phase instance itself.
    pub fn phase_support(&self, instance: usize) -> Vec<usize> {
        self.instances[instance]
            .members
            .iter()
            .map(|m| m.offset)
            .collect()
    }

    /// Effective radius of the particle(s) hosting `instance`, m.
    pub fn effective_radius_m(&self, instance: usize, state: &[f64]) -> PropertyWithGradient {
        let slot_idx = self.instances[instance].slot;
        let slot = &self.slots[slot_idx];
        match slot.shape {
            SlotShape::Mode { gmd, gsd } => {
                PropertyWithGradient::constant(modal_effective_radius(gmd, gsd))
            }
            SlotShape::Section { mid_diameter } => {
                PropertyWithGradient::constant(0.5 * mid_diameter)
            }
            SlotShape::Particle => {
                let w = self.weights[slot_idx];
                let volume: f64 = slot
                    .members
                    .iter()
                    .map(|m| state[m.offset] / m.density)
                    .sum::<f64>()
                    / w;
                let r = if volume > 0.0 {
                    (3.0 * volume / (4.0 * PI)).cbrt()
                } else {
                    0.0
                };
                if r <= MIN_PARTICLE_RADIUS {
                    return PropertyWithGradient::constant(MIN_PARTICLE_RADIUS);
                }
                let dr_dv = r / (3.0 * volume);
                PropertyWithGradient {
                    value: r,
                    grad: slot
                        .members
                        .iter()
                        .map(|m| (m.offset, dr_dv / (m.density * w)))
                        .collect(),
                }
            }
        }
    }

    /// Number concentration of the particle(s) hosting `instance`, m⁻³.
    pub fn number_concentration_n_m3(
        &self,
        instance: usize,
        state: &[f64],
    ) -> PropertyWithGradient {
        let slot_idx = self.instances[instance].slot;
        let slot = &self.slots[slot_idx];
        let mean_volume = match slot.shape {
            SlotShape::Mode { gmd, gsd } => modal_mean_volume(gmd, gsd),
            SlotShape::Section { mid_diameter } => PI / 6.0 * mid_diameter.powi(3),
            SlotShape::Particle => return PropertyWithGradient::constant(self.weights[slot_idx]),
        };
        let total_volume: f64 = slot
            .members
            .iter()
            .map(|m| state[m.offset] / m.density)
            .sum();
        PropertyWithGradient {
            value: total_volume / mean_volume,
            grad: slot
                .members
                .iter()
                .map(|m| (m.offset, 1.0 / (mean_volume * m.density)))
                .collect(),
        }
    }

    /// Total mass concentration of the phase instance, kg m⁻³.
    pub fn aerosol_phase_mass_kg_m3(&self, instance: usize, state: &[f64]) -> PropertyWithGradient {
        let members = &self.instances[instance].members;
        PropertyWithGradient {
            value: members.iter().map(|m| state[m.offset]).sum(),
            grad: members.iter().map(|m| (m.offset, 1.0)).collect(),
        }
    }

    /// Mass-weighted harmonic mean molecular weight of the phase instance, kg mol⁻¹.
    pub fn aerosol_phase_average_molecular_weight_kg_mol(
        &self,
        instance: usize,
        state: &[f64],
    ) -> Result<PropertyWithGradient, AeroError> {
        let members = &self.instances[instance].members;
        let mass: f64 = members.iter().map(|m| state[m.offset]).sum();
        let moles: f64 = members.iter().map(|m| state[m.offset] / m.mw).sum();
        if !(mass > 0.0 && moles > 0.0) {
            return Err(AeroError::ZeroMass(instance));
        }
        let mw = mass / moles;
        Ok(PropertyWithGradient {
            value: mw,
            grad: members
                .iter()
                .map(|m| (m.offset, (1.0 - mw / m.mw) / moles))
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn build(rep_entry: &str) -> (StateLayout, AerosolRep) {
        let text = format!(
            r#"{{"camp-data": [
            {{"type": "SPECIES", "name": "G", "kind": "gas", "molecular_weight": 0.1}},
            {{"type": "SPECIES", "name": "W", "kind": "aerosol", "molecular_weight": 0.018, "density": 1000}},
            {{"type": "SPECIES", "name": "O", "kind": "aerosol", "molecular_weight": 0.100, "density": 1400}},
            {{"type": "AEROSOL_PHASE", "name": "aq", "species": ["W"]}},
            {{"type": "AEROSOL_PHASE", "name": "mix", "species": ["W", "O"]}},
            {rep_entry}
        ]}}"#
        );
        let cfg = parse_config([("t", text.as_str())]).unwrap();
        assert!(crate::config::validate(&cfg).is_empty());
        let layout = StateLayout::build(&cfg);
        let rep = AerosolRep::build(&cfg, &layout);
        (layout, rep)
    }

    const SECTION: &str = r#"{"type": "AERO_REP_MODAL_SECTIONAL", "sections": [
        {"name": "s", "mid_diameter": 2e-6, "phases": ["aq"]},
        {"name": "s2", "mid_diameter": 1e-6, "phases": ["aq"]}]}"#;
    const MODE: &str = r#"{"type": "AERO_REP_MODAL_SECTIONAL", "modes": [
        {"name": "aitken", "geometric_mean_diameter": 2.0e-8, "geometric_standard_deviation": 1.45, "phases": ["mix"]}]}"#;
    const PARTICLE: &str = r#"{"type": "AERO_REP_SINGLE_PARTICLE", "max_computational_particles": 2, "phases": ["aq"]}"#;

    #[test]
    fn section_radius_is_half_mid_diameter() {
        let (_, rep) = build(SECTION);
        let r = rep.effective_radius_m(0, &[0.0, 1e-9, 0.0]);
        assert_eq!(r.value, 1.0e-6);
        assert!(r.grad.is_empty());
    }

    #[test]
    fn particle_radius_from_volume() {
        let (_, rep) = build(PARTICLE);
        // one 4.19e-15 kg water sphere per m³ (weight 1)
        let r = rep.effective_radius_m(0, &[0.0, 4.19e-15, 0.0]);
        assert!((r.value - 1.0e-6).abs() < 1.0e-9, "{}", r.value);
        assert_eq!(r.grad.len(), 1);
        let v = 4.19e-18;
        assert!((r.grad[0].1 - r.value / (3.0 * v * 1000.0)).abs() / r.grad[0].1 < 1e-12);
    }

    #[test]
    fn aitken_mode_radius() {
        let (_, rep) = build(MODE);
        let r = rep.effective_radius_m(0, &[0.0, 1e-12, 1e-12]);
        // 1e-8 * exp(2.5 ln² 1.45), evaluated by hand: ln 1.45 = 0.371564, sq = 0.138060
        assert!((r.value - 1.0e-8 * (2.5_f64 * 0.138_060).exp()).abs() < 1e-13);
        assert!((r.value - 1.4122e-8).abs() < 1e-12);
        assert!(r.grad.is_empty());
    }

    #[test]
    fn number_concentration_cases() {
        let (_, rep) = build(SECTION);
        assert_eq!(rep.number_concentration_n_m3(1, &[0.0; 3]).value, 0.0);
        // d = 1e-6: mean volume 5.236e-19 m³
        let n = rep.number_concentration_n_m3(1, &[0.0, 0.0, 5.235_987_755_982_989e-10]);
        assert!((n.value - 1.0e6).abs() < 1e-6, "{}", n.value);

        let (_, mut rep) = build(PARTICLE);
        rep.set_particle_weights(&[3.2e4, 1.0]).unwrap();
        assert_eq!(
            rep.number_concentration_n_m3(0, &[0.0, 1e-12, 0.0]).value,
            3.2e4
        );
        assert_eq!(
            rep.number_concentration_n_m3(0, &[0.0, 5e-9, 0.0]).value,
            3.2e4
        );
        assert!(rep.set_particle_weights(&[1.0]).is_err());
        assert!(rep.set_particle_weights(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn phase_mass_and_gradient() {
        let (_, rep) = build(MODE);
        let m = rep.aerosol_phase_mass_kg_m3(0, &[0.0, 1e-9, 2e-9]);
        assert!((m.value - 3e-9).abs() < 1e-24);
        assert!(m.grad.iter().all(|(_, g)| *g == 1.0));
        assert_eq!(rep.aerosol_phase_mass_kg_m3(0, &[0.0; 3]).value, 0.0);
    }

    #[test]
    fn average_molecular_weight() {
        let (_, rep) = build(MODE);
        let w = rep
            .aerosol_phase_average_molecular_weight_kg_mol(0, &[0.0, 1e-9, 1e-9])
            .unwrap();
        assert!((w.value - 2.0 / (1.0 / 0.018 + 1.0 / 0.100)).abs() < 1e-15);
        assert!((w.value - 0.0305).abs() < 1e-4);
        assert_eq!(
            rep.aerosol_phase_average_molecular_weight_kg_mol(0, &[0.0; 3]),
            Err(AeroError::ZeroMass(0))
        );
        let (_, rep) = build(SECTION);
        let w = rep
            .aerosol_phase_average_molecular_weight_kg_mol(0, &[0.0, 1e-9, 0.0])
            .unwrap();
        assert_eq!(w.value, 0.018);
        assert!(w.grad.iter().all(|(_, g)| *g == 0.0));
    }

    #[test]
    fn empty_particle_gets_floor_radius() {
        let (_, rep) = build(PARTICLE);
        let r = rep.effective_radius_m(0, &[0.0; 3]);
        assert_eq!(r.value, MIN_PARTICLE_RADIUS);
        assert!(r.grad.is_empty());
    }
}
