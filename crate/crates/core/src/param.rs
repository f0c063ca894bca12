//! Diagnosed parameters: quantities recomputed from the state on every
//! evaluation instead of being integrated. The only type is ZSR aerosol water.
//!
//! Each ZSR configuration yields one parameter per instance of its phase. Its
//! value lands in the instance's water slot of the effective state that
//! processes read, so `∂λ/∂y` composes with the water columns of the process
//! Jacobian.

use thiserror::Error;

use crate::config::{MechanismConfig, SpeciesKind};
use crate::sparse::{CscMatrix, SparsityBuilder, SparsityPattern};
use crate::state::{EnvironmentalState, StateLayout};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParamError {
    #[error("molality of `{species}` evaluates to {value} at water activity {aw}")]
    NonPositiveMolality {
        species: String,
        value: f64,
        aw: f64,
    },
}

/// Molality `m(a_w) = Σ_d Y_d·a_wᵈ`, mol kg⁻¹.
pub fn molality(poly: &[f64], aw: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, c| acc * aw + c)
}

/// ZSR water (kg m⁻³) of a set of electrolytes given as `(mass kg m⁻³, MW kg mol⁻¹, molality poly)`.
pub fn zsr_water(electrolytes: &[(f64, f64, &[f64])], aw: f64) -> Result<f64, ParamError> {
    let mut w = 0.0;
    for (i, &(mass, mw, poly)) in electrolytes.iter().enumerate() {
        let m = molality(poly, aw);
        if !(m > 0.0) {
            return Err(ParamError::NonPositiveMolality {
                species: format!("electrolyte {i}"),
                value: m,
                aw,
            });
        }
        w += 1000.0 * mass / (mw * 1000.0 * m);
    }
    Ok(w)
}

#[derive(Debug, Clone)]
struct Electrolyte {
    name: String,
    offset: usize,
    /// kg mol⁻¹
    mw: f64,
    poly: Vec<f64>,
}

#[derive(Debug, Clone)]
struct ZsrInstance {
    water_offset: usize,
    electrolytes: Vec<Electrolyte>,
    /// `∂W/∂M_i` at the cached water activity.
    coef: Vec<f64>,
    p_slots: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct Parameters {
    entries: Vec<ZsrInstance>,
    n_state: usize,
    error: Option<ParamError>,
}

impl Parameters {
    pub fn build(config: &MechanismConfig, layout: &StateLayout) -> Self {
        let mut entries = Vec::new();
        for p in &config.parameters {
            for (_, pi) in layout.instances_of(&p.phase) {
                let off =
                    |s: &str| pi.offsets[pi.species.iter().position(|x| x == s).expect("in phase")];
                let electrolytes: Vec<Electrolyte> = p
                    .electrolytes
                    .iter()
                    .map(|e| Electrolyte {
                        name: e.species.clone(),
                        offset: off(&e.species),
                        mw: e.molecular_weight.unwrap_or_else(|| {
                            config
                                .species(SpeciesKind::Aerosol, &e.species)
                                .map(|d| d.molecular_weight)
                                .unwrap_or(f64::NAN)
                        }),
                        poly: e.molality_poly.clone(),
                    })
                    .collect();
                entries.push(ZsrInstance {
                    water_offset: off(&p.water_species),
                    coef: vec![0.0; electrolytes.len()],
                    p_slots: vec![None; electrolytes.len()],
                    electrolytes,
                });
            }
        }
        Self {
            entries,
            n_state: layout.n_total(),
            error: None,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// State offset each parameter is written to.
    pub fn output_offsets(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.water_offset).collect()
    }

    /// Pattern of `∂λ/∂y` (rows = parameters, cols = state offsets).
    pub fn jacobian_pattern(&self) -> std::sync::Arc<SparsityPattern> {
        let mut b = SparsityBuilder::new(self.entries.len(), self.n_state);
        for (k, e) in self.entries.iter().enumerate() {
            for el in &e.electrolytes {
                b.register(k, el.offset);
            }
        }
        b.freeze()
    }

    pub fn update_ids(&mut self, pattern: &SparsityPattern) {
        for (k, e) in self.entries.iter_mut().enumerate() {
            for (s, el) in e.p_slots.iter_mut().zip(&e.electrolytes) {
                *s = pattern.slot(k, el.offset);
            }
        }
    }

    pub fn update_for_new_environmental_state(&mut self, env: &EnvironmentalState) {
        self.error = None;
        let aw = env.relative_humidity;
        for e in &mut self.entries {
            for (c, el) in e.coef.iter_mut().zip(&e.electrolytes) {
                let m = molality(&el.poly, aw);
                if !(m > 0.0) && self.error.is_none() {
                    self.error = Some(ParamError::NonPositiveMolality {
                        species: el.name.clone(),
                        value: m,
                        aw,
                    });
                }
                *c = 1000.0 / (el.mw * 1000.0 * m);
            }
        }
    }

    /// Evaluate every parameter and write it into `state` at its output slot.
    pub fn calculate(&self, state: &mut [f64]) -> Result<(), ParamError> {
        if let Some(e) = &self.error {
            return Err(e.clone());
        }
        for e in &self.entries {
            let w: f64 = e
                .electrolytes
                .iter()
                .zip(&e.coef)
                .map(|(el, c)| c * state[el.offset])
                .sum();
            state[e.water_offset] = w;
        }
        Ok(())
    }

    /// Values of every parameter for `state`, without writing them back.
    pub fn values(&self, state: &[f64]) -> Result<Vec<f64>, ParamError> {
        let mut tmp = state.to_vec();
        self.calculate(&mut tmp)?;
        Ok(self.entries.iter().map(|e| tmp[e.water_offset]).collect())
    }

    pub fn calculate_param_jacobian(&self, _state: &[f64], pjac: &mut CscMatrix) {
        for e in &self.entries {
            for (s, c) in e.p_slots.iter().zip(&e.coef) {
                if let Some(s) = s {
                    pjac.add_at(*s, *c);
                }
            }
        }
    }
}
