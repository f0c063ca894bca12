//! Flat solver state: gas block followed by one block per aerosol phase instance.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::{AeroRepConfig, MechanismConfig};

/// Gas constant, J mol⁻¹ K⁻¹.
pub const GAS_CONSTANT: f64 = 8.314_462_618;
/// Boltzmann constant, J K⁻¹.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Avogadro constant, mol⁻¹.
pub const AVOGADRO: f64 = 6.022_140_76e23;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("unknown gas species `{0}`")]
    UnknownGas(String),
    #[error("gas species `{0}` cannot be addressed with a slot or phase")]
    GasWithPhase(String),
    #[error("no phase instance `{phase}` in slot {slot}")]
    UnknownInstance { slot: usize, phase: String },
    #[error("species `{species}` is not part of phase `{phase}`")]
    UnknownAerosolSpecies { phase: String, species: String },
    #[error("aerosol lookups need both a slot and a phase")]
    IncompleteAerosolKey,
}

#[derive(Debug, Error, PartialEq)]
pub enum StateIoError {
    #[error("state buffer too short: {0} bytes")]
    Truncated(usize),
    #[error("bad state buffer magic")]
    BadMagic,
    #[error("unsupported state buffer version {0}")]
    Version(u32),
    #[error("state length mismatch: buffer holds {found}, expected {expected}")]
    Length { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentalState {
    /// K
    pub temperature: f64,
    /// Pa
    pub pressure: f64,
    /// Fraction in [0, 1]; used as the water activity by ZSR water.
    pub relative_humidity: f64,
}

impl EnvironmentalState {
    pub fn new(temperature: f64, pressure: f64) -> Self {
        Self {
            temperature,
            pressure,
            relative_humidity: 0.0,
        }
    }

    pub fn with_relative_humidity(mut self, rh: f64) -> Self {
        self.relative_humidity = rh;
        self
    }

    pub fn is_valid(&self) -> bool {
        self.temperature > 0.0
            && self.pressure > 0.0
            && (0.0..=1.0).contains(&self.relative_humidity)
    }

    /// Air molar concentration, mol m⁻³.
    pub fn air_mol_m3(&self) -> f64 {
        self.pressure / (GAS_CONSTANT * self.temperature)
    }

    /// Air number density, molecules cm⁻³.
    pub fn air_number_density_cm3(&self) -> f64 {
        self.pressure / (BOLTZMANN * self.temperature) * 1.0e-6
    }

    /// mol m⁻³ of a gas species per ppm.
    pub fn ppm_to_mol_m3(&self) -> f64 {
        self.air_mol_m3() * 1.0e-6
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseInstance {
    pub slot: usize,
    pub phase: String,
    /// State offsets, aligned with the phase's species list.
    pub offsets: Vec<usize>,
    pub species: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub name: String,
    /// Indices into [`StateLayout::phase_instances`].
    pub instances: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateEntry {
    Gas { species: String },
    Aerosol { instance: usize, species: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    gas_names: Vec<String>,
    gas_index: BTreeMap<String, usize>,
    slots: Vec<Slot>,
    phase_instances: Vec<PhaseInstance>,
    n_total: usize,
}

impl StateLayout {
    /// Deterministic layout for a validated configuration.
    pub fn build(config: &MechanismConfig) -> Self {
        let gas_names: Vec<String> = config.gas_species().map(|s| s.name.clone()).collect();
        let gas_index = gas_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut offset = gas_names.len();
        let slot_phases: Vec<(String, Vec<String>)> = match &config.aero_rep {
            None => Vec::new(),
            Some(AeroRepConfig::ModalSectional { modes, sections }) => modes
                .iter()
                .map(|m| (m.name.clone(), m.phases.clone()))
                .chain(sections.iter().map(|s| (s.name.clone(), s.phases.clone())))
                .collect(),
            Some(AeroRepConfig::SingleParticle {
                max_computational_particles,
                phases,
            }) => (0..*max_computational_particles)
                .map(|i| (format!("particle{i}"), phases.clone()))
                .collect(),
        };
        let mut slots = Vec::with_capacity(slot_phases.len());
        let mut phase_instances = Vec::new();
        for (slot_idx, (name, phases)) in slot_phases.into_iter().enumerate() {
            let mut instances = Vec::with_capacity(phases.len());
            for phase in phases {
                let species = config
                    .phase(&phase)
                    .map(|p| p.species.clone())
                    .unwrap_or_default();
                let offsets = (offset..offset + species.len()).collect();
                offset += species.len();
                instances.push(phase_instances.len());
                phase_instances.push(PhaseInstance {
                    slot: slot_idx,
                    phase,
                    offsets,
                    species,
                });
            }
            slots.push(Slot { name, instances });
        }
        Self {
            gas_names,
            gas_index,
            slots,
            phase_instances,
            n_total: offset,
        }
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_gas(&self) -> usize {
        self.gas_names.len()
    }

    pub fn gas_names(&self) -> &[String] {
        &self.gas_names
    }

    pub fn gas_offset(&self, species: &str) -> Option<usize> {
        self.gas_index.get(species).copied()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn phase_instances(&self) -> &[PhaseInstance] {
        &self.phase_instances
    }

    /// All instances of `phase`, in slot order.
    pub fn instances_of<'a>(
        &'a self,
        phase: &'a str,
    ) -> impl Iterator<Item = (usize, &'a PhaseInstance)> + 'a {
        self.phase_instances
            .iter()
            .enumerate()
            .filter(move |(_, pi)| pi.phase == phase)
    }

    /// Resolve a (slot, phase, species) triple; gas species take neither slot nor phase.
    pub fn index_of(
        &self,
        slot: Option<usize>,
        phase: Option<&str>,
        species: &str,
    ) -> Result<usize, LayoutError> {
        match (slot, phase) {
            (None, None) => self
                .gas_offset(species)
                .ok_or_else(|| LayoutError::UnknownGas(species.to_string())),
            (Some(slot), Some(phase)) => {
                let inst = self
                    .slots
                    .get(slot)
                    .and_then(|s| {
                        s.instances
                            .iter()
                            .map(|&i| &self.phase_instances[i])
                            .find(|pi| pi.phase == phase)
                    })
                    .ok_or_else(|| LayoutError::UnknownInstance {
                        slot,
                        phase: phase.to_string(),
                    })?;
                inst.species
                    .iter()
                    .position(|s| s == species)
                    .map(|k| inst.offsets[k])
                    .ok_or_else(|| LayoutError::UnknownAerosolSpecies {
                        phase: phase.to_string(),
                        species: species.to_string(),
                    })
            }
            _ if self.gas_index.contains_key(species) => {
                Err(LayoutError::GasWithPhase(species.to_string()))
            }
            _ => Err(LayoutError::IncompleteAerosolKey),
        }
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn entry(&self, offset: usize) -> Option<StateEntry> {
        if offset < self.gas_names.len() {
            return Some(StateEntry::Gas {
                species: self.gas_names[offset].clone(),
            });
        }
        // Instances are laid out contiguously in order.
        let idx = self
            .phase_instances
            .partition_point(|pi| pi.offsets.last().is_some_and(|&last| last < offset));
        let pi = self.phase_instances.get(idx)?;
        let k = pi.offsets.iter().position(|&o| o == offset)?;
        Some(StateEntry::Aerosol {
            instance: idx,
            species: pi.species[k].clone(),
        })
    }

    /// Human-readable name of a state entry, e.g. `O3` or `POA@aitken/organic`.
    pub fn label(&self, offset: usize) -> String {
        match self.entry(offset) {
            Some(StateEntry::Gas { species }) => species,
            Some(StateEntry::Aerosol { instance, species }) => {
                let pi = &self.phase_instances[instance];
                format!("{species}@{}/{}", self.slots[pi.slot].name, pi.phase)
            }
            None => format!("#{offset}"),
        }
    }
}

const STATE_MAGIC: &[u8; 4] = b"MPST";
const STATE_VERSION: u32 = 1;
pub const STATE_HEADER_LEN: usize = 16;

/// Pack a state vector and environment: 16-byte header (magic, version u32,
/// length u64), then T, P, RH and the values as little-endian f64.
pub fn serialize_state(values: &[f64], env: &EnvironmentalState) -> Vec<u8> {
    let mut out = Vec::with_capacity(STATE_HEADER_LEN + 8 * (values.len() + 3));
    out.extend_from_slice(STATE_MAGIC);
    out.extend_from_slice(&STATE_VERSION.to_le_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for x in [env.temperature, env.pressure, env.relative_humidity]
        .iter()
        .chain(values)
    {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn deserialize_state(bytes: &[u8]) -> Result<(Vec<f64>, EnvironmentalState), StateIoError> {
    if bytes.len() < STATE_HEADER_LEN + 24 {
        return Err(StateIoError::Truncated(bytes.len()));
    }
    if &bytes[0..4] != STATE_MAGIC {
        return Err(StateIoError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != STATE_VERSION {
        return Err(StateIoError::Version(version));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[STATE_HEADER_LEN..];
    if body.len() != 8 * (n + 3) {
        return Err(StateIoError::Length {
            expected: n,
            found: (body.len() / 8).saturating_sub(3),
        });
    }
    let mut doubles = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let env = EnvironmentalState {
        temperature: doubles.next().unwrap(),
        pressure: doubles.next().unwrap(),
        relative_humidity: doubles.next().unwrap(),
    };
    Ok((doubles.collect(), env))
}
