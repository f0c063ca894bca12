//! Scenario-driven box model: one air parcel, fixed environment, constant
//! emissions and photolysis, and a choice of aerosol representation.

mod dist;
mod output;

pub use dist::{
    bin_edges, default_bin_range, discretize_modes_to_bins, mode_volume_fractions,
    sample_particles, sample_particles_weighted, BinnedMass, DistError, Mode, Particle,
    ParticleWeighting,
};
pub use output::{plot_table, read_csv, CsvTable, PlotError};

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{
    self, AeroRepConfig, ConfigError, MechanismConfig, ModeDef, ProcessType, SectionDef,
    SpeciesKind,
};
use crate::core::{Core, CoreError, CoreOptions};
use crate::solver::SolveStats;
use crate::state::{EnvironmentalState, StateLayout};

#[derive(Debug, Error)]
pub enum BoxModelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("reading scenario `{path}`: {source}")]
    ScenarioIo {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing scenario `{path}`: {source}")]
    ScenarioSyntax {
        path: String,
        source: serde_json::Error,
    },
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
    #[error("writing output: {0}")]
    Csv(#[from] csv::Error),
    #[error("solver failed after t = {last_time} s (last row written): {source}")]
    SolverFailed { last_time: f64, source: CoreError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Modes,
    Bins,
    Particles,
}

impl Representation {
    pub const ALL: [Representation; 3] = [Self::Modes, Self::Bins, Self::Particles];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Modes => "modes",
            Self::Bins => "bins",
            Self::Particles => "particles",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| {
                format!("unknown representation `{s}` (expected modes, bins or particles)")
            })
    }
}

fn default_temperature() -> f64 {
    290.0
}

fn default_pressure() -> f64 {
    1.0e5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSettings {
    #[serde(default = "BinSettings::default_n")]
    pub n_bins: usize,
    /// m; defaults to three GSDs below the smallest mode.
    #[serde(default)]
    pub d_min: Option<f64>,
    /// m; defaults to three GSDs above the largest mode.
    #[serde(default)]
    pub d_max: Option<f64>,
}

impl BinSettings {
    fn default_n() -> usize {
        8
    }
}

impl Default for BinSettings {
    fn default() -> Self {
        Self {
            n_bins: 8,
            d_min: None,
            d_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSettings {
    #[serde(default = "ParticleSettings::default_n")]
    pub n_particles: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub weighting: ParticleWeighting,
}

impl ParticleSettings {
    fn default_n() -> usize {
        10_000
    }
}

impl Default for ParticleSettings {
    fn default() -> Self {
        Self {
            n_particles: 10_000,
            seed: 0,
            weighting: ParticleWeighting::Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// s
    pub duration: f64,
    /// s
    pub output_interval: f64,
    /// K
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Pa
    #[serde(default = "default_pressure")]
    pub pressure: f64,
    #[serde(default)]
    pub relative_humidity: f64,
    #[serde(default)]
    pub gas_initial_ppb: BTreeMap<String, f64>,
    /// Keyed by species; each needs an EMISSION process for that species.
    #[serde(default)]
    pub gas_emissions_mol_m3_s: BTreeMap<String, f64>,
    /// s⁻¹, keyed by process label.
    #[serde(default)]
    pub photolysis_s: BTreeMap<String, f64>,
    /// Phase the mode compositions live in.
    #[serde(default)]
    pub aerosol_phase: Option<String>,
    #[serde(default)]
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub bins: BinSettings,
    #[serde(default)]
    pub particles: ParticleSettings,
    /// Free-form provenance notes; ignored by the model.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, BoxModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| BoxModelError::ScenarioIo {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| BoxModelError::ScenarioSyntax {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn environment(&self) -> EnvironmentalState {
        EnvironmentalState::new(self.temperature, self.pressure)
            .with_relative_humidity(self.relative_humidity)
    }

    pub fn check(&self) -> Result<(), BoxModelError> {
        let bad = |m: &str| Err(BoxModelError::Scenario(m.to_string()));
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad("duration must be non-negative");
        }
        if !(self.output_interval > 0.0 && self.output_interval.is_finite()) {
            return bad("output_interval must be positive");
        }
        if !self.environment().is_valid() {
            return bad(
                "temperature and pressure must be positive and relative_humidity in [0, 1]",
            );
        }
        for m in &self.modes {
            m.check()?;
        }
        if !self.modes.is_empty() && self.aerosol_phase.is_none() {
            return bad("modes given without aerosol_phase");
        }
        let nonneg = |map: &BTreeMap<String, f64>, what: &str| match map
            .iter()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            Some((k, v)) => Err(BoxModelError::Scenario(format!(
                "{what} `{k}` = {v} is negative"
            ))),
            None => Ok(()),
        };
        nonneg(&self.gas_initial_ppb, "initial concentration")?;
        nonneg(&self.gas_emissions_mol_m3_s, "emission")?;
        nonneg(&self.photolysis_s, "photolysis rate")?;
        Ok(())
    }

    /// Output times, starting at zero and ending at `duration`.
    pub fn output_times(&self) -> Vec<f64> {
        let n = (self.duration / self.output_interval - 1e-9)
            .ceil()
            .max(0.0) as usize;
        let mut t: Vec<f64> = (0..=n)
            .map(|k| (k as f64 * self.output_interval).min(self.duration))
            .collect();
        t.dedup();
        t
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub rel_tol: Option<f64>,
    pub n_particles: Option<usize>,
}

/// Hex SHA-256 of the configuration with the aerosol representation removed.
pub fn mechanism_hash(config: &MechanismConfig) -> String {
    let mut m = config.clone();
    m.aero_rep = None;
    m.canonicalize();
    let text = serde_json::to_string(&m.to_json()).expect("json");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// A scenario bound to a mechanism and representation, ready to integrate.
#[derive(Debug)]
pub struct PreparedRun {
    pub core: Core,
    pub state: Vec<f64>,
    pub representation: Representation,
    pub mechanism_hash: String,
    pub scenario: Scenario,
}

fn phase_name(sc: &Scenario) -> Result<&str, BoxModelError> {
    sc.aerosol_phase.as_deref().ok_or_else(|| {
        BoxModelError::Scenario("representation needs aerosol_phase and modes".into())
    })
}

pub fn prepare(
    mechanism: &MechanismConfig,
    scenario: &Scenario,
    representation: Representation,
    opts: &RunOptions,
) -> Result<PreparedRun, BoxModelError> {
    scenario.check()?;
    let hash = mechanism_hash(mechanism);
    let mut cfg = mechanism.clone();
    let mut sc = scenario.clone();
    if let Some(seed) = opts.seed {
        sc.particles.seed = seed;
    }
    if let Some(n) = opts.n_particles {
        sc.particles.n_particles = n;
    }
    let density = |s: &str| {
        cfg.species(SpeciesKind::Aerosol, s)
            .and_then(|d| d.density)
            .unwrap_or(f64::NAN)
    };
    if let Some(phase) = &sc.aerosol_phase {
        let def = mechanism
            .phase(phase)
            .ok_or_else(|| BoxModelError::Scenario(format!("unknown aerosol phase `{phase}`")))?;
        for m in &sc.modes {
            for s in m.composition.keys() {
                if !def.species.contains(s) {
                    return Err(BoxModelError::Scenario(format!(
                        "mode `{}`: `{s}` is not in phase `{phase}`",
                        m.name
                    )));
                }
                if !(density(s) > 0.0) {
                    return Err(BoxModelError::Scenario(format!(
                        "species `{s}` needs a density"
                    )));
                }
            }
        }
    }

    // Aerosol slots and the mass each one starts with, per species.
    let mut slot_mass: Vec<BTreeMap<String, f64>> = Vec::new();
    let mut weights: Option<Vec<f64>> = None;
    if !sc.modes.is_empty() {
        let phase = phase_name(&sc)?.to_string();
        cfg.aero_rep = Some(match representation {
            Representation::Modes => {
                for m in &sc.modes {
                    let total = m.volume_concentration() * m.density(&density);
                    slot_mass.push(
                        m.composition
                            .iter()
                            .map(|(s, f)| (s.clone(), total * f))
                            .collect(),
                    );
                }
                AeroRepConfig::ModalSectional {
                    modes: sc
                        .modes
                        .iter()
                        .map(|m| ModeDef {
                            name: m.name.clone(),
                            gmd: m.gmd,
                            gsd: m.gsd,
                            phases: vec![phase.clone()],
                        })
                        .collect(),
                    sections: Vec::new(),
                }
            }
            Representation::Bins => {
                let (lo, hi) = default_bin_range(&sc.modes).expect("modes checked");
                let binned = discretize_modes_to_bins(
                    &sc.modes,
                    sc.bins.n_bins,
                    sc.bins.d_min.unwrap_or(lo),
                    sc.bins.d_max.unwrap_or(hi),
                    &density,
                )?;
                let mids = binned.mid_diameters();
                slot_mass = binned.mass;
                AeroRepConfig::ModalSectional {
                    modes: Vec::new(),
                    sections: mids
                        .iter()
                        .enumerate()
                        .map(|(k, d)| SectionDef {
                            name: format!("bin{k}"),
                            mid_diameter: *d,
                            phases: vec![phase.clone()],
                        })
                        .collect(),
                }
            }
            Representation::Particles => {
                let parts = sample_particles_weighted(
                    &sc.modes,
                    sc.particles.n_particles,
                    sc.particles.seed,
                    sc.particles.weighting,
                    &density,
                )?;
                weights = Some(parts.iter().map(|p| p.weight).collect());
                slot_mass = parts
                    .iter()
                    .map(|p| {
                        p.mass
                            .iter()
                            .map(|(s, m)| (s.clone(), m * p.weight))
                            .collect()
                    })
                    .collect();
                AeroRepConfig::SingleParticle {
                    max_computational_particles: parts.len(),
                    phases: vec![phase.clone()],
                }
            }
        });
    }

    let core_opts = CoreOptions {
        rel_tol: opts.rel_tol,
        ..CoreOptions::default()
    };
    let mut core = Core::from_config(cfg, core_opts)?;
    if let Some(w) = &weights {
        core.set_particle_weights(w)?;
    }
    let env = sc.environment();
    core.set_environment(env)?;

    let layout = core.layout();
    let mut state = vec![0.0; layout.n_total()];
    for (name, ppb) in &sc.gas_initial_ppb {
        let i = layout.gas_offset(name).ok_or_else(|| {
            BoxModelError::Scenario(format!("initial value for unknown gas `{name}`"))
        })?;
        state[i] = ppb * 1.0e-3;
    }
    if let Some(phase) = sc.aerosol_phase.as_deref() {
        for (slot, masses) in slot_mass.iter().enumerate() {
            for (s, m) in masses {
                state[layout
                    .index_of(Some(slot), Some(phase), s)
                    .expect("phase checked")] = *m;
            }
        }
    }

    let n_air = env.air_mol_m3();
    let mut handles = Vec::new();
    for (species, e) in &sc.gas_emissions_mol_m3_s {
        let label = core
            .config()
            .processes
            .iter()
            .find(|p| {
                p.process_type == ProcessType::Emission && p.species.as_deref() == Some(species)
            })
            .and_then(|p| p.label.clone())
            .ok_or_else(|| {
                BoxModelError::Scenario(format!("no labelled EMISSION process for `{species}`"))
            })?;
        handles.push((label, e / n_air * 1.0e6));
    }
    for (label, j) in &sc.photolysis_s {
        handles.push((label.clone(), *j));
    }
    for (label, v) in handles {
        let h = core.get_rate_handle(&label)?;
        core.set_rate(&h, v)?;
    }
    Ok(PreparedRun {
        core,
        state,
        representation,
        mechanism_hash: hash,
        scenario: sc,
    })
}

/// Column descriptions for a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Columns {
    pub names: Vec<String>,
    gas: usize,
    /// Aerosol species name → offsets summed into its total.
    totals: Vec<(String, Vec<usize>)>,
    per_slot: Vec<usize>,
}

/// Per-slot aerosol columns are written only up to this many slots.
pub const MAX_SLOT_COLUMNS: usize = 64;

impl Columns {
    pub fn new(layout: &StateLayout) -> Self {
        let mut names = vec!["time [s]".to_string()];
        names.extend(layout.gas_names().iter().map(|g| format!("{g} [ppb]")));
        let mut totals: Vec<(String, Vec<usize>)> = Vec::new();
        for pi in layout.phase_instances() {
            for (s, &o) in pi.species.iter().zip(&pi.offsets) {
                match totals.iter_mut().find(|(n, _)| n == s) {
                    Some((_, offs)) => offs.push(o),
                    None => totals.push((s.clone(), vec![o])),
                }
            }
        }
        names.extend(totals.iter().map(|(s, _)| format!("{s} [kg m-3]")));
        let mut per_slot = Vec::new();
        if layout.slots().len() <= MAX_SLOT_COLUMNS {
            for pi in layout.phase_instances() {
                for (s, &o) in pi.species.iter().zip(&pi.offsets) {
                    names.push(format!("{s}@{} [kg m-3]", layout.slots()[pi.slot].name));
                    per_slot.push(o);
                }
            }
        }
        Self {
            names,
            gas: layout.n_gas(),
            totals,
            per_slot,
        }
    }

    pub fn row(&self, t: f64, state: &[f64]) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.names.len());
        r.push(t);
        r.extend(state[..self.gas].iter().map(|ppm| ppm * 1.0e3));
        r.extend(
            self.totals
                .iter()
                .map(|(_, offs)| offs.iter().map(|&o| state[o]).sum::<f64>()),
        );
        r.extend(self.per_slot.iter().map(|&o| state[o]));
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub stats: SolveStats,
    pub final_state: Vec<f64>,
}

impl RunOutput {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self
            .columns
            .iter()
            .position(|c| c == name || c.split(" [").next() == Some(name))?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

impl PreparedRun {
    /// Integrate to the end of the scenario, handing each row to `sink` as it
    /// is produced.
    pub fn run_with<F>(mut self, mut sink: F) -> Result<RunOutput, BoxModelError>
    where
        F: FnMut(&[f64]) -> Result<(), BoxModelError>,
    {
        let cols = Columns::new(self.core.layout());
        let env = self.scenario.environment();
        let times = self.scenario.output_times();
        let mut rows = Vec::with_capacity(times.len());
        let mut stats = SolveStats::default();
        let first = cols.row(0.0, &self.state);
        sink(&first)?;
        rows.push(first);
        for w in times.windows(2) {
            match self.core.solve(&mut self.state, &env, w[1] - w[0]) {
                Ok(s) => stats.accumulate(&s),
                Err(source) => {
                    return Err(BoxModelError::SolverFailed {
                        last_time: w[0],
                        source,
                    })
                }
            }
            let row = cols.row(w[1], &self.state);
            sink(&row)?;
            rows.push(row);
        }
        Ok(RunOutput {
            columns: cols.names,
            rows,
            stats,
            final_state: self.state,
        })
    }

    pub fn run(self) -> Result<RunOutput, BoxModelError> {
        self.run_with(|_| Ok(()))
    }
}

/// Load configuration and scenario, run, and stream the CSV to `output`.
pub fn run_scenario<P: AsRef<Path>>(
    config_paths: &[P],
    scenario_path: &Path,
    output_path: &Path,
    representation: Representation,
    opts: &RunOptions,
) -> Result<RunOutput, BoxModelError> {
    let cfg = config::load_config_files(config_paths)?;
    let scenario = Scenario::load(scenario_path)?;
    let run = prepare(&cfg, &scenario, representation, opts)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(output_path)?);
    writeln!(
        file,
        "# mechanism_sha256={} representation={}",
        run.mechanism_hash, representation
    )?;
    let mut w = csv::WriterBuilder::new().from_writer(file);
    w.write_record(Columns::new(run.core.layout()).names)?;
    let result = run.run_with(|row| {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        Ok(())
    });
    w.flush()?;
    result
}
