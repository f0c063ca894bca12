//! Mechanism configuration: JSON parsing, multi-document merging, and validation.
//!
//! Every input document is an object with a top-level `camp-data` array of typed
//! entries. Entries from all documents are merged into one [`MechanismConfig`]
//! whose collections are sorted canonically, so document order never matters.
//! The key names for each entry type are listed in `docs/schema.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Map, Value};
use thiserror::Error;

/// Top-level array key of every configuration document.
pub const CAMP_DATA_KEY: &str = "camp-data";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{source_name}: JSON syntax error at line {line}, column {column}: {message}")]
    Syntax {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{source_name}: document must be an object with a `camp-data` array")]
    MissingCampData { source_name: String },
    #[error("{path}: unknown entry type `{tag}`")]
    UnknownType { tag: String, path: String },
    #[error("duplicate {kind} definition `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("{path}: {message}")]
    InvalidField { path: String, message: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::InvalidField {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpeciesKind {
    Gas,
    Aerosol,
}

impl SpeciesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpeciesKind::Gas => "gas",
            SpeciesKind::Aerosol => "aerosol",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesDef {
    pub name: String,
    pub kind: SpeciesKind,
    /// kg mol⁻¹
    pub molecular_weight: f64,
    /// kg m⁻³, aerosol species only
    pub density: Option<f64>,
    /// m² s⁻¹, gas species taking part in phase transfer
    pub diffusion_coeff: Option<f64>,
    pub mass_accommodation: f64,
    pub absolute_tolerance: Option<f64>,
    /// Concentration held fixed by the solver (no forcing, no Jacobian rows).
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AerosolPhaseDef {
    pub name: String,
    pub species: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProcessType {
    Arrhenius,
    AqueousReversible,
    CondensedPhaseArrhenius,
    CustomH2o2,
    CustomOhHno3,
    Emission,
    FirstOrderLoss,
    HenrysLawPhaseTransfer,
    Photolysis,
    SimpolPhaseTransfer,
    Troe,
    WennbergNoRo2,
    WennbergTunneling,
}

pub const ALL_PROCESS_TYPES: [ProcessType; 13] = [
    ProcessType::Arrhenius,
    ProcessType::AqueousReversible,
    ProcessType::CondensedPhaseArrhenius,
    ProcessType::CustomH2o2,
    ProcessType::CustomOhHno3,
    ProcessType::Emission,
    ProcessType::FirstOrderLoss,
    ProcessType::HenrysLawPhaseTransfer,
    ProcessType::Photolysis,
    ProcessType::SimpolPhaseTransfer,
    ProcessType::Troe,
    ProcessType::WennbergNoRo2,
    ProcessType::WennbergTunneling,
];

/// How a process addresses the species it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessShape {
    /// `reactants` → `products`, all gas species.
    GasReaction,
    /// A single gas `species`.
    GasSource,
    /// `reactants` → `products` inside every instance of `aerosol_phase`.
    Condensed,
    /// `gas_species` ⇌ `aerosol_species` in `aerosol_phase`.
    PhaseTransfer,
}

impl ProcessType {
    pub fn tag(self) -> &'static str {
        match self {
            ProcessType::Arrhenius => "ARRHENIUS",
            ProcessType::AqueousReversible => "AQUEOUS_REVERSIBLE",
            ProcessType::CondensedPhaseArrhenius => "CONDENSED_PHASE_ARRHENIUS",
            ProcessType::CustomH2o2 => "CUSTOM_H2O2",
            ProcessType::CustomOhHno3 => "CUSTOM_OH_HNO3",
            ProcessType::Emission => "EMISSION",
            ProcessType::FirstOrderLoss => "FIRST_ORDER_LOSS",
            ProcessType::HenrysLawPhaseTransfer => "HENRYS_LAW_PHASE_TRANSFER",
            ProcessType::Photolysis => "PHOTOLYSIS",
            ProcessType::SimpolPhaseTransfer => "SIMPOL_PHASE_TRANSFER",
            ProcessType::Troe => "TROE",
            ProcessType::WennbergNoRo2 => "WENNBERG_NO_RO2",
            ProcessType::WennbergTunneling => "WENNBERG_TUNNELING",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        ALL_PROCESS_TYPES.iter().copied().find(|t| t.tag() == tag)
    }

    pub fn shape(self) -> ProcessShape {
        use ProcessType::*;
        match self {
            Arrhenius | CustomH2o2 | CustomOhHno3 | Photolysis | Troe | WennbergNoRo2
            | WennbergTunneling => ProcessShape::GasReaction,
            Emission | FirstOrderLoss => ProcessShape::GasSource,
            AqueousReversible | CondensedPhaseArrhenius => ProcessShape::Condensed,
            HenrysLawPhaseTransfer | SimpolPhaseTransfer => ProcessShape::PhaseTransfer,
        }
    }

    /// Rate parameters that must be present.
    pub fn required_parameters(self) -> &'static [&'static str] {
        use ProcessType::*;
        match self {
            Arrhenius | CondensedPhaseArrhenius | WennbergTunneling => &["A"],
            AqueousReversible => &["A", "k_reverse"],
            CustomH2o2 => &["k1_A", "k2_A"],
            CustomOhHno3 => &["k0_A", "k2_A", "k3_A"],
            Emission | FirstOrderLoss | Photolysis => &[],
            HenrysLawPhaseTransfer => &["H298"],
            SimpolPhaseTransfer => &["B1", "B2"],
            Troe => &["k0_A", "kinf_A"],
            WennbergNoRo2 => &["X", "Y", "a0", "n"],
        }
    }

    /// Rate parameters that may be present, with the value used when absent.
    pub fn optional_parameters(self) -> &'static [(&'static str, f64)] {
        use ProcessType::*;
        match self {
            Arrhenius | CondensedPhaseArrhenius => &[
                ("Ea", 0.0),
                ("C", 0.0),
                ("B", 0.0),
                ("D", 300.0),
                ("E", 0.0),
            ],
            AqueousReversible | HenrysLawPhaseTransfer => &[("C", 0.0)],
            CustomH2o2 => &[("k1_B", 0.0), ("k1_C", 0.0), ("k2_B", 0.0), ("k2_C", 0.0)],
            CustomOhHno3 => &[
                ("k0_B", 0.0),
                ("k0_C", 0.0),
                ("k2_B", 0.0),
                ("k2_C", 0.0),
                ("k3_B", 0.0),
                ("k3_C", 0.0),
            ],
            Emission => &[("rate", 0.0)],
            FirstOrderLoss | Photolysis => &[("rate_constant", 0.0)],
            SimpolPhaseTransfer => &[("B3", 0.0), ("B4", 0.0)],
            Troe => &[
                ("k0_B", 0.0),
                ("k0_C", 0.0),
                ("kinf_B", 0.0),
                ("kinf_C", 0.0),
                ("Fc", 0.6),
                ("N", 1.0),
            ],
            WennbergNoRo2 => &[],
            WennbergTunneling => &[("B", 0.0), ("C", 0.0)],
        }
    }

    /// Whether a rate handle may be attached to processes of this type.
    pub fn is_updatable(self) -> bool {
        matches!(
            self,
            ProcessType::Emission | ProcessType::FirstOrderLoss | ProcessType::Photolysis
        )
    }
}

impl fmt::Display for ProcessType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondensedUnits {
    /// mol per litre of aerosol-phase water
    Molar,
    /// mol per m³ of air
    MolPerM3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reactant {
    pub qty: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Product {
    pub yield_: f64,
    /// `yield_` is a mass yield relative to the process `mass_basis` reactant.
    pub mass_yield: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessConfig {
    pub process_type: ProcessType,
    pub label: Option<String>,
    pub reactants: BTreeMap<String, Reactant>,
    /// For `WENNBERG_NO_RO2` these are the alkoxy-branch products.
    pub products: BTreeMap<String, Product>,
    /// `WENNBERG_NO_RO2` only.
    pub nitrate_products: BTreeMap<String, Product>,
    /// Target of `EMISSION` / `FIRST_ORDER_LOSS`.
    pub species: Option<String>,
    pub gas_species: Option<String>,
    pub aerosol_species: Option<String>,
    /// `None` means the gas phase.
    pub phase: Option<String>,
    pub water_species: Option<String>,
    pub units: Option<CondensedUnits>,
    pub mass_basis: Option<String>,
    pub rate_parameters: BTreeMap<String, f64>,
}

impl ProcessConfig {
    pub fn new(process_type: ProcessType) -> Self {
        Self {
            process_type,
            label: None,
            reactants: BTreeMap::new(),
            products: BTreeMap::new(),
            nitrate_products: BTreeMap::new(),
            species: None,
            gas_species: None,
            aerosol_species: None,
            phase: None,
            water_species: None,
            units: None,
            mass_basis: None,
            rate_parameters: BTreeMap::new(),
        }
    }

    /// Rate parameter value, falling back to the documented default.
    pub fn param(&self, key: &str) -> f64 {
        if let Some(v) = self.rate_parameters.get(key) {
            return *v;
        }
        self.process_type
            .optional_parameters()
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }

    pub fn has_param(&self, key: &str) -> bool {
        self.rate_parameters.contains_key(key)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Electrolyte {
    pub species: String,
    /// kg mol⁻¹; taken from the species definition when absent.
    pub molecular_weight: Option<f64>,
    /// Y₀..Y_d of m(a_w) = Σ Y_d a_wᵈ, mol kg⁻¹.
    pub molality_poly: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterConfig {
    pub name: String,
    pub phase: String,
    pub water_species: String,
    pub electrolytes: Vec<Electrolyte>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDef {
    pub name: String,
    /// m
    pub gmd: f64,
    pub gsd: f64,
    pub phases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionDef {
    pub name: String,
    /// m
    pub mid_diameter: f64,
    pub phases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AeroRepConfig {
    ModalSectional {
        modes: Vec<ModeDef>,
        sections: Vec<SectionDef>,
    },
    SingleParticle {
        max_computational_particles: usize,
        phases: Vec<String>,
    },
}

impl AeroRepConfig {
    pub fn tag(&self) -> &'static str {
        match self {
            AeroRepConfig::ModalSectional { .. } => "AERO_REP_MODAL_SECTIONAL",
            AeroRepConfig::SingleParticle { .. } => "AERO_REP_SINGLE_PARTICLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MechanismConfig {
    pub species: Vec<SpeciesDef>,
    pub phases: Vec<AerosolPhaseDef>,
    pub aero_rep: Option<AeroRepConfig>,
    pub processes: Vec<ProcessConfig>,
    pub parameters: Vec<ParameterConfig>,
    pub relative_tolerance: Option<f64>,
}

impl MechanismConfig {
    pub fn species(&self, kind: SpeciesKind, name: &str) -> Option<&SpeciesDef> {
        self.species
            .iter()
            .find(|s| s.kind == kind && s.name == name)
    }

    pub fn gas_species(&self) -> impl Iterator<Item = &SpeciesDef> {
        self.species.iter().filter(|s| s.kind == SpeciesKind::Gas)
    }

    pub fn phase(&self, name: &str) -> Option<&AerosolPhaseDef> {
        self.phases.iter().find(|p| p.name == name)
    }

    pub fn process_by_label(&self, label: &str) -> Option<(usize, &ProcessConfig)> {
        self.processes
            .iter()
            .enumerate()
            .find(|(_, p)| p.label.as_deref() == Some(label))
    }

    /// Merge another config into this one, rejecting duplicate definitions.
    pub fn merge(&mut self, other: MechanismConfig) -> Result<(), ConfigError> {
        for s in other.species {
            if self.species(s.kind, &s.name).is_some() {
                return Err(ConfigError::Duplicate {
                    kind: "species",
                    name: s.name,
                });
            }
            self.species.push(s);
        }
        for p in other.phases {
            if self.phase(&p.name).is_some() {
                return Err(ConfigError::Duplicate {
                    kind: "aerosol phase",
                    name: p.name,
                });
            }
            self.phases.push(p);
        }
        if let Some(rep) = other.aero_rep {
            if self.aero_rep.is_some() {
                return Err(ConfigError::Duplicate {
                    kind: "aerosol representation",
                    name: rep.tag().to_string(),
                });
            }
            self.aero_rep = Some(rep);
        }
        for p in other.processes {
            if let Some(label) = &p.label {
                if self.process_by_label(label).is_some() {
                    return Err(ConfigError::Duplicate {
                        kind: "process label",
                        name: label.clone(),
                    });
                }
            }
            self.processes.push(p);
        }
        for p in other.parameters {
            if self.parameters.iter().any(|q| q.name == p.name) {
                return Err(ConfigError::Duplicate {
                    kind: "parameter",
                    name: p.name,
                });
            }
            self.parameters.push(p);
        }
        if let Some(rtol) = other.relative_tolerance {
            if self.relative_tolerance.is_some() {
                return Err(ConfigError::Duplicate {
                    kind: "solver settings",
                    name: "relative_tolerance".into(),
                });
            }
            self.relative_tolerance = Some(rtol);
        }
        Ok(())
    }

    /// Sort every collection into a canonical order.
    pub fn canonicalize(&mut self) {
        self.species
            .sort_by(|a, b| (a.kind, &a.name).cmp(&(b.kind, &b.name)));
        self.phases.sort_by(|a, b| a.name.cmp(&b.name));
        self.parameters.sort_by(|a, b| a.name.cmp(&b.name));
        let mut keyed: Vec<(String, ProcessConfig)> = self
            .processes
            .drain(..)
            .map(|p| (process_to_json(&p).to_string(), p))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        self.processes = keyed.into_iter().map(|(_, p)| p).collect();
    }

    /// Serialize back into a single `camp-data` document.
    pub fn to_json(&self) -> Value {
        let mut entries = Vec::new();
        if let Some(rtol) = self.relative_tolerance {
            entries.push(json!({"type": "SOLVER_SETTINGS", "relative_tolerance": rtol}));
        }
        for s in &self.species {
            let mut m = Map::new();
            m.insert("type".into(), json!("SPECIES"));
            m.insert("name".into(), json!(s.name));
            m.insert("kind".into(), json!(s.kind.as_str()));
            m.insert("molecular_weight".into(), json!(s.molecular_weight));
            if let Some(d) = s.density {
                m.insert("density".into(), json!(d));
            }
            if let Some(d) = s.diffusion_coeff {
                m.insert("diffusion_coeff".into(), json!(d));
            }
            if s.mass_accommodation != 1.0 {
                m.insert("mass_accommodation".into(), json!(s.mass_accommodation));
            }
            if let Some(a) = s.absolute_tolerance {
                m.insert("absolute_tolerance".into(), json!(a));
            }
            if s.constant {
                m.insert("constant".into(), json!(true));
            }
            entries.push(Value::Object(m));
        }
        for p in &self.phases {
            entries.push(json!({"type": "AEROSOL_PHASE", "name": p.name, "species": p.species}));
        }
        if let Some(rep) = &self.aero_rep {
            entries.push(aero_rep_to_json(rep));
        }
        for p in &self.parameters {
            let electrolytes: Vec<Value> = p
                .electrolytes
                .iter()
                .map(|e| {
                    let mut m = Map::new();
                    m.insert("species".into(), json!(e.species));
                    if let Some(mw) = e.molecular_weight {
                        m.insert("molecular_weight".into(), json!(mw));
                    }
                    m.insert("molality_polynomial".into(), json!(e.molality_poly));
                    Value::Object(m)
                })
                .collect();
            entries.push(json!({
                "type": "ZSR_AEROSOL_WATER",
                "name": p.name,
                "aerosol_phase": p.phase,
                "aerosol_phase_water": p.water_species,
                "electrolytes": electrolytes,
            }));
        }
        for p in &self.processes {
            entries.push(process_to_json(p));
        }
        json!({ CAMP_DATA_KEY: entries })
    }
}

fn aero_rep_to_json(rep: &AeroRepConfig) -> Value {
    match rep {
        AeroRepConfig::ModalSectional { modes, sections } => json!({
            "type": rep.tag(),
            "modes": modes.iter().map(|m| json!({
                "name": m.name, "geometric_mean_diameter": m.gmd,
                "geometric_standard_deviation": m.gsd, "phases": m.phases,
            })).collect::<Vec<_>>(),
            "sections": sections.iter().map(|s| json!({
                "name": s.name, "mid_diameter": s.mid_diameter, "phases": s.phases,
            })).collect::<Vec<_>>(),
        }),
        AeroRepConfig::SingleParticle {
            max_computational_particles,
            phases,
        } => json!({
            "type": rep.tag(),
            "max_computational_particles": max_computational_particles,
            "phases": phases,
        }),
    }
}

fn products_to_json(products: &BTreeMap<String, Product>) -> Value {
    let mut m = Map::new();
    for (name, p) in products {
        let mut e = Map::new();
        if p.yield_ != 1.0 {
            e.insert("yield".into(), json!(p.yield_));
        }
        if p.mass_yield {
            e.insert("mass_yield".into(), json!(true));
        }
        m.insert(name.clone(), Value::Object(e));
    }
    Value::Object(m)
}

fn process_to_json(p: &ProcessConfig) -> Value {
    let mut m = Map::new();
    m.insert("type".into(), json!(p.process_type.tag()));
    if let Some(l) = &p.label {
        m.insert("label".into(), json!(l));
    }
    if !p.reactants.is_empty() {
        let mut r = Map::new();
        for (name, re) in &p.reactants {
            let mut e = Map::new();
            if re.qty != 1 {
                e.insert("qty".into(), json!(re.qty));
            }
            r.insert(name.clone(), Value::Object(e));
        }
        m.insert("reactants".into(), Value::Object(r));
    }
    let product_key = if p.process_type == ProcessType::WennbergNoRo2 {
        "alkoxy_products"
    } else {
        "products"
    };
    if !p.products.is_empty() || p.process_type.shape() == ProcessShape::GasReaction {
        m.insert(product_key.into(), products_to_json(&p.products));
    }
    if p.process_type == ProcessType::WennbergNoRo2 {
        m.insert(
            "nitrate_products".into(),
            products_to_json(&p.nitrate_products),
        );
    }
    let mut opt = |key: &str, v: &Option<String>| {
        if let Some(v) = v {
            m.insert(key.into(), json!(v));
        }
    };
    opt("species", &p.species);
    opt("gas_species", &p.gas_species);
    opt("aerosol_species", &p.aerosol_species);
    opt("aerosol_phase", &p.phase);
    opt("aerosol_phase_water", &p.water_species);
    opt("mass_basis", &p.mass_basis);
    if let Some(u) = p.units {
        m.insert(
            "units".into(),
            json!(match u {
                CondensedUnits::Molar => "M",
                CondensedUnits::MolPerM3 => "mol m-3",
            }),
        );
    }
    for (k, v) in &p.rate_parameters {
        m.insert(k.clone(), json!(v));
    }
    Value::Object(m)
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse and merge one or more `(source name, JSON text)` documents.
pub fn parse_config<'a, I>(documents: I) -> Result<MechanismConfig, ConfigError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut merged = MechanismConfig::default();
    for (source, text) in documents {
        merged.merge(parse_document(source, text)?)?;
    }
    merged.canonicalize();
    Ok(merged)
}

/// Read and parse configuration files from disk.
pub fn load_config_files<P: AsRef<std::path::Path>>(
    paths: &[P],
) -> Result<MechanismConfig, ConfigError> {
    let mut texts = Vec::with_capacity(paths.len());
    for p in paths {
        let path = p.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        texts.push((path.display().to_string(), text));
    }
    parse_config(texts.iter().map(|(n, t)| (n.as_str(), t.as_str())))
}

fn parse_document(source: &str, text: &str) -> Result<MechanismConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        source_name: source.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let entries = value
        .get(CAMP_DATA_KEY)
        .and_then(Value::as_array)
        .ok_or_else(|| ConfigError::MissingCampData {
            source_name: source.to_string(),
        })?;
    let mut cfg = MechanismConfig::default();
    for (i, entry) in entries.iter().enumerate() {
        let path = format!("{source}:camp-data[{i}]");
        let obj = entry
            .as_object()
            .ok_or_else(|| invalid(&path, "entry must be an object"))?;
        let tag = get_str(obj, "type", &path)?;
        let mut single = MechanismConfig::default();
        match tag.as_str() {
            "SPECIES" => single.species.push(parse_species(obj, &path)?),
            "AEROSOL_PHASE" => single.phases.push(AerosolPhaseDef {
                name: get_str(obj, "name", &path)?,
                species: get_str_list(obj, "species", &path)?,
            }),
            "AERO_REP_MODAL_SECTIONAL" | "AERO_REP_SINGLE_PARTICLE" => {
                single.aero_rep = Some(parse_aero_rep(&tag, obj, &path)?)
            }
            "ZSR_AEROSOL_WATER" => single.parameters.push(parse_zsr(obj, &path)?),
            "SOLVER_SETTINGS" => {
                single.relative_tolerance = Some(get_f64(obj, "relative_tolerance", &path)?)
            }
            other => match ProcessType::from_tag(other) {
                Some(t) => single.processes.push(parse_process(t, obj, &path)?),
                None => {
                    return Err(ConfigError::UnknownType {
                        tag: other.to_string(),
                        path,
                    })
                }
            },
        }
        cfg.merge(single)?;
    }
    Ok(cfg)
}

fn get_str(obj: &Map<String, Value>, key: &str, path: &str) -> Result<String, ConfigError> {
    obj.get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| invalid(&format!("{path}.{key}"), "missing or non-string value"))
}

fn opt_str(obj: &Map<String, Value>, key: &str, path: &str) -> Result<Option<String>, ConfigError> {
    match obj.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(invalid(&format!("{path}.{key}"), "expected a string")),
    }
}

fn get_f64(obj: &Map<String, Value>, key: &str, path: &str) -> Result<f64, ConfigError> {
    obj.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| invalid(&format!("{path}.{key}"), "missing or non-numeric value"))
}

fn opt_f64(obj: &Map<String, Value>, key: &str, path: &str) -> Result<Option<f64>, ConfigError> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| invalid(&format!("{path}.{key}"), "expected a number")),
    }
}

fn get_str_list(
    obj: &Map<String, Value>,
    key: &str,
    path: &str,
) -> Result<Vec<String>, ConfigError> {
    let arr = obj
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| invalid(&format!("{path}.{key}"), "missing or non-array value"))?;
    arr.iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| invalid(&format!("{path}.{key}"), "array entries must be strings"))
        })
        .collect()
}

fn parse_species(obj: &Map<String, Value>, path: &str) -> Result<SpeciesDef, ConfigError> {
    let kind = match get_str(obj, "kind", path)?.as_str() {
        "gas" => SpeciesKind::Gas,
        "aerosol" => SpeciesKind::Aerosol,
        other => {
            return Err(invalid(
                &format!("{path}.kind"),
                format!("expected `gas` or `aerosol`, found `{other}`"),
            ))
        }
    };
    let constant = match obj.get("constant") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(invalid(&format!("{path}.constant"), "expected a boolean")),
    };
    Ok(SpeciesDef {
        name: get_str(obj, "name", path)?,
        kind,
        molecular_weight: get_f64(obj, "molecular_weight", path)?,
        density: opt_f64(obj, "density", path)?,
        diffusion_coeff: opt_f64(obj, "diffusion_coeff", path)?,
        mass_accommodation: opt_f64(obj, "mass_accommodation", path)?.unwrap_or(1.0),
        absolute_tolerance: opt_f64(obj, "absolute_tolerance", path)?,
        constant,
    })
}

fn parse_aero_rep(
    tag: &str,
    obj: &Map<String, Value>,
    path: &str,
) -> Result<AeroRepConfig, ConfigError> {
    let objects = |key: &str| -> Result<Vec<&Map<String, Value>>, ConfigError> {
        match obj.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| {
                    v.as_object()
                        .ok_or_else(|| invalid(&format!("{path}.{key}"), "entries must be objects"))
                })
                .collect(),
            Some(_) => Err(invalid(&format!("{path}.{key}"), "expected an array")),
        }
    };
    if tag == "AERO_REP_MODAL_SECTIONAL" {
        let modes = objects("modes")?
            .into_iter()
            .enumerate()
            .map(|(i, m)| {
                let p = format!("{path}.modes[{i}]");
                Ok(ModeDef {
                    name: get_str(m, "name", &p)?,
                    gmd: get_f64(m, "geometric_mean_diameter", &p)?,
                    gsd: get_f64(m, "geometric_standard_deviation", &p)?,
                    phases: get_str_list(m, "phases", &p)?,
                })
            })
            .collect::<Result<_, ConfigError>>()?;
        let sections = objects("sections")?
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let p = format!("{path}.sections[{i}]");
                Ok(SectionDef {
                    name: get_str(s, "name", &p)?,
                    mid_diameter: get_f64(s, "mid_diameter", &p)?,
                    phases: get_str_list(s, "phases", &p)?,
                })
            })
            .collect::<Result<_, ConfigError>>()?;
        Ok(AeroRepConfig::ModalSectional { modes, sections })
    } else {
        let n = obj
            .get("max_computational_particles")
            .and_then(Value::as_u64)
            .ok_or_else(|| {
                invalid(
                    &format!("{path}.max_computational_particles"),
                    "missing or non-integer value",
                )
            })?;
        Ok(AeroRepConfig::SingleParticle {
            max_computational_particles: n as usize,
            phases: get_str_list(obj, "phases", path)?,
        })
    }
}

fn parse_zsr(obj: &Map<String, Value>, path: &str) -> Result<ParameterConfig, ConfigError> {
    let arr = obj
        .get("electrolytes")
        .and_then(Value::as_array)
        .ok_or_else(|| {
            invalid(
                &format!("{path}.electrolytes"),
                "missing or non-array value",
            )
        })?;
    let electrolytes = arr
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let p = format!("{path}.electrolytes[{i}]");
            let e = e
                .as_object()
                .ok_or_else(|| invalid(&p, "electrolyte must be an object"))?;
            let poly = e
                .get("molality_polynomial")
                .and_then(Value::as_array)
                .ok_or_else(|| invalid(&format!("{p}.molality_polynomial"), "missing array"))?
                .iter()
                .map(|v| {
                    v.as_f64().ok_or_else(|| {
                        invalid(
                            &format!("{p}.molality_polynomial"),
                            "coefficients must be numbers",
                        )
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Electrolyte {
                species: get_str(e, "species", &p)?,
                molecular_weight: opt_f64(e, "molecular_weight", &p)?,
                molality_poly: poly,
            })
        })
        .collect::<Result<_, ConfigError>>()?;
    Ok(ParameterConfig {
        name: get_str(obj, "name", path)?,
        phase: get_str(obj, "aerosol_phase", path)?,
        water_species: get_str(obj, "aerosol_phase_water", path)?,
        electrolytes,
    })
}

fn parse_products(
    obj: &Map<String, Value>,
    key: &str,
    path: &str,
) -> Result<BTreeMap<String, Product>, ConfigError> {
    let mut out = BTreeMap::new();
    let Some(v) = obj.get(key) else {
        return Ok(out);
    };
    let map = v
        .as_object()
        .ok_or_else(|| invalid(&format!("{path}.{key}"), "expected an object"))?;
    for (name, entry) in map {
        let p = format!("{path}.{key}.{name}");
        let e = entry
            .as_object()
            .ok_or_else(|| invalid(&p, "expected an object"))?;
        let mass_yield = match e.get("mass_yield") {
            None => false,
            Some(Value::Bool(b)) => *b,
            Some(_) => return Err(invalid(&format!("{p}.mass_yield"), "expected a boolean")),
        };
        out.insert(
            name.clone(),
            Product {
                yield_: opt_f64(e, "yield", &p)?.unwrap_or(1.0),
                mass_yield,
            },
        );
    }
    Ok(out)
}

const STRUCTURAL_PROCESS_KEYS: &[&str] = &[
    "type",
    "label",
    "reactants",
    "products",
    "alkoxy_products",
    "nitrate_products",
    "species",
    "gas_species",
    "aerosol_species",
    "aerosol_phase",
    "aerosol_phase_water",
    "units",
    "mass_basis",
];

fn parse_process(
    process_type: ProcessType,
    obj: &Map<String, Value>,
    path: &str,
) -> Result<ProcessConfig, ConfigError> {
    let mut p = ProcessConfig::new(process_type);
    p.label = opt_str(obj, "label", path)?;
    if let Some(v) = obj.get("reactants") {
        let map = v
            .as_object()
            .ok_or_else(|| invalid(&format!("{path}.reactants"), "expected an object"))?;
        for (name, entry) in map {
            let rp = format!("{path}.reactants.{name}");
            let e = entry
                .as_object()
                .ok_or_else(|| invalid(&rp, "expected an object"))?;
            let qty =
                match e.get("qty") {
                    None => 1,
                    Some(q) => q.as_u64().filter(|q| *q >= 1).ok_or_else(|| {
                        invalid(&format!("{rp}.qty"), "expected a positive integer")
                    })? as u32,
                };
            p.reactants.insert(name.clone(), Reactant { qty });
        }
    }
    if process_type == ProcessType::WennbergNoRo2 {
        p.products = parse_products(obj, "alkoxy_products", path)?;
        p.nitrate_products = parse_products(obj, "nitrate_products", path)?;
    } else {
        p.products = parse_products(obj, "products", path)?;
    }
    p.species = opt_str(obj, "species", path)?;
    p.gas_species = opt_str(obj, "gas_species", path)?;
    p.aerosol_species = opt_str(obj, "aerosol_species", path)?;
    p.phase = opt_str(obj, "aerosol_phase", path)?;
    p.water_species = opt_str(obj, "aerosol_phase_water", path)?;
    p.mass_basis = opt_str(obj, "mass_basis", path)?;
    p.units = match opt_str(obj, "units", path)?.as_deref() {
        None => None,
        Some("M") => Some(CondensedUnits::Molar),
        Some("mol m-3") => Some(CondensedUnits::MolPerM3),
        Some(other) => {
            return Err(invalid(
                &format!("{path}.units"),
                format!("expected `M` or `mol m-3`, found `{other}`"),
            ))
        }
    };
    for (k, v) in obj {
        if STRUCTURAL_PROCESS_KEYS.contains(&k.as_str()) {
            continue;
        }
        let x = v
            .as_f64()
            .ok_or_else(|| invalid(&format!("{path}.{k}"), "rate parameters must be numbers"))?;
        p.rate_parameters.insert(k.clone(), x);
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Stable machine-readable code, e.g. `E-UNKNOWN-SPECIES`.
    pub code: &'static str,
    pub message: String,
    /// JSON-path into the merged configuration.
    pub path: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}[{}] {}: {}", self.code, self.path, self.message)
    }
}

struct Diagnostics(Vec<Diagnostic>);

impl Diagnostics {
    fn error(&mut self, code: &'static str, path: String, message: String) {
        self.0.push(Diagnostic {
            severity: Severity::Error,
            code,
            message,
            path,
        });
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// Check every structural invariant of a merged configuration.
pub fn validate(config: &MechanismConfig) -> Vec<Diagnostic> {
    let mut d = Diagnostics(Vec::new());
    if config.species.is_empty() {
        d.error(
            "E-NO-SPECIES",
            "$.species".into(),
            "configuration defines no species".into(),
        );
    }
    if let Some(rtol) = config.relative_tolerance {
        if !(rtol > 0.0) {
            d.error(
                "E-TOLERANCE",
                "$.relative_tolerance".into(),
                format!("relative tolerance must be > 0, found {rtol}"),
            );
        }
    }
    for (i, s) in config.species.iter().enumerate() {
        let path = format!("$.species[{i}]");
        if !(s.molecular_weight > 0.0) {
            d.error(
                "E-SPECIES-MW",
                path.clone(),
                format!("species `{}` must have molecular_weight > 0", s.name),
            );
        }
        if s.kind == SpeciesKind::Aerosol && !s.density.is_some_and(|x| x > 0.0) {
            d.error(
                "E-SPECIES-DENSITY",
                path.clone(),
                format!("aerosol species `{}` must have density > 0", s.name),
            );
        }
        if !(s.mass_accommodation > 0.0 && s.mass_accommodation <= 1.0) {
            d.error(
                "E-SPECIES-ALPHA",
                path.clone(),
                format!("species `{}` mass accommodation must lie in (0, 1]", s.name),
            );
        }
        if s.diffusion_coeff.is_some_and(|x| !(x > 0.0)) {
            d.error(
                "E-SPECIES-DIFFUSION",
                path.clone(),
                format!("species `{}` diffusion coefficient must be > 0", s.name),
            );
        }
        if s.absolute_tolerance.is_some_and(|x| !(x > 0.0)) {
            d.error(
                "E-TOLERANCE",
                path,
                format!("species `{}` absolute tolerance must be > 0", s.name),
            );
        }
    }
    for (i, p) in config.phases.iter().enumerate() {
        let path = format!("$.phases[{i}]");
        if p.species.is_empty() {
            d.error(
                "E-EMPTY-PHASE",
                path.clone(),
                format!("aerosol phase `{}` has no species", p.name),
            );
        }
        let mut seen = BTreeSet::new();
        for s in &p.species {
            if !seen.insert(s) {
                d.error(
                    "E-DUPLICATE-SPECIES",
                    format!("{path}.species"),
                    format!("species `{s}` listed twice in phase `{}`", p.name),
                );
            }
            if config.species(SpeciesKind::Aerosol, s).is_none() {
                d.error(
                    "E-UNKNOWN-SPECIES",
                    format!("{path}.species"),
                    format!(
                        "phase `{}` references undeclared aerosol species `{s}`",
                        p.name
                    ),
                );
            }
        }
    }
    if let Some(rep) = &config.aero_rep {
        validate_aero_rep(config, rep, &mut d);
    }
    for (i, p) in config.parameters.iter().enumerate() {
        validate_parameter(config, p, &format!("$.parameters[{i}]"), &mut d);
    }
    for (i, p) in config.processes.iter().enumerate() {
        validate_process(config, p, &format!("$.processes[{i}]"), &mut d);
    }
    d.0
}

fn validate_aero_rep(config: &MechanismConfig, rep: &AeroRepConfig, d: &mut Diagnostics) {
    let check_phases = |phases: &[String], path: String, d: &mut Diagnostics| {
        if phases.is_empty() {
            d.error(
                "E-AERO-REP",
                path.clone(),
                "slot hosts no aerosol phases".into(),
            );
        }
        for ph in phases {
            if config.phase(ph).is_none() {
                d.error(
                    "E-UNKNOWN-PHASE",
                    path.clone(),
                    format!("undeclared aerosol phase `{ph}`"),
                );
            }
        }
    };
    match rep {
        AeroRepConfig::ModalSectional { modes, sections } => {
            if modes.is_empty() && sections.is_empty() {
                d.error(
                    "E-AERO-REP",
                    "$.aero_rep".into(),
                    "modal/sectional representation needs at least one mode or section".into(),
                );
            }
            let mut names = BTreeSet::new();
            for (i, m) in modes.iter().enumerate() {
                let path = format!("$.aero_rep.modes[{i}]");
                if !names.insert(&m.name) {
                    d.error(
                        "E-DUPLICATE-SLOT",
                        path.clone(),
                        format!("duplicate slot `{}`", m.name),
                    );
                }
                if !(m.gmd > 0.0) {
                    d.error(
                        "E-AERO-REP",
                        path.clone(),
                        "geometric mean diameter must be > 0".into(),
                    );
                }
                if !(m.gsd > 1.0) {
                    d.error(
                        "E-AERO-REP",
                        path.clone(),
                        "geometric standard deviation must be > 1".into(),
                    );
                }
                check_phases(&m.phases, path, d);
            }
            for (i, s) in sections.iter().enumerate() {
                let path = format!("$.aero_rep.sections[{i}]");
                if !names.insert(&s.name) {
                    d.error(
                        "E-DUPLICATE-SLOT",
                        path.clone(),
                        format!("duplicate slot `{}`", s.name),
                    );
                }
                if !(s.mid_diameter > 0.0) {
                    d.error(
                        "E-AERO-REP",
                        path.clone(),
                        "mid diameter must be > 0".into(),
                    );
                }
                check_phases(&s.phases, path, d);
            }
        }
        AeroRepConfig::SingleParticle {
            max_computational_particles,
            phases,
        } => {
            if *max_computational_particles == 0 {
                d.error(
                    "E-AERO-REP",
                    "$.aero_rep".into(),
                    "at least one computational particle is required".into(),
                );
            }
            check_phases(phases, "$.aero_rep.phases".into(), d);
        }
    }
}

fn phase_contains(config: &MechanismConfig, phase: &str, species: &str) -> bool {
    config
        .phase(phase)
        .is_some_and(|p| p.species.iter().any(|s| s == species))
}

fn validate_parameter(
    config: &MechanismConfig,
    p: &ParameterConfig,
    path: &str,
    d: &mut Diagnostics,
) {
    if config.phase(&p.phase).is_none() {
        d.error(
            "E-UNKNOWN-PHASE",
            format!("{path}.aerosol_phase"),
            format!("undeclared aerosol phase `{}`", p.phase),
        );
        return;
    }
    if !phase_contains(config, &p.phase, &p.water_species) {
        d.error(
            "E-UNKNOWN-SPECIES",
            format!("{path}.aerosol_phase_water"),
            format!(
                "water species `{}` is not in phase `{}`",
                p.water_species, p.phase
            ),
        );
    }
    if p.electrolytes.is_empty() {
        d.error(
            "E-ZSR",
            format!("{path}.electrolytes"),
            "ZSR parameter needs at least one electrolyte".into(),
        );
    }
    for (i, e) in p.electrolytes.iter().enumerate() {
        let ep = format!("{path}.electrolytes[{i}]");
        if !phase_contains(config, &p.phase, &e.species) {
            d.error(
                "E-UNKNOWN-SPECIES",
                ep.clone(),
                format!("electrolyte `{}` is not in phase `{}`", e.species, p.phase),
            );
        }
        if e.molality_poly.is_empty() {
            d.error(
                "E-ZSR",
                format!("{ep}.molality_polynomial"),
                "molality polynomial needs at least one coefficient".into(),
            );
        }
        if e.molecular_weight.is_some_and(|mw| !(mw > 0.0)) {
            d.error(
                "E-ZSR",
                ep,
                "electrolyte molecular weight must be > 0".into(),
            );
        }
    }
}

fn validate_process(config: &MechanismConfig, p: &ProcessConfig, path: &str, d: &mut Diagnostics) {
    let t = p.process_type;
    for key in t.required_parameters() {
        if !p.rate_parameters.contains_key(*key) {
            d.error(
                "E-MISSING-PARAMETER",
                format!("{path}.{key}"),
                format!("{t} process is missing required parameter `{key}`"),
            );
        }
    }
    for key in p.rate_parameters.keys() {
        let known = t.required_parameters().contains(&key.as_str())
            || t.optional_parameters().iter().any(|(k, _)| k == key);
        if !known {
            d.error(
                "E-UNKNOWN-PARAMETER",
                format!("{path}.{key}"),
                format!("{t} process does not accept parameter `{key}`"),
            );
        }
    }
    if p.has_param("Ea") && p.has_param("C") {
        d.error(
            "E-CONFLICTING-PARAMETER",
            format!("{path}.C"),
            "give either `Ea` or `C`, not both".into(),
        );
    }
    if p.has_param("D") && !(p.param("D") > 0.0) {
        d.error(
            "E-PARAMETER-RANGE",
            format!("{path}.D"),
            "D must be > 0".into(),
        );
    }
    if t == ProcessType::WennbergNoRo2 {
        let a0 = p.param("a0");
        if !(a0 > 0.0 && a0 <= 1.0) {
            d.error(
                "E-PARAMETER-RANGE",
                format!("{path}.a0"),
                "a0 must lie in (0, 1]".into(),
            );
        }
    }
    for key in ["rate", "rate_constant", "k_reverse"] {
        if p.has_param(key) && p.param(key) < 0.0 {
            d.error(
                "E-PARAMETER-RANGE",
                format!("{path}.{key}"),
                format!("`{key}` must be non-negative"),
            );
        }
    }

    let require_species = |kind: SpeciesKind, name: &str, field: String, d: &mut Diagnostics| {
        if config.species(kind, name).is_none() {
            d.error(
                "E-UNKNOWN-SPECIES",
                field,
                format!(
                    "{t} process references undeclared {} species `{name}`",
                    kind.as_str()
                ),
            );
        }
    };

    match t.shape() {
        ProcessShape::GasReaction => {
            if p.reactants.is_empty() {
                d.error(
                    "E-NO-REACTANTS",
                    format!("{path}.reactants"),
                    format!("{t} process needs at least one reactant"),
                );
            }
            if p.phase.is_some() {
                d.error(
                    "E-PHASE",
                    format!("{path}.aerosol_phase"),
                    format!("{t} is a gas-phase process"),
                );
            }
            for name in p.reactants.keys() {
                require_species(
                    SpeciesKind::Gas,
                    name,
                    format!("{path}.reactants.{name}"),
                    d,
                );
            }
            for (key, set) in [
                ("products", &p.products),
                ("nitrate_products", &p.nitrate_products),
            ] {
                for (name, prod) in set {
                    require_species(SpeciesKind::Gas, name, format!("{path}.{key}.{name}"), d);
                    if !(prod.yield_ >= 0.0) {
                        d.error(
                            "E-STOICHIOMETRY",
                            format!("{path}.{key}.{name}"),
                            "yields must be non-negative".into(),
                        );
                    }
                }
            }
            let any_mass = p
                .products
                .values()
                .chain(p.nitrate_products.values())
                .any(|x| x.mass_yield);
            if any_mass {
                match &p.mass_basis {
                    Some(b) if p.reactants.contains_key(b) => {}
                    _ => d.error(
                        "E-MASS-BASIS",
                        format!("{path}.mass_basis"),
                        "mass yields need `mass_basis` naming one of the reactants".into(),
                    ),
                }
            }
        }
        ProcessShape::GasSource => match &p.species {
            Some(s) => require_species(SpeciesKind::Gas, s, format!("{path}.species"), d),
            None => d.error(
                "E-MISSING-FIELD",
                format!("{path}.species"),
                format!("{t} process needs a target `species`"),
            ),
        },
        ProcessShape::Condensed => {
            let Some(phase) = &p.phase else {
                d.error(
                    "E-MISSING-FIELD",
                    format!("{path}.aerosol_phase"),
                    format!("{t} process needs an `aerosol_phase`"),
                );
                return;
            };
            if config.phase(phase).is_none() {
                d.error(
                    "E-UNKNOWN-PHASE",
                    format!("{path}.aerosol_phase"),
                    format!("undeclared aerosol phase `{phase}`"),
                );
                return;
            }
            if p.reactants.is_empty() {
                d.error(
                    "E-NO-REACTANTS",
                    format!("{path}.reactants"),
                    format!("{t} process needs at least one reactant"),
                );
            }
            for name in p.reactants.keys().chain(p.products.keys()) {
                if !phase_contains(config, phase, name) {
                    d.error(
                        "E-UNKNOWN-SPECIES",
                        format!("{path}.{name}"),
                        format!("species `{name}` is not in phase `{phase}`"),
                    );
                }
            }
            for (name, prod) in &p.products {
                let integral = prod.yield_ >= 1.0 && prod.yield_.fract() == 0.0;
                if prod.mass_yield
                    || !(prod.yield_ >= 0.0)
                    || (t == ProcessType::AqueousReversible && !integral)
                {
                    d.error(
                        "E-STOICHIOMETRY",
                        format!("{path}.products.{name}"),
                        "condensed-phase yields must be non-negative molar yields (positive integers for reversible reactions)".into(),
                    );
                }
            }
            let molar = t == ProcessType::AqueousReversible
                || p.units.unwrap_or(CondensedUnits::Molar) == CondensedUnits::Molar;
            if molar {
                match &p.water_species {
                    Some(w) if phase_contains(config, phase, w) => {}
                    _ => d.error(
                        "E-MISSING-FIELD",
                        format!("{path}.aerosol_phase_water"),
                        format!("{t} process in molar units needs `aerosol_phase_water` in phase `{phase}`"),
                    ),
                }
            }
        }
        ProcessShape::PhaseTransfer => {
            match &p.gas_species {
                Some(g) => {
                    require_species(SpeciesKind::Gas, g, format!("{path}.gas_species"), d);
                    if let Some(s) = config.species(SpeciesKind::Gas, g) {
                        if s.diffusion_coeff.is_none() {
                            d.error(
                                "E-MISSING-FIELD",
                                format!("{path}.gas_species"),
                                format!(
                                    "gas species `{g}` needs `diffusion_coeff` for phase transfer"
                                ),
                            );
                        }
                    }
                }
                None => d.error(
                    "E-MISSING-FIELD",
                    format!("{path}.gas_species"),
                    format!("{t} process needs `gas_species`"),
                ),
            }
            let Some(phase) = &p.phase else {
                d.error(
                    "E-MISSING-FIELD",
                    format!("{path}.aerosol_phase"),
                    format!("{t} process needs an `aerosol_phase`"),
                );
                return;
            };
            if config.phase(phase).is_none() {
                d.error(
                    "E-UNKNOWN-PHASE",
                    format!("{path}.aerosol_phase"),
                    format!("undeclared aerosol phase `{phase}`"),
                );
                return;
            }
            match &p.aerosol_species {
                Some(a) if phase_contains(config, phase, a) => {}
                _ => d.error(
                    "E-UNKNOWN-SPECIES",
                    format!("{path}.aerosol_species"),
                    format!("{t} process needs an `aerosol_species` in phase `{phase}`"),
                ),
            }
            if t == ProcessType::HenrysLawPhaseTransfer {
                match &p.water_species {
                    Some(w) if phase_contains(config, phase, w) => {}
                    _ => d.error(
                        "E-MISSING-FIELD",
                        format!("{path}.aerosol_phase_water"),
                        format!(
                            "Henry's law transfer needs `aerosol_phase_water` in phase `{phase}`"
                        ),
                    ),
                }
            }
        }
    }
}
