#![allow(dead_code)]

use std::path::PathBuf;

use mpchem::boxmodel::Scenario;
use mpchem::config::{self, parse_config, MechanismConfig};
use mpchem::core::{Core, CoreOptions};

pub fn doc(entries: &str) -> String {
    format!(r#"{{"camp-data": [{entries}]}}"#)
}

pub fn config_from(entries: &str) -> MechanismConfig {
    let text = doc(entries);
    parse_config([("test.json", text.as_str())]).unwrap()
}

pub fn core_from(entries: &str, opts: CoreOptions) -> Core {
    Core::from_config(config_from(entries), opts).unwrap()
}

pub fn demo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/isoprene_soa")
}

pub fn demo_config_paths() -> Vec<PathBuf> {
    ["species.json", "gas_chemistry.json", "isoprene_soa.json"]
        .iter()
        .map(|f| demo_dir().join(f))
        .collect()
}

pub fn demo_config() -> MechanismConfig {
    config::load_config_files(&demo_config_paths()).unwrap()
}

pub fn demo_scenario() -> Scenario {
    Scenario::load(&demo_dir().join("scenario.json")).unwrap()
}

/// Largest relative difference between two values, guarded against zero.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}
