//! Shared setup for the benchmarks: the bundled demo mechanism and scenario.

use std::path::PathBuf;

use mpchem::boxmodel::{prepare, PreparedRun, Representation, RunOptions, Scenario};
use mpchem::config::load_config_files;

pub fn demo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/isoprene_soa")
}

/// Demo scenario prepared for one representation. `n_particles` only
/// matters for the particle representation.
pub fn demo_run(representation: Representation, n_particles: usize) -> PreparedRun {
    let dir = demo_dir();
    let paths: Vec<PathBuf> = ["species.json", "gas_chemistry.json", "isoprene_soa.json"]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    let cfg = load_config_files(&paths).expect("demo configuration");
    let scenario = Scenario::load(&dir.join("scenario.json")).expect("demo scenario");
    let opts = RunOptions {
        n_particles: Some(n_particles),
        ..RunOptions::default()
    };
    prepare(&cfg, &scenario, representation, &opts).expect("demo run")
}
