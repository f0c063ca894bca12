mod common;

use std::collections::BTreeMap;

use common::{demo_config, demo_dir, demo_scenario, rel_diff};
use mpchem::boxmodel::{
    default_bin_range, discretize_modes_to_bins, mechanism_hash, plot_table, prepare, read_csv,
    run_scenario, sample_particles, Mode, Representation, RunOptions,
};
use mpchem::config::parse_config;

fn poa_density(cfg: &mpchem::config::MechanismConfig) -> impl Fn(&str) -> f64 + '_ {
    |s| {
        cfg.species(mpchem::config::SpeciesKind::Aerosol, s)
            .and_then(|d| d.density)
            .unwrap()
    }
}

#[test]
fn default_bin_edges_follow_three_sigma_rule() {
    let sc = demo_scenario();
    let (lo, hi) = default_bin_range(&sc.modes).unwrap();
    assert!(rel_diff(lo, 6.56e-9) < 1e-3, "{lo}");
    assert!(rel_diff(hi, 2.49e-5) < 1e-3, "{hi}");
}

#[test]
fn bins_conserve_each_mode_mass() {
    let cfg = demo_config();
    let density = poa_density(&cfg);
    let sc = demo_scenario();
    let (lo, hi) = default_bin_range(&sc.modes).unwrap();
    for m in &sc.modes {
        let binned =
            discretize_modes_to_bins(std::slice::from_ref(m), 8, lo, hi, &density).unwrap();
        let modal = m.volume_concentration() * m.density(&density);
        assert!(rel_diff(binned.total("POA"), modal) < 1e-6, "{}", m.name);
        assert_eq!(binned.edges.len(), 9);
        let ratios: Vec<f64> = binned.edges.windows(2).map(|w| w[1] / w[0]).collect();
        assert!(ratios.iter().all(|r| rel_diff(*r, ratios[0]) < 1e-12));
    }
}

fn mixture_log_moments(modes: &[Mode]) -> (f64, f64) {
    let n: f64 = modes.iter().map(|m| m.number).sum();
    let mean: f64 = modes.iter().map(|m| m.number / n * m.gmd.ln()).sum();
    let second: f64 = modes
        .iter()
        .map(|m| m.number / n * (m.gsd.ln().powi(2) + m.gmd.ln().powi(2)))
        .sum();
    (mean, second - mean * mean)
}

#[test]
fn sampled_log_diameters_match_mixture_mean() {
    let cfg = demo_config();
    let density = poa_density(&cfg);
    let sc = demo_scenario();
    let n = 10_000;
    let (mu, var) = mixture_log_moments(&sc.modes);
    let se = (var / n as f64).sqrt();
    for seed in [1, 2, 3] {
        let parts = sample_particles(&sc.modes, n, seed, &density).unwrap();
        assert_eq!(parts.len(), n);
        let mean = parts.iter().map(|p| p.diameter.ln()).sum::<f64>() / n as f64;
        assert!(
            (mean - mu).abs() < 3.0 * se,
            "seed {seed}: {mean} vs {mu} (se {se})"
        );
        let n_total: f64 = sc.modes.iter().map(|m| m.number).sum();
        assert!(parts
            .iter()
            .all(|p| rel_diff(p.weight, n_total / n as f64) < 1e-14));
    }
}

#[test]
fn narrow_mode_gives_diameters_at_gmd() {
    let m = Mode {
        name: "narrow".into(),
        number: 1.0e9,
        gmd: 1.0e-7,
        gsd: 1.0001,
        composition: [("POA".to_string(), 1.0)].into(),
    };
    let parts = sample_particles(&[m], 500, 9, &|_| 1000.0).unwrap();
    assert!(parts.iter().all(|p| rel_diff(p.diameter, 1.0e-7) < 1e-3));
}

#[test]
fn sampling_is_deterministic_under_seed() {
    let sc = demo_scenario();
    let a = sample_particles(&sc.modes, 300, 42, &|_| 1400.0).unwrap();
    let b = sample_particles(&sc.modes, 300, 42, &|_| 1400.0).unwrap();
    let c = sample_particles(&sc.modes, 300, 43, &|_| 1400.0).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn zero_duration_writes_only_the_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = demo_scenario();
    sc.duration = 0.0;
    let scenario_path = dir.path().join("scenario.json");
    std::fs::write(&scenario_path, serde_json::to_string(&sc).unwrap()).unwrap();
    let out = dir.path().join("out.csv");
    let result = run_scenario(
        &common::demo_config_paths(),
        &scenario_path,
        &out,
        Representation::Modes,
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(result.rows.len(), 1);
    let table = read_csv(&out).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0][0], 0.0);
}

#[test]
fn full_day_has_one_row_per_interval_and_hash_ignores_representation() {
    let cfg = demo_config();
    let sc = demo_scenario();
    let mut hashes = Vec::new();
    for rep in [Representation::Modes, Representation::Bins] {
        let run = prepare(&cfg, &sc, rep, &RunOptions::default()).unwrap();
        hashes.push(run.mechanism_hash.clone());
        let out = run.run().unwrap();
        assert_eq!(out.rows.len(), 24 * 3600 / 600 + 1);
        assert_eq!(out.rows.last().unwrap()[0], 86400.0);
    }
    let run = prepare(
        &cfg,
        &sc,
        Representation::Particles,
        &RunOptions {
            n_particles: Some(30),
            ..RunOptions::default()
        },
    )
    .unwrap();
    hashes.push(run.mechanism_hash.clone());
    assert!(hashes
        .iter()
        .all(|h| *h == hashes[0] && *h == mechanism_hash(&cfg)));
    assert_eq!(hashes[0].len(), 64);
}

#[test]
fn inert_tracer_is_conserved_without_emissions() {
    let dir = demo_dir();
    let mut files: Vec<(String, String)> =
        ["species.json", "gas_chemistry.json", "isoprene_soa.json"]
            .iter()
            .map(|f| (f.to_string(), std::fs::read_to_string(dir.join(f)).unwrap()))
            .collect();
    files.push((
        "tracer.json".into(),
        common::doc(
            r#"{"type": "SPECIES", "name": "TRACER", "kind": "gas", "molecular_weight": 0.146}"#,
        ),
    ));
    let cfg = parse_config(files.iter().map(|(n, t)| (n.as_str(), t.as_str()))).unwrap();
    let mut sc = demo_scenario();
    sc.gas_emissions_mol_m3_s = BTreeMap::new();
    sc.gas_initial_ppb.insert("TRACER".into(), 3.5);
    let out = prepare(&cfg, &sc, Representation::Modes, &RunOptions::default())
        .unwrap()
        .run()
        .unwrap();
    let tracer = out.column("TRACER").unwrap();
    assert_eq!(tracer.len(), 145);
    // Fixed T and P: mixing ratio is proportional to moles.
    assert!(
        tracer.iter().all(|v| rel_diff(*v, 3.5) < 1e-4),
        "{tracer:?}"
    );
}

#[test]
fn plot_data_merges_runs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario_path = dir.path().join("scenario.json");
    let mut sc = demo_scenario();
    sc.duration = 1800.0;
    sc.particles.n_particles = 30;
    std::fs::write(&scenario_path, serde_json::to_string(&sc).unwrap()).unwrap();
    let mut runs = Vec::new();
    for rep in Representation::ALL {
        let out = dir.path().join(format!("{rep}.csv"));
        run_scenario(
            &common::demo_config_paths(),
            &scenario_path,
            &out,
            rep,
            &RunOptions::default(),
        )
        .unwrap();
        runs.push((rep.to_string(), read_csv(&out).unwrap()));
    }
    let single = plot_table(&runs[..1], &["O3".to_string()]).unwrap();
    let data: Vec<&str> = single
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .collect();
    assert_eq!(data.len(), 4);
    assert!(data.iter().all(|l| l.split_whitespace().count() == 2));

    let merged = plot_table(&runs, &["O3".to_string()]).unwrap();
    for rep in Representation::ALL {
        assert!(merged.contains(rep.as_str()));
    }
    assert!(plot_table(&runs, &["NOPE".to_string()]).is_err());
}
