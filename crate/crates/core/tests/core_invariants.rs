mod common;

use common::{demo_config, demo_dir, demo_scenario};
use mpchem::boxmodel::{prepare, Representation, RunOptions};
use mpchem::config::load_config_files;
use mpchem::core::{Core, CoreError, CoreOptions};
use mpchem::state::{deserialize_state, serialize_state, EnvironmentalState};

fn demo_core() -> Core {
    Core::from_config(demo_config(), CoreOptions::default()).unwrap()
}

#[test]
fn corrupted_core_header_is_rejected() {
    let mut core = demo_core();
    core.set_environment(EnvironmentalState::new(290.0, 1.0e5))
        .unwrap();
    let good = core.serialize_core();
    assert!(Core::deserialize_core(&good).is_ok());

    let mut bad_magic = good.clone();
    bad_magic[0] ^= 0xff;
    assert!(matches!(
        Core::deserialize_core(&bad_magic),
        Err(CoreError::Format(_))
    ));

    let mut bad_version = good.clone();
    bad_version[4] = bad_version[4].wrapping_add(1);
    assert!(matches!(
        Core::deserialize_core(&bad_version),
        Err(CoreError::Version { .. })
    ));

    assert!(Core::deserialize_core(&good[..good.len() - 1]).is_err());
    assert!(Core::deserialize_core(&good[..10]).is_err());
    let mut garbage = good.clone();
    let mid = 16 + (good.len() - 16) / 2;
    garbage[mid] = b'\x01';
    assert!(Core::deserialize_core(&garbage).is_err());
}

#[test]
fn demo_layout_is_deterministic() {
    let a = demo_core();
    let b = demo_core();
    assert_eq!(a.n_total(), b.n_total());
    assert_eq!(a.nnz(), b.nnz());
    assert_eq!(a.jacobian_pattern(), b.jacobian_pattern());
    assert_eq!(a.layout().gas_names(), b.layout().gas_names());
    // File order does not matter.
    let mut paths = common::demo_config_paths();
    paths.reverse();
    let c = Core::from_config(load_config_files(&paths).unwrap(), CoreOptions::default()).unwrap();
    assert_eq!(a.n_total(), c.n_total());
    assert_eq!(a.nnz(), c.nnz());
    assert_eq!(a.layout().gas_names(), c.layout().gas_names());
}

#[test]
fn set_rate_keeps_the_jacobian_pattern() {
    let mut core = demo_core();
    core.set_environment(EnvironmentalState::new(290.0, 1.0e5))
        .unwrap();
    let before = core.jacobian_pattern().clone();
    let y = vec![1.0e-3; core.n_total()];
    let j0 = core.compute_jacobian(&y).unwrap();
    for label in ["j NO2", "j O3", "emit ISOP"] {
        let Ok(h) = core.get_rate_handle(label) else {
            continue;
        };
        core.set_rate(&h, 0.0).unwrap();
        core.set_rate(&h, 3.7).unwrap();
    }
    let j1 = core.compute_jacobian(&y).unwrap();
    assert_eq!(&before, core.jacobian_pattern());
    assert_eq!(j0.pattern(), j1.pattern());
}

#[test]
fn gas_only_trajectories_do_not_depend_on_representation() {
    // Species and gas chemistry only: the organic phase exists but nothing
    // touches it.
    let dir = demo_dir();
    let cfg =
        load_config_files(&[dir.join("species.json"), dir.join("gas_chemistry.json")]).unwrap();
    let mut sc = demo_scenario();
    sc.duration = 3.0 * 3600.0;
    sc.output_interval = 1800.0;
    let opts = RunOptions {
        n_particles: Some(60),
        ..RunOptions::default()
    };
    let runs: Vec<_> = Representation::ALL
        .iter()
        .map(|&r| prepare(&cfg, &sc, r, &opts).unwrap())
        .map(|p| {
            let n_gas = p.core.layout().n_gas();
            let out = p.run().unwrap();
            let gas: Vec<Vec<f64>> = out.rows.iter().map(|r| r[..=n_gas].to_vec()).collect();
            gas
        })
        .collect();
    for other in &runs[1..] {
        assert_eq!(runs[0].len(), other.len());
        for (a, b) in runs[0].iter().zip(other) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits(), "{x} vs {y}");
            }
        }
    }
}

#[test]
fn state_buffer_matches_golden_bytes() {
    let golden = hex::decode(include_str!("fixtures/state_v1.hex").trim()).unwrap();
    let values = [0.0, 1.5, -2.25, 1e-30, 6.02214076e23];
    let env = EnvironmentalState::new(290.0, 1.0e5).with_relative_humidity(0.5);
    assert_eq!(serialize_state(&values, &env), golden);
    let (v, e) = deserialize_state(&golden).unwrap();
    assert_eq!(v, values);
    assert_eq!(e, env);
    assert!(deserialize_state(&golden[..golden.len() - 8]).is_err());
}

#[test]
fn core_round_trip_gives_identical_forcing_and_jacobian() {
    let mut core = demo_core();
    core.set_environment(EnvironmentalState::new(283.0, 9.5e4).with_relative_humidity(0.6))
        .unwrap();
    let h = core.get_rate_handle("j NO2").unwrap();
    core.set_rate(&h, 7.5e-3).unwrap();
    let mut copy = Core::deserialize_core(&core.serialize_core()).unwrap();
    let y: Vec<f64> = (0..core.n_total())
        .map(|i| 1.0e-4 * (1.0 + (i as f64).sin()))
        .collect();
    assert_eq!(
        core.compute_forcing(&y).unwrap(),
        copy.compute_forcing(&y).unwrap()
    );
    assert_eq!(
        core.compute_jacobian(&y).unwrap().values(),
        copy.compute_jacobian(&y).unwrap().values()
    );
}
