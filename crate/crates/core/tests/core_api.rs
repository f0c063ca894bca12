use mpchem::config::parse_config;
use mpchem::core::{Core, CoreError, CoreOptions};
use mpchem::state::EnvironmentalState;

fn core_from(entries: &str) -> Core {
    let text = format!(r#"{{"camp-data": [{entries}]}}"#);
    let cfg = parse_config([("test.json", text.as_str())]).unwrap();
    Core::from_config(cfg, CoreOptions::default()).unwrap()
}

const AB: &str = r#"
    {"type": "SPECIES", "name": "A", "kind": "gas", "molecular_weight": 0.05},
    {"type": "SPECIES", "name": "B", "kind": "gas", "molecular_weight": 0.05}"#;

fn env() -> EnvironmentalState {
    EnvironmentalState::new(290.0, 1.0e5)
}

#[test]
fn single_emission_forcing() {
    let mut core = core_from(&format!(
        r#"{AB}, {{"type": "EMISSION", "label": "emit A", "species": "A"}}"#
    ));
    core.set_environment(env()).unwrap();
    let h = core.get_rate_handle("emit A").unwrap();
    core.set_rate(&h, 2.5e-3).unwrap();
    let f = core.compute_forcing(&[1.0, 3.0]).unwrap();
    assert_eq!(f, vec![2.5e-3, 0.0]);
}

#[test]
fn duplicated_reaction_doubles_forcing() {
    let rxn = r#"{"type": "ARRHENIUS", "reactants": {"A": {"qty": 2}}, "products": {"B": {}}, "A": 1.0e-12}"#;
    let mut one = core_from(&format!("{AB}, {rxn}"));
    let mut two = core_from(&format!("{AB}, {rxn}, {rxn}"));
    one.set_environment(env()).unwrap();
    two.set_environment(env()).unwrap();
    let y = [40.0, 1.0];
    let f1 = one.compute_forcing(&y).unwrap();
    let f2 = two.compute_forcing(&y).unwrap();
    for (a, b) in f1.iter().zip(&f2) {
        assert_eq!(2.0 * a, *b);
    }
    let j1 = one.compute_jacobian(&y).unwrap().to_dense();
    let j2 = two.compute_jacobian(&y).unwrap().to_dense();
    for (r1, r2) in j1.iter().zip(&j2) {
        for (a, b) in r1.iter().zip(r2) {
            assert_eq!(2.0 * a, *b);
        }
    }
    assert_eq!(one.nnz(), two.nnz());
}

#[test]
fn rate_handles() {
    let mut core = core_from(&format!(
        r#"{AB},
        {{"type": "FIRST_ORDER_LOSS", "label": "dep", "species": "A"}},
        {{"type": "ARRHENIUS", "label": "rxn", "reactants": {{"A": {{}}}}, "products": {{"B": {{}}}}, "A": 1.0e-3}}"#
    ));
    assert!(matches!(
        core.get_rate_handle("nope"),
        Err(CoreError::Process(_))
    ));
    assert!(matches!(
        core.get_rate_handle("rxn"),
        Err(CoreError::Process(_))
    ));
    let h1 = core.get_rate_handle("dep").unwrap();
    let h2 = core.get_rate_handle("dep").unwrap();
    let nnz = core.nnz();
    core.set_rate(&h1, 0.5).unwrap();
    assert_eq!(core.rate(&h2), Some(0.5));
    assert_eq!(core.nnz(), nnz);
    assert!(core.set_rate(&h1, -1.0).is_err());
}

#[test]
fn first_order_loss_solve() {
    let mut core = core_from(&format!(
        r#"{AB}, {{"type": "FIRST_ORDER_LOSS", "label": "dep", "species": "A"}}"#
    ));
    core.solver_options_mut().rel_tol = 1e-8;
    let h = core.get_rate_handle("dep").unwrap();
    core.set_rate(&h, 1.0e-3).unwrap();
    let mut y = vec![10.0, 0.0];
    core.solve(&mut y, &env(), 1000.0).unwrap();
    let exact = 10.0 * (-1.0f64).exp();
    assert!((y[0] - exact).abs() / exact < 1e-6, "{} vs {exact}", y[0]);
}

#[test]
fn zero_rates_leave_state_unchanged() {
    let mut core = core_from(&format!(
        r#"{AB}, {{"type": "EMISSION", "label": "e", "species": "A"}}"#
    ));
    let mut y = vec![1.5, 2.5];
    let stats = core.solve(&mut y, &env(), 3600.0).unwrap();
    assert_eq!(y, vec![1.5, 2.5]);
    assert_eq!(stats.steps, 1);
}

#[test]
fn bad_time_step_and_state_length() {
    let mut core = core_from(AB);
    let mut y = vec![1.0, 1.0];
    assert!(matches!(
        core.solve(&mut y, &env(), 0.0),
        Err(CoreError::TimeStep(_))
    ));
    let mut short = vec![1.0];
    assert!(matches!(
        core.solve(&mut short, &env(), 1.0),
        Err(CoreError::StateLength { .. })
    ));
}

#[test]
fn empty_config_is_rejected() {
    let cfg = parse_config([("e.json", r#"{"camp-data": []}"#)]).unwrap();
    assert!(matches!(
        Core::from_config(cfg, CoreOptions::default()),
        Err(CoreError::Invalid(_))
    ));
}

#[test]
fn environment_cache_round_trip() {
    let rxn = r#"{"type": "ARRHENIUS", "reactants": {"A": {}}, "products": {"B": {}}, "A": 1.0e-3, "C": -500.0}"#;
    let mut core = core_from(&format!("{AB}, {rxn}"));
    let y = [1.0, 0.0];
    core.set_environment(env()).unwrap();
    let fa = core.compute_forcing(&y).unwrap();
    core.set_environment(EnvironmentalState::new(310.0, 1.0e5))
        .unwrap();
    let fb = core.compute_forcing(&y).unwrap();
    core.set_environment(env()).unwrap();
    let fa2 = core.compute_forcing(&y).unwrap();
    assert_ne!(fa, fb);
    assert_eq!(fa, fa2);
}

#[test]
fn invalid_environment_rejected() {
    let mut core = core_from(AB);
    assert!(core
        .set_environment(EnvironmentalState::new(-1.0, 1.0e5))
        .is_err());
}
