use std::path::PathBuf;

use netclear_cli::scenario::{load_scenario, network_scenario, parse_scenario, LoadError, Model};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

const TINY: &str = r#"{
  "version": 1,
  "kind": "network",
  "firms": ["s", "b"],
  "trades": [{ "id": "t", "seller": "s", "buyer": "b" }],
  "utilities": {
    "s": [{ "bundle": [], "expr": "0" }, { "bundle": ["t"], "expr": "p[t] - 1" }],
    "b": [{ "bundle": [], "expr": "0" }, { "bundle": ["t"], "expr": "3 - p[t]" }]
  }
}"#;

#[test]
fn every_shipped_scenario_loads() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 7);
}

#[test]
fn star_scenario_has_four_trades() {
    let l = load_scenario(&scenario_path("star_intermediary.json")).unwrap();
    let net = l.profile.network();
    assert_eq!(net.num_trades(), 4);
    assert_eq!(net.num_firms(), 5);
    assert_eq!(l.scenario.analysis.focus.as_deref(), Some("f"));
}

#[test]
fn defaults_fill_missing_analysis() {
    let l = parse_scenario(TINY).unwrap();
    let a = &l.scenario.analysis;
    assert_eq!(a.bounds, [-1.0, 3.0]);
    assert_eq!(a.step, 0.25);
    assert_eq!(a.focus, None);
}

#[test]
fn empty_trade_list_is_valid() {
    let text = r#"{ "version": 1, "kind": "network", "firms": ["a"], "trades": [], "utilities": {} }"#;
    let l = parse_scenario(text).unwrap();
    assert_eq!(l.profile.network().num_trades(), 0);
}

#[test]
fn misspelled_firm_names_the_trade() {
    let text = TINY.replace(r#""seller": "s""#, r#""seller": "ss""#);
    match parse_scenario(&text) {
        Err(LoadError::Validation { path, msg }) => {
            assert_eq!(path, "trades[0].seller");
            assert!(msg.contains("`t`") && msg.contains("`ss`"), "{msg}");
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn unknown_trade_in_bundle_is_rejected() {
    let text = TINY.replace(r#"{ "bundle": ["t"], "expr": "3 - p[t]" }"#, r#"{ "bundle": ["u"], "expr": "3" }"#);
    assert!(matches!(parse_scenario(&text), Err(LoadError::Validation { path, .. }) if path == "utilities.b[1].bundle"));
}

#[test]
fn bad_expression_is_a_validation_error() {
    let text = TINY.replace("3 - p[t]", "3 - q[t]");
    assert!(matches!(parse_scenario(&text), Err(LoadError::Validation { path, .. }) if path == "utilities.b"));
}

#[test]
fn version_mismatch_is_reported() {
    let text = TINY.replace(r#""version": 1"#, r#""version": 2"#);
    match parse_scenario(&text) {
        Err(LoadError::SchemaVersionMismatch { expected, found }) => {
            assert_eq!(expected, 1);
            assert_eq!(found, "2");
        }
        other => panic!("expected a version mismatch, got {other:?}"),
    }
    let missing = TINY.replace(r#""version": 1,"#, "");
    assert!(matches!(parse_scenario(&missing), Err(LoadError::SchemaVersionMismatch { .. })));
}

#[test]
fn parse_errors_carry_line_and_column() {
    let text = "{\n  \"version\": 1,\n  \"kind\": \"network\",,\n}";
    match parse_scenario(text) {
        Err(LoadError::Parse { line, column, .. }) => {
            assert_eq!(line, 3);
            assert_eq!(column, 21);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn bad_analysis_is_rejected() {
    let text = TINY.replacen('{', r#"{ "analysis": { "step": 0 },"#, 1);
    assert!(matches!(parse_scenario(&text), Err(LoadError::Validation { path, .. }) if path == "analysis.step"));
    let text = TINY.replacen('{', r#"{ "analysis": { "focus": "nobody" },"#, 1);
    assert!(matches!(parse_scenario(&text), Err(LoadError::Validation { path, .. }) if path == "analysis.focus"));
}

#[test]
fn load_serialize_load_round_trip() {
    for name in ["star_intermediary.json", "logistic_bundle_buyer.json", "piecewise_pair_market.json", "hospital_matching.json"] {
        let first = load_scenario(&scenario_path(name)).unwrap();
        let text = serde_json::to_string(&first.scenario).unwrap();
        let second = parse_scenario(&text).unwrap();
        assert_eq!(first.scenario, second.scenario, "{name}");
    }
}

#[test]
fn rendered_network_reproduces_utilities() {
    let first = load_scenario(&scenario_path("star_intermediary.json")).unwrap();
    let rendered = network_scenario(&first.profile, &first.scenario.analysis);
    assert!(matches!(rendered.model, Model::Network(_)));
    let second = parse_scenario(&serde_json::to_string(&rendered).unwrap()).unwrap();
    let points = [[0.0, 0.0, 2.0, 2.0], [1.0, 1.0, 1.0, 1.0], [-0.5, 0.75, 2.5, 0.25]];
    for (u, v) in first.profile.firms().iter().zip(second.profile.firms()) {
        for p in &points {
            let (a, b) = (netclear_core::demand::demand_set(u, p, 1e-9), netclear_core::demand::demand_set(v, p, 1e-9));
            assert_eq!(a.bundles, b.bundles);
            assert!((a.indirect - b.indirect).abs() < 1e-12);
        }
    }
}

#[test]
fn matching_and_exchange_scenarios_induce_networks() {
    let m = load_scenario(&scenario_path("hospital_matching.json")).unwrap();
    assert_eq!(m.profile.network().trade_id(0), "d1@h1");
    assert!(m.exchange.is_none());
    let e = load_scenario(&scenario_path("object_exchange.json")).unwrap();
    let ids: Vec<&str> = (0..e.profile.network().num_trades()).map(|t| e.profile.network().trade_id(t)).collect();
    assert_eq!(ids, ["x>b", "x>c", "y>a", "y>c"]);
    assert!(e.exchange.is_some());
}
