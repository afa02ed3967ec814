use std::path::PathBuf;

use dse_core::scenario::{default_paper_scenario, load_scenario, parse_scenario, scenario_to_toml};

fn shipped() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default_paper.toml")
}

#[test]
fn shipped_file_is_the_default_scenario() {
    assert_eq!(load_scenario(&shipped()).unwrap(), default_paper_scenario());
}

#[test]
fn serialized_default_parses_back() {
    let s = default_paper_scenario();
    assert_eq!(parse_scenario(&scenario_to_toml(&s)).unwrap(), s);
}
