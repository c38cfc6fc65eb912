//! The JSON files under `fixtures/` are generated from `mmray::fixtures`.
//! Set `MMRAY_BLESS=1` to rewrite them.

use std::path::PathBuf;

use mmray::fixtures::{square_building, square_scenario, urban_map, urban_scenario};

fn check(name: &str, text: String) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    if std::env::var_os("MMRAY_BLESS").is_some() {
        std::fs::write(&path, text + "\n").unwrap();
        return;
    }
    let bundled = std::fs::read_to_string(&path).unwrap();
    assert_eq!(bundled.trim_end(), text, "{name} is stale; rerun with MMRAY_BLESS=1");
}

#[test]
fn square_fixtures_match_generators() {
    check("square.json", square_building().to_json_string());
    check("square_scenario.json", square_scenario("square.json").to_json_string());
}

#[test]
fn urban_fixtures_match_generators() {
    check("urban_map.json", urban_map().to_json_string());
    check("urban_scenario.json", urban_scenario("urban_map.json").to_json_string());
}
