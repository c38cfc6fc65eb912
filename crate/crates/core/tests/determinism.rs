mod common;

use common::{fixture, snapshot};
use mmray::scenario::{RunOptions, ScenarioConfig, Simulator};

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::from_file(fixture("square_scenario.json")).unwrap();
    let mut snaps = Vec::new();
    for (name, threads) in [("one", Some(1)), ("two", Some(1)), ("many", Some(3))] {
        let sim = Simulator::new(cfg.clone()).unwrap();
        let out = dir.path().join(name);
        let opts = RunOptions {
            threads,
            ..Default::default()
        };
        sim.run(&out, &opts).unwrap();
        snaps.push(snapshot(&out, &["report.json"]));
    }
    assert!(snaps[0].len() > 80);
    assert_eq!(snaps[0], snaps[1]);
    assert_eq!(snaps[0], snaps[2], "worker count must not change outputs");
}
