mod common;

use common::oracle_tally;

#[test]
fn fsbr_matches_image_enumeration_on_random_scenes() {
    let t = oracle_tally(200, 50);
    for m in t.misses.iter().take(20) {
        eprintln!("miss: scene {} drop {} seq {:?}", m.0, m.1, m.2);
    }
    eprintln!(
        "oracle {} found {} misses {} extras {} worst length {:e} worst angle {:e}",
        t.oracle,
        t.found,
        t.misses.len(),
        t.extras,
        t.worst_length,
        t.worst_angle
    );
    assert!(t.misses.is_empty());
    assert_eq!(t.extras, 0);
    assert!(t.worst_length < 1e-6);
    assert!(t.worst_angle < 1e-9);
}
