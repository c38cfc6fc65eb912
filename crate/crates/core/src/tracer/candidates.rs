use std::f64::consts::PI;

use super::{Interaction, PathKind, PropagationPath};
use crate::geometry::{los_visible, DigitalMap, Vec2, Vec3, Wedge};

/// Wedge angles `(φ', φ)` of source and observer, if the observer lies in
/// the wedge's diffraction region: both points in the exterior and the
/// observer beyond the incident shadow boundary of the source.
pub fn diffraction_region_contains(wedge: &Wedge, source: Vec2, observer: Vec2) -> Option<(f64, f64)> {
    let exterior = wedge.exterior_angle();
    let phi_src = wedge.angle_of(source);
    let phi_obs = wedge.angle_of(observer);
    if phi_src > exterior || phi_obs > exterior {
        return None;
    }
    let shadowed = phi_obs > phi_src + PI || phi_obs < phi_src - PI;
    shadowed.then_some((phi_src, phi_obs))
}

/// Height of a straight BS–UE profile at horizontal fraction `s` of the run.
fn profile_height(bs: Vec3, ue: Vec3, first: f64, second: f64) -> f64 {
    let total = first + second;
    if total == 0.0 {
        return bs.z;
    }
    bs.z + (ue.z - bs.z) * first / total
}

/// First-order wedge diffraction paths: one per wedge whose apex sees both
/// ends and whose shadow region holds the UE.
pub fn collect_diffraction_candidates(map: &DigitalMap, bs: Vec3, ue: Vec3) -> Vec<PropagationPath> {
    let (b, u) = (bs.xy(), ue.xy());
    map.wedges
        .iter()
        .filter(|w| diffraction_region_contains(w, b, u).is_some())
        .filter(|w| los_visible(b, w.apex, map) && los_visible(w.apex, u, map))
        .filter_map(|w| {
            let first = b.distance(w.apex);
            let second = w.apex.distance(u);
            if first <= 0.0 || second <= 0.0 {
                return None;
            }
            let z = profile_height(bs, ue, first, second).min(w.height);
            Some(PropagationPath::new(
                PathKind::Diffraction,
                vec![Interaction::Wedge(w.id)],
                vec![bs, w.apex.extend(z), ue],
            ))
        })
        .collect()
}

/// First-order tree scattering paths: one per tree whose centre sees both ends.
pub fn collect_scattering_candidates(map: &DigitalMap, bs: Vec3, ue: Vec3) -> Vec<PropagationPath> {
    let (b, u) = (bs.xy(), ue.xy());
    map.trees
        .iter()
        .filter(|t| los_visible(b, t.center, map) && los_visible(t.center, u, map))
        .filter_map(|t| {
            let first = b.distance(t.center);
            let second = t.center.distance(u);
            let z = profile_height(bs, ue, first, second).min(0.5 * t.height);
            let centre = t.center.extend(z);
            if bs.distance(centre) <= 1e-6 || centre.distance(ue) <= 1e-6 {
                return None;
            }
            Some(PropagationPath::new(
                PathKind::Scattering,
                vec![Interaction::Tree(t.id)],
                vec![bs, centre, ue],
            ))
        })
        .collect()
}
