use super::{Interaction, Path2d, PathKind, PropagationPath};
use crate::geometry::DigitalMap;

/// Vertical-plane lift of a horizontal path: the direct profile, plus the
/// variant with a single ground bounce.
pub fn lift_to_3d(path: &Path2d, map: &DigitalMap, bs_height: f64, ue_height: f64) -> Vec<PropagationPath> {
    lift_to_3d_with(path, map, bs_height, ue_height, true)
}

/// Like [`lift_to_3d`]; `with_ground` toggles the ground-bounce variant.
///
/// The horizontal polyline is unfolded to its run `D`. The direct profile
/// is the straight line from `h_BS` to `h_UE` over `D`; the ground variant
/// images the UE below z = 0 and touches ground once. A variant is dropped
/// when any wall interaction lies above the wall top.
pub fn lift_to_3d_with(
    path: &Path2d,
    map: &DigitalMap,
    bs_height: f64,
    ue_height: f64,
    with_ground: bool,
) -> Vec<PropagationPath> {
    let kind = match path.kind {
        PathKind::Los | PathKind::Reflection => path.kind,
        _ => return Vec::new(),
    };
    let n = path.vertices.len();
    let mut runs = Vec::with_capacity(n);
    let mut acc = 0.0;
    runs.push(0.0);
    for w in path.vertices.windows(2) {
        acc += w[0].distance(w[1]);
        runs.push(acc);
    }
    let total = acc;
    let wall_heights: Option<Vec<f64>> = path
        .surfaces
        .iter()
        .map(|&id| map.surface(id).map(|s| s.height))
        .collect();
    let Some(wall_heights) = wall_heights else {
        return Vec::new();
    };
    let walls_clear = |height_at: &dyn Fn(f64) -> f64| {
        wall_heights
            .iter()
            .enumerate()
            .all(|(k, &top)| height_at(runs[k + 1]) <= top)
    };
    let wall_interactions = || path.surfaces.iter().map(|&id| Interaction::Wall(id));

    let mut out = Vec::with_capacity(2);

    if total == 0.0 {
        // BS directly above the UE: only the vertical direct ray exists.
        if kind == PathKind::Los && bs_height != ue_height {
            let v = vec![path.vertices[0].extend(bs_height), path.vertices[0].extend(ue_height)];
            out.push(PropagationPath::new(kind, Vec::new(), v));
        }
        return out;
    }

    let direct = |s: f64| bs_height + (ue_height - bs_height) * s / total;
    if walls_clear(&direct) {
        let vertices = path
            .vertices
            .iter()
            .zip(&runs)
            .map(|(p, &s)| p.extend(direct(s)))
            .collect();
        out.push(PropagationPath::new(kind, wall_interactions().collect(), vertices));
    }

    if with_ground {
        let drop = bs_height + ue_height;
        let mirrored = |s: f64| (bs_height - drop * s / total).abs();
        let touch = total * bs_height / drop;
        // The touch point must fall strictly inside one free segment.
        let seg = (0..n - 1).find(|&k| touch > runs[k] && touch < runs[k + 1]);
        if let Some(k) = seg {
            if walls_clear(&mirrored) {
                let a = path.vertices[k];
                let b = path.vertices[k + 1];
                let frac = (touch - runs[k]) / (runs[k + 1] - runs[k]);
                let ground = (a + (b - a) * frac).extend(0.0);
                let mut vertices = Vec::with_capacity(n + 1);
                let mut interactions = Vec::with_capacity(path.surfaces.len() + 1);
                for (i, (p, &s)) in path.vertices.iter().zip(&runs).enumerate() {
                    if i > 0 && i < n - 1 {
                        interactions.push(Interaction::Wall(path.surfaces[i - 1]));
                    }
                    vertices.push(p.extend(mirrored(s)));
                    if i == k {
                        vertices.push(ground);
                        interactions.push(Interaction::Ground);
                    }
                }
                out.push(PropagationPath::new(kind, interactions, vertices));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{SurfaceId, Vec2};

    fn wall_map(height: f64) -> DigitalMap {
        DigitalMap::from_json_str(&format!(
            r#"{{"bounds":[-10,-200,200,200],"materials":[{{"id":0,"eps":4,"sigma_h":0}}],
                "surfaces":[{{"id":5,"p1":[100,-100],"p2":[100,100],"height":{height},"material":0}}],
                "ground_material":0}}"#
        ))
        .unwrap()
    }

    fn los(d: f64) -> Path2d {
        Path2d {
            kind: PathKind::Los,
            surfaces: vec![],
            vertices: vec![Vec2::new(0.0, 0.0), Vec2::new(d, 0.0)],
        }
    }

    #[test]
    fn los_lift_lengths() {
        let map = wall_map(10.0);
        let lifted = lift_to_3d(&los(100.0), &map, 8.0, 1.5);
        assert_eq!(lifted.len(), 2);
        assert!((lifted[0].length - (100.0f64.powi(2) + 6.5f64.powi(2)).sqrt()).abs() < 1e-9);
        assert!((lifted[0].length - 100.211).abs() < 1e-3);
        assert!(lifted[1].has_ground_bounce());
        assert!((lifted[1].length - (100.0f64.powi(2) + 9.5f64.powi(2)).sqrt()).abs() < 1e-9);
        assert!((lifted[1].length - 100.450).abs() < 1e-3);
        assert_eq!(lifted[1].vertices[1].z, 0.0);
    }

    #[test]
    fn equal_heights_give_flat_direct_profile() {
        let map = wall_map(10.0);
        let lifted = lift_to_3d(&los(50.0), &map, 2.0, 2.0);
        let (_, el_bs) = lifted[0].bs_direction().angles();
        let (_, el_ue) = lifted[0].ue_direction().angles();
        assert_eq!(el_bs, 0.0);
        assert_eq!(el_ue, 0.0);
    }

    #[test]
    fn interaction_above_wall_top_drops_path() {
        // Reflection at x = 100 with the BS at 8 m and UE at 1.5 m, equal legs:
        // interaction height = (8 + 1.5) / 2 = 4.75 m on the direct lift.
        let path = Path2d {
            kind: PathKind::Reflection,
            surfaces: vec![SurfaceId(5)],
            vertices: vec![Vec2::new(0.0, 0.0), Vec2::new(100.0, 50.0), Vec2::new(0.0, 100.0)],
        };
        assert_eq!(lift_to_3d_with(&path, &wall_map(5.0), 8.0, 1.5, false).len(), 1);
        assert!(lift_to_3d_with(&path, &wall_map(4.5), 8.0, 1.5, false).is_empty());
        // Tall interaction against a 3 m wall.
        let high = lift_to_3d_with(&path, &wall_map(3.0), 9.0, 1.4, false);
        assert!(high.is_empty());
    }
}
