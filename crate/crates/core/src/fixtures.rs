//! Built-in test scenes: a square building, random wall soups and a
//! synthetic Manhattan-grid city with a street trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::ArrayConfig;

use crate::geometry::{
    segment_blocked, Bounds, DigitalMap, Material, MaterialId, RetParams, Surface, SurfaceId, Tree, TreeId, Vec2,
};
use crate::scenario::ScenarioConfig;

fn material(id: u32, permittivity: f64, roughness: f64) -> Material {
    Material {
        id: MaterialId(id),
        permittivity,
        roughness,
    }
}

/// One 20 × 20 m building with its corner at the origin, walls wound
/// counter-clockwise.
pub fn square_building() -> DigitalMap {
    let c = [(0.0, 0.0), (20.0, 0.0), (20.0, 20.0), (0.0, 20.0)];
    let surfaces = (0..4)
        .map(|i| Surface {
            id: SurfaceId(i as u32),
            p1: Vec2::new(c[i].0, c[i].1),
            p2: Vec2::new(c[(i + 1) % 4].0, c[(i + 1) % 4].1),
            height: 15.0,
            material: MaterialId(0),
        })
        .collect();
    DigitalMap::new(
        Bounds {
            min: Vec2::new(-50.0, -50.0),
            max: Vec2::new(70.0, 70.0),
        },
        vec![material(0, 5.0, 0.0)],
        surfaces,
        vec![],
        MaterialId(0),
    )
    .expect("fixture is valid")
}

/// Closed square room of side `side` centred on the origin, walls facing inward.
pub fn square_room(side: f64) -> DigitalMap {
    let h = side / 2.0;
    let c = [(-h, -h), (-h, h), (h, h), (h, -h)];
    let surfaces = (0..4)
        .map(|i| Surface {
            id: SurfaceId(i as u32),
            p1: Vec2::new(c[i].0, c[i].1),
            p2: Vec2::new(c[(i + 1) % 4].0, c[(i + 1) % 4].1),
            height: 5.0,
            material: MaterialId(0),
        })
        .collect();
    DigitalMap::new(
        Bounds {
            min: Vec2::new(-h - 1.0, -h - 1.0),
            max: Vec2::new(h + 1.0, h + 1.0),
        },
        vec![material(0, 4.0, 0.0)],
        surfaces,
        vec![],
        MaterialId(0),
    )
    .expect("fixture is valid")
}

/// `count` non-crossing walls, 5–30 m long, inside a `extent`-sized box.
pub fn random_walls(seed: u64, count: usize, extent: f64) -> DigitalMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segments: Vec<(Vec2, Vec2)> = Vec::with_capacity(count);
    while segments.len() < count {
        let a = Vec2::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent));
        let len = rng.gen_range(5.0..30.0);
        let b = a + Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU)) * len;
        let inside = (0.0..=extent).contains(&b.x) && (0.0..=extent).contains(&b.y);
        let clear = segments
            .iter()
            .all(|&(p, q)| !segment_blocked(a, b, [(p, q)]) && p.distance(a).min(q.distance(b)) > 0.5);
        if inside && clear {
            segments.push((a, b));
        }
    }
    let surfaces = segments
        .into_iter()
        .enumerate()
        .map(|(i, (p1, p2))| Surface {
            id: SurfaceId(i as u32),
            p1,
            p2,
            height: 20.0,
            material: MaterialId(0),
        })
        .collect();
    DigitalMap::new(
        Bounds {
            min: Vec2::new(-1.0, -1.0),
            max: Vec2::new(extent + 1.0, extent + 1.0),
        },
        vec![material(0, 4.0, 0.0)],
        surfaces,
        vec![],
        MaterialId(0),
    )
    .expect("random walls are valid")
}

/// A point in `[0, extent]²` at least `clearance` from every wall.
pub fn random_clear_point(rng: &mut impl Rng, map: &DigitalMap, extent: f64, clearance: f64) -> Vec2 {
    loop {
        let p = Vec2::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent));
        let ok = map.surfaces.iter().all(|s| {
            let e = s.p2 - s.p1;
            let t = ((p - s.p1).dot(e) / e.norm_sq()).clamp(0.0, 1.0);
            (s.p1 + e * t).distance(p) > clearance
        });
        if ok {
            return p;
        }
    }
}

/// Street grid pitch of the urban fixture (m).
pub const URBAN_PITCH: f64 = 80.0;
/// Street width of the urban fixture (m).
pub const URBAN_STREET: f64 = 20.0;
const URBAN_BLOCKS: usize = 8;

/// A synthetic Manhattan-grid district: 8 × 8 blocks of four buildings
/// each, 20 m streets on an 80 m pitch, street trees every 40 m on both
/// sides. The BS avenue is unplanted east of the `x = 400` crossing.
///
/// Street `k` runs along `x = 80k` (or `y = 80k`). Façades are flush with
/// the block edges and outer block corners are never notched, so the corner
/// geometry along the streets is exact. Inner corners get random notches.
pub fn urban_map() -> DigitalMap {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c17e);
    let half = URBAN_STREET / 2.0;
    let materials: Vec<Material> = (0..5)
        .map(|i| material(i, 2.0 + i as f64, 0.4))
        .chain(std::iter::once(material(5, 4.0, 0.4)))
        .collect();
    let mut surfaces = Vec::new();
    for bi in 0..URBAN_BLOCKS {
        for bj in 0..URBAN_BLOCKS {
            let x0 = bi as f64 * URBAN_PITCH + half;
            let y0 = bj as f64 * URBAN_PITCH + half;
            let side = URBAN_PITCH - URBAN_STREET;
            for (qi, qj) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
                let lot = side / 2.0;
                let gap_x = rng.gen_range(1.5..3.0);
                let gap_y = rng.gen_range(1.5..3.0);
                let (xa, xb) = if qi == 0 {
                    (x0, x0 + lot - gap_x)
                } else {
                    (x0 + lot + gap_x, x0 + side)
                };
                let (ya, yb) = if qj == 0 {
                    (y0, y0 + lot - gap_y)
                } else {
                    (y0 + lot + gap_y, y0 + side)
                };
                // Counter-clockwise rectangle; index of the outer block corner.
                let corners = [
                    Vec2::new(xa, ya),
                    Vec2::new(xb, ya),
                    Vec2::new(xb, yb),
                    Vec2::new(xa, yb),
                ];
                let outer = match (qi, qj) {
                    (0, 0) => 0,
                    (1, 0) => 1,
                    (1, 1) => 2,
                    _ => 3,
                };
                let mut outline = Vec::with_capacity(12);
                for k in 0..4 {
                    let p = corners[k];
                    if k != outer && rng.gen_bool(0.4) {
                        let e_in = (p - corners[(k + 3) % 4]).normalized();
                        let e_out = (corners[(k + 1) % 4] - p).normalized();
                        let a = rng.gen_range(3.0..8.0);
                        let b = rng.gen_range(3.0..8.0);
                        outline.push(p - e_in * a);
                        outline.push(p - e_in * a + e_out * b);
                        outline.push(p + e_out * b);
                    } else {
                        outline.push(p);
                    }
                }
                let height: f64 = rng.gen_range(12.0..45.0);
                let mat = MaterialId(rng.gen_range(0..5));
                for k in 0..outline.len() {
                    surfaces.push(Surface {
                        id: SurfaceId(surfaces.len() as u32),
                        p1: outline[k],
                        p2: outline[(k + 1) % outline.len()],
                        height: (height * 10.0).round() / 10.0,
                        material: mat,
                    });
                }
            }
        }
    }

    let ret = RetParams {
        beamwidth: 20f64.to_radians(),
        forward_ratio: 0.5,
        absorption: 0.6,
    };
    let mut trees = Vec::new();
    let bs_avenue = (URBAN_BS[1] / URBAN_PITCH).round() * URBAN_PITCH;
    let extent = URBAN_BLOCKS as f64 * URBAN_PITCH;
    for k in 0..=URBAN_BLOCKS {
        let street = k as f64 * URBAN_PITCH;
        for b in 0..URBAN_BLOCKS {
            for along in [20.0, 60.0] {
                let s = b as f64 * URBAN_PITCH + along;
                for offset in [-half + 5.0, half - 5.0] {
                    for center in [Vec2::new(s, street + offset), Vec2::new(street + offset, s)] {
                        let bs_frontage = (center.y - bs_avenue).abs() < half && center.x > URBAN_CORNER[0];
                        if bs_frontage {
                            continue;
                        }
                        trees.push(Tree {
                            id: TreeId(trees.len() as u32),
                            center,
                            radius: 4.0,
                            height: 5.0,
                            ret,
                        });
                    }
                }
            }
        }
    }
    let margin = URBAN_STREET;
    DigitalMap::new(
        Bounds {
            min: Vec2::new(-margin, -margin),
            max: Vec2::new(extent + margin, extent + margin),
        },
        materials,
        surfaces,
        trees,
        MaterialId(5),
    )
    .expect("urban fixture is valid")
}

/// Base station of the urban fixture: 8 m high on street `y = 320`,
/// facing west along it.
pub const URBAN_BS: [f64; 2] = [520.0, 312.0];

/// The building corner that ends the line of sight along [`URBAN_ROUTE`].
pub const URBAN_CORNER: [f64; 2] = [410.0, 330.0];

/// The urban street route: 50 m east along `y = 320` towards the BS, then
/// 32.5 m north into street `x = 400`, where the corner at (410, 330) cuts
/// the line of sight. 166 samples at 2 m/s every 0.25 s.
pub const URBAN_ROUTE: [[f64; 2]; 3] = [[350.0, 320.0], [400.0, 320.0], [400.0, 352.5]];

/// The urban scenario with Table-1 parameters, reading its map from `map`.
pub fn urban_scenario(map: impl Into<std::path::PathBuf>) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(map, URBAN_BS, URBAN_ROUTE.to_vec());
    cfg.bs.array = ArrayConfig::patch_upa(16, 16, std::f64::consts::PI);
    cfg
}

/// A walk around two sides of [`square_building`] on a 64-subcarrier grid with a
/// 4-element BS array, small enough for smoke tests.
pub fn square_scenario(map: impl Into<std::path::PathBuf>) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(map, [-20.0, -5.0], vec![[-10.0, -10.0], [30.0, -10.0], [30.0, 30.0]]);
    cfg.bs.array = ArrayConfig::patch_upa(2, 2, 0.0);
    cfg.ofdm.subcarriers = 64;
    cfg.ue.trajectory.sample_interval = 1.0;
    cfg.seed = 7;
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn urban_map_has_city_scale() {
        let map = urban_map();
        println!("{}", map.summary());
        assert!((1400..=1800).contains(&map.surfaces.len()), "{}", map.surfaces.len());
        assert!(map.materials.iter().all(|m| m.roughness == 0.4));
    }

    #[test]
    fn random_walls_do_not_cross() {
        let map = random_walls(7, 20, 100.0);
        for (i, a) in map.surfaces.iter().enumerate() {
            for b in &map.surfaces[i + 1..] {
                assert!(!segment_blocked(a.p1, a.p2, [(b.p1, b.p2)]));
            }
        }
    }
}
