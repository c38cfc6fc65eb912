use std::f64::consts::TAU;

use super::{RayRecord, TracerConfig};
use crate::geometry::{ray_segment, DigitalMap, Hit, Vec2};

/// How the first wall of each launched ray is found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStrategy {
    /// Full nearest-surface search for every ray.
    Naive,
    /// Reuse the wall hit by the previous launch direction: intersect it
    /// first and, on a hit at distance `t`, search only `[0, t]` for a
    /// nearer occluder. Falls back to the full search on a miss.
    WarmStart,
}

/// The launch grid: `G = ⌈2π/Δψ⌉` azimuths evenly covering the circle.
pub fn launch_angles(cfg: &TracerConfig) -> Vec<f64> {
    let count = ((TAU / cfg.angular_spacing) - 1e-9).ceil().max(1.0) as usize;
    let step = TAU / count as f64;
    (0..count).map(|g| cfg.angle_offset + g as f64 * step).collect()
}

pub fn fsbr_trace(map: &DigitalMap, cfg: &TracerConfig) -> Vec<RayRecord> {
    fsbr_trace_with(map, cfg, TraceStrategy::WarmStart)
}

pub fn fsbr_trace_with(map: &DigitalMap, cfg: &TracerConfig, strategy: TraceStrategy) -> Vec<RayRecord> {
    let origin = cfg.bs_position.xy();
    let index = &map.index;
    let mut previous: Option<usize> = None;

    launch_angles(cfg)
        .into_iter()
        .map(|angle| {
            let dir = Vec2::from_angle(angle);
            let first = match strategy {
                TraceStrategy::Naive => index.nearest(origin, dir, f64::INFINITY, None),
                TraceStrategy::WarmStart => {
                    let reused = previous.and_then(|slot| {
                        let s = &map.surfaces[slot];
                        ray_segment(origin, dir, s.p1, s.p2)
                    });
                    match reused {
                        Some(t) => index.nearest(origin, dir, t, None),
                        None => index.nearest(origin, dir, f64::INFINITY, None),
                    }
                }
            };
            previous = first.map(|h| h.slot);
            bounce(map, origin, dir, first, cfg.max_bounce, angle)
        })
        .collect()
}

/// Smallest angular gap [`refine_beams`] still splits (rad).
pub const REFINE_MIN_GAP: f64 = 1e-9;

/// Extra rays splitting every pair of neighbouring launch directions whose
/// wall sequences differ, recursively down to [`REFINE_MIN_GAP`].
///
/// Narrow beams that fall between two grid rays (near wall ends and
/// occluding corners) are otherwise never traced. The result is sorted by
/// launch angle and does not contain the input rays.
pub fn refine_beams(map: &DigitalMap, cfg: &TracerConfig, rays: &[RayRecord]) -> Vec<RayRecord> {
    let origin = cfg.bs_position.xy();
    let mut out = Vec::new();
    let g = rays.len();
    for i in 0..g {
        let lo = &rays[i];
        let hi = &rays[(i + 1) % g];
        let hi_angle = if i + 1 == g {
            hi.launch_angle + TAU
        } else {
            hi.launch_angle
        };
        if differ(lo, hi) {
            split(map, origin, cfg.max_bounce, lo, lo.launch_angle, hi, hi_angle, &mut out);
        }
    }
    out
}

fn differ(a: &RayRecord, b: &RayRecord) -> bool {
    a.surfaces != b.surfaces || a.escaped() != b.escaped()
}

#[allow(clippy::too_many_arguments)]
fn split(
    map: &DigitalMap,
    origin: Vec2,
    max_bounce: usize,
    lo: &RayRecord,
    lo_angle: f64,
    hi: &RayRecord,
    hi_angle: f64,
    out: &mut Vec<RayRecord>,
) {
    if hi_angle - lo_angle < REFINE_MIN_GAP {
        return;
    }
    let mid_angle = 0.5 * (lo_angle + hi_angle);
    let mid = trace_one(map, origin, mid_angle, max_bounce);
    let left = differ(lo, &mid);
    let right = differ(&mid, hi);
    if left {
        split(map, origin, max_bounce, lo, lo_angle, &mid, mid_angle, out);
    }
    if right {
        split(map, origin, max_bounce, &mid, mid_angle, hi, hi_angle, out);
    }
    out.push(mid);
}

/// Traces a single ray with a full nearest-surface search.
pub fn trace_one(map: &DigitalMap, origin: Vec2, angle: f64, max_bounce: usize) -> RayRecord {
    let dir = Vec2::from_angle(angle);
    let first = map.index.nearest(origin, dir, f64::INFINITY, None);
    bounce(map, origin, dir, first, max_bounce, angle)
}

fn bounce(map: &DigitalMap, origin: Vec2, dir: Vec2, first: Option<Hit>, max_bounce: usize, angle: f64) -> RayRecord {
    let mut vertices = vec![origin];
    let mut surfaces = Vec::with_capacity(max_bounce + 1);
    let mut from = origin;
    let mut d = dir;
    let mut hit = first;
    let mut reflections = 0;
    let escape_dir = loop {
        let Some(h) = hit else { break Some(d) };
        let wall = &map.surfaces[h.slot];
        let p = from + d * h.t;
        vertices.push(p);
        surfaces.push(wall.id);
        if reflections == max_bounce {
            break None;
        }
        d = wall.reflect_dir(d).normalized();
        from = p;
        reflections += 1;
        hit = map.index.nearest(from, d, f64::INFINITY, Some(h.slot));
    };
    RayRecord {
        launch_angle: angle,
        vertices,
        surfaces,
        escape_dir,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Bounds, Material, MaterialId, Surface, SurfaceId, Vec3};

    fn map_with(surfaces: Vec<Surface>) -> DigitalMap {
        DigitalMap::new(
            Bounds {
                min: Vec2::new(-200.0, -200.0),
                max: Vec2::new(200.0, 200.0),
            },
            vec![Material {
                id: MaterialId(0),
                permittivity: 4.0,
                roughness: 0.0,
            }],
            surfaces,
            vec![],
            MaterialId(0),
        )
        .unwrap()
    }

    #[test]
    fn grid_has_ceil_two_pi_over_spacing_rays() {
        let mut cfg = TracerConfig::new(Vec3::new(0.0, 0.0, 8.0));
        assert_eq!(launch_angles(&cfg).len(), 3600);
        cfg.angular_spacing = 0.7_f64.to_radians();
        assert_eq!(launch_angles(&cfg).len(), 515);
    }

    #[test]
    fn empty_map_rays_all_escape() {
        let map = map_with(vec![]);
        let cfg = TracerConfig::new(Vec3::new(0.0, 0.0, 8.0));
        let rays = fsbr_trace(&map, &cfg);
        assert_eq!(rays.len(), 3600);
        assert!(rays
            .iter()
            .all(|r| r.escaped() && r.surfaces.is_empty() && r.vertices.len() == 1));
    }

    #[test]
    fn single_wall_single_bounce() {
        let wall = Surface {
            id: SurfaceId(9),
            p1: Vec2::new(50.0, -150.0),
            p2: Vec2::new(50.0, 150.0),
            height: 20.0,
            material: MaterialId(0),
        };
        let map = map_with(vec![wall]);
        let mut cfg = TracerConfig::new(Vec3::new(0.0, 0.0, 8.0));
        cfg.max_bounce = 1;
        let rays = fsbr_trace(&map, &cfg);
        let east = &rays[0];
        assert_eq!(east.surfaces, vec![SurfaceId(9)]);
        assert_eq!(east.bounce_count(), 1);
        assert!(east.escaped());
        let dir = east.escape_dir.unwrap();
        assert!((dir.x + 1.0).abs() < 1e-12);
        let west = &rays[1800];
        assert!(west.surfaces.is_empty());
    }
}
