use std::collections::BTreeSet;

use super::{Path2d, PathKind, RayRecord, TracerConfig};
use crate::geometry::{los_visible, DigitalMap, SurfaceId, Vec2, Vec3};

/// Reflection paths reaching `ue`, found by capturing traced rays and then
/// re-solving each captured wall sequence exactly with the image method.
///
/// A free segment captures the UE when the perpendicular distance is below
/// `capture_slack · d · Δψ / 2`, `d` being the unfolded length to the foot
/// point. Output is sorted by wall sequence.
pub fn associate_paths(rays: &[RayRecord], ue: Vec3, map: &DigitalMap, cfg: &TracerConfig) -> Vec<Path2d> {
    let target = ue.xy();
    let per_meter = 0.5 * cfg.capture_slack * cfg.angular_spacing;
    let mut candidates: BTreeSet<&[SurfaceId]> = BTreeSet::new();

    for ray in rays {
        let mut travelled = 0.0;
        let finite = ray.vertices.len() - 1;
        for j in 0..finite {
            let a = ray.vertices[j];
            let b = ray.vertices[j + 1];
            let len = a.distance(b);
            if j > 0 && captured(a, (b - a) / len, len, travelled, target, per_meter) {
                candidates.insert(&ray.surfaces[..j]);
            }
            travelled += len;
        }
        if let Some(dir) = ray.escape_dir {
            if finite > 0 && captured(ray.vertices[finite], dir, f64::INFINITY, travelled, target, per_meter) {
                candidates.insert(&ray.surfaces[..]);
            }
        }
    }

    let bs = cfg.bs_position.xy();
    candidates
        .into_iter()
        .filter_map(|seq| {
            image_solve(map, bs, target, seq).map(|vertices| Path2d {
                kind: PathKind::Reflection,
                surfaces: seq.to_vec(),
                vertices,
            })
        })
        .collect()
}

/// The foot-point window is widened by the capture radius at both ends so a
/// UE right next to a reflection point is still seen from a neighbouring ray.
fn captured(start: Vec2, dir: Vec2, len: f64, travelled: f64, target: Vec2, per_meter: f64) -> bool {
    let rel = target - start;
    let along = rel.dot(dir);
    let radius = per_meter * (travelled + along.clamp(0.0, len));
    if along < -radius || along > len + radius {
        return false;
    }
    rel.cross(dir).abs() < radius
}

/// Exact specular path through `sequence`, or `None` if it is not realizable.
///
/// The source is mirrored successively across each wall line; walking back
/// from the receiver, every reflection point must fall on its wall and
/// between the current image and the current target, and every leg must be
/// unobstructed. Returns the vertex chain `[source, p1, .., pk, receiver]`.
pub fn image_solve(map: &DigitalMap, source: Vec2, receiver: Vec2, sequence: &[SurfaceId]) -> Option<Vec<Vec2>> {
    if sequence.is_empty() || sequence.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    let walls: Vec<_> = sequence.iter().map(|&id| map.surface(id)).collect::<Option<_>>()?;

    let mut images = Vec::with_capacity(walls.len() + 1);
    images.push(source);
    for w in &walls {
        let prev = *images.last().unwrap();
        images.push(w.reflect_point(prev));
    }

    let mut points = vec![Vec2::ZERO; walls.len()];
    let mut target = receiver;
    for k in (0..walls.len()).rev() {
        let image = images[k + 1];
        let wall = walls[k];
        let d = target - image;
        let e = wall.p2 - wall.p1;
        let denom = d.cross(e);
        if denom == 0.0 {
            return None;
        }
        let w = wall.p1 - image;
        let t = w.cross(e) / denom;
        let u = w.cross(d) / denom;
        if !(t > 0.0 && t < 1.0) || !(0.0..=1.0).contains(&u) {
            return None;
        }
        let p = wall.p1 + e * u;
        points[k] = p;
        target = p;
    }

    let mut vertices = Vec::with_capacity(points.len() + 2);
    vertices.push(source);
    vertices.extend_from_slice(&points);
    vertices.push(receiver);
    let legs_ok = vertices
        .windows(2)
        .all(|leg| leg[0].distance(leg[1]) > crate::geometry::SELF_HIT_EPS && los_visible(leg[0], leg[1], map));
    legs_ok.then_some(vertices)
}
