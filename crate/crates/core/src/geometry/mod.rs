//! The 2.5D digital map and exact ray/segment queries against it.

mod grid;
mod map;
mod vec;

pub use grid::{ray_segment, segment_blocked, segment_contact, Contact, ContactSet, GridIndex, Hit, SELF_HIT_EPS};
pub use map::{
    load_map, Bounds, DigitalMap, MapFile, Material, MaterialEntry, MaterialId, RetParams, Surface, SurfaceEntry,
    SurfaceId, Tree, TreeEntry, TreeId, Wedge, WedgeId, CORNER_TOLERANCE, FLAT_CORNER_TOLERANCE,
};
pub use vec::{Ray2, Vec2, Vec3};

/// First surface hit by `ray`, skipping `exclude` (the surface the ray leaves).
///
/// `None` plays the role of the "no surface" index.
pub fn find_intersection_surface(ray: &Ray2, map: &DigitalMap, exclude: Option<SurfaceId>) -> Option<SurfaceId> {
    nearest_hit(ray, map, exclude, f64::INFINITY).map(|h| map.surfaces[h.slot].id)
}

/// Intersection of `ray` with one wall; `None` stands for the point at infinity.
pub fn find_intersection_point(ray: &Ray2, surface: &Surface) -> Option<Vec2> {
    ray_segment(ray.origin, ray.dir, surface.p1, surface.p2).map(|t| ray.at(t))
}

/// Visibility between two map points. Only walls block; trees never do.
pub fn los_visible(a: Vec2, b: Vec2, map: &DigitalMap) -> bool {
    map.index.segment_clear(a, b)
}

/// Nearest hit up to `t_limit`, optionally skipping one surface.
pub(crate) fn nearest_hit(ray: &Ray2, map: &DigitalMap, exclude: Option<SurfaceId>, t_limit: f64) -> Option<Hit> {
    let skip = exclude.and_then(|id| map.surface_slot(id));
    map.index.nearest(ray.origin, ray.dir, t_limit, skip)
}
