//! Uniform-grid acceleration for ray/segment queries.

use super::map::{Bounds, Surface};
use super::vec::Vec2;

/// Ray parameters below this distance (m) are treated as self-hits.
pub const SELF_HIT_EPS: f64 = 1e-6;

/// Segments are registered in every cell their (slightly inflated) bounding
/// box touches, so a hit point on a cell border is always visible from both
/// sides of that border.
const REGISTRATION_SLACK: f64 = 1e-6;

/// Nearest hit of a ray: distance along the ray and the surface slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub slot: usize,
}

/// Orders hits by distance, ties broken by surface slot.
fn better(candidate: Hit, best: Option<Hit>) -> bool {
    match best {
        None => true,
        Some(b) => candidate.t < b.t || (candidate.t == b.t && candidate.slot < b.slot),
    }
}

/// Ray (unit direction) against the half-open segment `[p1, p2)`.
///
/// Endpoint membership is decided from the sign of each endpoint's side of
/// the ray, so two walls sharing a corner agree on which one owns it.
/// Returns the ray parameter if the hit lies beyond [`SELF_HIT_EPS`].
#[inline]
pub fn ray_segment(origin: Vec2, dir: Vec2, p1: Vec2, p2: Vec2) -> Option<f64> {
    let s1 = dir.cross(p1 - origin);
    let s2 = dir.cross(p2 - origin);
    if s2 == 0.0 || (s1 > 0.0) == (s2 > 0.0) && s1 != 0.0 {
        return None;
    }
    let e = p2 - p1;
    let denom = dir.cross(e);
    if denom == 0.0 {
        return None;
    }
    let t = (p1 - origin).cross(e) / denom;
    (t >= SELF_HIT_EPS).then_some(t)
}

/// Where the open segment `(a, b)` meets a wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contact {
    None,
    /// Proper crossing through the wall's interior.
    Cross,
    /// The segment passes through wall endpoint `at`; `side` is the sign
    /// of the wall's other endpoint relative to the directed line `a -> b`.
    Touch {
        at: Vec2,
        side: f64,
    },
}

/// Classifies the contact between segment `(a, b)` and wall `(p1, p2)`,
/// ignoring anything within [`SELF_HIT_EPS`] of `a` or `b`.
#[inline]
pub fn segment_contact(a: Vec2, b: Vec2, p1: Vec2, p2: Vec2) -> Contact {
    let d = b - a;
    let len = d.norm();
    if len <= 2.0 * SELF_HIT_EPS {
        return Contact::None;
    }
    let o1 = d.cross(p1 - a);
    let o2 = d.cross(p2 - a);
    let inside = |p: Vec2| {
        let s = (p - a).dot(d) / len;
        s > SELF_HIT_EPS && s < len - SELF_HIT_EPS
    };
    if o1 == 0.0 && o2 == 0.0 {
        return Contact::None;
    }
    if o1 == 0.0 || o2 == 0.0 {
        let (at, other) = if o1 == 0.0 { (p1, o2) } else { (p2, o1) };
        return if inside(at) {
            Contact::Touch {
                at,
                side: other.signum(),
            }
        } else {
            Contact::None
        };
    }
    if (o1 > 0.0) == (o2 > 0.0) {
        return Contact::None;
    }
    let e = p2 - p1;
    let qa = e.cross(a - p1);
    let qb = e.cross(b - p1);
    if qa == 0.0 || qb == 0.0 || (qa > 0.0) == (qb > 0.0) {
        return Contact::None;
    }
    let s = (p1 - a).cross(e) / d.cross(e) * len;
    if s > SELF_HIT_EPS && s < len - SELF_HIT_EPS {
        Contact::Cross
    } else {
        Contact::None
    }
}

/// Accumulates contacts along one segment and decides blockage: a proper
/// crossing blocks, and so does passing through a shared wall endpoint with
/// walls on both sides (entering a building through its corner). Grazing
/// a corner from outside does not.
#[derive(Debug, Default)]
pub struct ContactSet {
    touches: Vec<(Vec2, f64)>,
}

impl ContactSet {
    /// Adds one contact; returns `true` once the segment is known blocked.
    pub fn add(&mut self, contact: Contact) -> bool {
        match contact {
            Contact::None => false,
            Contact::Cross => true,
            Contact::Touch { side: 0.0, .. } => false,
            Contact::Touch { at, side } => {
                let blocked = self
                    .touches
                    .iter()
                    .any(|&(p, s)| s == -side && p.distance(at) <= VERTEX_MERGE);
                self.touches.push((at, side));
                blocked
            }
        }
    }
}

/// Wall endpoints closer than this are the same corner.
const VERTEX_MERGE: f64 = 1e-3;

/// True if the open segment `(a, b)` is blocked by any of `walls`.
pub fn segment_blocked(a: Vec2, b: Vec2, walls: impl IntoIterator<Item = (Vec2, Vec2)>) -> bool {
    let mut set = ContactSet::default();
    walls.into_iter().any(|(p1, p2)| set.add(segment_contact(a, b, p1, p2)))
}

/// Uniform grid with per-cell lists of surface slots (CSR layout).
#[derive(Debug, Clone)]
pub struct GridIndex {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<u32>,
    items: Vec<u32>,
    segments: Vec<(Vec2, Vec2)>,
}

impl GridIndex {
    pub const DEFAULT_CELL: f64 = 10.0;

    pub fn build(surfaces: &[Surface], bounds: Bounds, cell: f64) -> Self {
        let nx = ((bounds.width() / cell).ceil() as usize).max(1);
        let ny = ((bounds.height() / cell).ceil() as usize).max(1);
        let origin = bounds.min;
        let mut per_cell: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
        let clamp_ix = |v: f64, n: usize| -> usize { (v.floor().max(0.0) as usize).min(n - 1) };
        for (slot, s) in surfaces.iter().enumerate() {
            let lo_x = s.p1.x.min(s.p2.x) - REGISTRATION_SLACK;
            let hi_x = s.p1.x.max(s.p2.x) + REGISTRATION_SLACK;
            let lo_y = s.p1.y.min(s.p2.y) - REGISTRATION_SLACK;
            let hi_y = s.p1.y.max(s.p2.y) + REGISTRATION_SLACK;
            let x0 = clamp_ix((lo_x - origin.x) / cell, nx);
            let x1 = clamp_ix((hi_x - origin.x) / cell, nx);
            let y0 = clamp_ix((lo_y - origin.y) / cell, ny);
            let y1 = clamp_ix((hi_y - origin.y) / cell, ny);
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    per_cell[iy * nx + ix].push(slot as u32);
                }
            }
        }
        let mut offsets = Vec::with_capacity(nx * ny + 1);
        let mut items = Vec::new();
        offsets.push(0);
        for c in &per_cell {
            items.extend_from_slice(c);
            offsets.push(items.len() as u32);
        }
        Self {
            origin,
            cell,
            nx,
            ny,
            offsets,
            items,
            segments: surfaces.iter().map(|s| (s.p1, s.p2)).collect(),
        }
    }

    fn cell_items(&self, ix: usize, iy: usize) -> &[u32] {
        let c = iy * self.nx + ix;
        &self.items[self.offsets[c] as usize..self.offsets[c + 1] as usize]
    }

    /// Walks the cells pierced by the ray over `[0, t_limit]`, in order.
    /// The visitor gets the cell contents and the ray parameter where the
    /// ray leaves the cell; returning `false` stops the walk.
    fn walk(&self, origin: Vec2, dir: Vec2, t_limit: f64, mut visit: impl FnMut(&[u32], f64) -> bool) {
        let max = Vec2::new(
            self.origin.x + self.nx as f64 * self.cell,
            self.origin.y + self.ny as f64 * self.cell,
        );
        // Slab clip against the grid box.
        let mut t0 = 0.0_f64;
        let mut t1 = t_limit;
        for (o, d, lo, hi) in [
            (origin.x, dir.x, self.origin.x, max.x),
            (origin.y, dir.y, self.origin.y, max.y),
        ] {
            if d == 0.0 {
                if o < lo || o > hi {
                    return;
                }
            } else {
                let a = (lo - o) / d;
                let b = (hi - o) / d;
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                t0 = t0.max(a);
                t1 = t1.min(b);
            }
        }
        if t0 > t1 {
            return;
        }
        let start = origin + dir * t0;
        let fx = (start.x - self.origin.x) / self.cell;
        let fy = (start.y - self.origin.y) / self.cell;
        let mut ix = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let mut iy = (fy.floor().max(0.0) as usize).min(self.ny - 1);

        let axis = |o: f64, d: f64, lo: f64, i: usize| -> (f64, f64) {
            if d > 0.0 {
                ((lo + (i + 1) as f64 * self.cell - o) / d, self.cell / d)
            } else if d < 0.0 {
                ((lo + i as f64 * self.cell - o) / d, -self.cell / d)
            } else {
                (f64::INFINITY, f64::INFINITY)
            }
        };
        let (mut tx, dtx) = axis(origin.x, dir.x, self.origin.x, ix);
        let (mut ty, dty) = axis(origin.y, dir.y, self.origin.y, iy);

        loop {
            let exit = tx.min(ty);
            if !visit(self.cell_items(ix, iy), exit) || exit >= t1 {
                return;
            }
            if tx < ty {
                if dir.x > 0.0 {
                    ix += 1;
                    if ix >= self.nx {
                        return;
                    }
                } else {
                    if ix == 0 {
                        return;
                    }
                    ix -= 1;
                }
                tx += dtx;
            } else {
                if dir.y > 0.0 {
                    iy += 1;
                    if iy >= self.ny {
                        return;
                    }
                } else {
                    if iy == 0 {
                        return;
                    }
                    iy -= 1;
                }
                ty += dty;
            }
        }
    }

    /// Nearest hit with `t <= t_limit`, ignoring slot `skip`; ties go to the lowest slot.
    pub fn nearest(&self, origin: Vec2, dir: Vec2, t_limit: f64, skip: Option<usize>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        self.walk(origin, dir, t_limit, |items, exit| {
            for &slot in items {
                if skip == Some(slot as usize) {
                    continue;
                }
                let (p1, p2) = self.segments[slot as usize];
                if let Some(t) = ray_segment(origin, dir, p1, p2) {
                    let hit = Hit { t, slot: slot as usize };
                    if t <= t_limit && better(hit, best) {
                        best = Some(hit);
                    }
                }
            }
            // Anything registered only in later cells is at least
            // REGISTRATION_SLACK beyond this cell's exit.
            !matches!(best, Some(b) if b.t <= exit + 0.1 * REGISTRATION_SLACK)
        });
        best
    }

    /// Exhaustive O(B) reference for [`GridIndex::nearest`].
    pub fn nearest_linear(&self, origin: Vec2, dir: Vec2, t_limit: f64, skip: Option<usize>) -> Option<Hit> {
        let mut best = None;
        for (slot, &(p1, p2)) in self.segments.iter().enumerate() {
            if skip == Some(slot) {
                continue;
            }
            if let Some(t) = ray_segment(origin, dir, p1, p2) {
                let hit = Hit { t, slot };
                if t <= t_limit && better(hit, best) {
                    best = Some(hit);
                }
            }
        }
        best
    }

    /// True if the open segment `(a, b)` is not blocked (see [`ContactSet`]).
    pub fn segment_clear(&self, a: Vec2, b: Vec2) -> bool {
        let d = b - a;
        let len = d.norm();
        if len == 0.0 {
            return true;
        }
        let dir = d / len;
        let mut clear = true;
        let mut set = ContactSet::default();
        self.walk(a, dir, len, |items, _| {
            for &slot in items {
                let (p1, p2) = self.segments[slot as usize];
                if set.add(segment_contact(a, b, p1, p2)) {
                    clear = false;
                    return false;
                }
            }
            true
        });
        clear
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_open_segment_excludes_far_endpoint() {
        let o = Vec2::new(0.0, 0.0);
        let d = Vec2::new(1.0, 0.0);
        // Ray passes exactly through p1 -> counted.
        assert!(ray_segment(o, d, Vec2::new(5.0, 0.0), Vec2::new(5.0, 3.0)).is_some());
        // ... through p2 -> not counted.
        assert!(ray_segment(o, d, Vec2::new(5.0, 3.0), Vec2::new(5.0, 0.0)).is_none());
    }

    #[test]
    fn shared_corner_hits_exactly_one_wall_with_consistent_winding() {
        let o = Vec2::new(-5.0, -5.0);
        let d = Vec2::new(1.0, 1.0).normalized();
        let corner = Vec2::new(0.0, 0.0);
        let w1 = (Vec2::new(0.0, 10.0), corner);
        let w2 = (corner, Vec2::new(10.0, 0.0));
        let hits = [w1, w2]
            .iter()
            .filter(|(a, b)| ray_segment(o, d, *a, *b).is_some())
            .count();
        assert_eq!(hits, 1);
    }

    #[test]
    fn strict_crossing_ignores_touching_endpoints() {
        let wall = [(Vec2::new(5.0, 0.0), Vec2::new(5.0, 10.0))];
        assert!(!segment_blocked(Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), wall));
        assert!(segment_blocked(Vec2::new(0.0, 1.0), Vec2::new(10.0, 1.0), wall));
        // Segment ending on the wall is not blocked by it.
        assert!(!segment_blocked(Vec2::new(0.0, 1.0), Vec2::new(5.0, 1.0), wall));
    }

    #[test]
    fn corner_passage_blocks_but_grazing_does_not() {
        let c = |x: f64, y: f64| Vec2::new(x, y);
        let square = [
            (c(0.0, 0.0), c(20.0, 0.0)),
            (c(20.0, 0.0), c(20.0, 20.0)),
            (c(20.0, 20.0), c(0.0, 20.0)),
            (c(0.0, 20.0), c(0.0, 0.0)),
        ];
        // Diagonal through two opposite corners runs through the interior.
        assert!(segment_blocked(c(-50.0, -50.0), c(40.0, 40.0), square));
        // Grazing the corner (20, 0) from outside.
        assert!(!segment_blocked(c(10.0, -10.0), c(30.0, 10.0), square));
    }
}
