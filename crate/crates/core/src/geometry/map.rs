//! Map elements, the JSON map file schema and its validation.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::GridIndex;
use super::vec::Vec2;
use crate::{Error, Result};

/// Endpoints closer than this are treated as one shared corner.
pub const CORNER_TOLERANCE: f64 = 1e-3;

/// Corners within this angle of a straight continuation produce no wedge.
pub const FLAT_CORNER_TOLERANCE: f64 = PI / 180.0;

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(SurfaceId);
id_type!(MaterialId);
id_type!(WedgeId);
id_type!(TreeId);

/// Lossless dielectric with Gaussian surface roughness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub id: MaterialId,
    pub permittivity: f64,
    /// Standard deviation of the surface height (m).
    pub roughness: f64,
}

/// A vertical wall, seen from above as a 2D segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub id: SurfaceId,
    pub p1: Vec2,
    pub p2: Vec2,
    pub height: f64,
    pub material: MaterialId,
}

impl Surface {
    pub fn length(&self) -> f64 {
        self.p1.distance(self.p2)
    }

    /// Unit normal (left of p1 -> p2).
    pub fn normal(&self) -> Vec2 {
        (self.p2 - self.p1).perp().normalized()
    }

    /// Mirror image of `p` across the infinite line through this wall.
    pub fn reflect_point(&self, p: Vec2) -> Vec2 {
        let n = self.normal();
        p - n * (2.0 * (p - self.p1).dot(n))
    }

    /// Specular reflection of a direction about this wall.
    pub fn reflect_dir(&self, d: Vec2) -> Vec2 {
        let n = self.normal();
        d - n * (2.0 * d.dot(n))
    }
}

/// Re-radiation parameters of a tree canopy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetParams {
    /// 3 dB width of the forward lobe (radians).
    pub beamwidth: f64,
    /// Ratio of forward scattered power to total scattered power.
    pub forward_ratio: f64,
    /// Fraction of the incident energy absorbed.
    pub absorption: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub id: TreeId,
    pub center: Vec2,
    pub radius: f64,
    pub height: f64,
    pub ret: RetParams,
}

/// A diffracting building corner.
///
/// Angles around the apex are measured counter-clockwise from the zero face;
/// the exterior (air) region spans `[0, n·π]` and the n face lies at `n·π`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wedge {
    pub id: WedgeId,
    pub apex: Vec2,
    pub zero_face: SurfaceId,
    pub n_face: SurfaceId,
    pub n: f64,
    pub height: f64,
    /// Unit direction from the apex along the zero face.
    pub zero_dir: Vec2,
}

impl Wedge {
    /// Angle of `p` around the apex, counter-clockwise from the zero face, in `[0, 2π)`.
    pub fn angle_of(&self, p: Vec2) -> f64 {
        let v = p - self.apex;
        let a = self.zero_dir.cross(v).atan2(self.zero_dir.dot(v));
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }

    pub fn exterior_angle(&self) -> f64 {
        self.n * PI
    }
}

/// Axis-aligned rectangle in the map plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn contains(&self, p: Vec2) -> bool {
        const SLACK: f64 = 1e-9;
        p.x >= self.min.x - SLACK && p.x <= self.max.x + SLACK && p.y >= self.min.y - SLACK && p.y <= self.max.y + SLACK
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// The immutable 2.5D scene: walls, derived corners, trees and ground.
#[derive(Debug, Clone)]
pub struct DigitalMap {
    pub surfaces: Vec<Surface>,
    pub wedges: Vec<Wedge>,
    pub trees: Vec<Tree>,
    pub materials: Vec<Material>,
    pub ground_material: MaterialId,
    pub bounds: Bounds,
    pub(crate) index: GridIndex,
    surface_slots: HashMap<SurfaceId, usize>,
    material_slots: HashMap<MaterialId, usize>,
}

impl DigitalMap {
    /// Validates the elements, derives corner wedges and builds the spatial index.
    pub fn new(
        bounds: Bounds,
        materials: Vec<Material>,
        surfaces: Vec<Surface>,
        trees: Vec<Tree>,
        ground_material: MaterialId,
    ) -> Result<Self> {
        if !(bounds.min.is_finite() && bounds.max.is_finite())
            || bounds.max.x <= bounds.min.x
            || bounds.max.y <= bounds.min.y
        {
            return Err(Error::validation("bounds", -1, "empty or non-finite box"));
        }

        let mut material_slots = HashMap::new();
        for (slot, m) in materials.iter().enumerate() {
            if material_slots.insert(m.id, slot).is_some() {
                return Err(Error::validation("material", m.id.0 as i64, "duplicate id"));
            }
            if !(m.permittivity > 1.0) || !m.permittivity.is_finite() {
                return Err(Error::validation(
                    "material",
                    m.id.0 as i64,
                    format!("relative permittivity must exceed 1, got {}", m.permittivity),
                ));
            }
            if !(m.roughness >= 0.0) || !m.roughness.is_finite() {
                return Err(Error::validation(
                    "material",
                    m.id.0 as i64,
                    format!("roughness must be >= 0, got {}", m.roughness),
                ));
            }
        }
        if !material_slots.contains_key(&ground_material) {
            return Err(Error::validation(
                "ground_material",
                ground_material.0 as i64,
                "unknown material",
            ));
        }

        let mut surface_slots = HashMap::new();
        for (slot, s) in surfaces.iter().enumerate() {
            let id = s.id.0 as i64;
            if surface_slots.insert(s.id, slot).is_some() {
                return Err(Error::validation("surface", id, "duplicate id"));
            }
            if !(s.p1.is_finite() && s.p2.is_finite()) {
                return Err(Error::validation("surface", id, "non-finite endpoint"));
            }
            if s.p1.distance(s.p2) <= 1e-9 {
                return Err(Error::validation("surface", id, "endpoints coincide"));
            }
            if !(s.height > 0.0) || !s.height.is_finite() {
                return Err(Error::validation(
                    "surface",
                    id,
                    format!("height must be > 0, got {}", s.height),
                ));
            }
            if !material_slots.contains_key(&s.material) {
                return Err(Error::validation(
                    "surface",
                    id,
                    format!("unknown material {}", s.material),
                ));
            }
            if !bounds.contains(s.p1) || !bounds.contains(s.p2) {
                return Err(Error::validation("surface", id, "outside map bounds"));
            }
        }

        let mut tree_ids = HashSet::new();
        for t in &trees {
            let id = t.id.0 as i64;
            if !tree_ids.insert(t.id) {
                return Err(Error::validation("tree", id, "duplicate id"));
            }
            if !(t.radius > 0.0 && t.height > 0.0) {
                return Err(Error::validation("tree", id, "radius and height must be > 0"));
            }
            let ret = t.ret;
            if !(ret.beamwidth > 0.0) {
                return Err(Error::validation("tree", id, "beamwidth must be > 0"));
            }
            if !(0.0..=1.0).contains(&ret.forward_ratio) || !(0.0..=1.0).contains(&ret.absorption) {
                return Err(Error::validation("tree", id, "alpha and chi must lie in [0, 1]"));
            }
            if !bounds.contains(t.center) {
                return Err(Error::validation("tree", id, "outside map bounds"));
            }
        }

        let wedges = derive_wedges(&surfaces);
        let index = GridIndex::build(&surfaces, bounds, GridIndex::DEFAULT_CELL);

        Ok(Self {
            surfaces,
            wedges,
            trees,
            materials,
            ground_material,
            bounds,
            index,
            surface_slots,
            material_slots,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: MapFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_map()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&MapFile::from_map(self)).expect("map serializes")
    }

    pub fn surface(&self, id: SurfaceId) -> Option<&Surface> {
        self.surface_slots.get(&id).map(|&i| &self.surfaces[i])
    }

    pub(crate) fn surface_slot(&self, id: SurfaceId) -> Option<usize> {
        self.surface_slots.get(&id).copied()
    }

    pub fn material(&self, id: MaterialId) -> Option<&Material> {
        self.material_slots.get(&id).map(|&i| &self.materials[i])
    }

    pub fn ground(&self) -> &Material {
        self.material(self.ground_material).expect("validated ground material")
    }

    pub fn wedge(&self, id: WedgeId) -> Option<&Wedge> {
        self.wedges.get(id.0 as usize).filter(|w| w.id == id)
    }

    pub fn tree(&self, id: TreeId) -> Option<&Tree> {
        self.trees.iter().find(|t| t.id == id)
    }

    pub fn summary(&self) -> String {
        format!(
            "{} surfaces, {} wedges, {} trees",
            self.surfaces.len(),
            self.wedges.len(),
            self.trees.len()
        )
    }
}

/// Reads and validates a JSON map file.
pub fn load_map(path: impl AsRef<Path>) -> Result<DigitalMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DigitalMap::from_json_str(&text)
}

/// One wedge per pair of walls sharing an endpoint, unless the corner is flat.
///
/// Ids follow a canonical order of (zero face, n face, apex), so any
/// permutation of the input walls yields the same wedge list.
fn derive_wedges(surfaces: &[Surface]) -> Vec<Wedge> {
    let mut found = Vec::new();
    for (i, a) in surfaces.iter().enumerate() {
        for b in &surfaces[i + 1..] {
            for (pa, qa) in [(a.p1, a.p2), (a.p2, a.p1)] {
                for (pb, qb) in [(b.p1, b.p2), (b.p2, b.p1)] {
                    if pa.distance(pb) > CORNER_TOLERANCE {
                        continue;
                    }
                    let apex = (pa + pb) * 0.5;
                    let fa = (qa - apex).normalized();
                    let fb = (qb - apex).normalized();
                    let interior = fa.dot(fb).clamp(-1.0, 1.0).acos();
                    if (PI - interior).abs() < FLAT_CORNER_TOLERANCE {
                        continue;
                    }
                    let n = (2.0 * PI - interior) / PI;
                    let mut ccw = fa.cross(fb).atan2(fa.dot(fb));
                    if ccw < 0.0 {
                        ccw += 2.0 * PI;
                    }
                    // The exterior is swept counter-clockwise from the zero face.
                    let (zero, nface, zero_dir) = if ccw > PI { (a, b, fa) } else { (b, a, fb) };
                    found.push(Wedge {
                        id: WedgeId(0),
                        apex,
                        zero_face: zero.id,
                        n_face: nface.id,
                        n,
                        height: a.height.min(b.height),
                        zero_dir,
                    });
                }
            }
        }
    }
    found.sort_by(|x, y| {
        (x.zero_face, x.n_face)
            .cmp(&(y.zero_face, y.n_face))
            .then(x.apex.x.total_cmp(&y.apex.x))
            .then(x.apex.y.total_cmp(&y.apex.y))
    });
    for (i, w) in found.iter_mut().enumerate() {
        w.id = WedgeId(i as u32);
    }
    found
}

// ---- file schema ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub bounds: [f64; 4],
    pub materials: Vec<MaterialEntry>,
    #[serde(default)]
    pub surfaces: Vec<SurfaceEntry>,
    #[serde(default)]
    pub trees: Vec<TreeEntry>,
    pub ground_material: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialEntry {
    pub id: i64,
    pub eps: f64,
    pub sigma_h: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceEntry {
    pub id: i64,
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub height: f64,
    pub material: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeEntry {
    pub id: i64,
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
    pub beta_deg: f64,
    pub alpha: f64,
    pub chi: f64,
}

fn to_u32(element: &'static str, id: i64) -> Result<u32> {
    u32::try_from(id).map_err(|_| Error::validation(element, id, "id must be a non-negative 32-bit integer"))
}

impl MapFile {
    pub fn into_map(self) -> Result<DigitalMap> {
        let [xmin, ymin, xmax, ymax] = self.bounds;
        let bounds = Bounds {
            min: Vec2::new(xmin, ymin),
            max: Vec2::new(xmax, ymax),
        };
        let materials = self
            .materials
            .iter()
            .map(|m| {
                Ok(Material {
                    id: MaterialId(to_u32("material", m.id)?),
                    permittivity: m.eps,
                    roughness: m.sigma_h,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let surfaces = self
            .surfaces
            .iter()
            .map(|s| {
                Ok(Surface {
                    id: SurfaceId(to_u32("surface", s.id)?),
                    p1: s.p1.into(),
                    p2: s.p2.into(),
                    height: s.height,
                    material: MaterialId(
                        u32::try_from(s.material)
                            .map_err(|_| Error::validation("surface", s.id, "bad material reference"))?,
                    ),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let trees = self
            .trees
            .iter()
            .map(|t| {
                Ok(Tree {
                    id: TreeId(to_u32("tree", t.id)?),
                    center: t.center.into(),
                    radius: t.radius,
                    height: t.height,
                    ret: RetParams {
                        beamwidth: t.beta_deg.to_radians(),
                        forward_ratio: t.alpha,
                        absorption: t.chi,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ground = MaterialId(to_u32("ground_material", self.ground_material)?);
        DigitalMap::new(bounds, materials, surfaces, trees, ground)
    }

    pub fn from_map(map: &DigitalMap) -> Self {
        Self {
            bounds: [map.bounds.min.x, map.bounds.min.y, map.bounds.max.x, map.bounds.max.y],
            materials: map
                .materials
                .iter()
                .map(|m| MaterialEntry {
                    id: m.id.0 as i64,
                    eps: m.permittivity,
                    sigma_h: m.roughness,
                })
                .collect(),
            surfaces: map
                .surfaces
                .iter()
                .map(|s| SurfaceEntry {
                    id: s.id.0 as i64,
                    p1: s.p1.into(),
                    p2: s.p2.into(),
                    height: s.height,
                    material: s.material.0 as i64,
                })
                .collect(),
            trees: map
                .trees
                .iter()
                .map(|t| TreeEntry {
                    id: t.id.0 as i64,
                    center: t.center.into(),
                    radius: t.radius,
                    height: t.height,
                    beta_deg: t.ret.beamwidth.to_degrees(),
                    alpha: t.ret.forward_ratio,
                    chi: t.ret.absorption,
                })
                .collect(),
            ground_material: map.ground_material.0 as i64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = r#"{
        "bounds": [-50, -50, 50, 50],
        "materials": [{"id": 1, "eps": 4.0, "sigma_h": 0.0}],
        "surfaces": [
            {"id": 1, "p1": [0, 0], "p2": [10, 0], "height": 10, "material": 1},
            {"id": 2, "p1": [10, 0], "p2": [10, 10], "height": 10, "material": 1},
            {"id": 3, "p1": [10, 10], "p2": [0, 10], "height": 10, "material": 1},
            {"id": 4, "p1": [0, 10], "p2": [0, 0], "height": 10, "material": 1}
        ],
        "ground_material": 1
    }"#;

    #[test]
    fn square_building_has_four_right_angle_wedges() {
        let map = DigitalMap::from_json_str(SQUARE).unwrap();
        assert_eq!(map.surfaces.len(), 4);
        assert_eq!(map.wedges.len(), 4);
        for w in &map.wedges {
            assert!((w.n - 1.5).abs() < 1e-12, "n = {}", w.n);
            assert_eq!(w.height, 10.0);
        }
        assert_eq!(map.summary(), "4 surfaces, 4 wedges, 0 trees");
    }

    #[test]
    fn wedge_exterior_excludes_building_interior() {
        let map = DigitalMap::from_json_str(SQUARE).unwrap();
        let inside = Vec2::new(5.0, 5.0);
        for w in &map.wedges {
            let a = w.angle_of(inside);
            assert!(
                a > w.exterior_angle(),
                "interior point at {a} inside exterior of wedge {:?}",
                w
            );
            let outside = w.apex + (w.apex - inside);
            assert!(w.angle_of(outside) < w.exterior_angle());
        }
    }

    #[test]
    fn empty_surface_list_is_valid() {
        let map = DigitalMap::from_json_str(
            r#"{"bounds":[0,0,1,1],"materials":[{"id":0,"eps":2,"sigma_h":0}],"surfaces":[],"ground_material":0}"#,
        )
        .unwrap();
        assert!(map.surfaces.is_empty() && map.wedges.is_empty());
    }

    #[test]
    fn zero_height_wall_names_the_wall() {
        let text = SQUARE.replace(
            r#""id": 3, "p1": [10, 10], "p2": [0, 10], "height": 10"#,
            r#""id": 3, "p1": [10, 10], "p2": [0, 10], "height": 0"#,
        );
        let err = DigitalMap::from_json_str(&text).unwrap_err();
        match err {
            Error::Validation { element, id, .. } => {
                assert_eq!(element, "surface");
                assert_eq!(id, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(DigitalMap::from_json_str("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn flat_corner_produces_no_wedge() {
        let map = DigitalMap::from_json_str(
            r#"{"bounds":[-10,-10,30,10],"materials":[{"id":0,"eps":3,"sigma_h":0}],
                "surfaces":[{"id":0,"p1":[0,0],"p2":[10,0],"height":5,"material":0},
                            {"id":1,"p1":[10,0],"p2":[20,0.1],"height":5,"material":0}],
                "ground_material":0}"#,
        )
        .unwrap();
        assert!(map.wedges.is_empty());
    }

    #[test]
    fn json_round_trip_preserves_map() {
        let map = DigitalMap::from_json_str(SQUARE).unwrap();
        let again = DigitalMap::from_json_str(&map.to_json_string()).unwrap();
        assert_eq!(map.surfaces, again.surfaces);
        assert_eq!(map.wedges, again.wedges);
    }
}
