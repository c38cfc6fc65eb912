//! Fast shooting-bouncing rays, path association and vertical-plane lifting.

mod associate;
mod candidates;
mod fsbr;
mod lift;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{SurfaceId, TreeId, Vec2, Vec3, WedgeId};
use crate::{Error, Result};

pub use associate::{associate_paths, image_solve};
pub use candidates::{collect_diffraction_candidates, collect_scattering_candidates, diffraction_region_contains};
pub use fsbr::{fsbr_trace, fsbr_trace_with, launch_angles, refine_beams, trace_one, TraceStrategy, REFINE_MIN_GAP};
pub use lift::{lift_to_3d, lift_to_3d_with};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracerConfig {
    /// Base station position; `z` is the antenna height.
    pub bs_position: Vec3,
    pub max_bounce: usize,
    /// Spacing of the launch grid (radians).
    pub angular_spacing: f64,
    /// Scales the reception radius `slack · d · Δψ / 2`.
    pub capture_slack: f64,
    /// Azimuth of the first launched ray (radians, 0 = map east).
    pub angle_offset: f64,
}

impl TracerConfig {
    pub fn new(bs_position: Vec3) -> Self {
        Self {
            bs_position,
            max_bounce: 3,
            angular_spacing: 0.1_f64.to_radians(),
            capture_slack: 2.0,
            angle_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_bounce < 1 {
            return Err(Error::Config("max_bounce must be >= 1".into()));
        }
        if !(self.angular_spacing > 0.0 && self.angular_spacing <= 1.0_f64.to_radians() + 1e-15) {
            return Err(Error::Config(format!(
                "angular spacing must lie in (0, 1 deg], got {} deg",
                self.angular_spacing.to_degrees()
            )));
        }
        if !(self.capture_slack >= 1.0) {
            return Err(Error::Config("capture_slack must be >= 1".into()));
        }
        if !self.bs_position.is_finite() || self.bs_position.z <= 0.0 {
            return Err(Error::Config("BS position must be finite with positive height".into()));
        }
        Ok(())
    }
}

/// One launched ray and the chain of walls it bounced off.
#[derive(Debug, Clone, PartialEq)]
pub struct RayRecord {
    pub launch_angle: f64,
    /// `[b, p1, p2, ...]`: the launch point followed by every finite hit.
    pub vertices: Vec<Vec2>,
    /// Wall hit at each of `vertices[1..]`.
    pub surfaces: Vec<SurfaceId>,
    /// Direction of the final free segment when the ray left the map.
    pub escape_dir: Option<Vec2>,
}

impl RayRecord {
    pub fn escaped(&self) -> bool {
        self.escape_dir.is_some()
    }

    /// Number of specular reflections along the ray.
    pub fn bounce_count(&self) -> usize {
        if self.escaped() {
            self.surfaces.len()
        } else {
            self.surfaces.len().saturating_sub(1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Los,
    Reflection,
    Diffraction,
    Scattering,
}

impl PathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::Los => "los",
            PathKind::Reflection => "reflection",
            PathKind::Diffraction => "diffraction",
            PathKind::Scattering => "scattering",
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An interaction at an interior path vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "id")]
pub enum Interaction {
    Wall(SurfaceId),
    Ground,
    Wedge(WedgeId),
    Tree(TreeId),
}

/// A horizontal-plane path before lifting: BS, interaction points, UE.
#[derive(Debug, Clone, PartialEq)]
pub struct Path2d {
    pub kind: PathKind,
    pub surfaces: Vec<SurfaceId>,
    pub vertices: Vec<Vec2>,
}

impl Path2d {
    pub fn horizontal_length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

/// Identity of a path independent of the UE position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathSignature {
    pub kind: PathKind,
    pub interactions: Vec<Interaction>,
}

impl fmt::Display for PathSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        for i in &self.interactions {
            match i {
                Interaction::Wall(id) => write!(f, "/w{id}")?,
                Interaction::Ground => write!(f, "/g")?,
                Interaction::Wedge(id) => write!(f, "/e{id}")?,
                Interaction::Tree(id) => write!(f, "/t{id}")?,
            }
        }
        Ok(())
    }
}

/// A 3D propagation path from the BS to the UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationPath {
    pub kind: PathKind,
    /// Interactions at `vertices[1..len-1]`, in order.
    pub interactions: Vec<Interaction>,
    pub vertices: Vec<Vec3>,
    /// Total unfolded length d_T (m).
    pub length: f64,
}

impl PropagationPath {
    pub fn new(kind: PathKind, interactions: Vec<Interaction>, vertices: Vec<Vec3>) -> Self {
        let length = vertices.windows(2).map(|w| w[0].distance(w[1])).sum();
        Self {
            kind,
            interactions,
            vertices,
            length,
        }
    }

    pub fn signature(&self) -> PathSignature {
        PathSignature {
            kind: self.kind,
            interactions: self.interactions.clone(),
        }
    }

    pub fn surface_sequence(&self) -> Vec<SurfaceId> {
        self.interactions
            .iter()
            .filter_map(|i| match i {
                Interaction::Wall(id) => Some(*id),
                _ => None,
            })
            .collect()
    }

    /// Number of wall reflections.
    pub fn order(&self) -> usize {
        self.surface_sequence().len()
    }

    pub fn has_ground_bounce(&self) -> bool {
        self.interactions.contains(&Interaction::Ground)
    }

    pub fn wedge(&self) -> Option<WedgeId> {
        self.interactions.iter().find_map(|i| match i {
            Interaction::Wedge(id) => Some(*id),
            _ => None,
        })
    }

    pub fn tree(&self) -> Option<TreeId> {
        self.interactions.iter().find_map(|i| match i {
            Interaction::Tree(id) => Some(*id),
            _ => None,
        })
    }

    /// Unit vector leaving the BS along the path.
    pub fn bs_direction(&self) -> Vec3 {
        (self.vertices[1] - self.vertices[0]).normalized()
    }

    /// Unit vector leaving the UE along the path (pointing back toward the BS side).
    pub fn ue_direction(&self) -> Vec3 {
        let n = self.vertices.len();
        (self.vertices[n - 2] - self.vertices[n - 1]).normalized()
    }

    /// Geometric delay d_T / c.
    pub fn delay(&self) -> f64 {
        self.length / crate::SPEED_OF_LIGHT
    }
}
