//! Intra-cluster expansion of deterministic paths into stochastic sub-rays.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::em::WaveContext;
use crate::geometry::Vec3;
use crate::tracer::{Interaction, PathKind, PropagationPath};
use crate::{Error, Result};

/// Which end transmits. The BS is the receiver on the uplink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkDirection {
    #[default]
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    /// Sub-rays per expanded path, the specular one included.
    pub sub_rays: usize,
    /// Mean of the exponential delay offsets (s).
    pub delay_spread: f64,
    /// Standard deviation of the Laplacian azimuth offsets (rad; degrees on disk).
    #[serde(rename = "azimuth_spread_deg", with = "crate::degrees")]
    pub azimuth_spread: f64,
    /// Standard deviation of the Laplacian elevation offsets (rad; degrees on disk).
    #[serde(rename = "elevation_spread_deg", with = "crate::degrees")]
    pub elevation_spread: f64,
    /// Set from the scenario seed.
    #[serde(skip)]
    pub master_seed: u64,
    pub link: LinkDirection,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            sub_rays: 20,
            delay_spread: 12e-9,
            azimuth_spread: 10f64.to_radians(),
            elevation_spread: 5f64.to_radians(),
            master_seed: 0,
            link: LinkDirection::Uplink,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sub_rays < 1 {
            return Err(Error::Config("sub_rays must be >= 1".into()));
        }
        for (name, v) in [
            ("delay_spread", self.delay_spread),
            ("azimuth_spread", self.azimuth_spread),
            ("elevation_spread", self.elevation_spread),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Azimuth and elevation of a direction (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Angles {
    pub fn of(v: Vec3) -> Self {
        let (azimuth, elevation) = v.angles();
        Self { azimuth, elevation }
    }

    pub fn unit(self) -> Vec3 {
        Vec3::from_angles(self.azimuth, self.elevation)
    }

    /// Offsets the angles, wrapping azimuth into `(-π, π]` and clamping elevation.
    pub fn offset(self, d_az: f64, d_el: f64) -> Self {
        let mut azimuth = (self.azimuth + d_az).rem_euclid(TAU);
        if azimuth > PI {
            azimuth -= TAU;
        }
        Self {
            azimuth,
            elevation: (self.elevation + d_el).clamp(-FRAC_PI_2, FRAC_PI_2),
        }
    }
}

/// One multipath component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubRay {
    pub gain: Complex64,
    /// Absolute delay (s).
    pub delay: f64,
    /// Direction of arrival at the receiver.
    pub doa: Angles,
    /// Direction of departure at the transmitter.
    pub dod: Angles,
    pub doppler: f64,
    /// Index of the parent path in the UE's path list.
    pub parent: usize,
    pub kind: PathKind,
    /// 0 for the specular ray.
    pub index: usize,
}

impl SubRay {
    pub fn power(&self) -> f64 {
        self.gain.norm_sqr()
    }
}

/// Whether a path is spread into a cluster. LoS and diffraction stay single
/// rays; a ground-bounced LoS is a specular reflection and is expanded.
pub fn is_expanded(path: &PropagationPath) -> bool {
    match path.kind {
        PathKind::Los => path.has_ground_bounce(),
        PathKind::Diffraction => false,
        PathKind::Reflection | PathKind::Scattering => true,
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed of a cluster: a hash of the master seed, the path kind and
/// its interaction sequence. The UE position does not enter, so nearby UEs
/// sharing a path draw the same offsets.
pub fn seed_for(path: &PropagationPath, cfg: &ClusterConfig) -> u64 {
    let mut h = splitmix(cfg.master_seed);
    let mut feed = |v: u64| h = splitmix(h ^ v);
    feed(path.kind as u64 + 1);
    for i in &path.interactions {
        let (tag, id) = match *i {
            Interaction::Wall(id) => (1, id.0),
            Interaction::Ground => (2, 0),
            Interaction::Wedge(id) => (3, id.0),
            Interaction::Tree(id) => (4, id.0),
        };
        feed((tag << 32) | id as u64);
    }
    feed(path.interactions.len() as u64);
    h
}

/// Zero-mean Laplace draw with standard deviation `std`, by inverse CDF.
fn laplace(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let b = std / std::f64::consts::SQRT_2;
    let u: f64 = rng.gen::<f64>() - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Raw intra-cluster draws for one diffuse sub-ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offsets {
    pub delay: f64,
    pub doa: (f64, f64),
    pub dod: (f64, f64),
    pub phase: f64,
}

/// Draws `count` diffuse offsets from the stream `seed`.
pub fn draw_offsets(seed: u64, cfg: &ClusterConfig, count: usize) -> Vec<Offsets> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(1.0 / cfg.delay_spread).expect("validated delay spread");
    (0..count)
        .map(|_| {
            let delay = exp.sample(&mut rng);
            let doa = (
                laplace(&mut rng, cfg.azimuth_spread),
                laplace(&mut rng, cfg.elevation_spread),
            );
            let dod = (
                laplace(&mut rng, cfg.azimuth_spread),
                laplace(&mut rng, cfg.elevation_spread),
            );
            let phase = rng.gen::<f64>() * TAU;
            Offsets { delay, doa, dod, phase }
        })
        .collect()
}

/// Doppler shift `f_c (v·u)/c` for a UE-end unit direction `u`.
pub fn doppler(ue_velocity: Vec3, ue_direction: Vec3, ctx: &WaveContext) -> f64 {
    ctx.carrier_frequency * ue_velocity.dot(ue_direction) / crate::SPEED_OF_LIGHT
}

/// Expands `path` (with base gain from [`crate::em::base_gain`]) into sub-rays.
///
/// Sub-ray 0 is specular: no offsets and the geometric phase `e^{-jk d_T}`.
/// Diffuse sub-rays add an exponential delay, four Laplacian angle offsets
/// and a uniform phase. All share the power equally. Single-ray kinds get
/// the full base gain on one specular ray.
pub fn expand_cluster(
    path: &PropagationPath,
    base_gain: Complex64,
    parent: usize,
    cfg: &ClusterConfig,
    ue_velocity: Vec3,
    ctx: &WaveContext,
) -> Vec<SubRay> {
    let bs = Angles::of(path.bs_direction());
    let ue = Angles::of(path.ue_direction());
    let delay = path.delay();
    let make = |gain: Complex64, delay: f64, bs: Angles, ue: Angles, index: usize| {
        let (doa, dod) = match cfg.link {
            LinkDirection::Uplink => (bs, ue),
            LinkDirection::Downlink => (ue, bs),
        };
        SubRay {
            gain,
            delay,
            doa,
            dod,
            doppler: doppler(ue_velocity, ue.unit(), ctx),
            parent,
            kind: path.kind,
            index,
        }
    };
    let specular_phase = ctx.phasor(path.length);
    if !is_expanded(path) || cfg.sub_rays == 1 {
        return vec![make(base_gain * specular_phase, delay, bs, ue, 0)];
    }
    let share = base_gain / (cfg.sub_rays as f64).sqrt();
    let mut rays = Vec::with_capacity(cfg.sub_rays);
    rays.push(make(share * specular_phase, delay, bs, ue, 0));
    let offsets = draw_offsets(seed_for(path, cfg), cfg, cfg.sub_rays - 1);
    for (i, o) in offsets.iter().enumerate() {
        // Offsets are drawn as (DoA, DoD); map them onto the physical ends.
        let (bs_off, ue_off) = match cfg.link {
            LinkDirection::Uplink => (o.doa, o.dod),
            LinkDirection::Downlink => (o.dod, o.doa),
        };
        rays.push(make(
            share * Complex64::from_polar(1.0, o.phase),
            delay + o.delay,
            bs.offset(bs_off.0, bs_off.1),
            ue.offset(ue_off.0, ue_off.1),
            i + 1,
        ));
    }
    rays
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceId;

    fn reflection(y: f64) -> PropagationPath {
        PropagationPath::new(
            PathKind::Reflection,
            vec![Interaction::Wall(SurfaceId(3))],
            vec![
                Vec3::new(0.0, 0.0, 8.0),
                Vec3::new(30.0, 10.0, 5.0),
                Vec3::new(60.0, y, 1.5),
            ],
        )
    }

    #[test]
    fn single_sub_ray_keeps_full_power() {
        let ctx = WaveContext::new(28e9).unwrap();
        let cfg = ClusterConfig {
            sub_rays: 1,
            ..Default::default()
        };
        let rays = expand_cluster(&reflection(0.0), Complex64::new(1e-5, 0.0), 0, &cfg, Vec3::ZERO, &ctx);
        assert_eq!(rays.len(), 1);
        assert!((rays[0].power() - 1e-10).abs() < 1e-24);
    }

    #[test]
    fn power_split_is_exact() {
        let ctx = WaveContext::new(28e9).unwrap();
        for n in [2, 7, 20] {
            let cfg = ClusterConfig {
                sub_rays: n,
                ..Default::default()
            };
            let base = Complex64::new(3e-6, -2e-6);
            let rays = expand_cluster(&reflection(0.0), base, 0, &cfg, Vec3::ZERO, &ctx);
            let total: f64 = rays.iter().map(SubRay::power).sum();
            assert!((total / base.norm_sqr() - 1.0).abs() < 1e-12);
            assert!(rays
                .iter()
                .all(|r| r.delay >= reflection(0.0).delay() && r.doppler == 0.0));
        }
    }

    #[test]
    fn seeds_depend_on_signature_only() {
        let cfg = ClusterConfig::default();
        assert_eq!(seed_for(&reflection(0.0), &cfg), seed_for(&reflection(0.4), &cfg));
        let mut other = reflection(0.0);
        other.interactions = vec![Interaction::Wall(SurfaceId(4))];
        assert_ne!(seed_for(&reflection(0.0), &cfg), seed_for(&other, &cfg));
        let reseeded = ClusterConfig { master_seed: 1, ..cfg };
        assert_ne!(seed_for(&reflection(0.0), &cfg), seed_for(&reflection(0.0), &reseeded));
    }

    #[test]
    fn mean_delay_offset_matches_spread() {
        let cfg = ClusterConfig::default();
        let draws = draw_offsets(42, &cfg, 100_000);
        let mean = draws.iter().map(|o| o.delay).sum::<f64>() / draws.len() as f64;
        assert!((mean / 12e-9 - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn doppler_bounded_by_speed() {
        let ctx = WaveContext::new(28e9).unwrap();
        let v = Vec3::new(2.0, 0.0, 0.0);
        let cfg = ClusterConfig::default();
        let rays = expand_cluster(&reflection(0.0), Complex64::new(1.0, 0.0), 0, &cfg, v, &ctx);
        let bound = ctx.carrier_frequency * 2.0 / crate::SPEED_OF_LIGHT;
        assert!(rays.iter().all(|r| r.doppler.abs() <= bound + 1e-9));
        assert!((doppler(v, Vec3::new(1.0, 0.0, 0.0), &ctx) - bound).abs() < 1e-12);
    }

    #[test]
    fn angle_offsets_wrap_and_clamp() {
        let a = Angles {
            azimuth: 3.0,
            elevation: 1.5,
        };
        let b = a.offset(0.5, 0.2);
        assert!(b.azimuth < -2.7 && b.azimuth > -PI);
        assert_eq!(b.elevation, FRAC_PI_2);
    }
}
