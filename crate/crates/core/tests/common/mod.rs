#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mmray::cluster::{Angles, SubRay};
use mmray::em::{diffraction_gain, los_gain, DiffractionGeometry, WaveContext};
use mmray::fixtures::{random_clear_point, random_walls};
use mmray::geometry::{SurfaceId, Vec2, Vec3};
use mmray::oracle::enumerate_image_paths;
use mmray::tracer::PathKind;
use mmray::tracer::{associate_paths, fsbr_trace, refine_beams, TracerConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at α = 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

pub fn exp_cdf(mean: f64) -> impl Fn(f64) -> f64 {
    move |x| if x < 0.0 { 0.0 } else { 1.0 - (-x / mean).exp() }
}

/// Laplace CDF with zero mean and standard deviation `std`.
pub fn laplace_cdf(std: f64) -> impl Fn(f64) -> f64 {
    let b = std / std::f64::consts::SQRT_2;
    move |x| {
        if x < 0.0 {
            0.5 * (x / b).exp()
        } else {
            1.0 - 0.5 * (-x / b).exp()
        }
    }
}

/// A bare sub-ray arriving and leaving along +x.
pub fn ray(gain: Complex64, delay: f64, doppler: f64) -> SubRay {
    let boresight = Angles {
        azimuth: 0.0,
        elevation: 0.0,
    };
    SubRay {
        gain,
        delay,
        doa: boresight,
        dod: boresight,
        doppler,
        parent: 0,
        kind: PathKind::Los,
        index: 0,
    }
}

/// Knife-edge (`n = 2`) with source and observer `range` metres from the
/// edge; the source sits at `phi_src` from the screen face. Returns the total
/// field at observer angle `phi`: diffraction plus LoS on the lit side.
pub fn knife_edge_field(ctx: &WaveContext, range: f64, phi_src: f64, phi: f64) -> Complex64 {
    let geom = DiffractionGeometry::new(range, range, phi_src, phi, 2.0).unwrap();
    let minus_one = Complex64::new(-1.0, 0.0);
    let diffracted = diffraction_gain(&geom, minus_one, minus_one, ctx).unwrap();
    let isb = phi_src + std::f64::consts::PI;
    // On the boundary itself the UTD term is the mean of its one-sided
    // limits, so the GO field counts half.
    let weight = match phi.partial_cmp(&isb).unwrap() {
        std::cmp::Ordering::Less => 1.0,
        std::cmp::Ordering::Equal => 0.5,
        std::cmp::Ordering::Greater => 0.0,
    };
    let d = range * (2.0 - 2.0 * (phi - phi_src).cos()).sqrt();
    diffracted + los_gain(d, ctx).unwrap() * weight
}

pub fn db(v: Complex64) -> f64 {
    20.0 * v.norm().log10()
}

/// File name to contents for every file under `dir`, skipping `skip`.
pub fn snapshot(dir: &Path, skip: &[&str]) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            if !skip.contains(&rel.as_str()) {
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// FSBR against image enumeration on random wall scenes.
pub struct Tally {
    pub oracle: usize,
    pub found: usize,
    pub misses: Vec<(u64, usize, Vec<SurfaceId>)>,
    pub extras: usize,
    pub worst_length: f64,
    pub worst_angle: f64,
}

pub fn oracle_tally(scenes: u64, drops: usize) -> Tally {
    let mut tally = Tally {
        oracle: 0,
        found: 0,
        misses: vec![],
        extras: 0,
        worst_length: 0.0,
        worst_angle: 0.0,
    };
    for scene in 0..scenes {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + scene);
        let count = rng.gen_range(5..=20);
        let map = random_walls(scene, count, 100.0);
        let bs = random_clear_point(&mut rng, &map, 100.0, 0.1);
        let mut cfg = TracerConfig::new(Vec3::new(bs.x, bs.y, 10.0));
        cfg.max_bounce = 1 + (scene % 3) as usize;
        let mut rays = fsbr_trace(&map, &cfg);
        let extra = refine_beams(&map, &cfg, &rays);
        rays.extend(extra);
        for drop in 0..drops {
            let ue = random_clear_point(&mut rng, &map, 100.0, 0.1);
            let found = associate_paths(&rays, Vec3::new(ue.x, ue.y, 1.5), &map, &cfg);
            let truth = enumerate_image_paths(&map, bs, ue, cfg.max_bounce).unwrap();
            tally.oracle += truth.len();
            for t in &truth {
                match found.iter().find(|p| p.surfaces == t.surfaces) {
                    Some(p) => {
                        tally.found += 1;
                        let d = (p.horizontal_length()
                            - t.vertices.windows(2).map(|w| w[0].distance(w[1])).sum::<f64>())
                        .abs();
                        tally.worst_length = tally.worst_length.max(d);
                        let angle = |v: &[Vec2]| (v[1] - v[0]).angle();
                        let da = (angle(&p.vertices) - angle(&t.vertices)).abs();
                        let n = p.vertices.len();
                        let tn = t.vertices.len();
                        let db = ((p.vertices[n - 2] - p.vertices[n - 1]).angle()
                            - (t.vertices[tn - 2] - t.vertices[tn - 1]).angle())
                        .abs();
                        tally.worst_angle = tally.worst_angle.max(da).max(db);
                    }
                    None => tally.misses.push((scene, drop, t.surfaces.clone())),
                }
            }
            tally.extras += found
                .iter()
                .filter(|p| !truth.iter().any(|t| t.surfaces == p.surfaces))
                .count();
        }
    }
    tally
}
