//! Browser demo: trace paths around a building, sweep a knife-edge across
//! its shadow boundary, sweep wall reflection against grazing angle.
//!
//! Every operation is a plain function returning a serializable value; the
//! `wasm_bindgen` wrappers hand the same data to JavaScript as JSON.

use mmray::channel::{to_db, ArrayConfig, OfdmGrid};
use mmray::em::{diffraction_gain, fresnel_coefficients, los_gain, roughness_factor, DiffractionGeometry, WaveContext};
use mmray::fixtures::square_building;
use mmray::geometry::DigitalMap;
use mmray::scenario::{ScenarioConfig, Simulator, UeState};
use mmray::tracer::Interaction;
use num_complex::Complex64;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Wall {
    pub p1: [f64; 2],
    pub p2: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct DrawnPath {
    pub kind: String,
    pub signature: String,
    pub ground_bounce: bool,
    /// Horizontal vertices, BS first.
    pub points: Vec<[f64; 2]>,
    pub delay_ns: f64,
    pub power_db: f64,
}

#[derive(Debug, Serialize)]
pub struct Scene {
    pub walls: Vec<Wall>,
    pub trees: Vec<[f64; 3]>,
    pub bounds: [f64; 4],
    pub paths: Vec<DrawnPath>,
    /// Channel power over the OFDM grid (dB).
    pub power_db: f64,
}

/// Paths and channel power for one BS/UE pair on `map` (the 20 m square
/// building when `None`).
pub fn trace_scene(map: Option<DigitalMap>, bs: [f64; 2], ue: [f64; 2], max_bounce: usize) -> mmray::Result<Scene> {
    let map = map.unwrap_or_else(square_building);
    let mut cfg = ScenarioConfig::new("", bs, vec![ue]);
    cfg.tracer.max_bounce = max_bounce;
    cfg.bs.array = ArrayConfig::omni();
    cfg.ofdm = OfdmGrid {
        subcarriers: 64,
        ..OfdmGrid::default()
    };
    let sim = Simulator::with_map(cfg, map)?;
    let state = UeState {
        time: 0.0,
        position: mmray::geometry::Vec2::from(ue).extend(sim.config().ue.height),
        velocity: mmray::geometry::Vec3::ZERO,
    };
    let result = sim.simulate_ue(0, &state)?;
    let paths = result
        .paths
        .iter()
        .zip(&result.gains)
        .map(|(p, g)| {
            let mut points: Vec<[f64; 2]> = Vec::with_capacity(p.vertices.len());
            for (k, v) in p.vertices.iter().enumerate() {
                // Ground bounces are invisible from above.
                let ground = k > 0 && k + 1 < p.vertices.len() && p.interactions[k - 1] == Interaction::Ground;
                if !ground {
                    points.push([v.x, v.y]);
                }
            }
            DrawnPath {
                kind: p.kind.as_str().to_string(),
                signature: p.signature().to_string(),
                ground_bounce: p.has_ground_bounce(),
                points,
                delay_ns: p.delay() * 1e9,
                power_db: to_db(g.norm_sqr()),
            }
        })
        .collect();
    let m = sim.map();
    Ok(Scene {
        walls: m
            .surfaces
            .iter()
            .map(|s| Wall {
                p1: s.p1.into(),
                p2: s.p2.into(),
            })
            .collect(),
        trees: m.trees.iter().map(|t| [t.center.x, t.center.y, t.radius]).collect(),
        bounds: [m.bounds.min.x, m.bounds.min.y, m.bounds.max.x, m.bounds.max.y],
        paths,
        power_db: result.power_db[0],
    })
}

#[derive(Debug, Serialize)]
pub struct EdgeSample {
    /// Observer angle relative to the shadow boundary (degrees, positive into the shadow).
    pub offset_deg: f64,
    /// Fields relative to free space over the same total distance (dB).
    pub total_db: f64,
    pub diffracted_db: f64,
    pub lit: bool,
}

/// Total field behind a knife edge as the observer swings across the
/// incident shadow boundary, `range` metres from the edge on both sides.
pub fn knife_edge_sweep(range: f64, freq_ghz: f64, span_deg: f64, steps: usize) -> mmray::Result<Vec<EdgeSample>> {
    let ctx = WaveContext::new(freq_ghz * 1e9)?;
    let phi_src = 60f64.to_radians();
    let isb = phi_src + std::f64::consts::PI;
    let free = to_db(los_gain(2.0 * range, &ctx)?.norm_sqr());
    let minus_one = Complex64::new(-1.0, 0.0);
    let steps = steps.max(1);
    (0..=steps)
        .map(|i| {
            let offset = -span_deg + 2.0 * span_deg * i as f64 / steps as f64;
            let phi = isb + offset.to_radians();
            let geom = DiffractionGeometry::new(range, range, phi_src, phi, 2.0)?;
            let diffracted = diffraction_gain(&geom, minus_one, minus_one, &ctx)?;
            let weight = if offset < 0.0 {
                1.0
            } else if offset == 0.0 {
                0.5
            } else {
                0.0
            };
            let direct = range * (2.0 - 2.0 * (phi - phi_src).cos()).sqrt();
            let total = diffracted + los_gain(direct, &ctx)? * weight;
            Ok(EdgeSample {
                offset_deg: offset,
                total_db: to_db(total.norm_sqr()) - free,
                diffracted_db: to_db(diffracted.norm_sqr()) - free,
                lit: offset < 0.0,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ReflectionSample {
    pub grazing_deg: f64,
    pub parallel_db: f64,
    pub perpendicular_db: f64,
    /// Specular attenuation from surface roughness (dB).
    pub roughness_db: f64,
}

/// Fresnel reflection magnitudes and roughness loss against grazing angle.
pub fn reflection_sweep(
    permittivity: f64,
    roughness: f64,
    freq_ghz: f64,
    steps: usize,
) -> mmray::Result<Vec<ReflectionSample>> {
    let ctx = WaveContext::new(freq_ghz * 1e9)?;
    let steps = steps.max(1);
    (1..=steps)
        .map(|i| {
            let theta = std::f64::consts::FRAC_PI_2 * i as f64 / steps as f64;
            let (par, perp) = fresnel_coefficients(theta, permittivity)?;
            Ok(ReflectionSample {
                grazing_deg: theta.to_degrees(),
                parallel_db: to_db(par.norm_sqr()),
                perpendicular_db: to_db(perp.norm_sqr()),
                roughness_db: to_db(roughness_factor(theta, roughness, ctx.wavelength).powi(2)),
            })
        })
        .collect()
}

fn js<T: Serialize>(r: mmray::Result<T>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// JSON [`Scene`]; `map_json` may be empty for the default building.
#[wasm_bindgen(js_name = traceScene)]
pub fn trace_scene_js(
    map_json: &str,
    bs_x: f64,
    bs_y: f64,
    ue_x: f64,
    ue_y: f64,
    max_bounce: usize,
) -> Result<String, JsError> {
    let map = if map_json.trim().is_empty() {
        None
    } else {
        Some(DigitalMap::from_json_str(map_json).map_err(|e| JsError::new(&e.to_string()))?)
    };
    js(trace_scene(map, [bs_x, bs_y], [ue_x, ue_y], max_bounce))
}

#[wasm_bindgen(js_name = knifeEdgeSweep)]
pub fn knife_edge_sweep_js(range: f64, freq_ghz: f64, span_deg: f64, steps: usize) -> Result<String, JsError> {
    js(knife_edge_sweep(range, freq_ghz, span_deg, steps))
}

#[wasm_bindgen(js_name = reflectionSweep)]
pub fn reflection_sweep_js(permittivity: f64, roughness: f64, freq_ghz: f64, steps: usize) -> Result<String, JsError> {
    js(reflection_sweep(permittivity, roughness, freq_ghz, steps))
}
