//! Scenario configuration, UE trajectories, the per-UE pipeline and the run
//! directory layout.
//!
//! A run directory holds:
//!
//! - `paths/ue_NNNN.jsonl`: one [`PathRecord`] per line
//! - `subrays.csv`: every retained sub-ray
//! - `tensors/ue_NNNN.bin` (or `.csv`) plus a `.json` sidecar
//! - `jadpp.csv`: non-empty JADPP bins
//! - `power.csv`: channel power per UE and symbol
//! - `scenario.json`: the resolved configuration
//! - `report.json`: timings, path counts and failures

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{
    channel_power, jadpp_in, synthesize_with, ArrayConfig, ChannelTensor, ElementPattern, OfdmGrid, SynthesisOptions,
};
use crate::cluster::{expand_cluster, ClusterConfig, LinkDirection, SubRay};
use crate::em::{base_gain, Polarization, WaveContext};
use crate::geometry::{load_map, los_visible, DigitalMap, Vec2, Vec3};
use crate::tracer::{
    associate_paths, collect_diffraction_candidates, collect_scattering_candidates, fsbr_trace, lift_to_3d,
    refine_beams, Interaction, Path2d, PathKind, PropagationPath, RayRecord, TracerConfig,
};
use crate::{Error, Result};

/// Sub-rays this far below the strongest one are dropped (dB).
pub const PRUNE_DB: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Map file, relative to the scenario file.
    pub map: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_carrier")]
    pub carrier_frequency: f64,
    #[serde(default)]
    pub polarization: Polarization,
    pub bs: BsSpec,
    pub ue: UeSpec,
    #[serde(default)]
    pub tracer: TracerSection,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub ofdm: OfdmGrid,
    #[serde(default)]
    pub synthesis: SynthesisOptions,
    /// Reported alongside channel power; does not scale any gain.
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub jadpp: JadppSection,
    /// Directory the map path is resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_carrier() -> f64 {
    28e9
}

fn default_tx_power() -> f64 {
    30.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsSpec {
    pub position: [f64; 2],
    #[serde(default = "default_bs_height")]
    pub height: f64,
    #[serde(default = "default_bs_array")]
    pub array: ArrayConfig,
}

fn default_bs_height() -> f64 {
    8.0
}

fn default_bs_array() -> ArrayConfig {
    ArrayConfig::patch_upa(16, 16, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeSpec {
    #[serde(default = "default_ue_height")]
    pub height: f64,
    #[serde(default = "ArrayConfig::omni")]
    pub array: ArrayConfig,
    /// Added to the array azimuth; irrelevant for an omni element.
    #[serde(default)]
    pub orientation_deg: f64,
    pub trajectory: TrajectorySpec,
}

fn default_ue_height() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub waypoints: Vec<[f64; 2]>,
    /// m/s
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Time between samples (s).
    #[serde(default = "default_interval")]
    pub sample_interval: f64,
}

fn default_speed() -> f64 {
    2.0
}

fn default_interval() -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TracerSection {
    pub max_bounce: usize,
    pub angular_spacing_deg: f64,
    pub capture_slack: f64,
    pub angle_offset_deg: f64,
    /// Extra rays between grid neighbours whose wall sequences differ.
    pub refine: bool,
}

impl Default for TracerSection {
    fn default() -> Self {
        Self {
            max_bounce: 3,
            angular_spacing_deg: 0.1,
            capture_slack: 2.0,
            angle_offset_deg: 0.0,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub paths: bool,
    pub subrays: bool,
    pub tensor: bool,
    pub jadpp: bool,
    pub power: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            paths: true,
            subrays: true,
            tensor: true,
            jadpp: true,
            power: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JadppSection {
    pub azimuth_bins: usize,
    pub delay_bins: usize,
    /// Delay axis length after the earliest sub-ray (ns).
    pub delay_window_ns: f64,
}

impl Default for JadppSection {
    fn default() -> Self {
        Self {
            azimuth_bins: 180,
            delay_bins: 100,
            delay_window_ns: 1000.0,
        }
    }
}

impl ScenarioConfig {
    /// A scenario with Table-1 style defaults for a given map, BS and route.
    pub fn new(map: impl Into<PathBuf>, bs: [f64; 2], waypoints: Vec<[f64; 2]>) -> Self {
        Self {
            map: map.into(),
            seed: 0,
            carrier_frequency: default_carrier(),
            polarization: Polarization::Vertical,
            bs: BsSpec {
                position: bs,
                height: default_bs_height(),
                array: default_bs_array(),
            },
            ue: UeSpec {
                height: default_ue_height(),
                array: ArrayConfig::omni(),
                orientation_deg: 0.0,
                trajectory: TrajectorySpec {
                    waypoints,
                    speed: default_speed(),
                    sample_interval: default_interval(),
                },
            },
            tracer: TracerSection::default(),
            cluster: ClusterConfig::default(),
            ofdm: OfdmGrid::default(),
            synthesis: SynthesisOptions::default(),
            tx_power_dbm: default_tx_power(),
            outputs: Outputs::default(),
            jadpp: JadppSection::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn map_path(&self) -> PathBuf {
        self.base_dir.join(&self.map)
    }

    pub fn bs_position(&self) -> Vec3 {
        Vec2::from(self.bs.position).extend(self.bs.height)
    }

    pub fn tracer_config(&self) -> TracerConfig {
        TracerConfig {
            bs_position: self.bs_position(),
            max_bounce: self.tracer.max_bounce,
            angular_spacing: self.tracer.angular_spacing_deg.to_radians(),
            capture_slack: self.tracer.capture_slack,
            angle_offset: self.tracer.angle_offset_deg.to_radians(),
        }
    }

    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            master_seed: self.seed,
            ..self.cluster
        }
    }

    /// `(rx, tx)` arrays for the configured link direction.
    pub fn arrays(&self) -> (ArrayConfig, ArrayConfig) {
        let mut ue = self.ue.array;
        if ue.pattern != ElementPattern::Omni {
            ue.azimuth += self.ue.orientation_deg.to_radians();
        }
        match self.cluster.link {
            LinkDirection::Uplink => (self.bs.array, ue),
            LinkDirection::Downlink => (ue, self.bs.array),
        }
    }

    pub fn validate(&self) -> Result<()> {
        WaveContext::new(self.carrier_frequency)?;
        self.tracer_config().validate()?;
        self.cluster.validate()?;
        self.ofdm.validate()?;
        self.bs.array.validate()?;
        self.ue.array.validate()?;
        if !(self.ue.height > 0.0 && self.ue.height.is_finite()) {
            return Err(Error::Config(format!(
                "UE height must be positive, got {}",
                self.ue.height
            )));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(Error::Config("TX power must be finite".into()));
        }
        let j = &self.jadpp;
        if j.azimuth_bins < 1 || j.delay_bins < 1 || !(j.delay_window_ns > 0.0) {
            return Err(Error::Config(
                "JADPP needs bins >= 1 and a positive delay window".into(),
            ));
        }
        let t = &self.ue.trajectory;
        if !(t.sample_interval > 0.0 && t.sample_interval.is_finite()) {
            return Err(Error::Config("trajectory sample interval must be positive".into()));
        }
        Ok(())
    }
}

/// UE position and velocity at one trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeState {
    pub time: f64,
    pub position: Vec3,
    pub velocity: Vec3,
}

/// Samples a polyline every `speed · interval` metres at height `height`.
///
/// A sample on a corner takes the heading of the outgoing leg. A single
/// waypoint gives one stationary sample.
pub fn trajectory_from_waypoints(points: &[Vec2], height: f64, speed: f64, interval: f64) -> Result<Vec<UeState>> {
    if points.is_empty() {
        return Err(Error::Config("trajectory needs at least one waypoint".into()));
    }
    if points.iter().any(|p| !p.is_finite()) || !speed.is_finite() || !(interval > 0.0) {
        return Err(Error::Config(
            "trajectory values must be finite with a positive interval".into(),
        ));
    }
    if points.len() == 1 {
        return Ok(vec![UeState {
            time: 0.0,
            position: points[0].extend(height),
            velocity: Vec3::ZERO,
        }]);
    }
    let legs: Vec<(Vec2, Vec2, f64)> = points
        .windows(2)
        .map(|w| (w[0], w[1], w[0].distance(w[1])))
        .filter(|l| l.2 > 0.0)
        .collect();
    let total: f64 = legs.iter().map(|l| l.2).sum();
    if legs.is_empty() {
        return Err(Error::Config("trajectory polyline has zero length".into()));
    }
    if !(speed > 0.0) {
        return Err(Error::Config(format!("trajectory speed must be positive, got {speed}")));
    }
    let step = speed * interval;
    let count = (total / step + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(count);
    let (mut leg, mut start) = (0, 0.0);
    for k in 0..count {
        let s = (k as f64 * step).min(total);
        while leg + 1 < legs.len() && s >= start + legs[leg].2 - 1e-9 {
            start += legs[leg].2;
            leg += 1;
        }
        let (a, b, len) = legs[leg];
        let dir = (b - a) / len;
        let along = (s - start).clamp(0.0, len);
        out.push(UeState {
            time: k as f64 * interval,
            position: (a + dir * along).extend(height),
            velocity: dir.extend(0.0) * speed,
        });
    }
    Ok(out)
}

/// Wall-clock seconds spent in each per-UE stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub paths: f64,
    pub gains: f64,
    pub clusters: f64,
    pub synthesis: f64,
}

impl StageTimings {
    fn add(&mut self, o: &StageTimings) {
        self.paths += o.paths;
        self.gains += o.gains;
        self.clusters += o.clusters;
        self.synthesis += o.synthesis;
    }
}

/// Merged 3D paths of one UE with their gains (without `e^{-jkd}`).
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub los: bool,
    pub paths: Vec<PropagationPath>,
    pub gains: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeResult {
    pub index: usize,
    pub state: UeState,
    pub los: bool,
    pub paths: Vec<PropagationPath>,
    pub gains: Vec<Complex64>,
    pub subrays: Vec<SubRay>,
    pub tensor: ChannelTensor,
    /// Channel power per OFDM symbol (dB).
    pub power_db: Vec<f64>,
    pub timings: StageTimings,
}

/// A loaded map with the BS trace done once, ready to serve any UE.
pub struct Simulator {
    cfg: ScenarioConfig,
    map: DigitalMap,
    ctx: WaveContext,
    tracer: TracerConfig,
    rays: Vec<RayRecord>,
    trace_seconds: f64,
}

impl Simulator {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        let map = load_map(cfg.map_path())?;
        Self::with_map(cfg, map)
    }

    pub fn with_map(cfg: ScenarioConfig, map: DigitalMap) -> Result<Self> {
        cfg.validate()?;
        let bs = Vec2::from(cfg.bs.position);
        if !map.bounds.contains(bs) {
            return Err(Error::Config("BS lies outside the map bounds".into()));
        }
        let ctx = WaveContext::new(cfg.carrier_frequency)?;
        let tracer = cfg.tracer_config();
        let clock = Stopwatch::start();
        let mut rays = fsbr_trace(&map, &tracer);
        if cfg.tracer.refine {
            let extra = refine_beams(&map, &tracer, &rays);
            rays.extend(extra);
        }
        let trace_seconds = clock.seconds();
        info!("traced {} rays in {:.3} s", rays.len(), trace_seconds);
        Ok(Self {
            cfg,
            map,
            ctx,
            tracer,
            rays,
            trace_seconds,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn map(&self) -> &DigitalMap {
        &self.map
    }

    pub fn rays(&self) -> &[RayRecord] {
        &self.rays
    }

    pub fn wave(&self) -> &WaveContext {
        &self.ctx
    }

    pub fn ue_states(&self) -> Result<Vec<UeState>> {
        let t = &self.cfg.ue.trajectory;
        let points: Vec<Vec2> = t.waypoints.iter().map(|&p| p.into()).collect();
        trajectory_from_waypoints(&points, self.cfg.ue.height, t.speed, t.sample_interval)
    }

    /// LoS (when visible), reflections, diffraction and scattering, lifted
    /// to 3D, deduplicated by signature.
    pub fn trace_ue(&self, state: &UeState) -> Result<PathSet> {
        let ue = state.position;
        if !self.map.bounds.contains(ue.xy()) {
            return Err(Error::Config(format!(
                "UE at ({}, {}) lies outside the map",
                ue.x, ue.y
            )));
        }
        let bs = self.tracer.bs_position;
        let (bs_h, ue_h) = (bs.z, ue.z);
        let mut merged = Vec::new();
        let los = los_visible(bs.xy(), ue.xy(), &self.map);
        if los {
            let direct = Path2d {
                kind: PathKind::Los,
                surfaces: vec![],
                vertices: vec![bs.xy(), ue.xy()],
            };
            merged.extend(lift_to_3d(&direct, &self.map, bs_h, ue_h));
        }
        for path in associate_paths(&self.rays, ue, &self.map, &self.tracer) {
            merged.extend(lift_to_3d(&path, &self.map, bs_h, ue_h));
        }
        merged.extend(collect_diffraction_candidates(&self.map, bs, ue));
        merged.extend(collect_scattering_candidates(&self.map, bs, ue));

        let mut seen = HashSet::new();
        merged.retain(|p| seen.insert(p.signature()));
        let gains = merged
            .iter()
            .map(|p| base_gain(p, &self.map, &self.ctx, self.cfg.polarization))
            .collect::<Result<Vec<_>>>()?;
        Ok(PathSet {
            los,
            paths: merged,
            gains,
        })
    }

    pub fn simulate_ue(&self, index: usize, state: &UeState) -> Result<UeResult> {
        let mut timings = StageTimings::default();
        let clock = Stopwatch::start();
        let set = self.trace_ue(state)?;
        timings.paths = clock.seconds();

        let clock = Stopwatch::start();
        let cluster = self.cfg.cluster_config();
        let mut subrays: Vec<SubRay> = set
            .paths
            .iter()
            .zip(&set.gains)
            .enumerate()
            .flat_map(|(i, (p, &g))| expand_cluster(p, g, i, &cluster, state.velocity, &self.ctx))
            .collect();
        let strongest = subrays.iter().map(SubRay::power).fold(0.0, f64::max);
        let floor = strongest * 10f64.powf(-PRUNE_DB / 10.0);
        subrays.retain(|r| r.power() > 0.0 && r.power() >= floor);
        timings.clusters = clock.seconds();

        let clock = Stopwatch::start();
        let (rx, tx) = self.cfg.arrays();
        let tensor = synthesize_with(&subrays, &rx, &tx, &self.cfg.ofdm, &self.ctx, self.cfg.synthesis);
        let power_db = channel_power(&tensor);
        timings.synthesis = clock.seconds();
        debug!(
            "UE {index}: {} paths, {} sub-rays, {:.2} dB",
            set.paths.len(),
            subrays.len(),
            power_db[0]
        );
        Ok(UeResult {
            index,
            state: *state,
            los: set.los,
            paths: set.paths,
            gains: set.gains,
            subrays,
            tensor,
            power_db,
            timings,
        })
    }

    /// The full pipeline for every trajectory sample, written to `out`.
    pub fn run(&self, out: &Path, opts: &RunOptions) -> Result<RunReport> {
        self.execute(out, opts, false)
    }

    /// Paths only: `paths/` and `scenario.json`.
    pub fn trace(&self, out: &Path, opts: &RunOptions) -> Result<RunReport> {
        self.execute(out, opts, true)
    }

    fn execute(&self, out: &Path, opts: &RunOptions, paths_only: bool) -> Result<RunReport> {
        let clock = Stopwatch::start();
        let states = self.ue_states()?;
        let outputs = if paths_only {
            Outputs {
                paths: true,
                subrays: false,
                tensor: false,
                jadpp: false,
                power: false,
            }
        } else {
            self.cfg.outputs
        };
        let mut writer = RunWriter::create(out, outputs, opts, &self.cfg)?;
        let mut report = RunReport {
            ues: states.len(),
            trace_seconds: self.trace_seconds,
            rays: self.rays.len(),
            ..RunReport::default()
        };
        let chunk = 4 * worker_count(opts.threads);
        for (c, batch) in states.chunks(chunk).enumerate() {
            let first = c * chunk;
            let results = self.batch(first, batch, opts.threads, paths_only)?;
            for (i, res) in results.into_iter().enumerate() {
                let index = first + i;
                match res {
                    Ok(done) => {
                        report.count(&done);
                        writer.write(&done, &self.cfg, &self.ctx)?;
                    }
                    Err(e) => {
                        warn!("UE {index} aborted: {e}");
                        report.failed.push(FailedUe {
                            ue: index,
                            error: e.to_string(),
                        });
                    }
                }
            }
        }
        writer.finish()?;
        report.partial = !report.failed.is_empty();
        report.total_seconds = clock.seconds();
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(&out.join(REPORT_FILE), text.as_bytes())?;
        info!(
            "{} UEs ({} failed) in {:.2} s",
            report.ues,
            report.failed.len(),
            report.total_seconds
        );
        Ok(report)
    }

    fn batch(
        &self,
        first: usize,
        states: &[UeState],
        threads: Option<usize>,
        paths_only: bool,
    ) -> Result<Vec<Result<Done>>> {
        let one = |(i, s): (usize, &UeState)| -> Result<Done> {
            if paths_only {
                let set = self.trace_ue(s)?;
                Ok(Done::Paths(first + i, set))
            } else {
                self.simulate_ue(first + i, s).map(|r| Done::Full(Box::new(r)))
            }
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(|| states.par_iter().enumerate().map(one).collect()))
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = threads;
            Ok(states.iter().enumerate().map(one).collect())
        }
    }
}

fn worker_count(threads: Option<usize>) -> usize {
    threads
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Wall-clock timer for the stage timings. The bare wasm target has no
/// clock, so it reports zero there.
struct Stopwatch {
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
        return 0.0;
    }
}

enum Done {
    Paths(usize, PathSet),
    Full(Box<UeResult>),
}

/// Tensor file encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorFormat {
    /// Raw little-endian complex64, `[s][n][rx][tx]`.
    #[default]
    Bin,
    /// One `s,n,rx,tx,re,im` row per entry.
    Csv,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub force: bool,
    pub format: TensorFormat,
    /// Worker cap; `None` uses every core.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FailedUe {
    pub ue: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathCounts {
    pub los: usize,
    pub reflection: usize,
    pub diffraction: usize,
    pub scattering: usize,
    pub ground_bounce: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub ues: usize,
    pub rays: usize,
    pub trace_seconds: f64,
    pub total_seconds: f64,
    /// Summed over UEs, so larger than wall-clock when run in parallel.
    pub stages: StageTimings,
    pub paths: PathCounts,
    pub subrays: usize,
    pub failed: Vec<FailedUe>,
    pub partial: bool,
}

impl RunReport {
    fn count(&mut self, done: &Done) {
        let paths = match done {
            Done::Paths(_, set) => &set.paths,
            Done::Full(r) => {
                self.stages.add(&r.timings);
                self.subrays += r.subrays.len();
                &r.paths
            }
        };
        for p in paths {
            match p.kind {
                PathKind::Los => self.paths.los += 1,
                PathKind::Reflection => self.paths.reflection += 1,
                PathKind::Diffraction => self.paths.diffraction += 1,
                PathKind::Scattering => self.paths.scattering += 1,
            }
            if p.has_ground_bounce() {
                self.paths.ground_bounce += 1;
            }
        }
    }
}

/// One line of a `paths/ue_NNNN.jsonl` dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub ue: usize,
    pub index: usize,
    pub kind: PathKind,
    pub signature: String,
    pub interactions: Vec<Interaction>,
    pub vertices: Vec<[f64; 3]>,
    pub length: f64,
    pub delay: f64,
    /// Path gain without the propagation phasor, `[re, im]`.
    pub gain: [f64; 2],
    pub power_db: f64,
}

impl PathRecord {
    pub fn new(ue: usize, index: usize, path: &PropagationPath, gain: Complex64) -> Self {
        Self {
            ue,
            index,
            kind: path.kind,
            signature: path.signature().to_string(),
            interactions: path.interactions.clone(),
            vertices: path.vertices.iter().map(|&v| v.into()).collect(),
            length: path.length,
            delay: path.delay(),
            gain: [gain.re, gain.im],
            power_db: crate::channel::to_db(gain.norm_sqr()),
        }
    }
}

/// Tensor sidecar written next to every tensor file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub ue: usize,
    /// `[symbols, subcarriers, rx, tx]`
    pub dims: [usize; 4],
    pub format: TensorFormat,
    pub dtype: String,
    pub delay_reference: f64,
    pub subcarrier_spacing: f64,
    pub carrier_frequency: f64,
}

pub const PATHS_DIR: &str = "paths";
pub const TENSORS_DIR: &str = "tensors";
pub const SUBRAYS_FILE: &str = "subrays.csv";
pub const JADPP_FILE: &str = "jadpp.csv";
pub const POWER_FILE: &str = "power.csv";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const REPORT_FILE: &str = "report.json";

const SUBRAYS_HEADER: &str =
    "ue,parent,index,kind,delay_s,doa_az_deg,doa_el_deg,dod_az_deg,dod_el_deg,doppler_hz,gain_re,gain_im,power_db";
const JADPP_HEADER: &str = "ue,azimuth_bin,delay_bin,azimuth_deg,excess_delay_ns,power_db";
const POWER_HEADER: &str = "ue,time_s,x,y,z,los,paths,symbol,power_db,rx_power_dbm";

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Fails if `out` already holds any of `names`, unless `force` is set, in
/// which case they are removed first.
pub fn claim_outputs(out: &Path, names: &[&str], force: bool) -> Result<()> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    for name in names {
        let path = out.join(name);
        if !path.exists() {
            continue;
        }
        if !force {
            return Err(Error::Exists(path.display().to_string()));
        }
        if path.is_dir() {
            fs::remove_dir_all(&path).map_err(io_err(&path))?;
        } else {
            fs::remove_file(&path).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

struct Csv {
    path: PathBuf,
    file: BufWriter<fs::File>,
}

impl Csv {
    fn open(path: PathBuf, header: &str) -> Result<Self> {
        let mut file = create(&path)?;
        writeln!(file, "{header}").map_err(io_err(&path))?;
        Ok(Self { path, file })
    }

    fn write(&mut self, text: &str) -> Result<()> {
        self.file.write_all(text.as_bytes()).map_err(io_err(&self.path))
    }

    fn finish(mut self) -> Result<()> {
        self.file.flush().map_err(io_err(&self.path))
    }
}

struct RunWriter {
    out: PathBuf,
    outputs: Outputs,
    format: TensorFormat,
    subrays: Option<Csv>,
    jadpp: Option<Csv>,
    power: Option<Csv>,
}

impl RunWriter {
    fn create(out: &Path, outputs: Outputs, opts: &RunOptions, cfg: &ScenarioConfig) -> Result<Self> {
        claim_outputs(
            out,
            &[
                PATHS_DIR,
                TENSORS_DIR,
                SUBRAYS_FILE,
                JADPP_FILE,
                POWER_FILE,
                SCENARIO_FILE,
                REPORT_FILE,
            ],
            opts.force,
        )?;
        let mut resolved = cfg.clone();
        resolved.map = cfg.map_path();
        resolved.outputs = outputs;
        write_file(&out.join(SCENARIO_FILE), resolved.to_json_string().as_bytes())?;
        for (on, dir) in [(outputs.paths, PATHS_DIR), (outputs.tensor, TENSORS_DIR)] {
            if on {
                let d = out.join(dir);
                fs::create_dir_all(&d).map_err(io_err(&d))?;
            }
        }
        let open = |on: bool, name: &str, header: &str| on.then(|| Csv::open(out.join(name), header)).transpose();
        Ok(Self {
            out: out.to_path_buf(),
            outputs,
            format: opts.format,
            subrays: open(outputs.subrays, SUBRAYS_FILE, SUBRAYS_HEADER)?,
            jadpp: open(outputs.jadpp, JADPP_FILE, JADPP_HEADER)?,
            power: open(outputs.power, POWER_FILE, POWER_HEADER)?,
        })
    }

    fn write(&mut self, done: &Done, cfg: &ScenarioConfig, ctx: &WaveContext) -> Result<()> {
        let (index, paths, gains) = match done {
            Done::Paths(i, set) => (*i, &set.paths, &set.gains),
            Done::Full(r) => (r.index, &r.paths, &r.gains),
        };
        if self.outputs.paths {
            let path = self.out.join(PATHS_DIR).join(format!("ue_{index:04}.jsonl"));
            let mut text = String::new();
            for (i, (p, g)) in paths.iter().zip(gains).enumerate() {
                text.push_str(&serde_json::to_string(&PathRecord::new(index, i, p, *g)).expect("record serializes"));
                text.push('\n');
            }
            write_file(&path, text.as_bytes())?;
        }
        let Done::Full(r) = done else {
            return Ok(());
        };
        if let Some(csv) = &mut self.subrays {
            csv.write(&subray_rows(r.index, &r.subrays))?;
        }
        if self.outputs.tensor {
            write_tensor(&self.out.join(TENSORS_DIR), r.index, &r.tensor, self.format, ctx)?;
        }
        if let Some(csv) = &mut self.jadpp {
            let rays: Vec<Binned> = r.subrays.iter().map(Binned::of).collect();
            csv.write(&jadpp_rows(r.index, &rays, &cfg.jadpp)?)?;
        }
        if let Some(csv) = &mut self.power {
            csv.write(&power_rows(
                r.index,
                &r.state,
                r.los,
                r.paths.len(),
                &r.power_db,
                cfg.tx_power_dbm,
            ))?;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        for csv in [self.subrays, self.jadpp, self.power].into_iter().flatten() {
            csv.finish()?;
        }
        Ok(())
    }
}

fn subray_rows(ue: usize, subrays: &[SubRay]) -> String {
    let mut s = String::new();
    for r in subrays {
        let _ = writeln!(
            s,
            "{ue},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.parent,
            r.index,
            r.kind,
            r.delay,
            r.doa.azimuth.to_degrees(),
            r.doa.elevation.to_degrees(),
            r.dod.azimuth.to_degrees(),
            r.dod.elevation.to_degrees(),
            r.doppler,
            r.gain.re,
            r.gain.im,
            crate::channel::to_db(r.power())
        );
    }
    s
}

/// Sub-ray fields needed for a JADPP, as stored in `subrays.csv`, so a
/// run and a later `jadpp` pass bin identical numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Binned {
    delay: f64,
    azimuth_deg: f64,
    gain: Complex64,
}

impl Binned {
    fn of(r: &SubRay) -> Self {
        Self {
            delay: r.delay,
            azimuth_deg: r.doa.azimuth.to_degrees(),
            gain: r.gain,
        }
    }

    fn subray(&self) -> SubRay {
        let flat = crate::cluster::Angles {
            azimuth: 0.0,
            elevation: 0.0,
        };
        SubRay {
            gain: self.gain,
            delay: self.delay,
            doa: crate::cluster::Angles {
                azimuth: self.azimuth_deg.to_radians(),
                elevation: 0.0,
            },
            dod: flat,
            doppler: 0.0,
            parent: 0,
            kind: PathKind::Los,
            index: 0,
        }
    }
}

fn jadpp_rows(ue: usize, rays: &[Binned], cfg: &JadppSection) -> Result<String> {
    let subrays: Vec<SubRay> = rays.iter().map(Binned::subray).collect();
    let start = subrays.iter().map(|r| r.delay).fold(f64::INFINITY, f64::min);
    if !start.is_finite() {
        return Ok(String::new());
    }
    let map = jadpp_in(
        &subrays,
        cfg.azimuth_bins,
        cfg.delay_bins,
        start,
        start + cfg.delay_window_ns * 1e-9,
    )?;
    let mut s = String::new();
    for a in 0..map.azimuth_bins {
        for d in 0..map.delay_bins {
            if map.get(a, d) > 0.0 {
                let az = (map.azimuth_edge(a) + map.azimuth_edge(a + 1)) / 2.0;
                let delay = (map.delay_edge(d) + map.delay_edge(d + 1)) / 2.0 - start;
                let _ = writeln!(s, "{ue},{a},{d},{},{},{}", az.to_degrees(), delay * 1e9, map.db(a, d));
            }
        }
    }
    Ok(s)
}

fn power_rows(ue: usize, state: &UeState, los: bool, paths: usize, power_db: &[f64], tx_dbm: f64) -> String {
    let mut s = String::new();
    let p = state.position;
    for (sym, db) in power_db.iter().enumerate() {
        let _ = writeln!(
            s,
            "{ue},{},{},{},{},{},{paths},{sym},{db},{}",
            state.time,
            p.x,
            p.y,
            p.z,
            u8::from(los),
            db + tx_dbm
        );
    }
    s
}

fn write_tensor(dir: &Path, ue: usize, tensor: &ChannelTensor, format: TensorFormat, ctx: &WaveContext) -> Result<()> {
    let meta = TensorMeta {
        ue,
        dims: tensor.dims(),
        format,
        dtype: "complex64_le".into(),
        delay_reference: tensor.delay_reference,
        subcarrier_spacing: tensor.grid.spacing,
        carrier_frequency: ctx.carrier_frequency,
    };
    let stem = format!("ue_{ue:04}");
    match format {
        TensorFormat::Bin => write_file(&dir.join(format!("{stem}.bin")), &tensor.to_le_bytes())?,
        TensorFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let mut f = create(&path)?;
            let [ns, nn, nr, nt] = tensor.dims();
            let mut text = String::from("s,n,rx,tx,re,im\n");
            for s in 0..ns {
                for n in 0..nn {
                    for r in 0..nr {
                        for t in 0..nt {
                            let v = tensor.get(s, n, r, t);
                            let _ = writeln!(text, "{s},{n},{r},{t},{},{}", v.re, v.im);
                        }
                    }
                }
            }
            f.write_all(text.as_bytes()).map_err(io_err(&path))?;
            f.flush().map_err(io_err(&path))?;
        }
    }
    let text = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    write_file(&dir.join(format!("{stem}.json")), text.as_bytes())
}

/// Reads one tensor written by a run.
pub fn read_tensor(dir: &Path, ue: usize) -> Result<ChannelTensor> {
    let stem = format!("ue_{ue:04}");
    let meta_path = dir.join(format!("{stem}.json"));
    let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: TensorMeta = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let [ns, nn, nr, nt] = meta.dims;
    let grid = OfdmGrid {
        subcarriers: nn,
        spacing: meta.subcarrier_spacing,
        symbols: ns,
    };
    let mut tensor = match meta.format {
        TensorFormat::Bin => {
            let path = dir.join(format!("{stem}.bin"));
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            ChannelTensor::from_le_bytes(grid, nr, nt, &bytes)?
        }
        TensorFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let mut values = Vec::with_capacity(ns * nn * nr * nt);
            for line in text.lines().skip(1) {
                let f: Vec<&str> = line.split(',').collect();
                let num = |i: usize| -> Result<f32> {
                    f.get(i)
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| Error::Parse(format!("bad tensor row `{line}`")))
                };
                values.push(num_complex::Complex32::new(num(4)?, num(5)?));
            }
            if values.len() != ns * nn * nr * nt {
                return Err(Error::Parse(format!("{} has {} entries", path.display(), values.len())));
            }
            ChannelTensor {
                grid,
                rx_elements: nr,
                tx_elements: nt,
                delay_reference: 0.0,
                values,
            }
        }
    };
    tensor.delay_reference = meta.delay_reference;
    Ok(tensor)
}

fn load_run_config(run: &Path) -> Result<ScenarioConfig> {
    let path = run.join(SCENARIO_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    ScenarioConfig::from_json_str(&text)
}

/// Recomputes `jadpp.csv` of a run directory from its `subrays.csv`.
pub fn jadpp_from_run(run: &Path, force: bool) -> Result<usize> {
    let cfg = load_run_config(run)?;
    let path = run.join(SUBRAYS_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut by_ue: Vec<(usize, Vec<Binned>)> = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| -> Result<f64> {
            f.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad sub-ray row `{line}`")))
        };
        let ue = num(0)? as usize;
        let ray = Binned {
            delay: num(4)?,
            azimuth_deg: num(5)?,
            gain: Complex64::new(num(10)?, num(11)?),
        };
        match by_ue.last_mut() {
            Some((u, rays)) if *u == ue => rays.push(ray),
            _ => by_ue.push((ue, vec![ray])),
        }
    }
    claim_outputs(run, &[JADPP_FILE], force)?;
    let mut csv = Csv::open(run.join(JADPP_FILE), JADPP_HEADER)?;
    for (ue, rays) in &by_ue {
        csv.write(&jadpp_rows(*ue, rays, &cfg.jadpp)?)?;
    }
    csv.finish()?;
    Ok(by_ue.len())
}

/// Recomputes `power.csv` of a run directory from its tensors.
pub fn power_from_run(run: &Path, force: bool) -> Result<usize> {
    let cfg = load_run_config(run)?;
    let states = {
        let t = &cfg.ue.trajectory;
        let points: Vec<Vec2> = t.waypoints.iter().map(|&p| p.into()).collect();
        trajectory_from_waypoints(&points, cfg.ue.height, t.speed, t.sample_interval)?
    };
    let dir = run.join(TENSORS_DIR);
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} has no tensors", run.display())));
    }
    // LoS flag and path count come from the path dumps when present.
    let summary = |ue: usize| -> (bool, usize) {
        let path = run.join(PATHS_DIR).join(format!("ue_{ue:04}.jsonl"));
        fs::read_to_string(path)
            .map(|t| {
                let records: Vec<PathRecord> = t.lines().filter_map(|l| serde_json::from_str(l).ok()).collect();
                (records.iter().any(|r| r.kind == PathKind::Los), records.len())
            })
            .unwrap_or((false, 0))
    };
    let mut rows = String::new();
    let mut count = 0;
    for (ue, state) in states.iter().enumerate() {
        if !dir.join(format!("ue_{ue:04}.json")).exists() {
            continue;
        }
        let tensor = read_tensor(&dir, ue)?;
        let (los, paths) = summary(ue);
        rows.push_str(&power_rows(
            ue,
            state,
            los,
            paths,
            &channel_power(&tensor),
            cfg.tx_power_dbm,
        ));
        count += 1;
    }
    claim_outputs(run, &[POWER_FILE], force)?;
    let mut csv = Csv::open(run.join(POWER_FILE), POWER_HEADER)?;
    csv.write(&rows)?;
    csv.finish()?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_sampling() {
        let pts = [Vec2::new(0.0, 0.0), Vec2::new(100.0, 0.0)];
        let states = trajectory_from_waypoints(&pts, 1.5, 2.0, 1.0).unwrap();
        assert_eq!(states.len(), 51);
        for w in states.windows(2) {
            assert!((w[0].position.distance(w[1].position) - 2.0).abs() < 1e-12);
        }
        assert_eq!(states[50].position, Vec3::new(100.0, 0.0, 1.5));
        assert_eq!(states[50].time, 50.0);
    }

    #[test]
    fn single_point_is_stationary() {
        let states = trajectory_from_waypoints(&[Vec2::new(3.0, 4.0)], 1.5, 2.0, 0.25).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(states[0].velocity, Vec3::ZERO);
    }

    #[test]
    fn heading_turns_at_the_corner_sample() {
        let pts = [Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0)];
        let states = trajectory_from_waypoints(&pts, 1.5, 2.0, 0.5).unwrap();
        assert_eq!(states.len(), 21);
        assert_eq!(states[9].velocity, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(states[10].position.xy(), Vec2::new(10.0, 0.0));
        assert_eq!(states[10].velocity, Vec3::new(0.0, 2.0, 0.0));
    }

    #[test]
    fn degenerate_polylines_fail() {
        let p = Vec2::new(1.0, 1.0);
        assert!(trajectory_from_waypoints(&[p, p], 1.5, 2.0, 0.25).is_err());
        assert!(trajectory_from_waypoints(&[], 1.5, 2.0, 0.25).is_err());
    }

    fn open_map() -> DigitalMap {
        DigitalMap::from_json_str(
            r#"{"bounds":[-100,-100,100,100],"materials":[{"id":0,"eps":4,"sigma_h":0}],"ground_material":0}"#,
        )
        .unwrap()
    }

    #[test]
    fn empty_map_gives_direct_and_ground_paths() {
        let mut cfg = ScenarioConfig::new("unused.json", [0.0, 0.0], vec![[50.0, 0.0]]);
        cfg.bs.array = ArrayConfig::omni();
        cfg.ofdm.subcarriers = 16;
        let sim = Simulator::with_map(cfg, open_map()).unwrap();
        let ue = sim.ue_states().unwrap()[0];
        let res = sim.simulate_ue(0, &ue).unwrap();
        assert!(res.los);
        assert_eq!(res.paths.len(), 2);
        assert!(res.paths[1].has_ground_bounce());
        assert_eq!(res.subrays.len(), 1 + 20);
    }

    #[test]
    fn enclosed_ue_sees_nothing() {
        let text = r#"{"bounds":[-100,-100,100,100],"materials":[{"id":0,"eps":4,"sigma_h":0}],"ground_material":0,
            "surfaces":[{"id":0,"p1":[40,-10],"p2":[60,-10],"height":30,"material":0},
                        {"id":1,"p1":[60,-10],"p2":[60,10],"height":30,"material":0},
                        {"id":2,"p1":[60,10],"p2":[40,10],"height":30,"material":0},
                        {"id":3,"p1":[40,10],"p2":[40,-10],"height":30,"material":0}]}"#;
        let map = DigitalMap::from_json_str(text).unwrap();
        let mut cfg = ScenarioConfig::new("unused.json", [0.0, 0.0], vec![[50.0, 0.0]]);
        cfg.ofdm.subcarriers = 8;
        cfg.bs.array = ArrayConfig::omni();
        let sim = Simulator::with_map(cfg, map).unwrap();
        let ue = sim.ue_states().unwrap()[0];
        let res = sim.simulate_ue(0, &ue).unwrap();
        assert!(res.paths.is_empty());
        assert!(res.tensor.values.iter().all(|v| v.norm() == 0.0));
        assert_eq!(res.power_db, vec![crate::channel::POWER_FLOOR_DB]);
    }

    #[test]
    fn bs_outside_map_is_rejected() {
        let cfg = ScenarioConfig::new("unused.json", [500.0, 0.0], vec![[50.0, 0.0]]);
        assert!(Simulator::with_map(cfg, open_map()).is_err());
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_keys() {
        let cfg = ScenarioConfig::new("map.json", [1.0, 2.0], vec![[3.0, 4.0]]);
        let back = ScenarioConfig::from_json_str(&cfg.to_json_string()).unwrap();
        assert_eq!(back, cfg);
        let bad = cfg.to_json_string().replacen('{', "{\"bogus\": 1,", 1);
        assert!(ScenarioConfig::from_json_str(&bad).is_err());
    }
}
