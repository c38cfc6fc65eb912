//! Frequency-domain MIMO-OFDM channel synthesis and derived observables.

use std::f64::consts::{PI, TAU};

use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};

use crate::cluster::{Angles, SubRay};
use crate::em::WaveContext;
use crate::geometry::Vec3;
use crate::{Error, Result};

/// Power reported for an all-zero channel (dB).
pub const POWER_FLOOR_DB: f64 = -250.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmGrid {
    pub subcarriers: usize,
    /// Subcarrier spacing Δ (Hz).
    pub spacing: f64,
    pub symbols: usize,
}

impl Default for OfdmGrid {
    fn default() -> Self {
        Self {
            subcarriers: 2048,
            spacing: 120e3,
            symbols: 1,
        }
    }
}

impl OfdmGrid {
    /// Symbol duration `T = 1/Δ`.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.spacing
    }

    /// Bandwidth `W = NΔ`.
    pub fn bandwidth(&self) -> f64 {
        self.subcarriers as f64 * self.spacing
    }

    pub fn validate(&self) -> Result<()> {
        if self.subcarriers < 1 || self.symbols < 1 {
            return Err(Error::Config(
                "OFDM grid needs at least one subcarrier and one symbol".into(),
            ));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::Config(format!(
                "subcarrier spacing must be positive, got {}",
                self.spacing
            )));
        }
        Ok(())
    }
}

/// Per-element radiation pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementPattern {
    Omni,
    /// Parametric patch: `G_max · max(cos^q ψ, floor)` in power, ψ off boresight.
    Patch {
        gain_dbi: f64,
        exponent: f64,
        #[serde(default = "default_floor")]
        floor_db: f64,
    },
}

fn default_floor() -> f64 {
    -30.0
}

impl ElementPattern {
    /// Power gain at angle `psi` off boresight, given as `cos ψ`.
    pub fn power_gain(&self, cos_psi: f64) -> f64 {
        match *self {
            ElementPattern::Omni => 1.0,
            ElementPattern::Patch {
                gain_dbi,
                exponent,
                floor_db,
            } => {
                let lobe = if cos_psi > 0.0 { cos_psi.powf(exponent) } else { 0.0 };
                10f64.powf(gain_dbi / 10.0) * lobe.max(10f64.powf(floor_db / 10.0))
            }
        }
    }

    pub fn max_gain(&self) -> f64 {
        self.power_gain(1.0)
    }
}

/// Uniform planar array, or a single element with `rows = cols = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in wavelengths.
    #[serde(default = "half")]
    pub spacing: f64,
    /// Boresight azimuth (rad; degrees on disk).
    #[serde(default, rename = "azimuth_deg", with = "crate::degrees")]
    pub azimuth: f64,
    /// Boresight elevation before downtilt (rad; degrees on disk).
    #[serde(default, rename = "elevation_deg", with = "crate::degrees")]
    pub elevation: f64,
    /// Mechanical downtilt (rad; degrees on disk).
    #[serde(default, rename = "downtilt_deg", with = "crate::degrees")]
    pub downtilt: f64,
    pub pattern: ElementPattern,
}

fn half() -> f64 {
    0.5
}

impl ArrayConfig {
    pub fn omni() -> Self {
        Self {
            rows: 1,
            cols: 1,
            spacing: 0.5,
            azimuth: 0.0,
            elevation: 0.0,
            downtilt: 0.0,
            pattern: ElementPattern::Omni,
        }
    }

    /// A `rows × cols` patch array facing `azimuth` (rad).
    pub fn patch_upa(rows: usize, cols: usize, azimuth: f64) -> Self {
        Self {
            rows,
            cols,
            spacing: 0.5,
            azimuth,
            elevation: 0.0,
            downtilt: 0.0,
            pattern: ElementPattern::Patch {
                gain_dbi: 5.0,
                exponent: 2.0,
                floor_db: -30.0,
            },
        }
    }

    pub fn elements(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements() == 0 {
            return Err(Error::Config("array needs at least one element".into()));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::Config(format!(
                "element spacing must be positive, got {}",
                self.spacing
            )));
        }
        Ok(())
    }

    /// Boresight, horizontal and vertical array axes.
    fn axes(&self) -> (Vec3, Vec3, Vec3) {
        let b = Vec3::from_angles(self.azimuth, self.elevation - self.downtilt);
        let h = Vec3::new(-self.azimuth.sin(), self.azimuth.cos(), 0.0);
        (b, h, b.cross(h))
    }

    /// Element positions in wavelengths, row-major.
    pub fn element_positions(&self) -> Vec<Vec3> {
        let (_, h, v) = self.axes();
        let (cr, cc) = ((self.rows as f64 - 1.0) / 2.0, (self.cols as f64 - 1.0) / 2.0);
        let mut out = Vec::with_capacity(self.elements());
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(h * ((c as f64 - cc) * self.spacing) + v * ((r as f64 - cr) * self.spacing));
            }
        }
        out
    }
}

/// Response vector `g(u) · e^{-jk⟨p_m, u⟩}` of the array towards `direction`.
pub fn array_response(cfg: &ArrayConfig, direction: Angles) -> Vec<Complex64> {
    let u = direction.unit();
    let (b, _, _) = cfg.axes();
    let amplitude = cfg.pattern.power_gain(u.dot(b)).sqrt();
    cfg.element_positions()
        .into_iter()
        .map(|p| Complex64::from_polar(amplitude, -TAU * p.dot(u)))
        .collect()
}

/// How the pulse `p(·)` is sampled for symbol `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseTiming {
    /// `p(-τ)` for every symbol: each symbol sees the delay pulse at its own start.
    #[default]
    SymbolAligned,
    /// `p(sT - τ)` as written; vanishes for `s ≥ 1` when delays are small.
    Literal,
}

/// Origin of the delays entering the subcarrier phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayReference {
    /// Earliest sub-ray delay.
    #[default]
    Earliest,
    /// Absolute propagation delays.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisOptions {
    pub pulse: PulseTiming,
    pub delay_reference: DelayReference,
}

/// `H[s][n][rx][tx]` as complex64.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub grid: OfdmGrid,
    pub rx_elements: usize,
    pub tx_elements: usize,
    /// Delay subtracted before synthesis (s).
    pub delay_reference: f64,
    pub values: Vec<Complex32>,
}

impl ChannelTensor {
    fn offset(&self, s: usize, n: usize, r: usize, t: usize) -> usize {
        ((s * self.grid.subcarriers + n) * self.rx_elements + r) * self.tx_elements + t
    }

    pub fn get(&self, s: usize, n: usize, r: usize, t: usize) -> Complex32 {
        self.values[self.offset(s, n, r, t)]
    }

    /// Dimensions `[symbols, subcarriers, rx, tx]`.
    pub fn dims(&self) -> [usize; 4] {
        [
            self.grid.symbols,
            self.grid.subcarriers,
            self.rx_elements,
            self.tx_elements,
        ]
    }

    /// Little-endian interleaved `re, im` float32 pairs in `[s][n][rx][tx]` order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(grid: OfdmGrid, rx_elements: usize, tx_elements: usize, bytes: &[u8]) -> Result<Self> {
        let count = grid.symbols * grid.subcarriers * rx_elements * tx_elements;
        if bytes.len() != count * 8 {
            return Err(Error::Parse(format!(
                "tensor has {} bytes, expected {} for dims {:?}",
                bytes.len(),
                count * 8,
                [grid.symbols, grid.subcarriers, rx_elements, tx_elements]
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                    f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                )
            })
            .collect();
        Ok(Self {
            grid,
            rx_elements,
            tx_elements,
            delay_reference: 0.0,
            values,
        })
    }
}

/// Pulse `p(τ) = sin(πτ/T)/(πτ/T)`.
pub fn sinc_pulse(tau: f64, symbol_duration: f64) -> f64 {
    let x = PI * tau / symbol_duration;
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

pub fn synthesize(
    subrays: &[SubRay],
    rx: &ArrayConfig,
    tx: &ArrayConfig,
    grid: &OfdmGrid,
    ctx: &WaveContext,
) -> ChannelTensor {
    synthesize_with(subrays, rx, tx, grid, ctx, SynthesisOptions::default())
}

/// Sums `α p(·) a_r(θ) a_t^H(φ) e^{j2π(sTν − nΔτ)}` over all sub-rays.
pub fn synthesize_with(
    subrays: &[SubRay],
    rx: &ArrayConfig,
    tx: &ArrayConfig,
    grid: &OfdmGrid,
    _ctx: &WaveContext,
    opts: SynthesisOptions,
) -> ChannelTensor {
    let (reference, acc) = synthesize_f64(subrays, rx, tx, grid, opts);
    ChannelTensor {
        grid: *grid,
        rx_elements: rx.elements(),
        tx_elements: tx.elements(),
        delay_reference: reference,
        values: acc
            .into_iter()
            .map(|v| Complex32::new(v.re as f32, v.im as f32))
            .collect(),
    }
}

/// The channel of [`synthesize_with`] in double precision, same layout,
/// with the delay reference that was subtracted.
pub fn synthesize_f64(
    subrays: &[SubRay],
    rx: &ArrayConfig,
    tx: &ArrayConfig,
    grid: &OfdmGrid,
    opts: SynthesisOptions,
) -> (f64, Vec<Complex64>) {
    let (nr, nt) = (rx.elements(), tx.elements());
    let (ns, nn) = (grid.symbols, grid.subcarriers);
    let period = grid.symbol_duration();
    let reference = match opts.delay_reference {
        DelayReference::Earliest => subrays.iter().map(|r| r.delay).fold(f64::INFINITY, f64::min),
        DelayReference::Absolute => 0.0,
    };
    let reference = if reference.is_finite() { reference } else { 0.0 };
    let block = nr * nt;
    let mut acc = vec![Complex64::new(0.0, 0.0); ns * nn * block];
    let mut outer = vec![Complex64::new(0.0, 0.0); block];

    for ray in subrays {
        let ar = array_response(rx, ray.doa);
        let at = array_response(tx, ray.dod);
        for (r, a) in ar.iter().enumerate() {
            for (t, b) in at.iter().enumerate() {
                outer[r * nt + t] = a * b.conj();
            }
        }
        let tau = ray.delay - reference;
        for s in 0..ns {
            let pulse = match opts.pulse {
                PulseTiming::SymbolAligned => sinc_pulse(-tau, period),
                PulseTiming::Literal => sinc_pulse(s as f64 * period - tau, period),
            };
            if pulse == 0.0 {
                continue;
            }
            let doppler = TAU * s as f64 * period * ray.doppler;
            for n in 0..nn {
                let phase = doppler - TAU * n as f64 * grid.spacing * tau;
                let w = ray.gain * pulse * Complex64::from_polar(1.0, phase);
                let dst = &mut acc[(s * nn + n) * block..(s * nn + n + 1) * block];
                for (d, o) in dst.iter_mut().zip(&outer) {
                    *d += w * o;
                }
            }
        }
    }
    (reference, acc)
}

/// Per-symbol channel power `E_n ‖H[s][n]‖²_F` in dB, floored at [`POWER_FLOOR_DB`].
pub fn channel_power(tensor: &ChannelTensor) -> Vec<f64> {
    let [ns, nn, nr, nt] = tensor.dims();
    let block = nr * nt;
    (0..ns)
        .map(|s| {
            let slice = &tensor.values[s * nn * block..(s + 1) * nn * block];
            let total: f64 = slice
                .iter()
                .map(|v| (v.re as f64).powi(2) + (v.im as f64).powi(2))
                .sum();
            to_db(total / nn as f64)
        })
        .collect()
}

pub fn to_db(power: f64) -> f64 {
    if power > 0.0 {
        (10.0 * power.log10()).max(POWER_FLOOR_DB)
    } else {
        POWER_FLOOR_DB
    }
}

/// Joint angle–delay power profile over DoA azimuth `[-π, π)` and delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Jadpp {
    pub azimuth_bins: usize,
    pub delay_bins: usize,
    pub delay_min: f64,
    pub delay_max: f64,
    /// Linear power, row-major `[azimuth][delay]`.
    pub power: Vec<f64>,
}

impl Jadpp {
    pub fn get(&self, az: usize, delay: usize) -> f64 {
        self.power[az * self.delay_bins + delay]
    }

    pub fn db(&self, az: usize, delay: usize) -> f64 {
        to_db(self.get(az, delay))
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Lower edge of azimuth bin `i` (rad).
    pub fn azimuth_edge(&self, i: usize) -> f64 {
        -PI + TAU * i as f64 / self.azimuth_bins as f64
    }

    /// Lower edge of delay bin `j` (s).
    pub fn delay_edge(&self, j: usize) -> f64 {
        self.delay_min + (self.delay_max - self.delay_min) * j as f64 / self.delay_bins as f64
    }
}

/// Bins `|α|²` by DoA azimuth and delay. The delay axis spans the sub-rays'
/// own delay range.
pub fn jadpp(subrays: &[SubRay], azimuth_bins: usize, delay_bins: usize) -> Result<Jadpp> {
    let lo = subrays.iter().map(|r| r.delay).fold(f64::INFINITY, f64::min);
    let hi = subrays.iter().map(|r| r.delay).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    jadpp_in(subrays, azimuth_bins, delay_bins, lo, hi)
}

/// As [`jadpp`] over an explicit delay window `[delay_min, delay_max]`;
/// sub-rays outside it are dropped.
pub fn jadpp_in(
    subrays: &[SubRay],
    azimuth_bins: usize,
    delay_bins: usize,
    delay_min: f64,
    delay_max: f64,
) -> Result<Jadpp> {
    if azimuth_bins < 1 || delay_bins < 1 {
        return Err(Error::Config("JADPP needs at least one bin per axis".into()));
    }
    if !(delay_max >= delay_min) {
        return Err(Error::Config("JADPP delay window is empty".into()));
    }
    let mut power = vec![0.0; azimuth_bins * delay_bins];
    let span = delay_max - delay_min;
    for ray in subrays {
        if ray.delay < delay_min || ray.delay > delay_max {
            continue;
        }
        let az = ((ray.doa.azimuth + PI) / TAU * azimuth_bins as f64).floor();
        let az = (az.max(0.0) as usize).min(azimuth_bins - 1);
        let d = if span > 0.0 {
            (((ray.delay - delay_min) / span * delay_bins as f64).floor() as usize).min(delay_bins - 1)
        } else {
            0
        };
        power[az * delay_bins + d] += ray.power();
    }
    Ok(Jadpp {
        azimuth_bins,
        delay_bins,
        delay_min,
        delay_max,
        power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::PathKind;

    fn ray(gain: f64, delay: f64, az: f64, doppler: f64) -> SubRay {
        SubRay {
            gain: Complex64::new(gain, 0.0),
            delay,
            doa: Angles {
                azimuth: az,
                elevation: 0.0,
            },
            dod: Angles {
                azimuth: 0.0,
                elevation: 0.0,
            },
            doppler,
            parent: 0,
            kind: PathKind::Los,
            index: 0,
        }
    }

    fn ctx() -> WaveContext {
        WaveContext::new(28e9).unwrap()
    }

    #[test]
    fn boresight_phases_equal() {
        let a = array_response(
            &ArrayConfig::patch_upa(4, 4, 0.3),
            Angles {
                azimuth: 0.3,
                elevation: 0.0,
            },
        );
        assert!(a.iter().all(|v| (v - a[0]).norm() < 1e-12));
        assert_eq!(
            array_response(
                &ArrayConfig::omni(),
                Angles {
                    azimuth: 1.0,
                    elevation: 0.2
                }
            ),
            vec![Complex64::new(1.0, 0.0)]
        );
    }

    #[test]
    fn endfire_half_wave_pair_is_pi_apart() {
        let mut cfg = ArrayConfig::omni();
        cfg.cols = 2;
        // Horizontal axis of an array facing east is +y.
        let a = array_response(
            &cfg,
            Angles {
                azimuth: PI / 2.0,
                elevation: 0.0,
            },
        );
        let diff = (a[1] / a[0]).arg().abs();
        assert!((diff - PI).abs() < 1e-12);
    }

    #[test]
    fn response_norm_bounded() {
        let cfg = ArrayConfig::patch_upa(4, 4, 0.0);
        let bound = cfg.elements() as f64 * cfg.pattern.max_gain();
        for i in 0..360 {
            let dir = Angles {
                azimuth: (i as f64).to_radians() - PI,
                elevation: 0.1,
            };
            let n: f64 = array_response(&cfg, dir).iter().map(|v| v.norm_sqr()).sum();
            assert!(n <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn literal_pulse_single_ray() {
        let grid = OfdmGrid {
            subcarriers: 8,
            spacing: 120e3,
            symbols: 3,
        };
        let opts = SynthesisOptions {
            pulse: PulseTiming::Literal,
            ..Default::default()
        };
        let h = synthesize_with(
            &[ray(1.0, 5e-7, 0.0, 0.0)],
            &ArrayConfig::omni(),
            &ArrayConfig::omni(),
            &grid,
            &ctx(),
            opts,
        );
        for n in 0..8 {
            assert!((h.get(0, n, 0, 0) - Complex32::new(1.0, 0.0)).norm() < 1e-6);
            assert!(h.get(1, n, 0, 0).norm() < 1e-6);
        }
    }

    #[test]
    fn empty_subrays_give_floor_power() {
        let grid = OfdmGrid {
            subcarriers: 4,
            spacing: 120e3,
            symbols: 2,
        };
        let h = synthesize(&[], &ArrayConfig::omni(), &ArrayConfig::omni(), &grid, &ctx());
        assert!(h.values.iter().all(|v| v.norm() == 0.0));
        assert_eq!(channel_power(&h), vec![POWER_FLOOR_DB; 2]);
    }

    #[test]
    fn los_power_matches_friis() {
        let ctx = ctx();
        let g = crate::em::los_gain(100.0, &ctx).unwrap();
        let mut r = ray(0.0, 100.0 / crate::SPEED_OF_LIGHT, 0.0, 0.0);
        r.gain = g;
        let grid = OfdmGrid {
            subcarriers: 64,
            spacing: 120e3,
            symbols: 1,
        };
        let p = channel_power(&synthesize(
            &[r],
            &ArrayConfig::omni(),
            &ArrayConfig::omni(),
            &grid,
            &ctx,
        ));
        assert!((p[0] + 101.4).abs() < 0.05, "{p:?}");
        assert!((p[0] - to_db(g.norm_sqr())).abs() < 1e-5);
    }

    #[test]
    fn jadpp_partitions_power() {
        let rays = [
            ray(1.0, 0.0, 0.1, 0.0),
            ray(0.5, 1e-7, 0.1, 0.0),
            ray(0.25, 5e-8, -2.0, 0.0),
        ];
        let j = jadpp(&rays, 36, 10).unwrap();
        assert!((j.total() - (1.0 + 0.25 + 0.0625)).abs() < 1e-15);
        let row = ((0.1 + PI) / TAU * 36.0) as usize;
        assert_eq!(j.get(row, 0), 1.0);
        assert_eq!(j.get(row, 9), 0.25);
        let single = jadpp(&rays[..1], 36, 10).unwrap();
        assert_eq!(single.power.iter().filter(|&&p| p > 0.0).count(), 1);
    }
}
