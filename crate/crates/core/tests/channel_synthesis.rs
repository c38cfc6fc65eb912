mod common;

use std::f64::consts::{PI, TAU};

use common::{fixture, ray};
use mmray::channel::{
    synthesize_f64, synthesize_with, ArrayConfig, DelayReference, OfdmGrid, PulseTiming, SynthesisOptions,
};
use mmray::cluster::doppler;
use mmray::em::WaveContext;
use mmray::geometry::Vec3;
use mmray::scenario::{ScenarioConfig, Simulator};
use num_complex::{Complex, Complex64};
use rustfft::FftPlanner;

const ABSOLUTE: SynthesisOptions = SynthesisOptions {
    pulse: PulseTiming::SymbolAligned,
    delay_reference: DelayReference::Absolute,
};

fn grid(subcarriers: usize, symbols: usize) -> OfdmGrid {
    OfdmGrid {
        subcarriers,
        spacing: 120e3,
        symbols,
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

#[test]
fn single_path_impulse_peaks_at_its_delay_bin() {
    let ctx = WaveContext::new(28e9).unwrap();
    let g = grid(256, 1);
    let omni = ArrayConfig::omni();
    let resolution = 1.0 / g.bandwidth();
    for bins in [0.0, 1.0, 37.2, 100.4, 199.0] {
        let rays = [ray(Complex64::new(1e-4, 2e-5), bins * resolution, 0.0)];
        let tensor = synthesize_with(&rays, &omni, &omni, &g, &ctx, ABSOLUTE);
        let mut h: Vec<Complex<f32>> = tensor.values.clone();
        FftPlanner::new().plan_fft_inverse(h.len()).process(&mut h);
        let peak = (0..h.len())
            .max_by(|&a, &b| h[a].norm().total_cmp(&h[b].norm()))
            .unwrap();
        assert_eq!(peak, bins.round() as usize, "delay of {bins} bins");
    }
}

#[test]
fn two_path_ripple_matches_closed_form() {
    let g = grid(512, 1);
    let omni = ArrayConfig::omni();
    let (g1, t1) = (Complex64::from_polar(1.0, 0.3), 40e-9);
    let (g2, t2) = (Complex64::from_polar(0.6, -1.1), 95e-9);
    let rays = [ray(g1, t1, 0.0), ray(g2, t2, 0.0)];
    let (_, h) = synthesize_f64(&rays, &omni, &omni, &g, ABSOLUTE);
    let period = g.symbol_duration();
    let a1 = g1 * sinc(t1 / period);
    let a2 = g2 * sinc(t2 / period);
    let mut worst: f64 = 0.0;
    for (n, v) in h.iter().enumerate() {
        let expected = a1.norm_sqr()
            + a2.norm_sqr()
            + 2.0 * a1.norm() * a2.norm() * (TAU * n as f64 * g.spacing * (t2 - t1) + a1.arg() - a2.arg()).cos();
        worst = worst.max((v.norm_sqr() - expected).abs());
    }
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn doppler_phase_step_per_symbol() {
    let g = grid(64, 8);
    let omni = ArrayConfig::omni();
    let nu = 150.0;
    let rays = [ray(Complex64::new(0.3, -0.2), 25e-9, nu)];
    let (_, h) = synthesize_f64(&rays, &omni, &omni, &g, SynthesisOptions::default());
    let step = Complex64::from_polar(1.0, TAU * nu * g.symbol_duration());
    let n = g.subcarriers;
    for s in 0..g.symbols - 1 {
        for k in 0..n {
            let ratio = h[(s + 1) * n + k] / h[s * n + k];
            assert!((ratio - step).norm() < 1e-12, "s = {s}, n = {k}");
        }
    }
}

#[test]
fn maximum_doppler_at_walking_speed() {
    let ctx = WaveContext::new(28e9).unwrap();
    let expected = 28e9 * 2.0 / 299_792_458.0;
    let along = doppler(Vec3::new(2.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), &ctx);
    assert!((along - 186.79).abs() < 0.01, "{along}");
    assert!((along - expected).abs() < 1e-9);
    let across = doppler(Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), &ctx);
    assert_eq!(across, 0.0);
}

#[test]
fn simulated_dopplers_respect_the_bound() {
    let cfg = ScenarioConfig::from_file(fixture("square_scenario.json")).unwrap();
    let sim = Simulator::new(cfg).unwrap();
    let bound = 28e9 * 2.0 / 299_792_458.0;
    for (i, state) in sim.ue_states().unwrap().iter().enumerate() {
        let result = sim.simulate_ue(i, state).unwrap();
        for r in &result.subrays {
            assert!(r.doppler.abs() <= bound * (1.0 + 1e-12), "UE {i}: {}", r.doppler);
        }
    }
}
