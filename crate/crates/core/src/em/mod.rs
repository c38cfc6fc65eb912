//! Path gains: Friis line of sight, rough-surface Fresnel reflection,
//! UTD wedge diffraction and RET canopy scattering.
//!
//! Every gain uses the `e^{-jkd}` propagation convention.

mod reflection;
mod scatter;
mod utd;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::DigitalMap;
use crate::tracer::{PathKind, PropagationPath};
use crate::{Error, Result, SPEED_OF_LIGHT};

pub use reflection::{fresnel_coefficients, reflection_gain, roughness_factor};
pub use scatter::{ret_reradiation, scattering_gain};
pub use utd::{
    diffraction_coefficient, diffraction_gain, fresnel_integrals, utd_transition_f, wedge_diffraction_gain,
    DiffractionGeometry,
};

/// Carrier-dependent constants shared by all gain formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveContext {
    pub carrier_frequency: f64,
    pub wavelength: f64,
    pub wavenumber: f64,
}

impl WaveContext {
    pub fn new(carrier_frequency: f64) -> Result<Self> {
        if !(carrier_frequency > 0.0 && carrier_frequency.is_finite()) {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {carrier_frequency}"
            )));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_frequency;
        Ok(Self {
            carrier_frequency,
            wavelength,
            wavenumber: 2.0 * PI / wavelength,
        })
    }

    /// Propagation phasor `e^{-jkd}`.
    pub fn phasor(&self, d: f64) -> Complex64 {
        Complex64::from_polar(1.0, -self.wavenumber * d)
    }

    /// Free-space amplitude `λ/(4πd)`.
    pub fn friis(&self, d: f64) -> f64 {
        self.wavelength / (4.0 * PI * d)
    }
}

/// Transmit polarization. Vertical fields are transverse to the plane of
/// incidence at (vertical) walls and lie in it at the ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    #[default]
    Vertical,
    Horizontal,
}

/// Which reflector a Fresnel coefficient is taken for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reflector {
    Wall,
    Ground,
}

impl Polarization {
    /// Picks `Γ∥` or `Γ⊥` from a [`fresnel_coefficients`] pair.
    pub fn select(self, reflector: Reflector, (parallel, perp): (Complex64, Complex64)) -> Complex64 {
        match (self, reflector) {
            (Polarization::Vertical, Reflector::Wall) | (Polarization::Horizontal, Reflector::Ground) => perp,
            (Polarization::Vertical, Reflector::Ground) | (Polarization::Horizontal, Reflector::Wall) => parallel,
        }
    }
}

/// Friis line-of-sight gain `λ/(4πd)·e^{-jkd}`.
pub fn los_gain(d: f64, ctx: &WaveContext) -> Result<Complex64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("LoS distance must be positive, got {d}")));
    }
    Ok(ctx.phasor(d) * ctx.friis(d))
}

/// Gain of `path` without the propagation phasor `e^{-jk d_T}`.
///
/// Reflections (and ground-bounced LoS) carry the product of their Fresnel
/// and roughness factors, diffraction keeps the complex UTD coefficient,
/// scattering the RET magnitude.
pub fn base_gain(path: &PropagationPath, map: &DigitalMap, ctx: &WaveContext, pol: Polarization) -> Result<Complex64> {
    match path.kind {
        PathKind::Los | PathKind::Reflection => reflection_gain(path, map, ctx, pol),
        PathKind::Diffraction => {
            let g = wedge_diffraction_gain(path, map, ctx, pol)?;
            Ok(g * ctx.phasor(-path.length))
        }
        PathKind::Scattering => {
            let id = path
                .tree()
                .ok_or_else(|| degenerate(path, "scattering path without a tree"))?;
            let tree = map.tree(id).ok_or_else(|| degenerate(path, "unknown tree"))?;
            scattering_gain(path, tree, ctx)
        }
    }
}

pub(crate) fn degenerate(path: &PropagationPath, reason: &str) -> Error {
    Error::Degenerate {
        path: path.signature().to_string(),
        reason: reason.to_string(),
    }
}
