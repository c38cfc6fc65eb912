use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use super::{degenerate, Polarization, Reflector, WaveContext};
use crate::geometry::{DigitalMap, Vec3};
use crate::tracer::{Interaction, PropagationPath};
use crate::{Error, Result};

/// Smooth-surface Fresnel coefficients `(Γ∥, Γ⊥)` at grazing angle `theta`.
pub fn fresnel_coefficients(theta: f64, eps: f64) -> Result<(Complex64, Complex64)> {
    if !(theta > 0.0 && theta <= FRAC_PI_2 + 1e-12) {
        return Err(Error::Domain(format!(
            "grazing angle must lie in (0, pi/2], got {theta}"
        )));
    }
    if !(eps > 1.0) {
        return Err(Error::Domain(format!("relative permittivity must exceed 1, got {eps}")));
    }
    let (s, c) = theta.sin_cos();
    let root = (eps - c * c).sqrt();
    let parallel = (eps * s - root) / (eps * s + root);
    let perp = (s - root) / (s + root);
    Ok((Complex64::new(parallel, 0.0), Complex64::new(perp, 0.0)))
}

/// Scattering loss `exp[-8 (π σ_h sinθ / λ)²]` of a rough surface.
pub fn roughness_factor(theta: f64, sigma_h: f64, lambda: f64) -> f64 {
    let g = PI * sigma_h * theta.sin() / lambda;
    (-8.0 * g * g).exp()
}

/// Reflection gain of a wall/ground path, before the propagation phasor and
/// the sub-ray split: `∏ ρ_S Γ · λ/(4π d_T)`.
///
/// A plain LoS path (no interactions) reduces to the Friis amplitude.
pub fn reflection_gain(
    path: &PropagationPath,
    map: &DigitalMap,
    ctx: &WaveContext,
    pol: Polarization,
) -> Result<Complex64> {
    if path.vertices.len() != path.interactions.len() + 2 {
        return Err(degenerate(path, "vertex count does not match interactions"));
    }
    if path.vertices.windows(2).any(|w| !(w[0].distance(w[1]) > 0.0)) {
        return Err(degenerate(path, "zero-length segment"));
    }
    if !(path.length > 0.0) {
        return Err(degenerate(path, "zero total length"));
    }
    let mut product = Complex64::new(1.0, 0.0);
    for (i, interaction) in path.interactions.iter().enumerate() {
        let incoming = (path.vertices[i + 1] - path.vertices[i]).normalized();
        let (material, normal, reflector) = match *interaction {
            Interaction::Wall(id) => {
                let wall = map.surface(id).ok_or_else(|| degenerate(path, "unknown wall"))?;
                let n = wall.normal();
                (wall.material, Vec3::new(n.x, n.y, 0.0), Reflector::Wall)
            }
            Interaction::Ground => (map.ground_material, Vec3::new(0.0, 0.0, 1.0), Reflector::Ground),
            _ => return Err(degenerate(path, "reflection path with a non-specular interaction")),
        };
        let material = map
            .material(material)
            .ok_or_else(|| degenerate(path, "unknown material"))?;
        let theta = incoming.dot(normal).abs().min(1.0).asin();
        if !(theta > 0.0) {
            return Err(degenerate(path, "grazing angle is zero"));
        }
        let gamma = pol.select(reflector, fresnel_coefficients(theta, material.permittivity)?);
        product *= gamma * roughness_factor(theta, material.roughness, ctx.wavelength);
    }
    Ok(product * ctx.friis(path.length))
}
