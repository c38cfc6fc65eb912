use std::f64::consts::PI;

use num_complex::Complex64;

use super::{degenerate, WaveContext};
use crate::geometry::{RetParams, Tree};
use crate::tracer::PropagationPath;
use crate::Result;

/// Re-radiation pattern `ρ(φ) = α(2/β)² e^{-(φ/β)²} + (1 − α)`.
pub fn ret_reradiation(phi: f64, ret: &RetParams) -> f64 {
    let alpha = ret.forward_ratio;
    let beta = ret.beamwidth;
    alpha * (2.0 / beta).powi(2) * (-(phi / beta).powi(2)).exp() + (1.0 - alpha)
}

/// Canopy scattering gain `sqrt[(1−χ) r h ρ(φ) / (32π³)] · λ/(r1 r2)`, before
/// the sub-ray split. `φ` is the angle between the incident (BS → tree) and
/// scattered (tree → UE) directions.
pub fn scattering_gain(path: &PropagationPath, tree: &Tree, ctx: &WaveContext) -> Result<Complex64> {
    if path.vertices.len() != 3 {
        return Err(degenerate(path, "scattering path must have three vertices"));
    }
    let (bs, centre, ue) = (path.vertices[0], path.vertices[1], path.vertices[2]);
    let incident = centre - bs;
    let scattered = ue - centre;
    let (r1, r2) = (incident.norm(), scattered.norm());
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(degenerate(path, "zero-length scattering leg"));
    }
    let phi = (incident.dot(scattered) / (r1 * r2)).clamp(-1.0, 1.0).acos();
    let rho = ret_reradiation(phi, &tree.ret);
    let power = (1.0 - tree.ret.absorption) * tree.radius * tree.height * rho / (32.0 * PI.powi(3));
    Ok(Complex64::new(power.max(0.0).sqrt() * ctx.wavelength / (r1 * r2), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{TreeId, Vec2, Vec3};
    use crate::tracer::{Interaction, PathKind};

    fn table_tree() -> Tree {
        Tree {
            id: TreeId(0),
            center: Vec2::new(50.0, 0.0),
            radius: 4.0,
            height: 5.0,
            ret: RetParams {
                beamwidth: 20f64.to_radians(),
                forward_ratio: 0.5,
                absorption: 0.6,
            },
        }
    }

    fn path(r1: f64, r2: f64) -> PropagationPath {
        PropagationPath::new(
            PathKind::Scattering,
            vec![Interaction::Tree(TreeId(0))],
            vec![
                Vec3::new(-r1, 0.0, 2.5),
                Vec3::new(0.0, 0.0, 2.5),
                Vec3::new(r2, 0.0, 2.5),
            ],
        )
    }

    #[test]
    fn pattern_values() {
        let ret = table_tree().ret;
        let expected = 0.5 * (2.0 / ret.beamwidth).powi(2) + 0.5;
        assert!((ret_reradiation(0.0, &ret) - expected).abs() < 1e-12);
        assert!((ret_reradiation(0.0, &ret) - 16.92).abs() < 0.05);
        let iso = RetParams {
            forward_ratio: 0.0,
            ..ret
        };
        assert_eq!(ret_reradiation(1.3, &iso), 1.0);
        let forward = RetParams {
            forward_ratio: 1.0,
            ..ret
        };
        assert!(ret_reradiation(PI, &forward) < 1e-30);
    }

    #[test]
    fn forward_scattering_magnitude() {
        let ctx = WaveContext::new(28e9).unwrap();
        let tree = table_tree();
        let rho = ret_reradiation(0.0, &tree.ret);
        let expected = (0.4 * 4.0 * 5.0 * rho / (32.0 * PI.powi(3))).sqrt() * ctx.wavelength / 2500.0;
        let g = scattering_gain(&path(50.0, 50.0), &tree, &ctx).unwrap();
        assert!((g.norm() - expected).abs() < 1e-15 * expected.max(1.0));
        let doubled = scattering_gain(&path(100.0, 50.0), &tree, &ctx).unwrap();
        assert!((doubled.norm() * 2.0 - g.norm()).abs() < 1e-12 * g.norm());
        let mut opaque = tree.clone();
        opaque.ret.absorption = 1.0;
        assert_eq!(scattering_gain(&path(50.0, 50.0), &opaque, &ctx).unwrap().norm(), 0.0);
    }
}
