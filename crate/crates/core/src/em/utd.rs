use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;

use super::{degenerate, fresnel_coefficients, Polarization, Reflector, WaveContext};
use crate::geometry::DigitalMap;
use crate::tracer::PropagationPath;
use crate::{Error, Result};

/// Distances and angles of one wedge diffraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffractionGeometry {
    /// Source to apex (m).
    pub d_prime: f64,
    /// Apex to observer (m).
    pub d: f64,
    /// Incidence angle from the zero face.
    pub phi_prime: f64,
    /// Diffraction angle from the zero face.
    pub phi: f64,
    /// Exterior angle over π.
    pub n: f64,
}

impl DiffractionGeometry {
    pub fn new(d_prime: f64, d: f64, phi_prime: f64, phi: f64, n: f64) -> Result<Self> {
        if !(d_prime > 0.0 && d > 0.0) {
            return Err(Error::Domain(format!(
                "diffraction distances must be positive ({d_prime}, {d})"
            )));
        }
        if !(n > 0.0 && n <= 2.0) {
            return Err(Error::Domain(format!("wedge factor n must lie in (0, 2], got {n}")));
        }
        let limit = n * PI + 1e-9;
        if !(0.0..=limit).contains(&phi_prime) || !(0.0..=limit).contains(&phi) {
            return Err(Error::Domain(format!(
                "wedge angles must lie in [0, n pi], got phi' = {phi_prime}, phi = {phi}"
            )));
        }
        Ok(Self {
            d_prime,
            d,
            phi_prime,
            phi,
            n,
        })
    }

    /// Distance parameter `L = d'd/(d'+d)`.
    pub fn l(&self) -> f64 {
        self.d_prime * self.d / (self.d_prime + self.d)
    }

    /// `[γ1, γ2, γ3, γ4]`.
    pub fn gammas(&self) -> [f64; 4] {
        let two_n = 2.0 * self.n;
        let minus = self.phi - self.phi_prime;
        let plus = self.phi + self.phi_prime;
        [
            (PI - minus) / two_n,
            (PI + minus) / two_n,
            (PI - plus) / two_n,
            (PI + plus) / two_n,
        ]
    }
}

/// Fresnel integrals `(C(x), S(x))` with the `π t²/2` kernel.
pub fn fresnel_integrals(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (c, s) = if ax <= SERIES_LIMIT {
        fresnel_series(ax)
    } else {
        let comp = fresnel_tail(ax);
        (0.5 - comp.re, 0.5 - comp.im)
    };
    if x < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

const SERIES_LIMIT: f64 = 1.5;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 200;

fn fresnel_series(ax: f64) -> (f64, f64) {
    if ax < 1e-150 {
        return (ax, 0.0);
    }
    let fact = FRAC_PI_2 * ax * ax;
    let (mut sum, mut sums, mut sumc) = (0.0, 0.0, ax);
    let mut sign = 1.0;
    let mut odd = true;
    let mut term = ax;
    let mut n = 3.0;
    for k in 1..MAX_ITER {
        term *= fact / k as f64;
        sum += sign * term / n;
        let test = sum.abs() * EPS;
        if odd {
            sign = -sign;
            sums = sum;
            sum = sumc;
        } else {
            sumc = sum;
            sum = sums;
        }
        if term < test {
            break;
        }
        odd = !odd;
        n += 2.0;
    }
    (sumc, sums)
}

/// Continued fraction of the complementary error function for `x > 1.5`,
/// with the oscillating factor `e^{jπx²/2}` left out.
fn fresnel_tail_unrotated(ax: f64) -> Complex64 {
    let pix2 = PI * ax * ax;
    let mut b = Complex64::new(1.0, -pix2);
    let mut cc = Complex64::new(1e300, 0.0);
    let mut d = b.inv();
    let mut h = d;
    let mut n = -1.0;
    for _ in 2..MAX_ITER {
        n += 2.0;
        let a = -n * (n + 1.0);
        b += 4.0;
        d = (d * a + b).inv();
        cc = b + cc.inv() * a;
        let del = cc * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < EPS {
            break;
        }
    }
    h *= Complex64::new(ax, -ax);
    Complex64::new(0.5, 0.5) * h
}

/// `(1/2 − C(x)) + j(1/2 − S(x)) = e^{jπx²/2} · fresnel_tail_unrotated(x)`.
fn fresnel_tail(ax: f64) -> Complex64 {
    fresnel_tail_unrotated(ax) * Complex64::from_polar(1.0, FRAC_PI_2 * ax * ax)
}

/// Transition function `F(x) = 2j√x e^{jx} ∫_{√x}^∞ e^{-ju²} du`.
pub fn utd_transition_f(x: f64) -> Result<Complex64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "transition function needs finite x > 0, got {x}"
        )));
    }
    let w = (2.0 * x / PI).sqrt();
    let scale = Complex64::new(0.0, 2.0 * x.sqrt() * FRAC_PI_2.sqrt());
    if w <= SERIES_LIMIT {
        let (c, s) = fresnel_series(w);
        let tail = Complex64::new(0.5 - c, -(0.5 - s));
        Ok(scale * Complex64::from_polar(1.0, x) * tail)
    } else {
        // The tail carries e^{-jx} after conjugation, cancelling e^{jx}.
        Ok(scale * fresnel_tail_unrotated(w).conj())
    }
}

/// Singular terms closer than this to a multiple of π use the boundary form.
const BOUNDARY_WINDOW: f64 = 1e-4;

/// `cot γ · F(a sin²γ)`, finite across shadow and reflection boundaries.
fn cot_f(gamma: f64, a: f64) -> Result<Complex64> {
    let m = (gamma / PI).round();
    let delta = gamma - m * PI;
    if delta.abs() < BOUNDARY_WINDOW {
        // Small-argument expansion of F, multiplied by cot δ ≈ (1 − δ²/3)/δ.
        let e = Complex64::from_polar(1.0, FRAC_PI_4);
        let sign = if delta == 0.0 { 0.0 } else { delta.signum() };
        let series = (PI * a).sqrt() * sign - e * (2.0 * a * delta) - e.conj() * (2.0 / 3.0 * a * a * delta.powi(3));
        return Ok(series * (1.0 - delta * delta / 3.0) * Complex64::from_polar(1.0, FRAC_PI_4 + a * delta * delta));
    }
    let s = gamma.sin();
    Ok(utd_transition_f(a * s * s)? / gamma.tan())
}

/// UTD coefficient `D = D1 + D2 + Γ0 D3 + Γn D4`.
pub fn diffraction_coefficient(
    geom: &DiffractionGeometry,
    gamma0: Complex64,
    gamma_n: Complex64,
    k: f64,
) -> Result<Complex64> {
    let n = geom.n;
    let a = 2.0 * k * geom.l() * n * n;
    let pre = -Complex64::from_polar(1.0, -FRAC_PI_4) / (2.0 * n * (2.0 * PI * k).sqrt());
    let [g1, g2, g3, g4] = geom.gammas();
    let d = cot_f(g1, a)? + cot_f(g2, a)? + gamma0 * cot_f(g3, a)? + gamma_n * cot_f(g4, a)?;
    let d = pre * d;
    if !(d.re.is_finite() && d.im.is_finite()) {
        return Err(Error::Domain(format!("diffraction coefficient overflow at {geom:?}")));
    }
    Ok(d)
}

/// Diffracted-ray gain `(λ/4π) · e^{-jk d_T}/d_T · D · sqrt(d_T/(d'd))`.
///
/// The `λ/4π` factor puts the diffracted field on the same footing as the
/// Friis LoS gain, so the sum is continuous across the shadow boundary.
pub fn diffraction_gain(
    geom: &DiffractionGeometry,
    gamma0: Complex64,
    gamma_n: Complex64,
    ctx: &WaveContext,
) -> Result<Complex64> {
    let d_total = geom.d + geom.d_prime;
    let coefficient = diffraction_coefficient(geom, gamma0, gamma_n, ctx.wavenumber)?;
    let spread = (d_total / (geom.d_prime * geom.d)).sqrt() / d_total;
    Ok(coefficient * ctx.phasor(d_total) * (spread * ctx.wavelength / (4.0 * PI)))
}

/// Folds an angle measured from a face onto a grazing angle in `(0, π/2]`.
fn grazing(angle: f64) -> f64 {
    let a = angle.rem_euclid(PI);
    a.min(PI - a).max(1e-9)
}

/// Gain of a traced diffraction path, face coefficients taken at the
/// incidence angle (zero face) and the diffraction angle (n face).
pub fn wedge_diffraction_gain(
    path: &PropagationPath,
    map: &DigitalMap,
    ctx: &WaveContext,
    pol: Polarization,
) -> Result<Complex64> {
    let id = path
        .wedge()
        .ok_or_else(|| degenerate(path, "diffraction path without a wedge"))?;
    let wedge = map.wedge(id).ok_or_else(|| degenerate(path, "unknown wedge"))?;
    if path.vertices.len() != 3 {
        return Err(degenerate(path, "diffraction path must have three vertices"));
    }
    let (bs, apex, ue) = (path.vertices[0], path.vertices[1], path.vertices[2]);
    let geom = DiffractionGeometry::new(
        bs.distance(apex),
        apex.distance(ue),
        wedge.angle_of(bs.xy()),
        wedge.angle_of(ue.xy()),
        wedge.n,
    )
    .map_err(|e| degenerate(path, &e.to_string()))?;
    let face = |id| {
        let s = map.surface(id).ok_or_else(|| degenerate(path, "unknown wedge face"))?;
        map.material(s.material)
            .map(|m| m.permittivity)
            .ok_or_else(|| degenerate(path, "unknown material"))
    };
    let g0 = pol.select(
        Reflector::Wall,
        fresnel_coefficients(grazing(geom.phi_prime), face(wedge.zero_face)?)?,
    );
    let gn = pol.select(
        Reflector::Wall,
        fresnel_coefficients(grazing(geom.n * PI - geom.phi), face(wedge.n_face)?)?,
    );
    diffraction_gain(&geom, g0, gn, ctx)
}
