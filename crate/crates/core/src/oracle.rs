//! Brute-force references: exhaustive image-method enumeration, straight-line
//! unfolding of traced rays and quadrature of the UTD transition integral.
//!
//! These are slow on purpose and guarded against large inputs.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use num_complex::Complex64;

use crate::geometry::{segment_blocked, DigitalMap, Surface, SurfaceId, Vec2, SELF_HIT_EPS};
use crate::{Error, Result};

/// Largest number of surface sequences [`enumerate_image_paths`] will try.
pub const MAX_SEQUENCES: f64 = 1e7;

/// One image-method candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSolution {
    pub surfaces: Vec<SurfaceId>,
    /// `[source, p1, .., pk, receiver]`; empty when the unfolding failed.
    pub vertices: Vec<Vec2>,
    /// Every point on its segment and every leg unobstructed.
    pub valid: bool,
}

fn mirror(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let e = (b - a).normalized();
    let n = Vec2::new(-e.y, e.x);
    p - n * (2.0 * (p - a).dot(n))
}

/// Solves one surface sequence by successive mirroring of the source and
/// backward intersection from the receiver.
pub fn solve_sequence(map: &DigitalMap, source: Vec2, receiver: Vec2, sequence: &[SurfaceId]) -> ImageSolution {
    let invalid = ImageSolution {
        surfaces: sequence.to_vec(),
        vertices: Vec::new(),
        valid: false,
    };
    let Some(walls) = sequence
        .iter()
        .map(|&id| map.surface(id))
        .collect::<Option<Vec<&Surface>>>()
    else {
        return invalid;
    };
    let mut images = vec![source];
    for w in &walls {
        let last = *images.last().unwrap();
        images.push(mirror(last, w.p1, w.p2));
    }
    let mut points = vec![Vec2::ZERO; walls.len()];
    let mut from = receiver;
    for k in (0..walls.len()).rev() {
        let w = walls[k];
        let e = (w.p2 - w.p1).normalized();
        let n = Vec2::new(-e.y, e.x);
        let dir = images[k + 1] - from;
        let denom = dir.dot(n);
        if denom == 0.0 {
            return invalid;
        }
        let s = (w.p1 - from).dot(n) / denom;
        if !(s > 0.0 && s < 1.0) {
            return invalid;
        }
        let p = from + dir * s;
        let along = (p - w.p1).dot(e);
        if along < 0.0 || along > w.length() {
            return invalid;
        }
        points[k] = p;
        from = p;
    }
    let mut vertices = vec![source];
    vertices.extend(points);
    vertices.push(receiver);
    let segments: Vec<(Vec2, Vec2)> = map.surfaces.iter().map(|s| (s.p1, s.p2)).collect();
    let valid = vertices
        .windows(2)
        .all(|l| l[0].distance(l[1]) > SELF_HIT_EPS && !segment_blocked(l[0], l[1], segments.iter().copied()));
    ImageSolution {
        surfaces: sequence.to_vec(),
        vertices,
        valid,
    }
}

/// Every valid reflection path of order `1..=max_order` between `source`
/// and `receiver`, over all sequences without immediate repeats. Sorted by
/// surface sequence.
pub fn enumerate_image_paths(
    map: &DigitalMap,
    source: Vec2,
    receiver: Vec2,
    max_order: usize,
) -> Result<Vec<ImageSolution>> {
    let b = map.surfaces.len() as f64;
    if b.powi(max_order as i32) > MAX_SEQUENCES {
        return Err(Error::SizeGuard(format!(
            "{} surfaces at order {max_order} exceeds {MAX_SEQUENCES:e} sequences",
            map.surfaces.len()
        )));
    }
    let ids: Vec<SurfaceId> = map.surfaces.iter().map(|s| s.id).collect();
    let mut out = Vec::new();
    let mut seq = Vec::with_capacity(max_order);
    fn recurse(
        map: &DigitalMap,
        ids: &[SurfaceId],
        source: Vec2,
        receiver: Vec2,
        max_order: usize,
        seq: &mut Vec<SurfaceId>,
        out: &mut Vec<ImageSolution>,
    ) {
        for &id in ids {
            if seq.last() == Some(&id) {
                continue;
            }
            seq.push(id);
            let sol = solve_sequence(map, source, receiver, seq);
            if sol.valid {
                out.push(sol);
            }
            if seq.len() < max_order {
                recurse(map, ids, source, receiver, max_order, seq, out);
            }
            seq.pop();
        }
    }
    recurse(map, &ids, source, receiver, max_order, &mut seq, &mut out);
    out.sort_by(|a, b| a.surfaces.cmp(&b.surfaces));
    Ok(out)
}

/// Reflection about a line, as `x ↦ A x + c`.
#[derive(Debug, Clone, Copy)]
struct Affine {
    a: [[f64; 2]; 2],
    c: Vec2,
}

impl Affine {
    const IDENTITY: Affine = Affine {
        a: [[1.0, 0.0], [0.0, 1.0]],
        c: Vec2::ZERO,
    };

    fn apply(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            self.a[0][0] * p.x + self.a[0][1] * p.y + self.c.x,
            self.a[1][0] * p.x + self.a[1][1] * p.y + self.c.y,
        )
    }

    fn reflection(p: Vec2, q: Vec2) -> Affine {
        let e = (q - p).normalized();
        // A = 2 e eᵀ − I, c = p − A p.
        let a = [
            [2.0 * e.x * e.x - 1.0, 2.0 * e.x * e.y],
            [2.0 * e.x * e.y, 2.0 * e.y * e.y - 1.0],
        ];
        let ap = Vec2::new(a[0][0] * p.x + a[0][1] * p.y, a[1][0] * p.x + a[1][1] * p.y);
        Affine { a, c: p - ap }
    }

    /// `self ∘ other`.
    fn after(&self, other: &Affine) -> Affine {
        let mut a = [[0.0; 2]; 2];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.a[i][0] * other.a[0][j] + self.a[i][1] * other.a[1][j];
            }
        }
        Affine {
            a,
            c: self.apply(other.c),
        }
    }
}

/// Hit points of a ray launched from `origin` at `angle` that reflects off
/// `sequence` in order, found by unfolding: the walls are mirrored into one
/// straight line of sight and each hit is mapped back. `None` if the
/// straight line misses an unfolded wall line.
pub fn unfold_ray(map: &DigitalMap, origin: Vec2, angle: f64, sequence: &[SurfaceId]) -> Option<Vec<Vec2>> {
    let dir = Vec2::new(angle.cos(), angle.sin());
    // `to_unfolded` maps real space into the unfolded frame; `to_real` is its inverse.
    let mut to_unfolded = Affine::IDENTITY;
    let mut to_real = Affine::IDENTITY;
    let mut points = vec![origin];
    for &id in sequence {
        let w = map.surface(id)?;
        let (a, b) = (to_unfolded.apply(w.p1), to_unfolded.apply(w.p2));
        let e = b - a;
        let denom = dir.cross(e);
        if denom == 0.0 {
            return None;
        }
        let t = (a - origin).cross(e) / denom;
        let q = origin + dir * t;
        points.push(to_real.apply(q));
        let m = Affine::reflection(a, b);
        to_real = to_real.after(&m);
        to_unfolded = m.after(&to_unfolded);
    }
    Some(points)
}

/// `F(x)` by adaptive Simpson quadrature of the defining integral along the
/// steepest-descent contour `u = √x + e^{-jπ/4} t`:
///
/// `F(x) = 2j√x e^{-jπ/4} ∫_0^∞ exp(−√(2x) (1+j) t − t²) dt`.
pub fn transition_integral_quadrature(x: f64) -> Result<Complex64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("quadrature needs finite x > 0, got {x}")));
    }
    let a = x.sqrt();
    let f = |t: f64| Complex64::from_polar((-SQRT_2 * a * t - t * t).exp(), -SQRT_2 * a * t);
    // The integrand is below 1e-30 beyond t = 9.
    let upper = 9.0;
    let tol = 1e-12 / (1.0 + 2.0 * a);
    let j = adaptive_simpson(&f, 0.0, upper, tol, 60)?;
    Ok(Complex64::new(0.0, 2.0 * a) * Complex64::from_polar(1.0, -FRAC_PI_4) * j)
}

/// Three-term small-argument form of `F`.
pub fn transition_small_argument(x: f64) -> Complex64 {
    let e = Complex64::from_polar(1.0, FRAC_PI_4);
    ((PI * x).sqrt() - e * (2.0 * x) - e.conj() * (2.0 / 3.0 * x * x)) * Complex64::from_polar(1.0, FRAC_PI_4 + x)
}

fn adaptive_simpson(f: &impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64, depth: u32) -> Result<Complex64> {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Result<Complex64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
    let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
    let delta = left + right - whole;
    if delta.norm() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Convergence(format!(
            "adaptive Simpson on [{a}, {b}] did not reach {tol:e}"
        )));
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}
