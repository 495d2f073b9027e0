#![allow(dead_code)]

use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use starid::catalog::{build_onboard_catalog, OnboardCatalog, DEFAULT_MIN_SEP_DEG};
use starid::geometry::{AxisAngle, RotationCube, UnitVec3};
use starid::simulator::{synthetic_sky, SkyModel};
use starid::solver::{SceneStar, SolverConfig};

pub const SKY_SEED: u64 = 2024;

pub fn sky_catalog(mag_limit: f64) -> OnboardCatalog {
    let sky = synthetic_sky(&SkyModel::default(), SKY_SEED);
    build_onboard_catalog(&sky, mag_limit, DEFAULT_MIN_SEP_DEG.to_radians()).unwrap()
}

pub fn v3(u: &UnitVec3<f64>) -> Vector3<f64> {
    Vector3::from(u.to_array())
}

pub fn nalgebra_rotation(r: &AxisAngle<f64>) -> Rotation3<f64> {
    Rotation3::new(Vector3::from(r.r))
}

/// Angle between two vectors via the dot product.
pub fn angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.angle(b)
}

/// Brute-force sub-catalog filter over the whole catalog.
pub fn brute_subcat(cat: &OnboardCatalog, s: &SceneStar, alpha_eps: f64, eps_v: f64, k: usize) -> Vec<u32> {
    cat.stars()
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            (c.mag - s.mag).abs() <= eps_v && (0..k).all(|t| (c.phi[t] - s.theta[t]).abs() <= 2.0 * alpha_eps)
        })
        .map(|(j, _)| j as u32)
        .collect()
}

/// Nearest-two angular distances by sorting every pairwise angle.
pub fn brute_nearest_two(vs: &[Vector3<f64>], i: usize) -> [f64; 2] {
    let mut d: Vec<f64> = (0..vs.len()).filter(|&k| k != i).map(|k| angle(&vs[i], &vs[k])).collect();
    d.sort_by(f64::total_cmp);
    [d[0], d[1]]
}

pub struct Verdict {
    pub count: usize,
    /// Some pair lies within `margin` of the threshold.
    pub borderline: bool,
}

/// Counts scene stars with some sub-catalog star within `threshold` after
/// rotating by `rot`.
pub fn brute_count(
    cat: &OnboardCatalog,
    scene: &[SceneStar],
    subcats: &[Vec<u32>],
    rot: &Rotation3<f64>,
    threshold: f64,
    margin: f64,
) -> Verdict {
    let mut count = 0;
    let mut borderline = false;
    for (s, sub) in scene.iter().zip(subcats) {
        let v = rot * v3(&s.s);
        let mut hit = false;
        for &j in sub {
            let d = angle(&v, &v3(&cat.star(j).c));
            if (d - threshold).abs() < margin {
                borderline = true;
            }
            hit |= d <= threshold;
        }
        count += usize::from(hit);
    }
    Verdict { count, borderline }
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Uniform sample from the pi-ball.
pub fn random_in_ball(rng: &mut ChaCha8Rng) -> AxisAngle<f64> {
    loop {
        let r = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        if r.iter().map(|x: &f64| x * x).sum::<f64>() <= 1.0 {
            return AxisAngle::new(r.map(|x| x * std::f64::consts::PI));
        }
    }
}

/// Axis-angle vector of `truth` followed by a rotation of up to `max_deg`
/// about a random axis, canonicalized into the pi-ball.
pub fn perturbed(truth: &AxisAngle<f64>, max_deg: f64, rng: &mut ChaCha8Rng) -> AxisAngle<f64> {
    let axis = random_unit(rng);
    let ang = rng.random_range(0.0..max_deg).to_radians();
    let d = Rotation3::from_axis_angle(&Unit::new_normalize(axis), ang);
    let r = d * nalgebra_rotation(truth);
    AxisAngle::new(r.scaled_axis().into())
}

/// The tiling cube at `depth` that contains `r`.
pub fn cube_containing(r: &AxisAngle<f64>, depth: u32) -> RotationCube<f64> {
    let pi = std::f64::consts::PI;
    let h = pi / f64::from(1u32 << depth.min(30));
    let center = r.r.map(|x| {
        let k = ((x + pi) / (2.0 * h)).floor();
        -pi + (2.0 * k + 1.0) * h
    });
    RotationCube { center, half_side: h }
}

/// Sample inside `cube` ∩ pi-ball: uniform by rejection when the overlap is
/// large, otherwise a random point on the segment from the cube point
/// nearest the origin toward a uniform cube point, cut at the ball surface.
pub fn sample_in_cube(cube: &RotationCube<f64>, rng: &mut ChaCha8Rng, tries: usize) -> Option<AxisAngle<f64>> {
    let pi = std::f64::consts::PI;
    let uniform = |rng: &mut ChaCha8Rng| cube.center.map(|c| c + rng.random_range(-cube.half_side..cube.half_side));
    for _ in 0..tries {
        let a = AxisAngle::new(uniform(rng));
        if a.is_in_pi_ball() {
            return Some(a);
        }
    }
    let lo = cube.lower();
    let hi = cube.upper();
    let m: [f64; 3] = std::array::from_fn(|k| 0f64.clamp(lo[k], hi[k]));
    if AxisAngle::new(m).angle() > pi {
        return None;
    }
    let u = uniform(rng);
    let at = |t: f64| AxisAngle::new(std::array::from_fn(|k| m[k] + t * (u[k] - m[k])));
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if at(mid).angle() <= pi {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(at(rng.random_range(0.0..=a)))
}

pub fn cfg_s2() -> SolverConfig {
    SolverConfig::s2()
}
