//! Synthetic star-tracker scenes with ground truth, and a seeded synthetic sky.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::catalog::{OnboardCatalog, RawStar};
use crate::error::{Error, Result};
use crate::geometry::{AxisAngle, UnitVec3};
use crate::solver::{compute_scene_features, SceneStar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Full width of the square field of view, degrees.
    pub fov_deg: f64,
    pub resolution: u32,
    pub mag_limit: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fov_deg: 14.0,
            resolution: 1024,
            mag_limit: 6.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 90.0) || self.resolution == 0 {
            return Err(Error::InvalidConfig(format!("bad camera {self:?}")));
        }
        Ok(())
    }

    fn half_tan(&self) -> f64 {
        (self.fov_deg.to_radians() / 2.0).tan()
    }

    /// Whether a body-frame direction falls inside the square frustum
    /// around +z.
    pub fn in_fov(&self, b: &UnitVec3<f64>) -> bool {
        let t = self.half_tan();
        b.z() > 0.0 && b.x().abs() <= t * b.z() && b.y().abs() <= t * b.z()
    }
}

/// Degrees per pixel under the linear small-angle model.
pub fn pixel_to_angle(pixels: f64, cam: &CameraModel) -> f64 {
    pixels * cam.fov_deg / cam.resolution as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub pos_sigma_deg: f64,
    pub mag_sigma: f64,
    pub false_star_count: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimStar {
    pub v: UnitVec3<f64>,
    pub mag: f64,
    /// Catalog id of the source star; `None` for false stars.
    pub truth_id: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedScene {
    /// Body-to-inertial attitude.
    pub attitude: AxisAngle<f64>,
    pub stars: Vec<SimStar>,
}

impl SimulatedScene {
    pub fn vectors(&self) -> Vec<UnitVec3<f64>> {
        self.stars.iter().map(|s| s.v).collect()
    }

    pub fn mags(&self) -> Vec<f64> {
        self.stars.iter().map(|s| s.mag).collect()
    }

    pub fn truth_ids(&self) -> Vec<Option<u32>> {
        self.stars.iter().map(|s| s.truth_id).collect()
    }

    pub fn false_star_count(&self) -> usize {
        self.stars.iter().filter(|s| s.truth_id.is_none()).count()
    }

    /// Scenes below three stars cannot be solved.
    pub fn is_solvable(&self) -> bool {
        self.stars.len() >= 3
    }

    pub fn scene_stars(&self) -> Result<Vec<SceneStar>> {
        compute_scene_features(&self.vectors(), &self.mags())
    }

    pub fn to_record(&self) -> SceneRecord {
        SceneRecord {
            attitude_axis_angle: self.attitude.r,
            stars: self
                .stars
                .iter()
                .map(|s| StarRecord {
                    v: s.v.to_array(),
                    mag: s.mag,
                    truth_id: s.truth_id,
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &SceneRecord) -> Result<Self> {
        let stars = rec
            .stars
            .iter()
            .map(|s| {
                let n2 = s.v.iter().map(|x| x * x).sum::<f64>();
                // Keep already-unit vectors bit-exact.
                let v = if (n2 - 1.0).abs() <= 1e-12 {
                    UnitVec3::new_unchecked(s.v[0], s.v[1], s.v[2])
                } else {
                    UnitVec3::from_array(s.v)
                        .ok_or_else(|| Error::Format(format!("invalid star vector {:?}", s.v)))?
                };
                Ok(SimStar {
                    v,
                    mag: s.mag,
                    truth_id: s.truth_id,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            attitude: AxisAngle::new(rec.attitude_axis_angle),
            stars,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarRecord {
    pub v: [f64; 3],
    pub mag: f64,
    pub truth_id: Option<u32>,
}

/// One line of a scene file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub attitude_axis_angle: [f64; 3],
    pub stars: Vec<StarRecord>,
}

pub fn write_scenes(scenes: &[SimulatedScene], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in scenes {
        serde_json::to_writer(&mut w, &s.to_record())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scenes(path: impl AsRef<Path>) -> Result<Vec<SimulatedScene>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(SimulatedScene::from_record(&serde_json::from_str(&line)?)?);
    }
    Ok(out)
}

/// Reads the scene on 1-based `line` of a JSON Lines file.
pub fn read_scene_line(path: impl AsRef<Path>, line: usize) -> Result<SimulatedScene> {
    let text = BufReader::new(File::open(path)?)
        .lines()
        .nth(line.saturating_sub(1))
        .ok_or_else(|| Error::Format(format!("scene file has no line {line}")))??;
    SimulatedScene::from_record(&serde_json::from_str(&text)?)
}

/// Generator for scene `index` of a campaign seeded with `seed`.
pub fn scene_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniformly distributed rotation (normalized Gaussian quaternion).
pub fn random_attitude(rng: &mut impl Rng) -> AxisAngle<f64> {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return AxisAngle::from_quaternion(q.map(|x| x / n));
        }
    }
}

fn gauss(rng: &mut impl Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

/// Moves `b` by an isotropic Gaussian offset in its tangent plane.
fn perturb_direction(b: &UnitVec3<f64>, sigma_rad: f64, rng: &mut impl Rng) -> UnitVec3<f64> {
    if sigma_rad == 0.0 {
        return *b;
    }
    let a = b.to_array();
    let helper = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = UnitVec3::new(
        helper[1] * a[2] - helper[2] * a[1],
        helper[2] * a[0] - helper[0] * a[2],
        helper[0] * a[1] - helper[1] * a[0],
    )
    .expect("helper is not parallel");
    let e1 = e1.to_array();
    let e2 = [
        a[1] * e1[2] - a[2] * e1[1],
        a[2] * e1[0] - a[0] * e1[2],
        a[0] * e1[1] - a[1] * e1[0],
    ];
    let (u, w) = (gauss(rng, sigma_rad), gauss(rng, sigma_rad));
    UnitVec3::new(
        a[0] + u * e1[0] + w * e2[0],
        a[1] + u * e1[1] + w * e2[1],
        a[2] + u * e1[2] + w * e2[2],
    )
    .expect("small perturbation of a unit vector")
}

/// Simulates one scene; the attitude is drawn from `noise.seed` when not
/// given.
pub fn generate_scene(
    cat: &OnboardCatalog,
    cam: &CameraModel,
    noise: &NoiseSpec,
    attitude: Option<AxisAngle<f64>>,
) -> SimulatedScene {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    generate_scene_with(cat, cam, noise, attitude, &mut rng)
}

/// Same as [`generate_scene`] drawing from a caller-supplied generator
/// (`noise.seed` is ignored).
pub fn generate_scene_with(
    cat: &OnboardCatalog,
    cam: &CameraModel,
    noise: &NoiseSpec,
    attitude: Option<AxisAngle<f64>>,
    rng: &mut impl Rng,
) -> SimulatedScene {
    let attitude = attitude.unwrap_or_else(|| random_attitude(rng));
    let to_body = attitude.inverse();
    let sigma = noise.pos_sigma_deg.to_radians();

    let mut stars = Vec::new();
    for c in cat.stars() {
        let b = to_body.rotate(&c.c);
        if !cam.in_fov(&b) {
            continue;
        }
        let v = perturb_direction(&b, sigma, rng);
        let mag = c.mag + gauss(rng, noise.mag_sigma);
        if mag > cam.mag_limit || !cam.in_fov(&v) {
            continue;
        }
        stars.push(SimStar {
            v,
            mag,
            truth_id: Some(c.id),
        });
    }

    let t = cam.half_tan();
    let min_mag = cat.min_mag().min(cam.mag_limit);
    for _ in 0..noise.false_star_count {
        let (x, y) = (rng.random_range(-t..=t), rng.random_range(-t..=t));
        let mag = if min_mag < cam.mag_limit {
            rng.random_range(min_mag..=cam.mag_limit)
        } else {
            cam.mag_limit
        };
        stars.push(SimStar {
            v: UnitVec3::new(x, y, 1.0).expect("finite"),
            mag,
            truth_id: None,
        });
    }
    stars.shuffle(rng);
    SimulatedScene { attitude, stars }
}

/// Parameters of the synthetic sky used when no real catalog is at hand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkyModel {
    /// Cumulative count of single stars at `reference_mag`.
    pub count_at_reference: f64,
    pub reference_mag: f64,
    /// log10 growth of the cumulative count per magnitude.
    pub slope: f64,
    pub brightest_mag: f64,
    pub faintest_mag: f64,
    /// Fraction of stars given a close companion.
    pub binary_fraction: f64,
    /// Companion separation range, degrees.
    pub binary_sep_deg: (f64, f64),
}

impl Default for SkyModel {
    fn default() -> Self {
        Self {
            count_at_reference: 4945.0,
            reference_mag: 6.0,
            slope: 0.478,
            brightest_mag: -1.5,
            faintest_mag: 7.5,
            binary_fraction: 0.03,
            binary_sep_deg: (0.002, 0.03),
        }
    }
}

impl SkyModel {
    /// Magnitude whose cumulative count is `n`.
    fn mag_at(&self, n: f64) -> f64 {
        self.reference_mag + (n / self.count_at_reference).log10() / self.slope
    }

    fn count_at(&self, m: f64) -> f64 {
        self.count_at_reference * 10f64.powf(self.slope * (m - self.reference_mag))
    }
}

/// Isotropic random sky whose cumulative magnitude counts follow
/// `SkyModel`, with injected close pairs. Ids are 1-based and dense.
pub fn synthetic_sky(model: &SkyModel, seed: u64) -> Vec<RawStar> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = model.count_at(model.faintest_mag).round() as usize;
    let floor = model.count_at(model.brightest_mag);
    let mut out = Vec::with_capacity(total + total / 20);
    let mut next_id = 1u32;
    for _ in 0..total {
        let n = rng.random_range(floor..model.count_at(model.faintest_mag));
        let mag = model.mag_at(n);
        let z: f64 = rng.random_range(-1.0..1.0);
        let ra: f64 = rng.random_range(0.0..360.0);
        let dec = z.asin().to_degrees();
        out.push(RawStar {
            id: next_id,
            ra,
            dec,
            mag,
        });
        next_id += 1;

        if rng.random_bool(model.binary_fraction) {
            let sep = rng.random_range(model.binary_sep_deg.0..model.binary_sep_deg.1);
            let pa: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let dec2 = (dec + sep * pa.cos()).clamp(-90.0, 90.0);
            let ra2 = (ra + sep * pa.sin() / dec.to_radians().cos().max(1e-3)).rem_euclid(360.0);
            out.push(RawStar {
                id: next_id,
                ra: ra2,
                dec: dec2,
                mag: mag + rng.random_range(0.0..1.0),
            });
            next_id += 1;
        }
    }
    out
}
