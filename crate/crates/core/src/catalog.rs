//! Onboard star catalog: ingestion, triplet features, persistence and
//! per-scene-star sub-catalog extraction.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{angular_distance, UnitVec3};
use crate::solver::SceneStar;

pub const MAGIC: &[u8; 8] = b"ROSIACAT";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MIN_SEP_DEG: f64 = 0.04;
pub const DEFAULT_MAG_LIMIT: f64 = 6.0;

const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8 + 32;
const STAR_LEN: usize = 4 + 3 * 8 + 8 + 2 * 8;

/// One row of a raw catalog, angles in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawStar {
    pub id: u32,
    #[serde(rename = "ra_deg")]
    pub ra: f64,
    #[serde(rename = "dec_deg")]
    pub dec: f64,
    #[serde(rename = "vmag")]
    pub mag: f64,
}

impl RawStar {
    pub fn unit_vector(&self) -> UnitVec3<f64> {
        UnitVec3::from_ra_dec(self.ra.to_radians(), self.dec.to_radians())
    }

    fn validate(&self) -> Result<()> {
        let ok = (0.0..360.0).contains(&self.ra)
            && (-90.0..=90.0).contains(&self.dec)
            && self.mag.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "star {}: ra {} dec {} mag {} out of range",
                self.id, self.ra, self.dec, self.mag
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatalogStar {
    pub id: u32,
    pub c: UnitVec3<f64>,
    pub mag: f64,
    /// Angular distances to the nearest and second nearest catalog stars.
    pub phi: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogMeta {
    pub mag_limit: f64,
    pub min_sep: f64,
    pub source_hash: [u8; 32],
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnboardCatalog {
    stars: Vec<CatalogStar>,
    meta: CatalogMeta,
}

/// Indices into an [`OnboardCatalog`] feasible for one scene star.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubCatalog {
    pub indices: Vec<u32>,
}

impl SubCatalog {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Smallest and second smallest angular distance from `vs[i]` to the rest.
/// O(n^2) overall when called for every `i`.
pub fn nearest_two(vs: &[UnitVec3<f64>], i: usize) -> [f64; 2] {
    let mut best = [f64::NEG_INFINITY; 2];
    let mut who = [usize::MAX; 2];
    let ci = &vs[i];
    for (k, v) in vs.iter().enumerate() {
        if k == i {
            continue;
        }
        let d = ci.dot(v);
        if d > best[0] {
            best[1] = best[0];
            who[1] = who[0];
            best[0] = d;
            who[0] = k;
        } else if d > best[1] {
            best[1] = d;
            who[1] = k;
        }
    }
    let angle = |k: usize| {
        if k == usize::MAX {
            std::f64::consts::PI
        } else {
            angular_distance(ci, &vs[k])
        }
    };
    let (a, b) = (angle(who[0]), angle(who[1]));
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Indices of stars that take part in no pair closer than `min_sep`.
fn isolated(vs: &[UnitVec3<f64>], min_sep: f64) -> Vec<bool> {
    let mut keep = vec![true; vs.len()];
    if min_sep <= 0.0 {
        return keep;
    }
    // Sweep on z: two vectors closer than min_sep differ in z by less than that.
    let mut order: Vec<usize> = (0..vs.len()).collect();
    order.sort_by(|&a, &b| vs[a].z().total_cmp(&vs[b].z()));
    for (p, &i) in order.iter().enumerate() {
        for &j in &order[p + 1..] {
            if vs[j].z() - vs[i].z() >= min_sep {
                break;
            }
            if angular_distance(&vs[i], &vs[j]) < min_sep {
                keep[i] = false;
                keep[j] = false;
            }
        }
    }
    keep
}

fn hash_raw(raw: &[RawStar]) -> [u8; 32] {
    let mut h = Sha256::new();
    for s in raw {
        h.update(s.id.to_le_bytes());
        h.update(s.ra.to_le_bytes());
        h.update(s.dec.to_le_bytes());
        h.update(s.mag.to_le_bytes());
    }
    h.finalize().into()
}

/// Filters by magnitude, removes close pairs (both members), computes
/// triplet features and sorts by magnitude.
pub fn build_onboard_catalog(raw: &[RawStar], mag_limit: f64, min_sep: f64) -> Result<OnboardCatalog> {
    for s in raw {
        s.validate()?;
    }
    let entries = raw.iter().map(|s| (s.id, s.unit_vector(), s.mag)).collect();
    OnboardCatalog::from_vectors(entries, mag_limit, min_sep, hash_raw(raw))
}

impl OnboardCatalog {
    /// Same pipeline as [`build_onboard_catalog`] for stars already given as
    /// unit vectors.
    pub fn from_vectors(
        entries: Vec<(u32, UnitVec3<f64>, f64)>,
        mag_limit: f64,
        min_sep: f64,
        source_hash: [u8; 32],
    ) -> Result<Self> {
        let bright: Vec<_> = entries.into_iter().filter(|e| e.2 <= mag_limit).collect();
        let vs: Vec<_> = bright.iter().map(|e| e.1).collect();
        let keep = isolated(&vs, min_sep);
        let kept: Vec<_> = bright
            .into_iter()
            .zip(keep)
            .filter_map(|(e, k)| k.then_some(e))
            .collect();
        if kept.len() < 3 {
            return Err(Error::EmptyCatalog { found: kept.len() });
        }
        let vs: Vec<_> = kept.iter().map(|e| e.1).collect();
        let mut stars: Vec<CatalogStar> = kept
            .iter()
            .enumerate()
            .map(|(i, &(id, c, mag))| CatalogStar {
                id,
                c,
                mag,
                phi: nearest_two(&vs, i),
            })
            .collect();
        stars.sort_by(|a, b| a.mag.total_cmp(&b.mag).then(a.id.cmp(&b.id)));
        Ok(Self {
            stars,
            meta: CatalogMeta {
                mag_limit,
                min_sep,
                source_hash,
            },
        })
    }

    pub fn stars(&self) -> &[CatalogStar] {
        &self.stars
    }

    pub fn star(&self, index: u32) -> &CatalogStar {
        &self.stars[index as usize]
    }

    pub fn len(&self) -> usize {
        self.stars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stars.is_empty()
    }

    pub fn meta(&self) -> &CatalogMeta {
        &self.meta
    }

    pub fn min_mag(&self) -> f64 {
        self.stars.first().map_or(f64::NAN, |s| s.mag)
    }

    pub fn index_of_id(&self, id: u32) -> Option<u32> {
        self.stars.iter().position(|s| s.id == id).map(|i| i as u32)
    }

    /// Index range of stars with magnitude in `[lo, hi]`, by binary search.
    pub fn mag_window(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.stars.partition_point(|s| s.mag < lo);
        let b = self.stars.partition_point(|s| s.mag <= hi);
        a..b.max(a)
    }

    pub fn serialized_len(&self) -> usize {
        HEADER_LEN + STAR_LEN * self.stars.len() + 4
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(self.serialized_len());
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        b.extend_from_slice(&(self.stars.len() as u32).to_le_bytes());
        b.extend_from_slice(&self.meta.mag_limit.to_le_bytes());
        b.extend_from_slice(&self.meta.min_sep.to_le_bytes());
        b.extend_from_slice(&self.meta.source_hash);
        for s in &self.stars {
            b.extend_from_slice(&s.id.to_le_bytes());
            for x in s.c.to_array() {
                b.extend_from_slice(&x.to_le_bytes());
            }
            b.extend_from_slice(&s.mag.to_le_bytes());
            b.extend_from_slice(&s.phi[0].to_le_bytes());
            b.extend_from_slice(&s.phi[1].to_le_bytes());
        }
        let crc = crc32fast::hash(&b);
        b.extend_from_slice(&crc.to_le_bytes());
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |m: &str| Error::Format(m.to_string());
        if bytes.len() < HEADER_LEN + 4 {
            return Err(fmt("file shorter than header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(fmt("bad magic"));
        }
        let mut r = Cursor { b: bytes, at: 8 };
        let version = r.u32();
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                expected: FORMAT_VERSION,
                found: version,
            });
        }
        let count = r.u32() as usize;
        let expected_len = HEADER_LEN + STAR_LEN * count + 4;
        if bytes.len() != expected_len {
            return Err(Error::Format(format!(
                "length {} does not match {count} stars ({expected_len} bytes)",
                bytes.len()
            )));
        }
        let body = &bytes[..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(fmt("checksum mismatch"));
        }
        let mag_limit = r.f64();
        let min_sep = r.f64();
        let mut source_hash = [0u8; 32];
        source_hash.copy_from_slice(&bytes[r.at..r.at + 32]);
        r.at += 32;

        let mut stars = Vec::with_capacity(count);
        for _ in 0..count {
            let id = r.u32();
            let v = [r.f64(), r.f64(), r.f64()];
            let mag = r.f64();
            let phi = [r.f64(), r.f64()];
            let n2 = v.iter().map(|x| x * x).sum::<f64>();
            if !((n2 - 1.0).abs() <= 1e-9) {
                return Err(Error::Format(format!("star {id}: vector is not unit length")));
            }
            if !(phi[0] > 0.0 && phi[0] <= phi[1] && mag.is_finite()) {
                return Err(Error::Format(format!("star {id}: invalid features")));
            }
            stars.push(CatalogStar {
                id,
                c: UnitVec3::new_unchecked(v[0], v[1], v[2]),
                mag,
                phi,
            });
        }
        if stars.windows(2).any(|w| w[0].mag > w[1].mag) {
            return Err(fmt("stars not sorted by magnitude"));
        }
        if stars.len() < 3 {
            return Err(Error::EmptyCatalog { found: stars.len() });
        }
        Ok(Self {
            stars,
            meta: CatalogMeta {
                mag_limit,
                min_sep,
                source_hash,
            },
        })
    }
}

struct Cursor<'a> {
    b: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn u32(&mut self) -> u32 {
        let v = u32::from_le_bytes(self.b[self.at..self.at + 4].try_into().unwrap());
        self.at += 4;
        v
    }

    fn f64(&mut self) -> f64 {
        let v = f64::from_le_bytes(self.b[self.at..self.at + 8].try_into().unwrap());
        self.at += 8;
        v
    }
}

pub fn save_catalog(cat: &OnboardCatalog, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&cat.to_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<OnboardCatalog> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    OnboardCatalog::from_bytes(&bytes)
}

/// Reads `id,ra_deg,dec_deg,vmag` rows.
pub fn read_raw_csv(path: impl AsRef<Path>) -> Result<Vec<RawStar>> {
    read_raw_csv_from(File::open(path)?)
}

pub fn read_raw_csv_from(reader: impl Read) -> Result<Vec<RawStar>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    if headers.iter().collect::<Vec<_>>() != ["id", "ra_deg", "dec_deg", "vmag"] {
        return Err(Error::Format(format!("unexpected header {headers:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let s: RawStar = row?;
        s.validate()?;
        out.push(s);
    }
    Ok(out)
}

pub fn write_raw_csv(stars: &[RawStar], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if stars.is_empty() {
        w.write_record(["id", "ra_deg", "dec_deg", "vmag"])?;
    }
    for s in stars {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Whether catalog star `c` is feasible for scene star `s` using the first
/// `k` triplet features.
#[inline]
pub fn feasible(s: &SceneStar, c: &CatalogStar, alpha_eps: f64, eps_v: f64, k: usize) -> bool {
    (c.mag - s.mag).abs() <= eps_v
        && (0..k.min(2)).all(|t| (c.phi[t] - s.theta[t]).abs() <= 2.0 * alpha_eps)
}

/// One sub-catalog per scene star: magnitude window by binary search, then
/// the triplet filter on the first `k` features (`k = 0` is magnitude only).
pub fn extract_sub_catalogs(
    scene: &[SceneStar],
    cat: &OnboardCatalog,
    alpha_eps: f64,
    eps_v: f64,
    k: usize,
) -> Vec<SubCatalog> {
    scene
        .iter()
        .map(|s| {
            // Slightly wide window; the exact predicate decides membership.
            let slack = 1e-9 * (1.0 + s.mag.abs() + eps_v);
            let window = cat.mag_window(s.mag - eps_v - slack, s.mag + eps_v + slack);
            let indices = window
                .filter(|&j| feasible(s, &cat.stars[j], alpha_eps, eps_v, k))
                .map(|j| j as u32)
                .collect();
            SubCatalog { indices }
        })
        .collect()
}
