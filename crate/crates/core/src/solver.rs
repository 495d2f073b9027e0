//! Branch-and-bound rotation search over the axis-angle pi-ball.
//!
//! Each scene star gets a sub-catalog of feasible catalog stars and a
//! circular R-tree over their projected tolerance patches. The search pops
//! the cube with the largest upper bound, evaluates the objective at its
//! center, and splits it into octants until no cube can beat the incumbent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::catalog::{extract_sub_catalogs, nearest_two, OnboardCatalog, SubCatalog};
use crate::error::{Error, Result};
use crate::geometry::{angular_distance, AxisAngle, RotationCube, UnitVec3};
use crate::projection::{project_patch, project_vector, SphericalPatch};
use crate::spatial_index::{CircularRTree, QueryStats};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneStar {
    /// Body-frame direction.
    pub s: UnitVec3<f64>,
    pub mag: f64,
    /// Angular distances to the two nearest scene stars, ascending.
    pub theta: [f64; 2],
}

/// Attaches nearest-two features to every scene star.
pub fn compute_scene_features(vectors: &[UnitVec3<f64>], mags: &[f64]) -> Result<Vec<SceneStar>> {
    if vectors.len() != mags.len() {
        return Err(Error::InvalidConfig(format!(
            "{} vectors but {} magnitudes",
            vectors.len(),
            mags.len()
        )));
    }
    if vectors.len() < 3 {
        return Err(Error::TooFewStars {
            found: vectors.len(),
        });
    }
    Ok((0..vectors.len())
        .map(|i| SceneStar {
            s: vectors[i],
            mag: mags[i],
            theta: nearest_two(vectors, i),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Angular tolerance in radians.
    pub alpha_eps: f64,
    /// Magnitude tolerance.
    pub eps_v: f64,
    /// Number of triplet features used by the sub-catalog filter (0..=2).
    pub k: usize,
    pub min_matches: usize,
    pub min_match_fraction: f64,
    /// `false` selects the magnitude-only baseline objective and bound.
    pub use_triplet_bound: bool,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::s2()
    }
}

impl SolverConfig {
    fn preset(alpha_eps_deg: f64, eps_v: f64) -> Self {
        Self {
            alpha_eps: alpha_eps_deg.to_radians(),
            eps_v,
            k: 2,
            min_matches: 3,
            min_match_fraction: 0.30,
            use_triplet_bound: true,
            max_iterations: 1_000_000,
        }
    }

    pub fn s1() -> Self {
        Self::preset(0.0205, 0.45)
    }

    pub fn s2() -> Self {
        Self::preset(0.0275, 0.6)
    }

    pub fn s3() -> Self {
        Self::preset(0.0275, 1.2)
    }

    /// Looks up `S1`, `S2` or `S3` (case-insensitive).
    pub fn named(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "S1" => Some(Self::s1()),
            "S2" => Some(Self::s2()),
            "S3" => Some(Self::s3()),
            _ => None,
        }
    }

    pub fn baseline(mut self) -> Self {
        self.use_triplet_bound = false;
        self
    }

    /// Triplet features actually used by the filter.
    pub fn effective_k(&self) -> usize {
        if self.use_triplet_bound {
            self.k
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.alpha_eps > 0.0 && self.alpha_eps.is_finite()) {
            return bad("alpha_eps must be positive");
        }
        if !(self.eps_v >= 0.0) {
            return bad("eps_v must be non-negative");
        }
        if self.k > 2 {
            return bad("k must be 0, 1 or 2");
        }
        if !(self.min_match_fraction > 0.0 && self.min_match_fraction <= 1.0) {
            return bad("min_match_fraction must be in (0, 1]");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub scene_index: u32,
    pub catalog_index: u32,
    pub catalog_id: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Identified,
    NoResult,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub max_queue_len: usize,
    pub bound_evals: usize,
    pub objective_evals: usize,
    pub nodes_visited: usize,
    pub wall_time: Duration,
    pub capped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    /// Attitude (body to inertial): Wahba refinement when identified,
    /// otherwise the best cube center.
    pub rotation: AxisAngle<f64>,
    pub q_star: usize,
    pub matches: Vec<Match>,
    pub stats: SolveStats,
}

/// Hooks into the search, for instrumentation and tests.
pub trait SolveObserver {
    fn on_pop(&mut self, _cube: &RotationCube<f64>, _bound: usize, _matchlist: &[u32]) {}

    fn on_branch(
        &mut self,
        _parent: &RotationCube<f64>,
        _parent_bound: usize,
        _parent_matchlist: &[u32],
        _child: &RotationCube<f64>,
        _child_bound: usize,
        _child_matchlist: &[u32],
    ) {
    }
}

impl SolveObserver for () {}

struct Entry {
    bound: usize,
    depth: u32,
    seq: u64,
    cube: RotationCube<f64>,
    matchlist: Vec<u32>,
}

impl Entry {
    fn key(&self) -> (usize, std::cmp::Reverse<u32>, std::cmp::Reverse<u64>) {
        (self.bound, std::cmp::Reverse(self.depth), std::cmp::Reverse(self.seq))
    }
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.key() == o.key()
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key().cmp(&o.key())
    }
}

/// Scene, sub-catalogs and per-star trees for one solve.
pub struct SearchProblem<'a> {
    catalog: &'a OnboardCatalog,
    scene: Vec<SceneStar>,
    subcats: Vec<SubCatalog>,
    trees: Vec<CircularRTree<f64, u32>>,
    cfg: SolverConfig,
}

impl<'a> SearchProblem<'a> {
    pub fn new(catalog: &'a OnboardCatalog, scene: Vec<SceneStar>, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if scene.len() < 3 {
            return Err(Error::TooFewStars { found: scene.len() });
        }
        let subcats = extract_sub_catalogs(&scene, catalog, cfg.alpha_eps, cfg.eps_v, cfg.effective_k());
        let trees = subcats
            .iter()
            .map(|sc| {
                CircularRTree::from_patches(sc.indices.iter().map(|&j| {
                    let patch = SphericalPatch::new(catalog.star(j).c, cfg.alpha_eps);
                    let projected = project_patch(&patch).expect("positive tolerance always projects");
                    (projected, j)
                }))
            })
            .collect();
        Ok(Self {
            catalog,
            scene,
            subcats,
            trees,
            cfg: *cfg,
        })
    }

    pub fn scene(&self) -> &[SceneStar] {
        &self.scene
    }

    pub fn sub_catalogs(&self) -> &[SubCatalog] {
        &self.subcats
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn all_indices(&self) -> Vec<u32> {
        (0..self.scene.len() as u32).collect()
    }

    fn star_hits(&self, i: usize, r: &AxisAngle<f64>, stats: &mut QueryStats) -> bool {
        let v = r.rotate(&self.scene[i].s);
        match project_vector(&v) {
            Ok(p) => self.trees[i].any_point(&p, stats),
            Err(_) => self.subcats[i]
                .indices
                .iter()
                .any(|&j| angular_distance(&v, &self.catalog.star(j).c) <= self.cfg.alpha_eps),
        }
    }

    /// Number of scene stars in `subset` with a catalog star within the
    /// angular tolerance after rotating by `r`.
    pub fn objective(&self, r: &AxisAngle<f64>, subset: &[u32]) -> usize {
        self.objective_with_stats(r, subset, &mut QueryStats::default())
    }

    fn objective_with_stats(&self, r: &AxisAngle<f64>, subset: &[u32], stats: &mut QueryStats) -> usize {
        subset
            .iter()
            .filter(|&&i| self.star_hits(i as usize, r, stats))
            .count()
    }

    /// Objective over all stars, with the nearest qualifying catalog star
    /// for each matched scene star.
    pub fn objective_with_matches(&self, r: &AxisAngle<f64>) -> (usize, Vec<Match>) {
        let mut matches = Vec::new();
        for (i, star) in self.scene.iter().enumerate() {
            let v = r.rotate(&star.s);
            let candidates = match project_vector(&v) {
                Ok(p) => self.trees[i].query_point(&p),
                Err(_) => self.subcats[i]
                    .indices
                    .iter()
                    .copied()
                    .filter(|&j| angular_distance(&v, &self.catalog.star(j).c) <= self.cfg.alpha_eps)
                    .collect(),
            };
            let best = candidates.into_iter().min_by(|&a, &b| {
                let da = angular_distance(&v, &self.catalog.star(a).c);
                let db = angular_distance(&v, &self.catalog.star(b).c);
                da.total_cmp(&db).then(a.cmp(&b))
            });
            if let Some(j) = best {
                matches.push(Match {
                    scene_index: i as u32,
                    catalog_index: j,
                    catalog_id: self.catalog.star(j).id,
                });
            }
        }
        (matches.len(), matches)
    }

    /// Upper bound over every rotation within `alpha_b` of `center`
    /// (clamped into the pi-ball), restricted to `matchlist`. Returns the
    /// bound and the stars that can still match.
    pub fn upper_bound(&self, center: &AxisAngle<f64>, alpha_b: f64, matchlist: &[u32]) -> (usize, Vec<u32>) {
        self.upper_bound_with_stats(center, alpha_b, matchlist, &mut QueryStats::default())
    }

    fn upper_bound_with_stats(
        &self,
        center: &AxisAngle<f64>,
        alpha_b: f64,
        matchlist: &[u32],
        stats: &mut QueryStats,
    ) -> (usize, Vec<u32>) {
        let r = center.clamp_to_pi_ball();
        let reach = self.cfg.alpha_eps + alpha_b;
        let next: Vec<u32> = matchlist
            .iter()
            .copied()
            .filter(|&i| {
                let i = i as usize;
                if self.subcats[i].is_empty() {
                    return false;
                }
                let v = r.rotate(&self.scene[i].s);
                match project_patch(&SphericalPatch::new(v, alpha_b)) {
                    Ok(q) => self.trees[i].any_patch(&q, stats),
                    Err(_) => self.subcats[i]
                        .indices
                        .iter()
                        .any(|&j| angular_distance(&v, &self.catalog.star(j).c) <= reach),
                }
            })
            .collect();
        (next.len(), next)
    }

    pub fn cube_bound(&self, cube: &RotationCube<f64>, matchlist: &[u32]) -> (usize, Vec<u32>) {
        self.upper_bound(&cube.center_rotation(), cube.alpha(), matchlist)
    }

    /// Runs the search and applies the no-result rule.
    pub fn solve(&self, observer: &mut impl SolveObserver) -> SolveResult {
        let start = Instant::now();
        let mut stats = SolveStats::default();
        let mut qs = QueryStats::default();
        let mut seq = 0u64;

        let root = RotationCube::root();
        let (root_bound, root_ml) =
            self.upper_bound_with_stats(&root.center_rotation(), root.alpha(), &self.all_indices(), &mut qs);
        stats.bound_evals += 1;

        let mut heap = BinaryHeap::new();
        heap.push(Entry {
            bound: root_bound,
            depth: 0,
            seq,
            cube: root,
            matchlist: root_ml,
        });
        let mut q_star = 0usize;
        let mut r_star = AxisAngle::identity();

        while let Some(top) = heap.pop() {
            if top.bound <= q_star {
                break;
            }
            if stats.iterations >= self.cfg.max_iterations {
                stats.capped = true;
                break;
            }
            stats.iterations += 1;
            observer.on_pop(&top.cube, top.bound, &top.matchlist);

            let center = top.cube.center_rotation().clamp_to_pi_ball();
            let q = self.objective_with_stats(&center, &top.matchlist, &mut qs);
            stats.objective_evals += 1;
            if q > q_star {
                q_star = q;
                r_star = center;
            }
            if top.bound <= q_star {
                continue;
            }

            for child in top.cube.branch() {
                if !child.intersects_pi_ball() {
                    continue;
                }
                let (bound, ml) =
                    self.upper_bound_with_stats(&child.center_rotation(), child.alpha(), &top.matchlist, &mut qs);
                stats.bound_evals += 1;
                observer.on_branch(&top.cube, top.bound, &top.matchlist, &child, bound, &ml);
                if bound > q_star {
                    seq += 1;
                    heap.push(Entry {
                        bound,
                        depth: top.depth + 1,
                        seq,
                        cube: child,
                        matchlist: ml,
                    });
                }
            }
            stats.max_queue_len = stats.max_queue_len.max(heap.len());
        }

        let (_, matches) = self.objective_with_matches(&r_star);
        let n = self.scene.len();
        let enough = matches.len() >= self.cfg.min_matches
            && matches.len() as f64 >= self.cfg.min_match_fraction * n as f64;
        let identified = enough && !stats.capped;
        let mut rotation = r_star;
        if identified {
            let pairs: Vec<_> = matches
                .iter()
                .map(|m| (self.scene[m.scene_index as usize].s, self.catalog.star(m.catalog_index).c))
                .collect();
            if let Ok(r) = solve_wahba(&pairs) {
                rotation = r;
            }
        }
        stats.nodes_visited = qs.nodes_visited;
        stats.wall_time = start.elapsed();
        SolveResult {
            status: if identified {
                Status::Identified
            } else {
                Status::NoResult
            },
            rotation,
            q_star,
            matches: if identified { matches } else { Vec::new() },
            stats,
        }
    }
}

/// Features, sub-catalogs, trees and search in one call.
pub fn solve(scene: &[SceneStar], catalog: &OnboardCatalog, cfg: &SolverConfig) -> Result<SolveResult> {
    Ok(SearchProblem::new(catalog, scene.to_vec(), cfg)?.solve(&mut ()))
}

/// Convenience wrapper taking raw body vectors and magnitudes.
pub fn solve_vectors(
    vectors: &[UnitVec3<f64>],
    mags: &[f64],
    catalog: &OnboardCatalog,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solve(&compute_scene_features(vectors, mags)?, catalog, cfg)
}

/// Rotation minimizing `sum |R s - c|^2` over `(s, c)` pairs.
pub fn solve_wahba(pairs: &[(UnitVec3<f64>, UnitVec3<f64>)]) -> Result<AxisAngle<f64>> {
    if pairs.len() < 2 {
        return Err(Error::DegenerateGeometry("need at least two vector pairs"));
    }
    let v3 = |u: &UnitVec3<f64>| Vector3::from(u.to_array());
    let b: Matrix3<f64> = pairs.iter().map(|(s, c)| v3(c) * v3(s).transpose()).sum();
    let svd = b.svd(true, true);
    let sv = svd.singular_values;
    let (mut sorted, u, vt) = (sv.as_slice().to_vec(), svd.u.unwrap(), svd.v_t.unwrap());
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !(sorted[1] > 1e-10 * sorted[0]) {
        return Err(Error::DegenerateGeometry("vector pairs are collinear"));
    }
    let d = (u.determinant() * vt.determinant()).signum();
    let r = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * vt;
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    Ok(AxisAngle::from_quaternion([q.w, q.i, q.j, q.k]))
}
