//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the report lines always
//! reach stdout; exits non-zero when any criterion fails.

mod common;

use std::time::{Duration, Instant};

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starid::bench::{compare_bounds, run_batch, simulate_batch, summarize};
use starid::catalog::{build_onboard_catalog, OnboardCatalog};
use starid::geometry::{RotationCube, UnitVec3};
use starid::projection::{project_patch, project_vector, ProjectedPatch, SphericalPatch};
use starid::simulator::{pixel_to_angle, random_attitude, synthetic_sky, CameraModel, NoiseSpec, SimulatedScene, SkyModel};
use starid::solver::{compute_scene_features, SceneStar, SearchProblem, SolveObserver, SolverConfig};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: u32, name: &str, elapsed: Duration, o: &Outcome) -> bool {
    println!(
        "criterion {n:>2} [{}] {name}: {} ({:.1}s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    o.pass
}

/// Adds a wall-clock limit to an outcome.
fn within(o: Outcome, elapsed: Duration, limit_s: u64) -> Outcome {
    let fast = elapsed < Duration::from_secs(limit_s);
    Outcome {
        pass: o.pass && fast,
        detail: format!("{}; limit {limit_s}s", o.detail),
    }
}

fn noisy_scenes(cat: &OnboardCatalog, count: usize, px: f64, mag_sigma: f64, seed: u64) -> Vec<SimulatedScene> {
    let cam = CameraModel::default();
    let noise = NoiseSpec {
        pos_sigma_deg: pixel_to_angle(px, &cam),
        mag_sigma,
        false_star_count: 0,
        seed: 0,
    };
    simulate_batch(cat, &cam, &noise, count, seed, 0)
        .into_iter()
        .filter(SimulatedScene::is_solvable)
        .collect()
}

#[derive(Default)]
struct Recorder {
    pops: Vec<(RotationCube<f64>, usize)>,
    branch_events: usize,
    subset_violations: usize,
    monotone_violations: usize,
}

impl SolveObserver for Recorder {
    fn on_pop(&mut self, cube: &RotationCube<f64>, bound: usize, _ml: &[u32]) {
        self.pops.push((*cube, bound));
    }

    fn on_branch(
        &mut self,
        _parent: &RotationCube<f64>,
        parent_bound: usize,
        parent_ml: &[u32],
        _child: &RotationCube<f64>,
        child_bound: usize,
        child_ml: &[u32],
    ) {
        self.branch_events += 1;
        if !child_ml.iter().all(|i| parent_ml.contains(i)) {
            self.subset_violations += 1;
        }
        if child_bound > parent_bound {
            self.monotone_violations += 1;
        }
    }
}

/// Criteria 1 and 9 share the same 50 solver runs.
fn bound_validity_and_monotonicity(cat: &OnboardCatalog) -> (Outcome, Outcome) {
    let scenes = noisy_scenes(cat, 50, 1.0, 0.3, 101);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut cubes, mut samples, mut violations, mut short) = (0usize, 0usize, 0usize, 0usize);
    let (mut events, mut subset, mut monotone) = (0, 0, 0);
    for scene in &scenes {
        let problem = SearchProblem::new(cat, scene.scene_stars().unwrap(), &cfg_s2()).unwrap();
        let all = problem.all_indices();
        let mut rec = Recorder::default();
        problem.solve(&mut rec);
        for (cube, bound) in &rec.pops {
            cubes += 1;
            let mut got = 0;
            for _ in 0..64 {
                let Some(r) = sample_in_cube(cube, &mut rng, 1_000) else { break };
                got += 1;
                if problem.objective(&r, &all) > *bound {
                    violations += 1;
                }
            }
            samples += got;
            short += usize::from(got < 64);
        }
        events += rec.branch_events;
        subset += rec.subset_violations;
        monotone += rec.monotone_violations;
    }
    let c1 = Outcome {
        pass: violations == 0 && scenes.len() == 50 && short == 0,
        detail: format!(
            "{} runs, {cubes} popped cubes, {samples} sampled rotations, {violations} violations, {short} cubes with < 64 samples",
            scenes.len()
        ),
    };
    let c9 = Outcome {
        pass: subset == 0 && monotone == 0 && events > 0,
        detail: format!("{events} branch events, {subset} matchlist violations, {monotone} bound violations"),
    };
    (c1, c9)
}

fn convergence(cat: &OnboardCatalog) -> Outcome {
    let scenes = noisy_scenes(cat, 20, 1.0, 0.3, 202);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (mut mismatches, mut positive, mut total) = (0, 0, 0);
    for scene in &scenes {
        let problem = SearchProblem::new(cat, scene.scene_stars().unwrap(), &cfg_s2()).unwrap();
        let all = problem.all_indices();
        for t in 0..500 {
            let r = match t % 3 {
                0 => random_in_ball(&mut rng),
                1 => perturbed(&scene.attitude, 0.5, &mut rng),
                _ => perturbed(&scene.attitude, 0.03, &mut rng),
            };
            let q = problem.objective(&r, &all);
            let (qb, _) = problem.upper_bound(&r, 0.0, &all);
            total += 1;
            positive += usize::from(q > 0);
            mismatches += usize::from(q != qb);
        }
    }
    Outcome {
        pass: mismatches == 0 && total == 10_000,
        detail: format!("{total} evaluations ({positive} with Q > 0), {mismatches} mismatches"),
    }
}

fn oracle_equivalence(cat: &OnboardCatalog) -> Outcome {
    let scenes = noisy_scenes(cat, 50, 1.0, 0.3, 303);
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let cfg = cfg_s2();
    let margin = 1e-9;
    let (mut tested, mut excluded, mut obj_bad, mut bound_bad, mut sub_bad, mut nonzero) = (0, 0, 0, 0, 0, 0);
    for (si, scene) in scenes.iter().enumerate() {
        let stars = scene.scene_stars().unwrap();
        let problem = SearchProblem::new(cat, stars.clone(), &cfg).unwrap();
        let subcats: Vec<Vec<u32>> = stars
            .iter()
            .map(|s| brute_subcat(cat, s, cfg.alpha_eps, cfg.eps_v, 2))
            .collect();
        sub_bad += problem
            .sub_catalogs()
            .iter()
            .zip(&subcats)
            .filter(|(a, b)| &a.indices != *b)
            .count();
        let all = problem.all_indices();
        for t in 0..20 {
            let kind = (si * 20 + t) % 4;
            let r = match kind {
                0 => random_in_ball(&mut rng),
                1 => perturbed(&scene.attitude, 2.0, &mut rng),
                _ => perturbed(&scene.attitude, 0.05, &mut rng),
            };
            let depth = rng.random_range(1..=18);
            let cube = cube_containing(&r, depth);
            let center = cube.center_rotation().clamp_to_pi_ball();

            let q = problem.objective(&r, &all);
            let q_oracle = brute_count(cat, &stars, &subcats, &nalgebra_rotation(&r), cfg.alpha_eps, margin);
            let (qb, _) = problem.cube_bound(&cube, &all);
            let qb_oracle = brute_count(
                cat,
                &stars,
                &subcats,
                &nalgebra_rotation(&center),
                cfg.alpha_eps + cube.alpha(),
                margin,
            );
            if q_oracle.borderline || qb_oracle.borderline {
                excluded += 1;
                continue;
            }
            tested += 1;
            nonzero += usize::from(q > 0);
            obj_bad += usize::from(q != q_oracle.count);
            bound_bad += usize::from(qb != qb_oracle.count);
        }
    }
    Outcome {
        pass: obj_bad == 0 && bound_bad == 0 && sub_bad == 0 && tested + excluded == 1000,
        detail: format!(
            "{tested} instances ({excluded} borderline excluded, {nonzero} with Q > 0): {obj_bad} objective, {bound_bad} bound, {sub_bad} sub-catalog mismatches"
        ),
    }
}

/// Small rotation of `v` about a random perpendicular axis.
fn jitter(v: &Vector3<f64>, max_rad: f64, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let axis = v.cross(&random_unit(rng));
    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), rng.random_range(0.0..max_rad));
    rot * v
}

struct Mini {
    cat: OnboardCatalog,
    scene: Vec<SceneStar>,
    cfg: SolverConfig,
}

/// Four clusters of 7-8 stars; the scene is one cluster (possibly missing
/// a star) in a random attitude with small noise.
fn mini_instance(idx: usize, rng: &mut ChaCha8Rng) -> Mini {
    let base = Rotation3::from_scaled_axis(random_unit(rng) * rng.random_range(0.0..std::f64::consts::PI));
    let s = 1.0 / 3f64.sqrt();
    let centers = [[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]].map(|c| base * Vector3::from(c));
    let sizes = [8, 8, 7, 7];
    let mut entries = Vec::new();
    let mut cluster_of = Vec::new();
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..sizes[k] {
            let v = jitter(c, 8f64.to_radians(), rng);
            let id = entries.len() as u32 + 1;
            entries.push((id, UnitVec3::new(v.x, v.y, v.z).unwrap(), rng.random_range(1.0..6.0)));
            cluster_of.push(k);
        }
    }
    let cat = OnboardCatalog::from_vectors(entries.clone(), 10.0, 0.0, [0; 32]).unwrap();

    let k = idx % 4;
    let mut members: Vec<_> = entries.iter().zip(&cluster_of).filter(|(_, &c)| c == k).map(|(e, _)| *e).collect();
    if rng.random_bool(0.5) {
        let drop = rng.random_range(0..members.len());
        members.remove(drop);
    }
    let truth = random_attitude(rng);
    let to_body = nalgebra_rotation(&truth).inverse();
    let mut vs = Vec::new();
    let mut mags = Vec::new();
    for (_, c, m) in &members {
        let b = jitter(&(to_body * v3(c)), 0.05f64.to_radians(), rng);
        vs.push(UnitVec3::new(b.x, b.y, b.z).unwrap());
        mags.push(m + rng.random_range(-0.1..0.1));
    }
    let cfg = SolverConfig {
        alpha_eps: 1f64.to_radians(),
        eps_v: 0.5,
        k: if idx.is_multiple_of(2) { 2 } else { 0 },
        ..SolverConfig::s2()
    };
    Mini {
        cat,
        scene: compute_scene_features(&vs, &mags).unwrap(),
        cfg,
    }
}

/// Exhaustive 0.25 deg grid over every rotation that anchors some scene
/// star inside the tolerance cap of a feasible catalog star: cap offsets on
/// a 0.25 deg tangent grid times spins about the anchor in 0.25 deg steps.
fn grid_max(cat: &OnboardCatalog, scene: &[SceneStar], subcats: &[Vec<u32>], alpha: f64) -> usize {
    let step = 0.25f64.to_radians();
    let cos_a = alpha.cos();
    let body: Vec<Vector3<f64>> = scene.iter().map(|s| v3(&s.s)).collect();
    let cvec: Vec<Vec<Vector3<f64>>> = subcats
        .iter()
        .map(|sub| sub.iter().map(|&j| v3(&cat.star(j).c)).collect())
        .collect();
    let reach = (alpha / step).floor() as i32;
    let spins = (std::f64::consts::TAU / step).round() as usize;
    let mut best = 0;
    for (i, sub) in cvec.iter().enumerate() {
        for c in sub {
            let e1 = c.cross(&if c.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() }).normalize();
            let e2 = c.cross(&e1);
            for a in -reach..=reach {
                for b in -reach..=reach {
                    let (x, y) = (f64::from(a) * step, f64::from(b) * step);
                    let rho = x.hypot(y);
                    if rho > alpha {
                        continue;
                    }
                    let w = if rho == 0.0 {
                        *c
                    } else {
                        c * rho.cos() + (e1 * x + e2 * y) * (rho.sin() / rho)
                    };
                    let r0 = Rotation3::rotation_between(&body[i], &w).unwrap_or_else(|| {
                        Rotation3::from_axis_angle(&Unit::new_normalize(e1), std::f64::consts::PI)
                    });
                    let axis = Unit::new_normalize(w);
                    for k in 0..spins {
                        let r = Rotation3::from_axis_angle(&axis, k as f64 * step) * r0;
                        let q = body
                            .iter()
                            .zip(&cvec)
                            .filter(|(s, cs)| {
                                let v = r * *s;
                                cs.iter().any(|c| v.dot(c) >= cos_a)
                            })
                            .count();
                        best = best.max(q);
                    }
                }
            }
        }
    }
    best
}

fn global_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut failures = Vec::new();
    let mut sizes = (usize::MAX, 0usize, 0usize);
    for idx in 0..50 {
        let m = mini_instance(idx, &mut rng);
        let problem = SearchProblem::new(&m.cat, m.scene.clone(), &m.cfg).unwrap();
        let subcats: Vec<Vec<u32>> = m
            .scene
            .iter()
            .map(|s| brute_subcat(&m.cat, s, m.cfg.alpha_eps, m.cfg.eps_v, m.cfg.effective_k()))
            .collect();
        let result = problem.solve(&mut ());
        let grid = grid_max(&m.cat, &m.scene, &subcats, m.cfg.alpha_eps);
        sizes.0 = sizes.0.min(m.scene.len());
        sizes.1 = sizes.1.max(m.scene.len());
        sizes.2 = sizes.2.max(m.cat.len());
        if result.q_star != grid || result.stats.capped {
            failures.push(format!("#{idx}: Q*={} grid={grid}", result.q_star));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "50 instances ({}-{} scene stars, <= {} catalog stars), {} failures {:?}",
            sizes.0,
            sizes.1,
            sizes.2,
            failures.len(),
            failures
        ),
    }
}

fn end_to_end(cat: &OnboardCatalog, px: f64, mag_sigma: f64, seed: u64) -> (f64, f64, usize) {
    let cam = CameraModel::default();
    let noise = NoiseSpec {
        pos_sigma_deg: pixel_to_angle(px, &cam),
        mag_sigma,
        false_star_count: 0,
        seed: 0,
    };
    let scenes = simulate_batch(cat, &cam, &noise, 100, seed, 0);
    let row = summarize("S2", "", px, &run_batch(&scenes, cat, &cfg_s2()));
    (row.id_rate, row.false_positive_rate, row.scenes)
}

fn speedup(cat: &OnboardCatalog) -> Outcome {
    let scenes = noisy_scenes(cat, 50, 1.0, 0.3, 707);
    let cap = 20_000;
    let cmp = compare_bounds(&scenes, cat, &cfg_s2(), cap);
    Outcome {
        pass: cmp.iteration_ratio >= 10.0 && scenes.len() == 50,
        detail: format!(
            "{} scenes: baseline {:.0} iterations ({} of {} runs capped at {cap}) vs {:.1}, ratio >= {:.1} (runtime ratio {:.0})",
            cmp.scenes,
            cmp.baseline_mean_iterations,
            cmp.baseline_capped_runs,
            cmp.scenes,
            cmp.tight_mean_iterations,
            cmp.iteration_ratio,
            cmp.runtime_ratio
        ),
    }
}

fn catalog_scaling() -> Outcome {
    let sky = synthetic_sky(&SkyModel::default(), SKY_SEED);
    let mut pts = Vec::new();
    let mut at6 = 0usize;
    for k in 0..=6 {
        let m = 5.0 + 0.25 * f64::from(k);
        let cat = build_onboard_catalog(&sky, m, 0.04f64.to_radians()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        starid::catalog::save_catalog(&cat, &path).unwrap();
        let size = std::fs::metadata(&path).unwrap().len() as usize;
        if m == 6.0 {
            at6 = size;
        }
        pts.push((cat.len() as f64, size as f64));
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    let mb = at6 as f64 / 1e6;
    Outcome {
        pass: r2 >= 0.999 && (mb - 0.24).abs() <= 0.3 * 0.24,
        detail: format!("R^2 = {r2:.6} over mag 5.0-6.5, {mb:.4} MB at mag 6"),
    }
}

fn conformality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let (mut patches, mut points, mut worst, mut skipped) = (0, 0, 0.0f64, 0);
    while patches < 1000 {
        let c = random_unit(&mut rng);
        let alpha = rng.random_range(1e-4..3.0);
        let center = UnitVec3::new(c.x, c.y, c.z).unwrap();
        let Ok(ProjectedPatch::InteriorCircle { center: pc, radius }) =
            project_patch(&SphericalPatch::new(center, alpha))
        else {
            skipped += 1;
            continue;
        };
        patches += 1;
        let e1 = c.cross(&random_unit(&mut rng)).normalize();
        for t in 0..32 {
            let rot = Rotation3::from_axis_angle(&Unit::new_normalize(c), f64::from(t) * std::f64::consts::TAU / 32.0);
            let b = Rotation3::from_axis_angle(&Unit::new_normalize(rot * e1), alpha) * c;
            let p = project_vector(&UnitVec3::new(b.x, b.y, b.z).unwrap()).unwrap();
            let d = (p[0] - pc[0]).hypot(p[1] - pc[1]);
            worst = worst.max((d - radius).abs());
            points += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!(
            "{patches} interior-circle patches ({skipped} exterior/half-plane draws skipped), {points} boundary points, max deviation {worst:.2e}"
        ),
    }
}

fn main() {
    let mut ok = true;
    let t = Instant::now();
    let cat = sky_catalog(6.0);
    println!("catalog: {} stars (built in {:.1}s)", cat.len(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let (c1, c9) = bound_validity_and_monotonicity(&cat);
    let e = t.elapsed();
    let c1 = within(c1, e, 120);
    ok &= report(1, "bound validity", e, &c1);

    let t = Instant::now();
    let c2 = convergence(&cat);
    ok &= report(2, "collapsed-cube convergence", t.elapsed(), &c2);

    let t = Instant::now();
    let c3 = oracle_equivalence(&cat);
    ok &= report(3, "oracle equivalence", t.elapsed(), &c3);

    let t = Instant::now();
    let c4 = within(global_optimality(), t.elapsed(), 300);
    ok &= report(4, "global optimality", t.elapsed(), &c4);

    let t = Instant::now();
    let (id, fp, n) = end_to_end(&cat, 0.0, 0.0, 505);
    let c5 = Outcome {
        pass: id >= 0.99 && fp == 0.0,
        detail: format!("{n} scenes: id_rate {id:.3}, false_positive_rate {fp:.3}"),
    };
    ok &= report(5, "zero-noise end-to-end", t.elapsed(), &c5);

    let t = Instant::now();
    let (id, fp, n) = end_to_end(&cat, 1.0, 0.3, 606);
    let c6 = Outcome {
        pass: id >= 0.93,
        detail: format!("{n} scenes at 1 px / 0.3 mag: id_rate {id:.3}, false_positive_rate {fp:.3}"),
    };
    ok &= report(6, "positional-noise robustness", t.elapsed(), &c6);

    let t = Instant::now();
    let c7 = speedup(&cat);
    ok &= report(7, "tight-bound speedup", t.elapsed(), &c7);

    let t = Instant::now();
    let c8 = catalog_scaling();
    ok &= report(8, "catalog scaling", t.elapsed(), &c8);

    ok &= report(9, "matchlist and bound monotonicity", e, &c9);

    let t = Instant::now();
    let c10 = conformality();
    ok &= report(10, "projection conformality", t.elapsed(), &c10);

    if !ok {
        std::process::exit(1);
    }
}
