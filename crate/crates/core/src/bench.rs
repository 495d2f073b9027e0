//! Experiment campaigns: noise sweeps, scoring against ground truth, and
//! the bound comparison.

use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::OnboardCatalog;
use crate::error::Result;
use crate::simulator::{generate_scene_with, pixel_to_angle, scene_rng, CameraModel, NoiseSpec, SimulatedScene};
use crate::solver::{solve, SolveResult, SolverConfig, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Correct,
    NoResult,
    FalsePositive,
}

/// Scores one reported identification. `matches` pairs a scene index with
/// the catalog id assigned to it; `truth[i]` is the source id of scene star
/// `i` (`None` for false stars).
pub fn score(identified: bool, matches: &[(usize, u32)], truth: &[Option<u32>]) -> Outcome {
    if !identified {
        return Outcome::NoResult;
    }
    let wrong = matches
        .iter()
        .any(|&(i, id)| truth.get(i).copied().flatten() != Some(id));
    if wrong {
        Outcome::FalsePositive
    } else if matches.len() >= 3 {
        Outcome::Correct
    } else {
        Outcome::NoResult
    }
}

pub fn score_result(result: &SolveResult, scene: &SimulatedScene) -> Outcome {
    let matches: Vec<_> = result
        .matches
        .iter()
        .map(|m| (m.scene_index as usize, m.catalog_id))
        .collect();
    score(result.status == Status::Identified, &matches, &scene.truth_ids())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    Pos,
    Mag,
    False,
}

impl std::str::FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pos" => Ok(Sweep::Pos),
            "mag" => Ok(Sweep::Mag),
            "false" => Ok(Sweep::False),
            other => Err(format!("unknown sweep {other:?}, expected pos, mag or false")),
        }
    }
}

/// One noise setting of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub pos_sigma_px: f64,
    pub mag_sigma: f64,
    pub false_stars: usize,
}

impl NoiseLevel {
    pub fn spec(&self, cam: &CameraModel) -> NoiseSpec {
        NoiseSpec {
            pos_sigma_deg: pixel_to_angle(self.pos_sigma_px, cam),
            mag_sigma: self.mag_sigma,
            false_star_count: self.false_stars,
            seed: 0,
        }
    }
}

impl Sweep {
    /// The swept value and the full noise setting for each point.
    pub fn levels(&self) -> Vec<(f64, NoiseLevel)> {
        match self {
            Sweep::Pos => [0.0, 0.5, 1.0, 1.5, 2.0]
                .map(|p| (p, NoiseLevel { pos_sigma_px: p, mag_sigma: 0.3, false_stars: 0 }))
                .to_vec(),
            Sweep::Mag => [0.0, 0.25, 0.5, 0.75, 1.0]
                .map(|m| (m, NoiseLevel { pos_sigma_px: 1.0, mag_sigma: m, false_stars: 0 }))
                .to_vec(),
            Sweep::False => [0usize, 2, 4, 6, 8, 10]
                .map(|f| (f as f64, NoiseLevel { pos_sigma_px: 1.0, mag_sigma: 0.3, false_stars: f }))
                .to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub config: String,
    pub sweep: String,
    pub level: f64,
    pub scenes: usize,
    pub id_rate: f64,
    pub no_result_rate: f64,
    pub false_positive_rate: f64,
    pub mean_runtime_ms: f64,
    pub mean_iterations: f64,
    pub mean_bound_evals: f64,
    pub capped_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub cpu: String,
    pub build_flags: String,
    pub threads: usize,
    pub seed: u64,
}

impl Environment {
    pub fn detect(seed: u64) -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split(':').nth(1))
                    .map(|m| m.trim().to_string())
            })
            .unwrap_or_else(|| std::env::consts::ARCH.to_string());
        let profile = if cfg!(debug_assertions) { "debug-assertions" } else { "release" };
        Self {
            cpu,
            build_flags: format!("{profile} {}-{}", std::env::consts::ARCH, std::env::consts::OS),
            threads: rayon::current_num_threads(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub environment: Environment,
    pub rows: Vec<ReportRow>,
}

/// Per-scene result kept by campaigns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneRun {
    pub outcome: Outcome,
    pub iterations: usize,
    pub bound_evals: usize,
    pub runtime: Duration,
    pub capped: bool,
}

pub fn run_scene(scene: &SimulatedScene, cat: &OnboardCatalog, cfg: &SolverConfig) -> SceneRun {
    let result = scene.scene_stars().and_then(|s| solve(&s, cat, cfg));
    match result {
        Ok(r) => SceneRun {
            outcome: score_result(&r, scene),
            iterations: r.stats.iterations,
            bound_evals: r.stats.bound_evals,
            runtime: r.stats.wall_time,
            capped: r.stats.capped,
        },
        Err(_) => SceneRun {
            outcome: Outcome::NoResult,
            iterations: 0,
            bound_evals: 0,
            runtime: Duration::ZERO,
            capped: false,
        },
    }
}

/// Aggregates scene runs into one report row.
pub fn summarize(config: &str, sweep: &str, level: f64, runs: &[SceneRun]) -> ReportRow {
    let n = runs.len();
    let frac = |o: Outcome| {
        if n == 0 {
            0.0
        } else {
            runs.iter().filter(|r| r.outcome == o).count() as f64 / n as f64
        }
    };
    let mean = |f: &dyn Fn(&SceneRun) -> f64| {
        if n == 0 {
            0.0
        } else {
            runs.iter().map(f).sum::<f64>() / n as f64
        }
    };
    ReportRow {
        config: config.to_string(),
        sweep: sweep.to_string(),
        level,
        scenes: n,
        id_rate: frac(Outcome::Correct),
        no_result_rate: frac(Outcome::NoResult),
        false_positive_rate: frac(Outcome::FalsePositive),
        mean_runtime_ms: mean(&|r| r.runtime.as_secs_f64() * 1e3),
        mean_iterations: mean(&|r| r.iterations as f64),
        mean_bound_evals: mean(&|r| r.bound_evals as f64),
        capped_runs: runs.iter().filter(|r| r.capped).count(),
    }
}

/// Scenes `0..count` at one noise level; `stream_base` separates levels.
pub fn simulate_batch(
    cat: &OnboardCatalog,
    cam: &CameraModel,
    noise: &NoiseSpec,
    count: usize,
    seed: u64,
    stream_base: u64,
) -> Vec<SimulatedScene> {
    (0..count)
        .into_par_iter()
        .map(|j| {
            let mut rng = scene_rng(seed, stream_base + j as u64);
            generate_scene_with(cat, cam, noise, None, &mut rng)
        })
        .collect()
}

pub fn run_batch(scenes: &[SimulatedScene], cat: &OnboardCatalog, cfg: &SolverConfig) -> Vec<SceneRun> {
    scenes.par_iter().map(|s| run_scene(s, cat, cfg)).collect()
}

/// Runs every (level, config) cell of a sweep on shared scenes.
pub fn run_campaign(
    cat: &OnboardCatalog,
    cam: &CameraModel,
    sweep: Sweep,
    configs: &[(String, SolverConfig)],
    scenes: usize,
    seed: u64,
) -> ExperimentReport {
    let name = serde_json::to_value(sweep)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    let mut rows = Vec::new();
    if scenes > 0 {
        for (li, (level, noise)) in sweep.levels().into_iter().enumerate() {
            let batch = simulate_batch(cat, cam, &noise.spec(cam), scenes, seed, (li as u64) << 32);
            for (cname, cfg) in configs {
                rows.push(summarize(cname, &name, level, &run_batch(&batch, cat, cfg)));
            }
        }
    }
    ExperimentReport {
        environment: Environment::detect(seed),
        rows,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub scenes: usize,
    pub tight_mean_iterations: f64,
    pub baseline_mean_iterations: f64,
    pub iteration_ratio: f64,
    pub tight_mean_runtime_ms: f64,
    pub baseline_mean_runtime_ms: f64,
    pub runtime_ratio: f64,
    pub baseline_cap: usize,
    pub baseline_capped_runs: usize,
    pub tight_id_rate: f64,
    pub baseline_id_rate: f64,
}

/// Solves the same scenes with the triplet bound on and off. Capped
/// baseline runs count at the cap.
pub fn compare_bounds(
    scenes: &[SimulatedScene],
    cat: &OnboardCatalog,
    cfg: &SolverConfig,
    baseline_cap: usize,
) -> BoundComparison {
    let tight_cfg = SolverConfig {
        use_triplet_bound: true,
        ..*cfg
    };
    let base_cfg = SolverConfig {
        use_triplet_bound: false,
        max_iterations: baseline_cap,
        ..*cfg
    };
    let tight = summarize("tight", "bounds", 0.0, &run_batch(scenes, cat, &tight_cfg));
    let base = summarize("baseline", "bounds", 0.0, &run_batch(scenes, cat, &base_cfg));
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::INFINITY };
    BoundComparison {
        scenes: scenes.len(),
        tight_mean_iterations: tight.mean_iterations,
        baseline_mean_iterations: base.mean_iterations,
        iteration_ratio: ratio(base.mean_iterations, tight.mean_iterations),
        tight_mean_runtime_ms: tight.mean_runtime_ms,
        baseline_mean_runtime_ms: base.mean_runtime_ms,
        runtime_ratio: ratio(base.mean_runtime_ms, tight.mean_runtime_ms),
        baseline_cap,
        baseline_capped_runs: base.capped_runs,
        tight_id_rate: tight.id_rate,
        baseline_id_rate: base.id_rate,
    }
}

/// Global rayon pool honouring `ROSIA_THREADS`; later calls are no-ops.
pub fn init_threads() {
    if let Some(n) = std::env::var("ROSIA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Writes `report.json` and `report.csv` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
    if report.rows.is_empty() {
        w.write_record([
            "config",
            "sweep",
            "level",
            "scenes",
            "id_rate",
            "no_result_rate",
            "false_positive_rate",
            "mean_runtime_ms",
            "mean_iterations",
            "mean_bound_evals",
            "capped_runs",
        ])?;
    }
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
