use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use starid::bench::{self, Sweep};
use starid::catalog::{self, DEFAULT_MAG_LIMIT, DEFAULT_MIN_SEP_DEG};
use starid::simulator::{self, CameraModel, NoiseSpec, SkyModel};
use starid::solver::{self, SolverConfig, Status};
use starid::Error;

#[derive(Parser)]
#[command(name = "starid", version, about = "Lost-in-space star identification by rotation search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an onboard catalog from a star CSV (id,ra_deg,dec_deg,vmag).
    BuildCatalog {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAG_LIMIT)]
        mag_limit: f64,
        #[arg(long, default_value_t = DEFAULT_MIN_SEP_DEG)]
        min_sep_deg: f64,
    },
    /// Write a synthetic all-sky star CSV.
    SynthCatalog {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Simulate scenes into a JSON Lines file.
    Simulate {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        scenes: usize,
        #[arg(long, default_value_t = 0.0)]
        pos_sigma_px: f64,
        #[arg(long, default_value_t = 0.0)]
        mag_sigma: f64,
        #[arg(long, default_value_t = 0)]
        false_stars: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Identify one scene; prints a JSON report.
    Solve {
        #[arg(long)]
        catalog: PathBuf,
        /// `file.jsonl` or `file.jsonl:line` (lines count from 1).
        #[arg(long)]
        scene: String,
        /// S1, S2, S3 or a JSON config file.
        #[arg(long, default_value = "S2")]
        config: String,
        /// Use the magnitude-only bound instead of the triplet bound.
        #[arg(long)]
        baseline_bound: bool,
    },
    /// Run a noise sweep and write report.json and report.csv.
    Bench {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value = "pos")]
        sweep: Sweep,
        /// Comma-separated presets or config files.
        #[arg(long, default_value = "S1,S2,S3")]
        configs: String,
        #[arg(long, default_value_t = 100)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Compare the triplet bound with the baseline bound instead of
        /// sweeping (1 px, 0.3 mag noise); writes bounds.json.
        #[arg(long)]
        bounds: bool,
        #[arg(long, default_value_t = 20_000)]
        baseline_cap: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::EmptyCatalog { .. } => 3,
        Error::TooFewStars { .. } => 4,
        Error::InvalidConfig(_) => 1,
        e if e.is_format() => 2,
        Error::Io(_) => 2,
        _ => 1,
    }
}

fn load_config(spec: &str) -> starid::Result<SolverConfig> {
    let cfg = match SolverConfig::named(spec) {
        Some(c) => c,
        None => serde_json::from_str(&std::fs::read_to_string(spec)?)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn config_name(spec: &str) -> String {
    match SolverConfig::named(spec) {
        Some(_) => spec.to_ascii_uppercase(),
        None => Path::new(spec)
            .file_stem()
            .map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned()),
    }
}

fn split_scene(arg: &str) -> (&str, usize) {
    match arg.rsplit_once(':') {
        Some((path, line)) if !path.is_empty() => match line.parse() {
            Ok(n) => (path, n),
            Err(_) => (arg, 1),
        },
        _ => (arg, 1),
    }
}

fn run(cmd: Command) -> starid::Result<()> {
    match cmd {
        Command::BuildCatalog { input, output, mag_limit, min_sep_deg } => {
            let raw = catalog::read_raw_csv(&input)?;
            let cat = catalog::build_onboard_catalog(&raw, mag_limit, min_sep_deg.to_radians())?;
            catalog::save_catalog(&cat, &output)?;
            let back = catalog::load_catalog(&output)?;
            println!(
                "{} stars, {} bytes ({:.4} MB)",
                back.len(),
                cat.serialized_len(),
                cat.serialized_len() as f64 / 1e6
            );
        }
        Command::SynthCatalog { output, seed } => {
            let sky = simulator::synthetic_sky(&SkyModel::default(), seed);
            catalog::write_raw_csv(&sky, &output)?;
            println!("{} stars", sky.len());
        }
        Command::Simulate { catalog, out, scenes, pos_sigma_px, mag_sigma, false_stars, seed } => {
            let cat = catalog::load_catalog(&catalog)?;
            let cam = CameraModel::default();
            let noise = NoiseSpec {
                pos_sigma_deg: simulator::pixel_to_angle(pos_sigma_px, &cam),
                mag_sigma,
                false_star_count: false_stars,
                seed,
            };
            let batch = bench::simulate_batch(&cat, &cam, &noise, scenes, seed, 0);
            simulator::write_scenes(&batch, &out)?;
            println!("{} scenes", batch.len());
        }
        Command::Solve { catalog, scene, config, baseline_bound } => {
            let mut cfg = load_config(&config)?;
            if baseline_bound {
                cfg = cfg.baseline();
            }
            let cat = catalog::load_catalog(&catalog)?;
            let (path, line) = split_scene(&scene);
            let sim = simulator::read_scene_line(path, line)?;
            let res = solver::solve(&sim.scene_stars()?, &cat, &cfg)?;
            let has_truth = sim.stars.iter().any(|s| s.truth_id.is_some());
            let report = json!({
                "status": match res.status {
                    Status::Identified => "Identified",
                    Status::NoResult => "NoResult",
                },
                "q_star": res.q_star,
                "matches": res.matches.iter().map(|m| json!({
                    "scene_index": m.scene_index,
                    "catalog_id": m.catalog_id,
                })).collect::<Vec<_>>(),
                "quaternion_wxyz": res.rotation.to_quaternion(),
                "axis_angle": res.rotation.r,
                "outcome": has_truth.then(|| format!("{:?}", bench::score_result(&res, &sim))),
                "stats": {
                    "iterations": res.stats.iterations,
                    "max_queue_len": res.stats.max_queue_len,
                    "bound_evals": res.stats.bound_evals,
                    "objective_evals": res.stats.objective_evals,
                    "nodes_visited": res.stats.nodes_visited,
                    "runtime_ms": res.stats.wall_time.as_secs_f64() * 1e3,
                    "capped": res.stats.capped,
                },
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Bench { catalog, sweep, configs, scenes, seed, out, bounds, baseline_cap } => {
            let cat = catalog::load_catalog(&catalog)?;
            let cam = CameraModel::default();
            let configs = configs
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Ok((config_name(s), load_config(s)?)))
                .collect::<starid::Result<Vec<_>>>()?;
            if bounds {
                let cfg = configs.first().map_or_else(SolverConfig::s2, |c| c.1);
                let level = Sweep::Pos.levels()[2].1;
                let batch = bench::simulate_batch(&cat, &cam, &level.spec(&cam), scenes, seed, 0);
                let cmp = bench::compare_bounds(&batch, &cat, &cfg, baseline_cap);
                std::fs::create_dir_all(&out)?;
                let text = serde_json::to_string_pretty(&cmp)?;
                std::fs::write(out.join("bounds.json"), &text)?;
                println!("{text}");
            } else {
                let report = bench::run_campaign(&cat, &cam, sweep, &configs, scenes, seed);
                bench::write_report(&report, &out)?;
                for r in &report.rows {
                    println!(
                        "{} {}={} id={:.3} none={:.3} fp={:.3} iters={:.0} ms={:.1}",
                        r.config,
                        r.sweep,
                        r.level,
                        r.id_rate,
                        r.no_result_rate,
                        r.false_positive_rate,
                        r.mean_iterations,
                        r.mean_runtime_ms
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    bench::init_threads();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
