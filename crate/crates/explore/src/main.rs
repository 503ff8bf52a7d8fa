use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::Parser;
use octoexplore::driver::RunStatus;
use octoexplore::export::{export_depth_image, export_entropy_image};
use octoexplore::{export_map, export_metrics, run_exploration, Preset, RunOptions, Scenario};
use octoexplore_core::evaluation::max_ray_entropy;

/// Autonomous exploration of a simulated box world with a depth-camera MAV.
#[derive(Debug, Parser)]
#[command(name = "explore", version)]
struct Cli {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for metrics.csv and map.txt.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Named parameter set used as defaults under the scenario's keys.
    #[arg(long)]
    preset: Option<Preset>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Write the chosen candidate's 360° entropy and depth images per iteration.
    #[arg(long)]
    dump_entropy_images: bool,
    /// Write 0 instead of measured plan times to the metrics CSV.
    #[arg(long)]
    no_timing: bool,
}

fn run(cli: &Cli) -> Result<RunStatus> {
    let mut scenario = Scenario::load(&cli.scenario, cli.preset)
        .with_context(|| format!("loading {}", cli.scenario.display()))?;
    if let Some(seed) = cli.seed {
        scenario.config.seed = seed;
    }
    let opts = RunOptions {
        timeout: cli.timeout.map(Duration::from_secs_f64),
        record_timing: !cli.no_timing,
        keep_images: cli.dump_entropy_images,
        record_trajectory: false,
    };
    let result = run_exploration(&scenario, &opts)?;

    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    export_metrics(&result.metrics, cli.out.join("metrics.csv")).context("writing metrics.csv")?;
    export_map(&result.map, cli.out.join("map.txt")).context("writing map.txt")?;
    if cli.dump_entropy_images {
        let dir = cli.out.join("entropy");
        std::fs::create_dir_all(&dir)?;
        let mav = &scenario.config.mav;
        let max_h = max_ray_entropy(mav.d_max, scenario.config.resolution);
        for (i, it) in result.iterations.iter().enumerate() {
            if let Some((entropy, depth)) = it.chosen.as_ref().and_then(|c| c.images.as_ref()) {
                export_entropy_image(entropy, max_h, dir.join(format!("iter_{i:04}_entropy.pgm")))?;
                export_depth_image(depth, mav.d_max, dir.join(format!("iter_{i:04}_depth.pgm")))?;
            }
        }
    }

    let times = result.plan_times_ms();
    let n = times.len().max(1) as f64;
    let mean = times.iter().sum::<f64>() / n;
    let std = (times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n).sqrt();
    println!(
        "status={:?} iterations={} sim_time_s={:.1} explored_m3={:.3} plan_time_ms={:.1} ± {:.1}",
        result.status,
        times.len(),
        result.sim_time,
        result.map.explored_volume(),
        mean,
        std
    );
    Ok(result.status)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) if status.is_complete() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
