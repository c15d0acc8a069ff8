use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lptem::commands::{self, StatsOptions, TrackOptions};
use lptem::config::{self, RunConfig};
use lptem::{CliError, Result};
use lptem_core::tracklink::MaskKind;
use lptem_core::trajstats::DisplacementAxis;

/// Simulate, track, analyse and score nanoparticle videos.
#[derive(Parser, Debug)]
#[command(name = "lptem", version)]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, env = "LPTEM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic video with ground-truth masks and trajectories.
    Simulate {
        /// TOML run configuration.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in configuration (see `print-config --list`).
        #[arg(long)]
        preset: Option<String>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
        /// Also write 8-bit previews to `preview/`.
        #[arg(long)]
        preview_8bit: bool,
    },
    /// Link per-frame mask detections into trajectories.
    Track {
        /// Mask directory, or a dataset directory containing `masks/`.
        masks: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Read `[track]` defaults from this configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        gate: Option<f64>,
        #[arg(long)]
        max_missed: Option<usize>,
        #[arg(long)]
        min_area: Option<usize>,
        /// Treat masks as binary and split them into connected components.
        #[arg(long)]
        binary: bool,
        /// nm per pixel; taken from meta.json when omitted.
        #[arg(long)]
        pixel_size: Option<f64>,
    },
    /// MSD, VACF and displacement distributions of a trajectory table.
    Stats {
        table: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        max_lag_fraction: Option<f64>,
        #[arg(long)]
        fit_lags: Option<usize>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        hist_lag: Option<usize>,
        #[arg(long, value_parser = parse_axis)]
        axis: Option<DisplacementAxis>,
        /// nm per pixel for tables with px columns only.
        #[arg(long)]
        pixel_size: Option<f64>,
        /// Seconds per frame.
        #[arg(long)]
        frame_interval: Option<f64>,
    },
    /// Score predicted label masks against ground truth (J, F, J&F).
    Eval {
        pred: PathBuf,
        gt: PathBuf,
        /// Boundary tolerance in px.
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short, default_value = "report.json")]
        out: PathBuf,
    },
    /// Per-frame centroid distances between two trajectory tables.
    CentroidAgree {
        pred: PathBuf,
        reference: PathBuf,
        /// nm per pixel.
        #[arg(long)]
        pixel_size: f64,
        #[arg(long, short, default_value = "distances.csv")]
        out: PathBuf,
    },
    /// Print a configuration with every field filled in.
    PrintConfig {
        #[arg(long, default_value = "training")]
        preset: String,
        /// List preset names.
        #[arg(long)]
        list: bool,
    },
}

fn parse_axis(s: &str) -> std::result::Result<DisplacementAxis, String> {
    match s {
        "x" => Ok(DisplacementAxis::X),
        "y" => Ok(DisplacementAxis::Y),
        "radial" => Ok(DisplacementAxis::Radial),
        "both_axes_pooled" | "both" => Ok(DisplacementAxis::BothAxesPooled),
        _ => Err(format!("unknown axis {s:?}; expected x, y, radial or both_axes_pooled")),
    }
}

fn load_or_default(path: Option<&PathBuf>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), |p| RunConfig::load(p))
}

fn preset(name: &str) -> Result<RunConfig> {
    config::preset(name).ok_or_else(|| {
        let names: Vec<&str> = config::PRESETS.iter().map(|p| p.0).collect();
        CliError::Usage(format!("unknown preset {name:?}; available: {}", names.join(", ")))
    })
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { config, preset: name, seed, out, preview_8bit } => {
            let mut cfg = match (config, name) {
                (Some(p), _) => RunConfig::load(&p)?,
                (None, Some(n)) => preset(&n)?,
                (None, None) => return Err(CliError::Usage("simulate needs --config or --preset".into())),
            };
            if let (Some(s), Some(sim)) = (seed, cfg.simulate.as_mut()) {
                sim.seed = s;
            }
            let meta = commands::simulate(&cfg, &out, preview_8bit)?;
            println!(
                "wrote {} frames, {} particles, thickness {} nm, model {} to {}",
                meta.n_frames,
                meta.n_particles,
                meta.scene.thickness_nm,
                meta.trajectory_model,
                out.display()
            );
        }
        Command::Track { masks, out, config, gate, max_missed, min_area, binary, pixel_size } => {
            let mut section = load_or_default(config.as_ref())?.track;
            if let Some(g) = gate {
                section.gate_px = g;
            }
            if let Some(m) = max_missed {
                section.max_missed = m;
            }
            if let Some(a) = min_area {
                section.min_area_px = a;
            }
            if binary {
                section.mask_kind = MaskKind::Binary;
            }
            if !(section.gate_px > 0.0) {
                return Err(CliError::Usage("gate must be > 0".into()));
            }
            let (_, summary) = commands::track(&masks, &out, &TrackOptions { section, pixel_size })?;
            if !summary.pixel_size_known {
                eprintln!("warning: pixel size unknown; nm columns omitted");
            }
            println!("{summary}");
        }
        Command::Stats { table, out, config, max_lag_fraction, fit_lags, bins, hist_lag, axis, pixel_size, frame_interval } => {
            let mut section = load_or_default(config.as_ref())?.stats;
            if let Some(v) = max_lag_fraction {
                section.max_lag_fraction = v;
            }
            if let Some(v) = fit_lags {
                section.fit_lags = v;
            }
            if let Some(v) = bins {
                section.n_bins = v;
            }
            if let Some(v) = hist_lag {
                section.hist_lag_frames = v;
            }
            if let Some(v) = axis {
                section.axis = v;
            }
            let check = RunConfig { stats: section.clone(), ..RunConfig::default() };
            check.validate().map_err(CliError::Usage)?;
            let s = commands::stats(&table, &out, &StatsOptions { section, pixel_size, frame_interval })?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            let pooled = s
                .pooled_fit
                .map(|f| format!("D={} {}²/s alpha={}", f.diffusion_coefficient, s.units.suffix(), f.alpha))
                .unwrap_or_else(|| "D=n/a alpha=n/a".into());
            println!(
                "trajectories={} analysed={} skipped={} {pooled}",
                s.trajectories,
                s.analysed.len(),
                s.skipped.len()
            );
        }
        Command::Eval { pred, gt, tolerance, config, out } => {
            let tol = tolerance.or(load_or_default(config.as_ref())?.eval.tolerance_px);
            let r = commands::eval(&pred, &gt, tol, &out)?;
            let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6}"));
            println!(
                "video_mean_jf={} j={} f={} objects={} frames={} tolerance_px={}",
                show(r.metrics.video_mean_jf),
                show(r.metrics.video_mean_j),
                show(r.metrics.video_mean_f),
                r.correspondence.len(),
                r.frames,
                r.tolerance_px
            );
        }
        Command::CentroidAgree { pred, reference, pixel_size, out } => {
            let a = commands::centroid_agree(&pred, &reference, pixel_size, &out)?;
            let s = &a.summary;
            println!(
                "n={} median_nm={:.4} q1_nm={:.4} q3_nm={:.4} iqr_nm={:.4} outliers={}",
                s.n,
                s.median,
                s.q1,
                s.q3,
                s.iqr,
                s.outliers.len()
            );
        }
        Command::PrintConfig { preset: name, list } => {
            if list {
                for (n, d) in config::PRESETS {
                    println!("{n:<16} {d}");
                }
            } else {
                print!("{}", preset(&name)?.to_toml());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| run(cli.command)),
        Err(e) => Err(CliError::Usage(format!("thread pool: {e}"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
