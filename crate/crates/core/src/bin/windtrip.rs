use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use windtrip::harness::commands::{self, GridSpec, HarnessError, LegChoice, Plane};
use windtrip::harness::config::RunConfig;
use windtrip::harness::report::SummaryReport;
use windtrip::mission::Stage;

#[derive(Parser)]
#[command(name = "windtrip", version, about = "Round-trip wind disturbance rejection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario preset (jet, complex, hover, baseline, calm, gusty).
    #[arg(long, default_value = "jet")]
    scenario: String,
    /// TOML run configuration; replaces --scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set plan.return_speed=1.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fly a single leg.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// outbound, return or hover.
        #[arg(long, default_value = "outbound")]
        leg: String,
        /// Disturbance track from an outbound run, for a feedforward return.
        #[arg(long)]
        track: Option<PathBuf>,
    },
    /// Fly the full out-and-back mission.
    Roundtrip {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Paired round trips (pd-only, feedback, feedforward return) and the RMSE reduction.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sample a wind field on a plane to CSV.
    Fieldmap {
        /// Preset whose field to sample.
        #[arg(long, default_value = "jet")]
        field: String,
        /// Take the field from a run configuration instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "z=1")]
        plane: Plane,
        #[arg(long, default_value_t = GridSpec::default().min, allow_negative_numbers = true)]
        min: f64,
        #[arg(long, default_value_t = GridSpec::default().max, allow_negative_numbers = true)]
        max: f64,
        #[arg(long, default_value_t = GridSpec::default().step)]
        step: f64,
        /// Field time for unsteady flows, s.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        /// CSV path; stdout if omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Repeat the round trip over values of one setting.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Dotted setting path, e.g. `filters.tau_force`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Regenerate summaries from the logs under a directory.
    Report { dir: PathBuf },
}

fn resolve(run: &RunArgs) -> Result<RunConfig, HarnessError> {
    let mut cfg = match &run.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::from_preset(&run.scenario)?,
    };
    for item in &run.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| HarnessError::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
        cfg = cfg.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = run.seed {
        cfg = cfg.set("seed", &seed.to_string())?;
    }
    Ok(cfg)
}

fn output_dir(run: &RunArgs, cfg: &RunConfig, command: &str) -> PathBuf {
    run.output
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| Path::new("runs").join(format!("{command}-{}", cfg.body.name)))
}

fn print_summary(summary: &SummaryReport, dir: &Path) {
    for leg in &summary.legs {
        if matches!(leg.stage, Stage::Outbound | Stage::Return) {
            println!(
                "{:<9} {:<12} rmse {:.4} m  (x {:.4}, y {:.4}, z {:.4})  force est rmse {:.4} N",
                leg.stage.as_str(),
                format!("{:?}", leg.mode).to_lowercase(),
                leg.rmse_m,
                leg.rmse_axis_m[0],
                leg.rmse_axis_m[1],
                leg.rmse_axis_m[2],
                leg.force_estimate_rmse_n,
            );
        }
    }
    println!("logs in {}", dir.display());
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate { run, leg, track } => {
            let cfg = resolve(&run)?;
            let dir = output_dir(&run, &cfg, "simulate");
            let out = commands::simulate(&cfg, leg.parse::<LegChoice>()?, track.as_deref(), &dir)?;
            print_summary(&out.summary, &out.dir);
        }
        Command::Roundtrip { run } => {
            let cfg = resolve(&run)?;
            let dir = output_dir(&run, &cfg, "roundtrip");
            let out = commands::roundtrip(&cfg, &dir)?;
            print_summary(&out.summary, &out.dir);
        }
        Command::Compare { run } => {
            let cfg = resolve(&run)?;
            let dir = output_dir(&run, &cfg, "compare");
            let (report, _) = commands::compare(&cfg, &dir)?;
            for arm in &report.arms {
                println!("{:<12} seed {:<20} return rmse {:.4} m", arm.label, arm.seed, arm.return_rmse_m);
            }
            println!("reduction (feedforward vs feedback): {:.1}%", report.reduction_percent);
            println!("logs in {}", dir.display());
        }
        Command::Fieldmap { field, config, plane, min, max, step, time, output } => {
            let cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::from_preset(&field)?,
            };
            let table = commands::fieldmap(&cfg.body.field, plane, GridSpec { min, max, step }, time)?;
            match output {
                Some(path) => {
                    table.write(&path)?;
                    info!("wrote {} points to {}", table.len(), path.display());
                }
                None => {
                    let mut stdout = std::io::stdout().lock();
                    match stdout.write_all(table.to_csv().as_bytes()) {
                        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                            return Err(HarnessError::Io { path: PathBuf::from("<stdout>"), source: e })
                        }
                        _ => {}
                    }
                }
            }
        }
        Command::Sweep { run, param, values, workers } => {
            let cfg = resolve(&run)?;
            let dir = output_dir(&run, &cfg, "sweep");
            let cases = commands::sweep(&cfg, &param, &values, workers, &dir)?;
            for c in &cases {
                let ret = c.return_rmse_m.map_or("-".to_string(), |r| format!("{r:.4}"));
                println!("{param} = {:<10} seed {:<20} {:<10} return rmse {ret}", c.value, c.seed, c.status);
            }
            println!("table in {}", dir.join("sweep.csv").display());
        }
        Command::Report { dir } => {
            for path in commands::report(&dir)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
