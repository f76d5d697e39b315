use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use telemanip::ftcal::{calibrate_checked, read_samples, DEFAULT_MAX_RESIDUAL, MIN_SAMPLES};
use telemanip::harness::workspace::{read_poses, write_poses};
use telemanip::harness::{analyze_workspace, perturbed_mounts, shift_sweep, tracking_error, PoseRecord, ReachModel, RunLogs, Summary};
use telemanip::kinematics::{IkParams, KinematicChain};
use telemanip::sim::scenario::operator_chain;
use telemanip::sim::{run_scenario, RunOptions, Scenario, SimError};

#[derive(Parser)]
#[command(name = "telemanip", about = "Bilateral telemanipulation simulator and analysis tools")]
struct Cli {
    /// Input file for the subcommand (scenario, chain, or sample file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pace the simulation to wall-clock time.
    #[arg(long, global = true)]
    realtime: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write logs plus summary.json.
    Run {
        scenario: Option<PathBuf>,
        #[arg(long)]
        safety_force_n: Option<f64>,
        #[arg(long)]
        safety_torque_nm: Option<f64>,
    },
    /// Reachability of the operator arm for candidate mounts.
    Workspace {
        /// JSON list of poses; generated from the seated-reach model if absent.
        #[arg(long)]
        poses: Option<PathBuf>,
        #[arg(long, default_value_t = 2959)]
        count: usize,
        /// JSON list of mount poses; the chain mount plus perturbations if absent.
        #[arg(long)]
        mounts: Option<PathBuf>,
        #[arg(long, default_value_t = 24)]
        candidates: usize,
    },
    /// Mean error between avatar hand and delayed operator command per shift.
    ShiftSweep {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 100)]
        max_shift_ms: u64,
    },
    /// Mean and p95 translation error of a run.
    TrackError {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        shift_ms: u64,
    },
    /// Fit a force/torque sensor calibration from JSON-lines samples.
    Ftcal {
        samples: Option<PathBuf>,
        #[arg(long, default_value_t = MIN_SAMPLES)]
        min_samples: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_RESIDUAL)]
        max_residual: f64,
    },
}

enum Failure {
    Config(String),
    Numeric(String),
    Other(String),
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure::Config(e.to_string())
    }

    fn other(e: impl std::fmt::Display) -> Self {
        Failure::Other(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NumericFault { .. } => Failure::Numeric(e.to_string()),
            SimError::Scenario(_) | SimError::StartPosture(_) => Failure::Config(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

fn input(positional: Option<PathBuf>, config: &Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    positional.or_else(|| config.clone()).ok_or_else(|| Failure::Config(format!("no {what} given (positional or --config)")))
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(Failure::other)?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(Failure::other)?;
    Ok(path)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Run { scenario, safety_force_n, safety_torque_nm } => {
            let path = input(scenario, &cli.config, "scenario")?;
            let mut sc = Scenario::load(&path).map_err(Failure::config)?;
            if let Some(f) = safety_force_n {
                sc.avatar.config.safety.force_n = f;
            }
            if let Some(t) = safety_torque_nm {
                sc.avatar.config.safety.torque_nm = t;
            }
            let report = run_scenario(&sc, &cli.out_dir, &RunOptions { realtime: cli.realtime, seed: cli.seed })?;
            let summary = Summary::from_dir(&cli.out_dir).map_err(Failure::other)?;
            summary.write(&cli.out_dir).map_err(Failure::other)?;
            println!("{}", summary.to_json());
            eprintln!("{} ticks in {:.2} s, logs in {}", report.ticks, report.wall_time.as_secs_f64(), report.out_dir.display());
        }
        Cmd::Workspace { poses, count, mounts, candidates } => {
            let chain = match &cli.config {
                Some(p) => KinematicChain::load(p).map_err(Failure::config)?,
                None => operator_chain(),
            };
            let seed = cli.seed.unwrap_or(0);
            let pose_set: Vec<_> = match poses {
                Some(p) => read_poses(&p).map_err(Failure::config)?.iter().map(PoseRecord::pose).collect(),
                None => {
                    let set = ReachModel::default().sample(count, seed);
                    std::fs::create_dir_all(&cli.out_dir).map_err(Failure::other)?;
                    let recs: Vec<_> = set.iter().map(|p| PoseRecord::from_pose(p, None)).collect();
                    write_poses(&cli.out_dir.join("poses.json"), &recs).map_err(Failure::other)?;
                    set
                }
            };
            let mount_set = match mounts {
                Some(p) => read_poses(&p).map_err(Failure::config)?,
                None => perturbed_mounts(&chain.mount, candidates, seed, 0.25, 60f64.to_radians(), 20f64.to_radians()),
            };
            // Mounts replace the chain's own base pose.
            let base = chain.clone().with_mount(telemanip::kinematics::Pose::identity());
            let report = analyze_workspace(&base, &mount_set, &pose_set, &IkParams::global()).map_err(Failure::config)?;
            write_out(&cli.out_dir, "workspace.json", &serde_json::to_string_pretty(&report).expect("report serializes"))?;
            print!("{}", report.table());
        }
        Cmd::ShiftSweep { run_dir, max_shift_ms } => {
            let logs = RunLogs::read(&run_dir).map_err(Failure::config)?;
            let per_ms = 1e-3 / logs.dt();
            let mask = logs.track_mask().map_err(Failure::config)?;
            let (cmd, av) = (logs.command_positions().map_err(Failure::config)?, logs.avatar_positions().map_err(Failure::config)?);
            let max = (max_shift_ms as f64 * per_ms).round() as usize;
            let sweep = shift_sweep(&cmd, &av, max, Some(&mask)).map_err(Failure::config)?;
            let mut csv = String::from("shift_ms,mean_error_mm\n");
            for (s, e) in sweep.curve.iter().enumerate() {
                csv += &format!("{},{}\n", s as f64 / per_ms, e * 1e3);
            }
            let path = write_out(&run_dir, "shift_sweep.csv", &csv)?;
            println!("minimum at {} ms: {:.3} mm (curve in {})", sweep.argmin as f64 / per_ms, sweep.min_error * 1e3, path.display());
        }
        Cmd::TrackError { run_dir, shift_ms } => {
            let logs = RunLogs::read(&run_dir).map_err(Failure::config)?;
            let shift = (shift_ms as f64 * 1e-3 / logs.dt()).round() as usize;
            let mask = logs.track_mask().map_err(Failure::config)?;
            let (cmd, av) = (logs.command_positions().map_err(Failure::config)?, logs.avatar_positions().map_err(Failure::config)?);
            let e = tracking_error(&cmd, &av, shift, Some(&mask)).map_err(Failure::config)?;
            println!("shift {shift_ms} ms: mean {:.3} mm, p95 {:.3} mm, max {:.3} mm over {} samples", e.mean * 1e3, e.p95 * 1e3, e.max * 1e3, e.samples);
        }
        Cmd::Ftcal { samples, min_samples, max_residual } => {
            let path = input(samples, &cli.config, "sample file")?;
            let file = std::fs::File::open(&path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let set = read_samples(std::io::BufReader::new(file)).map_err(Failure::config)?;
            let cal = calibrate_checked(&set, min_samples, max_residual).map_err(Failure::config)?;
            let text = serde_json::to_string_pretty(&cal.to_file()).expect("calibration serializes");
            let out = write_out(&cli.out_dir, "calibration.json", &text)?;
            println!("{text}");
            eprintln!("calibration written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("numeric fault: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
