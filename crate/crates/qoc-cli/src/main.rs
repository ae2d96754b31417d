//! `qoc`: synthesize, verify, and classify constrained Landau-Zener optimal
//! control candidates from the command line.

mod config;
mod report;

use clap::{Parser, Subcommand};
use config::{demo_problem, load_policy, ProblemConfig};
use qoc_core::classify::{classify, switching_bounds};
use qoc_core::oracle::{oracle_max_j_direct, oracle_min_time};
use qoc_core::pmp::{pontryagin_k, recover_costate, switching_function};
use qoc_core::scan::{scan, ScanConfig};
use qoc_core::synthesis::{enumerate_candidates, EnumerationConfig};
use qoc_core::{ControlProblem, Mode};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_INPUT: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

#[derive(Parser)]
#[command(name = "qoc", version, about)]
struct Cli {
    /// Cap the rayon worker pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a policy file and emit the trajectory as CSV.
    Propagate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Sample count per segment.
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Enumerate, verify, and classify extremal candidates; emit a JSON report.
    Solve {
        #[arg(long, conflicts_with = "demo")]
        config: Option<PathBuf>,
        /// Built-in problem: fig9, fig10, fig2a, or fig11.
        #[arg(long)]
        demo: Option<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Multi-start gradient-flow landscape scan; emit a JSON report.
    Scan {
        #[arg(long, conflicts_with = "demo")]
        config: Option<PathBuf>,
        #[arg(long)]
        demo: Option<String>,
        /// Scan horizon; defaults to the long-time regime 4 pi^2 / alpha.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("QOC_LOG")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(CliError::Verification(msg)) => {
            eprintln!("verification failure: {msg}");
            ExitCode::from(EXIT_VERIFICATION)
        }
    }
}

enum CliError {
    Input(String),
    Verification(String),
}

impl CliError {
    fn input<E: std::fmt::Display>(e: E) -> Self {
        CliError::Input(e.to_string())
    }
}

fn load_setup(
    config: &Option<PathBuf>,
    demo: &Option<String>,
) -> Result<(ControlProblem, ProblemConfig), CliError> {
    match (config, demo) {
        (Some(path), None) => {
            let cfg = ProblemConfig::load(path).map_err(CliError::input)?;
            let problem = cfg.to_problem().map_err(CliError::input)?;
            Ok((problem, cfg))
        }
        (None, Some(name)) => {
            let (problem, cfg) = demo_problem(name).ok_or_else(|| {
                CliError::Input(format!(
                    "unknown demo '{name}' (expected fig9, fig10, fig2a, or fig11)"
                ))
            })?;
            Ok((problem, cfg))
        }
        _ => Err(CliError::Input("exactly one of --config or --demo is required".into())),
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Propagate { config, policy, out, samples } => {
            let cfg = ProblemConfig::load(&config).map_err(CliError::input)?;
            let problem = cfg.to_problem().map_err(CliError::input)?;
            let policy = load_policy(&policy).map_err(CliError::input)?;
            let rows = trajectory_rows(&problem, &policy, samples);
            write_csv(&rows, out.as_deref()).map_err(CliError::input)
        }
        Command::Solve { config, demo, out } => {
            let (problem, cfg) = load_setup(&config, &demo)?;
            let report = solve_report(&problem, &cfg)?;
            write_json(&report, out.as_deref()).map_err(CliError::input)
        }
        Command::Scan { config, demo, t, starts, out } => {
            let (problem, cfg) = load_setup(&config, &demo)?;
            let horizon = t
                .or(match problem.mode {
                    Mode::FixedT(t) => Some(t),
                    Mode::TimeOptimal => None,
                })
                .unwrap_or(4.0 * std::f64::consts::PI.powi(2) / problem.alpha());
            let mut scan_cfg = ScanConfig { seed: cfg.seed, ..ScanConfig::default() };
            if let Some(s) = starts.or(cfg.scan_starts) {
                scan_cfg.starts = s;
            }
            let report = report::VersionedScan {
                format_version: report::FORMAT_VERSION,
                report: scan(&problem, horizon, &scan_cfg),
            };
            write_json(&report, out.as_deref()).map_err(CliError::input)
        }
    }
}

fn solve_report(
    problem: &ControlProblem,
    cfg: &ProblemConfig,
) -> Result<report::SolveReport, CliError> {
    let enum_cfg = EnumerationConfig {
        n_max: cfg.n_max.unwrap_or(6),
        ..EnumerationConfig::default()
    };
    let candidates = enumerate_candidates(problem, &enum_cfg);
    log::info!("enumerated {} candidates", candidates.len());

    let restarts = cfg.oracle_restarts.unwrap_or(60);
    let resolution = cfg.oracle_resolution.unwrap_or(1e-3);
    let oracle = match problem.mode {
        Mode::TimeOptimal => {
            oracle_min_time(problem, enum_cfg.n_max + 2, resolution, restarts, cfg.seed).ok()
        }
        Mode::FixedT(t) => {
            Some(oracle_max_j_direct(problem, t, enum_cfg.n_max + 2, restarts, cfg.seed))
        }
    };
    let oracle_t = match problem.mode {
        Mode::TimeOptimal => oracle.as_ref().map(|o| o.best_t),
        Mode::FixedT(_) => None,
    };
    let classified = classify(problem, &candidates, oracle_t, 2.0 * resolution)
        .map_err(|e| CliError::Verification(e.to_string()))?;

    Ok(report::SolveReport {
        format_version: report::FORMAT_VERSION,
        problem: report::ProblemEcho::from(problem),
        bounds: switching_bounds(problem),
        oracle: oracle.map(|o| report::OracleSummary {
            best_j: o.best_j,
            best_t: o.best_t,
            grid_resolution: o.grid_resolution,
            restarts: o.restarts,
        }),
        candidates: classified.into_iter().map(report::CandidateReport::from).collect(),
    })
}

fn trajectory_rows(
    problem: &ControlProblem,
    policy: &qoc_core::ControlPolicy,
    samples: usize,
) -> Vec<report::TrajectoryRow> {
    let points = qoc_core::bloch::propagate_policy(&problem.r0, policy, samples.max(1));
    // terminal costate: transversality solve when the endpoint reaches the
    // target, the target itself otherwise (deadlock convention)
    let r_final = qoc_core::bloch::propagate(&problem.r0, policy);
    let a_final = if (r_final.dot(&problem.o) - 1.0).abs() < 1e-6 {
        recover_costate(&problem.r0, policy).a_final
    } else {
        problem.o
    };
    let total = policy.total_time();
    points
        .iter()
        .map(|p| {
            let a = costate_at(&a_final, policy, total, p.tau);
            (p, a)
        })
        .map(|(p, a)| report::TrajectoryRow {
            tau: p.tau,
            u: p.u,
            rx: p.r.x,
            ry: p.r.y,
            rz: p.r.z,
            k: pontryagin_k(&p.r, &a, p.u),
            switching: switching_function(&p.r, &a),
        })
        .collect()
}

/// Costate at time tau, back-rotated from the terminal value.
fn costate_at(
    a_final: &nalgebra::Vector3<f64>,
    policy: &qoc_core::ControlPolicy,
    total: f64,
    tau: f64,
) -> nalgebra::Vector3<f64> {
    let mut a = *a_final;
    let mut t_end = total;
    for seg in policy.segments.iter().rev() {
        let t_start = t_end - seg.dt;
        if tau < t_end {
            let span = (t_end - tau.max(t_start)).max(0.0);
            let (axis, rate) = qoc_core::bloch::rotation_axis(seg.u);
            a = qoc_core::bloch::rotate_about(&axis, -rate * span, &a);
        }
        t_end = t_start;
        if t_end <= tau {
            break;
        }
    }
    a
}

fn write_csv(rows: &[report::TrajectoryRow], out: Option<&std::path::Path>) -> Result<(), String> {
    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| e.to_string())?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        w.serialize(row).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&std::path::Path>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| e.to_string()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
