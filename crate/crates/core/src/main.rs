//! Command-line front end for the beamforming experiments: convergence
//! traces, Monte Carlo sweeps, and the rounded-versus-exhaustive comparison.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use jbfas::harness::{self, config, output, Design, HarnessError, SweepConfig};
use jbfas::model::generate_channels;
use jbfas::sca::subproblem::{build_improved_subproblem, build_relaxed_subproblem};
use jbfas::sca::{initialize_state, Mode, PowerModel, ScaError};
use jbfas::SolveOptions;

#[derive(Parser)]
#[command(
    name = "jbfas",
    version,
    about = "Joint transmit beamforming and antenna selection experiments \
             for an underlay multi-user downlink"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Relaxed,
    Improved,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Relaxed => Mode::Relaxed,
            ModeArg::Improved => Mode::Improved,
        }
    }
}

fn parse_design(s: &str) -> Result<Design, String> {
    s.parse().map_err(|e: HarnessError| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Trace the objective after every outer iteration on one channel draw,
    /// for the joint design and for selection pinned to all antennas.
    Converge {
        /// Sweep configuration file; built-in defaults apply when omitted.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Joint design variant to trace.
        #[arg(long, value_enum, default_value_t = ModeArg::Improved)]
        mode: ModeArg,
        /// Also write the first subproblem, one constraint per line, to this
        /// file.
        #[arg(long, value_name = "PATH")]
        dump_conic: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep; all requested designs see identical channels
    /// within each trial.
    Sweep {
        /// Sweep configuration file; built-in defaults apply when omitted.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Trials per sweep value.
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory override.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Comma-separated designs to run, e.g. JBFAS_improved,SPC.
        #[arg(long, value_delimiter = ',', value_parser = parse_design)]
        designs: Option<Vec<Design>>,
        /// Record wall-clock times; off by default so outputs are byte-stable.
        #[arg(long)]
        timing: bool,
    },
    /// Compare the rounded joint design against an exhaustive antenna-subset
    /// search on independent channel draws.
    OracleCheck {
        /// Sweep configuration file; built-in defaults apply when omitted.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of channel draws.
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory override.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn load_config(
    path: &Option<PathBuf>,
    default: fn() -> SweepConfig,
) -> Result<SweepConfig, HarnessError> {
    match path {
        Some(p) => SweepConfig::load(p),
        None => Ok(default()),
    }
}

fn cmd_converge(
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    mode: ModeArg,
    dump_conic: Option<PathBuf>,
) -> Result<(), HarnessError> {
    let sweep = load_config(&config, config::default_sweep)?;
    let seed = seed.unwrap_or(sweep.seed);
    let out_dir = out.unwrap_or_else(|| sweep.output_dir.clone());
    let cfg = sweep.base.to_problem()?;
    let opts = SolveOptions::default();
    let mode = Mode::from(mode);
    let traces = harness::run_convergence_trace(&cfg, seed, mode, &opts)?;
    for trace in &traces {
        match trace.objective_bps.last() {
            Some(last) => println!(
                "{}: {} iterations, final objective {:.6} bits/s/Hz",
                trace.design,
                trace.objective_bps.len().saturating_sub(1),
                last
            ),
            None => println!("{}: infeasible", trace.design),
        }
    }
    if let Some(path) = dump_conic {
        let ch = generate_channels(&cfg, seed);
        let state = initialize_state(&cfg, &ch, PowerModel::Selection)?;
        let sub = match mode {
            Mode::Relaxed => build_relaxed_subproblem(&cfg, &ch, &state),
            Mode::Improved => build_improved_subproblem(&cfg, &ch, &state),
        }
        .map_err(ScaError::from)?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| HarnessError::Write {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(&path, sub.program.dump_text()).map_err(|source| HarnessError::Write {
            path: path.clone(),
            source,
        })?;
        println!("wrote {}", path.display());
    }
    for p in output::write_convergence_outputs(&out_dir, &traces)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_sweep(
    config: Option<PathBuf>,
    seed: Option<u64>,
    trials: Option<usize>,
    out: Option<PathBuf>,
    designs: Option<Vec<Design>>,
    timing: bool,
) -> Result<(), HarnessError> {
    let mut sweep = load_config(&config, config::default_sweep)?;
    if let Some(s) = seed {
        sweep.seed = s;
    }
    if let Some(t) = trials {
        sweep.n_trials = t;
    }
    if let Some(o) = out {
        sweep.output_dir = o;
    }
    if let Some(d) = designs {
        sweep.designs = d;
    }
    sweep.validate()?;
    let opts = SolveOptions::default();
    let outcome = harness::run_sweep(&sweep, &opts, timing)?;
    println!(
        "{:>10} {:>10} {:<18} {:>9} {:>12} {:>8}",
        "variable", "value", "design", "feasible", "mean rate", "iters"
    );
    for row in &outcome.aggregate {
        println!(
            "{:>10} {:>10} {:<18} {:>6}/{:<2} {:>12.4} {:>8.1}",
            row.sweep_variable.to_string(),
            row.sweep_value.to_string(),
            row.design.to_string(),
            row.n_feasible,
            row.n_total,
            row.mean_sum_rate_bps,
            row.mean_iterations
        );
    }
    for p in output::write_sweep_outputs(&sweep.output_dir, &outcome)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_oracle_check(
    config: Option<PathBuf>,
    seed: Option<u64>,
    trials: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), HarnessError> {
    let mut sweep = load_config(&config, config::default_oracle_check)?;
    if let Some(s) = seed {
        sweep.seed = s;
    }
    if let Some(t) = trials {
        sweep.n_trials = t;
    }
    if let Some(o) = out {
        sweep.output_dir = o;
    }
    let cfg = sweep.base.to_problem()?;
    let opts = SolveOptions::default();
    let summary = harness::run_oracle_check(&cfg, sweep.seed, sweep.n_trials, &opts)?;
    println!(
        "rounded joint design within {:.0}% of the exhaustive search in {}/{} comparable \
         trials ({} total, {} above the search optimum)",
        100.0 * harness::ORACLE_MATCH_RATIO,
        summary.n_within,
        summary.n_comparable,
        summary.n_total,
        summary.n_exceed
    );
    for p in output::write_oracle_outputs(&sweep.output_dir, &summary)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Converge {
            config,
            seed,
            out,
            mode,
            dump_conic,
        } => cmd_converge(config, seed, out, mode, dump_conic),
        Command::Sweep {
            config,
            seed,
            trials,
            out,
            designs,
            timing,
        } => cmd_sweep(config, seed, trials, out, designs, timing),
        Command::OracleCheck {
            config,
            seed,
            trials,
            out,
        } => cmd_oracle_check(config, seed, trials, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
