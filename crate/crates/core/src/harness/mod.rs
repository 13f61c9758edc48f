//! Experiment drivers: seeded Monte Carlo sweeps over an operating variable,
//! per-iteration convergence traces, and a rounded-versus-exhaustive
//! comparison, together with their on-disk outputs.
//!
//! Every trial derives its channel seed from the master seed and the trial's
//! position, so a sweep is reproducible end to end and all designs within a
//! trial see identical channels.

pub mod config;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{
    exhaustive_selection_oracle, solve_papc, solve_spc, solve_zf_papc, BaselineError,
};
use crate::model::{
    achievable_rate, generate_channels, interference_at_pu, perturb_channels, BeamformingMatrix,
    ChannelSet, ModelError, ProblemConfig,
};
use crate::nats_to_bits;
use crate::sca::{
    solve_jbfas, solve_jbfas_pinned_alpha, Mode, ScaError, ScaStatus, SolveOptions, SolveResult,
};

pub use config::{
    apply_sweep, BaseConfig, Design, SweepConfig, SweepValue, SweepVariable,
};

/// Cap on the number of antenna subsets the exhaustive search may visit when
/// it runs as a sweep design.
pub const MAX_ORACLE_SUBSETS: usize = 255;

/// A rounded joint design counts as matching the exhaustive search when it
/// reaches this fraction of the searched optimum.
pub const ORACLE_MATCH_RATIO: f64 = 0.98;

/// Slack, in bits, above which a rounded design is flagged as beating the
/// exhaustive search (a numerical red flag, not a success).
pub const ORACLE_EXCEED_TOL: f64 = 1e-6;

const PERTURB_SALT: u64 = 0x5eed_0ff5_e7ab_1e00;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("no records to aggregate")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sca(#[from] ScaError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// One design evaluated on one trial's channels.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub sweep_variable: SweepVariable,
    pub sweep_value: SweepValue,
    pub value_idx: usize,
    pub trial_idx: usize,
    pub seed: u64,
    pub design: Design,
    pub feasible: bool,
    /// Sum rate in bits; NaN for infeasible trials. Under a CSI uncertainty
    /// sweep this is re-evaluated on the perturbed (true) channels.
    pub sum_rate_bps: f64,
    pub rounded_sum_rate_bps: Option<f64>,
    pub per_user_rates_bps: Vec<f64>,
    pub iterations: usize,
    pub wall_time_ms: f64,
    /// Worst interference-cap overshoot on the true channels; zero when the
    /// caps hold or no primaries are present.
    pub pu_violation: f64,
    pub channel_hash: u64,
}

/// Mean statistics for one (sweep value, design) cell, over feasible trials.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub sweep_variable: SweepVariable,
    pub sweep_value: SweepValue,
    pub design: Design,
    pub n_feasible: usize,
    pub n_total: usize,
    pub mean_sum_rate_bps: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub mean_iterations: f64,
    pub mean_wall_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub trials: Vec<TrialRecord>,
    pub aggregate: Vec<AggregateRow>,
}

/// Objective value after every outer iteration of one design.
#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub design: Design,
    pub objective_bps: Vec<f64>,
}

/// One trial of the rounded-versus-exhaustive comparison. `None` marks a
/// design that produced no feasible discrete solution.
#[derive(Debug, Clone)]
pub struct OracleCheckRow {
    pub trial_idx: usize,
    pub seed: u64,
    pub jbfas_bps: Option<f64>,
    pub oracle_bps: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OracleCheckSummary {
    pub rows: Vec<OracleCheckRow>,
    pub n_total: usize,
    /// Trials where the exhaustive search found a feasible design.
    pub n_comparable: usize,
    /// Comparable trials where the rounded design reached the match ratio.
    pub n_within: usize,
    /// Comparable trials where the rounded design beat the search by more
    /// than the tolerance.
    pub n_exceed: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Channel seed for one trial, a pure function of the master seed and the
/// trial's position in the sweep.
pub fn trial_seed(master: u64, value_idx: usize, trial_idx: usize) -> u64 {
    let a = splitmix64(master ^ 0x517c_c1b7_2722_0a95);
    let b = splitmix64(a ^ (value_idx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
    splitmix64(b ^ (trial_idx as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f).wrapping_add(1))
}

/// FNV-1a hash of the channel realization, recorded per trial so paired runs
/// can prove they saw identical channels.
pub fn channel_hash(ch: &ChannelSet<f64>) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    let mut eat = |bits: u64| {
        for byte in bits.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for k in 0..ch.n_sus() {
        for c in ch.su(k) {
            eat(c.re.to_bits());
            eat(c.im.to_bits());
        }
    }
    for m in 0..ch.n_pus() {
        for c in ch.pu(m) {
            eat(c.re.to_bits());
            eat(c.im.to_bits());
        }
    }
    h
}

struct DesignRun {
    feasible: bool,
    iterations: usize,
    w: Option<BeamformingMatrix<f64>>,
    rounded_w: Option<BeamformingMatrix<f64>>,
    sum_rate_nats: f64,
    per_user_nats: Vec<f64>,
    rounded_nats: Option<f64>,
}

impl DesignRun {
    fn infeasible(iterations: usize) -> Self {
        DesignRun {
            feasible: false,
            iterations,
            w: None,
            rounded_w: None,
            sum_rate_nats: f64::NAN,
            per_user_nats: Vec::new(),
            rounded_nats: None,
        }
    }
}

fn from_sca(res: Result<SolveResult<f64>, ScaError>) -> DesignRun {
    match res {
        Ok(r) if r.status != ScaStatus::Infeasible => {
            let rounded_nats = r.rounded.as_ref().map(|x| x.sum_rate);
            let rounded_w = r.rounded.map(|x| x.w);
            DesignRun {
                feasible: true,
                iterations: r.iterations,
                w: Some(r.w),
                rounded_w,
                sum_rate_nats: r.sum_rate,
                per_user_nats: r.per_user_rates,
                rounded_nats,
            }
        }
        Ok(r) => DesignRun::infeasible(r.iterations),
        Err(_) => DesignRun::infeasible(0),
    }
}

/// Runs one design on one channel realization. Solver failures surface as
/// infeasible runs so a sweep never aborts on a single bad trial.
fn run_design(
    design: Design,
    cfg: &ProblemConfig<f64>,
    ch: &ChannelSet<f64>,
    opts: &SolveOptions<f64>,
) -> DesignRun {
    match design {
        Design::JbfasRelaxed => from_sca(solve_jbfas(cfg, ch, Mode::Relaxed, opts)),
        Design::JbfasImproved => from_sca(solve_jbfas(cfg, ch, Mode::Improved, opts)),
        Design::JbfasFixedAlpha => from_sca(solve_jbfas_pinned_alpha(cfg, ch, opts)),
        Design::Spc => from_sca(solve_spc(cfg, ch, opts)),
        Design::Papc => from_sca(solve_papc(cfg, ch, opts)),
        Design::ZfPapc => from_sca(solve_zf_papc(cfg, ch, opts)),
        Design::Oracle => match exhaustive_selection_oracle(cfg, ch, opts, MAX_ORACLE_SUBSETS) {
            Ok(r) => {
                let explored = r.subsets_explored;
                match r.best {
                    Some(b) => DesignRun {
                        feasible: true,
                        iterations: explored,
                        w: Some(b.w),
                        rounded_w: None,
                        sum_rate_nats: b.sum_rate,
                        per_user_nats: b.per_user_rates,
                        rounded_nats: None,
                    },
                    None => DesignRun::infeasible(explored),
                }
            }
            Err(_) => DesignRun::infeasible(0),
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn make_record(
    sweep: &SweepConfig,
    value_idx: usize,
    trial_idx: usize,
    seed: u64,
    design: Design,
    cfg: &ProblemConfig<f64>,
    truth: Option<&ChannelSet<f64>>,
    hash: u64,
    run: DesignRun,
    wall_time_ms: f64,
) -> TrialRecord {
    let mut sum_nats = run.sum_rate_nats;
    let mut per_nats = run.per_user_nats;
    let mut rounded_nats = run.rounded_nats;
    let mut violation = 0.0f64;
    if let (Some(truth), Some(w)) = (truth, run.w.as_ref()) {
        per_nats = (0..cfg.n_sus)
            .map(|k| achievable_rate(truth, w, k, cfg.noise_powers[k]))
            .collect();
        sum_nats = per_nats.iter().sum();
        for m in 0..cfg.n_pus {
            violation = violation.max(interference_at_pu(truth, w, m) - cfg.interference_caps[m]);
        }
        violation = violation.max(0.0);
        if let Some(rw) = run.rounded_w.as_ref() {
            rounded_nats = Some(
                (0..cfg.n_sus)
                    .map(|k| achievable_rate(truth, rw, k, cfg.noise_powers[k]))
                    .sum(),
            );
        }
    }
    TrialRecord {
        sweep_variable: sweep.sweep_variable,
        sweep_value: sweep.sweep_values[value_idx],
        value_idx,
        trial_idx,
        seed,
        design,
        feasible: run.feasible,
        sum_rate_bps: nats_to_bits(sum_nats),
        rounded_sum_rate_bps: rounded_nats.map(nats_to_bits),
        per_user_rates_bps: per_nats.iter().map(|&r| nats_to_bits(r)).collect(),
        iterations: run.iterations,
        wall_time_ms,
        pu_violation: violation,
        channel_hash: hash,
    }
}

/// Runs the full sweep: for every sweep value and trial, draws channels and
/// evaluates every requested design on them. Under a CSI uncertainty sweep
/// the designs see the nominal channels and the records report rates and cap
/// violations on perturbed ones. Wall times are recorded only when `timing`
/// is set, so default outputs are byte-stable across hosts.
pub fn run_sweep(
    sweep: &SweepConfig,
    opts: &SolveOptions<f64>,
    timing: bool,
) -> Result<SweepOutcome, HarnessError> {
    sweep.validate()?;
    let mut trials =
        Vec::with_capacity(sweep.sweep_values.len() * sweep.n_trials * sweep.designs.len());
    for (value_idx, &value) in sweep.sweep_values.iter().enumerate() {
        let (cfg, (eps_s, eps_p)) = config::apply_sweep(&sweep.base, sweep.sweep_variable, value)?;
        let rows: Vec<Vec<TrialRecord>> = (0..sweep.n_trials)
            .into_par_iter()
            .map(|trial_idx| {
                let seed = trial_seed(sweep.seed, value_idx, trial_idx);
                let ch = generate_channels(&cfg, seed);
                let hash = channel_hash(&ch);
                let truth = (eps_s > 0.0 || eps_p > 0.0)
                    .then(|| perturb_channels(&ch, eps_s, eps_p, splitmix64(seed ^ PERTURB_SALT)));
                sweep
                    .designs
                    .iter()
                    .map(|&design| {
                        let started = Instant::now();
                        let run = run_design(design, &cfg, &ch, opts);
                        let wall = if timing {
                            started.elapsed().as_secs_f64() * 1e3
                        } else {
                            0.0
                        };
                        make_record(
                            sweep,
                            value_idx,
                            trial_idx,
                            seed,
                            design,
                            &cfg,
                            truth.as_ref(),
                            hash,
                            run,
                            wall,
                        )
                    })
                    .collect()
            })
            .collect();
        trials.extend(rows.into_iter().flatten());
    }
    let aggregate = aggregate_records(&trials, &sweep.designs)?;
    Ok(SweepOutcome { trials, aggregate })
}

fn mean_ci(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, mean, mean);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = 1.96 * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

/// Groups records into (sweep value, design) cells, in value order then the
/// given design order, and averages over the feasible trials of each cell.
pub fn aggregate_records(
    trials: &[TrialRecord],
    designs: &[Design],
) -> Result<Vec<AggregateRow>, HarnessError> {
    if trials.is_empty() {
        return Err(HarnessError::Empty);
    }
    let mut value_order: Vec<usize> = Vec::new();
    for t in trials {
        if !value_order.contains(&t.value_idx) {
            value_order.push(t.value_idx);
        }
    }
    let mut out = Vec::new();
    for &vi in &value_order {
        for &design in designs {
            let cell: Vec<&TrialRecord> = trials
                .iter()
                .filter(|t| t.value_idx == vi && t.design == design)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let feasible: Vec<&&TrialRecord> = cell.iter().filter(|t| t.feasible).collect();
            let rates: Vec<f64> = feasible.iter().map(|t| t.sum_rate_bps).collect();
            let (mean, lo, hi) = mean_ci(&rates);
            let mean_over = |f: fn(&TrialRecord) -> f64| {
                if feasible.is_empty() {
                    f64::NAN
                } else {
                    feasible.iter().map(|t| f(t)).sum::<f64>() / feasible.len() as f64
                }
            };
            out.push(AggregateRow {
                sweep_variable: cell[0].sweep_variable,
                sweep_value: cell[0].sweep_value,
                design,
                n_feasible: feasible.len(),
                n_total: cell.len(),
                mean_sum_rate_bps: mean,
                ci95_low: lo,
                ci95_high: hi,
                mean_iterations: mean_over(|t| t.iterations as f64),
                mean_wall_time_ms: mean_over(|t| t.wall_time_ms),
            });
        }
    }
    Ok(out)
}

/// Solves one channel realization with the joint design and with selection
/// pinned to all antennas, returning both objective traces in bits.
pub fn run_convergence_trace(
    cfg: &ProblemConfig<f64>,
    seed: u64,
    mode: Mode,
    opts: &SolveOptions<f64>,
) -> Result<Vec<ConvergenceTrace>, HarnessError> {
    let ch = generate_channels(cfg, seed);
    let joint = solve_jbfas(cfg, &ch, mode, opts)?;
    let pinned = solve_jbfas_pinned_alpha(cfg, &ch, opts)?;
    let to_bits = |trace: &[f64]| trace.iter().map(|&r| nats_to_bits(r)).collect();
    let joint_design = match mode {
        Mode::Relaxed => Design::JbfasRelaxed,
        Mode::Improved => Design::JbfasImproved,
    };
    Ok(vec![
        ConvergenceTrace {
            design: joint_design,
            objective_bps: to_bits(&joint.trace),
        },
        ConvergenceTrace {
            design: Design::JbfasFixedAlpha,
            objective_bps: to_bits(&pinned.trace),
        },
    ])
}

/// Compares the rounded joint design against the exhaustive subset search on
/// `n_trials` independent channel draws.
pub fn run_oracle_check(
    cfg: &ProblemConfig<f64>,
    master_seed: u64,
    n_trials: usize,
    opts: &SolveOptions<f64>,
) -> Result<OracleCheckSummary, HarnessError> {
    let requested = (1usize << cfg.n_antennas.min(63)) - 1;
    if requested > MAX_ORACLE_SUBSETS {
        return Err(HarnessError::BadConfig(format!(
            "{} antennas need {requested} subset solves, above the cap of {MAX_ORACLE_SUBSETS}",
            cfg.n_antennas
        )));
    }
    if n_trials == 0 {
        return Err(HarnessError::BadConfig("n_trials must be at least 1".into()));
    }
    let rows: Vec<OracleCheckRow> = (0..n_trials)
        .into_par_iter()
        .map(|trial_idx| {
            let seed = trial_seed(master_seed, 0, trial_idx);
            let ch = generate_channels(cfg, seed);
            let jbfas_bps = match solve_jbfas(cfg, &ch, Mode::Improved, opts) {
                Ok(r) if r.status != ScaStatus::Infeasible => {
                    r.rounded.map(|x| nats_to_bits(x.sum_rate))
                }
                _ => None,
            };
            let oracle_bps = match exhaustive_selection_oracle(cfg, &ch, opts, MAX_ORACLE_SUBSETS)
            {
                Ok(r) => r.best.map(|b| nats_to_bits(b.sum_rate)),
                Err(_) => None,
            };
            OracleCheckRow {
                trial_idx,
                seed,
                jbfas_bps,
                oracle_bps,
            }
        })
        .collect();
    let mut n_comparable = 0;
    let mut n_within = 0;
    let mut n_exceed = 0;
    for row in &rows {
        let Some(oracle) = row.oracle_bps else {
            continue;
        };
        n_comparable += 1;
        if let Some(jb) = row.jbfas_bps {
            if jb >= ORACLE_MATCH_RATIO * oracle {
                n_within += 1;
            }
            if jb > oracle + ORACLE_EXCEED_TOL {
                n_exceed += 1;
            }
        }
    }
    Ok(OracleCheckSummary {
        rows,
        n_total: n_trials,
        n_comparable,
        n_within,
        n_exceed,
    })
}
