//! Outer successive-approximation loop for the joint beamforming and antenna
//! selection design, plus the shared driver its power-model baselines reuse.
//!
//! Each iteration solves a cone program built around the current iterate; the
//! construction guarantees every subproblem optimum is feasible for the true
//! design and never decreases the true objective, so the loop climbs a lower
//! bound until the improvement stalls below a relative tolerance.

pub mod subproblem;

use thiserror::Error;

use crate::conic::{solve, ConeSolverOptions, ProgramError, SolveStatus};
use crate::model::{
    achievable_rate, antenna_power, inner, phase_align, sum_rate, BeamformingMatrix, ChannelSet,
    ModelError, ProblemConfig, SelectionState,
};
use crate::surrogate::SurrogateError;
use crate::{real, Real};

pub use subproblem::PowerModel;
use subproblem::{build, BuildSpec};

/// Signal level below which a beamformer counts as collapsed and is re-seeded
/// along its own channel direction.
const SIGNAL_GUARD: f64 = 1e-9;
/// Norm of a re-seeded beamformer relative to `sqrt(P / K)`.
const RESEED_SCALE: f64 = 1e-6;
/// Consecutive stalled feasibility iterations before giving up.
const FEASIBILITY_PATIENCE: usize = 5;
/// Residual deselected-antenna power below which rounding keeps the
/// beamformers instead of re-optimizing on the sub-array.
const SILENT_POWER: f64 = 1e-18;

/// Which selection coupling the joint design enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Unit-box selection variables coupled only through the power budget.
    Relaxed,
    /// Adds `alpha_n <= omega * rho_n`, starving deselected antennas.
    Improved,
}

/// Tunables of the outer loop.
#[derive(Debug, Clone)]
pub struct SolveOptions<T: Real> {
    /// Relative improvement of the subproblem optimum that counts as
    /// converged.
    pub rel_tol: T,
    pub max_outer_iter: usize,
    pub feasibility_max_iter: usize,
    /// Selection values above this round to one.
    pub rounding_threshold: T,
    /// Residual level at which an iteration-limited cone solve is still
    /// accepted as a usable step.
    pub conic_accept_residual: T,
    pub conic: ConeSolverOptions<T>,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: real(1e-4),
            max_outer_iter: 50,
            feasibility_max_iter: 30,
            rounding_threshold: real(0.5),
            conic_accept_residual: real(1e-6),
            conic: ConeSolverOptions::default(),
        }
    }
}

/// How the outer loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaStatus {
    Converged,
    IterationLimit,
    /// The feasibility phase could not reach nonnegative floor slack.
    Infeasible,
}

/// Outcome of the feasibility phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport<T: Real> {
    /// Final common slack over the rate floors; nonnegative on success.
    pub margin: T,
    /// Subproblems solved by the phase (zero when the start was feasible).
    pub iterations: usize,
}

/// Binary selection obtained by rounding, with beamformers re-optimized on
/// the selected sub-array when needed.
#[derive(Debug, Clone)]
pub struct RoundedSolution<T: Real> {
    pub mask: Vec<bool>,
    pub w: BeamformingMatrix<T>,
    pub sum_rate: T,
    pub per_user_rates: Vec<T>,
}

/// Result of a full outer run.
#[derive(Debug, Clone)]
pub struct SolveResult<T: Real> {
    pub status: ScaStatus,
    /// Final beamformers of the continuous iteration, phase aligned.
    pub w: BeamformingMatrix<T>,
    /// Final selection variables; `None` for designs without selection.
    pub selection: Option<SelectionState<T>>,
    /// Sum rate of `w` in nats.
    pub sum_rate: T,
    pub per_user_rates: Vec<T>,
    /// True sum rate after the feasibility phase and after every outer
    /// iteration.
    pub trace: Vec<T>,
    /// Subproblem optima, one per outer iteration.
    pub surrogate_trace: Vec<T>,
    pub iterations: usize,
    pub subproblem_solves: usize,
    pub feasibility: Option<FeasibilityReport<T>>,
    /// Rounded selection; `None` for designs without selection or when the
    /// rounded sub-array admits no feasible point.
    pub rounded: Option<RoundedSolution<T>>,
}

/// Failures of the outer loop.
#[derive(Debug, Error)]
pub enum ScaError {
    #[error("no feasible point: best floor slack {margin:.3e} after {iterations} feasibility iterations")]
    Infeasible { margin: f64, iterations: usize },
    #[error("cone solve returned {status:?} at outer iteration {iteration}")]
    Conic {
        status: SolveStatus,
        iteration: usize,
    },
    #[error("rank-deficient channel matrix: {detail}")]
    RankDeficient { detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// Expansion point of one outer iteration.
#[derive(Debug, Clone)]
pub struct ScaState<T: Real> {
    pub w: BeamformingMatrix<T>,
    pub selection: SelectionState<T>,
}

/// Builds the starting iterate: matched-filter directions scaled far enough
/// inside the power and interference budgets, all antennas fully selected,
/// and per-antenna power levels that exhaust the budget.
pub fn initialize_state<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    power: PowerModel,
) -> Result<ScaState<T>, ScaError> {
    cfg.validate()?;
    cfg.check_channels(ch)?;
    let headroom = real::<T>(0.9);
    let directions: Vec<Vec<num_complex::Complex<T>>> = (0..cfg.n_sus)
        .map(|k| {
            let h = ch.su(k);
            let norm = inner(h, h).re.sqrt();
            h.iter().map(|c| *c / norm).collect()
        })
        .collect();
    let mut c_sq = headroom * cfg.power_budget / real::<T>(cfg.n_sus as f64);
    for m in 0..cfg.n_pus {
        let g = ch.pu(m);
        let mut leak = T::zero();
        for d in &directions {
            leak += inner(g, d).norm_sqr();
        }
        if leak > T::zero() {
            c_sq = c_sq.min(headroom * cfg.interference_caps[m] / leak);
        }
    }
    if power == PowerModel::PerAntenna {
        let cap = cfg.power_budget / real::<T>(cfg.n_antennas as f64);
        let mut qmax = T::zero();
        for n in 0..cfg.n_antennas {
            let q = directions
                .iter()
                .fold(T::zero(), |acc, d| acc + d[n].norm_sqr());
            qmax = qmax.max(q);
        }
        if qmax > T::zero() {
            c_sq = c_sq.min(headroom * cap / qmax);
        }
    }
    let w = crate::surrogate::scaled_directions(&directions, c_sq.sqrt());
    let spare = (cfg.power_budget - w.total_power()) / real::<T>(cfg.n_antennas as f64);
    let rho = (0..cfg.n_antennas)
        .map(|n| antenna_power(&w, n) + spare)
        .collect();
    let selection = SelectionState::new(vec![T::one(); cfg.n_antennas], rho)?;
    Ok(ScaState { w, selection })
}

fn per_user_rates<T: Real>(
    ch: &ChannelSet<T>,
    w: &BeamformingMatrix<T>,
    cfg: &ProblemConfig<T>,
) -> Vec<T> {
    (0..cfg.n_sus)
        .map(|k| achievable_rate(ch, w, k, cfg.noise_powers[k]))
        .collect()
}

/// Re-seeds any beamformer whose signal part collapsed, so the next
/// linearization stays well posed.
fn guard_signals<T: Real>(cfg: &ProblemConfig<T>, ch: &ChannelSet<T>, state: &mut ScaState<T>) {
    let guard = real::<T>(SIGNAL_GUARD);
    let scale =
        real::<T>(RESEED_SCALE) * (cfg.power_budget / real::<T>(cfg.n_sus as f64)).sqrt();
    for k in 0..cfg.n_sus {
        let h = ch.su(k);
        if inner(h, state.w.user(k)).re < guard {
            let norm = inner(h, h).re.sqrt();
            for (c, hn) in state.w.user_mut(k).iter_mut().zip(h) {
                *c = *hn * (scale / norm);
            }
        }
    }
}

/// Smallest floor slack over the users at the current beamformers.
fn floor_slack<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    w: &BeamformingMatrix<T>,
) -> T {
    (0..cfg.n_sus).fold(T::infinity(), |acc, k| {
        acc.min(achievable_rate(ch, w, k, cfg.noise_powers[k]) - cfg.rate_floors[k])
    })
}

/// Drives the slack-maximization subproblem until the floors hold.
fn feasibility_phase<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    state: &mut ScaState<T>,
    opts: &SolveOptions<T>,
    base: &BuildSpec<T>,
    solves: &mut usize,
) -> Result<FeasibilityReport<T>, ScaError> {
    let slack0 = floor_slack(cfg, ch, &state.w);
    if slack0 >= T::zero() {
        return Ok(FeasibilityReport {
            margin: slack0,
            iterations: 0,
        });
    }
    let spec = BuildSpec {
        feasibility: true,
        ..*base
    };
    let mut best: Option<T> = None;
    let mut stalled = 0usize;
    let mut done = 0usize;
    for it in 1..=opts.feasibility_max_iter {
        done = it;
        let sub = build(cfg, ch, state, &spec)?;
        let sol = solve(&sub.program, &opts.conic)?;
        *solves += 1;
        if !sol.usable(opts.conic_accept_residual) {
            return Err(ScaError::Conic {
                status: sol.status,
                iteration: it,
            });
        }
        let margin = sub.margin_value(&sol).expect("phase-one program has a slack");
        state.w = phase_align(ch, &sub.beamformers(&sol));
        if let Some(sel) = sub.selection(&sol) {
            state.selection = sel;
        }
        guard_signals(cfg, ch, state);
        if margin >= T::zero() {
            return Ok(FeasibilityReport {
                margin,
                iterations: it,
            });
        }
        if let Some(b) = best {
            if margin - b <= opts.rel_tol * T::one().max(b.abs()) {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        best = Some(best.map_or(margin, |b| b.max(margin)));
        if stalled >= FEASIBILITY_PATIENCE {
            break;
        }
    }
    let margin = best.unwrap_or_else(T::nan);
    Err(ScaError::Infeasible {
        margin: margin.to_f64().unwrap_or(f64::NAN),
        iterations: done,
    })
}

fn infeasible_result<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    state: ScaState<T>,
    has_selection: bool,
    margin: T,
    iterations: usize,
    solves: usize,
) -> SolveResult<T> {
    SolveResult {
        status: ScaStatus::Infeasible,
        sum_rate: sum_rate(ch, &state.w, cfg),
        per_user_rates: per_user_rates(ch, &state.w, cfg),
        selection: has_selection.then(|| state.selection.clone()),
        w: state.w,
        trace: Vec::new(),
        surrogate_trace: Vec::new(),
        iterations: 0,
        subproblem_solves: solves,
        feasibility: Some(FeasibilityReport { margin, iterations }),
        rounded: None,
    }
}

/// Rounds the selection and, when rounding actually silences antennas that
/// still carry power, re-optimizes the beamformers on the selected sub-array
/// under the full budget. Returns `None` when no antenna survives or the
/// sub-array admits no feasible point.
fn round_and_polish<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    state: &ScaState<T>,
    opts: &SolveOptions<T>,
    solves: &mut usize,
) -> Result<Option<RoundedSolution<T>>, ScaError> {
    let mask: Vec<bool> = state
        .selection
        .alpha
        .iter()
        .map(|&a| a > opts.rounding_threshold)
        .collect();
    let selected: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter_map(|(n, &keep)| keep.then_some(n))
        .collect();
    if selected.is_empty() {
        return Ok(None);
    }
    let keep_current = |w: &BeamformingMatrix<T>| RoundedSolution {
        mask: mask.clone(),
        w: w.clone(),
        sum_rate: sum_rate(ch, w, cfg),
        per_user_rates: per_user_rates(ch, w, cfg),
    };
    if selected.len() == cfg.n_antennas {
        return Ok(Some(keep_current(&state.w)));
    }
    let leaked = (0..cfg.n_antennas)
        .filter(|n| !mask[*n])
        .fold(T::zero(), |acc, n| acc + antenna_power(&state.w, n));
    if leaked <= real(SILENT_POWER) {
        return Ok(Some(keep_current(&state.w)));
    }
    let mut sub_cfg = cfg.clone();
    sub_cfg.n_antennas = selected.len();
    let sub_ch = match ch.restrict(&selected) {
        Ok(c) => c,
        // A user channel can vanish on the sub-array; the rounded selection
        // then supports no feasible design.
        Err(_) => return Ok(None),
    };
    let inner = run_sca(
        &sub_cfg,
        &sub_ch,
        BuildSpec {
            power: PowerModel::SumPower,
            omega: None,
            feasibility: false,
            pin_alpha: false,
        },
        opts,
    )?;
    *solves += inner.subproblem_solves;
    if inner.status == ScaStatus::Infeasible {
        return Ok(None);
    }
    let mut w = BeamformingMatrix::zeros(cfg.n_sus, cfg.n_antennas);
    for k in 0..cfg.n_sus {
        for (slot, &n) in selected.iter().enumerate() {
            w.user_mut(k)[n] = inner.w.user(k)[slot];
        }
    }
    Ok(Some(RoundedSolution {
        mask,
        sum_rate: sum_rate(ch, &w, cfg),
        per_user_rates: per_user_rates(ch, &w, cfg),
        w,
    }))
}

/// Shared outer loop: feasibility phase, then surrogate maximization until
/// the improvement falls below `rel_tol`, then rounding for selection-aware
/// designs. Floor infeasibility is a reported outcome, not an error.
pub(crate) fn run_sca<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    base: BuildSpec<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveResult<T>, ScaError> {
    let has_selection = base.power == PowerModel::Selection;
    let mut state = initialize_state(cfg, ch, base.power)?;
    let mut solves = 0usize;
    let feas = match feasibility_phase(cfg, ch, &mut state, opts, &base, &mut solves) {
        Ok(report) => report,
        Err(ScaError::Infeasible { margin, iterations }) => {
            return Ok(infeasible_result(
                cfg,
                ch,
                state,
                has_selection,
                real(margin),
                iterations,
                solves,
            ));
        }
        Err(e) => return Err(e),
    };
    let mut trace = vec![sum_rate(ch, &state.w, cfg)];
    let mut surrogate_trace = Vec::new();
    let mut prev: Option<T> = None;
    let mut status = ScaStatus::IterationLimit;
    let mut iterations = 0usize;
    let step = BuildSpec {
        feasibility: false,
        ..base
    };
    for it in 1..=opts.max_outer_iter {
        let sub = build(cfg, ch, &state, &step)?;
        let sol = solve(&sub.program, &opts.conic)?;
        solves += 1;
        if !sol.usable(opts.conic_accept_residual) {
            return Err(ScaError::Conic {
                status: sol.status,
                iteration: it,
            });
        }
        let objective = sol.objective;
        state.w = phase_align(ch, &sub.beamformers(&sol));
        if let Some(sel) = sub.selection(&sol) {
            state.selection = sel;
        }
        guard_signals(cfg, ch, &mut state);
        iterations = it;
        trace.push(sum_rate(ch, &state.w, cfg));
        surrogate_trace.push(objective);
        if let Some(f_prev) = prev {
            if (objective - f_prev).abs() <= opts.rel_tol * T::one().max(f_prev.abs()) {
                status = ScaStatus::Converged;
                break;
            }
        }
        prev = Some(objective);
    }
    let rounded = if has_selection {
        round_and_polish(cfg, ch, &state, opts, &mut solves)?
    } else {
        None
    };
    Ok(SolveResult {
        status,
        sum_rate: *trace.last().expect("trace holds the phase-one endpoint"),
        per_user_rates: per_user_rates(ch, &state.w, cfg),
        selection: has_selection.then(|| state.selection.clone()),
        w: state.w,
        trace,
        surrogate_trace,
        iterations,
        subproblem_solves: solves,
        feasibility: Some(feas),
        rounded,
    })
}

/// Joint beamforming and antenna selection via the continuous relaxation,
/// followed by rounding to a binary selection.
pub fn solve_jbfas<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    mode: Mode,
    opts: &SolveOptions<T>,
) -> Result<SolveResult<T>, ScaError> {
    let omega = match mode {
        Mode::Relaxed => None,
        Mode::Improved => Some(cfg.omega),
    };
    run_sca(
        cfg,
        ch,
        BuildSpec {
            power: PowerModel::Selection,
            omega,
            feasibility: false,
            pin_alpha: false,
        },
        opts,
    )
}

/// Same machinery with every selection variable pinned to one: all antennas
/// stay active and only the beamformers are optimized.
pub fn solve_jbfas_pinned_alpha<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveResult<T>, ScaError> {
    run_sca(
        cfg,
        ch,
        BuildSpec {
            power: PowerModel::Selection,
            omega: None,
            feasibility: false,
            pin_alpha: true,
        },
        opts,
    )
}

/// Public entry to the feasibility phase of the relaxed design; mutates
/// `state` toward nonnegative floor slack and reports the slack reached.
pub fn find_feasible_point<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    state: &mut ScaState<T>,
    opts: &SolveOptions<T>,
) -> Result<FeasibilityReport<T>, ScaError> {
    let mut solves = 0usize;
    feasibility_phase(
        cfg,
        ch,
        state,
        opts,
        &BuildSpec {
            power: PowerModel::Selection,
            omega: None,
            feasibility: false,
            pin_alpha: false,
        },
        &mut solves,
    )
}
