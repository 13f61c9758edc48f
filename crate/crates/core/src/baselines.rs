//! Reference designs the joint method is measured against: sum-power and
//! per-antenna-power beamforming without selection, zero-forcing with power
//! allocation, and an exhaustive search over antenna subsets.

use std::time::{Duration, Instant};

use num_complex::Complex;
use thiserror::Error;

use crate::conic::{solve, ConicProgram, LinExpr};
use crate::model::{
    inner, sum_rate, BeamformingMatrix, ChannelSet, ProblemConfig, SelectionState,
};
use crate::sca::subproblem::{BuildSpec, PowerModel};
use crate::sca::{
    run_sca, FeasibilityReport, ScaError, ScaStatus, SolveOptions, SolveResult,
};
use crate::surrogate::surrogate_coeffs;
use crate::{real, Real};

/// Relative pivot threshold below which the channel Gram matrix counts as
/// singular.
const PIVOT_TOL: f64 = 1e-10;
/// Largest residual cross-channel gain tolerated for zero-forcing directions.
const CROSS_TALK_TOL: f64 = 1e-8;

/// Identifies a reference design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Beamforming under one sum-power budget, all antennas active.
    Spc,
    /// Beamforming under equal per-antenna power caps, all antennas active.
    Papc,
    /// Zero-forcing directions with per-antenna-capped power allocation.
    ZfPapc,
    /// Best antenna subset found by exhaustive search.
    ExhaustiveJbfas,
}

impl BaselineKind {
    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::Spc => "SPC",
            BaselineKind::Papc => "PAPC",
            BaselineKind::ZfPapc => "ZF_PAPC",
            BaselineKind::ExhaustiveJbfas => "Oracle",
        }
    }
}

/// Failures specific to the reference designs.
#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("searching {requested} antenna subsets exceeds the budget of {budget}")]
    SubsetBudget { requested: usize, budget: usize },
    #[error(transparent)]
    Sca(#[from] ScaError),
}

/// Beamforming with every antenna active under the sum-power budget.
pub fn solve_spc<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveResult<T>, ScaError> {
    run_sca(
        cfg,
        ch,
        BuildSpec {
            power: PowerModel::SumPower,
            omega: None,
            feasibility: false,
            pin_alpha: false,
        },
        opts,
    )
}

/// Beamforming with every antenna active under equal per-antenna caps.
pub fn solve_papc<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveResult<T>, ScaError> {
    run_sca(
        cfg,
        ch,
        BuildSpec {
            power: PowerModel::PerAntenna,
            omega: None,
            feasibility: false,
            pin_alpha: false,
        },
        opts,
    )
}

/// Inverts a Hermitian positive-definite Gram matrix by Gauss-Jordan
/// elimination with partial pivoting.
fn invert_gram<T: Real>(mut a: Vec<Vec<Complex<T>>>) -> Result<Vec<Vec<Complex<T>>>, ScaError> {
    let k = a.len();
    let mut x: Vec<Vec<Complex<T>>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    Complex::new(if i == j { T::one() } else { T::zero() }, T::zero())
                })
                .collect()
        })
        .collect();
    let scale = a
        .iter()
        .flatten()
        .fold(T::zero(), |acc, c| acc.max(c.norm_sqr()))
        .sqrt();
    let tol = real::<T>(PIVOT_TOL) * scale;
    for col in 0..k {
        let (pivot_row, pivot_mag) = (col..k)
            .map(|r| (r, a[r][col].norm_sqr()))
            .fold((col, T::zero()), |best, cand| {
                if cand.1 > best.1 {
                    cand
                } else {
                    best
                }
            });
        if !(pivot_mag.sqrt() > tol) {
            return Err(ScaError::RankDeficient {
                detail: format!(
                    "pivot {:.3e} at column {col} under threshold {:.3e}",
                    pivot_mag.sqrt().to_f64().unwrap_or(f64::NAN),
                    tol.to_f64().unwrap_or(f64::NAN)
                ),
            });
        }
        a.swap(col, pivot_row);
        x.swap(col, pivot_row);
        let inv = Complex::new(T::one(), T::zero()) / a[col][col];
        for j in 0..k {
            a[col][j] = a[col][j] * inv;
            x[col][j] = x[col][j] * inv;
        }
        for r in 0..k {
            if r == col {
                continue;
            }
            let f = a[r][col];
            if f.norm_sqr() == T::zero() {
                continue;
            }
            for j in 0..k {
                let (ac, xc) = (a[col][j], x[col][j]);
                a[r][j] = a[r][j] - f * ac;
                x[r][j] = x[r][j] - f * xc;
            }
        }
    }
    Ok(x)
}

/// Unit-norm directions that null all cross-user gains, plus the real signal
/// gain each user keeps.
fn zero_forcing_directions<T: Real>(
    ch: &ChannelSet<T>,
) -> Result<(Vec<Vec<Complex<T>>>, Vec<T>), ScaError> {
    let k = ch.n_sus();
    if k > ch.n_antennas() {
        return Err(ScaError::RankDeficient {
            detail: format!(
                "{k} users cannot be zero-forced with {} antennas",
                ch.n_antennas()
            ),
        });
    }
    let gram: Vec<Vec<Complex<T>>> = (0..k)
        .map(|i| (0..k).map(|j| inner(ch.su(i), ch.su(j))).collect())
        .collect();
    let ginv = invert_gram(gram)?;
    let mut directions = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    for c in 0..k {
        let mut d = vec![Complex::new(T::zero(), T::zero()); ch.n_antennas()];
        for (j, row) in ginv.iter().enumerate() {
            for (n, hn) in ch.su(j).iter().enumerate() {
                d[n] = d[n] + *hn * row[c];
            }
        }
        let norm = d.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr()).sqrt();
        if !(norm > T::zero()) {
            return Err(ScaError::RankDeficient {
                detail: format!("zero-forcing direction {c} collapsed"),
            });
        }
        for x in d.iter_mut() {
            *x = *x / norm;
        }
        let own = inner(ch.su(c), &d);
        for j in 0..k {
            let talk = if j == c {
                own.im.abs()
            } else {
                inner(ch.su(j), &d).norm_sqr().sqrt()
            };
            let href = inner(ch.su(j), ch.su(j)).re.sqrt();
            if talk > real::<T>(CROSS_TALK_TOL) * href {
                return Err(ScaError::RankDeficient {
                    detail: format!(
                        "residual gain {:.3e} from direction {c} at user {j}",
                        talk.to_f64().unwrap_or(f64::NAN)
                    ),
                });
            }
        }
        directions.push(d);
        gains.push(own.re);
    }
    Ok((directions, gains))
}

fn beamformers_from_powers<T: Real>(
    directions: &[Vec<Complex<T>>],
    powers: &[T],
) -> BeamformingMatrix<T> {
    BeamformingMatrix::new(
        directions
            .iter()
            .zip(powers)
            .map(|(d, &p)| {
                let amp = p.max(T::zero()).sqrt();
                d.iter().map(|x| *x * amp).collect()
            })
            .collect(),
    )
    .expect("directions share the antenna count")
}

/// Zero-forcing beamforming: fixes the directions that null inter-user
/// interference, then allocates powers under the per-antenna caps, the
/// interference caps and the rate floors.
pub fn solve_zf_papc<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveResult<T>, ScaError> {
    cfg.validate()?;
    cfg.check_channels(ch)?;
    let (directions, gains) = zero_forcing_directions(ch)?;
    let nk = cfg.n_sus;
    let nt = cfg.n_antennas;
    // Cap rows are affine in the powers with nonnegative coefficients.
    let pu_coeff: Vec<Vec<T>> = (0..cfg.n_pus)
        .map(|m| {
            directions
                .iter()
                .map(|d| inner(ch.pu(m), d).norm_sqr())
                .collect()
        })
        .collect();
    let ant_coeff: Vec<Vec<T>> = (0..nt)
        .map(|n| directions.iter().map(|d| d[n].norm_sqr()).collect())
        .collect();
    let floors: Vec<T> = (0..nk)
        .map(|k| {
            cfg.noise_powers[k] * (cfg.rate_floors[k].exp() - T::one()) / (gains[k] * gains[k])
        })
        .collect();
    let ant_cap = cfg.power_budget / real::<T>(nt as f64);

    // Coefficients are nonnegative, so the floor point minimizes every cap
    // row; its worst slack decides feasibility exactly.
    let mut slack = T::infinity();
    for (m, row) in pu_coeff.iter().enumerate() {
        let used = row.iter().zip(&floors).fold(T::zero(), |a, (&c, &f)| a + c * f);
        slack = slack.min(cfg.interference_caps[m] - used);
    }
    for row in &ant_coeff {
        let used = row.iter().zip(&floors).fold(T::zero(), |a, (&c, &f)| a + c * f);
        slack = slack.min(ant_cap - used);
    }
    if slack < T::zero() {
        let w = beamformers_from_powers(&directions, &floors);
        return Ok(SolveResult {
            status: ScaStatus::Infeasible,
            sum_rate: sum_rate(ch, &w, cfg),
            per_user_rates: (0..nk)
                .map(|k| crate::model::achievable_rate(ch, &w, k, cfg.noise_powers[k]))
                .collect(),
            selection: None,
            w,
            trace: Vec::new(),
            surrogate_trace: Vec::new(),
            iterations: 0,
            subproblem_solves: 0,
            feasibility: Some(FeasibilityReport {
                margin: slack,
                iterations: 0,
            }),
            rounded: None,
        });
    }

    // Interior start: grow all powers uniformly while keeping 10% headroom.
    let headroom = real::<T>(0.9);
    let mut grow = T::infinity();
    for (m, row) in pu_coeff.iter().enumerate() {
        let used = row.iter().zip(&floors).fold(T::zero(), |a, (&c, &f)| a + c * f);
        let total: T = row.iter().fold(T::zero(), |a, &c| a + c);
        if total > T::zero() {
            grow = grow.min((headroom * cfg.interference_caps[m] - used) / total);
        }
    }
    for row in &ant_coeff {
        let used = row.iter().zip(&floors).fold(T::zero(), |a, (&c, &f)| a + c * f);
        let total: T = row.iter().fold(T::zero(), |a, &c| a + c);
        if total > T::zero() {
            grow = grow.min((headroom * ant_cap - used) / total);
        }
    }
    let grow = grow.max(T::zero());
    let power_floor = real::<T>(1e-9) * (T::one() + cfg.power_budget);
    let mut powers: Vec<T> = floors.iter().map(|&f| (f + grow).max(power_floor)).collect();

    let two = T::one() + T::one();
    let mut trace = vec![sum_rate(
        ch,
        &beamformers_from_powers(&directions, &powers),
        cfg,
    )];
    let mut surrogate_trace = Vec::new();
    let mut prev: Option<T> = None;
    let mut status = ScaStatus::IterationLimit;
    let mut iterations = 0usize;
    let mut solves = 0usize;
    for it in 1..=opts.max_outer_iter {
        let mut p = ConicProgram::maximize();
        let pb = p.add_block("p", nk);
        let gb = p.add_block("gamma", nk);
        for k in 0..nk {
            let psi = cfg.noise_powers[k] / (powers[k] * gains[k] * gains[k]);
            let coeffs = surrogate_coeffs(psi)?;
            p.objective_term(p.var(gb, k), -coeffs.b);
            p.objective_offset(coeffs.a);
        }
        for k in 0..nk {
            p.nonneg(
                format!("p_floor[{k}]"),
                LinExpr::term(p.var(pb, k), T::one()).plus_constant(-floors[k]),
            );
        }
        for (m, row) in pu_coeff.iter().enumerate() {
            let mut e = LinExpr::constant(cfg.interference_caps[m]);
            for (k, &c) in row.iter().enumerate() {
                e = e.plus(p.var(pb, k), -c);
            }
            p.nonneg(format!("pu_cap[{m}]"), e);
        }
        for (n, row) in ant_coeff.iter().enumerate() {
            let mut e = LinExpr::constant(ant_cap);
            for (k, &c) in row.iter().enumerate() {
                e = e.plus(p.var(pb, k), -c);
            }
            p.nonneg(format!("antenna_cap[{n}]"), e);
        }
        for k in 0..nk {
            let sigma_over_gain = (cfg.noise_powers[k]).sqrt() / gains[k];
            p.rsoc(
                format!("rate[{k}]"),
                LinExpr::term(p.var(gb, k), T::one()),
                LinExpr::term(p.var(pb, k), T::one()),
                vec![LinExpr::constant(two.sqrt() * sigma_over_gain)],
            );
        }
        let sol = solve(&p, &opts.conic)?;
        solves += 1;
        if !sol.usable(opts.conic_accept_residual) {
            return Err(ScaError::Conic {
                status: sol.status,
                iteration: it,
            });
        }
        for k in 0..nk {
            powers[k] = sol.value(p.var(pb, k)).max(floors[k]).max(power_floor);
        }
        iterations = it;
        trace.push(sum_rate(
            ch,
            &beamformers_from_powers(&directions, &powers),
            cfg,
        ));
        surrogate_trace.push(sol.objective);
        if let Some(f_prev) = prev {
            if (sol.objective - f_prev).abs() <= opts.rel_tol * T::one().max(f_prev.abs()) {
                status = ScaStatus::Converged;
                break;
            }
        }
        prev = Some(sol.objective);
    }
    let w = beamformers_from_powers(&directions, &powers);
    Ok(SolveResult {
        status,
        sum_rate: *trace.last().expect("trace holds the starting point"),
        per_user_rates: (0..nk)
            .map(|k| crate::model::achievable_rate(ch, &w, k, cfg.noise_powers[k]))
            .collect(),
        selection: None,
        w,
        trace,
        surrogate_trace,
        iterations,
        subproblem_solves: solves,
        feasibility: Some(FeasibilityReport {
            margin: slack,
            iterations: 0,
        }),
        rounded: None,
    })
}

/// Outcome of one antenna subset in the exhaustive search.
#[derive(Debug, Clone)]
pub struct SubsetOutcome<T: Real> {
    pub antennas: Vec<usize>,
    pub status: ScaStatus,
    /// Sum rate in nats; `None` when the subset admits no feasible design.
    pub sum_rate: Option<T>,
}

/// Result of the exhaustive search over nonempty antenna subsets.
#[derive(Debug, Clone)]
pub struct OracleResult<T: Real> {
    pub best: Option<SolveResult<T>>,
    pub best_subset: Option<Vec<usize>>,
    pub subsets_explored: usize,
    pub total_solve_time: Duration,
    pub per_subset: Vec<SubsetOutcome<T>>,
}

/// Solves the sum-power design on every nonempty antenna subset and keeps the
/// best. The subset count `2^N - 1` must not exceed `max_subsets`.
pub fn exhaustive_selection_oracle<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    opts: &SolveOptions<T>,
    max_subsets: usize,
) -> Result<OracleResult<T>, BaselineError> {
    cfg.validate().map_err(ScaError::from)?;
    cfg.check_channels(ch).map_err(ScaError::from)?;
    let nt = cfg.n_antennas;
    let requested = (1usize << nt) - 1;
    if requested > max_subsets {
        return Err(BaselineError::SubsetBudget {
            requested,
            budget: max_subsets,
        });
    }
    let started = Instant::now();
    let mut best: Option<SolveResult<T>> = None;
    let mut best_subset: Option<Vec<usize>> = None;
    let mut per_subset = Vec::with_capacity(requested);
    for bits in 1usize..=requested {
        let antennas: Vec<usize> = (0..nt).filter(|n| bits & (1 << n) != 0).collect();
        let outcome = match ch.restrict(&antennas) {
            Err(_) => SubsetOutcome {
                antennas: antennas.clone(),
                status: ScaStatus::Infeasible,
                sum_rate: None,
            },
            Ok(sub_ch) => {
                let mut sub_cfg = cfg.clone();
                sub_cfg.n_antennas = antennas.len();
                let res = solve_spc(&sub_cfg, &sub_ch, opts)?;
                let outcome = SubsetOutcome {
                    antennas: antennas.clone(),
                    status: res.status,
                    sum_rate: (res.status != ScaStatus::Infeasible).then_some(res.sum_rate),
                };
                if res.status != ScaStatus::Infeasible
                    && best.as_ref().map_or(true, |b| res.sum_rate > b.sum_rate)
                {
                    let mut scattered = res.clone();
                    let mut w = BeamformingMatrix::zeros(cfg.n_sus, nt);
                    for k in 0..cfg.n_sus {
                        for (slot, &n) in antennas.iter().enumerate() {
                            w.user_mut(k)[n] = res.w.user(k)[slot];
                        }
                    }
                    scattered.w = w;
                    best = Some(scattered);
                    best_subset = Some(antennas);
                }
                outcome
            }
        };
        per_subset.push(outcome);
    }
    Ok(OracleResult {
        best,
        best_subset,
        subsets_explored: requested,
        total_solve_time: started.elapsed(),
        per_subset,
    })
}

/// A rounded selection produced elsewhere, re-expressed as antenna indices so
/// it can be compared against the oracle's choice.
pub fn selection_to_subset<T: Real>(selection: &SelectionState<T>, threshold: f64) -> Vec<usize> {
    selection
        .alpha
        .iter()
        .enumerate()
        .filter_map(|(n, a)| (a.to_f64().unwrap_or(0.0) > threshold).then_some(n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_channels;
    use crate::sca::{solve_jbfas, Mode};

    fn unit_channel(entries: Vec<Vec<(f64, f64)>>) -> ChannelSet<f64> {
        ChannelSet::new(
            entries
                .into_iter()
                .map(|v| v.into_iter().map(|(r, i)| Complex::new(r, i)).collect())
                .collect(),
            vec![],
        )
        .unwrap()
    }

    fn cfg_no_pu(nt: usize, nk: usize, power: f64) -> ProblemConfig<f64> {
        ProblemConfig::new(nt, nk, 0, power, vec![], vec![0.0; nk], vec![1.0; nk]).unwrap()
    }

    #[test]
    fn spc_concentrates_power_on_the_live_antenna() {
        let ch = unit_channel(vec![vec![(1.0, 0.0), (0.0, 0.0)]]);
        let cfg = cfg_no_pu(2, 1, 10.0);
        let res = solve_spc(&cfg, &ch, &SolveOptions::default()).unwrap();
        assert!(
            (res.sum_rate - 11.0_f64.ln()).abs() < 1e-4,
            "rate {} vs ln 11",
            res.sum_rate
        );
    }

    #[test]
    fn papc_loses_half_the_power_on_a_dead_antenna() {
        let ch = unit_channel(vec![vec![(1.0, 0.0), (0.0, 0.0)]]);
        let cfg = cfg_no_pu(2, 1, 10.0);
        let res = solve_papc(&cfg, &ch, &SolveOptions::default()).unwrap();
        assert!(
            (res.sum_rate - 6.0_f64.ln()).abs() < 1e-4,
            "rate {} vs ln 6",
            res.sum_rate
        );
    }

    #[test]
    fn equal_gain_channel_makes_both_power_models_agree() {
        let ch = unit_channel(vec![vec![(1.0, 0.0), (1.0, 0.0)]]);
        let cfg = cfg_no_pu(2, 1, 10.0);
        let spc = solve_spc(&cfg, &ch, &SolveOptions::default()).unwrap();
        let papc = solve_papc(&cfg, &ch, &SolveOptions::default()).unwrap();
        assert!((spc.sum_rate - 21.0_f64.ln()).abs() < 1e-4, "{}", spc.sum_rate);
        assert!((papc.sum_rate - 21.0_f64.ln()).abs() < 1e-4, "{}", papc.sum_rate);
    }

    #[test]
    fn per_antenna_caps_never_beat_the_sum_power_budget() {
        let cfg = ProblemConfig::new(4, 2, 1, 10.0, vec![1.0], vec![0.1; 2], vec![1.0; 2])
            .unwrap();
        let ch = generate_channels(&cfg, 23);
        let spc = solve_spc(&cfg, &ch, &SolveOptions::default()).unwrap();
        let papc = solve_papc(&cfg, &ch, &SolveOptions::default()).unwrap();
        assert!(papc.sum_rate <= spc.sum_rate + 1e-5);
    }

    #[test]
    fn zero_forcing_on_orthonormal_channels_matches_sum_power() {
        let ch = unit_channel(vec![
            vec![(1.0, 0.0), (0.0, 0.0)],
            vec![(0.0, 0.0), (1.0, 0.0)],
        ]);
        let cfg = cfg_no_pu(2, 2, 10.0);
        let zf = solve_zf_papc(&cfg, &ch, &SolveOptions::default()).unwrap();
        let spc = solve_spc(&cfg, &ch, &SolveOptions::default()).unwrap();
        let expected = 2.0 * 6.0_f64.ln();
        assert!((zf.sum_rate - expected).abs() < 1e-3, "zf {}", zf.sum_rate);
        assert!((spc.sum_rate - expected).abs() < 1e-3, "spc {}", spc.sum_rate);
    }

    #[test]
    fn zero_forcing_respects_rate_floors() {
        let cfg = ProblemConfig::new(4, 2, 1, 10.0, vec![1.0], vec![0.5; 2], vec![1.0; 2])
            .unwrap();
        let ch = generate_channels(&cfg, 31);
        let res = solve_zf_papc(&cfg, &ch, &SolveOptions::default()).unwrap();
        assert_ne!(res.status, ScaStatus::Infeasible);
        for (k, r) in res.per_user_rates.iter().enumerate() {
            assert!(*r >= cfg.rate_floors[k] - 1e-6, "floor broken for user {k}");
        }
        for m in 0..cfg.n_pus {
            let i_m = crate::model::interference_at_pu(&ch, &res.w, m);
            assert!(i_m <= cfg.interference_caps[m] + 1e-7);
        }
        for n in 0..cfg.n_antennas {
            let p_n = crate::model::antenna_power(&res.w, n);
            assert!(p_n <= cfg.power_budget / 4.0 + 1e-7);
        }
    }

    #[test]
    fn zero_forcing_more_users_than_antennas_is_rank_deficient() {
        let cfg = cfg_no_pu(2, 3, 10.0);
        let ch = generate_channels(&cfg, 3);
        let err = solve_zf_papc(&cfg, &ch, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, ScaError::RankDeficient { .. }));
    }

    #[test]
    fn zero_forcing_duplicate_channels_are_rank_deficient() {
        let ch = unit_channel(vec![
            vec![(1.0, 0.0), (2.0, 0.0)],
            vec![(1.0, 0.0), (2.0, 0.0)],
        ]);
        let cfg = cfg_no_pu(2, 2, 10.0);
        let err = solve_zf_papc(&cfg, &ch, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, ScaError::RankDeficient { .. }));
    }

    #[test]
    fn unreachable_floors_make_zero_forcing_infeasible() {
        let ch = unit_channel(vec![
            vec![(1.0, 0.0), (0.0, 0.0)],
            vec![(0.0, 0.0), (1.0, 0.0)],
        ]);
        let cfg = ProblemConfig::new(2, 2, 0, 1.0, vec![], vec![20.0; 2], vec![1.0; 2]).unwrap();
        let res = solve_zf_papc(&cfg, &ch, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, ScaStatus::Infeasible);
        assert!(res.feasibility.unwrap().margin < 0.0);
    }

    #[test]
    fn oracle_finds_the_single_live_antenna() {
        let ch = unit_channel(vec![vec![(1.0, 0.0), (0.0, 0.0)]]);
        let cfg = cfg_no_pu(2, 1, 10.0);
        let res =
            exhaustive_selection_oracle(&cfg, &ch, &SolveOptions::default(), 255).unwrap();
        assert_eq!(res.subsets_explored, 3);
        let best = res.best.as_ref().unwrap();
        assert!((best.sum_rate - 11.0_f64.ln()).abs() < 1e-4);
        let subset = res.best_subset.as_ref().unwrap();
        assert!(subset.contains(&0));
        // The dead-antenna-only subset has a zero user channel.
        assert!(res
            .per_subset
            .iter()
            .any(|s| s.antennas == vec![1] && s.sum_rate.is_none()));
    }

    #[test]
    fn oracle_subset_budget_is_enforced() {
        let cfg = cfg_no_pu(2, 1, 10.0);
        let ch = generate_channels(&cfg, 1);
        let err =
            exhaustive_selection_oracle(&cfg, &ch, &SolveOptions::default(), 2).unwrap_err();
        assert!(matches!(err, BaselineError::SubsetBudget { requested: 3, budget: 2 }));
    }

    #[test]
    fn relaxed_selection_tracks_sum_power_without_primaries() {
        let cfg = cfg_no_pu(4, 2, 10.0);
        let ch = generate_channels(&cfg, 41);
        let opts = SolveOptions::default();
        let spc = solve_spc(&cfg, &ch, &opts).unwrap();
        let jb = solve_jbfas(&cfg, &ch, Mode::Relaxed, &opts).unwrap();
        // With no interference caps the relaxed selection has no reason to
        // switch antennas off; both climbs should land on the same design.
        assert!(
            (spc.sum_rate - jb.sum_rate).abs() < 1e-3,
            "spc {} vs jbfas {}",
            spc.sum_rate,
            jb.sum_rate
        );
    }
}
