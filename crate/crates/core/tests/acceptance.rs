//! Acceptance suite: ten end-to-end checks, each printing one verdict line
//! (`[PASS]`/`[FAIL]`, plus `[FLAG]` for soft findings) with its pinned
//! operating point and tolerances. The lines are written straight to stdout
//! so they appear even when the harness captures test output.

use jbfas::baselines::{exhaustive_selection_oracle, solve_papc, solve_spc, solve_zf_papc};
use jbfas::conic::{certificate, solve, SolveStatus};
use jbfas::harness::output::{aggregate_csv, trials_csv};
use jbfas::harness::{run_sweep, trial_seed, BaseConfig, Design, SweepConfig, SweepValue, SweepVariable};
use jbfas::model::{
    achievable_rate, generate_channels, interference_at_pu, perturb_channels, phase_align,
    sum_rate,
};
use jbfas::sca::{solve_jbfas, Mode, ScaError, ScaStatus};
use jbfas::surrogate::{chi_bound, coupling_ratio, surrogate_rate_at};
use jbfas::{
    bits_to_nats, db_to_linear, nats_to_bits, BeamformingMatrix, ChannelSet, ConeSolverOptions,
    ConicProgram, ProblemConfig, SolveOptions, SolveResult,
};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn emit(line: &str) {
    use std::io::Write as _;
    let mut out = std::io::stdout();
    writeln!(out, "{line}").expect("stdout is writable");
}

fn report(criterion: usize, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    emit(&format!("[{tag}] criterion {criterion}: {detail}"));
}

fn flag(criterion: usize, detail: &str) {
    emit(&format!("[FLAG] criterion {criterion}: {detail}"));
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Six antennas serving three users beside three primaries: caps 1 dB,
/// floors 0.5 bps/Hz, unit noise. The reference operating point for the
/// convergence, ordering, and selection checks.
fn reference_config(p_bs_db: f64) -> ProblemConfig {
    ProblemConfig::new(
        6,
        3,
        3,
        db_to_linear(p_bs_db),
        vec![db_to_linear(1.0); 3],
        vec![bits_to_nats(0.5); 3],
        vec![1.0; 3],
    )
    .unwrap()
}

fn feasible_rate_bps(res: Result<SolveResult, ScaError>) -> Option<f64> {
    match res {
        Ok(r) if r.status != ScaStatus::Infeasible => Some(nats_to_bits(r.sum_rate)),
        _ => None,
    }
}

fn random_aligned_point(cfg: &ProblemConfig, seed: u64) -> (ChannelSet, BeamformingMatrix) {
    let ch = generate_channels(cfg, 10_000 + seed);
    let raw = generate_channels(cfg, 20_000 + seed);
    let w = BeamformingMatrix::new((0..cfg.n_sus).map(|k| raw.su(k).to_vec()).collect()).unwrap();
    let w = phase_align(&ch, &w);
    (ch, w)
}

fn bump(w: &mut BeamformingMatrix, k: usize, n: usize, imag: bool, h: f64) {
    let c = &mut w.user_mut(k)[n];
    if imag {
        *c = Complex::new(c.re, c.im + h);
    } else {
        *c = Complex::new(c.re + h, c.im);
    }
}

fn central_gradient(f: &dyn Fn(&BeamformingMatrix) -> f64, w0: &BeamformingMatrix) -> Vec<f64> {
    let h = 1e-5;
    let mut g = Vec::with_capacity(2 * w0.n_users() * w0.n_antennas());
    for k in 0..w0.n_users() {
        for n in 0..w0.n_antennas() {
            for imag in [false, true] {
                let mut wp = w0.clone();
                let mut wm = w0.clone();
                bump(&mut wp, k, n, imag, h);
                bump(&mut wm, k, n, imag, -h);
                g.push((f(&wp) - f(&wm)) / (2.0 * h));
            }
        }
    }
    g
}

#[test]
fn criterion_01_rate_surrogate_is_tight_dominated_and_tangent() {
    let cfg = ProblemConfig::new(6, 3, 0, 10.0, vec![], vec![0.0; 3], vec![1.0; 3]).unwrap();
    let mut worst_tight = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut samples = 0usize;
    let mut worst_grad = 0.0f64;
    for seed in 0..200u64 {
        let (ch, w_prev) = random_aligned_point(&cfg, seed);
        for k in 0..cfg.n_sus {
            let noise = cfg.noise_powers[k];
            let exact = achievable_rate(&ch, &w_prev, k, noise);
            let tight = surrogate_rate_at(&ch, &w_prev, &w_prev, k, noise).unwrap();
            worst_tight = worst_tight.max((tight - exact).abs() / exact.abs().max(1.0));

            for c in 0..2u64 {
                let draw = generate_channels(&cfg, 40_000 + seed * 6 + k as u64 * 2 + c);
                let mut wc = w_prev.clone();
                for j in 0..cfg.n_sus {
                    for (dst, src) in wc.user_mut(j).iter_mut().zip(draw.su(j)) {
                        *dst += src * 0.1;
                    }
                }
                if let Ok(s) = surrogate_rate_at(&ch, &w_prev, &wc, k, noise) {
                    let r = achievable_rate(&ch, &wc, k, noise);
                    worst_excess = worst_excess.max(s - r);
                    samples += 1;
                }
            }

            let gs = central_gradient(
                &|w| surrogate_rate_at(&ch, &w_prev, w, k, noise).unwrap(),
                &w_prev,
            );
            let gt = central_gradient(&|w| achievable_rate(&ch, w, k, noise), &w_prev);
            let scale = gt.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-12);
            let mismatch = gs
                .iter()
                .zip(&gt)
                .fold(0.0f64, |a, (s, t)| a.max((s - t).abs()));
            worst_grad = worst_grad.max(mismatch / scale);
        }
    }
    let pass = worst_tight <= 1e-10 && worst_excess <= 1e-10 && worst_grad <= 1e-4 && samples >= 1000;
    let detail = format!(
        "200 aligned points (6 antennas, 3 users): tightness {worst_tight:.2e} rel (tol 1e-10), \
         surrogate excess {worst_excess:.2e} over {samples} trust-region samples (tol 1e-10, need >= 1000), \
         gradient mismatch {worst_grad:.2e} rel vs central differences (tol 1e-4)"
    );
    report(1, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_02_bilinear_power_bound_dominates_and_is_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_violation = f64::NEG_INFINITY;
    let mut worst_tight = 0.0f64;
    for _ in 0..20 {
        let a0: f64 = rng.gen_range(0.02..1.0);
        let p0: f64 = rng.gen_range(0.05..40.0);
        let r = coupling_ratio(a0, p0);
        worst_tight = worst_tight.max((chi_bound(a0, p0, r) - a0 * p0).abs());
        for i in 0..20 {
            for j in 0..20 {
                let a = (i + 1) as f64 / 20.0;
                let p = (j + 1) as f64 * 2.5;
                worst_violation = worst_violation.max(a * p - chi_bound(a, p, r));
            }
        }
    }
    let pass = worst_violation <= 1e-12 && worst_tight <= 1e-12;
    let detail = format!(
        "20 random expansion points x 20x20 positive grid: worst product excess {worst_violation:.2e} \
         (tol 1e-12), worst tightness gap at expansion {worst_tight:.2e} (tol 1e-12)"
    );
    report(2, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_03_outer_loop_is_monotone_convergent_and_feasible() {
    let cfg = reference_config(20.0);
    let opts = SolveOptions::default();
    let rel_tol = opts.rel_tol;
    let runs: Vec<(Mode, u64, Result<SolveResult, ScaError>)> = [Mode::Improved, Mode::Relaxed]
        .into_iter()
        .flat_map(|mode| (0..50u64).map(move |s| (mode, s)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(mode, s)| {
            let ch = generate_channels(&cfg, 3_000 + s);
            (mode, s, solve_jbfas(&cfg, &ch, mode, &opts))
        })
        .collect();

    let mut n_infeasible = 0usize;
    let mut n_errors = 0usize;
    let mut worst_drop = f64::NEG_INFINITY;
    let mut converged = [0usize; 2];
    let mut worst_violation = 0.0f64;
    for (mode, s, res) in &runs {
        let idx = usize::from(*mode == Mode::Relaxed);
        match res {
            Err(_) => n_errors += 1,
            Ok(r) if r.status == ScaStatus::Infeasible => n_infeasible += 1,
            Ok(r) => {
                let slack = 10.0 * rel_tol * r.trace.iter().fold(1.0f64, |a, x| a.max(x.abs()));
                for w in r.trace.windows(2) {
                    worst_drop = worst_drop.max(w[0] - w[1] - slack);
                }
                if r.status == ScaStatus::Converged && r.iterations <= 20 {
                    converged[idx] += 1;
                }
                let ch = generate_channels(&cfg, 3_000 + s);
                for k in 0..cfg.n_sus {
                    let rate = achievable_rate(&ch, &r.w, k, cfg.noise_powers[k]);
                    worst_violation = worst_violation
                        .max((cfg.rate_floors[k] - rate) / cfg.rate_floors[k].max(1.0));
                }
                for m in 0..cfg.n_pus {
                    let i = interference_at_pu(&ch, &r.w, m);
                    worst_violation = worst_violation
                        .max((i - cfg.interference_caps[m]) / cfg.interference_caps[m].max(1.0));
                }
                worst_violation = worst_violation
                    .max((r.w.total_power() - cfg.power_budget) / cfg.power_budget.max(1.0));
            }
        }
    }
    let pass = n_errors == 0
        && n_infeasible == 0
        && worst_drop <= 0.0
        && converged[0] >= 45
        && converged[1] >= 45
        && worst_violation <= 1e-6;
    let detail = format!(
        "50 seeds x 2 modes at 6/3/3, caps 1 dB, floors 0.5 bps/Hz, budget 20 dB: \
         {n_infeasible} infeasible, {n_errors} errors; worst trace drop beyond 10x tol {worst_drop:.2e}; \
         converged within 20 iterations {}/50 improved, {}/50 relaxed (need >= 45); \
         worst terminal constraint violation {worst_violation:.2e} rel (tol 1e-6)",
        converged[0], converged[1]
    );
    report(3, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_04_single_user_optima_match_closed_forms() {
    let opts = SolveOptions::default();
    let h = vec![vec![Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)]];
    let ch = ChannelSet::new(h, vec![]).unwrap();
    let cfg = ProblemConfig::new(2, 1, 0, 10.0, vec![], vec![0.0], vec![1.0]).unwrap();

    let jb = solve_jbfas(&cfg, &ch, Mode::Improved, &opts).unwrap().sum_rate;
    let spc = solve_spc(&cfg, &ch, &opts).unwrap().sum_rate;
    let papc = solve_papc(&cfg, &ch, &opts).unwrap().sum_rate;

    let e_jb = (jb - 11f64.ln()).abs();
    let e_spc = (spc - 11f64.ln()).abs();
    let e_papc = (papc - 6f64.ln()).abs();
    let pass = e_jb <= 1e-3 && e_spc <= 1e-3 && e_papc <= 1e-3;
    let detail = format!(
        "single user, gain on one of two antennas, budget 10: joint selection {jb:.6} vs ln 11 \
         (err {e_jb:.2e}), sum-power {spc:.6} vs ln 11 (err {e_spc:.2e}), per-antenna {papc:.6} vs \
         ln 6 (err {e_papc:.2e}); tol 1e-3 nats"
    );
    report(4, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_05_rounded_selection_tracks_the_exhaustive_search() {
    let cfg = ProblemConfig::new(
        4,
        2,
        1,
        db_to_linear(10.0),
        vec![db_to_linear(1.0)],
        vec![bits_to_nats(0.5); 2],
        vec![1.0; 2],
    )
    .unwrap();
    let opts = SolveOptions::default();
    let outcomes: Vec<(Option<f64>, Option<f64>)> = (0..50u64)
        .into_par_iter()
        .map(|s| {
            let ch = generate_channels(&cfg, 5_000 + s);
            let jb = solve_jbfas(&cfg, &ch, Mode::Improved, &opts)
                .ok()
                .and_then(|r| r.rounded.map(|rs| rs.sum_rate));
            let oracle = exhaustive_selection_oracle(&cfg, &ch, &opts, 255)
                .ok()
                .and_then(|o| o.best.map(|b| b.sum_rate));
            (jb, oracle)
        })
        .collect();

    let mut n_comparable = 0usize;
    let mut n_within = 0usize;
    let mut n_exceed = 0usize;
    for (jb, oracle) in &outcomes {
        if let (Some(j), Some(o)) = (jb, oracle) {
            n_comparable += 1;
            if *j >= 0.98 * o {
                n_within += 1;
            }
            if *j > o + 1e-4 * o.max(1.0) {
                n_exceed += 1;
            }
        }
    }
    let within_ok = 10 * n_within >= 9 * n_comparable && n_comparable > 0;
    let exceed_ok = 20 * n_exceed <= n_comparable;
    if !exceed_ok {
        flag(
            5,
            &format!(
                "rounded joint design beat the subset search by more than 1e-4 rel in \
                 {n_exceed}/{n_comparable} trials (> 5%): the per-subset solves are local, so the \
                 joint path can land on better stationary points"
            ),
        );
    }
    let detail = format!(
        "4 antennas, 2 users, 1 primary, budget 10 dB, 50 seeds: rounded within 2% of the \
         exhaustive search in {n_within}/{n_comparable} comparable trials (need >= 90%), exceeded \
         it beyond 1e-4 rel in {n_exceed} (soft cap 5%, flagged not failed)"
    );
    report(5, within_ok, &detail);
    assert!(within_ok, "{detail}");
}

fn paired_margin(diffs: &[f64]) -> (f64, f64) {
    let (mean, sd) = mean_sd(diffs);
    let half = 1.645 * sd / (diffs.len() as f64).sqrt();
    (mean, mean + half)
}

#[test]
fn criterion_06_design_ordering_holds_and_the_selection_gap_grows_with_power() {
    let opts = SolveOptions::default();
    let cfg20 = reference_config(20.0);
    let all20: Vec<[Option<f64>; 5]> = (0..100u64)
        .into_par_iter()
        .map(|t| {
            let ch = generate_channels(&cfg20, trial_seed(6_000, 1, t as usize));
            [
                feasible_rate_bps(solve_jbfas(&cfg20, &ch, Mode::Improved, &opts)),
                feasible_rate_bps(solve_jbfas(&cfg20, &ch, Mode::Relaxed, &opts)),
                feasible_rate_bps(solve_spc(&cfg20, &ch, &opts)),
                feasible_rate_bps(solve_papc(&cfg20, &ch, &opts)),
                feasible_rate_bps(solve_zf_papc(&cfg20, &ch, &opts)),
            ]
        })
        .collect();

    // Designs whose exact optima coincide (selection relaxed to the full
    // array equals the sum-power design) differ only by a deterministic
    // offset at the solver's objective resolution, rel_tol 1e-4 on rates
    // near 15 bps/Hz, so the margin comparison gets that much slack. Real
    // ordering gaps in this family are three orders of magnitude larger.
    let tie_tol = 1e-3;
    let names = ["improved>=relaxed", "relaxed>=SPC", "SPC>=PAPC", "PAPC>=ZF"];
    let mut ordering_ok = true;
    let mut ordering_detail = String::new();
    for (i, name) in names.iter().enumerate() {
        let diffs: Vec<f64> = all20
            .iter()
            .filter_map(|r| match (r[i], r[i + 1]) {
                (Some(a), Some(b)) => Some(a - b),
                _ => None,
            })
            .collect();
        let (mean, upper) = paired_margin(&diffs);
        ordering_ok &= upper >= -tie_tol && !diffs.is_empty();
        ordering_detail.push_str(&format!(
            "{name} mean {mean:+.6} (95% one-sided margin {upper:+.6}, n={}); ",
            diffs.len()
        ));
    }

    let gap_at = |p_db: f64, value_idx: usize| -> (f64, usize) {
        let cfg = reference_config(p_db);
        let diffs: Vec<f64> = (0..100u64)
            .into_par_iter()
            .filter_map(|t| {
                let ch = generate_channels(&cfg, trial_seed(6_000, value_idx, t as usize));
                let jb = feasible_rate_bps(solve_jbfas(&cfg, &ch, Mode::Improved, &opts))?;
                let spc = feasible_rate_bps(solve_spc(&cfg, &ch, &opts))?;
                Some(jb - spc)
            })
            .collect();
        let (mean, _) = mean_sd(&diffs);
        (mean, diffs.len())
    };
    let (gap10, n10) = gap_at(10.0, 0);
    let (gap30, n30) = gap_at(30.0, 2);
    let gap_ok = gap30 > gap10;

    let pass = ordering_ok && gap_ok;
    let detail = format!(
        "100 paired trials at 6/3/3, caps 1 dB, floors 0.5 bps/Hz, budget 20 dB, tie tolerance \
         {tie_tol} bps/Hz: {ordering_detail}joint-vs-sum-power gap {gap30:+.6} bps at 30 dB \
         (n={n30}) vs {gap10:+.6} bps at 10 dB (n={n10}), need strictly larger"
    );
    report(6, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_07_selection_variables_end_near_binary() {
    let cfg = reference_config(20.0);
    let opts = SolveOptions::default();
    let fractions: Vec<f64> = (0..100u64)
        .into_par_iter()
        .filter_map(|t| {
            let ch = generate_channels(&cfg, trial_seed(7_000, 0, t as usize));
            let r = solve_jbfas(&cfg, &ch, Mode::Improved, &opts).ok()?;
            if r.status == ScaStatus::Infeasible {
                return None;
            }
            let sel = r.selection?;
            let near = sel
                .alpha
                .iter()
                .filter(|a| a.min(1.0 - **a).abs() <= 0.01)
                .count();
            Some(near as f64 / sel.alpha.len() as f64)
        })
        .collect();
    let (mean_fraction, _) = mean_sd(&fractions);
    let pass = fractions.len() == 100 && mean_fraction >= 0.95;
    let detail = format!(
        "improved mode at 6/3/3, budget 20 dB, {} feasible trials of 100: {:.1}% of selection \
         entries within 0.01 of 0 or 1 before rounding (need >= 95%)",
        fractions.len(),
        100.0 * mean_fraction
    );
    report(7, pass, &detail);
    assert!(pass, "{detail}");
}

type UnitProblem = (&'static str, ConicProgram, f64);

fn unit_problems() -> Vec<UnitProblem> {
    use jbfas::conic::LinExpr;
    let mut out = Vec::new();

    let mut p = ConicProgram::maximize();
    let b = p.add_block("x", 1);
    let x = p.var(b, 0);
    p.objective_term(x, 1.0);
    p.nonneg("cap", LinExpr::constant(3.0).plus(x, -1.0));
    p.nonneg("sign", LinExpr::term(x, 1.0));
    out.push(("interval bound", p, 3.0));

    let mut p = ConicProgram::minimize();
    let b = p.add_block("xy", 2);
    let (x, y) = (p.var(b, 0), p.var(b, 1));
    p.objective_term(x, 1.0);
    p.objective_term(y, 1.0);
    p.nonneg("floor", LinExpr::term(x, 1.0).plus(y, 1.0).plus_constant(-1.0));
    p.eq("tie", LinExpr::term(x, 1.0).plus(y, -1.0));
    out.push(("equality-tied pair", p, 1.0));

    let mut p = ConicProgram::minimize();
    let b = p.add_block("xy", 2);
    let (x, y) = (p.var(b, 0), p.var(b, 1));
    p.objective_term(x, 1.0);
    p.objective_term(y, 1.0);
    p.soc(
        "ball",
        LinExpr::constant(1.0),
        vec![LinExpr::term(x, 1.0), LinExpr::term(y, 1.0)],
    );
    out.push(("unit-ball support", p, -std::f64::consts::SQRT_2));

    let mut p = ConicProgram::minimize();
    let b = p.add_block("txy", 3);
    let (t, x, y) = (p.var(b, 0), p.var(b, 1), p.var(b, 2));
    p.objective_term(t, 1.0);
    p.soc(
        "dist",
        LinExpr::term(t, 1.0),
        vec![LinExpr::term(x, 1.0), LinExpr::term(y, 1.0)],
    );
    p.eq("px", LinExpr::term(x, 1.0).plus_constant(-3.0));
    p.eq("py", LinExpr::term(y, 1.0).plus_constant(-4.0));
    out.push(("norm of a fixed point", p, 5.0));

    let mut p = ConicProgram::minimize();
    let b = p.add_block("stx", 3);
    let (s, t, x) = (p.var(b, 0), p.var(b, 1), p.var(b, 2));
    p.objective_term(s, 1.0);
    p.objective_term(t, 1.0);
    p.rsoc(
        "hyperbola",
        LinExpr::term(s, 1.0),
        LinExpr::term(t, 1.0),
        vec![LinExpr::term(x, 1.0)],
    );
    p.eq("pin", LinExpr::term(x, 1.0).plus_constant(-2.0));
    out.push(("rotated-cone hyperbola", p, 2.0 * std::f64::consts::SQRT_2));

    let mut p = ConicProgram::maximize();
    let b = p.add_block("xy", 2);
    let (x, y) = (p.var(b, 0), p.var(b, 1));
    p.objective_term(x, 1.0);
    p.objective_term(y, 1.0);
    p.soc(
        "disc",
        LinExpr::constant(2.0),
        vec![LinExpr::term(x, 1.0), LinExpr::term(y, 1.0)],
    );
    p.nonneg("wall", LinExpr::constant(1.0).plus(x, -1.0));
    out.push(("capped disc", p, 1.0 + 3f64.sqrt()));

    out
}

#[test]
fn criterion_08_cone_solver_certifies_optima_and_detects_infeasibility() {
    use jbfas::conic::LinExpr;
    let opts = ConeSolverOptions {
        tol: 1e-9,
        max_iter: 200,
    };
    let mut worst_residual = 0.0f64;
    let mut worst_obj_err = 0.0f64;
    let mut all_optimal = true;
    let mut failing = String::new();
    for (name, prog, expected) in unit_problems() {
        let sol = solve(&prog, &opts).unwrap();
        let cert = certificate(&prog, &sol).unwrap();
        worst_residual = worst_residual.max(cert.worst());
        worst_obj_err = worst_obj_err.max((sol.objective - expected).abs());
        if sol.status != SolveStatus::Optimal {
            all_optimal = false;
            failing.push_str(&format!("{name} -> {:?}; ", sol.status));
        }
    }

    let mut p = ConicProgram::minimize();
    let b = p.add_block("x", 1);
    let x = p.var(b, 0);
    p.objective_term(x, 1.0);
    p.nonneg("atleast", LinExpr::term(x, 1.0).plus_constant(-1.0));
    p.nonneg("atmost", LinExpr::term(x, -1.0));
    let lp_status = solve(&p, &opts).unwrap().status;

    let mut p = ConicProgram::minimize();
    let b = p.add_block("x", 1);
    let x = p.var(b, 0);
    p.objective_term(x, 1.0);
    p.soc("neg radius", LinExpr::constant(-1.0), vec![LinExpr::term(x, 1.0)]);
    let soc_status = solve(&p, &opts).unwrap().status;

    let infeasible_ok =
        lp_status == SolveStatus::PrimalInfeasible && soc_status == SolveStatus::PrimalInfeasible;
    let pass = all_optimal && worst_residual <= 1e-8 && worst_obj_err <= 1e-6 && infeasible_ok;
    let detail = format!(
        "6 bundled unit problems (linear, second-order, rotated cones): all Optimal ({}), worst \
         independently recomputed residual {worst_residual:.2e} (tol 1e-8), worst objective error \
         {worst_obj_err:.2e} (tol 1e-6); hand-built empty programs -> {lp_status:?}/{soc_status:?} \
         (need PrimalInfeasible) {failing}",
        all_optimal
    );
    report(8, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_09_rates_suffer_more_from_user_csi_error_than_primary_csi_error() {
    let cfg = ProblemConfig::new(
        8,
        2,
        2,
        db_to_linear(30.0),
        vec![db_to_linear(2.0); 2],
        vec![bits_to_nats(1.0); 2],
        vec![1.0; 2],
    )
    .unwrap();
    let opts = SolveOptions::default();
    let eps = 0.04;
    let degradations: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .filter_map(|t| {
            let seed = trial_seed(9_000, 0, t as usize);
            let ch = generate_channels(&cfg, seed);
            let r = solve_jbfas(&cfg, &ch, Mode::Improved, &opts).ok()?;
            if r.status == ScaStatus::Infeasible {
                return None;
            }
            let nominal = nats_to_bits(sum_rate(&ch, &r.w, &cfg));
            let truth_s = perturb_channels(&ch, eps, 0.0, seed ^ 0x5eed_0001);
            let truth_p = perturb_channels(&ch, 0.0, eps, seed ^ 0x5eed_0002);
            let deg_s = nominal - nats_to_bits(sum_rate(&truth_s, &r.w, &cfg));
            let deg_p = nominal - nats_to_bits(sum_rate(&truth_p, &r.w, &cfg));
            Some((deg_s, deg_p))
        })
        .collect();
    let n = degradations.len();
    let mean_s = degradations.iter().map(|d| d.0).sum::<f64>() / n as f64;
    let mean_p = degradations.iter().map(|d| d.1).sum::<f64>() / n as f64;
    let pass = n >= 45 && mean_s > mean_p;
    let detail = format!(
        "8/2/2 at budget 30 dB, caps 2 dB, floors 1 bps/Hz, {n} feasible of 50 paired trials: \
         mean rate loss {mean_s:.4} bps under 4% user-channel error vs {mean_p:.4} bps under 4% \
         primary-channel error, need strictly larger"
    );
    report(9, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_10_sweeps_with_one_seed_are_byte_identical() {
    let sweep = SweepConfig {
        base: BaseConfig {
            n_antennas: 6,
            n_sus: 3,
            n_pus: 3,
            power_budget: db_to_linear(20.0),
            interference_caps: vec![db_to_linear(1.0); 3],
            rate_floors: vec![bits_to_nats(0.5); 3],
            noise_powers: vec![1.0; 3],
            omega: 100.0,
        },
        sweep_variable: SweepVariable::PBsDb,
        sweep_values: vec![SweepValue::Scalar(10.0), SweepValue::Scalar(20.0)],
        n_trials: 3,
        seed: 77,
        designs: vec![Design::JbfasImproved, Design::Spc, Design::Papc],
        output_dir: "unused".into(),
    };
    let opts = SolveOptions::default();
    let first = run_sweep(&sweep, &opts, false).unwrap();
    let second = run_sweep(&sweep, &opts, false).unwrap();
    let trials_equal = trials_csv(&first.trials) == trials_csv(&second.trials);
    let aggregate_equal = aggregate_csv(&first.aggregate) == aggregate_csv(&second.aggregate);
    let pass = trials_equal && aggregate_equal;
    let detail = format!(
        "two sweep runs, seed 77, 2 power points x 3 trials x 3 designs: per-trial CSV identical \
         {trials_equal}, aggregate CSV identical {aggregate_equal}"
    );
    report(10, pass, &detail);
    assert!(pass, "{detail}");
}
