//! Cone-program assembly for one inner-approximation step.
//!
//! Each outer iteration linearizes the nonconvex pieces of the design problem
//! around the current iterate and emits a cone program over the stacked
//! real/imaginary beamformer coordinates plus the selection and epigraph
//! variables. Emission order is deterministic so repeated runs solve
//! bit-identical programs.

use num_complex::Complex;

use crate::conic::{BlockId, ConeSolution, ConicProgram, LinExpr, VarId};
use crate::model::{BeamformingMatrix, ChannelSet, ProblemConfig, SelectionState};
use crate::surrogate::{
    coupling_ratio, expansion_vars, surrogate_coeffs, SurrogateCoefficients, SurrogateError,
};
use crate::{real, Real};

use super::ScaState;

/// Slack required of the linearized signal term. Keeping
/// `2 Re{h_k^H w_k} - t_ref >= TRUST_MARGIN` bounds the next expansion point
/// away from the boundary where the reciprocal bound degenerates.
pub const TRUST_MARGIN: f64 = 1e-6;

/// How transmit power is constrained in a subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerModel {
    /// One sum-power budget over all antennas.
    SumPower,
    /// Equal per-antenna caps `P / N_t`.
    PerAntenna,
    /// Selection-aware budget through the `alpha`/`rho` split.
    Selection,
}

/// Options controlling which optional rows a subproblem carries.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BuildSpec<T: Real> {
    pub power: PowerModel,
    /// `Some(omega)` adds `omega * rho_n - alpha_n >= 0` for every antenna.
    pub omega: Option<T>,
    /// Replace the hard rate floors with a common maximized slack.
    pub feasibility: bool,
    /// Pin every selection variable to one.
    pub pin_alpha: bool,
}

/// A ready-to-solve cone program plus the bookkeeping needed to map the
/// solution back onto model quantities.
#[derive(Debug, Clone)]
pub struct Subproblem<T: Real> {
    pub program: ConicProgram<T>,
    /// Per-user bound coefficients at the expansion point.
    pub coeffs: Vec<SurrogateCoefficients<T>>,
    /// Per-user signal level at the expansion point.
    pub t_ref: Vec<T>,
    n_antennas: usize,
    n_users: usize,
    w: BlockId,
    gamma: BlockId,
    alpha: Option<BlockId>,
    rho: Option<BlockId>,
    margin: Option<BlockId>,
}

impl<T: Real> Subproblem<T> {
    /// Reassembles the complex beamformers from a solution.
    pub fn beamformers(&self, sol: &ConeSolution<T>) -> BeamformingMatrix<T> {
        let vectors = (0..self.n_users)
            .map(|k| {
                (0..self.n_antennas)
                    .map(|n| {
                        let base = 2 * (k * self.n_antennas + n);
                        Complex::new(
                            sol.value(self.program.var(self.w, base)),
                            sol.value(self.program.var(self.w, base + 1)),
                        )
                    })
                    .collect()
            })
            .collect();
        BeamformingMatrix::new(vectors).expect("solution has the block shape")
    }

    /// Selection variables clamped back into their feasible ranges; `None`
    /// when the subproblem has no selection block.
    pub fn selection(&self, sol: &ConeSolution<T>) -> Option<SelectionState<T>> {
        let (ab, rb) = (self.alpha?, self.rho?);
        let alpha = (0..self.n_antennas)
            .map(|n| {
                sol.value(self.program.var(ab, n))
                    .max(T::zero())
                    .min(T::one())
            })
            .collect();
        let rho = (0..self.n_antennas)
            .map(|n| sol.value(self.program.var(rb, n)).max(T::zero()))
            .collect();
        Some(SelectionState::new(alpha, rho).expect("clamped values are valid"))
    }

    /// Value of the feasibility slack, when present.
    pub fn margin_value(&self, sol: &ConeSolution<T>) -> Option<T> {
        self.margin.map(|b| sol.value(self.program.var(b, 0)))
    }

    /// Interference-epigraph values per user.
    pub fn gamma_values(&self, sol: &ConeSolution<T>) -> Vec<T> {
        (0..self.n_users)
            .map(|k| sol.value(self.program.var(self.gamma, k)))
            .collect()
    }
}

/// Linear expression `scale * Re{g^H w_j}` over the stacked beamformer
/// coordinates of user `j`.
fn re_expr<T: Real>(wid: &[VarId], nt: usize, g: &[Complex<T>], j: usize, scale: T) -> LinExpr<T> {
    let mut e = LinExpr::new();
    for (n, gn) in g.iter().enumerate() {
        let base = 2 * (j * nt + n);
        e = e.plus(wid[base], scale * gn.re).plus(wid[base + 1], scale * gn.im);
    }
    e
}

/// Linear expression `scale * Im{g^H w_j}`.
fn im_expr<T: Real>(wid: &[VarId], nt: usize, g: &[Complex<T>], j: usize, scale: T) -> LinExpr<T> {
    let mut e = LinExpr::new();
    for (n, gn) in g.iter().enumerate() {
        let base = 2 * (j * nt + n);
        e = e.plus(wid[base + 1], scale * gn.re).plus(wid[base], -scale * gn.im);
    }
    e
}

/// Assembles the cone program for one step around `state`.
pub(crate) fn build<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    state: &ScaState<T>,
    spec: &BuildSpec<T>,
) -> Result<Subproblem<T>, SurrogateError> {
    let nt = cfg.n_antennas;
    let nk = cfg.n_sus;
    let one = T::one();
    let two = one + one;
    let half = one / two;

    let mut t_ref = Vec::with_capacity(nk);
    let mut coeffs = Vec::with_capacity(nk);
    for k in 0..nk {
        let vars = expansion_vars(ch, &state.w, k, cfg.noise_powers[k])?;
        t_ref.push(vars.t_ref);
        coeffs.push(surrogate_coeffs(vars.varphi)?);
    }

    let mut p = ConicProgram::maximize();
    let w = p.add_block("w", 2 * nt * nk);
    let has_selection = spec.power == PowerModel::Selection;
    let (alpha, rho) = if has_selection {
        (Some(p.add_block("alpha", nt)), Some(p.add_block("rho", nt)))
    } else {
        (None, None)
    };
    let gamma = p.add_block("gamma", nk);
    let margin = if spec.feasibility {
        Some(p.add_block("margin", 1))
    } else {
        None
    };

    let wid: Vec<VarId> = (0..2 * nt * nk).map(|i| p.var(w, i)).collect();
    let gid: Vec<VarId> = (0..nk).map(|k| p.var(gamma, k)).collect();
    let aid: Option<Vec<VarId>> = alpha.map(|b| (0..nt).map(|n| p.var(b, n)).collect());
    let rid: Option<Vec<VarId>> = rho.map(|b| (0..nt).map(|n| p.var(b, n)).collect());
    let mid: Option<VarId> = margin.map(|b| p.var(b, 0));

    if let Some(mv) = mid {
        p.objective_term(mv, one);
    } else {
        for k in 0..nk {
            p.objective_term(gid[k], -coeffs[k].b);
            p.objective_offset(coeffs[k].a);
        }
    }

    for m in 0..cfg.n_pus {
        let g = ch.pu(m);
        let mut u = Vec::with_capacity(2 * nk);
        for k in 0..nk {
            u.push(re_expr(&wid, nt, g, k, one));
            u.push(im_expr(&wid, nt, g, k, one));
        }
        p.soc(
            format!("pu_cap[{m}]"),
            LinExpr::constant(cfg.interference_caps[m].sqrt()),
            u,
        );
    }

    if let (Some(aid), Some(rid)) = (aid.as_deref(), rid.as_deref()) {
        for n in 0..nt {
            let mut u = Vec::with_capacity(2 * nk);
            for k in 0..nk {
                let base = 2 * (k * nt + n);
                u.push(LinExpr::term(wid[base], one));
                u.push(LinExpr::term(wid[base + 1], one));
            }
            p.rsoc(
                format!("coupling[{n}]"),
                LinExpr::term(aid[n], half),
                LinExpr::term(rid[n], one),
                u,
            );
        }
        for n in 0..nt {
            p.nonneg(format!("alpha_low[{n}]"), LinExpr::term(aid[n], one));
            p.nonneg(
                format!("alpha_high[{n}]"),
                LinExpr::term(aid[n], -one).plus_constant(one),
            );
        }
        if let Some(omega) = spec.omega {
            for n in 0..nt {
                p.nonneg(
                    format!("omega[{n}]"),
                    LinExpr::term(rid[n], omega).plus(aid[n], -one),
                );
            }
        }
    }

    let eps_t = real::<T>(TRUST_MARGIN);
    for k in 0..nk {
        p.nonneg(
            format!("trust[{k}]"),
            re_expr(&wid, nt, ch.su(k), k, two).plus_constant(-t_ref[k] - eps_t),
        );
    }

    for k in 0..nk {
        let h = ch.su(k);
        let s = LinExpr::term(gid[k], half);
        let t = re_expr(&wid, nt, h, k, two * t_ref[k]).plus_constant(-t_ref[k] * t_ref[k]);
        let mut u = Vec::with_capacity(2 * nk - 1);
        for j in 0..nk {
            if j != k {
                u.push(re_expr(&wid, nt, h, j, one));
                u.push(im_expr(&wid, nt, h, j, one));
            }
        }
        u.push(LinExpr::constant(cfg.noise_powers[k].sqrt()));
        p.rsoc(format!("sinr[{k}]"), s, t, u);
    }

    if !spec.feasibility {
        for k in 0..nk {
            p.nonneg(
                format!("qos[{k}]"),
                LinExpr::term(gid[k], -coeffs[k].b)
                    .plus_constant(coeffs[k].a - cfg.rate_floors[k]),
            );
        }
    }

    match spec.power {
        PowerModel::SumPower => {
            let u = wid.iter().map(|&v| LinExpr::term(v, one)).collect();
            p.soc(
                "power_budget",
                LinExpr::constant(cfg.power_budget.sqrt()),
                u,
            );
        }
        PowerModel::PerAntenna => {
            let cap = (cfg.power_budget / real::<T>(nt as f64)).sqrt();
            for n in 0..nt {
                let mut u = Vec::with_capacity(2 * nk);
                for k in 0..nk {
                    let base = 2 * (k * nt + n);
                    u.push(LinExpr::term(wid[base], one));
                    u.push(LinExpr::term(wid[base + 1], one));
                }
                p.soc(format!("antenna_cap[{n}]"), LinExpr::constant(cap), u);
            }
        }
        PowerModel::Selection => {
            let aid = aid.as_deref().expect("selection block present");
            let rid = rid.as_deref().expect("selection block present");
            let mut u = Vec::with_capacity(2 * nt);
            for n in 0..nt {
                let r = coupling_ratio(state.selection.alpha[n], state.selection.rho[n]);
                u.push(LinExpr::term(aid[n], (two * r).sqrt().recip()));
                u.push(LinExpr::term(rid[n], (r / two).sqrt()));
            }
            p.soc(
                "power_budget",
                LinExpr::constant(cfg.power_budget.sqrt()),
                u,
            );
        }
    }

    if let Some(mv) = mid {
        for k in 0..nk {
            p.nonneg(
                format!("qos_margin[{k}]"),
                LinExpr::term(gid[k], -coeffs[k].b)
                    .plus(mv, -one)
                    .plus_constant(coeffs[k].a - cfg.rate_floors[k]),
            );
        }
    }

    if spec.pin_alpha {
        if let Some(aid) = aid.as_deref() {
            for n in 0..nt {
                p.eq(
                    format!("alpha_pin[{n}]"),
                    LinExpr::term(aid[n], one).plus_constant(-one),
                );
            }
        }
    }

    Ok(Subproblem {
        program: p,
        coeffs,
        t_ref,
        n_antennas: nt,
        n_users: nk,
        w,
        gamma,
        alpha,
        rho,
        margin,
    })
}

/// Step program for the relaxed design: selection variables live in the unit
/// box and couple to the power budget through the quadratic overestimate of
/// `alpha_n * rho_n`.
pub fn build_relaxed_subproblem<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    state: &ScaState<T>,
) -> Result<Subproblem<T>, SurrogateError> {
    build(
        cfg,
        ch,
        state,
        &BuildSpec {
            power: PowerModel::Selection,
            omega: None,
            feasibility: false,
            pin_alpha: false,
        },
    )
}

/// Relaxed step program plus the coupling rows `alpha_n <= omega * rho_n`
/// that starve deselected antennas of power.
pub fn build_improved_subproblem<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    state: &ScaState<T>,
) -> Result<Subproblem<T>, SurrogateError> {
    build(
        cfg,
        ch,
        state,
        &BuildSpec {
            power: PowerModel::Selection,
            omega: Some(cfg.omega),
            feasibility: false,
            pin_alpha: false,
        },
    )
}

/// Phase-one program: the rate floors turn into `a_k - b_k gamma_k >=
/// floor_k + margin` and the common slack `margin` is maximized.
pub fn build_feasibility_subproblem<T: Real>(
    cfg: &ProblemConfig<T>,
    ch: &ChannelSet<T>,
    state: &ScaState<T>,
) -> Result<Subproblem<T>, SurrogateError> {
    build(
        cfg,
        ch,
        state,
        &BuildSpec {
            power: PowerModel::Selection,
            omega: None,
            feasibility: true,
            pin_alpha: false,
        },
    )
}
