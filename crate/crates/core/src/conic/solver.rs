//! Lowering to standard conic form and the homogeneous self-dual
//! interior-point method that solves it.
//!
//! Programs are reduced to `min c'x  s.t.  Ax = b, Gx + s = h, s in K` with
//! `K` a product of a nonnegative orthant and second-order cones (rotated
//! cones are embedded into plain ones). The solver runs a predictor-corrector
//! scheme on the homogeneous embedding: Nesterov-Todd scaling of the cone
//! variables, one dense KKT factorization per iteration with static
//! regularization and a step of iterative refinement, Mehrotra centering
//! `sigma = (1 - alpha_affine)^3`, and certificate-based detection of
//! infeasibility and unboundedness.

use super::dense::{factorize, DenseMatrix};
use super::{ConicProgram, ConstraintKind, LinExpr, ProgramError};
use crate::{real, Real};

/// Tolerances and limits for [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSolverOptions<T: Real> {
    /// Relative tolerance on primal/dual residuals and the duality gap.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for ConeSolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: real(1e-8),
            max_iter: 100,
        }
    }
}

/// Outcome classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Residuals and gap met the tolerance.
    Optimal,
    /// A certificate `A'y + G'z = 0, b'y + h'z < 0, z in K*` was found.
    PrimalInfeasible,
    /// A ray `Ax = 0, Gx + s = 0, c'x < 0` was found.
    Unbounded,
    /// Iteration budget exhausted; the best iterate seen is returned.
    IterationLimit,
    /// The linear algebra or step selection broke down.
    NumericalFailure,
}

/// Solution of a cone program, in the original variable order.
#[derive(Debug, Clone)]
pub struct ConeSolution<T: Real> {
    pub status: SolveStatus,
    pub x: Vec<T>,
    /// Objective value in the program's own sense; NaN when no feasible
    /// point is available.
    pub objective: T,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    pub gap: T,
    pub y: Vec<T>,
    pub z: Vec<T>,
    pub s: Vec<T>,
}

impl<T: Real> ConeSolution<T> {
    pub fn value(&self, var: super::VarId) -> T {
        self.x[var.0]
    }

    /// Whether the iterate is trustworthy enough to continue an outer
    /// algorithm: either optimal, or stopped at the iteration limit with
    /// residuals below `residual_tol`.
    pub fn usable(&self, residual_tol: T) -> bool {
        match self.status {
            SolveStatus::Optimal => true,
            SolveStatus::IterationLimit => {
                self.primal_residual.max(self.dual_residual) <= residual_tol
            }
            _ => false,
        }
    }
}

/// Independent residual check of a returned iterate against the program data.
#[derive(Debug, Clone, Copy)]
pub struct CertificateReport<T: Real> {
    /// `max(||Ax - b||, ||Gx + s - h||)`, each relative to `1 + ||rhs||`.
    pub primal_residual: T,
    /// `||A'y + G'z + c||` relative to `1 + ||c||`.
    pub dual_residual: T,
    /// `|s'z| / (1 + |c'x|)`.
    pub gap: T,
    /// How far `s` or `z` sits outside its cone (0 when both are members).
    pub cone_violation: T,
}

impl<T: Real> CertificateReport<T> {
    pub fn worst(&self) -> T {
        self.primal_residual
            .max(self.dual_residual)
            .max(self.gap)
            .max(self.cone_violation)
    }
}

/// Cone structure of the lowered program: leading orthant, then one block
/// per second-order cone.
#[derive(Debug, Clone, PartialEq)]
struct ConeLayout {
    n_nonneg: usize,
    soc_dims: Vec<usize>,
}

impl ConeLayout {
    fn m(&self) -> usize {
        self.n_nonneg + self.soc_dims.iter().sum::<usize>()
    }

    fn degree(&self) -> usize {
        self.n_nonneg + self.soc_dims.len()
    }
}

struct StdForm<T: Real> {
    n: usize,
    p: usize,
    c: Vec<T>,
    a: DenseMatrix<T>,
    b: Vec<T>,
    g: DenseMatrix<T>,
    h: Vec<T>,
    layout: ConeLayout,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

fn inf_norm<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

fn all_finite<T: Real>(a: &[T]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Writes `slack = scale * expr` into row `row` of `(G, h)`, i.e. negated
/// coefficients into `G` and the constant into `h`.
fn fill_cone_row<T: Real>(
    g: &mut DenseMatrix<T>,
    h: &mut [T],
    row: usize,
    expr: &LinExpr<T>,
    scale: T,
) {
    for &(i, coeff) in &expr.terms {
        *g.at_mut(row, i) -= scale * coeff;
    }
    h[row] += scale * expr.constant;
}

fn lower<T: Real>(prog: &ConicProgram<T>) -> Result<StdForm<T>, ProgramError> {
    prog.validate()?;
    let n = prog.n_vars();
    let sense_sign = match prog.sense() {
        super::Sense::Minimize => T::one(),
        super::Sense::Maximize => -T::one(),
    };
    let mut c = vec![T::zero(); n];
    for &(i, coeff) in &prog.objective {
        c[i] += sense_sign * coeff;
    }

    let mut p = 0usize;
    let mut n_nonneg = 0usize;
    let mut soc_dims = Vec::new();
    for con in prog.constraints() {
        match &con.kind {
            ConstraintKind::Eq(_) => p += 1,
            ConstraintKind::NonNeg(_) => n_nonneg += 1,
            ConstraintKind::Soc { u, .. } => {
                if u.is_empty() {
                    n_nonneg += 1;
                } else {
                    soc_dims.push(1 + u.len());
                }
            }
            ConstraintKind::Rsoc { u, .. } => {
                if u.is_empty() {
                    n_nonneg += 2;
                } else {
                    soc_dims.push(2 + u.len());
                }
            }
        }
    }
    let layout = ConeLayout { n_nonneg, soc_dims };
    let m = layout.m();

    let mut a = DenseMatrix::zeros(p, n);
    let mut b = vec![T::zero(); p];
    let mut g = DenseMatrix::zeros(m, n);
    let mut h = vec![T::zero(); m];

    let mut eq_row = 0usize;
    let mut lin_row = 0usize;
    // Orthant rows come first, in constraint order.
    for con in prog.constraints() {
        match &con.kind {
            ConstraintKind::Eq(e) => {
                for &(i, coeff) in &e.terms {
                    *a.at_mut(eq_row, i) += coeff;
                }
                b[eq_row] = -e.constant;
                eq_row += 1;
            }
            ConstraintKind::NonNeg(e) => {
                fill_cone_row(&mut g, &mut h, lin_row, e, T::one());
                lin_row += 1;
            }
            ConstraintKind::Soc { t, u } if u.is_empty() => {
                fill_cone_row(&mut g, &mut h, lin_row, t, T::one());
                lin_row += 1;
            }
            ConstraintKind::Rsoc { s, t, u } if u.is_empty() => {
                fill_cone_row(&mut g, &mut h, lin_row, s, T::one());
                fill_cone_row(&mut g, &mut h, lin_row + 1, t, T::one());
                lin_row += 2;
            }
            _ => {}
        }
    }
    // Cone blocks follow, in the same order their dimensions were collected.
    let inv_sqrt2 = T::one() / (T::one() + T::one()).sqrt();
    let mut row = n_nonneg;
    for con in prog.constraints() {
        match &con.kind {
            ConstraintKind::Soc { t, u } if !u.is_empty() => {
                fill_cone_row(&mut g, &mut h, row, t, T::one());
                for (j, e) in u.iter().enumerate() {
                    fill_cone_row(&mut g, &mut h, row + 1 + j, e, T::one());
                }
                row += 1 + u.len();
            }
            ConstraintKind::Rsoc { s, t, u } if !u.is_empty() => {
                // 2 s t >= ||u||^2  becomes  ||((s - t)/sqrt2, u)|| <= (s + t)/sqrt2.
                fill_cone_row(&mut g, &mut h, row, s, inv_sqrt2);
                fill_cone_row(&mut g, &mut h, row, t, inv_sqrt2);
                fill_cone_row(&mut g, &mut h, row + 1, s, inv_sqrt2);
                fill_cone_row(&mut g, &mut h, row + 1, t, -inv_sqrt2);
                for (j, e) in u.iter().enumerate() {
                    fill_cone_row(&mut g, &mut h, row + 2 + j, e, T::one());
                }
                row += 2 + u.len();
            }
            _ => {}
        }
    }
    debug_assert_eq!(row, m);

    Ok(StdForm {
        n,
        p,
        c,
        a,
        b,
        g,
        h,
        layout,
    })
}

/// Identity element of the cone product.
fn cone_identity<T: Real>(layout: &ConeLayout) -> Vec<T> {
    let mut e = vec![T::zero(); layout.m()];
    for v in e.iter_mut().take(layout.n_nonneg) {
        *v = T::one();
    }
    let mut off = layout.n_nonneg;
    for &d in &layout.soc_dims {
        e[off] = T::one();
        off += d;
    }
    e
}

/// Smallest interior margin across blocks: positive iff strictly interior.
fn interior_margin<T: Real>(layout: &ConeLayout, v: &[T]) -> T {
    let mut margin = T::infinity();
    for &vi in v.iter().take(layout.n_nonneg) {
        margin = margin.min(vi);
    }
    let mut off = layout.n_nonneg;
    for &d in &layout.soc_dims {
        let head = v[off];
        let tail = dot(&v[off + 1..off + d], &v[off + 1..off + d]).sqrt();
        margin = margin.min(head - tail);
        off += d;
    }
    margin
}

/// Shifts `v` along the cone identity until it is comfortably interior.
fn shift_to_interior<T: Real>(layout: &ConeLayout, v: &mut [T]) {
    let margin = interior_margin(layout, v);
    if margin <= T::zero() {
        let step = T::one() - margin;
        for i in 0..layout.n_nonneg {
            v[i] += step;
        }
        let mut off = layout.n_nonneg;
        for &d in &layout.soc_dims {
            v[off] += step;
            off += d;
        }
    }
}

/// Jordan product `a o b` on the cone product.
fn jordan_mul<T: Real>(layout: &ConeLayout, a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); layout.m()];
    for i in 0..layout.n_nonneg {
        out[i] = a[i] * b[i];
    }
    let mut off = layout.n_nonneg;
    for &d in &layout.soc_dims {
        let (a0, b0) = (a[off], b[off]);
        out[off] = dot(&a[off..off + d], &b[off..off + d]);
        for i in off + 1..off + d {
            out[i] = a0 * b[i] + b0 * a[i];
        }
        off += d;
    }
    out
}

/// Solves `lambda o x = d` blockwise.
fn jordan_solve<T: Real>(layout: &ConeLayout, lambda: &[T], d: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); layout.m()];
    for i in 0..layout.n_nonneg {
        out[i] = d[i] / lambda[i];
    }
    let mut off = layout.n_nonneg;
    for &dim in &layout.soc_dims {
        let l0 = lambda[off];
        let l1 = &lambda[off + 1..off + dim];
        let det = l0 * l0 - dot(l1, l1);
        let x0 = (l0 * d[off] - dot(l1, &d[off + 1..off + dim])) / det;
        out[off] = x0;
        for i in 1..dim {
            out[off + i] = (d[off + i] - x0 * lambda[off + i]) / l0;
        }
        off += dim;
    }
    out
}

/// Largest step `alpha >= 0` keeping `v + alpha dv` inside the closed cone.
fn max_step<T: Real>(layout: &ConeLayout, v: &[T], dv: &[T]) -> T {
    let mut best = T::infinity();
    for i in 0..layout.n_nonneg {
        if dv[i] < T::zero() {
            best = best.min(-v[i] / dv[i]);
        }
    }
    let mut off = layout.n_nonneg;
    for &d in &layout.soc_dims {
        best = best.min(soc_boundary_step(&v[off..off + d], &dv[off..off + d]));
        off += d;
    }
    best
}

/// Boundary crossing of one second-order cone along a ray from an interior
/// point: smallest positive root of `(v + a d)' J (v + a d) = 0` or of the
/// head component hitting zero.
fn soc_boundary_step<T: Real>(v: &[T], d: &[T]) -> T {
    let jdot = |x: &[T], y: &[T]| x[0] * y[0] - dot(&x[1..], &y[1..]);
    let aa = jdot(d, d);
    let bb = jdot(v, d);
    let cc = jdot(v, v);
    let mut best = T::infinity();
    if d[0] < T::zero() {
        best = best.min(-v[0] / d[0]);
    }
    if cc <= T::zero() {
        // Numerically already on or past the boundary.
        return T::zero();
    }
    if aa == T::zero() {
        if bb < T::zero() {
            best = best.min(-cc / ((T::one() + T::one()) * bb));
        }
        return best;
    }
    let disc = bb * bb - aa * cc;
    if disc >= T::zero() {
        let sq = disc.sqrt();
        let q = -(bb + bb.signum() * sq);
        let candidates = [
            if aa != T::zero() { q / aa } else { T::infinity() },
            if q != T::zero() { cc / q } else { T::infinity() },
        ];
        for r in candidates {
            if r > T::zero() {
                best = best.min(r);
            }
        }
    }
    best
}

/// Nesterov-Todd scaling blocks: `W z = W^{-1} s = lambda` for the current
/// interior pair `(s, z)`.
enum ScalingBlock<T: Real> {
    Orthant { w: Vec<T> },
    Soc { eta: T, wbar: Vec<T> },
}

struct Scaling<T: Real> {
    blocks: Vec<ScalingBlock<T>>,
}

impl<T: Real> Scaling<T> {
    fn compute(layout: &ConeLayout, s: &[T], z: &[T]) -> Option<Self> {
        let mut blocks = Vec::with_capacity(1 + layout.soc_dims.len());
        if layout.n_nonneg > 0 {
            let mut w = Vec::with_capacity(layout.n_nonneg);
            for i in 0..layout.n_nonneg {
                if !(s[i] > T::zero() && z[i] > T::zero()) {
                    return None;
                }
                w.push((s[i] / z[i]).sqrt());
            }
            blocks.push(ScalingBlock::Orthant { w });
        }
        let mut off = layout.n_nonneg;
        for &d in &layout.soc_dims {
            let sb = &s[off..off + d];
            let zb = &z[off..off + d];
            let jdot = |x: &[T]| x[0] * x[0] - dot(&x[1..], &x[1..]);
            let sres = jdot(sb);
            let zres = jdot(zb);
            if !(sres > T::zero() && zres > T::zero() && sb[0] > T::zero() && zb[0] > T::zero()) {
                return None;
            }
            let snorm = sres.sqrt();
            let znorm = zres.sqrt();
            let mut dotbar = sb[0] / snorm * (zb[0] / znorm);
            for i in 1..d {
                dotbar += sb[i] / snorm * (zb[i] / znorm);
            }
            let gamma = ((T::one() + dotbar) / (T::one() + T::one())).sqrt();
            let two_gamma = (T::one() + T::one()) * gamma;
            let mut wbar = Vec::with_capacity(d);
            wbar.push((sb[0] / snorm + zb[0] / znorm) / two_gamma);
            for i in 1..d {
                wbar.push((sb[i] / snorm - zb[i] / znorm) / two_gamma);
            }
            let eta = (sres / zres).sqrt().sqrt();
            blocks.push(ScalingBlock::Soc { eta, wbar });
            off += d;
        }
        Some(Self { blocks })
    }

    fn apply_blocks(&self, v: &[T], invert: bool) -> Vec<T> {
        let mut out = vec![T::zero(); v.len()];
        let mut off = 0usize;
        for block in &self.blocks {
            match block {
                ScalingBlock::Orthant { w } => {
                    for (i, wi) in w.iter().enumerate() {
                        out[off + i] = if invert { v[off + i] / *wi } else { v[off + i] * *wi };
                    }
                    off += w.len();
                }
                ScalingBlock::Soc { eta, wbar } => {
                    let d = wbar.len();
                    let a = wbar[0];
                    let sgn = if invert { -T::one() } else { T::one() };
                    let scale = if invert { T::one() / *eta } else { *eta };
                    let u_dot_v1 = dot(&wbar[1..], &v[off + 1..off + d]);
                    out[off] = scale * (a * v[off] + sgn * u_dot_v1);
                    let factor = sgn * v[off] + u_dot_v1 / (T::one() + a);
                    for i in 1..d {
                        out[off + i] = scale * (v[off + i] + factor * wbar[i]);
                    }
                    off += d;
                }
            }
        }
        out
    }

    /// `W v`.
    fn apply(&self, v: &[T]) -> Vec<T> {
        self.apply_blocks(v, false)
    }

    /// `W^{-1} v`.
    fn apply_inv(&self, v: &[T]) -> Vec<T> {
        self.apply_blocks(v, true)
    }

    /// `W^2 v`.
    fn apply_sq(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); v.len()];
        let two = T::one() + T::one();
        let mut off = 0usize;
        for block in &self.blocks {
            match block {
                ScalingBlock::Orthant { w } => {
                    for (i, wi) in w.iter().enumerate() {
                        out[off + i] = v[off + i] * *wi * *wi;
                    }
                    off += w.len();
                }
                ScalingBlock::Soc { eta, wbar } => {
                    let d = wbar.len();
                    let eta2 = *eta * *eta;
                    let wv = dot(wbar, &v[off..off + d]);
                    out[off] = eta2 * (two * wbar[0] * wv - v[off]);
                    for i in 1..d {
                        out[off + i] = eta2 * (two * wbar[i] * wv + v[off + i]);
                    }
                    off += d;
                }
            }
        }
        out
    }

    /// Subtracts `W^2` from the KKT matrix block starting at `base`.
    fn subtract_w_sq(&self, k: &mut DenseMatrix<T>, base: usize) {
        let two = T::one() + T::one();
        let mut off = 0usize;
        for block in &self.blocks {
            match block {
                ScalingBlock::Orthant { w } => {
                    for (i, wi) in w.iter().enumerate() {
                        *k.at_mut(base + off + i, base + off + i) -= *wi * *wi;
                    }
                    off += w.len();
                }
                ScalingBlock::Soc { eta, wbar } => {
                    let d = wbar.len();
                    let eta2 = *eta * *eta;
                    for i in 0..d {
                        for j in 0..d {
                            let mut val = two * eta2 * wbar[i] * wbar[j];
                            if i == j {
                                val -= eta2 * if i == 0 { T::one() } else { -T::one() };
                            }
                            *k.at_mut(base + off + i, base + off + j) -= val;
                        }
                    }
                    off += d;
                }
            }
        }
    }

    fn lambda(&self, z: &[T]) -> Vec<T> {
        self.apply(z)
    }
}

struct Snapshot<T: Real> {
    score: T,
    x: Vec<T>,
    y: Vec<T>,
    z: Vec<T>,
    s: Vec<T>,
    pres: T,
    dres: T,
    gap: T,
    iterations: usize,
}

struct RawOutcome<T: Real> {
    status: SolveStatus,
    x: Vec<T>,
    y: Vec<T>,
    z: Vec<T>,
    s: Vec<T>,
    iterations: usize,
    pres: T,
    dres: T,
    gap: T,
}

fn outcome_from_best<T: Real>(status: SolveStatus, best: Snapshot<T>) -> RawOutcome<T> {
    RawOutcome {
        status,
        x: best.x,
        y: best.y,
        z: best.z,
        s: best.s,
        iterations: best.iterations,
        pres: best.pres,
        dres: best.dres,
        gap: best.gap,
    }
}

/// Exit for a breakdown inside the iteration loop. Endgame breakdowns are
/// common once the complementarity products hit the numerical floor; when an
/// iterate has been recorded, it is returned with honest residuals rather
/// than thrown away.
fn breakdown_outcome<T: Real>(best: Snapshot<T>) -> RawOutcome<T> {
    let status = if best.score.is_finite() {
        SolveStatus::IterationLimit
    } else {
        SolveStatus::NumericalFailure
    };
    outcome_from_best(status, best)
}

/// Diagonal scalings applied to the standard form before solving. Equality
/// rows scale independently; every row of a second-order block shares one
/// factor so the block stays the same cone; columns scale per variable.
struct Equilibration<T: Real> {
    d_eq: Vec<T>,
    d_cone: Vec<T>,
    e_col: Vec<T>,
}

const EQUILIBRATION_PASSES: usize = 10;

fn clamp_scale<T: Real>(f: T) -> T {
    f.max(real::<T>(1e-8)).min(real::<T>(1e8))
}

/// Ruiz equilibration: alternately scales rows and columns of the stacked
/// constraint matrix toward unit magnitude. Ill-scaled subproblems (power
/// budgets orders of magnitude above noise next to unit selection variables)
/// otherwise drive the KKT factorization into breakdown.
fn equilibrate<T: Real>(sf: &StdForm<T>) -> (StdForm<T>, Equilibration<T>) {
    let n = sf.n;
    let p = sf.p;
    let m = sf.layout.m();
    let mut scaled = StdForm {
        n: sf.n,
        p: sf.p,
        c: sf.c.clone(),
        a: sf.a.clone(),
        b: sf.b.clone(),
        g: sf.g.clone(),
        h: sf.h.clone(),
        layout: sf.layout.clone(),
    };
    let mut d_eq = vec![T::one(); p];
    let mut d_cone = vec![T::one(); m];
    let mut e_col = vec![T::one(); n];

    let mut groups: Vec<(usize, usize)> = (0..sf.layout.n_nonneg).map(|r| (r, 1)).collect();
    let mut off = sf.layout.n_nonneg;
    for &dim in &sf.layout.soc_dims {
        groups.push((off, dim));
        off += dim;
    }

    for _ in 0..EQUILIBRATION_PASSES {
        let mut worst = T::one();
        let mut track = |ext: T| {
            if ext > T::zero() {
                worst = worst.max(ext).max(T::one() / ext);
            }
        };
        for j in 0..n {
            let mut ext = T::zero();
            for r in 0..p {
                ext = ext.max(scaled.a.at(r, j).abs());
            }
            for r in 0..m {
                ext = ext.max(scaled.g.at(r, j).abs());
            }
            track(ext);
            if ext <= T::zero() {
                continue;
            }
            let f = clamp_scale(T::one() / ext.sqrt());
            for r in 0..p {
                *scaled.a.at_mut(r, j) *= f;
            }
            for r in 0..m {
                *scaled.g.at_mut(r, j) *= f;
            }
            scaled.c[j] *= f;
            e_col[j] *= f;
        }
        for r in 0..p {
            let mut ext = T::zero();
            for j in 0..n {
                ext = ext.max(scaled.a.at(r, j).abs());
            }
            track(ext);
            if ext <= T::zero() {
                continue;
            }
            let f = clamp_scale(T::one() / ext.sqrt());
            for j in 0..n {
                *scaled.a.at_mut(r, j) *= f;
            }
            scaled.b[r] *= f;
            d_eq[r] *= f;
        }
        for &(start, len) in &groups {
            let mut ext = T::zero();
            for r in start..start + len {
                for j in 0..n {
                    ext = ext.max(scaled.g.at(r, j).abs());
                }
            }
            track(ext);
            if ext <= T::zero() {
                continue;
            }
            let f = clamp_scale(T::one() / ext.sqrt());
            for r in start..start + len {
                for j in 0..n {
                    *scaled.g.at_mut(r, j) *= f;
                }
                scaled.h[r] *= f;
                d_cone[r] *= f;
            }
        }
        if worst < real::<T>(1.05) {
            break;
        }
    }
    (
        scaled,
        Equilibration {
            d_eq,
            d_cone,
            e_col,
        },
    )
}

fn solve_std<T: Real>(sf: &StdForm<T>, opts: &ConeSolverOptions<T>) -> RawOutcome<T> {
    let (scaled, eq) = equilibrate(sf);
    let mut raw = solve_std_inner(&scaled, opts);
    for (xi, e) in raw.x.iter_mut().zip(&eq.e_col) {
        *xi *= *e;
    }
    for (yi, d) in raw.y.iter_mut().zip(&eq.d_eq) {
        *yi *= *d;
    }
    for (zi, d) in raw.z.iter_mut().zip(&eq.d_cone) {
        *zi *= *d;
    }
    for (si, d) in raw.s.iter_mut().zip(&eq.d_cone) {
        *si /= *d;
    }
    // The duality gap is invariant under row scaling, but the reported
    // residuals must refer to the caller's data.
    if matches!(
        raw.status,
        SolveStatus::Optimal | SolveStatus::IterationLimit
    ) {
        let ax = sf.a.matvec(&raw.x);
        let eq_res: Vec<T> = ax.iter().zip(&sf.b).map(|(a, b)| *a - *b).collect();
        let gx = sf.g.matvec(&raw.x);
        let cone_res: Vec<T> = gx
            .iter()
            .zip(&raw.s)
            .zip(&sf.h)
            .map(|((a, si), hi)| *a + *si - *hi)
            .collect();
        raw.pres = (inf_norm(&eq_res) / (T::one() + inf_norm(&sf.b)))
            .max(inf_norm(&cone_res) / (T::one() + inf_norm(&sf.h)));
        let mut dual_vec = sf.a.matvec_transpose(&raw.y);
        let gtz = sf.g.matvec_transpose(&raw.z);
        for i in 0..sf.n {
            dual_vec[i] += gtz[i] + sf.c[i];
        }
        raw.dres = inf_norm(&dual_vec) / (T::one() + inf_norm(&sf.c));
    }
    raw
}

fn solve_std_inner<T: Real>(sf: &StdForm<T>, opts: &ConeSolverOptions<T>) -> RawOutcome<T> {
    let n = sf.n;
    let p = sf.p;
    let m = sf.layout.m();
    let fail_empty = |status: SolveStatus| RawOutcome {
        status,
        x: vec![T::zero(); n],
        y: vec![T::zero(); p],
        z: vec![T::zero(); m],
        s: vec![T::zero(); m],
        iterations: 0,
        pres: T::infinity(),
        dres: T::infinity(),
        gap: T::infinity(),
    };

    if m == 0 && p == 0 {
        // Unconstrained linear objective.
        if sf.c.iter().all(|&ci| ci == T::zero()) {
            let mut out = fail_empty(SolveStatus::Optimal);
            out.pres = T::zero();
            out.dres = T::zero();
            out.gap = T::zero();
            return out;
        }
        let mut out = fail_empty(SolveStatus::Unbounded);
        out.x = sf.c.iter().map(|&ci| -ci).collect();
        return out;
    }

    let nn = n + p + m;
    let e = cone_identity::<T>(&sf.layout);
    let degree = real::<T>(sf.layout.degree() as f64);
    let norm_b = inf_norm(&sf.b);
    let norm_c = inf_norm(&sf.c);
    let norm_h = inf_norm(&sf.h);
    let small = real::<T>(1e-12);

    let assemble = |scaling: &Scaling<T>| -> DenseMatrix<T> {
        let mut k = DenseMatrix::zeros(nn, nn);
        for r in 0..p {
            for col in 0..n {
                let v = sf.a.at(r, col);
                if v != T::zero() {
                    *k.at_mut(n + r, col) = v;
                    *k.at_mut(col, n + r) = v;
                }
            }
        }
        for r in 0..m {
            for col in 0..n {
                let v = sf.g.at(r, col);
                if v != T::zero() {
                    *k.at_mut(n + p + r, col) = v;
                    *k.at_mut(col, n + p + r) = v;
                }
            }
        }
        scaling.subtract_w_sq(&mut k, n + p);
        k
    };

    // Regularization is scaled by the problem data, never by the scaling
    // matrix: the W^2 block grows without bound as complementarity pairs
    // converge, and tying delta to it would wreck the achievable accuracy.
    let delta = real::<T>(1e-10) * (T::one() + sf.a.max_abs().max(sf.g.max_abs()));
    let factor_with_reg = |k0: &DenseMatrix<T>| {
        let mut kreg = k0.clone();
        for i in 0..n {
            *kreg.at_mut(i, i) += delta;
        }
        for i in n..nn {
            *kreg.at_mut(i, i) -= delta;
        }
        factorize(kreg).ok()
    };

    // Initial point: least-squares primal/dual solves with identity scaling.
    let identity_scaling = Scaling::<T> {
        blocks: {
            let mut blocks = Vec::new();
            if sf.layout.n_nonneg > 0 {
                blocks.push(ScalingBlock::Orthant {
                    w: vec![T::one(); sf.layout.n_nonneg],
                });
            }
            for &d in &sf.layout.soc_dims {
                let mut wbar = vec![T::zero(); d];
                wbar[0] = T::one();
                blocks.push(ScalingBlock::Soc { eta: T::one(), wbar });
            }
            blocks
        },
    };
    let k0_init = assemble(&identity_scaling);
    let lu_init = match factor_with_reg(&k0_init) {
        Some(lu) => lu,
        None => return fail_empty(SolveStatus::NumericalFailure),
    };
    let kkt_solve = |lu: &super::dense::LuFactors<T>, k0: &DenseMatrix<T>, rhs: &[T]| {
        let mut sol = lu.solve(rhs);
        for _ in 0..2 {
            let prod = k0.matvec(&sol);
            let refine: Vec<T> = rhs.iter().zip(&prod).map(|(r, q)| *r - *q).collect();
            let corr = lu.solve(&refine);
            for (si, ci) in sol.iter_mut().zip(&corr) {
                *si += *ci;
            }
        }
        sol
    };

    let mut rhs = vec![T::zero(); nn];
    rhs[n..n + p].copy_from_slice(&sf.b);
    rhs[n + p..].copy_from_slice(&sf.h);
    let init_primal = kkt_solve(&lu_init, &k0_init, &rhs);
    let mut x: Vec<T> = init_primal[..n].to_vec();
    let mut s: Vec<T> = init_primal[n + p..].iter().map(|v| -*v).collect();
    shift_to_interior(&sf.layout, &mut s);

    for v in rhs.iter_mut() {
        *v = T::zero();
    }
    for i in 0..n {
        rhs[i] = -sf.c[i];
    }
    let init_dual = kkt_solve(&lu_init, &k0_init, &rhs);
    let mut y: Vec<T> = init_dual[n..n + p].to_vec();
    let mut z: Vec<T> = init_dual[n + p..].to_vec();
    shift_to_interior(&sf.layout, &mut z);

    if !(all_finite(&x) && all_finite(&y) && all_finite(&z) && all_finite(&s)) {
        return fail_empty(SolveStatus::NumericalFailure);
    }

    let mut tau = T::one();
    let mut kappa = T::one();

    let mut best = Snapshot {
        score: T::infinity(),
        x: x.iter().map(|v| *v / tau).collect(),
        y: y.clone(),
        z: z.clone(),
        s: s.clone(),
        pres: T::infinity(),
        dres: T::infinity(),
        gap: T::infinity(),
        iterations: 0,
    };

    let dot3 = |v: &[T]| dot(&sf.c, &v[..n]) + dot(&sf.b, &v[n..n + p]) + dot(&sf.h, &v[n + p..]);

    for iter in 0..=opts.max_iter {
        // Residuals of the homogeneous embedding.
        let mut rx = sf.a.matvec_transpose(&y);
        let gtz = sf.g.matvec_transpose(&z);
        for i in 0..n {
            rx[i] += gtz[i] + sf.c[i] * tau;
        }
        let ax = sf.a.matvec(&x);
        let ry: Vec<T> = ax.iter().zip(&sf.b).map(|(axi, bi)| *axi - *bi * tau).collect();
        let gx = sf.g.matvec(&x);
        let rz: Vec<T> = gx
            .iter()
            .zip(&s)
            .zip(&sf.h)
            .map(|((gxi, si), hi)| *gxi + *si - *hi * tau)
            .collect();
        let rtau = dot(&sf.c, &x) + dot(&sf.b, &y) + dot(&sf.h, &z) + kappa;
        let mu = (dot(&s, &z) + tau * kappa) / (degree + T::one());

        let inv_tau = T::one() / tau;
        let pres = (inf_norm(&ry) * inv_tau / (T::one() + norm_b))
            .max(inf_norm(&rz) * inv_tau / (T::one() + norm_h));
        let dres = inf_norm(&rx) * inv_tau / (T::one() + norm_c);
        let gap = dot(&s, &z) * inv_tau * inv_tau;
        let pobj = dot(&sf.c, &x) * inv_tau;

        if pres <= opts.tol && dres <= opts.tol && gap <= opts.tol * (T::one() + pobj.abs()) {
            return RawOutcome {
                status: SolveStatus::Optimal,
                x: x.iter().map(|v| *v * inv_tau).collect(),
                y: y.iter().map(|v| *v * inv_tau).collect(),
                z: z.iter().map(|v| *v * inv_tau).collect(),
                s: s.iter().map(|v| *v * inv_tau).collect(),
                iterations: iter,
                pres,
                dres,
                gap,
            };
        }

        // Certificates live in the homogeneous variables.
        let by_hz = dot(&sf.b, &y) + dot(&sf.h, &z);
        if by_hz < -small {
            let scale_cert = -T::one() / by_hz;
            let atygz: Vec<T> = rx.iter().zip(&sf.c).map(|(ri, ci)| *ri - *ci * tau).collect();
            if inf_norm(&atygz) * scale_cert.abs() <= opts.tol {
                return RawOutcome {
                    status: SolveStatus::PrimalInfeasible,
                    x: vec![T::zero(); n],
                    y: y.iter().map(|v| *v * scale_cert).collect(),
                    z: z.iter().map(|v| *v * scale_cert).collect(),
                    s: vec![T::zero(); m],
                    iterations: iter,
                    pres,
                    dres,
                    gap,
                };
            }
        }
        let cx = dot(&sf.c, &x);
        if cx < -small {
            let scale_ray = -T::one() / cx;
            let gxs: Vec<T> = gx.iter().zip(&s).map(|(a, b)| *a + *b).collect();
            if inf_norm(&ax).max(inf_norm(&gxs)) * scale_ray <= opts.tol {
                return RawOutcome {
                    status: SolveStatus::Unbounded,
                    x: x.iter().map(|v| *v * scale_ray).collect(),
                    y: vec![T::zero(); p],
                    z: vec![T::zero(); m],
                    s: s.iter().map(|v| *v * scale_ray).collect(),
                    iterations: iter,
                    pres,
                    dres,
                    gap,
                };
            }
        }

        let score = pres.max(dres).max(gap.abs() / (T::one() + pobj.abs()));
        if score < best.score {
            best = Snapshot {
                score,
                x: x.iter().map(|v| *v * inv_tau).collect(),
                y: y.iter().map(|v| *v * inv_tau).collect(),
                z: z.iter().map(|v| *v * inv_tau).collect(),
                s: s.iter().map(|v| *v * inv_tau).collect(),
                pres,
                dres,
                gap,
                iterations: iter,
            };
        }

        // Near the numerical floor the directions are noise; once the best
        // score has not improved for a while, stepping further only drifts.
        if iter == opts.max_iter || iter >= best.iterations + 10 {
            break;
        }

        let scaling = match Scaling::compute(&sf.layout, &s, &z) {
            Some(sc) => sc,
            None => return breakdown_outcome(best),
        };
        let lambda = scaling.lambda(&z);

        let k0 = assemble(&scaling);
        let lu = match factor_with_reg(&k0) {
            Some(lu) => lu,
            None => return breakdown_outcome(best),
        };

        // Direction attached to the tau column.
        let mut rhs1 = vec![T::zero(); nn];
        for i in 0..n {
            rhs1[i] = -sf.c[i];
        }
        rhs1[n..n + p].copy_from_slice(&sf.b);
        rhs1[n + p..].copy_from_slice(&sf.h);
        let v1 = kkt_solve(&lu, &k0, &rhs1);
        let denom = dot3(&v1) - kappa / tau;
        if !denom.is_finite() || denom.abs() < real::<T>(1e-300) {
            return breakdown_outcome(best);
        }

        // Affine (predictor) direction.
        let mut rhs2 = vec![T::zero(); nn];
        for i in 0..n {
            rhs2[i] = -rx[i];
        }
        for i in 0..p {
            rhs2[n + i] = -ry[i];
        }
        for i in 0..m {
            rhs2[n + p + i] = -rz[i] + s[i];
        }
        let v2 = kkt_solve(&lu, &k0, &rhs2);
        let dtau_a = (-rtau + kappa - dot3(&v2)) / denom;
        let dx_a: Vec<T> = (0..n).map(|i| v2[i] + dtau_a * v1[i]).collect();
        let dy_a: Vec<T> = (0..p).map(|i| v2[n + i] + dtau_a * v1[n + i]).collect();
        let dz_a: Vec<T> = (0..m).map(|i| v2[n + p + i] + dtau_a * v1[n + p + i]).collect();
        let w2dz_a = scaling.apply_sq(&dz_a);
        let ds_a: Vec<T> = (0..m).map(|i| -s[i] - w2dz_a[i]).collect();
        let dkappa_a = -kappa - kappa / tau * dtau_a;
        if !(all_finite(&dx_a) && all_finite(&dy_a) && all_finite(&dz_a) && all_finite(&ds_a)) {
            return breakdown_outcome(best);
        }

        let mut alpha_aff = max_step(&sf.layout, &s, &ds_a).min(max_step(&sf.layout, &z, &dz_a));
        if dtau_a < T::zero() {
            alpha_aff = alpha_aff.min(-tau / dtau_a);
        }
        if dkappa_a < T::zero() {
            alpha_aff = alpha_aff.min(-kappa / dkappa_a);
        }
        alpha_aff = alpha_aff.min(T::one());
        let one_minus = T::one() - alpha_aff;
        let sigma = (one_minus * one_minus * one_minus).max(T::zero()).min(T::one());
        let f = T::one() - sigma;

        // Combined (corrector) direction.
        let winv_ds = scaling.apply_inv(&ds_a);
        let w_dz = scaling.apply(&dz_a);
        let correction = jordan_mul(&sf.layout, &winv_ds, &w_dz);
        let lambda_sq = jordan_mul(&sf.layout, &lambda, &lambda);
        let sigma_mu = sigma * mu;
        let dst: Vec<T> = (0..m)
            .map(|i| sigma_mu * e[i] - lambda_sq[i] - correction[i])
            .collect();
        let dkt = sigma_mu - tau * kappa - dtau_a * dkappa_a;
        let wlds = scaling.apply(&jordan_solve(&sf.layout, &lambda, &dst));

        let mut rhs3 = vec![T::zero(); nn];
        for i in 0..n {
            rhs3[i] = -f * rx[i];
        }
        for i in 0..p {
            rhs3[n + i] = -f * ry[i];
        }
        for i in 0..m {
            rhs3[n + p + i] = -f * rz[i] - wlds[i];
        }
        let v3 = kkt_solve(&lu, &k0, &rhs3);
        let dtau = (-f * rtau - dkt / tau - dot3(&v3)) / denom;
        let dx: Vec<T> = (0..n).map(|i| v3[i] + dtau * v1[i]).collect();
        let dy: Vec<T> = (0..p).map(|i| v3[n + i] + dtau * v1[n + i]).collect();
        let dz: Vec<T> = (0..m).map(|i| v3[n + p + i] + dtau * v1[n + p + i]).collect();
        let w2dz = scaling.apply_sq(&dz);
        let ds: Vec<T> = (0..m).map(|i| wlds[i] - w2dz[i]).collect();
        let dkappa = (dkt - kappa * dtau) / tau;
        if !(all_finite(&dx) && all_finite(&dy) && all_finite(&dz) && all_finite(&ds))
            || !dtau.is_finite()
            || !dkappa.is_finite()
        {
            return breakdown_outcome(best);
        }

        let mut alpha = max_step(&sf.layout, &s, &ds).min(max_step(&sf.layout, &z, &dz));
        if dtau < T::zero() {
            alpha = alpha.min(-tau / dtau);
        }
        if dkappa < T::zero() {
            alpha = alpha.min(-kappa / dkappa);
        }
        alpha = (alpha * real::<T>(0.99)).min(T::one());

        let interior_at = |alpha: T| {
            let s_try: Vec<T> = (0..m).map(|i| s[i] + alpha * ds[i]).collect();
            let z_try: Vec<T> = (0..m).map(|i| z[i] + alpha * dz[i]).collect();
            interior_margin(&sf.layout, &s_try) > T::zero()
                && interior_margin(&sf.layout, &z_try) > T::zero()
                && tau + alpha * dtau > T::zero()
                && kappa + alpha * dkappa > T::zero()
        };
        let mut halvings = 0;
        while !interior_at(alpha) {
            alpha = alpha / (T::one() + T::one());
            halvings += 1;
            if halvings > 30 {
                return breakdown_outcome(best);
            }
        }

        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        for i in 0..p {
            y[i] += alpha * dy[i];
        }
        for i in 0..m {
            z[i] += alpha * dz[i];
            s[i] += alpha * ds[i];
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        if !tau.is_finite() || tau <= T::zero() {
            return breakdown_outcome(best);
        }
    }

    outcome_from_best(SolveStatus::IterationLimit, best)
}

/// Solves a cone program. Structural problems (bad indices, NaNs) are
/// errors; numerical outcomes are reported in [`ConeSolution::status`].
pub fn solve<T: Real>(
    prog: &ConicProgram<T>,
    opts: &ConeSolverOptions<T>,
) -> Result<ConeSolution<T>, ProgramError> {
    let sf = lower(prog)?;
    let raw = solve_std(&sf, opts);
    let objective = match raw.status {
        SolveStatus::Optimal | SolveStatus::IterationLimit => prog
            .objective
            .iter()
            .fold(prog.objective_constant, |acc, &(i, coeff)| {
                acc + coeff * raw.x[i]
            }),
        _ => T::nan(),
    };
    Ok(ConeSolution {
        status: raw.status,
        x: raw.x,
        objective,
        iterations: raw.iterations,
        primal_residual: raw.pres,
        dual_residual: raw.dres,
        gap: raw.gap,
        y: raw.y,
        z: raw.z,
        s: raw.s,
    })
}

/// Recomputes residuals of a solution directly from the program data,
/// independent of anything the solver reported. Meaningful for solutions
/// with status `Optimal` or `IterationLimit`.
pub fn certificate<T: Real>(
    prog: &ConicProgram<T>,
    sol: &ConeSolution<T>,
) -> Result<CertificateReport<T>, ProgramError> {
    let sf = lower(prog)?;
    let ax = sf.a.matvec(&sol.x);
    let eq_res: Vec<T> = ax.iter().zip(&sf.b).map(|(a, b)| *a - *b).collect();
    let gx = sf.g.matvec(&sol.x);
    let cone_res: Vec<T> = gx
        .iter()
        .zip(&sol.s)
        .zip(&sf.h)
        .map(|((a, si), hi)| *a + *si - *hi)
        .collect();
    let primal_residual = (inf_norm(&eq_res) / (T::one() + inf_norm(&sf.b)))
        .max(inf_norm(&cone_res) / (T::one() + inf_norm(&sf.h)));
    let mut dual_vec = sf.a.matvec_transpose(&sol.y);
    let gtz = sf.g.matvec_transpose(&sol.z);
    for i in 0..sf.n {
        dual_vec[i] += gtz[i] + sf.c[i];
    }
    let dual_residual = inf_norm(&dual_vec) / (T::one() + inf_norm(&sf.c));
    let cx = dot(&sf.c, &sol.x);
    let gap = dot(&sol.s, &sol.z).abs() / (T::one() + cx.abs());
    let s_margin = interior_margin(&sf.layout, &sol.s);
    let z_margin = interior_margin(&sf.layout, &sol.z);
    let cone_violation = (-s_margin).max(-z_margin).max(T::zero());
    Ok(CertificateReport {
        primal_residual,
        dual_residual,
        gap,
        cone_violation,
    })
}
