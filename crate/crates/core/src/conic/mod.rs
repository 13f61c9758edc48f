//! Cone-program builder and an interior-point solver for problems with a
//! linear objective over nonnegative, second-order and rotated second-order
//! cone constraints.
//!
//! Programs are assembled from named variable blocks and labeled constraints,
//! then solved with [`solve`]. The solver reduces everything to the standard
//! form `min c'x  s.t.  Ax = b, Gx + s = h, s in K` and runs a homogeneous
//! self-dual primal-dual method, so it can certify infeasibility and
//! unboundedness as well as optimality.

pub mod dense;
mod solver;

use std::fmt::Write as _;

use thiserror::Error;

pub use solver::{
    certificate, solve, CertificateReport, ConeSolution, ConeSolverOptions, SolveStatus,
};

use crate::Real;

/// Handle to a variable block added to a [`ConicProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockId(usize);

/// Handle to a single scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(pub(crate) usize);

impl VarId {
    /// Position of the variable in the stacked solution vector.
    pub fn index(self) -> usize {
        self.0
    }
}

/// Contiguous run of scalar variables sharing a name.
#[derive(Debug, Clone, PartialEq)]
pub struct VarBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Optimization direction of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Affine expression `sum coeff_i * x_i + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinExpr<T> {
    pub(crate) terms: Vec<(usize, T)>,
    pub(crate) constant: T,
}

impl<T: Real> LinExpr<T> {
    pub fn new() -> Self {
        Self {
            terms: Vec::new(),
            constant: T::zero(),
        }
    }

    pub fn constant(c: T) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(var: VarId, coeff: T) -> Self {
        Self {
            terms: vec![(var.0, coeff)],
            constant: T::zero(),
        }
    }

    pub fn plus(mut self, var: VarId, coeff: T) -> Self {
        self.terms.push((var.0, coeff));
        self
    }

    pub fn plus_constant(mut self, c: T) -> Self {
        self.constant += c;
        self
    }

    /// Value of the expression on a full variable vector.
    pub fn eval(&self, x: &[T]) -> T {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }
}

impl<T: Real> Default for LinExpr<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// A single labeled constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub label: String,
    pub kind: ConstraintKind<T>,
}

/// Constraint forms accepted by the builder.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind<T> {
    /// `expr == 0`.
    Eq(LinExpr<T>),
    /// `expr >= 0`.
    NonNeg(LinExpr<T>),
    /// `|| u || <= t`.
    Soc { t: LinExpr<T>, u: Vec<LinExpr<T>> },
    /// `|| u ||^2 <= 2 s t` with `s, t >= 0`.
    Rsoc {
        s: LinExpr<T>,
        t: LinExpr<T>,
        u: Vec<LinExpr<T>>,
    },
}

/// Structural errors raised while building or lowering a program.
#[derive(Debug, Error)]
pub enum ProgramError {
    #[error("constraint '{label}' references variable {index}, but the program has {n_vars}")]
    UnknownVariable {
        label: String,
        index: usize,
        n_vars: usize,
    },
    #[error("non-finite coefficient in {place}")]
    NonFinite { place: String },
    #[error("program has no variables")]
    NoVariables,
}

/// A cone program under construction.
#[derive(Debug, Clone)]
pub struct ConicProgram<T: Real> {
    blocks: Vec<VarBlock>,
    n_vars: usize,
    sense: Sense,
    objective: Vec<(usize, T)>,
    objective_constant: T,
    constraints: Vec<Constraint<T>>,
}

impl<T: Real> ConicProgram<T> {
    pub fn minimize() -> Self {
        Self::with_sense(Sense::Minimize)
    }

    pub fn maximize() -> Self {
        Self::with_sense(Sense::Maximize)
    }

    fn with_sense(sense: Sense) -> Self {
        Self {
            blocks: Vec::new(),
            n_vars: 0,
            sense,
            objective: Vec::new(),
            objective_constant: T::zero(),
            constraints: Vec::new(),
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Adds a named block of `len` scalar variables.
    pub fn add_block(&mut self, name: &str, len: usize) -> BlockId {
        let id = BlockId(self.blocks.len());
        self.blocks.push(VarBlock {
            name: name.to_string(),
            offset: self.n_vars,
            len,
        });
        self.n_vars += len;
        id
    }

    /// The `i`-th variable of a block.
    pub fn var(&self, block: BlockId, i: usize) -> VarId {
        let b = &self.blocks[block.0];
        assert!(i < b.len, "index {i} out of range for block '{}'", b.name);
        VarId(b.offset + i)
    }

    pub fn block(&self, block: BlockId) -> &VarBlock {
        &self.blocks[block.0]
    }

    pub fn block_by_name(&self, name: &str) -> Option<BlockId> {
        self.blocks
            .iter()
            .position(|b| b.name == name)
            .map(BlockId)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    /// Adds `coeff * var` to the objective.
    pub fn objective_term(&mut self, var: VarId, coeff: T) {
        self.objective.push((var.0, coeff));
    }

    /// Adds a constant to the objective; it only affects reported values.
    pub fn objective_offset(&mut self, value: T) {
        self.objective_constant += value;
    }

    pub fn objective_constant(&self) -> T {
        self.objective_constant
    }

    pub fn eq(&mut self, label: impl Into<String>, expr: LinExpr<T>) {
        self.constraints.push(Constraint {
            label: label.into(),
            kind: ConstraintKind::Eq(expr),
        });
    }

    pub fn nonneg(&mut self, label: impl Into<String>, expr: LinExpr<T>) {
        self.constraints.push(Constraint {
            label: label.into(),
            kind: ConstraintKind::NonNeg(expr),
        });
    }

    pub fn soc(&mut self, label: impl Into<String>, t: LinExpr<T>, u: Vec<LinExpr<T>>) {
        self.constraints.push(Constraint {
            label: label.into(),
            kind: ConstraintKind::Soc { t, u },
        });
    }

    pub fn rsoc(
        &mut self,
        label: impl Into<String>,
        s: LinExpr<T>,
        t: LinExpr<T>,
        u: Vec<LinExpr<T>>,
    ) {
        self.constraints.push(Constraint {
            label: label.into(),
            kind: ConstraintKind::Rsoc { s, t, u },
        });
    }

    /// Checks indices and finiteness of every coefficient.
    pub fn validate(&self) -> Result<(), ProgramError> {
        if self.n_vars == 0 {
            return Err(ProgramError::NoVariables);
        }
        for &(i, c) in &self.objective {
            if i >= self.n_vars {
                return Err(ProgramError::UnknownVariable {
                    label: "objective".into(),
                    index: i,
                    n_vars: self.n_vars,
                });
            }
            if !c.is_finite() {
                return Err(ProgramError::NonFinite {
                    place: "objective".into(),
                });
            }
        }
        if !self.objective_constant.is_finite() {
            return Err(ProgramError::NonFinite {
                place: "objective".into(),
            });
        }
        for con in &self.constraints {
            let exprs: Vec<&LinExpr<T>> = match &con.kind {
                ConstraintKind::Eq(e) | ConstraintKind::NonNeg(e) => vec![e],
                ConstraintKind::Soc { t, u } => {
                    let mut v = vec![t];
                    v.extend(u.iter());
                    v
                }
                ConstraintKind::Rsoc { s, t, u } => {
                    let mut v = vec![s, t];
                    v.extend(u.iter());
                    v
                }
            };
            for e in exprs {
                if !e.constant.is_finite() {
                    return Err(ProgramError::NonFinite {
                        place: format!("constraint '{}'", con.label),
                    });
                }
                for &(i, c) in &e.terms {
                    if i >= self.n_vars {
                        return Err(ProgramError::UnknownVariable {
                            label: con.label.clone(),
                            index: i,
                            n_vars: self.n_vars,
                        });
                    }
                    if !c.is_finite() {
                        return Err(ProgramError::NonFinite {
                            place: format!("constraint '{}'", con.label),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Values of one block extracted from a full variable vector.
    pub fn block_values(&self, x: &[T], block: BlockId) -> Vec<T> {
        let b = &self.blocks[block.0];
        x[b.offset..b.offset + b.len].to_vec()
    }

    fn var_name(&self, index: usize) -> String {
        for b in &self.blocks {
            if index >= b.offset && index < b.offset + b.len {
                return format!("{}[{}]", b.name, index - b.offset);
            }
        }
        format!("x[{index}]")
    }

    fn render_expr(&self, e: &LinExpr<T>) -> String {
        let mut out = String::new();
        for (pos, &(i, c)) in e.terms.iter().enumerate() {
            if pos > 0 {
                out.push_str(" + ");
            }
            let _ = write!(out, "{}*{}", c, self.var_name(i));
        }
        if e.constant != T::zero() || e.terms.is_empty() {
            if !out.is_empty() {
                out.push_str(" + ");
            }
            let _ = write!(out, "{}", e.constant);
        }
        out
    }

    /// Human-readable rendering of the whole program, one constraint per
    /// line, for debugging subproblem assembly.
    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
        };
        let mut obj = LinExpr::new();
        for &(i, c) in &self.objective {
            obj = obj.plus(VarId(i), c);
        }
        obj = obj.plus_constant(self.objective_constant);
        let _ = writeln!(out, "{sense} {}", self.render_expr(&obj));
        for b in &self.blocks {
            let _ = writeln!(out, "block {} : {} vars", b.name, b.len);
        }
        for con in &self.constraints {
            match &con.kind {
                ConstraintKind::Eq(e) => {
                    let _ = writeln!(out, "eq   {}: {} == 0", con.label, self.render_expr(e));
                }
                ConstraintKind::NonNeg(e) => {
                    let _ = writeln!(out, "lin  {}: {} >= 0", con.label, self.render_expr(e));
                }
                ConstraintKind::Soc { t, u } => {
                    let parts: Vec<String> = u.iter().map(|e| self.render_expr(e)).collect();
                    let _ = writeln!(
                        out,
                        "soc  {}: ||{}|| <= {}",
                        con.label,
                        parts.join(", "),
                        self.render_expr(t)
                    );
                }
                ConstraintKind::Rsoc { s, t, u } => {
                    let parts: Vec<String> = u.iter().map(|e| self.render_expr(e)).collect();
                    let _ = writeln!(
                        out,
                        "rsoc {}: ||{}||^2 <= 2*({})*({})",
                        con.label,
                        parts.join(", "),
                        self.render_expr(s),
                        self.render_expr(t)
                    );
                }
            }
        }
        out
    }
}
