//! Solver-independent conic programs.
//!
//! A [`ConicProgram`] holds scalar variables with optional bounds, two-sided
//! linear rows, cone blocks (second-order, rotated second-order, PSD) and a
//! linear objective to maximise. Backends translate it into their own form.

mod clarabel_backend;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use nalgebra::DMatrix;
use thiserror::Error;

pub use clarabel_backend::ClarabelBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Affine expression `Σ coef·x + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn term(v: VarId, coef: f64) -> Self {
        LinExpr { terms: vec![(v, coef)], constant: 0.0 }
    }

    pub fn add(mut self, v: VarId, coef: f64) -> Self {
        self.push(v, coef);
        self
    }

    pub fn push(&mut self, v: VarId, coef: f64) {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
    }

    pub fn add_expr(mut self, other: &LinExpr, scale: f64) -> Self {
        for &(v, c) in &other.terms {
            self.push(v, scale * c);
        }
        self.constant += scale * other.constant;
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        LinExpr::new().add_expr(self, s)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>() + self.constant
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn compact(&self) -> LinExpr {
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *merged.entry(v).or_insert(0.0) += c;
        }
        LinExpr {
            terms: merged.into_iter().filter(|&(_, c)| c != 0.0).collect(),
            constant: self.constant,
        }
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::term(v, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// `lo ≤ expr ≤ hi`; either side may be infinite. `lo == hi` is an equality.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub expr: LinExpr,
    pub lo: f64,
    pub hi: f64,
    pub tag: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConeKind {
    SecondOrder,
    RotatedSecondOrder,
    Psd,
}

/// Handle to a PSD block. Entries are lower-triangle variables in row-major
/// order: entry `(i, j)` with `j ≤ i` sits at `i(i+1)/2 + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub dim: usize,
    pub entries: Vec<VarId>,
}

impl PsdBlock {
    pub fn entry(&self, i: usize, j: usize) -> VarId {
        let (i, j) = if j <= i { (i, j) } else { (j, i) };
        self.entries[i * (i + 1) / 2 + j]
    }

    /// Dense symmetric matrix of the block's values.
    pub fn value(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| x[self.entry(i, j).0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// `‖tail‖₂ ≤ head`.
    SecondOrder { head: LinExpr, tail: Vec<LinExpr> },
    /// `‖tail‖₂² ≤ u·v` with `u, v ≥ 0`.
    Rotated { u: LinExpr, v: LinExpr, tail: Vec<LinExpr> },
    Psd(PsdBlock),
}

impl Cone {
    pub fn kind(&self) -> ConeKind {
        match self {
            Cone::SecondOrder { .. } => ConeKind::SecondOrder,
            Cone::Rotated { .. } => ConeKind::RotatedSecondOrder,
            Cone::Psd(_) => ConeKind::Psd,
        }
    }
}

/// Rewrites `‖tail‖² ≤ u·v, u,v ≥ 0` as `‖((u−v)/2, tail)‖₂ ≤ (u+v)/2`.
pub fn rotated_to_soc(u: &LinExpr, v: &LinExpr, tail: &[LinExpr]) -> (LinExpr, Vec<LinExpr>) {
    let head = u.scaled(0.5).add_expr(v, 0.5);
    let mut rows = Vec::with_capacity(tail.len() + 1);
    rows.push(u.scaled(0.5).add_expr(v, -0.5));
    rows.extend(tail.iter().cloned());
    (head, rows)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    pub cones: Vec<Cone>,
    /// Maximised.
    pub objective: LinExpr,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lo: f64, hi: f64) -> VarId {
        self.vars.push(Variable { name: name.into(), lo, hi });
        VarId(self.vars.len() - 1)
    }

    pub fn free_var(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn fix_var(&mut self, v: VarId, value: f64) {
        self.vars[v.0].lo = value;
        self.vars[v.0].hi = value;
    }

    pub fn add_row(&mut self, expr: LinExpr, lo: f64, hi: f64, tag: &'static str) {
        self.rows.push(Row { expr, lo, hi, tag });
    }

    pub fn add_eq(&mut self, expr: LinExpr, rhs: f64, tag: &'static str) {
        self.add_row(expr, rhs, rhs, tag);
    }

    pub fn add_le(&mut self, expr: LinExpr, rhs: f64, tag: &'static str) {
        self.add_row(expr, f64::NEG_INFINITY, rhs, tag);
    }

    pub fn add_ge(&mut self, expr: LinExpr, rhs: f64, tag: &'static str) {
        self.add_row(expr, rhs, f64::INFINITY, tag);
    }

    pub fn add_soc(&mut self, head: LinExpr, tail: Vec<LinExpr>) {
        self.cones.push(Cone::SecondOrder { head, tail });
    }

    pub fn add_rotated(&mut self, u: LinExpr, v: LinExpr, tail: Vec<LinExpr>) {
        self.cones.push(Cone::Rotated { u, v, tail });
    }

    /// Declares a `dim × dim` PSD matrix variable and returns its handle.
    pub fn add_psd(&mut self, name: &str, dim: usize) -> PsdBlock {
        assert!(dim >= 1, "PSD blocks need dimension at least 1");
        let mut entries = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                entries.push(self.free_var(format!("{name}[{i},{j}]")));
            }
        }
        let block = PsdBlock { dim, entries };
        self.cones.push(Cone::Psd(block.clone()));
        block
    }

    pub fn count_rows(&self, tag: &str) -> usize {
        self.rows.iter().filter(|r| r.tag == tag).count()
    }

    pub fn count_cones(&self, kind: ConeKind) -> usize {
        self.cones.iter().filter(|c| c.kind() == kind).count()
    }

    pub fn psd_blocks(&self) -> impl Iterator<Item = &PsdBlock> {
        self.cones.iter().filter_map(|c| match c {
            Cone::Psd(b) => Some(b),
            _ => None,
        })
    }

    /// Checks that every expression refers to a declared variable.
    pub fn validate(&self) -> Result<(), SolveError> {
        let n = self.vars.len();
        let bad = |e: &LinExpr| e.terms.iter().any(|(v, c)| v.0 >= n || !c.is_finite());
        let mut exprs: Vec<&LinExpr> = vec![&self.objective];
        exprs.extend(self.rows.iter().map(|r| &r.expr));
        for cone in &self.cones {
            match cone {
                Cone::SecondOrder { head, tail } => {
                    exprs.push(head);
                    exprs.extend(tail);
                }
                Cone::Rotated { u, v, tail } => {
                    exprs.push(u);
                    exprs.push(v);
                    exprs.extend(tail);
                }
                Cone::Psd(b) => {
                    if b.entries.iter().any(|v| v.0 >= n) {
                        return Err(SolveError::Invalid("PSD block references an unknown variable".into()));
                    }
                }
            }
        }
        if exprs.into_iter().any(bad) {
            return Err(SolveError::Invalid("expression references an unknown variable".into()));
        }
        Ok(())
    }

    /// Largest violation of any bound, row or cone at `x`, evaluated directly
    /// from the program data. PSD blocks contribute their most negative eigenvalue.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        let range = |val: f64, lo: f64, hi: f64| (lo - val).max(val - hi).max(0.0);
        for (v, var) in self.vars.iter().enumerate() {
            worst = worst.max(range(x[v], var.lo, var.hi));
        }
        for row in &self.rows {
            worst = worst.max(range(row.expr.eval(x), row.lo, row.hi));
        }
        let norm = |t: &[LinExpr]| t.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
        for cone in &self.cones {
            let viol = match cone {
                Cone::SecondOrder { head, tail } => norm(tail) - head.eval(x),
                Cone::Rotated { u, v, tail } => {
                    let (head, rows) = rotated_to_soc(u, v, tail);
                    norm(&rows) - head.eval(x)
                }
                Cone::Psd(b) => {
                    let m = b.value(x);
                    -m.symmetric_eigenvalues().min()
                }
            };
            worst = worst.max(viol);
        }
        worst
    }
}

impl fmt::Display for ConicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |e: &LinExpr| {
            let mut s = String::new();
            for &(v, c) in &e.terms {
                s.push_str(&format!("{c:+} {} ", self.vars[v.0].name));
            }
            if e.constant != 0.0 || e.terms.is_empty() {
                s.push_str(&format!("{:+}", e.constant));
            }
            s.trim_end().to_string()
        };
        writeln!(f, "maximize {}", show(&self.objective))?;
        writeln!(f, "variables ({})", self.vars.len())?;
        for var in &self.vars {
            writeln!(f, "  {} in [{}, {}]", var.name, var.lo, var.hi)?;
        }
        writeln!(f, "rows ({})", self.rows.len())?;
        for row in &self.rows {
            writeln!(f, "  [{}] {} <= {} <= {}", row.tag, row.lo, show(&row.expr), row.hi)?;
        }
        writeln!(f, "cones ({})", self.cones.len())?;
        for cone in &self.cones {
            match cone {
                Cone::SecondOrder { head, tail } => {
                    let t: Vec<_> = tail.iter().map(show).collect();
                    writeln!(f, "  soc |({})| <= {}", t.join(", "), show(head))?
                }
                Cone::Rotated { u, v, tail } => {
                    let t: Vec<_> = tail.iter().map(show).collect();
                    writeln!(f, "  rsoc |({})|^2 <= ({}) * ({})", t.join(", "), show(u), show(v))?
                }
                Cone::Psd(b) => writeln!(
                    f,
                    "  psd dim {} from {}",
                    b.dim,
                    self.vars[b.entries[0].0].name
                )?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical-failure",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Objective value (maximisation sense); NaN unless optimal.
    pub objective: f64,
    /// Primal values, present iff the status is optimal.
    pub primal: Option<Vec<f64>>,
    /// Wall time of the backend call.
    pub solve_time: Duration,
    pub iterations: u32,
    /// Backend-specific status text.
    pub diagnostics: String,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("backend {backend} does not support {kind:?} cones")]
    UnsupportedCone { backend: String, kind: ConeKind },
    #[error("invalid program: {0}")]
    Invalid(String),
    #[error("solver failure: {0}")]
    Backend(String),
}

/// Contract for conic solvers.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn supports(&self, kind: ConeKind) -> bool;
    /// Feasibility tolerance the backend aims for.
    fn feasibility_tolerance(&self) -> f64;
    /// Solves a validated program whose cones are all supported.
    fn solve_program(&self, program: &ConicProgram) -> Result<SolveReport, SolveError>;
}

/// Validates `program`, checks cone support and hands it to `backend`.
pub fn solve(program: &ConicProgram, backend: &dyn Backend) -> Result<SolveReport, SolveError> {
    program.validate()?;
    if let Some(kind) = program.cones.iter().map(Cone::kind).find(|&k| !backend.supports(k)) {
        return Err(SolveError::UnsupportedCone { backend: backend.name().to_string(), kind });
    }
    backend.solve_program(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct LpOnly;

    impl Backend for LpOnly {
        fn name(&self) -> &str {
            "lp-only"
        }
        fn supports(&self, kind: ConeKind) -> bool {
            kind == ConeKind::SecondOrder
        }
        fn feasibility_tolerance(&self) -> f64 {
            1e-8
        }
        fn solve_program(&self, _: &ConicProgram) -> Result<SolveReport, SolveError> {
            unreachable!("cone check must reject the program first")
        }
    }

    #[test]
    fn unsupported_cone_is_rejected() {
        let mut p = ConicProgram::new();
        p.add_psd("W", 2);
        let err = solve(&p, &LpOnly).unwrap_err();
        assert!(matches!(err, SolveError::UnsupportedCone { kind: ConeKind::Psd, .. }));
    }

    #[test]
    fn unknown_variable_is_rejected() {
        let mut p = ConicProgram::new();
        p.add_le(LinExpr::term(VarId(3), 1.0), 1.0, "bad");
        assert!(matches!(p.validate(), Err(SolveError::Invalid(_))));
    }

    #[test]
    fn rotated_rows_match_product() {
        let check = |u: f64, v: f64, t: &[f64]| {
            let (head, rows) = rotated_to_soc(
                &LinExpr::constant(u),
                &LinExpr::constant(v),
                &t.iter().map(|&c| LinExpr::constant(c)).collect::<Vec<_>>(),
            );
            let norm = rows.iter().map(|r| r.constant.powi(2)).sum::<f64>().sqrt();
            head.constant - norm
        };
        assert!(check(1.0, 1.0, &[1.0, 0.0]).abs() < 1e-12);
        assert!(check(1.0, 1.0, &[0.8, 0.6]).abs() < 1e-12);
        assert!(check(1.0, 0.5, &[1.0, 0.0]) < -1e-3);
    }

    #[test]
    fn psd_entry_indexing() {
        let mut p = ConicProgram::new();
        let b = p.add_psd("W", 3);
        assert_eq!(b.entries.len(), 6);
        assert_eq!(b.entry(2, 1), b.entry(1, 2));
        assert_eq!(b.entry(2, 1), b.entries[4]);
        assert_eq!(p.vars[b.entry(2, 0).0].name, "W[2,0]");
    }

    #[test]
    fn violation_detects_indefinite_block() {
        let mut p = ConicProgram::new();
        let b = p.add_psd("W", 2);
        let mut x = vec![0.0; 3];
        x[b.entry(0, 0).0] = 1.0;
        x[b.entry(1, 1).0] = 1.0;
        x[b.entry(1, 0).0] = 2.0;
        assert!((p.max_violation(&x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dump_lists_rows() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x", 0.0, 1.0);
        p.add_le(LinExpr::term(x, 2.0), 1.0, "cap");
        p.objective = x.into();
        let text = p.to_string();
        assert!(text.contains("[cap]"));
        assert!(text.contains("+2 x"));
    }
}
