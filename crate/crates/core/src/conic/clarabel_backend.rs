use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{
    rotated_to_soc, Backend, Cone, ConeKind, ConicProgram, LinExpr, SolveError, SolveReport,
    SolveStatus,
};

/// Interior-point backend built on Clarabel.
#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub tol_feas: f64,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        ClarabelBackend {
            tol_feas: 1e-8,
            tol_gap_abs: 1e-8,
            tol_gap_rel: 1e-8,
            max_iter: 200,
            verbose: false,
        }
    }
}

/// Rows of `s = b − A x` accumulated in triplet form.
#[derive(Default)]
struct Assembly {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Assembly {
    /// Appends a row whose slack equals `sign * (expr − offset)`.
    fn push(&mut self, expr: &LinExpr, sign: f64, offset: f64) {
        let r = self.b.len();
        for &(v, c) in &expr.terms {
            self.rows.push(r);
            self.cols.push(v.0);
            self.vals.push(-sign * c);
        }
        self.b.push(sign * (expr.constant - offset));
    }
}

fn map_status(status: SolverStatus) -> SolveStatus {
    match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    }
}

impl Backend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn supports(&self, _: ConeKind) -> bool {
        true
    }

    fn feasibility_tolerance(&self) -> f64 {
        self.tol_feas
    }

    fn solve_program(&self, program: &ConicProgram) -> Result<SolveReport, SolveError> {
        let n = program.n_vars();
        let mut asm = Assembly::default();
        let mut cones = Vec::new();

        // Equalities first, then one-sided inequalities, then the proper cones.
        let mut eqs = 0;
        for (v, var) in program.vars.iter().enumerate() {
            if var.lo == var.hi {
                asm.push(&LinExpr::term(super::VarId(v), 1.0), 1.0, var.lo);
                eqs += 1;
            }
        }
        for row in program.rows.iter().filter(|r| r.lo == r.hi) {
            asm.push(&row.expr, 1.0, row.lo);
            eqs += 1;
        }
        if eqs > 0 {
            cones.push(SupportedConeT::ZeroConeT(eqs));
        }
        let mut ineqs = 0;
        for (v, var) in program.vars.iter().enumerate() {
            if var.lo == var.hi {
                continue;
            }
            let x = LinExpr::term(super::VarId(v), 1.0);
            if var.lo.is_finite() {
                asm.push(&x, 1.0, var.lo);
                ineqs += 1;
            }
            if var.hi.is_finite() {
                asm.push(&x, -1.0, var.hi);
                ineqs += 1;
            }
        }
        for row in program.rows.iter().filter(|r| r.lo != r.hi) {
            if row.lo.is_finite() {
                asm.push(&row.expr, 1.0, row.lo);
                ineqs += 1;
            }
            if row.hi.is_finite() {
                asm.push(&row.expr, -1.0, row.hi);
                ineqs += 1;
            }
        }
        if ineqs > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(ineqs));
        }
        for cone in &program.cones {
            match cone {
                Cone::SecondOrder { head, tail } => {
                    asm.push(head, 1.0, 0.0);
                    tail.iter().for_each(|t| asm.push(t, 1.0, 0.0));
                    cones.push(SupportedConeT::SecondOrderConeT(tail.len() + 1));
                }
                Cone::Rotated { u, v, tail } => {
                    let (head, rows) = rotated_to_soc(u, v, tail);
                    asm.push(&head, 1.0, 0.0);
                    rows.iter().for_each(|t| asm.push(t, 1.0, 0.0));
                    cones.push(SupportedConeT::SecondOrderConeT(rows.len() + 1));
                }
                Cone::Psd(block) => {
                    // Clarabel's svec stacks the upper triangle by columns with
                    // off-diagonals scaled by √2, which is our lower-triangle row order.
                    for i in 0..block.dim {
                        for j in 0..=i {
                            let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                            asm.push(&LinExpr::term(block.entry(i, j), scale), 1.0, 0.0);
                        }
                    }
                    cones.push(SupportedConeT::PSDTriangleConeT(block.dim));
                }
            }
        }

        let m = asm.b.len();
        let a = CscMatrix::new_from_triplets(m, n, asm.rows, asm.cols, asm.vals);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(v, c) in &program.objective.terms {
            q[v.0] -= c;
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(self.verbose)
            .max_iter(self.max_iter)
            .tol_feas(self.tol_feas)
            .tol_gap_abs(self.tol_gap_abs)
            .tol_gap_rel(self.tol_gap_rel)
            .direct_solve_method("faer".to_string())
            .chordal_decomposition_enable(false)
            .build()
            .map_err(|e| SolveError::Backend(format!("settings: {e:?}")))?;

        let start = Instant::now();
        let mut solver = DefaultSolver::new(&p, &q, &a, &asm.b, &cones, settings)
            .map_err(|e| SolveError::Backend(format!("{e:?}")))?;
        solver.solve();
        let solve_time = start.elapsed();

        let sol = &solver.solution;
        let status = map_status(sol.status);
        let (objective, primal) = if status == SolveStatus::Optimal {
            let x = sol.x.clone();
            (program.objective.eval(&x), Some(x))
        } else {
            (f64::NAN, None)
        };
        Ok(SolveReport {
            status,
            objective,
            primal,
            solve_time,
            iterations: sol.iterations,
            diagnostics: format!(
                "{:?} after {} iterations (r_prim {:.2e}, r_dual {:.2e})",
                sol.status, sol.iterations, sol.r_prim, sol.r_dual
            ),
        })
    }
}
