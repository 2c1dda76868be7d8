use std::time::{Duration, Instant};

use thiserror::Error;

use super::{build_base_model, extract_welfare, penalty_coefficients, Commitment, MarketVariables, PenaltyCoefficients};
use crate::conic::{solve, Backend, ConicProgram, SolveError, SolveStatus};
use crate::netmodel::MarketInstance;
use crate::relax::{self, ArcFlows, Relaxation, RelaxError, VoltageProfile};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error("first-stage solve ended with status {status}: {diagnostics}")]
    FirstStage { status: SolveStatus, diagnostics: String },
    #[error("re-optimisation with rounded commitments ended with status {status}: {diagnostics}")]
    StageTwo {
        status: SolveStatus,
        diagnostics: String,
        first_stage: Box<MarketSolution>,
    },
}

/// Outcome of a market clearing under one relaxation.
#[derive(Debug, Clone)]
pub struct MarketSolution {
    pub relaxation: &'static str,
    pub status: SolveStatus,
    /// Full solver objective, penalties included.
    pub objective: f64,
    /// Penalty-free welfare.
    pub welfare: f64,
    pub penalty: f64,
    pub coeffs: PenaltyCoefficients,
    pub vars: MarketVariables,
    pub values: Vec<f64>,
    /// Commitment values `[seller][period]` used in this solve.
    pub commitment: Vec<Vec<f64>>,
    pub flows: ArcFlows,
    pub voltages: VoltageProfile,
    /// Second eigenvalue over the first, for SDP relaxations (worst period).
    pub rank_ratio: Option<f64>,
    /// Largest constraint violation of the returned point, re-evaluated from the program.
    pub max_violation: f64,
    /// Solver wall time of each stage.
    pub stage_times: Vec<Duration>,
    /// Time spent building programs, summed over stages.
    pub build_time: Duration,
}

impl MarketSolution {
    pub fn solver_time(&self) -> Duration {
        self.stage_times.iter().sum()
    }

    pub fn value(&self, v: crate::conic::VarId) -> f64 {
        self.values[v.0]
    }
}

/// Rounds each commitment to the nearest integer; exact halves round up.
pub fn round_commitment(u: &[Vec<f64>]) -> Vec<Vec<f64>> {
    u.iter()
        .map(|row| row.iter().map(|&x| if x >= 0.5 { 1.0 } else { 0.0 }).collect())
        .collect()
}

struct Stage {
    solution: Option<MarketSolution>,
    status: SolveStatus,
    diagnostics: String,
}

fn run_stage(
    inst: &MarketInstance,
    relaxation: &Relaxation,
    backend: &dyn Backend,
    coeffs: &PenaltyCoefficients,
    commitment: &Commitment,
) -> Result<Stage, MarketError> {
    let start = Instant::now();
    let mut program = ConicProgram::new();
    let vars = build_base_model(inst, &mut program, coeffs, commitment);
    let emitted = relax::emit(relaxation, inst, &mut program, &vars, coeffs)?;
    let build_time = start.elapsed();
    let report = solve(&program, backend)?;
    let Some(x) = report.primal else {
        return Ok(Stage { solution: None, status: report.status, diagnostics: report.diagnostics });
    };
    let recon = emitted.reconstruct(inst, &x)?;
    let (welfare, penalty) = extract_welfare(&x, inst, &vars, coeffs);
    // Fixed commitments are reported as given rather than as the solver's near-integral values.
    let commitment = match commitment {
        Commitment::Fixed(u) => u.clone(),
        Commitment::Relaxed => vars.u.iter().map(|row| row.iter().map(|v| x[v.0]).collect()).collect(),
    };
    let flows = ArcFlows::from_values(&vars, &x);
    let solution = MarketSolution {
        relaxation: relaxation.tag(),
        status: report.status,
        objective: report.objective,
        welfare,
        penalty,
        coeffs: *coeffs,
        max_violation: program.max_violation(&x),
        commitment,
        flows,
        voltages: recon.profile,
        rank_ratio: recon.rank_ratio,
        vars,
        values: x,
        stage_times: vec![report.solve_time],
        build_time,
    };
    Ok(Stage { solution: Some(solution), status: report.status, diagnostics: report.diagnostics })
}

/// Solves with relaxed commitments, rounds them, fixes them and re-solves.
///
/// The returned solution is the second stage; its `stage_times` hold both solves.
pub fn solve_with_commitment_rounding(
    inst: &MarketInstance,
    relaxation: &Relaxation,
    backend: &dyn Backend,
) -> Result<MarketSolution, MarketError> {
    let coeffs = penalty_coefficients(inst);
    let first = run_stage(inst, relaxation, backend, &coeffs, &Commitment::Relaxed)?;
    let Some(first) = first.solution else {
        return Err(MarketError::FirstStage { status: first.status, diagnostics: first.diagnostics });
    };
    let fixed = round_commitment(&first.commitment);
    let second = run_stage(inst, relaxation, backend, &coeffs, &Commitment::Fixed(fixed))?;
    match second.solution {
        Some(mut sol) => {
            sol.stage_times.insert(0, first.stage_times[0]);
            sol.build_time += first.build_time;
            Ok(sol)
        }
        None => Err(MarketError::StageTwo {
            status: second.status,
            diagnostics: second.diagnostics,
            first_stage: Box::new(first),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_rule() {
        let u = vec![vec![0.9, 0.5, 0.49, 0.0, 1.0]];
        assert_eq!(round_commitment(&u), vec![vec![1.0, 1.0, 0.0, 0.0, 1.0]]);
    }

    #[test]
    fn rounding_is_idempotent() {
        let u = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(round_commitment(&u), u);
    }
}
