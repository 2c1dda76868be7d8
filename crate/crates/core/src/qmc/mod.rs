//! Sobol sequences and sampled angle-difference bounds for the QC relaxation.

mod direction_numbers;
mod sampling;
mod sobol;

use std::time::Duration;

use thiserror::Error;

use crate::bench::phasor_error_rms;
use crate::conic::Backend;
use crate::market::{solve_with_commitment_rounding, MarketError, MarketSolution};
use crate::netmodel::MarketInstance;
use crate::relax::{AngleBounds, Relaxation};

pub use sampling::{
    partition_subgraphs, polar_flow, sample_bounds_global, sample_bounds_local, wrap_angle, LineSamples,
    SampleReport, SubgraphSamples, DEFAULT_EPS_THETA, DEFAULT_EPS_V, DEFAULT_LOG2_N, DEFAULT_TARGET_SIZE,
};
pub use sobol::{sobol, Sobol, SobolConfig, MAX_DIMENSION, MAX_LOG2};

#[derive(Debug, Error, PartialEq)]
pub enum QmcError {
    #[error("Sobol dimension {0} outside 1..={max}", max = MAX_DIMENSION)]
    Dimension(usize),
    #[error("2^{0} samples exceeds the supported maximum 2^{max}", max = MAX_LOG2)]
    SampleCount(u32),
    #[error("no sample satisfied the thermal limit of line {0}")]
    NoFeasibleSamples(String),
    #[error("reference profile does not match the instance's periods and buses")]
    ProfileShape,
}

/// Parameters of the local-sampling QC pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalQcConfig {
    pub eps_v: f64,
    pub eps_theta: f64,
    pub log2_n: u32,
    pub seed: u64,
}

impl Default for LocalQcConfig {
    fn default() -> Self {
        LocalQcConfig { eps_v: DEFAULT_EPS_V, eps_theta: DEFAULT_EPS_THETA, log2_n: DEFAULT_LOG2_N, seed: 0 }
    }
}

/// Result of [`solve_qc_local`].
#[derive(Debug, Clone)]
pub struct LocalQcOutcome {
    /// The QC solution, or the Jabr solution when falling back.
    pub solution: MarketSolution,
    /// Why the Jabr allocation was returned, if it was.
    pub fallback: Option<String>,
    pub bounds: Option<AngleBounds>,
    pub report: Option<SampleReport>,
    /// Solver time of the Jabr pre-solve.
    pub presolve_time: Duration,
    /// Solver time of the QC solve, if it ran to completion.
    pub qc_time: Option<Duration>,
}

impl LocalQcOutcome {
    /// Solver time of the whole pipeline, pre-solve included.
    pub fn solver_time(&self) -> Duration {
        self.presolve_time + self.qc_time.unwrap_or_default()
    }
}

/// Jabr pre-solve, local sampling around its reconstructed voltages, then QC.
/// Falls back to the Jabr solution when sampling or the QC solve fails, or when
/// QC does not improve the current phasor error.
pub fn solve_qc_local(
    inst: &MarketInstance,
    backend: &dyn Backend,
    config: LocalQcConfig,
) -> Result<LocalQcOutcome, MarketError> {
    let jabr = solve_with_commitment_rounding(inst, &Relaxation::Jabr, backend)?;
    let presolve_time = jabr.solver_time();
    let fallback = |jabr: MarketSolution, why: String, bounds, report, qc_time| LocalQcOutcome {
        solution: jabr,
        fallback: Some(why),
        bounds,
        report,
        presolve_time,
        qc_time,
    };
    let (bounds, report) =
        match sample_bounds_local(inst, &jabr.voltages, config.eps_v, config.eps_theta, config.log2_n, config.seed) {
            Ok(x) => x,
            Err(e) => return Ok(fallback(jabr, format!("sampling: {e}"), None, None, None)),
        };
    let qc = match solve_with_commitment_rounding(inst, &Relaxation::Qc(bounds.clone()), backend) {
        Ok(s) => s,
        Err(e) => return Ok(fallback(jabr, format!("qc solve: {e}"), Some(bounds), Some(report), None)),
    };
    let err_jabr = phasor_error_rms(&jabr.flows, &jabr.voltages, &inst.network);
    let err_qc = phasor_error_rms(&qc.flows, &qc.voltages, &inst.network);
    let qc_time = Some(qc.solver_time());
    match (err_jabr, err_qc) {
        (Ok(j), Ok(q)) if q > j => {
            let why = format!("phasor error {q:.3e} not better than jabr {j:.3e}");
            Ok(fallback(jabr, why, Some(bounds), Some(report), qc_time))
        }
        (_, Err(e)) => Ok(fallback(jabr, format!("qc reconstruction: {e}"), Some(bounds), Some(report), qc_time)),
        _ => Ok(LocalQcOutcome {
            solution: qc,
            fallback: None,
            bounds: Some(bounds),
            report: Some(report),
            presolve_time,
            qc_time,
        }),
    }
}
