//! Network physics for each formulation: constraint emitters and voltage reconstruction.

mod dc;
pub mod envelopes;
mod jabr;
mod qc;
mod shor;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chordal::{self, ChordalError, ChordalHandles, CliqueDecomposition};
use crate::conic::{ConicProgram, VarId};
use crate::market::{MarketVariables, PenaltyCoefficients};
use crate::netmodel::{Complex, MarketInstance};

pub use dc::{emit_dc, reconstruct_dc, DcHandles};
pub use jabr::{emit_jabr, reconstruct_jabr, JabrHandles};
pub use qc::{emit_qc, QcHandles};
pub use shor::{emit_sdp_network_rows, emit_shor_real, reconstruct_shor, ShorHandles};

#[derive(Debug, Error)]
pub enum RelaxError {
    #[error("no angle bounds for line {0}")]
    MissingBounds(String),
    #[error("angle bounds for line {0} are inconsistent or outside (-pi/2, pi/2)")]
    InconsistentBounds(String),
    #[error("invalid interval [{lo}, {hi}] for {what}")]
    InvalidInterval { what: &'static str, lo: f64, hi: f64 },
    #[error("degenerate matrix: largest eigenvalue {0:e} is not positive")]
    DegenerateMatrix(f64),
    #[error("non-positive squared magnitude {value:e} at bus {bus}")]
    NonPositiveMagnitude { bus: usize, value: f64 },
    #[error(transparent)]
    Chordal(#[from] ChordalError),
    #[error("failed to read angle bounds: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed angle bounds: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Sampled or analytical bounds on the angle difference across one line,
/// taken in the line's `from -> to` orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineAngleBounds {
    pub dtheta_lo: f64,
    pub dtheta_hi: f64,
    pub cos_lo: f64,
    pub cos_hi: f64,
    pub sin_lo: f64,
    pub sin_hi: f64,
}

impl LineAngleBounds {
    /// Bounds implied by an angle interval alone.
    pub fn from_interval(lo: f64, hi: f64) -> Self {
        let cos_lo = lo.cos().min(hi.cos());
        let cos_hi = if lo <= 0.0 && hi >= 0.0 { 1.0 } else { lo.cos().max(hi.cos()) };
        LineAngleBounds { dtheta_lo: lo, dtheta_hi: hi, cos_lo, cos_hi, sin_lo: lo.sin(), sin_hi: hi.sin() }
    }

    pub fn validate(&self, line: &str) -> Result<(), RelaxError> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let ok = self.dtheta_lo <= self.dtheta_hi
            && self.dtheta_lo > -half_pi
            && self.dtheta_hi < half_pi
            && self.cos_lo <= self.cos_hi
            && self.cos_hi <= 1.0
            && self.sin_lo <= self.sin_hi
            && self.sin_lo >= -1.0
            && self.sin_hi <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(RelaxError::InconsistentBounds(line.to_string()))
        }
    }
}

/// Angle bounds keyed by line id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleBounds(pub BTreeMap<String, LineAngleBounds>);

impl AngleBounds {
    pub fn get(&self, line: &str) -> Option<&LineAngleBounds> {
        self.0.get(line)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RelaxError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bounds serialize")
    }
}

/// Complex bus voltages indexed `[period][bus]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageProfile {
    pub v: Vec<Vec<Complex>>,
}

/// Solved line flows indexed `[period][arc]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcFlows {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

impl ArcFlows {
    pub fn from_values(vars: &MarketVariables, x: &[f64]) -> Self {
        let pick = |vs: &Vec<Vec<VarId>>| vs.iter().map(|row| row.iter().map(|v| x[v.0]).collect()).collect();
        ArcFlows { p: pick(&vars.p_flow), q: pick(&vars.q_flow) }
    }
}

/// Voltage profile plus the rank diagnostic of SDP formulations.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub profile: VoltageProfile,
    pub rank_ratio: Option<f64>,
}

/// Formulation selector.
#[derive(Debug, Clone, PartialEq)]
pub enum Relaxation {
    Dc,
    Shor,
    Chordal { merge_fraction: f64 },
    Jabr,
    Qc(AngleBounds),
}

pub const DEFAULT_MERGE_FRACTION: f64 = 0.1;

impl Relaxation {
    pub fn tag(&self) -> &'static str {
        match self {
            Relaxation::Dc => "dc",
            Relaxation::Shor => "shor",
            Relaxation::Chordal { .. } => "chordal",
            Relaxation::Jabr => "jabr",
            Relaxation::Qc(_) => "qc",
        }
    }
}

/// Relaxation names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelaxationKind {
    Dc,
    Shor,
    Chordal,
    Jabr,
    Qc,
}

impl RelaxationKind {
    pub const ALL: [RelaxationKind; 5] =
        [RelaxationKind::Dc, RelaxationKind::Shor, RelaxationKind::Chordal, RelaxationKind::Jabr, RelaxationKind::Qc];

    pub fn as_str(self) -> &'static str {
        match self {
            RelaxationKind::Dc => "dc",
            RelaxationKind::Shor => "shor",
            RelaxationKind::Chordal => "chordal",
            RelaxationKind::Jabr => "jabr",
            RelaxationKind::Qc => "qc",
        }
    }
}

impl fmt::Display for RelaxationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelaxationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelaxationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown relaxation '{s}' (expected dc, shor, chordal, jabr or qc)"))
    }
}

/// Handles returned by [`emit`], used for reconstruction.
#[derive(Debug, Clone)]
pub enum Emitted {
    Dc(DcHandles),
    Shor(ShorHandles),
    Chordal(ChordalHandles),
    Jabr(JabrHandles),
    Qc(QcHandles),
}

/// Adds the network constraints of `relaxation` to a program holding the base market model.
pub fn emit(
    relaxation: &Relaxation,
    inst: &MarketInstance,
    program: &mut ConicProgram,
    vars: &MarketVariables,
    coeffs: &PenaltyCoefficients,
) -> Result<Emitted, RelaxError> {
    Ok(match relaxation {
        Relaxation::Dc => Emitted::Dc(emit_dc(inst, program, vars, coeffs)),
        Relaxation::Shor => Emitted::Shor(emit_shor_real(inst, program, vars, coeffs)),
        Relaxation::Chordal { merge_fraction } => {
            let decomposition = CliqueDecomposition::for_network(&inst.network)?.merge(*merge_fraction);
            Emitted::Chordal(chordal::emit_chordal_sdp(inst, program, vars, coeffs, decomposition)?)
        }
        Relaxation::Jabr => Emitted::Jabr(emit_jabr(inst, program, vars, coeffs)),
        Relaxation::Qc(bounds) => Emitted::Qc(emit_qc(inst, program, vars, coeffs, bounds)?),
    })
}

impl Emitted {
    pub fn reconstruct(&self, inst: &MarketInstance, x: &[f64]) -> Result<Reconstruction, RelaxError> {
        match self {
            Emitted::Dc(h) => Ok(Reconstruction { profile: reconstruct_dc(&h.values(x)), rank_ratio: None }),
            Emitted::Shor(h) => h.reconstruct(inst, x),
            Emitted::Chordal(h) => Ok(h.reconstruct(inst, x)?),
            Emitted::Jabr(h) => Ok(Reconstruction { profile: h.reconstruct(inst, x)?, rank_ratio: None }),
            Emitted::Qc(h) => Ok(Reconstruction { profile: h.jabr.reconstruct(inst, x)?, rank_ratio: None }),
        }
    }
}
