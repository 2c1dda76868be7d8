//! Market-clearing AC optimal power flow under convex relaxations.
//!
//! The crate is organised bottom-up:
//!
//! * [`netmodel`]: buses, lines, market participants, instance files and a synthetic generator.
//! * [`conic`]: a small solver-independent conic program plus a Clarabel backend.
//! * [`market`]: the relaxation-independent market model and the commitment rounding loop.
//! * [`relax`]: DC, real-valued Shor SDP, Jabr SOCP and QC emitters with voltage reconstruction.
//! * [`chordal`]: chordal extension, clique trees, clique merging, PSD completion and the chordal SDP.
//! * [`qmc`]: Sobol sequences and sampled angle-difference bounds for QC.
//! * [`bench`]: subnetwork sampling, accuracy metrics and the batched benchmark runner.

pub mod bench;
pub mod chordal;
pub mod conic;
pub mod market;
pub mod netmodel;
pub mod qmc;
pub mod relax;

pub use conic::{Backend, ClarabelBackend, ConicProgram, SolveReport, SolveStatus};
pub use market::{MarketSolution, PenaltyCoefficients};
pub use netmodel::{MarketInstance, Network};
pub use relax::{AngleBounds, Relaxation, VoltageProfile};
