//! Subnetwork sampling, accuracy metrics and the batched benchmark runner.

mod memory;
mod metrics;
mod subnetwork;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::Backend;
use crate::market::{solve_with_commitment_rounding, MarketSolution};
use crate::netmodel::{InstanceError, MarketInstance};
use crate::qmc::{solve_qc_local, LocalQcConfig, DEFAULT_LOG2_N};
use crate::relax::{Relaxation, RelaxationKind, DEFAULT_MERGE_FRACTION};

pub use memory::{MemorySpan, PeakAlloc};
pub use metrics::{flows_from_profile, phasor_error_rms, thermal_violation, thermal_violation_rms};
pub use subnetwork::sample_connected_subnetwork;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("voltage at bus {bus} in period {period} is numerically zero")]
    ZeroVoltage { bus: String, period: usize },
    #[error("subnetwork size {requested} outside 1..={available}")]
    SubnetworkSize { requested: usize, available: usize },
    #[error("no viable subnetwork: {0}")]
    NoViableSubnetwork(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("failed to write {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Optimal,
    /// QC fell back to the Jabr allocation.
    Fallback,
    Failed,
}

/// One (relaxation, subnetwork) measurement. Metric fields are empty on failed rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub relaxation: RelaxationKind,
    pub size: usize,
    pub sample: usize,
    pub status: RowStatus,
    pub welfare: Option<f64>,
    pub penalty: Option<f64>,
    pub solver_time_s: Option<f64>,
    pub total_time_s: f64,
    pub peak_mem_bytes: Option<u64>,
    pub phasor_rms: Option<f64>,
    pub thermal_rms: Option<f64>,
    pub rank_ratio: Option<f64>,
}

/// Per (relaxation, size) means over the rows that did not fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub relaxation: RelaxationKind,
    pub size: usize,
    pub rows: usize,
    pub failed: usize,
    pub welfare: Option<f64>,
    pub penalty: Option<f64>,
    pub solver_time_s: Option<f64>,
    pub total_time_s: Option<f64>,
    pub peak_mem_bytes: Option<f64>,
    pub phasor_rms: Option<f64>,
    pub thermal_rms: Option<f64>,
    pub rank_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub batch: usize,
    pub relaxations: Vec<RelaxationKind>,
    pub seed: u64,
    pub merge_fraction: f64,
    pub qc: LocalQcConfig,
    /// Worker threads. Memory is only measured when this is 1.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: Vec::new(),
            batch: 10,
            relaxations: RelaxationKind::ALL.to_vec(),
            seed: 0,
            merge_fraction: DEFAULT_MERGE_FRACTION,
            qc: LocalQcConfig { log2_n: DEFAULT_LOG2_N, ..LocalQcConfig::default() },
            jobs: 1,
        }
    }
}

/// Seed of subnetwork `sample` at `size`.
pub fn subnetwork_seed(seed: u64, size: usize, sample: usize) -> u64 {
    seed ^ size as u64 ^ sample as u64
}

/// Runs every relaxation on `batch` sampled subnetworks per size. Failures are
/// recorded as rows and do not stop the run. Rows come out ordered by size,
/// sample and then the order of `config.relaxations`.
pub fn run_benchmark(
    inst: &MarketInstance,
    config: &BenchConfig,
    backend: &dyn Backend,
) -> Result<Vec<BenchRecord>, BenchError> {
    for &size in &config.sizes {
        if size == 0 || size > inst.network.n_buses() {
            return Err(BenchError::SubnetworkSize { requested: size, available: inst.network.n_buses() });
        }
    }
    let tasks: Vec<(usize, usize)> =
        config.sizes.iter().flat_map(|&size| (0..config.batch).map(move |k| (size, k))).collect();
    let measure_memory = config.jobs <= 1;
    let results: Mutex<Vec<(usize, Vec<BenchRecord>)>> = Mutex::new(Vec::with_capacity(tasks.len()));
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(size, sample)) = tasks.get(i) else { break };
        let rows = run_task(inst, config, backend, size, sample, measure_memory);
        results.lock().expect("no worker panicked").push((i, rows));
    };
    if config.jobs <= 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..config.jobs.min(tasks.len().max(1)) {
                s.spawn(worker);
            }
        });
    }
    let mut results = results.into_inner().expect("no worker panicked");
    results.sort_by_key(|(i, _)| *i);
    Ok(results.into_iter().flat_map(|(_, rows)| rows).collect())
}

fn run_task(
    inst: &MarketInstance,
    config: &BenchConfig,
    backend: &dyn Backend,
    size: usize,
    sample: usize,
    measure_memory: bool,
) -> Vec<BenchRecord> {
    let failed = |relaxation| BenchRecord {
        relaxation,
        size,
        sample,
        status: RowStatus::Failed,
        welfare: None,
        penalty: None,
        solver_time_s: None,
        total_time_s: 0.0,
        peak_mem_bytes: None,
        phasor_rms: None,
        thermal_rms: None,
        rank_ratio: None,
    };
    let sub = match sample_connected_subnetwork(inst, size, subnetwork_seed(config.seed, size, sample)) {
        Ok(sub) => sub,
        Err(_) => return config.relaxations.iter().map(|&r| failed(r)).collect(),
    };
    config
        .relaxations
        .iter()
        .map(|&kind| {
            let span = measure_memory.then(MemorySpan::start);
            let start = Instant::now();
            let outcome = solve_kind(&sub, kind, config, backend);
            let Ok((solution, solver_time, status)) = outcome else {
                return BenchRecord { total_time_s: start.elapsed().as_secs_f64(), ..failed(kind) };
            };
            let phasor = phasor_error_rms(&solution.flows, &solution.voltages, &sub.network).ok();
            let thermal = thermal_violation_rms(&solution.flows, &sub.network);
            let total = start.elapsed().as_secs_f64();
            BenchRecord {
                relaxation: kind,
                size,
                sample,
                status,
                welfare: Some(solution.welfare),
                penalty: Some(solution.penalty),
                solver_time_s: Some(solver_time),
                total_time_s: total,
                peak_mem_bytes: span.and_then(|s| s.peak_delta()),
                phasor_rms: phasor,
                thermal_rms: Some(thermal),
                rank_ratio: solution.rank_ratio,
            }
        })
        .collect()
}

fn solve_kind(
    inst: &MarketInstance,
    kind: RelaxationKind,
    config: &BenchConfig,
    backend: &dyn Backend,
) -> Result<(MarketSolution, f64, RowStatus), crate::market::MarketError> {
    let relaxation = match kind {
        RelaxationKind::Dc => Relaxation::Dc,
        RelaxationKind::Shor => Relaxation::Shor,
        RelaxationKind::Chordal => Relaxation::Chordal { merge_fraction: config.merge_fraction },
        RelaxationKind::Jabr => Relaxation::Jabr,
        RelaxationKind::Qc => {
            let qc_config = LocalQcConfig { seed: config.seed, ..config.qc };
            let out = solve_qc_local(inst, backend, qc_config)?;
            let status = if out.fallback.is_some() { RowStatus::Fallback } else { RowStatus::Optimal };
            let time = out.solver_time().as_secs_f64();
            return Ok((out.solution, time, status));
        }
    };
    let solution = solve_with_commitment_rounding(inst, &relaxation, backend)?;
    let time = solution.solver_time().as_secs_f64();
    Ok((solution, time, RowStatus::Optimal))
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let xs: Vec<f64> = values.flatten().collect();
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Per (relaxation, size) means, in order of first appearance.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(RelaxationKind, usize)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.relaxation, r.size)) {
            keys.push((r.relaxation, r.size));
        }
    }
    keys.into_iter()
        .map(|(relaxation, size)| {
            let group: Vec<&BenchRecord> =
                records.iter().filter(|r| r.relaxation == relaxation && r.size == size).collect();
            let ok: Vec<&&BenchRecord> = group.iter().filter(|r| r.status != RowStatus::Failed).collect();
            let m = |f: fn(&BenchRecord) -> Option<f64>| mean(ok.iter().map(|r| f(r)));
            SummaryRow {
                relaxation,
                size,
                rows: group.len(),
                failed: group.len() - ok.len(),
                welfare: m(|r| r.welfare),
                penalty: m(|r| r.penalty),
                solver_time_s: m(|r| r.solver_time_s),
                total_time_s: m(|r| Some(r.total_time_s)),
                peak_mem_bytes: m(|r| r.peak_mem_bytes.map(|b| b as f64)),
                phasor_rms: m(|r| r.phasor_rms),
                thermal_rms: m(|r| r.thermal_rms),
                rank_ratio: m(|r| r.rank_ratio),
            }
        })
        .collect()
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<(), BenchError> {
    let wrap = |source| BenchError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for row in rows {
        w.serialize(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| wrap(e.into()))
}

/// `runs.csv` → `runs.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.summary.csv"))
}

/// Writes the per-row CSV to `path` and the summary next to it; returns the summary.
pub fn write_csv(records: &[BenchRecord], path: &Path) -> Result<Vec<SummaryRow>, BenchError> {
    write_rows(records, path)?;
    let summary = summarize(records);
    write_rows(&summary, &summary_path(path))?;
    Ok(summary)
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchRecord>, BenchError> {
    let wrap = |source| BenchError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(wrap)?;
    r.deserialize().collect::<Result<_, _>>().map_err(wrap)
}
