use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::netmodel::{Line, MarketInstance, Network};
use crate::relax::{AngleBounds, LineAngleBounds, VoltageProfile};

use super::sobol::{Sobol, MAX_LOG2};
use super::QmcError;

pub const DEFAULT_TARGET_SIZE: usize = 12;
pub const DEFAULT_EPS_V: f64 = 0.1;
pub const DEFAULT_EPS_THETA: f64 = 0.15;
pub const DEFAULT_LOG2_N: u32 = 6;

/// Keeps wrapped angle differences strictly inside `(−π/2, π/2)`.
const WRAP_MARGIN: f64 = 1e-9;

/// Splits a network into connected vertex sets of at most `target` buses by
/// repeatedly growing a breadth-first ball from the smallest unassigned bus.
pub fn partition_subgraphs(net: &Network, target: usize) -> Vec<Vec<usize>> {
    let target = target.max(1);
    let mut assigned = vec![false; net.n_buses()];
    let mut parts = Vec::new();
    for start in 0..net.n_buses() {
        if assigned[start] {
            continue;
        }
        let mut part = vec![start];
        assigned[start] = true;
        let mut queue = VecDeque::from([start]);
        'grow: while let Some(v) = queue.pop_front() {
            for &(w, _) in &net.neighbors[v] {
                if part.len() == target {
                    break 'grow;
                }
                if !assigned[w] {
                    assigned[w] = true;
                    part.push(w);
                    queue.push_back(w);
                }
            }
        }
        part.sort_unstable();
        parts.push(part);
    }
    parts
}

/// `atan(tan(x))`, kept a hair inside the open interval.
pub fn wrap_angle(x: f64) -> f64 {
    x.tan().atan().clamp(-FRAC_PI_2 + WRAP_MARGIN, FRAC_PI_2 - WRAP_MARGIN)
}

/// Polar flow `v → w` of a line for magnitudes and angle difference `θ_v − θ_w`.
pub fn polar_flow(line: &Line, vm_v: f64, vm_w: f64, dtheta: f64) -> (f64, f64) {
    let (g, b) = (line.g, line.b);
    let (s, c) = dtheta.sin_cos();
    let p = vm_v * vm_v * g - vm_v * vm_w * (g * c + b * s);
    let q = -vm_v * vm_v * b - vm_v * vm_w * (g * s - b * c);
    (p, q)
}

/// Per-line outcome of a sampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSamples {
    pub feasible: usize,
    pub total: usize,
    pub bounds: Option<LineAngleBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphSamples {
    pub buses: Vec<usize>,
    pub lines: Vec<usize>,
    pub samples: usize,
    /// Samples in which at least one line failed the thermal filter.
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub method: String,
    pub log2_n: u32,
    pub seed: u64,
    pub eps_v: Option<f64>,
    pub eps_theta: Option<f64>,
    pub lines: BTreeMap<String, LineSamples>,
    pub subgraphs: Vec<SubgraphSamples>,
}

#[derive(Default, Clone, Copy)]
struct Extent {
    feasible: usize,
    total: usize,
    dt: (f64, f64),
    sin: (f64, f64),
    cos: (f64, f64),
}

impl Extent {
    fn record(&mut self, dtheta: f64, ok: bool) {
        self.total += 1;
        if !ok {
            return;
        }
        if self.feasible == 0 {
            self.dt = (f64::INFINITY, f64::NEG_INFINITY);
            self.sin = self.dt;
            self.cos = self.dt;
        }
        self.feasible += 1;
        let grow = |r: &mut (f64, f64), x: f64| *r = (r.0.min(x), r.1.max(x));
        grow(&mut self.dt, dtheta);
        grow(&mut self.sin, dtheta.sin());
        grow(&mut self.cos, dtheta.cos());
    }

    fn bounds(&self) -> Option<LineAngleBounds> {
        (self.feasible > 0).then(|| LineAngleBounds {
            dtheta_lo: self.dt.0,
            dtheta_hi: self.dt.1,
            cos_lo: self.cos.0,
            cos_hi: self.cos.1,
            sin_lo: self.sin.0,
            sin_hi: self.sin.1,
        })
    }
}

/// Subgraphs to sample: the partition's parts with their internal lines, then
/// one two-bus subgraph per line that crosses between parts.
fn sampling_groups(net: &Network, target: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let parts = partition_subgraphs(net, target);
    let mut part_of = vec![0; net.n_buses()];
    for (k, part) in parts.iter().enumerate() {
        for &v in part {
            part_of[v] = k;
        }
    }
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = parts.into_iter().map(|p| (p, Vec::new())).collect();
    let mut crossing = Vec::new();
    for (l, line) in net.lines.iter().enumerate() {
        if part_of[line.from] == part_of[line.to] {
            groups[part_of[line.from]].1.push(l);
        } else {
            crossing.push((vec![line.from.min(line.to), line.from.max(line.to)], vec![l]));
        }
    }
    groups.extend(crossing);
    groups
}

/// Maps a unit-cube point to `(magnitudes, angles)` for the buses of a group.
type Mapper<'a> = dyn Fn(&[usize], &[f64], usize) -> (Vec<f64>, Vec<f64>) + 'a;

fn run_sampling(
    inst: &MarketInstance,
    log2_n: u32,
    seed: u64,
    periods: usize,
    map: &Mapper<'_>,
) -> Result<(AngleBounds, Vec<SubgraphSamples>, BTreeMap<String, LineSamples>), QmcError> {
    if log2_n > MAX_LOG2 {
        return Err(QmcError::SampleCount(log2_n));
    }
    let net = &inst.network;
    let mut extents = vec![Extent::default(); net.n_lines()];
    let mut subgraphs = Vec::new();
    for (k, (buses, lines)) in sampling_groups(net, DEFAULT_TARGET_SIZE).into_iter().enumerate() {
        let mut local = vec![usize::MAX; net.n_buses()];
        for (i, &v) in buses.iter().enumerate() {
            local[v] = i;
        }
        let mut rejected = 0;
        let mut samples = 0;
        for t in 0..periods {
            let mut gen = Sobol::new(2 * buses.len(), seed.wrapping_add(k as u64))?;
            for _ in 0..1u64 << log2_n {
                let xi = gen.next_point();
                let (vm, th) = map(&buses, &xi, t);
                let mut all_ok = true;
                for &l in &lines {
                    let line = &net.lines[l];
                    let (a, b) = (local[line.from], local[line.to]);
                    let dtheta = wrap_angle(th[a] - th[b]);
                    let fwd = polar_flow(line, vm[a], vm[b], dtheta);
                    let rev = polar_flow(line, vm[b], vm[a], -dtheta);
                    let ok = fwd.0.hypot(fwd.1) <= line.i_max * net.buses[line.from].v_min
                        && rev.0.hypot(rev.1) <= line.i_max * net.buses[line.to].v_min;
                    all_ok &= ok;
                    extents[l].record(dtheta, ok);
                }
                samples += 1;
                if !all_ok {
                    rejected += 1;
                }
            }
        }
        subgraphs.push(SubgraphSamples { buses, lines, samples, rejected });
    }

    let mut bounds = AngleBounds::default();
    let mut lines = BTreeMap::new();
    for (l, line) in net.lines.iter().enumerate() {
        let b = extents[l].bounds().ok_or_else(|| QmcError::NoFeasibleSamples(line.id.clone()))?;
        bounds.0.insert(line.id.clone(), b);
        lines.insert(line.id.clone(), LineSamples { feasible: extents[l].feasible, total: extents[l].total, bounds: Some(b) });
    }
    Ok((bounds, subgraphs, lines))
}

/// Bounds from Sobol samples over the full magnitude box and all angles.
pub fn sample_bounds_global(inst: &MarketInstance, log2_n: u32, seed: u64) -> Result<(AngleBounds, SampleReport), QmcError> {
    let net = &inst.network;
    let map = |buses: &[usize], xi: &[f64], _t: usize| {
        let vm = buses
            .iter()
            .enumerate()
            .map(|(i, &v)| net.buses[v].v_min + xi[2 * i] * (net.buses[v].v_max - net.buses[v].v_min))
            .collect();
        let th = (0..buses.len()).map(|i| PI * (2.0 * xi[2 * i + 1] - 1.0)).collect();
        (vm, th)
    };
    let (bounds, subgraphs, lines) = run_sampling(inst, log2_n, seed, 1, &map)?;
    let report = SampleReport { method: "global".into(), log2_n, seed, eps_v: None, eps_theta: None, lines, subgraphs };
    Ok((bounds, report))
}

/// Bounds from Sobol samples in a neighbourhood of a reference profile, one
/// batch per period, merged over periods.
///
/// Magnitudes move one-sidedly by `ε_V·ξ·(V̄ − V̲)/2` and are clamped to the
/// bus limits; angles move by `ε_θ·π·(2ξ − 1)`.
pub fn sample_bounds_local(
    inst: &MarketInstance,
    profile: &VoltageProfile,
    eps_v: f64,
    eps_theta: f64,
    log2_n: u32,
    seed: u64,
) -> Result<(AngleBounds, SampleReport), QmcError> {
    let net = &inst.network;
    if profile.v.len() != inst.periods || profile.v.iter().any(|row| row.len() != net.n_buses()) {
        return Err(QmcError::ProfileShape);
    }
    let map = |buses: &[usize], xi: &[f64], t: usize| {
        let mut vm = Vec::with_capacity(buses.len());
        let mut th = Vec::with_capacity(buses.len());
        for (i, &v) in buses.iter().enumerate() {
            let bus = &net.buses[v];
            let base = profile.v[t][v];
            let m = base.norm() + eps_v * xi[2 * i] * 0.5 * (bus.v_max - bus.v_min);
            vm.push(m.clamp(bus.v_min, bus.v_max));
            th.push(base.arg() + eps_theta * PI * (2.0 * xi[2 * i + 1] - 1.0));
        }
        (vm, th)
    };
    let (bounds, subgraphs, lines) = run_sampling(inst, log2_n, seed, inst.periods, &map)?;
    let report = SampleReport {
        method: "local".into(),
        log2_n,
        seed,
        eps_v: Some(eps_v),
        eps_theta: Some(eps_theta),
        lines,
        subgraphs,
    };
    Ok((bounds, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{generate_synthetic_instance, Bus, Complex};

    fn path(n: usize) -> Network {
        let buses = (0..n).map(|i| Bus { id: format!("{i}"), v_min: 0.9, v_max: 1.1 }).collect();
        let lines = (1..n)
            .map(|i| Line { id: format!("{}-{i}", i - 1), from: i - 1, to: i, g: 1.0, b: -5.0, i_max: 1.0 })
            .collect();
        Network::new(buses, lines, 0).unwrap()
    }

    #[test]
    fn partition_examples() {
        let parts = partition_subgraphs(&path(24), 12);
        assert_eq!(parts, vec![(0..12).collect::<Vec<_>>(), (12..24).collect()]);
        assert_eq!(partition_subgraphs(&path(5), 12).len(), 1);
    }

    #[test]
    fn partition_covers_disjointly() {
        let inst = generate_synthetic_instance(50, 3).unwrap();
        let parts = partition_subgraphs(&inst.network, 12);
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert!(parts.iter().all(|p| p.len() <= 12));
    }

    #[test]
    fn wrap_stays_open() {
        for x in [-3.0, -FRAC_PI_2, -0.3, 0.0, 1.2, FRAC_PI_2, 3.1] {
            let y = wrap_angle(x);
            assert!(y > -FRAC_PI_2 && y < FRAC_PI_2);
        }
        assert!((wrap_angle(0.3 + PI) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn flat_flow_is_zero() {
        let line = Line { id: "x".into(), from: 0, to: 1, g: 2.0, b: -10.0, i_max: 1.0 };
        let (p, q) = polar_flow(&line, 1.0, 1.0, 0.0);
        assert!(p.abs() < 1e-15 && q.abs() < 1e-15);
    }

    #[test]
    fn zero_radius_collapses_to_reference() {
        let inst = generate_synthetic_instance(6, 1).unwrap();
        let n = inst.network.n_buses();
        let v: Vec<Complex> = (0..n).map(|i| Complex::from_polar(1.0, 0.001 * i as f64)).collect();
        let profile = VoltageProfile { v: vec![v.clone()] };
        let (bounds, report) = sample_bounds_local(&inst, &profile, 0.0, 0.0, 4, 0).unwrap();
        for line in &inst.network.lines {
            let b = bounds.get(&line.id).unwrap();
            let want = v[line.from].arg() - v[line.to].arg();
            assert!((b.dtheta_lo - want).abs() < 1e-12 && (b.dtheta_hi - want).abs() < 1e-12);
        }
        assert_eq!(report.eps_v, Some(0.0));
    }

    #[test]
    fn zero_rating_rejects_everything() {
        let mut inst = generate_synthetic_instance(6, 1).unwrap();
        inst.network.lines[0].i_max = 0.0;
        let err = sample_bounds_global(&inst, 6, 1).unwrap_err();
        assert_eq!(err, QmcError::NoFeasibleSamples(inst.network.lines[0].id.clone()));
    }
}
