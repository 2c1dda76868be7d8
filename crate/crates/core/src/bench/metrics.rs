//! Physical accuracy metrics of a solved market.

use crate::netmodel::{Complex, Network};
use crate::relax::{ArcFlows, VoltageProfile};

use super::BenchError;

const MIN_MAGNITUDE: f64 = 1e-9;

/// RMS over arcs and periods of `|Y(V_v − V_w) − conj((p + jq) / V_v)|`, the gap
/// between the current implied by the voltages and the one implied by the flows.
pub fn phasor_error_rms(flows: &ArcFlows, profile: &VoltageProfile, net: &Network) -> Result<f64, BenchError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, volts) in profile.v.iter().enumerate() {
        for arc in net.arcs() {
            let (vv, vw) = (volts[arc.from], volts[arc.to]);
            if vv.norm() < MIN_MAGNITUDE {
                return Err(BenchError::ZeroVoltage { bus: net.buses[arc.from].id.clone(), period: t });
            }
            let i_volt = net.lines[arc.line].admittance() * (vv - vw);
            let s = Complex::new(flows.p[t][arc.index], flows.q[t][arc.index]);
            let i_flow = (s / vv).conj();
            sum += (i_volt - i_flow).norm_sqr();
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { (sum / count as f64).sqrt() })
}

/// RMS over arcs and periods of `max(0, ‖(p, q)‖ − Ī·V̲_v)`.
pub fn thermal_violation_rms(flows: &ArcFlows, net: &Network) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, q) in flows.p.iter().zip(&flows.q) {
        for arc in net.arcs() {
            let viol = thermal_violation(p[arc.index], q[arc.index], net.arc_power_limit(arc));
            sum += viol * viol;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

pub fn thermal_violation(p: f64, q: f64, limit: f64) -> f64 {
    (p.hypot(q) - limit).max(0.0)
}

/// Arc flows `S_vw = V_v·conj(Y(V_v − V_w))` implied by a voltage profile.
pub fn flows_from_profile(profile: &VoltageProfile, net: &Network) -> ArcFlows {
    let mut p = Vec::with_capacity(profile.v.len());
    let mut q = Vec::with_capacity(profile.v.len());
    for volts in &profile.v {
        let s: Vec<Complex> = net
            .arcs()
            .map(|arc| {
                let (vv, vw) = (volts[arc.from], volts[arc.to]);
                vv * (net.lines[arc.line].admittance() * (vv - vw)).conj()
            })
            .collect();
        p.push(s.iter().map(|z| z.re).collect());
        q.push(s.iter().map(|z| z.im).collect());
    }
    ArcFlows { p, q }
}
