use crate::conic::{ConicProgram, LinExpr, VarId};
use crate::market::{add_flow_definition, emit_thermal_dc, MarketVariables, PenaltyCoefficients};
use crate::netmodel::{Complex, MarketInstance};

use super::VoltageProfile;

/// Bus angle variables `[period][bus]`.
#[derive(Debug, Clone)]
pub struct DcHandles {
    pub theta: Vec<Vec<VarId>>,
}

impl DcHandles {
    pub fn values(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.theta.iter().map(|row| row.iter().map(|v| x[v.0]).collect()).collect()
    }
}

/// Linearised flows: flat magnitudes, small angles, no resistance.
///
/// With series admittance `g + jb` the lossless flow is `p = −b·(θ_v − θ_w)`;
/// `−b = x/(r²+x²)` is the usual positive DC susceptance.
pub fn emit_dc(
    inst: &MarketInstance,
    program: &mut ConicProgram,
    vars: &MarketVariables,
    coeffs: &PenaltyCoefficients,
) -> DcHandles {
    let net = &inst.network;
    let mut theta = Vec::with_capacity(inst.periods);
    for t in 0..inst.periods {
        let th: Vec<VarId> = (0..net.n_buses()).map(|v| program.free_var(format!("theta_v{v}_t{t}"))).collect();
        program.fix_var(th[net.ref_bus], 0.0);
        for arc in net.arcs() {
            let b = net.lines[arc.line].b;
            let expr = LinExpr::term(th[arc.from], -b).add(th[arc.to], b);
            add_flow_definition(program, vars.p_flow[t][arc.index], expr, coeffs.eps_p, "flow_p");
            program.fix_var(vars.q_flow[t][arc.index], 0.0);
        }
        theta.push(th);
    }
    emit_thermal_dc(inst, program, vars, coeffs);
    DcHandles { theta }
}

/// `V = e^{jθ}` at every bus.
pub fn reconstruct_dc(theta: &[Vec<f64>]) -> VoltageProfile {
    VoltageProfile { v: theta.iter().map(|row| row.iter().map(|&th| Complex::from_polar(1.0, th)).collect()).collect() }
}
