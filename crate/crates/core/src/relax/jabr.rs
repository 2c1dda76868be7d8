//! Jabr's edge-based SOCP.
//!
//! `c_vv = |V_v|²`, and per line in its `from -> to` orientation
//! `c = |V_v||V_w| cos(θ_v − θ_w)`, `s = |V_v||V_w| sin(θ_v − θ_w)`. The reverse
//! direction reuses `c` and negates `s`.

use crate::conic::{ConicProgram, LinExpr, VarId};
use crate::market::{add_flow_definition, emit_thermal_socp, MarketVariables, PenaltyCoefficients};
use crate::netmodel::{Arc, Complex, MarketInstance, Network};

use super::{RelaxError, VoltageProfile};

#[derive(Debug, Clone)]
pub struct JabrHandles {
    /// `[period][bus]`
    pub cvv: Vec<Vec<VarId>>,
    /// `[period][line]`
    pub c: Vec<Vec<VarId>>,
    /// `[period][line]`, `from -> to` orientation.
    pub s: Vec<Vec<VarId>>,
}

impl JabrHandles {
    /// `(c, s)` expressions of an arc.
    pub fn arc_cs(&self, t: usize, arc: Arc) -> (LinExpr, LinExpr) {
        let sign = if arc.is_forward() { 1.0 } else { -1.0 };
        (self.c[t][arc.line].into(), LinExpr::term(self.s[t][arc.line], sign))
    }

    pub fn reconstruct(&self, inst: &MarketInstance, x: &[f64]) -> Result<VoltageProfile, RelaxError> {
        let pick = |vs: &Vec<Vec<VarId>>| -> Vec<Vec<f64>> {
            vs.iter().map(|row| row.iter().map(|v| x[v.0]).collect()).collect()
        };
        reconstruct_jabr(&pick(&self.cvv), &pick(&self.c), &pick(&self.s), &inst.network)
    }
}

pub fn emit_jabr(
    inst: &MarketInstance,
    program: &mut ConicProgram,
    vars: &MarketVariables,
    coeffs: &PenaltyCoefficients,
) -> JabrHandles {
    let net = &inst.network;
    let (mut cvv, mut c, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for t in 0..inst.periods {
        let cv: Vec<VarId> = net
            .buses
            .iter()
            .enumerate()
            .map(|(v, bus)| program.add_var(format!("cvv_v{v}_t{t}"), bus.v_min.powi(2), bus.v_max.powi(2)))
            .collect();
        program.fix_var(cv[net.ref_bus], 1.0);
        let cl: Vec<VarId> = (0..net.n_lines()).map(|l| program.free_var(format!("c_l{l}_t{t}"))).collect();
        let sl: Vec<VarId> = (0..net.n_lines()).map(|l| program.free_var(format!("s_l{l}_t{t}"))).collect();
        for (l, line) in net.lines.iter().enumerate() {
            program.add_rotated(cv[line.from].into(), cv[line.to].into(), vec![cl[l].into(), sl[l].into()]);
        }
        cvv.push(cv);
        c.push(cl);
        s.push(sl);
    }
    let handles = JabrHandles { cvv, c, s };
    for t in 0..inst.periods {
        for arc in net.arcs() {
            let line = &net.lines[arc.line];
            let (g, b) = (line.g, line.b);
            let (c, s) = handles.arc_cs(t, arc);
            let own = handles.cvv[t][arc.from];
            let p = LinExpr::term(own, g).add_expr(&c, -g).add_expr(&s, -b);
            let q = LinExpr::term(own, -b).add_expr(&s, -g).add_expr(&c, b);
            add_flow_definition(program, vars.p_flow[t][arc.index], p, coeffs.eps_p, "flow_p");
            add_flow_definition(program, vars.q_flow[t][arc.index], q, coeffs.eps_q, "flow_q");
        }
    }
    emit_thermal_socp(inst, program, vars, coeffs);
    handles
}

/// Voltages along a breadth-first spanning tree rooted at the reference bus.
///
/// All inputs are indexed `[period][bus or line]`; `s` is in line orientation.
pub fn reconstruct_jabr(
    cvv: &[Vec<f64>],
    c: &[Vec<f64>],
    s: &[Vec<f64>],
    net: &Network,
) -> Result<VoltageProfile, RelaxError> {
    for row in cvv {
        if let Some((bus, &value)) = row.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(RelaxError::NonPositiveMagnitude { bus, value });
        }
    }
    let (order, parent) = net.bfs_tree(net.ref_bus);
    let mut v = Vec::with_capacity(cvv.len());
    for t in 0..cvv.len() {
        let mut mag = vec![0.0; net.n_buses()];
        let mut ang = vec![0.0; net.n_buses()];
        mag[net.ref_bus] = 1.0;
        for &w in &order[1..] {
            let arc = parent[w].expect("non-root buses have a parent");
            let cc = c[t][arc.line];
            let ss = if arc.is_forward() { s[t][arc.line] } else { -s[t][arc.line] };
            mag[w] = cc.hypot(ss) / mag[arc.from];
            ang[w] = ang[arc.from] - ss.atan2(cc);
        }
        v.push(mag.iter().zip(&ang).map(|(&m, &a)| Complex::from_polar(m, a)).collect());
    }
    Ok(VoltageProfile { v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Bus, Line};

    fn path(n: usize, reversed_last: bool) -> Network {
        let buses = (0..n).map(|i| Bus { id: format!("{i}"), v_min: 0.9, v_max: 1.1 }).collect();
        let lines = (1..n)
            .map(|i| {
                let (from, to) = if reversed_last && i == n - 1 { (i, i - 1) } else { (i - 1, i) };
                Line { id: format!("{from}-{to}"), from, to, g: 1.0, b: -5.0, i_max: 1.0 }
            })
            .collect();
        Network::new(buses, lines, 0).unwrap()
    }

    #[test]
    fn identity_edge() {
        let p = reconstruct_jabr(&[vec![1.0, 1.0]], &[vec![1.0]], &[vec![0.0]], &path(2, false)).unwrap();
        assert!((p.v[0][1] - Complex::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rotated_edge() {
        let p = reconstruct_jabr(&[vec![1.0, 1.0]], &[vec![0.8]], &[vec![0.6]], &path(2, false)).unwrap();
        assert!((p.v[0][1].norm() - 1.0).abs() < 1e-15);
        assert!((p.v[0][1].arg() + 0.6435011087932844).abs() < 1e-12);
    }

    #[test]
    fn reverse_orientation_negates_s() {
        // Line stored as 2 -> 1; the tree walks 1 -> 2, so s flips sign.
        let net = path(3, true);
        let p = reconstruct_jabr(&[vec![1.0; 3]], &[vec![1.0, 0.8]], &[vec![0.0, 0.6]], &net).unwrap();
        assert!((p.v[0][2].arg() - 0.6435011087932844).abs() < 1e-12);
    }

    #[test]
    fn non_positive_magnitude_rejected() {
        let err = reconstruct_jabr(&[vec![1.0, 0.0]], &[vec![1.0]], &[vec![0.0]], &path(2, false));
        assert!(matches!(err, Err(RelaxError::NonPositiveMagnitude { bus: 1, .. })));
    }

    #[test]
    fn cone_examples() {
        // c_vv = c_ww = 1: (1, 0) is on the boundary, (0.9, 0.5) is outside.
        let boundary: f64 = 1.0 * 1.0 - (1.0f64.powi(2) + 0.0);
        assert_eq!(boundary, 0.0);
        assert!(0.9f64.powi(2) + 0.5f64.powi(2) > 1.0);
    }

    #[test]
    fn flat_point_has_zero_flow() {
        // G = 0, B = −10, c_vv = c = 1, s = 0.
        let (g, b, cvv, c, s) = (0.0, -10.0, 1.0, 1.0, 0.0);
        assert_eq!(cvv * g - c * g - s * b, 0.0);
        assert_eq!(-cvv * b - s * g + c * b, 0.0);
    }
}
