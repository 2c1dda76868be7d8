//! Real-valued Shor SDP.
//!
//! `W = ṼṼᵀ` with `Ṽ = (V^d_1, V^q_1, …, V^d_n, V^q_n)`, so bus `v` owns rows
//! `2v` (real part) and `2v+1` (imaginary part).

use nalgebra::DMatrix;

use crate::conic::{ConicProgram, LinExpr, PsdBlock, VarId};
use crate::market::{add_flow_definition, emit_thermal_socp, MarketVariables, PenaltyCoefficients};
use crate::netmodel::{Complex, MarketInstance};

use super::{Reconstruction, RelaxError, VoltageProfile};

/// One `2n × 2n` block per period.
#[derive(Debug, Clone)]
pub struct ShorHandles {
    pub blocks: Vec<PsdBlock>,
}

impl ShorHandles {
    pub fn reconstruct(&self, inst: &MarketInstance, x: &[f64]) -> Result<Reconstruction, RelaxError> {
        let mut v = Vec::with_capacity(self.blocks.len());
        let mut worst = 0.0f64;
        for block in &self.blocks {
            let (volts, ratio) = reconstruct_shor(&block.value(x), inst.network.ref_bus)?;
            v.push(volts);
            worst = worst.max(ratio);
        }
        Ok(Reconstruction { profile: VoltageProfile { v }, rank_ratio: Some(worst) })
    }
}

/// Flow definitions and voltage-magnitude bounds of one period, written in terms
/// of the lifted entries returned by `w(i, j)`.
///
/// For arc `v → w` with `W^Re = W^Δ_v − W_{dv,dw} − W_{qv,qw}` and
/// `W^Im = W_{dv,qw} − W_{qv,dw}`, the flows are `p = G·W^Re + B·W^Im` and
/// `q = −B·W^Re + G·W^Im`.
pub fn emit_sdp_network_rows(
    inst: &MarketInstance,
    program: &mut ConicProgram,
    vars: &MarketVariables,
    coeffs: &PenaltyCoefficients,
    t: usize,
    w: &dyn Fn(usize, usize) -> VarId,
) {
    let net = &inst.network;
    for (v, bus) in net.buses.iter().enumerate() {
        let mag = LinExpr::term(w(2 * v, 2 * v), 1.0).add(w(2 * v + 1, 2 * v + 1), 1.0);
        program.add_row(mag, bus.v_min * bus.v_min, bus.v_max * bus.v_max, "voltage");
    }
    for arc in net.arcs() {
        let (dv, qv, dw, qw) = (2 * arc.from, 2 * arc.from + 1, 2 * arc.to, 2 * arc.to + 1);
        let re = LinExpr::term(w(dv, dv), 1.0).add(w(qv, qv), 1.0).add(w(dv, dw), -1.0).add(w(qv, qw), -1.0);
        let im = LinExpr::term(w(dv, qw), 1.0).add(w(qv, dw), -1.0);
        let line = &net.lines[arc.line];
        let (g, b) = (line.g, line.b);
        let p = re.scaled(g).add_expr(&im, b);
        let q = re.scaled(-b).add_expr(&im, g);
        add_flow_definition(program, vars.p_flow[t][arc.index], p, coeffs.eps_p, "flow_p");
        add_flow_definition(program, vars.q_flow[t][arc.index], q, coeffs.eps_q, "flow_q");
    }
}

pub fn emit_shor_real(
    inst: &MarketInstance,
    program: &mut ConicProgram,
    vars: &MarketVariables,
    coeffs: &PenaltyCoefficients,
) -> ShorHandles {
    let n = inst.network.n_buses();
    let r = inst.network.ref_bus;
    let mut blocks = Vec::with_capacity(inst.periods);
    for t in 0..inst.periods {
        let block = program.add_psd(&format!("W_t{t}"), 2 * n);
        program.fix_var(block.entry(2 * r, 2 * r), 1.0);
        for k in 0..2 * n {
            program.fix_var(block.entry(2 * r + 1, k), 0.0);
        }
        emit_sdp_network_rows(inst, program, vars, coeffs, t, &|i, j| block.entry(i, j));
        blocks.push(block);
    }
    emit_thermal_socp(inst, program, vars, coeffs);
    ShorHandles { blocks }
}

/// Dominant rank-one voltages of a lifted real matrix, rotated so the reference
/// bus is real and non-negative, together with `λ₂/λ₁`.
pub fn reconstruct_shor(w: &DMatrix<f64>, ref_bus: usize) -> Result<(Vec<Complex>, f64), RelaxError> {
    let sym = (w + w.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[order[0]];
    if !(l1 > 0.0) {
        return Err(RelaxError::DegenerateMatrix(l1));
    }
    let l2 = order.get(1).map_or(0.0, |&k| eig.eigenvalues[k].max(0.0));
    let u = eig.eigenvectors.column(order[0]) * l1.sqrt();
    let raw: Vec<Complex> = (0..w.nrows() / 2).map(|v| Complex::new(u[2 * v], u[2 * v + 1])).collect();
    let rot = Complex::from_polar(1.0, -raw[ref_bus].arg());
    Ok((raw.into_iter().map(|z| z * rot).collect(), l2 / l1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ConeKind;
    use crate::market::{build_base_model, penalty_coefficients, tests::tiny_instance, Commitment};

    #[test]
    fn rank_one_recovery() {
        let v = nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.8, 0.6]);
        let w = &v * v.transpose();
        let (volts, ratio) = reconstruct_shor(&w, 0).unwrap();
        assert!((volts[0] - Complex::new(1.0, 0.0)).norm() < 1e-12);
        assert!((volts[1] - Complex::new(0.8, 0.6)).norm() < 1e-12);
        assert!(ratio < 1e-12);
    }

    #[test]
    fn identity_is_flagged_loose() {
        let (volts, ratio) = reconstruct_shor(&DMatrix::identity(2, 2), 0).unwrap();
        assert_eq!(ratio, 1.0);
        assert!(volts[0].im.abs() < 1e-12);
    }

    #[test]
    fn rotation_zeroes_reference_phase() {
        let v = nalgebra::DVector::from_vec(vec![0.3, 0.9, -0.5, 0.7, 0.1, -1.0]);
        let w = &v * v.transpose() + DMatrix::identity(6, 6) * 0.01;
        for r in 0..3 {
            let (volts, _) = reconstruct_shor(&w, r).unwrap();
            assert!(volts[r].im.abs() < 1e-9);
            assert!(volts[r].re >= 0.0);
        }
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        assert!(matches!(reconstruct_shor(&DMatrix::zeros(4, 4), 0), Err(RelaxError::DegenerateMatrix(_))));
    }

    #[test]
    fn block_sizing_and_row_counts() {
        let inst = tiny_instance(3, 30.0, 10.0, 0.0);
        let coeffs = penalty_coefficients(&inst);
        let mut p = ConicProgram::new();
        let vars = build_base_model(&inst, &mut p, &coeffs, &Commitment::Relaxed);
        let h = emit_shor_real(&inst, &mut p, &vars, &coeffs);
        assert_eq!(p.count_cones(ConeKind::Psd), 1);
        assert_eq!(h.blocks[0].dim, 6);
        for k in 0..6 {
            let var = &p.vars[h.blocks[0].entry(1, k).0];
            assert_eq!((var.lo, var.hi), (0.0, 0.0));
        }

        let inst2 = tiny_instance(2, 30.0, 10.0, 0.0);
        let mut p2 = ConicProgram::new();
        let vars2 = build_base_model(&inst2, &mut p2, &coeffs, &Commitment::Relaxed);
        emit_shor_real(&inst2, &mut p2, &vars2, &coeffs);
        assert_eq!(p2.count_rows("flow_p") + p2.count_rows("flow_q"), 4);
    }

    #[test]
    fn flows_match_polar_equations() {
        let inst = tiny_instance(2, 30.0, 10.0, 0.0);
        let coeffs = penalty_coefficients(&inst);
        let mut p = ConicProgram::new();
        let vars = build_base_model(&inst, &mut p, &coeffs, &Commitment::Relaxed);
        let h = emit_shor_real(&inst, &mut p, &vars, &coeffs);
        let volts = [Complex::new(1.0, 0.0), Complex::from_polar(0.97, -0.08)];
        let vt = nalgebra::DVector::from_vec(vec![volts[0].re, volts[0].im, volts[1].re, volts[1].im]);
        let w = &vt * vt.transpose();
        let mut x = vec![0.0; p.n_vars()];
        for i in 0..4 {
            for j in 0..=i {
                x[h.blocks[0].entry(i, j).0] = w[(i, j)];
            }
        }
        let line = &inst.network.lines[0];
        for arc in inst.network.arcs() {
            let (vv, vw) = (volts[arc.from], volts[arc.to]);
            let s = vv * (line.admittance() * (vv - vw)).conj();
            x[vars.p_flow[0][arc.index].0] = s.re;
            x[vars.q_flow[0][arc.index].0] = s.im;
        }
        for row in p.rows.iter().filter(|r| r.tag.starts_with("flow")) {
            assert!(row.expr.eval(&x).abs() < 1e-12, "{}", row.expr.eval(&x));
        }
    }
}
