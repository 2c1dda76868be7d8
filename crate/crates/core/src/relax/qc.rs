//! QC relaxation: Jabr's SOCP tightened by trigonometric and bilinear envelopes.

use crate::conic::{ConicProgram, LinExpr, VarId};
use crate::market::{MarketVariables, PenaltyCoefficients};
use crate::netmodel::MarketInstance;

use super::envelopes::{envelope_cos, envelope_mccormick, envelope_sin, envelope_sq};
use super::{emit_jabr, AngleBounds, JabrHandles, LineAngleBounds, RelaxError};

#[derive(Debug, Clone)]
pub struct QcHandles {
    pub jabr: JabrHandles,
    /// Auxiliary angles `[period][bus]`.
    pub theta: Vec<Vec<VarId>>,
    /// Auxiliary magnitudes `[period][bus]`.
    pub vmag: Vec<Vec<VarId>>,
    /// `cos` of the angle difference, `[period][line]`.
    pub c_prime: Vec<Vec<VarId>>,
    /// `sin` of the angle difference, `[period][line]`.
    pub s_prime: Vec<Vec<VarId>>,
    /// Magnitude product, `[period][line]`.
    pub m: Vec<Vec<VarId>>,
}

/// Adds the Jabr model plus the envelope families. Every line needs bounds,
/// keyed by line id and oriented `from -> to`.
pub fn emit_qc(
    inst: &MarketInstance,
    program: &mut ConicProgram,
    vars: &MarketVariables,
    coeffs: &PenaltyCoefficients,
    bounds: &AngleBounds,
) -> Result<QcHandles, RelaxError> {
    let net = &inst.network;
    let line_bounds: Vec<LineAngleBounds> = net
        .lines
        .iter()
        .map(|line| {
            let b = *bounds.get(&line.id).ok_or_else(|| RelaxError::MissingBounds(line.id.clone()))?;
            b.validate(&line.id)?;
            Ok(b)
        })
        .collect::<Result<_, RelaxError>>()?;

    let jabr = emit_jabr(inst, program, vars, coeffs);
    let mut handles = QcHandles {
        jabr,
        theta: Vec::new(),
        vmag: Vec::new(),
        c_prime: Vec::new(),
        s_prime: Vec::new(),
        m: Vec::new(),
    };

    for t in 0..inst.periods {
        let theta: Vec<VarId> = (0..net.n_buses()).map(|v| program.free_var(format!("qc_theta_v{v}_t{t}"))).collect();
        // Only differences enter the model; pinning one angle removes a free direction.
        program.fix_var(theta[net.ref_bus], 0.0);
        let vmag: Vec<VarId> = net
            .buses
            .iter()
            .enumerate()
            .map(|(v, bus)| program.add_var(format!("qc_vmag_v{v}_t{t}"), bus.v_min, bus.v_max))
            .collect();
        for (v, bus) in net.buses.iter().enumerate() {
            envelope_sq(program, &vmag[v].into(), &handles.jabr.cvv[t][v].into(), bus.v_min, bus.v_max)?;
        }

        let (mut cp, mut sp, mut mm) = (Vec::new(), Vec::new(), Vec::new());
        for (l, line) in net.lines.iter().enumerate() {
            let b = &line_bounds[l];
            let (from, to) = (&net.buses[line.from], &net.buses[line.to]);
            let c_prime = program.add_var(format!("qc_cos_l{l}_t{t}"), b.cos_lo, b.cos_hi);
            let s_prime = program.add_var(format!("qc_sin_l{l}_t{t}"), b.sin_lo, b.sin_hi);
            let m = program.free_var(format!("qc_m_l{l}_t{t}"));

            let diff = LinExpr::term(theta[line.from], 1.0).add(theta[line.to], -1.0);
            program.add_row(diff.clone(), b.dtheta_lo, b.dtheta_hi, "qc_angle");
            envelope_cos(program, &diff, &c_prime.into(), b.dtheta_lo, b.dtheta_hi)?;
            envelope_sin(program, &diff, &s_prime.into(), b.dtheta_lo, b.dtheta_hi)?;
            envelope_mccormick(
                program,
                &vmag[line.from].into(),
                &vmag[line.to].into(),
                &m.into(),
                (from.v_min, from.v_max),
                (to.v_min, to.v_max),
            )?;
            let m_box = (from.v_min * to.v_min, from.v_max * to.v_max);
            let jc = handles.jabr.c[t][l];
            let js = handles.jabr.s[t][l];
            envelope_mccormick(program, &m.into(), &c_prime.into(), &jc.into(), m_box, (b.cos_lo, b.cos_hi))?;
            envelope_mccormick(program, &m.into(), &s_prime.into(), &js.into(), m_box, (b.sin_lo, b.sin_hi))?;
            cp.push(c_prime);
            sp.push(s_prime);
            mm.push(m);
        }
        handles.theta.push(theta);
        handles.vmag.push(vmag);
        handles.c_prime.push(cp);
        handles.s_prime.push(sp);
        handles.m.push(mm);
    }
    Ok(handles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{build_base_model, penalty_coefficients, tests::tiny_instance, Commitment};
    use crate::relax::emit_jabr;

    fn bounds_for(inst: &MarketInstance, lo: f64, hi: f64) -> AngleBounds {
        AngleBounds(inst.network.lines.iter().map(|l| (l.id.clone(), LineAngleBounds::from_interval(lo, hi))).collect())
    }

    #[test]
    fn missing_bounds_rejected() {
        let inst = tiny_instance(3, 30.0, 10.0, 0.0);
        let coeffs = penalty_coefficients(&inst);
        let mut p = ConicProgram::new();
        let vars = build_base_model(&inst, &mut p, &coeffs, &Commitment::Relaxed);
        let mut b = bounds_for(&inst, -0.3, 0.3);
        b.0.pop_first();
        assert!(matches!(emit_qc(&inst, &mut p, &vars, &coeffs, &b), Err(RelaxError::MissingBounds(_))));
    }

    #[test]
    fn strict_superset_of_jabr() {
        let inst = tiny_instance(3, 30.0, 10.0, 0.0);
        let coeffs = penalty_coefficients(&inst);
        let mut pj = ConicProgram::new();
        let vj = build_base_model(&inst, &mut pj, &coeffs, &Commitment::Relaxed);
        emit_jabr(&inst, &mut pj, &vj, &coeffs);
        let mut pq = ConicProgram::new();
        let vq = build_base_model(&inst, &mut pq, &coeffs, &Commitment::Relaxed);
        emit_qc(&inst, &mut pq, &vq, &coeffs, &bounds_for(&inst, -0.3, 0.3)).unwrap();
        assert!(pq.rows.len() > pj.rows.len());
        assert_eq!(pq.count_rows("env_mc"), 3 * 4 * inst.network.n_lines());
    }

    #[test]
    fn zero_interval_pins_trig_values() {
        let inst = tiny_instance(2, 30.0, 10.0, 0.0);
        let coeffs = penalty_coefficients(&inst);
        let mut p = ConicProgram::new();
        let vars = build_base_model(&inst, &mut p, &coeffs, &Commitment::Relaxed);
        let h = emit_qc(&inst, &mut p, &vars, &coeffs, &bounds_for(&inst, 0.0, 0.0)).unwrap();
        let cp = &p.vars[h.c_prime[0][0].0];
        assert_eq!((cp.lo, cp.hi), (1.0, 1.0));
        let sin_rows: Vec<_> = p.rows.iter().filter(|r| r.tag == "env_sin").collect();
        assert_eq!(sin_rows.len(), 1);
        assert_eq!((sin_rows[0].lo, sin_rows[0].hi), (0.0, 0.0));
        assert_eq!(sin_rows[0].expr.terms, vec![(h.s_prime[0][0], 1.0)]);
    }
}
