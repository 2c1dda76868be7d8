//! The relaxation-independent market model.
//!
//! [`build_base_model`] installs bids, offers, commitment, minimum uptime and
//! soft bus balances. Relaxation emitters in [`crate::relax`] then add the
//! network physics, and [`solve_with_commitment_rounding`] runs the two-stage
//! relax/round/re-solve loop.

mod rounding;

use crate::conic::{ConicProgram, LinExpr, VarId};
use crate::netmodel::MarketInstance;

pub use rounding::{round_commitment, solve_with_commitment_rounding, MarketError, MarketSolution};

/// Penalty weights and tolerances of the soft constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyCoefficients {
    pub alpha_welfare: f64,
    pub alpha_p_imb: f64,
    pub alpha_q_imb: f64,
    pub alpha_i_viol: f64,
    pub beta_p: f64,
    pub beta_q: f64,
    pub beta_i: f64,
    pub eps_p: f64,
    pub eps_q: f64,
}

pub const DEFAULT_BETA: f64 = 0.3;
pub const DEFAULT_EPS: f64 = 5e-4;

/// Penalties scaled by the total price mass of the instance.
pub fn penalty_coefficients(inst: &MarketInstance) -> PenaltyCoefficients {
    let bids: f64 = inst.buyers.iter().flat_map(|b| b.blocks.iter().flatten()).map(|b| b.price.abs()).sum();
    let offers: f64 =
        inst.sellers.iter().flat_map(|s| s.blocks.iter().flatten()).map(|b| b.price.abs()).sum();
    let no_load: f64 = inst.sellers.iter().map(|s| s.no_load_cost.abs()).sum::<f64>() * inst.periods as f64;
    let alpha_welfare = bids + offers + no_load;
    let nv = inst.network.n_buses() as f64;
    let nt = inst.periods as f64;
    PenaltyCoefficients {
        alpha_welfare,
        alpha_p_imb: alpha_welfare / (nv * nt),
        alpha_q_imb: alpha_welfare / (nv * nt),
        alpha_i_viol: alpha_welfare / (nv * nv * nt),
        beta_p: DEFAULT_BETA,
        beta_q: DEFAULT_BETA,
        beta_i: DEFAULT_BETA,
        eps_p: DEFAULT_EPS,
        eps_q: DEFAULT_EPS,
    }
}

/// Treatment of the commitment variables `u_st`.
#[derive(Debug, Clone, PartialEq)]
pub enum Commitment {
    /// `u ∈ [0, 1]`.
    Relaxed,
    /// `u` fixed to the given values, indexed `[seller][period]`.
    Fixed(Vec<Vec<f64>>),
}

/// Variable handles created by [`build_base_model`].
///
/// Participant variables are indexed `[participant][period]` (blocks add a
/// trailing block index); network variables are indexed `[period][bus or arc]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketVariables {
    pub p_btl: Vec<Vec<Vec<VarId>>>,
    pub p_bt: Vec<Vec<VarId>>,
    pub q_bt: Vec<Vec<VarId>>,
    pub p_stl: Vec<Vec<Vec<VarId>>>,
    pub p_st: Vec<Vec<VarId>>,
    pub q_st: Vec<Vec<VarId>>,
    pub u: Vec<Vec<VarId>>,
    /// Start-up indicators; empty for single-period instances.
    pub phi: Vec<Vec<VarId>>,
    pub p_flow: Vec<Vec<VarId>>,
    pub q_flow: Vec<Vec<VarId>>,
    pub p_imb: Vec<Vec<VarId>>,
    pub q_imb: Vec<Vec<VarId>>,
    pub i_viol: Vec<Vec<VarId>>,
}

/// Builds the market part of the model into `program` and installs the full objective.
pub fn build_base_model(
    inst: &MarketInstance,
    program: &mut ConicProgram,
    coeffs: &PenaltyCoefficients,
    commitment: &Commitment,
) -> MarketVariables {
    let net = &inst.network;
    let periods = 0..inst.periods;
    let inf = f64::INFINITY;
    let mut objective = LinExpr::new();

    let mut p_btl = Vec::with_capacity(inst.buyers.len());
    let mut p_bt = Vec::with_capacity(inst.buyers.len());
    let mut q_bt = Vec::with_capacity(inst.buyers.len());
    for (b, buyer) in inst.buyers.iter().enumerate() {
        let (mut blocks_t, mut p_t, mut q_t) = (Vec::new(), Vec::new(), Vec::new());
        for t in periods.clone() {
            let p = program.add_var(format!("p_b{b}_t{t}"), buyer.p_min, buyer.p_max);
            let q = program.add_var(format!("q_b{b}_t{t}"), buyer.q_min, buyer.q_max);
            let mut agg = LinExpr::term(p, -1.0);
            let blocks: Vec<VarId> = buyer.blocks[t]
                .iter()
                .enumerate()
                .map(|(l, block)| {
                    let v = program.add_var(format!("p_b{b}_t{t}_l{l}"), 0.0, block.size);
                    agg.push(v, 1.0);
                    objective.push(v, block.price);
                    v
                })
                .collect();
            program.add_eq(agg, 0.0, "buyer_agg");
            blocks_t.push(blocks);
            p_t.push(p);
            q_t.push(q);
        }
        p_btl.push(blocks_t);
        p_bt.push(p_t);
        q_bt.push(q_t);
    }

    let mut p_stl = Vec::with_capacity(inst.sellers.len());
    let mut p_st = Vec::with_capacity(inst.sellers.len());
    let mut q_st = Vec::with_capacity(inst.sellers.len());
    let mut u = Vec::with_capacity(inst.sellers.len());
    for (s, seller) in inst.sellers.iter().enumerate() {
        let (mut blocks_t, mut p_t, mut q_t, mut u_t) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for t in periods.clone() {
            let (lo, hi) = match commitment {
                Commitment::Relaxed => (0.0, 1.0),
                Commitment::Fixed(values) => (values[s][t], values[s][t]),
            };
            let ut = program.add_var(format!("u_s{s}_t{t}"), lo, hi);
            objective.push(ut, -seller.no_load_cost);
            let p = program.free_var(format!("p_s{s}_t{t}"));
            let q = program.free_var(format!("q_s{s}_t{t}"));
            let mut agg = LinExpr::term(p, -1.0);
            let blocks: Vec<VarId> = seller.blocks[t]
                .iter()
                .enumerate()
                .map(|(l, block)| {
                    let v = program.add_var(format!("p_s{s}_t{t}_l{l}"), 0.0, inf);
                    program.add_le(LinExpr::term(v, 1.0).add(ut, -block.size), 0.0, "seller_block");
                    agg.push(v, 1.0);
                    objective.push(v, -block.price);
                    v
                })
                .collect();
            program.add_eq(agg, 0.0, "seller_agg");
            program.add_ge(LinExpr::term(p, 1.0).add(ut, -seller.p_min), 0.0, "seller_p_bounds");
            program.add_le(LinExpr::term(p, 1.0).add(ut, -seller.p_max), 0.0, "seller_p_bounds");
            program.add_ge(LinExpr::term(q, 1.0).add(ut, -seller.q_min), 0.0, "seller_q_bounds");
            program.add_le(LinExpr::term(q, 1.0).add(ut, -seller.q_max), 0.0, "seller_q_bounds");
            blocks_t.push(blocks);
            p_t.push(p);
            q_t.push(q);
            u_t.push(ut);
        }
        p_stl.push(blocks_t);
        p_st.push(p_t);
        q_st.push(q_t);
        u.push(u_t);
    }

    let mut phi = Vec::new();
    if inst.periods > 1 {
        for (s, seller) in inst.sellers.iter().enumerate() {
            let phi_s: Vec<VarId> =
                periods.clone().map(|t| program.add_var(format!("phi_s{s}_t{t}"), 0.0, inf)).collect();
            for t in 1..inst.periods {
                let e = LinExpr::term(phi_s[t], 1.0).add(u[s][t], -1.0).add(u[s][t - 1], 1.0);
                program.add_ge(e, 0.0, "startup");
            }
            let up = seller.min_uptime;
            for t in up..inst.periods {
                let mut e = LinExpr::term(u[s][t], -1.0);
                for &f in &phi_s[t - up..t] {
                    e.push(f, 1.0);
                }
                program.add_le(e, 0.0, "min_uptime");
            }
            phi.push(phi_s);
        }
    }

    let mut p_flow = Vec::with_capacity(inst.periods);
    let mut q_flow = Vec::with_capacity(inst.periods);
    let mut p_imb = Vec::with_capacity(inst.periods);
    let mut q_imb = Vec::with_capacity(inst.periods);
    let mut i_viol = Vec::with_capacity(inst.periods);
    for t in periods.clone() {
        let pf: Vec<VarId> = (0..net.n_arcs()).map(|a| program.free_var(format!("p_a{a}_t{t}"))).collect();
        let qf: Vec<VarId> = (0..net.n_arcs()).map(|a| program.free_var(format!("q_a{a}_t{t}"))).collect();
        let pi: Vec<VarId> =
            (0..net.n_buses()).map(|v| program.add_var(format!("pimb_v{v}_t{t}"), 0.0, inf)).collect();
        let qi: Vec<VarId> =
            (0..net.n_buses()).map(|v| program.add_var(format!("qimb_v{v}_t{t}"), 0.0, inf)).collect();
        let iv: Vec<VarId> =
            (0..net.n_arcs()).map(|a| program.add_var(format!("iviol_a{a}_t{t}"), 0.0, inf)).collect();
        for v in 0..net.n_buses() {
            let mut p_bal = LinExpr::new();
            let mut q_bal = LinExpr::new();
            for arc in net.out_arcs(v) {
                p_bal.push(pf[arc.index], 1.0);
                q_bal.push(qf[arc.index], 1.0);
            }
            for s in inst.sellers_at(v) {
                p_bal.push(p_st[s][t], -1.0);
                q_bal.push(q_st[s][t], -1.0);
            }
            for b in inst.buyers_at(v) {
                p_bal.push(p_bt[b][t], 1.0);
                q_bal.push(q_bt[b][t], 1.0);
            }
            program.add_le(p_bal.clone().add(pi[v], -coeffs.beta_p), 0.0, "p_balance");
            program.add_ge(p_bal.add(pi[v], coeffs.beta_p), 0.0, "p_balance");
            program.add_le(q_bal.clone().add(qi[v], -coeffs.beta_q), 0.0, "q_balance");
            program.add_ge(q_bal.add(qi[v], coeffs.beta_q), 0.0, "q_balance");
            objective.push(pi[v], -coeffs.alpha_p_imb);
            objective.push(qi[v], -coeffs.alpha_q_imb);
        }
        for &viol in &iv {
            objective.push(viol, -coeffs.alpha_i_viol);
        }
        p_flow.push(pf);
        q_flow.push(qf);
        p_imb.push(pi);
        q_imb.push(qi);
        i_viol.push(iv);
    }

    program.objective = objective;
    MarketVariables { p_btl, p_bt, q_bt, p_stl, p_st, q_st, u, phi, p_flow, q_flow, p_imb, q_imb, i_viol }
}

/// Flow-definition row `|flow − expr| ≤ eps`.
pub fn add_flow_definition(program: &mut ConicProgram, flow: VarId, expr: LinExpr, eps: f64, tag: &'static str) {
    program.add_row(LinExpr::term(flow, 1.0).add_expr(&expr, -1.0), -eps, eps, tag);
}

/// Soft DC thermal limit `|p| ≤ Ī(1 + β·i_viol)` on every arc.
pub fn emit_thermal_dc(inst: &MarketInstance, program: &mut ConicProgram, vars: &MarketVariables, coeffs: &PenaltyCoefficients) {
    for t in 0..inst.periods {
        for arc in inst.network.arcs() {
            let limit = inst.network.lines[arc.line].i_max;
            let p = vars.p_flow[t][arc.index];
            let slack = vars.i_viol[t][arc.index];
            program.add_le(LinExpr::term(p, 1.0).add(slack, -limit * coeffs.beta_i), limit, "thermal");
            program.add_ge(LinExpr::term(p, 1.0).add(slack, limit * coeffs.beta_i), -limit, "thermal");
        }
    }
}

/// Soft conic thermal limit `‖(p, q)‖ ≤ Ī·V̲_v·(1 + β·i_viol)` on every arc.
pub fn emit_thermal_socp(inst: &MarketInstance, program: &mut ConicProgram, vars: &MarketVariables, coeffs: &PenaltyCoefficients) {
    for t in 0..inst.periods {
        for arc in inst.network.arcs() {
            let limit = inst.network.arc_power_limit(arc);
            let head = LinExpr::constant(limit).add(vars.i_viol[t][arc.index], limit * coeffs.beta_i);
            program.add_soc(head, vec![vars.p_flow[t][arc.index].into(), vars.q_flow[t][arc.index].into()]);
        }
    }
}

/// Penalty-free welfare and the weighted penalty total at `x`.
pub fn extract_welfare(
    x: &[f64],
    inst: &MarketInstance,
    vars: &MarketVariables,
    coeffs: &PenaltyCoefficients,
) -> (f64, f64) {
    let mut welfare = 0.0;
    for (b, buyer) in inst.buyers.iter().enumerate() {
        for t in 0..inst.periods {
            for (l, block) in buyer.blocks[t].iter().enumerate() {
                welfare += block.price * x[vars.p_btl[b][t][l].0];
            }
        }
    }
    for (s, seller) in inst.sellers.iter().enumerate() {
        for t in 0..inst.periods {
            for (l, block) in seller.blocks[t].iter().enumerate() {
                welfare -= block.price * x[vars.p_stl[s][t][l].0];
            }
            welfare -= seller.no_load_cost * x[vars.u[s][t].0];
        }
    }
    let sum = |vs: &Vec<Vec<VarId>>| vs.iter().flatten().map(|v| x[v.0]).sum::<f64>();
    let penalty = coeffs.alpha_p_imb * sum(&vars.p_imb)
        + coeffs.alpha_q_imb * sum(&vars.q_imb)
        + coeffs.alpha_i_viol * sum(&vars.i_viol);
    (welfare, penalty)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::netmodel::{Block, Bus, Buyer, Line, Network, Seller};

    pub(crate) fn tiny_instance(n: usize, buyer_price: f64, seller_price: f64, no_load: f64) -> MarketInstance {
        let buses = (0..n).map(|i| Bus { id: format!("{i}"), v_min: 0.95, v_max: 1.05 }).collect();
        let lines = (1..n)
            .map(|i| Line { id: format!("{}-{i}", i - 1), from: i - 1, to: i, g: 1.0, b: -10.0, i_max: 2.0 })
            .collect();
        let network = Network::new(buses, lines, 0).unwrap();
        let buyer = Buyer {
            bus: n - 1,
            p_min: 0.0,
            p_max: 1.0,
            q_min: 0.0,
            q_max: 0.0,
            blocks: vec![vec![Block { size: 1.0, price: buyer_price }]],
        };
        let seller = Seller {
            bus: 0,
            p_min: 0.0,
            p_max: 1.0,
            q_min: -1.0,
            q_max: 1.0,
            blocks: vec![vec![Block { size: 1.0, price: seller_price }]],
            no_load_cost: no_load,
            min_uptime: 1,
        };
        MarketInstance::new(network, vec![buyer], vec![seller], 1).unwrap()
    }

    #[test]
    fn alpha_example() {
        let c = penalty_coefficients(&tiny_instance(3, 10.0, 4.0, 1.0));
        assert_eq!(c.alpha_welfare, 15.0);
        assert_eq!(c.alpha_p_imb, 5.0);
        assert_eq!(c.alpha_q_imb, 5.0);
        assert!((c.alpha_i_viol - 15.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn alphas_are_linear_in_prices() {
        let a = penalty_coefficients(&tiny_instance(3, 10.0, 4.0, 1.0));
        let b = penalty_coefficients(&tiny_instance(3, 20.0, 8.0, 2.0));
        assert_eq!(2.0 * a.alpha_p_imb, b.alpha_p_imb);
        assert_eq!(2.0 * a.alpha_i_viol, b.alpha_i_viol);
    }

    #[test]
    fn empty_bids_give_zero_alphas() {
        let mut inst = tiny_instance(2, 0.0, 0.0, 0.0);
        inst.buyers[0].blocks = vec![vec![]];
        inst.sellers[0].blocks = vec![vec![]];
        let c = penalty_coefficients(&inst);
        assert_eq!((c.alpha_welfare, c.alpha_p_imb, c.alpha_i_viol), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_period_has_no_uptime_rows() {
        let inst = tiny_instance(2, 30.0, 10.0, 2.0);
        let mut p = ConicProgram::new();
        let vars = build_base_model(&inst, &mut p, &penalty_coefficients(&inst), &Commitment::Relaxed);
        assert!(vars.phi.is_empty());
        assert_eq!(p.count_rows("min_uptime") + p.count_rows("startup"), 0);
    }

    #[test]
    fn multi_period_uptime_rows() {
        let mut inst = tiny_instance(2, 30.0, 10.0, 2.0);
        inst.periods = 4;
        inst.buyers[0].blocks = vec![inst.buyers[0].blocks[0].clone(); 4];
        inst.sellers[0].blocks = vec![inst.sellers[0].blocks[0].clone(); 4];
        inst.sellers[0].min_uptime = 2;
        let mut p = ConicProgram::new();
        build_base_model(&inst, &mut p, &penalty_coefficients(&inst), &Commitment::Relaxed);
        assert_eq!(p.count_rows("startup"), 3);
        assert_eq!(p.count_rows("min_uptime"), 2);
    }

    #[test]
    fn welfare_of_single_trade() {
        let inst = tiny_instance(2, 30.0, 10.0, 2.0);
        let coeffs = penalty_coefficients(&inst);
        let mut p = ConicProgram::new();
        let vars = build_base_model(&inst, &mut p, &coeffs, &Commitment::Relaxed);
        let mut x = vec![0.0; p.n_vars()];
        x[vars.p_btl[0][0][0].0] = 1.0;
        x[vars.p_stl[0][0][0].0] = 1.0;
        x[vars.u[0][0].0] = 1.0;
        let (w, pen) = extract_welfare(&x, &inst, &vars, &coeffs);
        assert_eq!((w, pen), (18.0, 0.0));
        assert_eq!(p.objective.eval(&x), 18.0);
        let empty = vec![0.0; p.n_vars()];
        assert_eq!(extract_welfare(&empty, &inst, &vars, &coeffs).0, 0.0);
    }
}
