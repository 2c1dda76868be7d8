//! Clique-decomposed real SDP.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::conic::{ConicProgram, LinExpr, PsdBlock, VarId};
use crate::market::{emit_thermal_socp, MarketVariables, PenaltyCoefficients};
use crate::netmodel::{Complex, MarketInstance};
use crate::relax::{emit_sdp_network_rows, reconstruct_shor, Reconstruction, RelaxError, VoltageProfile};

use super::{assemble_w, expand_real, psd_complete, ChordalError, CliqueDecomposition};

#[derive(Debug, Clone)]
pub struct ChordalHandles {
    pub decomposition: CliqueDecomposition,
    /// `[period][clique]`, each of dimension `2|C|`.
    pub blocks: Vec<Vec<PsdBlock>>,
}

impl ChordalHandles {
    pub fn reconstruct(&self, inst: &MarketInstance, x: &[f64]) -> Result<Reconstruction, RelaxError> {
        let mut v = Vec::with_capacity(self.blocks.len());
        let mut worst = 0.0f64;
        for blocks in &self.blocks {
            let values: Vec<DMatrix<f64>> = blocks.iter().map(|b| b.value(x)).collect();
            let (volts, ratio) = reconstruct_chordal(&values, &self.decomposition, inst.network.ref_bus)?;
            v.push(volts);
            worst = worst.max(ratio);
        }
        Ok(Reconstruction { profile: VoltageProfile { v }, rank_ratio: Some(worst) })
    }
}

fn real_indices(clique: &[usize]) -> Vec<usize> {
    clique.iter().flat_map(|&v| [2 * v, 2 * v + 1]).collect()
}

/// Completes the clique blocks of one period and extracts voltages as for the
/// full SDP. Returns the voltages and `λ₂/λ₁` of the completed matrix.
pub fn reconstruct_chordal(
    values: &[DMatrix<f64>],
    decomposition: &CliqueDecomposition,
    ref_bus: usize,
) -> Result<(Vec<Complex>, f64), RelaxError> {
    let n = decomposition.n_vertices();
    let cliques: Vec<Vec<usize>> = decomposition.cliques.iter().map(|c| real_indices(c)).collect();
    let partial = assemble_w(&cliques, values, 2 * n);
    let (graph, peo) = expand_real(&decomposition.chordal, &decomposition.peo);
    reconstruct_shor(&psd_complete(&partial, &graph, &peo), ref_bus)
}

pub fn emit_chordal_sdp(
    inst: &MarketInstance,
    program: &mut ConicProgram,
    vars: &MarketVariables,
    coeffs: &PenaltyCoefficients,
    decomposition: CliqueDecomposition,
) -> Result<ChordalHandles, RelaxError> {
    let net = &inst.network;
    if decomposition.n_vertices() != net.n_buses() {
        return Err(ChordalError::SizeMismatch { expected: net.n_buses(), got: decomposition.n_vertices() }.into());
    }
    // η: canonical clique for every diagonal and every line.
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    let pairs = (0..net.n_buses()).map(|v| (v, v)).chain(net.lines.iter().map(|l| (l.from.min(l.to), l.from.max(l.to))));
    for (a, b) in pairs {
        let c = decomposition.owner(a, b).ok_or(ChordalError::MissingOwner(a, b))?;
        owner.insert((a, b), c);
    }
    let local: Vec<HashMap<usize, usize>> =
        decomposition.cliques.iter().map(|c| c.iter().enumerate().map(|(k, &v)| (v, k)).collect()).collect();
    let r = net.ref_bus;

    let mut blocks = Vec::with_capacity(inst.periods);
    for t in 0..inst.periods {
        let period_blocks: Vec<PsdBlock> = decomposition
            .cliques
            .iter()
            .enumerate()
            .map(|(i, c)| program.add_psd(&format!("W_t{t}_c{i}"), 2 * c.len()))
            .collect();
        let mut pinned = vec![Vec::new(); period_blocks.len()];
        for (i, block) in period_blocks.iter().enumerate() {
            if let Some(&pr) = local[i].get(&r) {
                program.fix_var(block.entry(2 * pr, 2 * pr), 1.0);
                for k in 0..block.dim {
                    program.fix_var(block.entry(2 * pr + 1, k), 0.0);
                }
                pinned[i].push(pr);
            }
        }
        let is_pinned = |i: usize, a: usize, b: usize| {
            pinned[i].iter().any(|&pr| a == 2 * pr + 1 || b == 2 * pr + 1 || (a == 2 * pr && b == 2 * pr))
        };
        for &(i, j, _) in &decomposition.tree {
            let shared: Vec<usize> =
                decomposition.cliques[i].iter().copied().filter(|v| local[j].contains_key(v)).collect();
            let real: Vec<usize> = real_indices(&shared);
            let pos = |c: usize, g: usize| 2 * local[c][&(g / 2)] + g % 2;
            for (x, &gx) in real.iter().enumerate() {
                for &gy in &real[..=x] {
                    let (ai, bi, aj, bj) = (pos(i, gx), pos(i, gy), pos(j, gx), pos(j, gy));
                    if is_pinned(i, ai, bi) && is_pinned(j, aj, bj) {
                        continue;
                    }
                    let row = LinExpr::term(period_blocks[i].entry(ai, bi), 1.0).add(period_blocks[j].entry(aj, bj), -1.0);
                    program.add_eq(row, 0.0, "overlap");
                }
            }
        }
        let w = |gi: usize, gj: usize| -> VarId {
            let (v, u) = (gi / 2, gj / 2);
            let c = owner[&(v.min(u), v.max(u))];
            period_blocks[c].entry(2 * local[c][&v] + gi % 2, 2 * local[c][&u] + gj % 2)
        };
        emit_sdp_network_rows(inst, program, vars, coeffs, t, &w);
        blocks.push(period_blocks);
    }
    emit_thermal_socp(inst, program, vars, coeffs);
    Ok(ChordalHandles { decomposition, blocks })
}
