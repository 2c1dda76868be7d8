//! Seeded synthetic market instances.
//!
//! Buses are scattered in the unit square. A random-order nearest-neighbour tree
//! makes the graph connected, then extra edges join buses to their nearest
//! non-neighbours, which keeps the graph planar-ish and the treewidth small, as
//! in real transmission grids.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{line_admittance, Block, Bus, Buyer, InstanceError, Line, MarketInstance, Network, Seller};

const SELLER_SHARE: f64 = 0.15;
const BUYER_SHARE: f64 = 0.65;
const EXTRA_EDGE_RATIO: f64 = 0.35;

/// Number of lines the generator produces for `n` buses.
pub fn synthetic_line_count(n: usize) -> usize {
    let pairs = n * (n - 1) / 2;
    (n - 1 + (EXTRA_EDGE_RATIO * n as f64).ceil() as usize).min(pairs)
}

pub fn generate_synthetic_instance(n: usize, seed: u64) -> Result<MarketInstance, InstanceError> {
    if n < 2 {
        return Err(InstanceError::Invalid("synthetic instances need at least 2 buses".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
    let dist = |a: usize, b: usize| (pos[a].0 - pos[b].0).hypot(pos[a].1 - pos[b].1);

    let mut adjacent = vec![vec![false; n]; n];
    let mut edges = Vec::with_capacity(synthetic_line_count(n));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    for k in 1..n {
        let v = order[k];
        let w = *order[..k]
            .iter()
            .min_by(|&&a, &&b| dist(v, a).total_cmp(&dist(v, b)))
            .expect("at least one placed bus");
        adjacent[v][w] = true;
        adjacent[w][v] = true;
        edges.push((v.min(w), v.max(w)));
    }
    let target = synthetic_line_count(n);
    while edges.len() < target {
        let v = rng.gen_range(0..n);
        let nearest = (0..n)
            .filter(|&w| w != v && !adjacent[v][w])
            .min_by(|&a, &b| dist(v, a).total_cmp(&dist(v, b)));
        if let Some(w) = nearest {
            adjacent[v][w] = true;
            adjacent[w][v] = true;
            edges.push((v.min(w), v.max(w)));
        }
    }
    edges.sort_unstable();

    let buses = (0..n).map(|i| Bus { id: format!("{i}"), v_min: 0.95, v_max: 1.05 }).collect();
    let mut lines = Vec::with_capacity(edges.len());
    for &(a, b) in &edges {
        let r = rng.gen_range(0.005..=0.05);
        let x = rng.gen_range(0.02..=0.2);
        let (g, bb) = line_admittance(r, x)?;
        lines.push(Line {
            id: format!("{a}-{b}"),
            from: a,
            to: b,
            g,
            b: bb,
            i_max: rng.gen_range(0.5..=3.0),
        });
    }

    let blocks = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Vec<Block> {
        let count = rng.gen_range(2..=4);
        (0..count)
            .map(|_| Block { size: rng.gen_range(0.1..=1.0), price: rng.gen_range(lo..=hi) })
            .collect()
    };
    let mut seller_buses: Vec<usize> = (0..n).filter(|_| rng.gen_bool(SELLER_SHARE)).collect();
    let mut buyer_buses: Vec<usize> = (0..n).filter(|_| rng.gen_bool(BUYER_SHARE)).collect();
    if seller_buses.is_empty() {
        seller_buses.push(rng.gen_range(0..n));
    }
    if buyer_buses.is_empty() {
        buyer_buses.push(rng.gen_range(0..n));
    }
    let sellers = seller_buses
        .into_iter()
        .map(|bus| {
            let offer = blocks(&mut rng, 5.0, 40.0);
            let cap: f64 = offer.iter().map(|b| b.size).sum();
            Seller {
                bus,
                p_min: 0.0,
                p_max: cap,
                q_min: -0.5 * cap,
                q_max: 0.5 * cap,
                blocks: vec![offer],
                no_load_cost: rng.gen_range(1.0..=10.0),
                min_uptime: 1,
            }
        })
        .collect();
    let buyers = buyer_buses
        .into_iter()
        .map(|bus| {
            let bid = blocks(&mut rng, 20.0, 60.0);
            let cap: f64 = bid.iter().map(|b| b.size).sum();
            Buyer { bus, p_min: 0.0, p_max: cap, q_min: 0.0, q_max: 0.25 * cap, blocks: vec![bid] }
        })
        .collect();

    let network = Network::new(buses, lines, 0)?;
    MarketInstance::new(network, buyers, sellers, 1)
}
