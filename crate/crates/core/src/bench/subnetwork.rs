//! Connected subnetwork sampling.

use std::collections::BTreeSet;

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::netmodel::{Buyer, Line, MarketInstance, Network, Seller};

use super::BenchError;

/// Growth attempts before giving up on finding a buyer and a seller.
const MAX_ATTEMPTS: usize = 10_000;

/// Grows a connected bus set of size `n` from a random start bus, adding a
/// uniformly chosen neighbour of the set at each step, and keeps the lines and
/// participants inside it. Sets without a buyer and a seller are resampled.
/// The reference bus is kept if it is inside the set, otherwise the start bus
/// takes its place.
pub fn sample_connected_subnetwork(inst: &MarketInstance, n: usize, seed: u64) -> Result<MarketInstance, BenchError> {
    let net = &inst.network;
    if n == 0 || n > net.n_buses() {
        return Err(BenchError::SubnetworkSize { requested: n, available: net.n_buses() });
    }
    if inst.sellers.is_empty() {
        return Err(BenchError::NoViableSubnetwork("the instance has no sellers".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let start = rng.gen_range(0..net.n_buses());
        let mut set = BTreeSet::from([start]);
        let mut frontier: BTreeSet<usize> = net.neighbors[start].iter().map(|&(w, _)| w).collect();
        while set.len() < n {
            let v = *frontier.iter().choose(&mut rng).expect("connected network has a frontier");
            frontier.remove(&v);
            set.insert(v);
            frontier.extend(net.neighbors[v].iter().map(|&(w, _)| w).filter(|w| !set.contains(w)));
        }
        let has_seller = inst.sellers.iter().any(|s| set.contains(&s.bus));
        let has_buyer = inst.buyers.iter().any(|b| set.contains(&b.bus));
        if has_seller && has_buyer {
            return restrict(inst, &set, start);
        }
    }
    Err(BenchError::NoViableSubnetwork(format!("no connected {n}-bus set hosts both a buyer and a seller")))
}

fn restrict(inst: &MarketInstance, set: &BTreeSet<usize>, start: usize) -> Result<MarketInstance, BenchError> {
    let net = &inst.network;
    let mut map = vec![usize::MAX; net.n_buses()];
    for (k, &v) in set.iter().enumerate() {
        map[v] = k;
    }
    let buses = set.iter().map(|&v| net.buses[v].clone()).collect();
    let lines = net
        .lines
        .iter()
        .filter(|l| set.contains(&l.from) && set.contains(&l.to))
        .map(|l| Line { from: map[l.from], to: map[l.to], ..l.clone() })
        .collect();
    let ref_bus = if set.contains(&net.ref_bus) { map[net.ref_bus] } else { map[start] };
    let network = Network::new(buses, lines, ref_bus)?;
    let buyers = inst
        .buyers
        .iter()
        .filter(|b| set.contains(&b.bus))
        .map(|b| Buyer { bus: map[b.bus], ..b.clone() })
        .collect();
    let sellers = inst
        .sellers
        .iter()
        .filter(|s| set.contains(&s.bus))
        .map(|s| Seller { bus: map[s.bus], ..s.clone() })
        .collect();
    Ok(MarketInstance::new(network, buyers, sellers, inst.periods)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::generate_synthetic_instance;

    #[test]
    fn full_size_is_identity() {
        let inst = generate_synthetic_instance(20, 4).unwrap();
        assert_eq!(sample_connected_subnetwork(&inst, 20, 9).unwrap(), inst);
    }

    #[test]
    fn deterministic_and_sized() {
        let inst = generate_synthetic_instance(40, 1).unwrap();
        let a = sample_connected_subnetwork(&inst, 12, 5).unwrap();
        assert_eq!(a, sample_connected_subnetwork(&inst, 12, 5).unwrap());
        assert_eq!(a.network.n_buses(), 12);
        assert!(!a.sellers.is_empty() && !a.buyers.is_empty());
    }

    #[test]
    fn single_bus_hosts_both_sides() {
        let inst = generate_synthetic_instance(40, 2).unwrap();
        let sub = sample_connected_subnetwork(&inst, 1, 0).unwrap();
        assert_eq!(sub.network.n_buses(), 1);
        assert_eq!(sub.network.n_lines(), 0);
        assert!(!sub.sellers.is_empty() && !sub.buyers.is_empty());
    }

    #[test]
    fn size_out_of_range() {
        let inst = generate_synthetic_instance(5, 0).unwrap();
        assert!(matches!(sample_connected_subnetwork(&inst, 6, 0), Err(BenchError::SubnetworkSize { .. })));
        assert!(matches!(sample_connected_subnetwork(&inst, 0, 0), Err(BenchError::SubnetworkSize { .. })));
    }
}
