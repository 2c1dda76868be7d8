use std::collections::VecDeque;

use opfrelax::netmodel::{generate_synthetic_instance, line_admittance, load_instance, parse_instance, to_json, Complex};
use opfrelax::Network;
use proptest::prelude::*;

fn bfs_reaches_all(net: &Network) -> bool {
    let mut seen = vec![false; net.n_buses()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for line in &net.lines {
            let w = if line.from == v { line.to } else if line.to == v { line.from } else { continue };
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen.iter().all(|&s| s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn json_round_trip(n in 2usize..40, seed in 0u64..10_000) {
        let inst = generate_synthetic_instance(n, seed).unwrap();
        let back = parse_instance(&to_json(&inst)).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn generated_networks_are_connected(n in 2usize..80, seed in 0u64..10_000) {
        let inst = generate_synthetic_instance(n, seed).unwrap();
        prop_assert!(bfs_reaches_all(&inst.network));
    }

    #[test]
    fn admittance_inverts_impedance(r in 0.0f64..1.0, x in 1e-3f64..1.0) {
        let (g, b) = line_admittance(r, x).unwrap();
        let one = Complex::new(g, b) * Complex::new(r, x);
        prop_assert!((one - Complex::new(1.0, 0.0)).norm() <= 1e-9);
    }
}

#[test]
fn file_round_trip() {
    let inst = generate_synthetic_instance(12, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    std::fs::write(&path, to_json(&inst)).unwrap();
    let loaded = load_instance(&path).unwrap();
    assert_eq!(loaded, inst);
    assert_eq!(to_json(&loaded), to_json(&inst));
}

#[test]
fn synthetic_parameters_in_range() {
    let inst = generate_synthetic_instance(60, 3).unwrap();
    for line in &inst.network.lines {
        assert!((0.5..=3.0).contains(&line.i_max));
        // Recover the impedance r + jx = 1 / (g + jb).
        let z = Complex::new(1.0, 0.0) / line.admittance();
        assert!((0.005 - 1e-12..=0.05 + 1e-12).contains(&z.re));
        assert!((0.02 - 1e-12..=0.2 + 1e-12).contains(&z.im));
    }
    for bus in &inst.network.buses {
        assert_eq!((bus.v_min, bus.v_max), (0.95, 1.05));
    }
    for blocks in inst.buyers.iter().flat_map(|b| &b.blocks) {
        assert!((2..=4).contains(&blocks.len()));
        assert!(blocks.iter().all(|k| (20.0..=60.0).contains(&k.price) && (0.1..=1.0).contains(&k.size)));
    }
    for blocks in inst.sellers.iter().flat_map(|s| &s.blocks) {
        assert!(blocks.iter().all(|k| (5.0..=40.0).contains(&k.price)));
    }
}
