use opfrelax::qmc::{sobol, Sobol, SobolConfig};
use serde::Deserialize;

#[derive(Deserialize)]
struct Fixture {
    points: Vec<Vec<f64>>,
}

fn reference() -> Vec<Vec<f64>> {
    let text = include_str!("fixtures/sobol_d64.json");
    serde_json::from_str::<Fixture>(text).unwrap().points
}

#[test]
fn matches_reference_implementation_in_64_dimensions() {
    let want = reference();
    let got = sobol(SobolConfig { dimension: 64, log2_n: 7, seed: 0 }).unwrap();
    for (k, (g, w)) in got.iter().zip(&want).enumerate() {
        assert_eq!(g, w, "point {k}");
    }
}

#[test]
fn lower_dimensions_are_prefixes() {
    let want = reference();
    for d in [1, 2, 7, 33] {
        let got = sobol(SobolConfig { dimension: d, log2_n: 6, seed: 0 }).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.as_slice(), &w[..d]);
        }
    }
    let first: Vec<f64> = sobol(SobolConfig { dimension: 1, log2_n: 2, seed: 0 }).unwrap().iter().map(|p| p[0]).collect();
    assert_eq!(&first[..3], &[0.5, 0.75, 0.25]);
}

#[test]
fn digital_shift_is_a_constant_xor() {
    let plain = sobol(SobolConfig { dimension: 8, log2_n: 6, seed: 0 }).unwrap();
    let shifted = sobol(SobolConfig { dimension: 8, log2_n: 6, seed: 99 }).unwrap();
    let bits = |x: f64| (x * 4294967296.0) as u64;
    for j in 0..8 {
        let mask = bits(plain[0][j]) ^ bits(shifted[0][j]);
        assert_ne!(mask, 0);
        for (a, b) in plain.iter().zip(&shifted) {
            assert_eq!(bits(a[j]) ^ bits(b[j]), mask);
        }
    }
}

#[test]
fn generator_and_batch_agree() {
    let mut gen = Sobol::new(5, 3).unwrap();
    let batch = sobol(SobolConfig { dimension: 5, log2_n: 4, seed: 3 }).unwrap();
    for p in &batch {
        assert_eq!(&gen.next_point(), p);
    }
}
