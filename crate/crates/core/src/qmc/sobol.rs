use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::direction_numbers::JOE_KUO;
use super::QmcError;

pub const MAX_DIMENSION: usize = 64;
pub const MAX_LOG2: u32 = 30;
const BITS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SobolConfig {
    pub dimension: usize,
    /// The sequence yields `2^log2_n` points.
    pub log2_n: u32,
    /// 0 gives the plain sequence; any other value applies a random digital shift.
    pub seed: u64,
}

/// Gray-code Sobol generator. The origin is skipped, so the first point is
/// `(0.5, …, 0.5)`.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS as usize]>,
    shift: Vec<u32>,
    state: Vec<u32>,
    index: u64,
}

impl Sobol {
    pub fn new(dimension: usize, seed: u64) -> Result<Self, QmcError> {
        if dimension == 0 || dimension > MAX_DIMENSION {
            return Err(QmcError::Dimension(dimension));
        }
        let mut directions = Vec::with_capacity(dimension);
        let mut first = [0u32; BITS as usize];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - k as u32);
        }
        directions.push(first);
        for &(degree, coeffs, m) in JOE_KUO.iter().take(dimension - 1) {
            let s = degree as usize;
            let mut v = [0u32; BITS as usize];
            for k in 0..s.min(BITS as usize) {
                v[k] = m[k] << (BITS - 1 - k as u32);
            }
            for k in s..BITS as usize {
                let mut x = v[k - s] ^ (v[k - s] >> s);
                for j in 1..s {
                    if (coeffs >> (s - 1 - j)) & 1 == 1 {
                        x ^= v[k - j];
                    }
                }
                v[k] = x;
            }
            directions.push(v);
        }
        let shift = if seed == 0 {
            vec![0; dimension]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..dimension).map(|_| rng.next_u32()).collect()
        };
        Ok(Sobol { directions, shift, state: vec![0; dimension], index: 0 })
    }

    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    /// Next point; panics after `2^32 − 1` points.
    pub fn next_point(&mut self) -> Vec<f64> {
        let c = (!self.index).trailing_zeros() as usize;
        assert!(c < BITS as usize, "Sobol sequence exhausted");
        self.index += 1;
        for (x, dir) in self.state.iter_mut().zip(&self.directions) {
            *x ^= dir[c];
        }
        let scale = 1.0 / (1u64 << BITS) as f64;
        self.state.iter().zip(&self.shift).map(|(&x, &s)| (x ^ s) as f64 * scale).collect()
    }
}

/// The first `2^log2_n` points after the origin.
pub fn sobol(config: SobolConfig) -> Result<Vec<Vec<f64>>, QmcError> {
    if config.log2_n > MAX_LOG2 {
        return Err(QmcError::SampleCount(config.log2_n));
    }
    let mut gen = Sobol::new(config.dimension, config.seed)?;
    Ok((0..1u64 << config.log2_n).map(|_| gen.next_point()).collect())
}
