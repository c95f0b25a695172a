//! Per-node private randomness. Every draw is a pure function of
//! (seed, vertex, stage, round, draw index), so simulated rounds do not
//! depend on the order in which vertices are visited.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::DomainError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRng {
    pub global_seed: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x51_7C_C1_B7_27_22_0A_95, |acc, &p| splitmix(acc ^ splitmix(p)))
}

impl NodeRng {
    pub fn new(global_seed: u64) -> Self {
        Self { global_seed }
    }

    /// Sequential stream for one (vertex, stage, round); the i-th value taken
    /// from it is draw index i.
    pub fn stream(&self, v: usize, stage: u32, round: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix(&[self.global_seed, v as u64, stage as u64, round]))
    }

    /// A single uniform draw keyed by the full five-tuple.
    pub fn draw_uniform<T: Copy>(
        &self,
        v: usize,
        stage: u32,
        round: u64,
        draw: u64,
        set: &[T],
    ) -> Result<T, DomainError> {
        if set.is_empty() {
            return Err(DomainError::EmptySet);
        }
        let mut r = ChaCha8Rng::seed_from_u64(mix(&[
            self.global_seed,
            v as u64,
            stage as u64,
            round,
            draw,
        ]));
        Ok(set[r.gen_range(0..set.len())])
    }

    /// Independent seed for an auxiliary experiment.
    pub fn derive(&self, salt: u64) -> u64 {
        mix(&[self.global_seed, salt])
    }
}

/// Combines iteration, phase and attempt counters into one round id.
pub fn round_id(iteration: u32, phase: u32, attempt: u32) -> u64 {
    ((iteration as u64) << 40) | ((phase as u64) << 32) | attempt as u64
}

pub fn coin(rng: &mut ChaCha8Rng, p: f64) -> bool {
    if p >= 1.0 {
        return true;
    }
    if p <= 0.0 {
        return false;
    }
    rng.gen::<f64>() < p
}

pub fn pick<T: Copy>(rng: &mut ChaCha8Rng, set: &[T]) -> Option<T> {
    if set.is_empty() {
        None
    } else {
        Some(set[rng.gen_range(0..set.len())])
    }
}
