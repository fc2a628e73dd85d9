//! Counter-based seed derivation.
//!
//! A master seed and a cell counter identify an independent ChaCha stream,
//! so the randomness of a sweep cell does not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream 0 of a seed is reserved for channel sampling.
pub fn scenario_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Solver stream `cell` under `seed`. Sweeps use the scheme index, so every
/// swept value sees the same solver randomness.
pub fn solver_rng(seed: u64, cell: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell.wrapping_add(1));
    rng
}
