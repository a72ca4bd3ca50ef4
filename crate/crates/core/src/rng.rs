//! Seeded random streams for reproducible Monte Carlo.
//!
//! Every replica owns a ChaCha8 stream keyed by the run seed and selected by
//! the replica index, so replicas can be evaluated in any order or on any
//! thread and still see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicaRng = ChaCha8Rng;

/// Independent stream number `replica` of the generator keyed by `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ReplicaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}
