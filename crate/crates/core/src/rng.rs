//! Reproducible random streams.
//!
//! Each independent unit of work (a chain, a ladder rung, a simulated
//! network) gets its own ChaCha stream derived from the run seed, so results
//! do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains keep different consumers of one seed apart.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Domain {
    Chain = 1,
    Imputation = 2,
    Gof = 3,
    MleDraws = 4,
    Curvature = 5,
    Ladder = 6,
    Evidence = 7,
    Rung = 8,
    Simulate = 9,
    Mask = 10,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) ^ index);
    rng
}

/// Like [`stream`] with a second index, e.g. (iteration, draw).
pub fn substream(seed: u64, domain: Domain, outer: u64, inner: u64) -> StreamRng {
    let mixed = seed ^ outer.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    stream(mixed, domain, inner)
}
