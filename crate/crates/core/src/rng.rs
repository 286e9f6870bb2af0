//! Deterministic per-purpose random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a child stream. Each purpose draws from its own ChaCha
/// stream so that, e.g., changing the optimizer never perturbs the topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Topology,
    Shadowing,
    SmallScale,
    Optimizer,
    Baseline,
    Solutions,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Topology => 1,
            Stream::Shadowing => 2,
            Stream::SmallScale => 3,
            Stream::Optimizer => 4,
            Stream::Baseline => 5,
            Stream::Solutions => 6,
        }
    }
}

pub type Rng = ChaCha8Rng;

pub fn child_rng(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Child stream with an extra index, for shards and slots.
pub fn indexed_rng(seed: u64, stream: Stream, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream.id());
    rng
}
