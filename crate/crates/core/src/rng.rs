//! Named random streams derived from one root seed.
//!
//! Each consumer draws from its own ChaCha stream, so enabling or disabling
//! one component never shifts the random numbers another component sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    LabelSampling = 1,
    Potentials = 2,
    Augmentation = 3,
    Init = 4,
    Scene = 5,
}

/// Returns the generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
