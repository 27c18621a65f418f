use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random sub-streams derived from one repetition seed, so that
/// changing one consumer never shifts the draws of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Environment = 0,
    ObservationNoise = 1,
    Exp3 = 2,
    MabPower = 3,
    MabFrequency = 4,
    Acquisition = 5,
    Hyperparameters = 6,
    Bco = 7,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
