//! Seeded train/dev split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEV_FRACTION: f64 = 0.2;

/// Shuffles `0..n` with a seeded ChaCha8 stream and returns
/// `(train, dev)` index lists, each sorted. The dev split holds
/// `round(0.2 * n)` rows.
pub fn dev_split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let dev_len = (n as f64 * DEV_FRACTION).round() as usize;
    let mut dev = idx[..dev_len].to_vec();
    let mut train = idx[dev_len..].to_vec();
    dev.sort_unstable();
    train.sort_unstable();
    (train, dev)
}
