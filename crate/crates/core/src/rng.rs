//! Seeding contract for every random draw in the toolkit.
//!
//! A [`Seed`] carries a 64-bit base. Each image gets its own stream seed,
//! the `(index + 1)`-th output of a SplitMix64 sequence started at the base.
//! Stream seeds key a ChaCha8 generator; per-pixel noise additionally selects
//! the ChaCha stream by pixel position, so every pixel's draws depend only on
//! `(base, image_index, pixel_position)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn new(base: u64) -> Self {
        Seed(base)
    }

    pub fn base(self) -> u64 {
        self.0
    }

    pub fn stream_seed(self, index: u64) -> u64 {
        mix64(
            self.0
                .wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))),
        )
    }

    /// Independent child seed, e.g. one per sweep setting.
    pub fn derive(self, index: u64) -> Seed {
        Seed(self.stream_seed(index))
    }

    /// Sequential generator for stream `index`.
    pub fn rng(self, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.stream_seed(index))
    }
}

/// Per-image noise stream addressed by pixel position.
#[derive(Debug, Clone)]
pub struct PixelStreams {
    key: ChaCha8Rng,
}

impl PixelStreams {
    pub fn new(seed: Seed, image_index: u64) -> Self {
        PixelStreams {
            key: seed.rng(image_index),
        }
    }

    /// Generator for the pixel at row-major `position` of the full image.
    pub fn at(&self, position: u64) -> ChaCha8Rng {
        let mut rng = self.key.clone();
        rng.set_stream(position);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of SplitMix64 seeded with 0
        assert_eq!(Seed(0).stream_seed(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(Seed(0).stream_seed(1), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = Seed(42);
        let a: u64 = s.rng(3).random();
        let b: u64 = s.rng(3).random();
        let c: u64 = s.rng(4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);

        let p = PixelStreams::new(s, 0);
        let x: u64 = p.at(10).random();
        let y: u64 = p.at(10).random();
        let z: u64 = p.at(11).random();
        assert_eq!(x, y);
        assert_ne!(x, z);
        let q: u64 = PixelStreams::new(s, 1).at(10).random();
        assert_ne!(x, q);
    }
}
