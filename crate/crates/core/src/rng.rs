//! The game's deterministic random number generator.
//!
//! All randomness in a game (deck shuffles, strategy assignment, dice) is
//! drawn from one [`Pcg32`] stored inside the game state, so a game is fully
//! determined by its seed and its event sequence. The algorithm is the
//! reference PCG32 (XSH-RR output, 64-bit LCG state):
//!
//! ```text
//! step:    state' = state * 6364136223846793005 + inc      (mod 2^64)
//! output:  xorshifted = (((state >> 18) ^ state) >> 27) as u32
//!          rot        = (state >> 59) as u32
//!          out        = xorshifted.rotate_right(rot)         (uses the pre-step state)
//! seeding: inc = (stream << 1) | 1; state = 0; step; state += seed; step
//! ```
//!
//! Bounded draws use rejection sampling: with `threshold = (2^32 - n) mod n`,
//! draw `r` until `r >= threshold` and return `r mod n`. Shuffles are
//! Fisher-Yates from the back: for `i` in `len-1 ..= 1`, swap `i` with
//! `below(i + 1)`. See `docs/rng.md` for worked reference values.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const MULTIPLIER: u64 = 6_364_136_223_846_793_005;

/// Stream selector used for every game generator.
pub const GAME_STREAM: u64 = 0x4d69_426f_6172_64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pcg32 {
    state: u64,
    inc: u64,
}

impl Pcg32 {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = Pcg32 {
            state: 0,
            inc: (stream << 1) | 1,
        };
        rng.next_u32();
        rng.state = rng.state.wrapping_add(seed);
        rng.next_u32();
        rng
    }

    /// Generator for a game seeded with `seed`.
    pub fn for_game(seed: u64) -> Self {
        Self::new(seed, GAME_STREAM)
    }

    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.state = old.wrapping_mul(MULTIPLIER).wrapping_add(self.inc);
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    /// Uniform draw from `0..bound`. Panics if `bound == 0`.
    pub fn below(&mut self, bound: u32) -> u32 {
        assert!(bound > 0, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u32();
            if r >= threshold {
                return r % bound;
            }
        }
    }

    /// Uniform draw from `1..=faces`.
    pub fn roll(&mut self, faces: u32) -> u32 {
        self.below(faces) + 1
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u32 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Uniform pick from a non-empty slice.
    pub fn pick<T: Copy>(&mut self, items: &[T]) -> T {
        items[self.below(items.len() as u32) as usize]
    }
}

// Serialized as hex strings so the state survives JSON consumers that only
// have 53-bit integers.
#[derive(Serialize, Deserialize)]
struct Pcg32Repr {
    state: String,
    inc: String,
}

impl Serialize for Pcg32 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        Pcg32Repr {
            state: format!("{:016x}", self.state),
            inc: format!("{:016x}", self.inc),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pcg32 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = Pcg32Repr::deserialize(deserializer)?;
        let parse = |s: &str| u64::from_str_radix(s, 16).map_err(serde::de::Error::custom);
        Ok(Pcg32 {
            state: parse(&repr.state)?,
            inc: parse(&repr.inc)?,
        })
    }
}
