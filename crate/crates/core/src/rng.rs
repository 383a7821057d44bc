//! Reproducible random streams keyed by `(master seed, iteration, particle,
//! substep, purpose)`.
//!
//! Each stream is a xoshiro256++ generator whose state is hashed from the
//! master seed and the full stream id with splitmix64. Streams are created on
//! demand, so parallel workers never share generator state.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Init,
    Forward,
    ReverseInit,
    Interim,
    Diffusion,
    Orthogonal,
    RgoForward,
    RgoStep,
    InOut,
    Reference,
    Custom(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 1,
            Purpose::Forward => 2,
            Purpose::ReverseInit => 3,
            Purpose::Interim => 4,
            Purpose::Diffusion => 5,
            Purpose::Orthogonal => 6,
            Purpose::RgoForward => 7,
            Purpose::RgoStep => 8,
            Purpose::InOut => 9,
            Purpose::Reference => 10,
            Purpose::Custom(c) => 0x1_0000_0000 | u64::from(c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub iteration: u64,
    pub particle: u64,
    pub substep: u64,
    pub purpose: Purpose,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream: StreamId,
}

impl SeedSpec {
    pub fn new(master_seed: u64, purpose: Purpose) -> Self {
        Self::at(master_seed, purpose, 0, 0, 0)
    }

    pub fn at(
        master_seed: u64,
        purpose: Purpose,
        iteration: u64,
        particle: u64,
        substep: u64,
    ) -> Self {
        Self {
            master_seed,
            stream: StreamId {
                iteration,
                particle,
                substep,
                purpose,
            },
        }
    }

    pub fn with_particle(mut self, particle: u64) -> Self {
        self.stream.particle = particle;
        self
    }

    pub fn rng(&self) -> StreamRng {
        let s = &self.stream;
        let mut state = splitmix64(self.master_seed);
        for word in [s.purpose.tag(), s.iteration, s.substep, s.particle] {
            state = splitmix64(state ^ word);
        }
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Xoshiro256PlusPlus::from_seed(seed)
    }
}

/// Derives an independent master seed, e.g. one per chain or per repetition.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
