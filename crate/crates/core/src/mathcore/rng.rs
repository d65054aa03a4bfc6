//! Keyed, reproducible random streams.
//!
//! Every random draw in the simulator comes from a stream keyed by
//! `(master_seed, party, round, tag)`. The key is hashed with SHA-256 into the
//! seed of a ChaCha8 generator, so two streams with different keys are
//! independent and a stream's output never depends on thread scheduling.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};

/// Who owns a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Client(u32),
    Server,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StreamTag {
    BatchSampling,
    DpNoise,
    Gumbel,
    GmmInit,
    DataGen,
    SoftAssign,
    ModelInit,
}

impl StreamTag {
    fn code(self) -> u8 {
        match self {
            StreamTag::BatchSampling => 1,
            StreamTag::DpNoise => 2,
            StreamTag::Gumbel => 3,
            StreamTag::GmmInit => 4,
            StreamTag::DataGen => 5,
            StreamTag::SoftAssign => 6,
            StreamTag::ModelInit => 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct StreamKey {
    master_seed: u64,
    party: Party,
    round: u32,
    tag: StreamTag,
    sub: u64,
}

impl StreamKey {
    fn seed(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"rdpcfl/stream/v1");
        h.update(self.master_seed.to_le_bytes());
        match self.party {
            Party::Client(id) => {
                h.update([0u8]);
                h.update(id.to_le_bytes());
            }
            Party::Server => h.update([1u8, 0, 0, 0, 0]),
        }
        h.update(self.round.to_le_bytes());
        h.update([self.tag.code()]);
        h.update(self.sub.to_le_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        seed
    }
}

/// A deterministic random stream. Implements [`RngCore`], so it can be handed
/// to any `rand` API (shuffles, distributions).
#[derive(Debug, Clone)]
pub struct RngStream {
    key: StreamKey,
    rng: ChaCha8Rng,
}

pub fn derive_stream(master_seed: u64, party: Party, round: u32, tag: StreamTag) -> RngStream {
    RngStream::from_key(StreamKey {
        master_seed,
        party,
        round,
        tag,
        sub: 0,
    })
}

impl RngStream {
    fn from_key(key: StreamKey) -> Self {
        Self {
            rng: ChaCha8Rng::from_seed(key.seed()),
            key,
        }
    }

    /// A fresh stream that shares this stream's key but adds an index, e.g.
    /// one per Monte-Carlo repetition or per candidate model.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream::from_key(StreamKey {
            sub: self.key.sub.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index + 1),
            ..self.key
        })
    }

    pub fn party(&self) -> Party {
        self.key.party
    }

    pub fn round(&self) -> u32 {
        self.key.round
    }

    pub fn tag(&self) -> StreamTag {
        self.key.tag
    }

    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(self)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// One draw from `Gumbel(0, scale)`.
pub fn sample_gumbel(scale: f64, stream: &mut RngStream) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("gumbel scale must be positive and finite, got {scale}")));
    }
    let dist = Gumbel::new(0.0, scale).map_err(|e| invalid(e.to_string()))?;
    Ok(dist.sample(stream))
}

/// One standard normal draw.
#[inline]
pub fn sample_gaussian(stream: &mut RngStream) -> f64 {
    StandardNormal.sample(stream)
}
