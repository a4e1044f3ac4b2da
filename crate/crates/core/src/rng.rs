//! Shared-randomness streams.
//!
//! Every stream is derived from a 128-bit key, an integer step id and a tag.
//! Candidate streams are counter based: candidate `n` owns ChaCha stream `n`
//! under the derived seed, so it can be regenerated without touching `1..n`.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(pub [u8; 16]);

impl StreamKey {
    /// Expands a 64-bit seed into a key; convenient for tests and the CLI.
    pub fn from_seed(seed: u64) -> Self {
        let digest = Sha256::new()
            .chain_update(b"diffc/key")
            .chain_update(seed.to_le_bytes())
            .finalize();
        let mut key = [0u8; 16];
        key.copy_from_slice(&digest[..16]);
        StreamKey(key)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    Candidates,
    Arrivals,
    Noise,
}

impl StreamTag {
    fn label(self) -> &'static [u8] {
        match self {
            StreamTag::Candidates => b"candidates",
            StreamTag::Arrivals => b"arrivals",
            StreamTag::Noise => b"noise",
        }
    }
}

fn derive_seed(key: &StreamKey, step_id: u64, tag: StreamTag) -> [u8; 32] {
    let digest = Sha256::new()
        .chain_update(b"diffc/v1")
        .chain_update(key.0)
        .chain_update(step_id.to_le_bytes())
        .chain_update(tag.label())
        .finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    seed
}

/// Random-access source of candidate generators for one `(key, step_id)`.
#[derive(Debug, Clone)]
pub struct CandidateStream {
    seed: [u8; 32],
}

impl CandidateStream {
    pub fn new(key: &StreamKey, step_id: u64) -> Self {
        CandidateStream {
            seed: derive_seed(key, step_id, StreamTag::Candidates),
        }
    }

    /// Generator for the candidate with 1-based `index`.
    pub fn candidate(&self, index: u64) -> StreamRng {
        let mut rng = ChaCha12Rng::from_seed(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Sequential generator for an auxiliary sub-stream.
pub fn sequential(key: &StreamKey, step_id: u64, tag: StreamTag) -> StreamRng {
    ChaCha12Rng::from_seed(derive_seed(key, step_id, tag))
}

/// Seeds a report or sample generator from a root seed and a label.
pub fn labelled(root_seed: u64, label: &str) -> StreamRng {
    let digest = Sha256::new()
        .chain_update(b"diffc/label")
        .chain_update(root_seed.to_le_bytes())
        .chain_update(label.as_bytes())
        .finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(seed)
}
