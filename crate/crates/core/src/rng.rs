//! Labeled child streams derived from a single root seed.
//!
//! Each consumer asks for a stream by label (`"lhs-init"`, `"rfm-freq"`,
//! `"weights:17"`, ...). The child seed is the SHA-256 digest of the root seed
//! and the label, so adding a new consumer never shifts any other stream.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn child_seed(&self, label: &str) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.root.to_le_bytes());
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        seed
    }

    /// 64-bit summary of a child stream, handy for seeding nested consumers.
    pub fn child_u64(&self, label: &str) -> u64 {
        let seed = self.child_seed(label);
        u64::from_le_bytes(seed[..8].try_into().expect("8 bytes"))
    }

    pub fn stream(&self, label: &str) -> StreamRng {
        ChaCha20Rng::from_seed(self.child_seed(label))
    }

    pub fn subtree(&self, label: &str) -> SeedTree {
        SeedTree::new(self.child_u64(label))
    }
}

/// Stream for a plain integer seed, used by library entry points that take `seed: u64`.
pub fn stream_from_seed(seed: u64) -> StreamRng {
    SeedTree::new(seed).stream("")
}
