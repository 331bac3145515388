//! Counter-keyed random substreams.
//!
//! Every random draw in a simulation comes from a ChaCha8 stream whose key
//! packs `(base_seed, trial, purpose, index)` and whose stream id is the time
//! step. Distinct tuples never share a key/stream pair, so results do not
//! depend on the order in which agents, steps or trials are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Part of the key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Purpose {
    Graph = 1,
    Noise = 2,
    Dropout = 3,
    Recursion = 4,
}

/// Root of the seed hierarchy for one experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedTree {
    base_seed: u64,
}

impl SeedTree {
    pub fn new(base_seed: u64) -> Self {
        Self { base_seed }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    /// Seed for trial `index`.
    pub fn trial(&self, index: u64) -> TrialSeed {
        TrialSeed {
            base_seed: self.base_seed,
            trial: index,
        }
    }

    /// Stream used for experiment-level randomness such as graph generation.
    pub fn graph_rng(&self) -> ChaCha8Rng {
        TrialSeed {
            base_seed: self.base_seed,
            trial: u64::MAX,
        }
        .stream(Purpose::Graph, 0, 0)
    }
}

/// Seed of a single trial: `(base_seed, trial)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TrialSeed {
    base_seed: u64,
    trial: u64,
}

impl TrialSeed {
    pub fn new(base_seed: u64, trial: u64) -> Self {
        Self { base_seed, trial }
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    /// Key bytes of the substream for `(purpose, index)`.
    pub fn key(&self, purpose: Purpose, index: u32) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.base_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.trial.to_le_bytes());
        key[16..20].copy_from_slice(&(purpose as u32).to_le_bytes());
        key[20..24].copy_from_slice(&index.to_le_bytes());
        key
    }

    /// Independent generator for `(purpose, index, step)`.
    pub fn stream(&self, purpose: Purpose, index: u32, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key(purpose, index));
        rng.set_stream(step);
        rng
    }
}
