use serde::{Deserialize, Serialize};

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Data = 1,
    Generator = 2,
    Synthetic = 3,
    Discovery = 4,
}

/// Seed for one stage of one run. Depends only on its arguments, so runs can
/// execute in any order or in isolation.
pub fn derive_seed(master: u64, run: usize, stage: Stage) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(run as u64)) ^ stage as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub data: u64,
    pub generator: u64,
    pub synthetic: u64,
    pub discovery: u64,
}

impl RunSeeds {
    pub fn derive(master: u64, run: usize) -> Self {
        RunSeeds {
            data: derive_seed(master, run, Stage::Data),
            generator: derive_seed(master, run, Stage::Generator),
            synthetic: derive_seed(master, run, Stage::Synthetic),
            discovery: derive_seed(master, run, Stage::Discovery),
        }
    }
}
