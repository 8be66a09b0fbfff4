use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the label bytes; stable across platforms and releases.
fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the sub-stream named `label`, mixed from the run seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(label)))
}

/// The run's random streams: one main stream plus one sub-stream per label
/// (node id, authority id). Adding a node never perturbs another node's draws.
#[derive(Debug, Clone)]
pub struct RngStreams {
    seed: u64,
    main: ChaCha8Rng,
    streams: BTreeMap<String, ChaCha8Rng>,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        RngStreams {
            seed,
            main: ChaCha8Rng::seed_from_u64(seed),
            streams: BTreeMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn main(&mut self) -> &mut ChaCha8Rng {
        &mut self.main
    }

    pub fn stream(&mut self, label: &str) -> &mut ChaCha8Rng {
        let seed = self.seed;
        self.streams
            .entry(label.to_owned())
            .or_insert_with(|| ChaCha8Rng::seed_from_u64(derive_seed(seed, label)))
    }
}
