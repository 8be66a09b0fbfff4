//! Keyed message authentication over canonical encodings.

use std::collections::BTreeMap;

use hmac::{Hmac, KeyInit, Mac};
use sha2::{Digest, Sha256};

use crate::ids::KeyId;

pub const MAC_LEN: usize = 32;

pub type MacTag = [u8; MAC_LEN];

type HmacSha256 = Hmac<Sha256>;

pub fn compute_mac(key: &[u8], message: &[u8]) -> MacTag {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    mac.update(message);
    mac.finalize().into_bytes().into()
}

/// Constant-time verification.
pub fn verify_mac(key: &[u8], message: &[u8], tag: &MacTag) -> bool {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    mac.update(message);
    mac.verify_slice(tag).is_ok()
}

/// Derive a fixture key from a label when the scenario does not supply one.
pub fn derive_key(label: &str) -> Vec<u8> {
    Sha256::digest(label.as_bytes()).to_vec()
}

/// Pre-shared symmetric keys, indexed by key id.
#[derive(Clone, Debug, Default)]
pub struct Keyring {
    keys: BTreeMap<KeyId, Vec<u8>>,
}

impl Keyring {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: KeyId, key: Vec<u8>) {
        self.keys.insert(id, key);
    }

    pub fn get(&self, id: &KeyId) -> Option<&[u8]> {
        self.keys.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &KeyId) -> bool {
        self.keys.contains_key(id)
    }
}
