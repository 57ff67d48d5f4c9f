//! Deterministic long-term key material.
//!
//! Long-term keys model what is installed on the nodes before deployment, so
//! they depend only on node identities, never on a run seed. RSA pairs are
//! expensive to generate and are cached for the life of the process.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::crypto::{derive_rng, sha256, AsymKeyPair, KeyBits};
use crate::NodeId;

const PROVISIONING_SEED: u64 = 0x4157_4e2d_5052_4f56;

fn keypair_cache() -> &'static Mutex<HashMap<NodeId, Arc<AsymKeyPair>>> {
    static CACHE: OnceLock<Mutex<HashMap<NodeId, Arc<AsymKeyPair>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// RSA-2048 pair installed on `node`.
pub fn long_term_keypair(node: NodeId) -> Arc<AsymKeyPair> {
    if let Some(kp) = keypair_cache().lock().expect("keypair cache").get(&node) {
        return kp.clone();
    }
    // Generated outside the lock so distinct nodes can be provisioned in parallel.
    let mut label = b"rsa/".to_vec();
    label.extend_from_slice(node.as_bytes());
    let kp = Arc::new(AsymKeyPair::generate(&mut derive_rng(PROVISIONING_SEED, &label)));
    keypair_cache().lock().expect("keypair cache").entry(node).or_insert(kp).clone()
}

fn derived_secret(parts: &[&[u8]], bits: KeyBits) -> Vec<u8> {
    let mut buf = PROVISIONING_SEED.to_be_bytes().to_vec();
    for p in parts {
        buf.extend_from_slice(&(p.len() as u32).to_be_bytes());
        buf.extend_from_slice(p);
    }
    sha256(&buf)[..bits.byte_len()].to_vec()
}

/// Network-wide key shared by every member (WEP / WPA-PSK style).
pub fn group_key(bits: KeyBits) -> Vec<u8> {
    derived_secret(&[b"group", &bits.bits().to_be_bytes()], bits)
}

/// Key configured for one unordered pair of nodes.
pub fn pairwise_key(a: NodeId, b: NodeId, bits: KeyBits) -> Vec<u8> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    derived_secret(&[b"pair", lo.as_bytes(), hi.as_bytes(), &bits.bits().to_be_bytes()], bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_is_symmetric_and_distinct() {
        let (a, b, c) = (NodeId::named("A"), NodeId::named("B"), NodeId::named("C"));
        assert_eq!(pairwise_key(a, b, KeyBits::B256), pairwise_key(b, a, KeyBits::B256));
        assert_ne!(pairwise_key(a, b, KeyBits::B256), pairwise_key(a, c, KeyBits::B256));
        assert_eq!(group_key(KeyBits::B128).len(), 16);
    }

    #[test]
    fn keypairs_are_cached_and_deterministic() {
        let a1 = long_term_keypair(NodeId::named("A"));
        let a2 = long_term_keypair(NodeId::named("A"));
        assert!(Arc::ptr_eq(&a1, &a2));
    }
}
