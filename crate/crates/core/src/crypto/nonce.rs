use std::collections::HashSet;

use rand::RngCore;

use super::SimRng;
use crate::NodeId;

pub const NONCE_LEN: usize = 16;

pub type NonceValue = [u8; NONCE_LEN];

/// 128-bit freshness value tagged with the node that drew it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Nonce {
    pub value: NonceValue,
    pub origin: NodeId,
}

pub fn gen_nonce(rng: &mut SimRng, origin: NodeId) -> Nonce {
    let mut value = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut value);
    Nonce { value, origin }
}

/// Nonce source for one engine; remembers every value it handed out.
#[derive(Debug, Default, Clone)]
pub struct NonceGenerator {
    issued: HashSet<NonceValue>,
}

impl NonceGenerator {
    pub fn next(&mut self, rng: &mut SimRng, origin: NodeId) -> Nonce {
        loop {
            let n = gen_nonce(rng, origin);
            if self.issued.insert(n.value) {
                return n;
            }
        }
    }

    pub fn issued(&self) -> usize {
        self.issued.len()
    }
}
