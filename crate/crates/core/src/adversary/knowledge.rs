//! What a network attacker can compute: everything observed on air plus any
//! compromised long-term material, closed under decryption with known keys.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::crypto::{aead_open, kdf, pk_decrypt, AsymKeyPair, Scheme, SealedBox, SymKey, NONCE_LEN};
use crate::wire::{decode, decode_fields, Field};
use crate::{NodeId, ProtocolKind};

#[derive(Debug, Clone, Default)]
pub struct Knowledge {
    atoms: BTreeSet<Vec<u8>>,
    nonces: BTreeSet<Vec<u8>>,
    keys: BTreeSet<Vec<u8>>,
    boxes: Vec<(SealedBox, bool)>,
    private: Vec<Arc<AsymKeyPair>>,
}

impl Knowledge {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a captured frame; undecodable bytes are kept as a raw atom.
    pub fn observe(&mut self, bytes: &[u8]) {
        match decode(bytes) {
            Ok(msg) => {
                self.atoms.insert(msg.sender.as_bytes().to_vec());
                self.atoms.insert(msg.receiver.as_bytes().to_vec());
                for f in msg.payload {
                    self.learn_field(f);
                }
            }
            Err(_) => {
                self.atoms.insert(bytes.to_vec());
            }
        }
    }

    pub fn learn_key(&mut self, key: &[u8]) {
        self.atoms.insert(key.to_vec());
        self.keys.insert(key.to_vec());
    }

    pub fn learn_private(&mut self, kp: Arc<AsymKeyPair>) {
        self.private.push(kp);
    }

    pub fn learn_public(&mut self, bytes: &[u8]) {
        self.atoms.insert(bytes.to_vec());
    }

    fn learn_field(&mut self, f: Field) {
        match f {
            Field::Identity(id) => {
                self.atoms.insert(id.as_bytes().to_vec());
            }
            Field::Nonce(n) => {
                self.atoms.insert(n.to_vec());
                self.nonces.insert(n.to_vec());
            }
            Field::Sealed(b) => self.boxes.push((b, false)),
            Field::DhPublic(p) => {
                self.atoms.insert(p.0.to_vec());
            }
            Field::Signature(s) => {
                self.atoms.insert(s.0);
            }
            Field::Timestamp(t) => {
                self.atoms.insert(t.to_be_bytes().to_vec());
            }
            Field::PublicKey(der) => {
                self.atoms.insert(der);
            }
            Field::Mac(m) => {
                self.atoms.insert(m.to_vec());
            }
            Field::Key(k) => self.learn_key(&k),
        }
    }

    /// Opens every box some known key opens, repeating until nothing new
    /// is learned.
    pub fn close(&mut self) {
        loop {
            let mut learned = Vec::new();
            for (bx, opened) in self.boxes.iter_mut().filter(|(_, o)| !*o) {
                let plain = match bx.scheme {
                    Scheme::Aead => self
                        .keys
                        .iter()
                        .filter_map(|k| SymKey::from_bytes(k).ok())
                        .find_map(|k| aead_open(&k, bx, &[]).ok()),
                    Scheme::PublicKey => self.private.iter().find_map(|kp| pk_decrypt(kp, bx).ok()),
                };
                if let Some(p) = plain {
                    *opened = true;
                    learned.extend(decode_fields(&p).unwrap_or_default());
                }
            }
            if learned.is_empty() {
                return;
            }
            for f in learned {
                self.learn_field(f);
            }
        }
    }

    pub fn knows(&self, bytes: &[u8]) -> bool {
        self.atoms.contains(bytes)
    }

    pub fn nonces(&self) -> impl Iterator<Item = &Vec<u8>> {
        self.nonces.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Vec<u8>> {
        self.keys.iter()
    }

    pub fn atoms_of_len(&self, len: usize) -> impl Iterator<Item = &Vec<u8>> {
        self.atoms.iter().filter(move |a| a.len() == len)
    }
}

/// How an attacker claims to have obtained a key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Derivation {
    /// The key itself is in the closure.
    Learned,
    /// KDF over hex-encoded labels, each of which must be in the closure.
    Kdf { labels: Vec<String>, bits: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyClaim {
    pub key_hex: String,
    pub derivation: Derivation,
}

impl KeyClaim {
    /// True if `knowledge` really yields the claimed key.
    pub fn holds(&self, knowledge: &Knowledge) -> bool {
        let Ok(key) = hex::decode(&self.key_hex) else { return false };
        match &self.derivation {
            Derivation::Learned => knowledge.knows(&key),
            Derivation::Kdf { labels, bits } => {
                let Ok(labels) = labels.iter().map(hex::decode).collect::<Result<Vec<_>, _>>() else {
                    return false;
                };
                if !labels.iter().all(|l| knowledge.knows(l)) {
                    return false;
                }
                let refs: Vec<&[u8]> = labels.iter().map(Vec::as_slice).collect();
                kdf(&refs, *bits).map(|k| k.as_bytes() == key.as_slice()).unwrap_or(false)
            }
        }
    }
}

/// Every key the attacker can build from `knowledge` using the public
/// derivation rules of `kind` for a session between `a` and `b`.
pub fn candidate_keys(kind: ProtocolKind, knowledge: &Knowledge, a: NodeId, b: NodeId) -> Vec<KeyClaim> {
    let mut out: Vec<KeyClaim> = knowledge
        .keys()
        .map(|k| KeyClaim { key_hex: hex::encode(k), derivation: Derivation::Learned })
        .collect();
    let nonces: Vec<&Vec<u8>> = knowledge.nonces().filter(|n| n.len() == NONCE_LEN).collect();
    let (ab, bb) = (a.as_bytes().to_vec(), b.as_bytes().to_vec());
    let mut kdf_claim = |prefix: Option<&[u8]>, bits: u16| {
        for na in &nonces {
            for nb in &nonces {
                if na == nb {
                    continue;
                }
                let mut labels: Vec<Vec<u8>> = prefix.map(|p| vec![p.to_vec()]).unwrap_or_default();
                labels.extend([na.to_vec(), nb.to_vec(), ab.clone(), bb.clone()]);
                let refs: Vec<&[u8]> = labels.iter().map(Vec::as_slice).collect();
                if let Ok(k) = kdf(&refs, bits) {
                    out.push(KeyClaim {
                        key_hex: hex::encode(k.as_bytes()),
                        derivation: Derivation::Kdf { labels: labels.iter().map(hex::encode).collect(), bits },
                    });
                }
            }
        }
    };
    match kind {
        ProtocolKind::PskMaster => {
            for m in knowledge.keys().cloned().collect::<Vec<_>>() {
                kdf_claim(Some(&m), (m.len() * 8) as u16);
            }
        }
        ProtocolKind::TkdfAsym | ProtocolKind::TkdfAsymUnfixed => kdf_claim(None, 256),
        ProtocolKind::OnDemandSts => {
            // any 32-byte value could be the shared secret
            for z in knowledge.atoms_of_len(32).cloned().collect::<Vec<_>>() {
                kdf_claim(Some(&z), 256);
            }
        }
        _ => {}
    }
    out
}
