//! Cryptographic primitives shared by every protocol engine.
//!
//! AES-GCM for channel and key-transport encryption, RSA-2048 (OAEP and
//! PKCS#1 v1.5 signatures over SHA-256) for the public-key families, X25519
//! for ephemeral agreement, and HKDF-SHA256 with length-prefixed labels for
//! session key derivation. All randomness flows through an injected
//! [`SimRng`]; nothing here touches ambient entropy.

mod dh;
mod kdf;
mod nonce;
mod pk;
mod sym;

pub use dh::{dh_keygen, dh_shared, DhPublic, DhSecret, DH_PUBLIC_LEN};
pub use kdf::{kdf, labels_digest, KDF_SALT};
pub use nonce::{gen_nonce, Nonce, NonceGenerator, NonceValue, NONCE_LEN};
pub use pk::{
    pk_decrypt, pk_encrypt, sign, verify, AsymKeyPair, PublicKey, Signature, MODULUS_BITS,
    PK_MAX_PLAINTEXT,
};
pub use sym::{
    aead_open, aead_seal, mac, mac_verify, IvCounter, IvSource, KeyBits, Scheme, SealedBox,
    SymKey, AEAD_IV_LEN, AEAD_TAG_LEN, MAC_LEN,
};

use rand::SeedableRng;
use sha2::{Digest, Sha256};

/// The only generator type used across the simulation.
pub type SimRng = rand_chacha::ChaCha20Rng;

/// Generator seeded from a plain `u64`.
pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent generator stream for `label` under `seed`.
pub fn derive_rng(seed: u64, label: &[u8]) -> SimRng {
    let mut h = Sha256::new();
    h.update(b"awn-rng/v1");
    h.update(seed.to_be_bytes());
    h.update((label.len() as u32).to_be_bytes());
    h.update(label);
    SimRng::from_seed(h.finalize().into())
}

pub fn sha256(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("symmetric key must be 128 or 256 bits, got {0} bytes")]
    InvalidKeyLength(usize),
    #[error("integrity check failed")]
    Integrity,
    #[error("public-key decryption failed")]
    Decrypt,
    #[error("plaintext of {len} bytes exceeds the {max}-byte capacity")]
    PlaintextTooLong { len: usize, max: usize },
    #[error("kdf output must be 128 or 256 bits, got {0}")]
    UnsupportedOutputBits(u16),
    #[error("kdf requires at least one non-empty label")]
    EmptyLabels,
    #[error("peer Diffie-Hellman value is low order or the identity")]
    WeakDhPoint,
    #[error("sealed box has scheme {found:?}, expected {expected:?}")]
    WrongScheme { expected: Scheme, found: Scheme },
    #[error("malformed key encoding: {0}")]
    Encoding(String),
    #[error("rsa: {0}")]
    Rsa(String),
}
