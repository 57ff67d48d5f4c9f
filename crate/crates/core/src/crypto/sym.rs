use aes_gcm::aead::AeadInPlace;
use aes_gcm::{Aes128Gcm, Aes256Gcm, KeyInit, Nonce as GcmNonce, Tag};
use hmac::{Hmac, Mac};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::{CryptoError, SimRng};

pub const AEAD_IV_LEN: usize = 12;
pub const AEAD_TAG_LEN: usize = 16;
pub const MAC_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeyBits {
    B128,
    B256,
}

impl KeyBits {
    pub fn from_bits(bits: u16) -> Option<Self> {
        match bits {
            128 => Some(Self::B128),
            256 => Some(Self::B256),
            _ => None,
        }
    }

    pub fn bits(self) -> u16 {
        match self {
            Self::B128 => 128,
            Self::B256 => 256,
        }
    }

    pub fn byte_len(self) -> usize {
        self.bits() as usize / 8
    }
}

/// AES key of 128 or 256 bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SymKey {
    bits: KeyBits,
    material: Vec<u8>,
}

impl SymKey {
    pub fn from_bytes(material: &[u8]) -> Result<Self, CryptoError> {
        let bits = match material.len() {
            16 => KeyBits::B128,
            32 => KeyBits::B256,
            n => return Err(CryptoError::InvalidKeyLength(n)),
        };
        Ok(Self { bits, material: material.to_vec() })
    }

    pub fn generate(rng: &mut SimRng, bits: KeyBits) -> Self {
        let mut material = vec![0u8; bits.byte_len()];
        rng.fill_bytes(&mut material);
        Self { bits, material }
    }

    pub fn bits(&self) -> KeyBits {
        self.bits
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.material
    }
}

impl std::fmt::Debug for SymKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Key bytes stay out of logs; the fingerprint is enough to compare.
        let fp = super::sha256(&self.material);
        write!(f, "SymKey({}, fp={})", self.bits.bits(), hex::encode(&fp[..4]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Aead,
    PublicKey,
}

impl Scheme {
    pub fn tag(self) -> u8 {
        match self {
            Self::Aead => 1,
            Self::PublicKey => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Self::Aead),
            2 => Some(Self::PublicKey),
            _ => None,
        }
    }
}

/// Ciphertext carrier for every `{...}K` term in the protocol flows.
///
/// `header` travels in clear and is authenticated together with the
/// caller-supplied associated data. Public-key boxes use it as the OAEP label
/// and leave `iv` and `tag` empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SealedBox {
    pub scheme: Scheme,
    pub header: Vec<u8>,
    pub iv: Vec<u8>,
    pub body: Vec<u8>,
    pub tag: Vec<u8>,
}

/// Per-key IV counter: 4-byte sender prefix followed by a 64-bit counter.
#[derive(Debug, Clone)]
pub struct IvCounter {
    prefix: [u8; 4],
    next: u64,
}

impl IvCounter {
    pub fn new(prefix: [u8; 4], start: u64) -> Self {
        Self { prefix, next: start }
    }

    fn next_iv(&mut self) -> [u8; AEAD_IV_LEN] {
        let mut iv = [0u8; AEAD_IV_LEN];
        iv[..4].copy_from_slice(&self.prefix);
        iv[4..].copy_from_slice(&self.next.to_be_bytes());
        self.next = self.next.wrapping_add(1);
        iv
    }
}

pub enum IvSource<'a> {
    Counter(&'a mut IvCounter),
    Random(&'a mut SimRng),
    /// Caller-chosen IV; only for known-answer tests.
    Fixed([u8; AEAD_IV_LEN]),
}

impl IvSource<'_> {
    fn draw(self) -> [u8; AEAD_IV_LEN] {
        match self {
            IvSource::Counter(c) => c.next_iv(),
            IvSource::Random(rng) => {
                let mut iv = [0u8; AEAD_IV_LEN];
                rng.fill_bytes(&mut iv);
                iv
            }
            IvSource::Fixed(iv) => iv,
        }
    }
}

fn total_aad(header: &[u8], aad: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 + header.len() + aad.len());
    out.extend_from_slice(&(header.len() as u16).to_be_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(aad);
    out
}

pub fn aead_seal(
    key: &SymKey,
    header: &[u8],
    plaintext: &[u8],
    aad: &[u8],
    iv_source: IvSource<'_>,
) -> SealedBox {
    let iv = iv_source.draw();
    let ad = total_aad(header, aad);
    let mut body = plaintext.to_vec();
    let nonce = GcmNonce::from_slice(&iv);
    let tag = match key.bits {
        KeyBits::B128 => Aes128Gcm::new_from_slice(&key.material)
            .expect("16-byte key")
            .encrypt_in_place_detached(nonce, &ad, &mut body),
        KeyBits::B256 => Aes256Gcm::new_from_slice(&key.material)
            .expect("32-byte key")
            .encrypt_in_place_detached(nonce, &ad, &mut body),
    }
    .expect("plaintext within AES-GCM limits");
    SealedBox {
        scheme: Scheme::Aead,
        header: header.to_vec(),
        iv: iv.to_vec(),
        body,
        tag: tag.to_vec(),
    }
}

pub fn aead_open(key: &SymKey, sealed: &SealedBox, aad: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if sealed.scheme != Scheme::Aead {
        return Err(CryptoError::WrongScheme { expected: Scheme::Aead, found: sealed.scheme });
    }
    if sealed.iv.len() != AEAD_IV_LEN || sealed.tag.len() != AEAD_TAG_LEN {
        return Err(CryptoError::Integrity);
    }
    let ad = total_aad(&sealed.header, aad);
    let mut body = sealed.body.clone();
    let nonce = GcmNonce::from_slice(&sealed.iv);
    let tag = Tag::from_slice(&sealed.tag);
    match key.bits {
        KeyBits::B128 => Aes128Gcm::new_from_slice(&key.material)
            .expect("16-byte key")
            .decrypt_in_place_detached(nonce, &ad, &mut body, tag),
        KeyBits::B256 => Aes256Gcm::new_from_slice(&key.material)
            .expect("32-byte key")
            .decrypt_in_place_detached(nonce, &ad, &mut body, tag),
    }
    .map_err(|_| CryptoError::Integrity)?;
    Ok(body)
}

/// HMAC-SHA256.
pub fn mac(key: &SymKey, data: &[u8]) -> [u8; MAC_LEN] {
    let mut m = <Hmac<Sha256> as Mac>::new_from_slice(key.as_bytes()).expect("hmac accepts any key");
    m.update(data);
    m.finalize().into_bytes().into()
}

pub fn mac_verify(key: &SymKey, data: &[u8], tag: &[u8]) -> bool {
    let mut m = <Hmac<Sha256> as Mac>::new_from_slice(key.as_bytes()).expect("hmac accepts any key");
    m.update(data);
    m.verify_slice(tag).is_ok()
}
