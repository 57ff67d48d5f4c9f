use hkdf::Hkdf;
use sha2::{Digest, Sha256};

use super::{CryptoError, KeyBits, SymKey};

pub const KDF_SALT: &[u8] = b"awn-kdf/v1";
const KDF_INFO: &[u8] = b"awn-session-key";

fn length_prefixed(labels: &[&[u8]]) -> Vec<u8> {
    let mut out = Vec::new();
    for l in labels {
        out.extend_from_slice(&(l.len() as u32).to_be_bytes());
        out.extend_from_slice(l);
    }
    out
}

/// HKDF-SHA256 extract-then-expand over length-prefixed labels.
///
/// The input keying material is `u32be(len) || label` for each label in
/// order; the expand step's info is `"awn-session-key" || u16be(out_bits)`.
pub fn kdf(labels: &[&[u8]], out_bits: u16) -> Result<SymKey, CryptoError> {
    let bits = KeyBits::from_bits(out_bits).ok_or(CryptoError::UnsupportedOutputBits(out_bits))?;
    if labels.iter().all(|l| l.is_empty()) {
        return Err(CryptoError::EmptyLabels);
    }
    let ikm = length_prefixed(labels);
    let hk = Hkdf::<Sha256>::new(Some(KDF_SALT), &ikm);
    let mut info = KDF_INFO.to_vec();
    info.extend_from_slice(&out_bits.to_be_bytes());
    let mut okm = vec![0u8; bits.byte_len()];
    hk.expand(&info, &mut okm).expect("okm within hkdf bound");
    SymKey::from_bytes(&okm)
}

/// SHA-256 over the same length-prefixed layout the kdf consumes.
pub fn labels_digest(labels: &[&[u8]]) -> [u8; 32] {
    Sha256::digest(length_prefixed(labels)).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = kdf(&[b"x", b"y"], 256).unwrap();
        let b = kdf(&[b"x", b"y"], 256).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn order_matters() {
        assert_ne!(kdf(&[b"x", b"y"], 128).unwrap(), kdf(&[b"y", b"x"], 128).unwrap());
    }

    #[test]
    fn length_prefix_removes_concatenation_ambiguity() {
        assert_ne!(kdf(&[b"ab", b"c"], 128).unwrap(), kdf(&[b"a", b"bc"], 128).unwrap());
    }

    #[test]
    fn rejects_bad_lengths_and_empty_labels() {
        assert_eq!(kdf(&[b"x"], 192), Err(CryptoError::UnsupportedOutputBits(192)));
        assert_eq!(kdf(&[b"", b""], 128), Err(CryptoError::EmptyLabels));
        assert_eq!(kdf(&[], 128), Err(CryptoError::EmptyLabels));
    }

    // Reference values from Python's hmac/hashlib (RFC 5869 by hand).
    #[test]
    fn golden_vector() {
        let k = kdf(&[b"master", b"Na", b"Nb"], 256).unwrap();
        assert_eq!(hex::encode(k.as_bytes()), "5944c4f9684d12c346578e595fc33850baae7db168b4103ab6c405864a784642");
        let k = kdf(&[b"master", b"Na", b"Nb"], 128).unwrap();
        assert_eq!(hex::encode(k.as_bytes()), "947ef8a0a2aad9d84905c5d065127963");
    }
}
