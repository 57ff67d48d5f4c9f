use rsa::pkcs1::{DecodeRsaPublicKey, EncodeRsaPublicKey};
use rsa::traits::PublicKeyParts;
use rsa::{Oaep, Pkcs1v15Sign, RsaPrivateKey, RsaPublicKey};
use sha2::Sha256;

use super::{sha256, CryptoError, Scheme, SealedBox, SimRng};

pub const MODULUS_BITS: usize = 2048;

/// OAEP-SHA256 capacity for a 2048-bit modulus: k - 2*hLen - 2.
pub const PK_MAX_PLAINTEXT: usize = MODULUS_BITS / 8 - 2 * 32 - 2;

/// RSA verification/encryption key, kept alongside its PKCS#1 DER encoding.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PublicKey {
    key: RsaPublicKey,
    der: Vec<u8>,
}

impl PublicKey {
    fn from_rsa(key: RsaPublicKey) -> Self {
        let der = key.to_pkcs1_der().expect("rsa public key encodes").as_bytes().to_vec();
        Self { key, der }
    }

    pub fn from_der(der: &[u8]) -> Result<Self, CryptoError> {
        let key = RsaPublicKey::from_pkcs1_der(der).map_err(|e| CryptoError::Encoding(e.to_string()))?;
        if key.n().bits() != MODULUS_BITS {
            return Err(CryptoError::Encoding(format!("modulus is {} bits", key.n().bits())));
        }
        Ok(Self { key, der: der.to_vec() })
    }

    pub fn to_der(&self) -> &[u8] {
        &self.der
    }

    pub fn fingerprint(&self) -> [u8; 32] {
        sha256(&self.der)
    }
}

impl std::fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublicKey(fp={})", hex::encode(&self.fingerprint()[..4]))
    }
}

/// RSA-2048 key pair used both for key transport and for signatures.
#[derive(Clone)]
pub struct AsymKeyPair {
    public: PublicKey,
    private: RsaPrivateKey,
}

impl AsymKeyPair {
    pub fn generate(rng: &mut SimRng) -> Self {
        let private = RsaPrivateKey::new(rng, MODULUS_BITS).expect("rsa key generation");
        Self { public: PublicKey::from_rsa(private.to_public_key()), private }
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn private(&self) -> &RsaPrivateKey {
        &self.private
    }

    pub fn modulus_bits(&self) -> usize {
        self.private.n().bits()
    }
}

impl std::fmt::Debug for AsymKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AsymKeyPair({:?})", self.public)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature(pub Vec<u8>);

fn oaep(header: &[u8]) -> Oaep {
    Oaep::new_with_label::<Sha256, _>(hex::encode(header))
}

/// RSA-OAEP encryption; `header` is bound as the OAEP label.
pub fn pk_encrypt(
    public: &PublicKey,
    header: &[u8],
    plaintext: &[u8],
    rng: &mut SimRng,
) -> Result<SealedBox, CryptoError> {
    if plaintext.len() > PK_MAX_PLAINTEXT {
        return Err(CryptoError::PlaintextTooLong { len: plaintext.len(), max: PK_MAX_PLAINTEXT });
    }
    let body = public
        .key
        .encrypt(rng, oaep(header), plaintext)
        .map_err(|e| CryptoError::Rsa(e.to_string()))?;
    Ok(SealedBox {
        scheme: Scheme::PublicKey,
        header: header.to_vec(),
        iv: Vec::new(),
        body,
        tag: Vec::new(),
    })
}

pub fn pk_decrypt(private: &AsymKeyPair, sealed: &SealedBox) -> Result<Vec<u8>, CryptoError> {
    if sealed.scheme != Scheme::PublicKey {
        return Err(CryptoError::WrongScheme { expected: Scheme::PublicKey, found: sealed.scheme });
    }
    private.private.decrypt(oaep(&sealed.header), &sealed.body).map_err(|_| CryptoError::Decrypt)
}

/// PKCS#1 v1.5 signature over SHA-256(msg).
pub fn sign(private: &AsymKeyPair, msg: &[u8]) -> Signature {
    let digest = sha256(msg);
    Signature(
        private
            .private
            .sign(Pkcs1v15Sign::new::<Sha256>(), &digest)
            .expect("pkcs1v15 signing with a 2048-bit key"),
    )
}

pub fn verify(public: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
    let digest = sha256(msg);
    public.key.verify(Pkcs1v15Sign::new::<Sha256>(), &digest, &sig.0).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provisioning::long_term_keypair;
    use crate::{crypto::rng_from_seed, NodeId};

    fn pair(label: &str) -> std::sync::Arc<AsymKeyPair> {
        long_term_keypair(NodeId::named(label))
    }

    #[test]
    fn modulus_is_2048() {
        assert_eq!(pair("A").modulus_bits(), 2048);
    }

    #[test]
    fn encrypt_decrypt_roundtrip() {
        let a = pair("A");
        let mut rng = rng_from_seed(3);
        let b = pk_encrypt(a.public(), b"h", b"nonce material", &mut rng).unwrap();
        assert_eq!(pk_decrypt(&a, &b).unwrap(), b"nonce material");
    }

    #[test]
    fn unrelated_keypair_cannot_decrypt() {
        let (a, b) = (pair("A"), pair("B"));
        let mut rng = rng_from_seed(3);
        let sealed = pk_encrypt(a.public(), b"", b"x", &mut rng).unwrap();
        assert_eq!(pk_decrypt(&b, &sealed), Err(CryptoError::Decrypt));
    }

    #[test]
    fn header_is_bound() {
        let a = pair("A");
        let mut rng = rng_from_seed(4);
        let mut sealed = pk_encrypt(a.public(), b"one", b"x", &mut rng).unwrap();
        sealed.header = b"two".to_vec();
        assert_eq!(pk_decrypt(&a, &sealed), Err(CryptoError::Decrypt));
    }

    #[test]
    fn capacity_boundary() {
        // 256-byte modulus, SHA-256 OAEP: 256 - 2*32 - 2 = 190.
        assert_eq!(PK_MAX_PLAINTEXT, 190);
        let a = pair("A");
        let mut rng = rng_from_seed(5);
        let sealed = pk_encrypt(a.public(), b"", &[9u8; 190], &mut rng).unwrap();
        assert_eq!(pk_decrypt(&a, &sealed).unwrap(), vec![9u8; 190]);
        assert_eq!(
            pk_encrypt(a.public(), b"", &[9u8; 191], &mut rng),
            Err(CryptoError::PlaintextTooLong { len: 191, max: 190 })
        );
    }

    #[test]
    fn signatures() {
        let (a, b) = (pair("A"), pair("B"));
        let sig = sign(&a, b"m");
        assert!(verify(a.public(), b"m", &sig));
        assert!(!verify(a.public(), b"m'", &sig));
        assert!(!verify(b.public(), b"m", &sig));
        assert!(!verify(a.public(), b"m", &Signature(vec![0; 3])));
    }

    #[test]
    fn der_roundtrip() {
        let a = pair("A");
        let back = PublicKey::from_der(a.public().to_der()).unwrap();
        assert_eq!(&back, a.public());
        assert!(PublicKey::from_der(b"junk").is_err());
    }
}
