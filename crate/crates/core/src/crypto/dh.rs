use x25519_dalek::{PublicKey as XPublic, StaticSecret};

use super::{CryptoError, SimRng};

pub const DH_PUBLIC_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DhPublic(pub [u8; DH_PUBLIC_LEN]);

/// Ephemeral X25519 secret. Held only for the duration of one handshake.
#[derive(Clone)]
pub struct DhSecret(StaticSecret);

impl std::fmt::Debug for DhSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("DhSecret(..)")
    }
}

pub fn dh_keygen(rng: &mut SimRng) -> (DhPublic, DhSecret) {
    let secret = StaticSecret::random_from_rng(rng);
    let public = XPublic::from(&secret);
    (DhPublic(public.to_bytes()), DhSecret(secret))
}

/// X25519 shared secret. Low-order peer values (including the all-zero
/// identity) produce a non-contributory result and are rejected.
pub fn dh_shared(secret: &DhSecret, peer: &DhPublic) -> Result<[u8; 32], CryptoError> {
    let shared = secret.0.diffie_hellman(&XPublic::from(peer.0));
    if !shared.was_contributory() {
        return Err(CryptoError::WeakDhPoint);
    }
    Ok(shared.to_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{kdf, rng_from_seed};

    #[test]
    fn commutative_over_100_pairs() {
        let mut rng = rng_from_seed(9);
        for _ in 0..100 {
            let (pa, sa) = dh_keygen(&mut rng);
            let (pb, sb) = dh_keygen(&mut rng);
            assert_eq!(dh_shared(&sa, &pb).unwrap(), dh_shared(&sb, &pa).unwrap());
        }
    }

    #[test]
    fn rejects_identity_and_low_order() {
        let mut rng = rng_from_seed(1);
        let (_, s) = dh_keygen(&mut rng);
        assert_eq!(dh_shared(&s, &DhPublic([0; 32])), Err(CryptoError::WeakDhPoint));
        let mut one = [0u8; 32];
        one[0] = 1;
        assert_eq!(dh_shared(&s, &DhPublic(one)), Err(CryptoError::WeakDhPoint));
    }

    #[test]
    fn shared_secret_feeds_equal_session_keys() {
        let mut rng = rng_from_seed(2);
        let (pa, sa) = dh_keygen(&mut rng);
        let (pb, sb) = dh_keygen(&mut rng);
        let za = dh_shared(&sa, &pb).unwrap();
        let zb = dh_shared(&sb, &pa).unwrap();
        let ka = kdf(&[&za, b"Na", b"Nb"], 256).unwrap();
        let kb = kdf(&[&zb, b"Na", b"Nb"], 256).unwrap();
        assert_eq!(ka, kb);
    }
}
