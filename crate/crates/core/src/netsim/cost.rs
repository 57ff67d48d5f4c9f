use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::crypto::{
    aead_seal, derive_rng, dh_keygen, dh_shared, kdf, mac, pk_decrypt, pk_encrypt, sign, verify, IvSource, KeyBits,
    SymKey,
};
use crate::protocols::CryptoOps;
use crate::provisioning::long_term_keypair;
use crate::{Family, NodeId, ProtocolKind};

/// Virtual compute time charged per primitive, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CryptoCostModel {
    pub aead_us: u64,
    pub mac_us: u64,
    pub kdf_us: u64,
    pub pk_encrypt_us: u64,
    pub pk_decrypt_us: u64,
    pub sign_us: u64,
    pub verify_us: u64,
    pub dh_us: u64,
    /// PSK handshakes run in NIC firmware and cost nothing on the host.
    #[serde(default)]
    pub psk_hardware_offload: bool,
    /// Also record real elapsed time spent inside engines.
    #[serde(default)]
    pub measure_wallclock: bool,
}

impl CryptoCostModel {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Frozen output of [`CryptoCostModel::calibrate`] on a release build.
    pub fn reference() -> Self {
        Self {
            aead_us: 1,
            mac_us: 1,
            kdf_us: 1,
            pk_encrypt_us: 165,
            pk_decrypt_us: 1_390,
            sign_us: 1_430,
            verify_us: 163,
            dh_us: 32,
            psk_hardware_offload: true,
            measure_wallclock: false,
        }
    }

    pub fn cost(&self, kind: ProtocolKind, ops: &CryptoOps) -> u64 {
        if self.psk_hardware_offload && kind.family() == Family::PreShared {
            return 0;
        }
        ops.aead as u64 * self.aead_us
            + ops.mac as u64 * self.mac_us
            + ops.kdf as u64 * self.kdf_us
            + ops.pk_encrypt as u64 * self.pk_encrypt_us
            + ops.pk_decrypt as u64 * self.pk_decrypt_us
            + ops.sign as u64 * self.sign_us
            + ops.verify as u64 * self.verify_us
            + ops.dh as u64 * self.dh_us
    }

    /// Times each primitive on this machine, rounding means up to whole
    /// microseconds.
    pub fn calibrate(iterations: u32) -> Self {
        let n = iterations.max(1);
        let mut rng = derive_rng(0, b"calibrate");
        let key = SymKey::generate(&mut rng, KeyBits::B256);
        let kp = long_term_keypair(NodeId::named("calib"));
        let msg = [0x5au8; 64];
        let time = |f: &mut dyn FnMut()| {
            let t = Instant::now();
            for _ in 0..n {
                f();
            }
            (t.elapsed().as_nanos() as u64).div_ceil(n as u64 * 1_000).max(1)
        };
        let aead_us = time(&mut || {
            std::hint::black_box(aead_seal(&key, b"c", &msg, &[], IvSource::Fixed([0; 12])));
        });
        let mac_us = time(&mut || {
            std::hint::black_box(mac(&key, &msg));
        });
        let kdf_us = time(&mut || {
            std::hint::black_box(kdf(&[&msg, &msg], 256).ok());
        });
        let mut enc_rng = derive_rng(1, b"calibrate");
        let sealed = pk_encrypt(kp.public(), b"c", &msg, &mut enc_rng).expect("fits");
        let pk_encrypt_us = time(&mut || {
            std::hint::black_box(pk_encrypt(kp.public(), b"c", &msg, &mut enc_rng).ok());
        });
        let pk_decrypt_us = time(&mut || {
            std::hint::black_box(pk_decrypt(&kp, &sealed).ok());
        });
        let sig = sign(&kp, &msg);
        let sign_us = time(&mut || {
            std::hint::black_box(sign(&kp, &msg));
        });
        let verify_us = time(&mut || {
            std::hint::black_box(verify(kp.public(), &msg, &sig));
        });
        let (peer, _) = dh_keygen(&mut rng);
        let dh_us = time(&mut || {
            let (_, s) = dh_keygen(&mut rng);
            std::hint::black_box(dh_shared(&s, &peer).ok());
        }) / 2;
        Self {
            aead_us,
            mac_us,
            kdf_us,
            pk_encrypt_us,
            pk_decrypt_us,
            sign_us,
            verify_us,
            dh_us: dh_us.max(1),
            psk_hardware_offload: true,
            measure_wallclock: false,
        }
    }
}
