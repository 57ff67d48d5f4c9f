//! Scripted Dolev-Yao attacker.
//!
//! The attacker sees every frame, can drop, redirect, rewrite and replay
//! them, holds any long-term material a script hands it, and can run
//! protocol engines of its own. It never breaks a primitive. Any key it
//! claims must be rebuilt from the recorded evidence alone by
//! [`verify_evidence`], which re-derives knowledge independently of the
//! script that produced the claim.

mod harness;
mod knowledge;
mod scripts;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub use harness::{EvidenceFrame, Frame, Harness};
pub use knowledge::{candidate_keys, Derivation, KeyClaim, Knowledge};
pub use scripts::{honest_keystore, honest_run, run_attack};

use crate::goals::Goal;
use crate::protocols::{Keystore, Role};
use crate::provisioning::long_term_keypair;
use crate::{NodeId, ProtocolKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "script")]
pub enum AttackScript {
    /// Passive capture of one honest run.
    Eavesdrop,
    /// Replays a recorded initiator run to a fresh responder, answering its
    /// challenge if the old session key is known.
    Replay { compromised_old_key: bool },
    /// Lowe's interleaving: a legitimate intruder relays between two runs.
    LoweMitm,
    /// Uses `compromised`'s long-term material to pose as another member
    /// toward a third member.
    KciImpersonation { compromised: NodeId },
    /// Records a run, then obtains the listed nodes' long-term material.
    CompromiseAndDecryptPast { compromised: Vec<NodeId> },
    /// An insider registers the initiator's public key as its own and
    /// relabels the initiator's messages.
    UnknownKeyShare,
    /// Scans captured frames for cleartext identities.
    PrivacyProbe,
    /// A non-member with fresh credentials poses as one party to the other.
    OutsiderImpersonation { target: Role },
}

impl AttackScript {
    pub fn goal_refs(&self) -> Vec<Goal> {
        match self {
            Self::Eavesdrop => vec![Goal::G10],
            Self::Replay { .. } => vec![Goal::G5],
            Self::LoweMitm => vec![Goal::G1, Goal::G8],
            Self::KciImpersonation { .. } => vec![Goal::G9],
            Self::CompromiseAndDecryptPast { .. } => vec![Goal::G10],
            Self::UnknownKeyShare => vec![Goal::G8],
            Self::PrivacyProbe => vec![Goal::G13],
            Self::OutsiderImpersonation { .. } => vec![Goal::G1],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Eavesdrop => "eavesdrop",
            Self::Replay { compromised_old_key: false } => "replay",
            Self::Replay { compromised_old_key: true } => "replay-compromised",
            Self::LoweMitm => "lowe-mitm",
            Self::KciImpersonation { .. } => "kci",
            Self::CompromiseAndDecryptPast { .. } => "compromise-past",
            Self::UnknownKeyShare => "unknown-key-share",
            Self::PrivacyProbe => "privacy-probe",
            Self::OutsiderImpersonation { target: Role::Responder } => "outsider-responder",
            Self::OutsiderImpersonation { .. } => "outsider-initiator",
        }
    }

    pub const NAMES: [&'static str; 10] = [
        "eavesdrop",
        "replay",
        "replay-compromised",
        "lowe-mitm",
        "kci",
        "compromise-past",
        "unknown-key-share",
        "privacy-probe",
        "outsider-initiator",
        "outsider-responder",
    ];
}

impl fmt::Display for AttackScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown attack script {0:?}")]
pub struct UnknownScript(pub String);

impl FromStr for AttackScript {
    type Err = UnknownScript;

    /// Named scripts use the standard cast: alice initiates to bob, carol is
    /// a third member.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "eavesdrop" => Self::Eavesdrop,
            "replay" => Self::Replay { compromised_old_key: false },
            "replay-compromised" => Self::Replay { compromised_old_key: true },
            "lowe-mitm" => Self::LoweMitm,
            "kci" => Self::KciImpersonation { compromised: scripts::alice() },
            "compromise-past" => Self::CompromiseAndDecryptPast { compromised: vec![scripts::alice(), scripts::bob()] },
            "unknown-key-share" => Self::UnknownKeyShare,
            "privacy-probe" => Self::PrivacyProbe,
            "outsider-initiator" => Self::OutsiderImpersonation { target: Role::Initiator },
            "outsider-responder" => Self::OutsiderImpersonation { target: Role::Responder },
            other => return Err(UnknownScript(other.to_string())),
        })
    }
}

/// Long-term material handed to the attacker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompromisedMaterial {
    pub owner: String,
    pub symmetric_hex: Vec<String>,
    /// The owner's private key is known.
    pub private_key: bool,
}

impl CompromisedMaterial {
    pub fn from_keystore(owner: NodeId, ks: &Keystore) -> Self {
        Self {
            owner: owner.label(),
            symmetric_hex: ks.symmetric.values().map(hex::encode).collect(),
            private_key: ks.keypair.is_some(),
        }
    }

    pub fn symmetric(owner: NodeId, keys: &[&[u8]]) -> Self {
        Self { owner: owner.label(), symmetric_hex: keys.iter().map(hex::encode).collect(), private_key: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Evidence {
    pub frames: Vec<EvidenceFrame>,
    pub compromised: Vec<CompromisedMaterial>,
    pub derived_keys: Vec<KeyClaim>,
    pub notes: Vec<String>,
}

impl Evidence {
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty() && self.derived_keys.is_empty() && self.notes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackOutcome {
    pub protocol: ProtocolKind,
    pub script: AttackScript,
    pub seed: u64,
    pub success: bool,
    pub evidence: Evidence,
    pub goal_refs: Vec<Goal>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttackError {
    #[error("script {script} does not apply to {kind:?}: {reason}")]
    ScriptError { script: String, kind: ProtocolKind, reason: String },
}

/// Rebuilds attacker knowledge from `evidence` alone and checks every key
/// claim against it.
pub fn verify_evidence(evidence: &Evidence) -> bool {
    let mut k = Knowledge::new();
    for f in &evidence.frames {
        match hex::decode(&f.hex) {
            Ok(bytes) => k.observe(&bytes),
            Err(_) => return false,
        }
    }
    for c in &evidence.compromised {
        for s in &c.symmetric_hex {
            match hex::decode(s) {
                Ok(bytes) => k.learn_key(&bytes),
                Err(_) => return false,
            }
        }
        if c.private_key {
            match NodeId::new(&c.owner) {
                Ok(owner) => k.learn_private(long_term_keypair(owner)),
                Err(_) => return false,
            }
        }
    }
    k.close();
    evidence.derived_keys.iter().all(|c| c.holds(&k))
}
