use std::collections::BTreeMap;
use std::sync::Arc;

use super::{EngineError, Role, SessionIds};
use crate::crypto::{AsymKeyPair, KeyBits, PublicKey};
use crate::provisioning::{group_key, long_term_keypair, pairwise_key};
use crate::{Family, NodeId, ProtocolKind};

/// Long-term material held by one node.
#[derive(Debug, Clone, Default)]
pub struct Keystore {
    /// Raw symmetric keys by the peer (or server) they are shared with.
    pub symmetric: BTreeMap<NodeId, Vec<u8>>,
    pub keypair: Option<Arc<AsymKeyPair>>,
    /// Trusted public keys by owner.
    pub public_keys: BTreeMap<NodeId, PublicKey>,
}

/// The principals a deployment provisions keys for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster {
    pub peers: Vec<NodeId>,
    pub server: Option<NodeId>,
}

impl Roster {
    pub fn new(peers: impl IntoIterator<Item = NodeId>, server: Option<NodeId>) -> Self {
        Self { peers: peers.into_iter().collect(), server }
    }
}

pub(crate) fn psk_bits(kind: ProtocolKind) -> KeyBits {
    match kind {
        ProtocolKind::PskNetLayer => KeyBits::B256,
        _ => KeyBits::B128,
    }
}

impl Keystore {
    /// Deterministic material for `node` under `kind`'s deployment model.
    pub fn provision(kind: ProtocolKind, node: NodeId, roster: &Roster) -> Self {
        let mut ks = Keystore::default();
        let others = roster.peers.iter().copied().filter(|p| *p != node);
        let is_server = roster.server == Some(node);
        match kind.family() {
            Family::PreShared => {
                for p in others {
                    let material = match kind {
                        ProtocolKind::PskNetLayer => pairwise_key(node, p, KeyBits::B256),
                        _ => group_key(psk_bits(kind)),
                    };
                    ks.symmetric.insert(p, material);
                }
            }
            Family::SymmetricTkdf => match roster.server {
                Some(s) if is_server => {
                    for p in others {
                        ks.symmetric.insert(p, pairwise_key(p, s, KeyBits::B256));
                    }
                }
                Some(s) => {
                    ks.symmetric.insert(s, pairwise_key(node, s, KeyBits::B256));
                }
                None => {}
            },
            Family::AsymmetricTkdf => {
                ks.keypair = Some(long_term_keypair(node));
                if is_server {
                    for p in others {
                        ks.public_keys.insert(p, long_term_keypair(p).public().clone());
                    }
                } else if let Some(s) = roster.server {
                    ks.public_keys.insert(s, long_term_keypair(s).public().clone());
                }
            }
            Family::OnDemand => {
                ks.keypair = Some(long_term_keypair(node));
                for p in others {
                    ks.public_keys.insert(p, long_term_keypair(p).public().clone());
                }
            }
        }
        ks
    }

    fn sym_len(&self, with: NodeId, allowed: &[usize]) -> Result<(), EngineError> {
        match self.symmetric.get(&with) {
            None => Err(EngineError::Prerequisite(format!("no symmetric key shared with {with}"))),
            Some(k) if !allowed.contains(&k.len()) => Err(EngineError::Prerequisite(format!(
                "key shared with {with} is {} bits",
                k.len() * 8
            ))),
            Some(_) => Ok(()),
        }
    }

    fn need_keypair(&self) -> Result<(), EngineError> {
        self.keypair
            .as_ref()
            .map(|_| ())
            .ok_or_else(|| EngineError::Prerequisite("no long-term key pair".into()))
    }

    fn need_public(&self, of: NodeId) -> Result<(), EngineError> {
        self.public_keys
            .get(&of)
            .map(|_| ())
            .ok_or_else(|| EngineError::Prerequisite(format!("no public key for {of}")))
    }

    pub(crate) fn check_prerequisites(
        &self,
        kind: ProtocolKind,
        role: Role,
        ids: &SessionIds,
    ) -> Result<(), EngineError> {
        let peer = match role {
            Role::Initiator => ids.responder,
            _ => ids.initiator,
        };
        let server = || ids.server.ok_or_else(|| EngineError::Prerequisite("session has no key server".into()));
        match (kind.family(), role) {
            (Family::PreShared | Family::OnDemand, Role::KeyServer) => Err(EngineError::Role(role)),
            (Family::PreShared, _) => {
                let allowed: &[usize] = match kind {
                    ProtocolKind::PskDirect => &[16],
                    ProtocolKind::PskNetLayer => &[32],
                    _ => &[16, 32],
                };
                self.sym_len(peer, allowed)
            }
            (Family::SymmetricTkdf, Role::KeyServer) => {
                server()?;
                if self.symmetric.is_empty() {
                    return Err(EngineError::Prerequisite("server shares no keys".into()));
                }
                for who in self.symmetric.keys() {
                    self.sym_len(*who, &[32])?;
                }
                Ok(())
            }
            (Family::SymmetricTkdf, _) => self.sym_len(server()?, &[32]),
            (Family::AsymmetricTkdf, Role::KeyServer) => {
                server()?;
                self.need_keypair()?;
                if self.public_keys.is_empty() {
                    return Err(EngineError::Prerequisite("empty public-key directory".into()));
                }
                Ok(())
            }
            (Family::AsymmetricTkdf, _) => {
                self.need_keypair()?;
                self.need_public(server()?)
            }
            (Family::OnDemand, _) => {
                self.need_keypair()?;
                self.need_public(peer)
            }
        }
    }
}
