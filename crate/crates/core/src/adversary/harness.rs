//! A network fully controlled by the attacker: every frame passes through
//! the script, which decides whether and where to deliver it.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::crypto::derive_rng;
use crate::protocols::{Action, FailReason, Keystore, ProtocolEngine, Role, Roster, SessionIds, SessionKeyMaterial};
use crate::wire::{decode, decoded_view};
use crate::{NodeId, ProtocolKind};

/// A frame as sent: `from` is the link-level sender, `to` the addressee.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub from: NodeId,
    pub to: NodeId,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceFrame {
    pub from: String,
    pub to: String,
    pub hex: String,
    pub decoded: serde_json::Value,
}

impl From<&Frame> for EvidenceFrame {
    fn from(f: &Frame) -> Self {
        Self {
            from: f.from.label(),
            to: f.to.label(),
            hex: hex::encode(&f.bytes),
            decoded: decode(&f.bytes).map(|m| decoded_view(&m)).unwrap_or(serde_json::Value::Null),
        }
    }
}

#[derive(Default)]
pub struct Harness {
    engines: BTreeMap<NodeId, ProtocolEngine>,
    /// Everything any engine put on air, in order.
    pub captured: Vec<Frame>,
    pub established: Vec<(NodeId, SessionKeyMaterial)>,
    pub failures: Vec<(NodeId, FailReason)>,
}

impl Harness {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, engine: ProtocolEngine) {
        self.engines.insert(engine.node(), engine);
    }

    pub fn engine(&self, node: NodeId) -> Option<&ProtocolEngine> {
        self.engines.get(&node)
    }

    pub fn engines(&self) -> impl Iterator<Item = &ProtocolEngine> {
        self.engines.values()
    }

    pub fn session_of(&self, node: NodeId) -> Option<&SessionKeyMaterial> {
        self.engine(node)?.session_key().ok()
    }

    fn absorb(&mut self, node: NodeId, actions: Vec<Action>) -> Vec<Frame> {
        let mut out = Vec::new();
        for a in actions {
            match a {
                Action::Send { to, bytes, .. } => {
                    let f = Frame { from: node, to, bytes };
                    self.captured.push(f.clone());
                    out.push(f);
                }
                Action::Established(m) => self.established.push((node, m)),
                Action::Fail(r) => self.failures.push((node, r)),
                Action::StartTimer { .. } => {}
            }
        }
        out
    }

    pub fn start(&mut self, node: NodeId) -> Vec<Frame> {
        let acts = self.engines.get_mut(&node).and_then(|e| e.start(0).ok()).unwrap_or_default();
        self.absorb(node, acts)
    }

    /// Hands `bytes` to the engine on `to` as if sent by `from`.
    pub fn inject(&mut self, from: NodeId, to: NodeId, bytes: &[u8]) -> Vec<Frame> {
        let acts = match self.engines.get_mut(&to) {
            Some(e) => e.on_message(from, bytes, 0),
            None => return Vec::new(),
        };
        self.absorb(to, acts)
    }

    /// Delivers frames in FIFO order, each passed through `route` first;
    /// `route` returns the (from, to, bytes) to inject, or `None` to drop.
    pub fn pump(&mut self, initial: Vec<Frame>, mut route: impl FnMut(&Frame) -> Option<Frame>) {
        let mut queue: VecDeque<Frame> = initial.into();
        let mut budget = 1_000;
        while let Some(f) = queue.pop_front() {
            budget -= 1;
            if budget == 0 {
                break;
            }
            if let Some(g) = route(&f) {
                queue.extend(self.inject(g.from, g.to, &g.bytes));
            }
        }
    }

    pub fn run_honest(&mut self, initiator: NodeId) {
        let first = self.start(initiator);
        self.pump(first, |f| Some(f.clone()));
    }
}

/// Engines for all parties of `ids`, provisioned from `roster`.
pub fn honest_session(kind: ProtocolKind, ids: SessionIds, roster: &Roster, seed: u64, tag: &str) -> Harness {
    let mut h = Harness::new();
    let mut roles = vec![Role::Initiator, Role::Responder];
    if kind.needs_server() {
        roles.push(Role::KeyServer);
    }
    for role in roles {
        let node = ids.node_for(role).expect("server present for server kinds");
        let ks = Keystore::provision(kind, node, roster);
        h.add(engine(kind, role, ids, &ks, seed, &format!("{tag}/{}", node.label())));
    }
    h
}

pub fn engine(kind: ProtocolKind, role: Role, ids: SessionIds, ks: &Keystore, seed: u64, tag: &str) -> ProtocolEngine {
    ProtocolEngine::new(kind, role, ids, ks, derive_rng(seed, tag.as_bytes())).expect("scripts provision complete keystores")
}
