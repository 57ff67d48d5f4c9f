//! Sans-IO handshake engines.
//!
//! An engine consumes three kinds of events (start, inbound bytes, timer
//! expiry) and returns [`Action`]s. It owns no clock and no socket: the
//! network simulator, the attack harness and unit tests all drive the same
//! engines.
//!
//! Retransmission is uniform across the datagram flows. A party that expects
//! a direct answer to what it just sent arms a timer and resends the cached
//! bytes on expiry, backing off exponentially. Any party that receives a
//! byte-identical copy of a message it already processed re-sends the reply
//! it produced the first time. Stream flows leave reliability to the
//! transport.

mod keystore;
mod psk;
mod sts;
mod tkdf_asym;
mod tkdf_sym;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use keystore::{Keystore, Roster};
pub(crate) use tkdf_sym::ANSWER as TKDF_SYM_ANSWER;

use crate::crypto::{
    aead_open, aead_seal, kdf, labels_digest, mac, mac_verify, pk_decrypt, pk_encrypt, sha256,
    sign, verify, IvCounter, IvSource, NonceGenerator, NonceValue, PublicKey, SealedBox, Signature,
    SimRng, SymKey, MAC_LEN,
};
use crate::wire::{self, decode_fields, encode_fields, Field, WireMessage};
use crate::{NodeId, ProtocolKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Initiator,
    Responder,
    KeyServer,
}

/// Who takes part in one session. `server` is required by the TKDF kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SessionIds {
    pub initiator: NodeId,
    pub responder: NodeId,
    pub server: Option<NodeId>,
}

impl SessionIds {
    pub fn new(initiator: NodeId, responder: NodeId, server: Option<NodeId>) -> Self {
        Self { initiator, responder, server }
    }

    pub fn node_for(&self, role: Role) -> Option<NodeId> {
        match role {
            Role::Initiator => Some(self.initiator),
            Role::Responder => Some(self.responder),
            Role::KeyServer => self.server,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transport {
    Datagram,
    Stream,
}

/// Stack layer a flow runs at; the simulator may apply layer-specific loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layer {
    Link,
    Network,
    Application,
}

pub type TimerId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailReason {
    Timeout,
    IdentityMismatch,
    Authentication,
    Freshness,
    WeakKey,
}

/// Who injected fresh input into a session key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Contributors {
    /// The key was installed before deployment; nobody contributes per run.
    PreProvisioned,
    Fresh(BTreeSet<NodeId>),
}

impl Contributors {
    fn fresh(nodes: &[NodeId]) -> Self {
        Self::Fresh(nodes.iter().copied().collect())
    }

    pub fn contains(&self, node: NodeId) -> bool {
        matches!(self, Self::Fresh(s) if s.contains(&node))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionKeyMaterial {
    pub kind: ProtocolKind,
    pub key: SymKey,
    pub contributors: Contributors,
    /// SHA-256 over the ordered, length-prefixed derivation labels.
    pub inputs_digest: [u8; 32],
    /// The identity this engine believes it shares the key with.
    pub peer: NodeId,
    pub established_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Send { to: NodeId, bytes: Vec<u8>, transport: Transport, layer: Layer },
    StartTimer { id: TimerId, delay_us: u64 },
    Established(SessionKeyMaterial),
    Fail(FailReason),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("missing or invalid key material: {0}")]
    Prerequisite(String),
    #[error("operation not valid for role {0:?}")]
    Role(Role),
    #[error("engine was already started")]
    AlreadyStarted,
    #[error("no session key established yet")]
    NotEstablished,
}

/// Counts of primitive invocations, drained by the simulator to charge
/// virtual compute time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CryptoOps {
    pub aead: u32,
    pub mac: u32,
    pub kdf: u32,
    pub pk_encrypt: u32,
    pub pk_decrypt: u32,
    pub sign: u32,
    pub verify: u32,
    pub dh: u32,
}

impl CryptoOps {
    pub fn total(&self) -> u32 {
        self.aead + self.mac + self.kdf + self.pk_encrypt + self.pk_decrypt + self.sign + self.verify + self.dh
    }
}

/// Retransmission timing. The base timeout for a message whose answer comes
/// back after `legs` one-way hops is `timeout_factor * one_way_estimate_us *
/// legs / 2`; each retry doubles it up to `backoff_cap` times the base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetransmitPolicy {
    pub one_way_estimate_us: u64,
    pub timeout_factor: u64,
    pub max_retries: u32,
    pub backoff_factor: u64,
    pub backoff_cap: u64,
}

impl Default for RetransmitPolicy {
    fn default() -> Self {
        Self { one_way_estimate_us: 1_100, timeout_factor: 4, max_retries: 10, backoff_factor: 2, backoff_cap: 64 }
    }
}

impl RetransmitPolicy {
    pub fn base_timeout(&self, reply_legs: u8) -> u64 {
        (self.timeout_factor * self.one_way_estimate_us * reply_legs as u64 / 2).max(1)
    }

    /// Delay before the `attempt`-th retransmission (0 = the first timer).
    pub fn delay(&self, base: u64, attempt: u32) -> u64 {
        let mult = self.backoff_factor.saturating_pow(attempt).min(self.backoff_cap);
        base.saturating_mul(mult)
    }
}

// ---------------------------------------------------------------------------
// Flow plumbing shared by the per-kind handlers.

pub(crate) struct Out {
    to: NodeId,
    index: u8,
    payload: Vec<Field>,
    /// One-way legs until the direct answer returns; `None` if this party
    /// does not wait on the recipient.
    reply_legs: Option<u8>,
}

impl Out {
    fn awaiting(to: NodeId, index: u8, payload: Vec<Field>, legs: u8) -> Self {
        Self { to, index, payload, reply_legs: Some(legs) }
    }

    fn fire(to: NodeId, index: u8, payload: Vec<Field>) -> Self {
        Self { to, index, payload, reply_legs: None }
    }
}

pub(crate) struct Established {
    key: SymKey,
    contributors: Contributors,
    labels: Vec<Vec<u8>>,
    peer: NodeId,
}

#[derive(Default)]
pub(crate) struct Step {
    sends: Vec<Out>,
    established: Option<Established>,
}

impl Step {
    fn send(out: Out) -> Self {
        Self { sends: vec![out], established: None }
    }

    fn done(mut self, e: Established) -> Self {
        self.established = Some(e);
        self
    }
}

pub(crate) enum Outcome {
    Advance(Step),
    Ignore,
    Fail(FailReason),
}

impl From<FailReason> for Outcome {
    fn from(r: FailReason) -> Self {
        Outcome::Fail(r)
    }
}

/// Turns `Result<T, FailReason>` into an early return of `Outcome::Fail`.
macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(r) => return Outcome::Fail(r),
        }
    };
}
pub(crate) use tri;

pub(crate) trait Handshake: Send {
    fn start(&mut self, cx: &mut Ctx) -> Step;
    fn on_message(&mut self, cx: &mut Ctx, msg: &WireMessage) -> Outcome;
}

pub(crate) struct Ctx {
    kind: ProtocolKind,
    ids: SessionIds,
    me: NodeId,
    rng: SimRng,
    nonces: NonceGenerator,
    iv: IvCounter,
    ops: CryptoOps,
    keys: Keystore,
}

impl Ctx {
    fn nonce(&mut self) -> NonceValue {
        self.nonces.next(&mut self.rng, self.me).value
    }

    fn box_header(&self, purpose: &[u8]) -> Vec<u8> {
        box_header(self.kind, purpose)
    }

    fn sym_key(&self, with: NodeId) -> Result<SymKey, FailReason> {
        self.keys
            .symmetric
            .get(&with)
            .and_then(|m| SymKey::from_bytes(m).ok())
            .ok_or(FailReason::Authentication)
    }

    fn public_key(&self, of: NodeId) -> Result<&PublicKey, FailReason> {
        self.keys.public_keys.get(&of).ok_or(FailReason::Authentication)
    }

    fn seal(&mut self, key: &SymKey, purpose: &[u8], fields: &[Field]) -> SealedBox {
        self.ops.aead += 1;
        let header = self.box_header(purpose);
        aead_seal(key, &header, &encode_fields(fields), &[], IvSource::Counter(&mut self.iv))
    }

    fn open(&mut self, key: &SymKey, sealed: &SealedBox, purpose: &[u8]) -> Result<Vec<Field>, FailReason> {
        if sealed.header != self.box_header(purpose) {
            return Err(FailReason::Authentication);
        }
        self.ops.aead += 1;
        let plain = aead_open(key, sealed, &[]).map_err(|_| FailReason::Authentication)?;
        decode_fields(&plain).map_err(|_| FailReason::Authentication)
    }

    fn pk_seal(&mut self, to: &PublicKey, purpose: &[u8], fields: &[Field]) -> SealedBox {
        self.ops.pk_encrypt += 1;
        let header = self.box_header(purpose);
        pk_encrypt(to, &header, &encode_fields(fields), &mut self.rng).expect("protocol plaintexts fit OAEP capacity")
    }

    fn pk_open(&mut self, sealed: &SealedBox, purpose: &[u8]) -> Result<Vec<Field>, FailReason> {
        if sealed.header != self.box_header(purpose) {
            return Err(FailReason::Authentication);
        }
        let kp = self.keys.keypair.clone().ok_or(FailReason::Authentication)?;
        self.ops.pk_decrypt += 1;
        let plain = pk_decrypt(&kp, sealed).map_err(|_| FailReason::Authentication)?;
        decode_fields(&plain).map_err(|_| FailReason::Authentication)
    }

    fn sign(&mut self, msg: &[u8]) -> Signature {
        self.ops.sign += 1;
        let kp = self.keys.keypair.clone().expect("checked at construction");
        sign(&kp, msg)
    }

    fn verify(&mut self, key: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
        self.ops.verify += 1;
        verify(key, msg, sig)
    }

    fn kdf(&mut self, labels: &[&[u8]], bits: u16) -> SymKey {
        self.ops.kdf += 1;
        kdf(labels, bits).expect("labels are non-empty and bits valid")
    }

    fn mac(&mut self, key: &SymKey, data: &[u8]) -> [u8; MAC_LEN] {
        self.ops.mac += 1;
        mac(key, data)
    }

    fn mac_ok(&mut self, key: &SymKey, data: &[u8], tag: &[u8]) -> bool {
        self.ops.mac += 1;
        mac_verify(key, data, tag)
    }

    /// Domain-separated byte string: kind id, label, then each part
    /// length-prefixed.
    fn transcript(&self, label: &[u8], parts: &[&[u8]]) -> Vec<u8> {
        let mut out = vec![self.kind.wire_id()];
        out.extend_from_slice(&(label.len() as u16).to_be_bytes());
        out.extend_from_slice(label);
        for p in parts {
            out.extend_from_slice(&(p.len() as u16).to_be_bytes());
            out.extend_from_slice(p);
        }
        out
    }
}

/// Header bound into every sealed box: protocol id, then purpose label.
pub(crate) fn box_header(kind: ProtocolKind, purpose: &[u8]) -> Vec<u8> {
    let mut h = vec![kind.wire_id()];
    h.extend_from_slice(purpose);
    h
}

/// The expected sender check every handler performs before touching the
/// payload.
fn expect(msg: &WireMessage, index: u8, from: NodeId) -> Result<bool, FailReason> {
    if msg.msg_index != index {
        return Ok(false);
    }
    if msg.sender != from {
        return Err(FailReason::IdentityMismatch);
    }
    Ok(true)
}

/// The responder's challenge answer in the symmetric TKDF flows.
pub(crate) fn nb_minus_one(nb: &[u8; 16]) -> [u8; 16] {
    (u128::from_le_bytes(*nb).wrapping_sub(1)).to_le_bytes()
}

// ---------------------------------------------------------------------------

struct Pending {
    timer: TimerId,
    sends: Vec<(NodeId, Vec<u8>)>,
    base_delay: u64,
    retries: u32,
}

/// One party's handshake state machine.
pub struct ProtocolEngine {
    role: Role,
    cx: Ctx,
    flow: Box<dyn Handshake>,
    policy: RetransmitPolicy,
    started: bool,
    failed: Option<FailReason>,
    session: Option<SessionKeyMaterial>,
    /// Reply bytes produced for each processed inbound message, by digest.
    replies: HashMap<[u8; 32], Vec<(NodeId, Vec<u8>)>>,
    pending: Option<Pending>,
    next_timer: TimerId,
    retransmissions: u32,
}

impl std::fmt::Debug for ProtocolEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProtocolEngine")
            .field("kind", &self.cx.kind)
            .field("role", &self.role)
            .field("node", &self.cx.me)
            .field("failed", &self.failed)
            .field("established", &self.session.is_some())
            .finish()
    }
}

impl ProtocolEngine {
    pub fn new(
        kind: ProtocolKind,
        role: Role,
        ids: SessionIds,
        keystore: &Keystore,
        rng: SimRng,
    ) -> Result<Self, EngineError> {
        let me = ids.node_for(role).ok_or_else(|| EngineError::Prerequisite("session has no key server".into()))?;
        keystore.check_prerequisites(kind, role, &ids)?;
        let flow: Box<dyn Handshake> = match kind {
            ProtocolKind::PskDirect | ProtocolKind::PskNetLayer => Box::new(psk::Direct::new(role, &ids)?),
            ProtocolKind::PskMaster => Box::new(psk::Master::new(role, &ids)?),
            ProtocolKind::TkdfSym => Box::new(tkdf_sym::TkdfSym::new(true, role, &ids)),
            ProtocolKind::TkdfSymUnfixed => Box::new(tkdf_sym::TkdfSym::new(false, role, &ids)),
            ProtocolKind::TkdfAsym | ProtocolKind::TkdfAsymUnfixed => Box::new(tkdf_asym::TkdfAsym::new(kind == ProtocolKind::TkdfAsym, role, &ids)),
            ProtocolKind::OnDemandSts => Box::new(sts::Sts::new(role, &ids)?),
        };
        let prefix: [u8; 4] = sha256(me.as_bytes())[..4].try_into().expect("4 bytes");
        let mut rng = rng;
        let iv_start = rand::RngCore::next_u64(&mut rng) >> 16;
        Ok(Self {
            role,
            cx: Ctx {
                kind,
                ids,
                me,
                rng,
                nonces: NonceGenerator::default(),
                iv: IvCounter::new(prefix, iv_start),
                ops: CryptoOps::default(),
                keys: keystore.clone(),
            },
            flow,
            policy: RetransmitPolicy::default(),
            started: false,
            failed: None,
            session: None,
            replies: HashMap::new(),
            pending: None,
            next_timer: 0,
            retransmissions: 0,
        })
    }

    pub fn with_retransmit(mut self, policy: RetransmitPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn kind(&self) -> ProtocolKind {
        self.cx.kind
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn node(&self) -> NodeId {
        self.cx.me
    }

    pub fn ids(&self) -> SessionIds {
        self.cx.ids
    }

    pub fn transport(&self) -> Transport {
        transport_for(self.cx.kind)
    }

    pub fn is_failed(&self) -> bool {
        self.failed.is_some()
    }

    pub fn failure(&self) -> Option<FailReason> {
        self.failed
    }

    pub fn is_established(&self) -> bool {
        self.session.is_some()
    }

    /// Timer-driven plus duplicate-driven resends so far.
    pub fn retransmissions(&self) -> u32 {
        self.retransmissions
    }

    pub fn crypto_ops(&self) -> CryptoOps {
        self.cx.ops
    }

    pub fn take_crypto_ops(&mut self) -> CryptoOps {
        std::mem::take(&mut self.cx.ops)
    }

    pub fn session_key(&self) -> Result<&SessionKeyMaterial, EngineError> {
        self.session.as_ref().ok_or(EngineError::NotEstablished)
    }

    pub fn start(&mut self, now: u64) -> Result<Vec<Action>, EngineError> {
        if self.role != Role::Initiator {
            return Err(EngineError::Role(self.role));
        }
        if self.started {
            return Err(EngineError::AlreadyStarted);
        }
        self.started = true;
        let step = self.flow.start(&mut self.cx);
        Ok(self.apply(step, now, None))
    }

    pub fn on_message(&mut self, from: NodeId, bytes: &[u8], now: u64) -> Vec<Action> {
        if self.failed.is_some() {
            return Vec::new();
        }
        let digest = sha256(bytes);
        if let Some(reply) = self.replies.get(&digest) {
            // Our answer was lost (or is still in flight): repeat it verbatim.
            let reply = reply.clone();
            self.retransmissions += reply.len() as u32;
            return reply.into_iter().map(|(to, bytes)| self.send_action(to, bytes)).collect();
        }
        let Ok(msg) = wire::decode(bytes) else {
            return Vec::new();
        };
        if msg.kind != self.cx.kind || msg.receiver != self.cx.me {
            return Vec::new();
        }
        if msg.sender != from {
            return self.fail(FailReason::IdentityMismatch);
        }
        match self.flow.on_message(&mut self.cx, &msg) {
            Outcome::Ignore => Vec::new(),
            Outcome::Fail(r) => self.fail(r),
            Outcome::Advance(step) => {
                self.pending = None;
                self.apply(step, now, Some(digest))
            }
        }
    }

    pub fn on_timeout(&mut self, timer: TimerId, _now: u64) -> Vec<Action> {
        if self.failed.is_some() {
            return Vec::new();
        }
        let Some(p) = self.pending.as_mut() else {
            return Vec::new();
        };
        if p.timer != timer {
            return Vec::new();
        }
        if p.retries >= self.policy.max_retries {
            return self.fail(FailReason::Timeout);
        }
        p.retries += 1;
        let delay = self.policy.delay(p.base_delay, p.retries);
        self.next_timer += 1;
        p.timer = self.next_timer;
        let sends = p.sends.clone();
        let timer = p.timer;
        self.retransmissions += sends.len() as u32;
        let mut out: Vec<Action> = sends.into_iter().map(|(to, b)| self.send_action(to, b)).collect();
        out.push(Action::StartTimer { id: timer, delay_us: delay });
        out
    }

    fn fail(&mut self, reason: FailReason) -> Vec<Action> {
        self.failed = Some(reason);
        self.pending = None;
        vec![Action::Fail(reason)]
    }

    fn send_action(&self, to: NodeId, bytes: Vec<u8>) -> Action {
        Action::Send { to, bytes, transport: self.transport(), layer: layer_for(self.cx.kind) }
    }

    fn apply(&mut self, step: Step, now: u64, inbound: Option<[u8; 32]>) -> Vec<Action> {
        let mut actions = Vec::new();
        let mut sent = Vec::new();
        let mut reply_legs = None;
        for out in step.sends {
            let msg = WireMessage {
                kind: self.cx.kind,
                msg_index: out.index,
                sender: self.cx.me,
                receiver: out.to,
                payload: out.payload,
            };
            let bytes = wire::encode(&msg).expect("handlers build schema-valid messages");
            if out.reply_legs.is_some() {
                reply_legs = out.reply_legs;
            }
            sent.push((out.to, bytes.clone()));
            actions.push(self.send_action(out.to, bytes));
        }
        if let Some(d) = inbound {
            self.replies.insert(d, sent.clone());
        }
        if let (Some(legs), Transport::Datagram) = (reply_legs, self.transport()) {
            let base = self.policy.base_timeout(legs);
            self.next_timer += 1;
            self.pending = Some(Pending { timer: self.next_timer, sends: sent, base_delay: base, retries: 0 });
            actions.push(Action::StartTimer { id: self.next_timer, delay_us: self.policy.delay(base, 0) });
        }
        if let Some(e) = step.established {
            debug_assert!(self.session.is_none(), "established twice");
            let labels: Vec<&[u8]> = e.labels.iter().map(Vec::as_slice).collect();
            let material = SessionKeyMaterial {
                kind: self.cx.kind,
                key: e.key,
                contributors: e.contributors,
                inputs_digest: labels_digest(&labels),
                peer: e.peer,
                established_at: now,
            };
            self.session = Some(material.clone());
            actions.push(Action::Established(material));
        }
        actions
    }
}

pub fn transport_for(kind: ProtocolKind) -> Transport {
    match kind {
        ProtocolKind::OnDemandSts => Transport::Stream,
        _ => Transport::Datagram,
    }
}

pub fn layer_for(kind: ProtocolKind) -> Layer {
    match kind {
        ProtocolKind::PskDirect | ProtocolKind::PskMaster => Layer::Link,
        ProtocolKind::PskNetLayer => Layer::Network,
        _ => Layer::Application,
    }
}
