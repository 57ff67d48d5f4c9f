use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;

use super::{CryptoCostModel, NodeRole, SimError, Topology};
use crate::crypto::{derive_rng, rng_from_seed, SimRng};
use crate::protocols::{
    Action, FailReason, Keystore, ProtocolEngine, RetransmitPolicy, Role, Roster, SessionIds, SessionKeyMaterial,
    TimerId, Transport,
};
use crate::wire::{FrameKind, Transcript, TranscriptEntry};
use crate::{NodeId, ProtocolKind};

pub const DEFAULT_HORIZON_US: u64 = 3_600_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstablishedAt {
    pub node: NodeId,
    pub time_us: u64,
    pub material: SessionKeyMaterial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "reason")]
pub enum FailureKind {
    Engine(FailReason),
    SetupTimeout,
    StreamReset,
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimFailure {
    pub node: NodeId,
    pub time_us: u64,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimStats {
    /// Protocol messages handed to the network by engines, resends included.
    pub messages_sent: u64,
    /// Engine resends plus transport-level resends.
    pub retransmissions: u64,
    pub wallclock: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub final_time_us: u64,
    pub established: Vec<EstablishedAt>,
    pub failures: Vec<SimFailure>,
}

impl RunReport {
    pub fn established_at(&self, node: NodeId) -> Option<&EstablishedAt> {
        self.established.iter().find(|e| e.node == node)
    }

    /// When the later of the two parties established, if both did.
    pub fn completion_us(&self, a: NodeId, b: NodeId) -> Option<u64> {
        Some(self.established_at(a)?.time_us.max(self.established_at(b)?.time_us))
    }
}

type ConnKey = (NodeId, NodeId);

enum Event {
    Start(NodeId),
    Timer { node: NodeId, id: TimerId },
    Actions { node: NodeId, actions: Vec<Action> },
    Arrive { frame: FrameKind, path: Vec<NodeId>, hop: usize, bytes: Vec<u8>, conn: Option<ConnKey> },
    SetupTimer { conn: ConnKey, gen: u32 },
    SegmentTimer { conn: ConnKey, dir: usize, seq: u32, gen: u32 },
}

struct Scheduled {
    time: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // min-heap on (time, insertion order)
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

#[derive(Default)]
struct Slot {
    engine: Option<ProtocolEngine>,
    busy_until: u64,
}

struct Unacked {
    bytes: Vec<u8>,
    retries: u32,
    gen: u32,
}

#[derive(Default)]
struct Direction {
    next_seq: u32,
    unacked: BTreeMap<u32, Unacked>,
    waiting: Vec<Vec<u8>>,
    expected: u32,
    reorder: BTreeMap<u32, Vec<u8>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Setup {
    SynSent,
    AckSent,
}

struct Conn {
    client: NodeId,
    server: NodeId,
    /// Route from client to server.
    path: Vec<NodeId>,
    ready_at: Option<u64>,
    stage: Setup,
    setup_retries: u32,
    setup_gen: u32,
    dead: bool,
    dirs: [Direction; 2],
}

impl Conn {
    fn route(&self, dir: usize) -> Vec<NodeId> {
        let mut p = self.path.clone();
        if dir == 1 {
            p.reverse();
        }
        p
    }

    fn dir_from(&self, sender: NodeId) -> usize {
        usize::from(sender != self.client)
    }

    fn hops(&self) -> u8 {
        (self.path.len() - 1) as u8
    }
}

/// One simulated network with its engines. Strictly single-threaded.
pub struct Simulator {
    topo: Topology,
    costs: CryptoCostModel,
    stream_policy: RetransmitPolicy,
    rng: SimRng,
    now: u64,
    horizon: u64,
    seq: u64,
    queue: BinaryHeap<Scheduled>,
    slots: BTreeMap<NodeId, Slot>,
    conns: BTreeMap<ConnKey, Conn>,
    transcript: Transcript,
    established: Vec<EstablishedAt>,
    failures: Vec<SimFailure>,
    inbox: BTreeMap<NodeId, Vec<(NodeId, Vec<u8>)>>,
    stats: SimStats,
}

impl Simulator {
    pub fn new(topo: Topology, costs: CryptoCostModel, seed: u64) -> Self {
        Self {
            topo,
            costs,
            stream_policy: RetransmitPolicy::default(),
            rng: rng_from_seed(seed),
            now: 0,
            horizon: DEFAULT_HORIZON_US,
            seq: 0,
            queue: BinaryHeap::new(),
            slots: BTreeMap::new(),
            conns: BTreeMap::new(),
            transcript: Transcript::new(),
            established: Vec::new(),
            failures: Vec::new(),
            inbox: BTreeMap::new(),
            stats: SimStats::default(),
        }
    }

    pub fn with_horizon(mut self, horizon_us: u64) -> Self {
        self.horizon = horizon_us;
        self
    }

    pub fn with_stream_policy(mut self, policy: RetransmitPolicy) -> Self {
        self.stream_policy = policy;
        self
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn engine(&self, node: NodeId) -> Option<&ProtocolEngine> {
        self.slots.get(&node)?.engine.as_ref()
    }

    /// Messages delivered to nodes that have no engine bound.
    pub fn inbox(&self, node: NodeId) -> &[(NodeId, Vec<u8>)] {
        self.inbox.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn stats(&self) -> SimStats {
        let mut s = self.stats.clone();
        s.retransmissions +=
            self.slots.values().filter_map(|x| x.engine.as_ref()).map(|e| e.retransmissions() as u64).sum::<u64>();
        s
    }

    pub fn bytes_on_air(&self) -> u64 {
        self.transcript.entries().iter().map(|e| e.air_len() as u64).sum()
    }

    pub fn stream_ready_at(&self, client: NodeId, server: NodeId) -> Option<u64> {
        self.conns.get(&(client, server))?.ready_at
    }

    pub fn attach_engine(&mut self, node: NodeId, engine: ProtocolEngine) -> Result<(), SimError> {
        let role = self.topo.role(node).ok_or(SimError::UnknownNode(node))?;
        if engine.node() != node {
            return Err(SimError::BindingError(format!("engine for {} bound to {node}", engine.node())));
        }
        let wanted = match engine.role() {
            Role::KeyServer => NodeRole::KeyServer,
            _ => NodeRole::Peer,
        };
        if role != wanted {
            return Err(SimError::BindingError(format!("{node} is a {role:?}, engine is {:?}", engine.role())));
        }
        let ids = engine.ids();
        let mut peers = vec![ids.initiator, ids.responder];
        peers.extend(ids.server);
        for other in peers.into_iter().filter(|p| *p != node) {
            if engine.role() != Role::KeyServer && self.topo.path(node, other).is_none() {
                return Err(SimError::Unreachable { src: node, dst: other });
            }
        }
        let slot = self.slots.entry(node).or_default();
        if slot.engine.is_some() {
            return Err(SimError::BindingError(format!("{node} already has an engine")));
        }
        slot.engine = Some(engine);
        Ok(())
    }

    /// Provisions and binds engines for every party of `ids`, then schedules
    /// the initiator to start at time zero. Every peer in the topology is
    /// provisioned as a member of the deployment, and stream transport adopts
    /// the same retransmission policy as the engines.
    pub fn bind_session(
        &mut self,
        kind: ProtocolKind,
        ids: SessionIds,
        seed: u64,
        policy: RetransmitPolicy,
    ) -> Result<(), SimError> {
        let peers: Vec<NodeId> = self.topo.nodes().filter(|(_, r)| *r == NodeRole::Peer).map(|(n, _)| n).collect();
        let roster = Roster::new(peers, ids.server);
        self.stream_policy = policy;
        let mut roles = vec![Role::Initiator, Role::Responder];
        if kind.needs_server() {
            roles.push(Role::KeyServer);
        }
        for role in roles {
            let node = ids
                .node_for(role)
                .ok_or_else(|| SimError::BindingError(format!("{kind:?} needs a key server")))?;
            let ks = Keystore::provision(kind, node, &roster);
            let rng = derive_rng(seed, format!("engine/{}", node.label()).as_bytes());
            let engine = ProtocolEngine::new(kind, role, ids, &ks, rng)
                .map_err(|e| SimError::BindingError(e.to_string()))?
                .with_retransmit(policy);
            self.attach_engine(node, engine)?;
        }
        self.start(ids.initiator, 0)
    }

    /// Schedules the bound initiator engine on `node` to start at `at_us`.
    pub fn start(&mut self, node: NodeId, at_us: u64) -> Result<(), SimError> {
        match self.engine(node) {
            Some(e) if e.role() == Role::Initiator => {}
            _ => return Err(SimError::BindingError(format!("no initiator engine on {node}"))),
        }
        self.schedule(at_us, Event::Start(node));
        Ok(())
    }

    /// Sends raw bytes as a datagram along the current route.
    pub fn send_datagram(&mut self, src: NodeId, dst: NodeId, bytes: Vec<u8>) -> Result<(), SimError> {
        let path = self.topo.path(src, dst).ok_or(SimError::Unreachable { src, dst })?;
        self.transmit(FrameKind::Datagram, path, 0, bytes, None);
        Ok(())
    }

    /// Begins connection setup from `client` to `server`.
    pub fn open_stream(&mut self, client: NodeId, server: NodeId) -> Result<(), SimError> {
        self.ensure_conn(client, server).map(|_| ())
    }

    /// Queues `bytes` on the stream between the two nodes, opening it first
    /// if necessary.
    pub fn stream_send(&mut self, from: NodeId, to: NodeId, bytes: Vec<u8>) -> Result<(), SimError> {
        let key = self.ensure_conn(from, to)?;
        let conn = self.conns.get_mut(&key).expect("just ensured");
        if conn.dead {
            return Ok(());
        }
        let dir = conn.dir_from(from);
        if conn.ready_at.is_none() {
            conn.dirs[dir].waiting.push(bytes);
        } else {
            self.send_segment(key, dir, bytes);
        }
        Ok(())
    }

    pub fn run_until_idle(&mut self) -> Result<RunReport, SimError> {
        while let Some(top) = self.queue.peek() {
            if top.time > self.horizon {
                return Err(SimError::HorizonExceeded { horizon_us: self.horizon, pending: self.queue.len() });
            }
            let Scheduled { time, event, .. } = self.queue.pop().expect("peeked");
            debug_assert!(time >= self.now);
            self.now = time;
            self.handle(event);
        }
        Ok(RunReport {
            final_time_us: self.now,
            established: self.established.clone(),
            failures: self.failures.clone(),
        })
    }

    fn schedule(&mut self, time: u64, event: Event) {
        self.seq += 1;
        self.queue.push(Scheduled { time, seq: self.seq, event });
    }

    fn fail(&mut self, node: NodeId, kind: FailureKind) {
        self.failures.push(SimFailure { node, time_us: self.now, kind });
    }

    fn handle(&mut self, event: Event) {
        match event {
            Event::Start(node) => self.invoke(node, |e, now| e.start(now).unwrap_or_default()),
            Event::Timer { node, id } => self.invoke(node, |e, now| e.on_timeout(id, now)),
            Event::Actions { node, actions } => self.dispatch(node, actions),
            Event::Arrive { frame, path, hop, bytes, conn } => {
                if hop + 1 < path.len() {
                    self.transmit(frame, path, hop, bytes, conn);
                } else {
                    self.arrive(frame, path, bytes, conn);
                }
            }
            Event::SetupTimer { conn, gen } => self.setup_timeout(conn, gen),
            Event::SegmentTimer { conn, dir, seq, gen } => self.segment_timeout(conn, dir, seq, gen),
        }
    }

    /// Runs one engine step on `node` once its CPU is free and schedules the
    /// resulting actions when the charged compute time has elapsed.
    fn invoke(&mut self, node: NodeId, f: impl FnOnce(&mut ProtocolEngine, u64) -> Vec<Action>) {
        let now = self.now;
        let measure = self.costs.measure_wallclock;
        let Some(slot) = self.slots.get_mut(&node) else { return };
        let Some(engine) = slot.engine.as_mut() else { return };
        let start = now.max(slot.busy_until);
        let t0 = measure.then(Instant::now);
        let actions = f(engine, start);
        if let Some(t0) = t0 {
            self.stats.wallclock += t0.elapsed();
        }
        let ops = engine.take_crypto_ops();
        let done = start + self.costs.cost(engine.kind(), &ops);
        slot.busy_until = done;
        if !actions.is_empty() {
            self.schedule(done, Event::Actions { node, actions });
        }
    }

    fn dispatch(&mut self, node: NodeId, actions: Vec<Action>) {
        for action in actions {
            match action {
                Action::Send { to, bytes, transport, .. } => {
                    self.stats.messages_sent += 1;
                    let sent = match transport {
                        Transport::Datagram => self.send_datagram(node, to, bytes),
                        Transport::Stream => self.stream_send(node, to, bytes),
                    };
                    if sent.is_err() {
                        self.fail(node, FailureKind::Unreachable);
                    }
                }
                Action::StartTimer { id, delay_us } => {
                    self.schedule(self.now + delay_us, Event::Timer { node, id });
                }
                Action::Established(material) => {
                    self.established.push(EstablishedAt { node, time_us: self.now, material });
                }
                Action::Fail(reason) => self.fail(node, FailureKind::Engine(reason)),
            }
        }
    }

    /// Puts a frame on the air for hop `hop -> hop + 1` of `path`.
    fn transmit(&mut self, frame: FrameKind, path: Vec<NodeId>, hop: usize, bytes: Vec<u8>, conn: Option<ConnKey>) {
        let (from, to) = (path[hop], path[hop + 1]);
        let link = *self.topo.link(from, to).expect("routes follow links");
        let lost = link.loss_prob > 0.0 && self.rng.gen::<f64>() < link.loss_prob;
        let jitter = if link.latency_jitter_us > 0 {
            let j = link.latency_jitter_us as i64;
            self.rng.gen_range(-j..=j)
        } else {
            0
        };
        let latency = (link.latency_base_us as i64 + jitter).max(1) as u64;
        let entry = TranscriptEntry {
            time_us: self.now,
            hop_from: from,
            hop_to: to,
            src: path[0],
            dst: *path.last().expect("non-empty"),
            frame,
            bytes: bytes.clone(),
            delivered: !lost,
        };
        self.transcript.push(entry).expect("events run in time order");
        if !lost {
            self.schedule(self.now + latency, Event::Arrive { frame, path, hop: hop + 1, bytes, conn });
        }
    }

    fn arrive(&mut self, frame: FrameKind, path: Vec<NodeId>, bytes: Vec<u8>, conn: Option<ConnKey>) {
        let (src, dst) = (path[0], *path.last().expect("non-empty"));
        match (frame, conn) {
            (FrameKind::Datagram, _) => self.deliver(src, dst, bytes),
            (_, Some(key)) => self.stream_frame(key, frame, src, bytes),
            _ => {}
        }
    }

    fn deliver(&mut self, from: NodeId, to: NodeId, bytes: Vec<u8>) {
        if self.engine(to).is_some() {
            self.invoke(to, |e, now| e.on_message(from, &bytes, now));
        } else {
            self.inbox.entry(to).or_default().push((from, bytes));
        }
    }

    fn ensure_conn(&mut self, from: NodeId, to: NodeId) -> Result<ConnKey, SimError> {
        if self.conns.contains_key(&(from, to)) {
            return Ok((from, to));
        }
        if self.conns.contains_key(&(to, from)) {
            return Ok((to, from));
        }
        let path = self.topo.path(from, to).ok_or(SimError::Unreachable { src: from, dst: to })?;
        let key = (from, to);
        self.conns.insert(
            key,
            Conn {
                client: from,
                server: to,
                path: path.clone(),
                ready_at: None,
                stage: Setup::SynSent,
                setup_retries: 0,
                setup_gen: 0,
                dead: false,
                dirs: Default::default(),
            },
        );
        self.transmit(FrameKind::StreamSyn, path, 0, Vec::new(), Some(key));
        let base = self.setup_base(key);
        self.schedule(self.now + base, Event::SetupTimer { conn: key, gen: 0 });
        Ok(key)
    }

    fn setup_base(&self, key: ConnKey) -> u64 {
        self.stream_policy.base_timeout(2 * self.conns[&key].hops())
    }

    fn setup_timeout(&mut self, key: ConnKey, gen: u32) {
        let policy = self.stream_policy;
        let base = self.setup_base(key);
        let conn = self.conns.get_mut(&key).expect("timers reference live conns");
        if conn.dead || conn.ready_at.is_some() || conn.setup_gen != gen {
            return;
        }
        if conn.setup_retries >= policy.max_retries {
            conn.dead = true;
            let client = conn.client;
            self.fail(client, FailureKind::SetupTimeout);
            return;
        }
        conn.setup_retries += 1;
        conn.setup_gen += 1;
        let frame = match conn.stage {
            Setup::SynSent => FrameKind::StreamSyn,
            Setup::AckSent => FrameKind::StreamAck,
        };
        let (path, retries, gen) = (conn.route(0), conn.setup_retries, conn.setup_gen);
        self.stats.retransmissions += 1;
        self.transmit(frame, path, 0, Vec::new(), Some(key));
        self.schedule(self.now + policy.delay(base, retries), Event::SetupTimer { conn: key, gen });
    }

    fn send_segment(&mut self, key: ConnKey, dir: usize, bytes: Vec<u8>) {
        let base = self.setup_base(key);
        let conn = self.conns.get_mut(&key).expect("live conn");
        let d = &mut conn.dirs[dir];
        let seq = d.next_seq;
        d.next_seq += 1;
        d.unacked.insert(seq, Unacked { bytes: bytes.clone(), retries: 0, gen: 0 });
        let path = conn.route(dir);
        self.transmit(FrameKind::StreamSegment { seq }, path, 0, bytes, Some(key));
        self.schedule(self.now + base, Event::SegmentTimer { conn: key, dir, seq, gen: 0 });
    }

    fn segment_timeout(&mut self, key: ConnKey, dir: usize, seq: u32, gen: u32) {
        let policy = self.stream_policy;
        let base = self.setup_base(key);
        let conn = self.conns.get_mut(&key).expect("live conn");
        if conn.dead {
            return;
        }
        let sender = if dir == 0 { conn.client } else { conn.server };
        let path = conn.route(dir);
        let Some(u) = conn.dirs[dir].unacked.get_mut(&seq) else { return };
        if u.gen != gen {
            return;
        }
        if u.retries >= policy.max_retries {
            conn.dead = true;
            self.fail(sender, FailureKind::StreamReset);
            return;
        }
        u.retries += 1;
        u.gen += 1;
        let (bytes, retries, gen) = (u.bytes.clone(), u.retries, u.gen);
        self.stats.retransmissions += 1;
        self.transmit(FrameKind::StreamSegment { seq }, path, 0, bytes, Some(key));
        self.schedule(self.now + policy.delay(base, retries), Event::SegmentTimer { conn: key, dir, seq, gen });
    }

    fn stream_frame(&mut self, key: ConnKey, frame: FrameKind, src: NodeId, bytes: Vec<u8>) {
        let Some(conn) = self.conns.get_mut(&key) else { return };
        if conn.dead {
            return;
        }
        match frame {
            FrameKind::StreamSyn => {
                if conn.ready_at.is_none() {
                    let path = conn.route(1);
                    self.transmit(FrameKind::StreamSynAck, path, 0, Vec::new(), Some(key));
                }
            }
            FrameKind::StreamSynAck => {
                if conn.ready_at.is_none() {
                    conn.stage = Setup::AckSent;
                    let path = conn.route(0);
                    self.transmit(FrameKind::StreamAck, path, 0, Vec::new(), Some(key));
                }
            }
            FrameKind::StreamAck => {
                if conn.ready_at.is_none() {
                    conn.ready_at = Some(self.now);
                    for dir in 0..2 {
                        let waiting = std::mem::take(&mut self.conns.get_mut(&key).expect("live").dirs[dir].waiting);
                        for b in waiting {
                            self.send_segment(key, dir, b);
                        }
                    }
                }
            }
            FrameKind::StreamSegment { seq } => {
                let dir = conn.dir_from(src);
                let back = conn.route(1 - dir);
                let receiver = *back.first().expect("non-empty");
                let d = &mut conn.dirs[dir];
                let mut ready = Vec::new();
                if seq == d.expected {
                    ready.push(bytes);
                    d.expected += 1;
                    while let Some(b) = d.reorder.remove(&d.expected) {
                        ready.push(b);
                        d.expected += 1;
                    }
                } else if seq > d.expected {
                    d.reorder.insert(seq, bytes);
                }
                self.transmit(FrameKind::StreamSegmentAck { seq }, back, 0, Vec::new(), Some(key));
                for b in ready {
                    self.deliver(src, receiver, b);
                }
            }
            FrameKind::StreamSegmentAck { seq } => {
                // the ack travels opposite to the data it covers
                let dir = 1 - conn.dir_from(src);
                conn.dirs[dir].unacked.remove(&seq);
            }
            FrameKind::Datagram => {}
        }
    }
}
