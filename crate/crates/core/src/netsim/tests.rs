use super::*;
use crate::protocols::{RetransmitPolicy, SessionIds};
use crate::wire::FrameKind;
use crate::{NodeId, ProtocolKind};

fn a() -> NodeId {
    NodeId::named("alice")
}
fn b() -> NodeId {
    NodeId::named("bob")
}
fn s() -> NodeId {
    NodeId::named("server")
}

fn pair(link: LinkModel) -> Topology {
    let mut t = Topology::new();
    t.add_node(a(), NodeRole::Peer).add_node(b(), NodeRole::Peer);
    t.connect(a(), b(), link).unwrap();
    t
}

fn ids(kind: ProtocolKind) -> SessionIds {
    SessionIds::new(a(), b(), kind.needs_server().then(s))
}

fn handshake(kind: ProtocolKind, topo: Topology, costs: CryptoCostModel, seed: u64) -> (Simulator, RunReport) {
    let mut sim = Simulator::new(topo, costs, seed);
    sim.bind_session(kind, ids(kind), seed, RetransmitPolicy { max_retries: 200, ..Default::default() }).unwrap();
    let report = sim.run_until_idle().unwrap();
    (sim, report)
}

fn count_delivered(loss: f64, n: usize, seed: u64) -> usize {
    let mut sim = Simulator::new(pair(LinkModel::lossless(1_000).with_loss(loss)), CryptoCostModel::zero(), seed);
    for i in 0..n {
        sim.send_datagram(a(), b(), (i as u32).to_be_bytes().to_vec()).unwrap();
    }
    sim.run_until_idle().unwrap();
    sim.inbox(b()).len()
}

#[test]
fn loss_extremes() {
    assert_eq!(count_delivered(0.0, 1_000, 1), 1_000);
    assert_eq!(count_delivered(1.0, 1_000, 1), 0);
}

#[test]
fn empirical_loss_within_three_sigma() {
    let sigma = (10_000.0f64 * 0.3 * 0.7).sqrt();
    for seed in 0..5 {
        let got = count_delivered(0.3, 10_000, seed) as f64;
        assert!((got - 7_000.0).abs() <= 3.0 * sigma, "seed {seed}: {got}");
    }
}

#[test]
fn empty_queue_returns_at_zero() {
    let mut sim = Simulator::new(pair(LinkModel::default()), CryptoCostModel::zero(), 0);
    let r = sim.run_until_idle().unwrap();
    assert_eq!(r.final_time_us, 0);
    assert!(sim.transcript().is_empty());
}

#[test]
fn unreachable_destination() {
    let mut t = pair(LinkModel::default());
    t.add_node(s(), NodeRole::KeyServer);
    let mut sim = Simulator::new(t, CryptoCostModel::zero(), 0);
    assert_eq!(sim.send_datagram(a(), s(), vec![1]), Err(SimError::Unreachable { src: a(), dst: s() }));
    assert!(sim.open_stream(a(), s()).is_err());
}

#[test]
fn peers_do_not_forward() {
    let c = NodeId::named("carol");
    let mut t = pair(LinkModel::default());
    t.add_node(c, NodeRole::Peer);
    t.connect(b(), c, LinkModel::default()).unwrap();
    assert_eq!(t.path(a(), c), None);
    t.add_node(NodeId::named("relay"), NodeRole::Relay);
    t.connect(a(), NodeId::named("relay"), LinkModel::default()).unwrap();
    t.connect(c, NodeId::named("relay"), LinkModel::default()).unwrap();
    assert_eq!(t.path(a(), c).unwrap().len(), 3);
}

#[test]
fn link_validation_names_fields() {
    let bad = LinkModel { loss_prob: 1.3, latency_base_us: 0, latency_jitter_us: 5, mode: LinkMode::AdHoc };
    let v = bad.violations("links[0]");
    assert_eq!(v.len(), 2, "{v:?}");
    assert!(v[0].contains("loss_prob"));
    let jitter = LinkModel { loss_prob: 0.0, latency_base_us: 10, latency_jitter_us: 10, mode: LinkMode::AdHoc };
    assert!(jitter.violations("x")[0].contains("latency_jitter_us"));
}

#[test]
fn stream_ready_after_one_and_a_half_round_trips() {
    let mut sim = Simulator::new(pair(LinkModel::lossless(1_000)), CryptoCostModel::zero(), 0);
    sim.open_stream(a(), b()).unwrap();
    sim.run_until_idle().unwrap();
    assert_eq!(sim.stream_ready_at(a(), b()), Some(3_000));
    let frames: Vec<FrameKind> = sim.transcript().entries().iter().map(|e| e.frame).collect();
    assert_eq!(frames, [FrameKind::StreamSyn, FrameKind::StreamSynAck, FrameKind::StreamAck]);
}

#[test]
fn dead_link_stream_times_out() {
    let mut sim = Simulator::new(pair(LinkModel::lossless(1_000).with_loss(1.0)), CryptoCostModel::zero(), 0);
    sim.open_stream(a(), b()).unwrap();
    let r = sim.run_until_idle().unwrap();
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.failures[0].kind, FailureKind::SetupTimeout);
    assert_eq!(sim.stream_ready_at(a(), b()), None);
}

#[test]
fn stream_preserves_order_under_loss() {
    for seed in 0..3 {
        let mut sim = Simulator::new(pair(LinkModel::lossless(1_000).with_loss(0.5)), CryptoCostModel::zero(), seed)
            .with_stream_policy(RetransmitPolicy { max_retries: 200, ..Default::default() });
        for i in 0..100u32 {
            sim.stream_send(a(), b(), i.to_be_bytes().to_vec()).unwrap();
        }
        let r = sim.run_until_idle().unwrap();
        assert!(r.failures.is_empty());
        let got: Vec<Vec<u8>> = sim.inbox(b()).iter().map(|(_, m)| m.clone()).collect();
        let want: Vec<Vec<u8>> = (0..100u32).map(|i| i.to_be_bytes().to_vec()).collect();
        assert_eq!(got, want, "seed {seed}");
    }
}

#[test]
fn psk_master_takes_four_legs_plus_compute() {
    let (_, r) = handshake(ProtocolKind::PskMaster, pair(LinkModel::lossless(1_000)), CryptoCostModel::zero(), 3);
    assert_eq!(r.completion_us(a(), b()), Some(4_000));

    let costs = CryptoCostModel { kdf_us: 10, mac_us: 1, ..CryptoCostModel::zero() };
    let (_, r) = handshake(ProtocolKind::PskMaster, pair(LinkModel::lossless(1_000)), costs, 3);
    // responder: kdf+mac, initiator: kdf+2 mac, responder: 2 kdf+2 mac, initiator: 2 kdf+mac
    assert_eq!(r.established_at(b()).unwrap().time_us, 3_000 + 11 + 12 + 22);
    assert_eq!(r.completion_us(a(), b()), Some(4_000 + 11 + 12 + 22 + 21));

    let offload = CryptoCostModel { psk_hardware_offload: true, ..costs };
    let (_, r) = handshake(ProtocolKind::PskMaster, pair(LinkModel::lossless(1_000)), offload, 3);
    assert_eq!(r.completion_us(a(), b()), Some(4_000));
}

#[test]
fn loss_free_time_is_leg_count_times_latency() {
    let expect = [
        (ProtocolKind::PskDirect, 4),
        (ProtocolKind::PskMaster, 4),
        (ProtocolKind::PskNetLayer, 4),
        (ProtocolKind::TkdfSym, 7),
        (ProtocolKind::TkdfSymUnfixed, 5),
        (ProtocolKind::TkdfAsym, 7),
        (ProtocolKind::TkdfAsymUnfixed, 7),
        // three setup frames before four protocol legs
        (ProtocolKind::OnDemandSts, 7),
    ];
    for (kind, legs) in expect {
        let topo = Topology::testbed(LinkModel::lossless(1_000));
        let (sim, r) = handshake(kind, topo, CryptoCostModel::zero(), 1);
        assert_eq!(r.completion_us(a(), b()), Some(legs * 1_000), "{kind:?}");
        let ka = &r.established_at(a()).unwrap().material.key;
        assert_eq!(ka, &r.established_at(b()).unwrap().material.key);
        assert!(r.failures.is_empty());
        let data_frames = sim
            .transcript()
            .entries()
            .iter()
            .filter(|e| matches!(e.frame, FrameKind::Datagram | FrameKind::StreamSegment { .. }))
            .count();
        assert_eq!(data_frames, kind.flow_len() as usize, "{kind:?}");
    }
}

#[test]
fn server_behind_relay() {
    let relay = NodeId::named("relay");
    let mut t = pair(LinkModel::lossless(1_000));
    t.add_node(s(), NodeRole::KeyServer).add_node(relay, NodeRole::Relay);
    t.connect(a(), relay, LinkModel::lossless(1_000)).unwrap();
    t.connect(b(), relay, LinkModel::lossless(1_000)).unwrap();
    t.connect(s(), relay, LinkModel::lossless(1_000)).unwrap();
    let (sim, r) = handshake(ProtocolKind::TkdfSym, t, CryptoCostModel::zero(), 2);
    assert!(r.completion_us(a(), b()).is_some());
    // messages 3 and 4 cross the relay, costing one extra frame each
    assert_eq!(sim.transcript().len(), 7 + 2);
    assert_eq!(r.completion_us(a(), b()), Some(9_000));
}

#[test]
fn binding_checks() {
    let topo = Topology::testbed(LinkModel::default());
    let mut sim = Simulator::new(topo, CryptoCostModel::zero(), 0);
    let kind = ProtocolKind::TkdfSym;
    let roster = crate::protocols::Roster::new([a(), b()], Some(s()));
    let ks = crate::protocols::Keystore::provision(kind, a(), &roster);
    let engine = crate::protocols::ProtocolEngine::new(
        kind,
        crate::protocols::Role::Initiator,
        ids(kind),
        &ks,
        crate::crypto::derive_rng(0, b"x"),
    )
    .unwrap();
    assert!(matches!(sim.attach_engine(b(), engine), Err(SimError::BindingError(_))));
    assert!(matches!(sim.start(a(), 0), Err(SimError::BindingError(_))));
}

#[test]
fn identical_seeds_identical_transcripts() {
    let topo = || Topology::testbed(LinkModel::default().with_loss(0.3));
    for kind in ProtocolKind::ALL {
        let (x, rx) = handshake(kind, topo(), CryptoCostModel::zero(), 42);
        let (y, ry) = handshake(kind, topo(), CryptoCostModel::zero(), 42);
        assert_eq!(x.transcript().to_json_lines(), y.transcript().to_json_lines());
        assert_eq!(rx, ry);
    }
}

#[test]
fn horizon_is_enforced() {
    let mut sim = Simulator::new(pair(LinkModel::lossless(1_000)), CryptoCostModel::zero(), 0).with_horizon(500);
    sim.send_datagram(a(), b(), vec![0]).unwrap();
    assert_eq!(sim.run_until_idle(), Err(SimError::HorizonExceeded { horizon_us: 500, pending: 1 }));
}

#[test]
fn every_kind_survives_heavy_loss() {
    let topo = || Topology::testbed(LinkModel::default().with_loss(0.7));
    for kind in ProtocolKind::ALL {
        for seed in 0..3 {
            let (_, r) = handshake(kind, topo(), CryptoCostModel::zero(), seed);
            assert!(r.completion_us(a(), b()).is_some(), "{kind:?} seed {seed}: {:?}", r.failures);
        }
    }
}

#[test]
fn costs_scale_with_ops() {
    let ops = crate::protocols::CryptoOps { sign: 2, verify: 3, ..Default::default() };
    let m = CryptoCostModel { sign_us: 100, verify_us: 10, ..CryptoCostModel::zero() };
    assert_eq!(m.cost(ProtocolKind::OnDemandSts, &ops), 230);
}
