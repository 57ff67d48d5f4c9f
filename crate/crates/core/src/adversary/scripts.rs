use std::collections::BTreeSet;

use super::harness::{engine, honest_session, Frame, Harness};
use super::knowledge::{candidate_keys, Derivation, KeyClaim, Knowledge};
use super::{verify_evidence, AttackError, AttackOutcome, AttackScript, CompromisedMaterial, Evidence};
use crate::crypto::{aead_open, aead_seal, derive_rng, pk_decrypt, pk_encrypt, IvSource, SealedBox, SymKey};
use crate::protocols::{box_header, nb_minus_one, Keystore, ProtocolEngine, Role, Roster, SessionIds, TKDF_SYM_ANSWER};
use crate::provisioning::long_term_keypair;
use crate::wire::{decode, decode_fields, encode, encode_fields, Field};
use crate::{Family, NodeId, ProtocolKind};

pub(crate) fn alice() -> NodeId {
    NodeId::named("alice")
}
pub(crate) fn bob() -> NodeId {
    NodeId::named("bob")
}
fn carol() -> NodeId {
    NodeId::named("carol")
}
fn server() -> NodeId {
    NodeId::named("server")
}
fn intruder() -> NodeId {
    NodeId::named("intruder")
}
fn zed() -> NodeId {
    NodeId::named("zed")
}
fn mallory() -> NodeId {
    NodeId::named("mallory")
}

fn ids(kind: ProtocolKind, a: NodeId, b: NodeId) -> SessionIds {
    SessionIds::new(a, b, kind.needs_server().then(server))
}

fn roster(kind: ProtocolKind, peers: &[NodeId]) -> Roster {
    Roster::new(peers.iter().copied(), kind.needs_server().then(server))
}

fn frames(fs: &[Frame]) -> Vec<super::EvidenceFrame> {
    fs.iter().map(Into::into).collect()
}

fn inapplicable(script: &AttackScript, kind: ProtocolKind, reason: &str) -> AttackError {
    AttackError::ScriptError { script: script.name().into(), kind, reason: reason.into() }
}

/// Runs `script` against `kind`. Deterministic in `seed`.
pub fn run_attack(kind: ProtocolKind, script: &AttackScript, seed: u64) -> Result<AttackOutcome, AttackError> {
    let (success, evidence) = match script {
        AttackScript::Eavesdrop => eavesdrop(kind, seed, &[]),
        AttackScript::CompromiseAndDecryptPast { compromised } => eavesdrop(kind, seed, compromised),
        AttackScript::Replay { compromised_old_key } => {
            if kind.family() != Family::SymmetricTkdf {
                return Err(inapplicable(script, kind, "ticket replay needs a symmetric key server"));
            }
            replay(kind, seed, *compromised_old_key)
        }
        AttackScript::LoweMitm => {
            if kind.family() != Family::AsymmetricTkdf {
                return Err(inapplicable(script, kind, "the interleaving targets public-key nonce exchanges"));
            }
            lowe(kind, seed)
        }
        AttackScript::KciImpersonation { compromised } => {
            if ![alice(), bob(), carol()].contains(compromised) {
                return Err(inapplicable(script, kind, "compromised node must be alice, bob or carol"));
            }
            kci(kind, seed, *compromised)
        }
        AttackScript::UnknownKeyShare => {
            if !matches!(kind.family(), Family::AsymmetricTkdf | Family::OnDemand) {
                return Err(inapplicable(script, kind, "no public key to re-register"));
            }
            unknown_key_share(kind, seed)
        }
        AttackScript::PrivacyProbe => privacy(kind, seed),
        AttackScript::OutsiderImpersonation { target } => {
            if *target == Role::KeyServer {
                return Err(inapplicable(script, kind, "key server impersonation is not scripted"));
            }
            outsider(kind, seed, *target)
        }
    };
    debug_assert!(!success || !evidence.is_empty());
    Ok(AttackOutcome { protocol: kind, script: script.clone(), seed, success, evidence, goal_refs: script.goal_refs() })
}

fn attacker_knowledge(captured: &[Frame], stolen: &[(NodeId, Keystore)]) -> Knowledge {
    let mut k = Knowledge::new();
    for f in captured {
        k.observe(&f.bytes);
    }
    for (_, ks) in stolen {
        for key in ks.symmetric.values() {
            k.learn_key(key);
        }
        if let Some(kp) = &ks.keypair {
            k.learn_private(kp.clone());
        }
    }
    k.close();
    k
}

/// Passive capture, optionally followed by long-term key compromise.
fn eavesdrop(kind: ProtocolKind, seed: u64, compromised: &[NodeId]) -> (bool, Evidence) {
    let ids = ids(kind, alice(), bob());
    let roster = roster(kind, &[alice(), bob(), carol()]);
    let mut h = honest_session(kind, ids, &roster, seed, "session");
    h.run_honest(alice());
    let stolen: Vec<(NodeId, Keystore)> =
        compromised.iter().map(|n| (*n, Keystore::provision(kind, *n, &roster))).collect();
    let mut evidence = Evidence {
        frames: frames(&h.captured),
        compromised: stolen.iter().map(|(n, ks)| CompromisedMaterial::from_keystore(*n, ks)).collect(),
        ..Default::default()
    };
    let Some(target) = h.session_of(alice()).map(|m| hex::encode(m.key.as_bytes())) else {
        evidence.notes.push("honest session did not complete".into());
        return (false, evidence);
    };
    let k = attacker_knowledge(&h.captured, &stolen);
    if let Some(hit) = candidate_keys(kind, &k, alice(), bob()).into_iter().find(|c| c.key_hex == target) {
        evidence.notes.push("recovered the session key of the recorded run".into());
        evidence.derived_keys.push(hit);
    }
    let success = !evidence.derived_keys.is_empty() && verify_evidence(&evidence);
    (success, evidence)
}

/// Answers a symmetric-TKDF challenge from `bob` using a known key.
fn forge_answer(kind: ProtocolKind, key: &SymKey, challenge: &Frame, seed: u64) -> Option<Vec<u8>> {
    let msg = decode(&challenge.bytes).ok()?;
    if msg.msg_index + 1 != kind.flow_len() {
        return None;
    }
    let [Field::Sealed(bx)] = msg.payload.as_slice() else { return None };
    let plain = aead_open(key, bx, &[]).ok()?;
    let fields = decode_fields(&plain).ok()?;
    let [Field::Nonce(nb)] = fields.as_slice() else { return None };
    let mut rng = derive_rng(seed, b"attacker/iv");
    let answer = aead_seal(
        key,
        &box_header(kind, TKDF_SYM_ANSWER),
        &encode_fields(&[Field::Nonce(nb_minus_one(nb))]),
        &[],
        IvSource::Random(&mut rng),
    );
    let reply = crate::wire::WireMessage {
        kind,
        msg_index: kind.flow_len(),
        sender: challenge.to,
        receiver: challenge.from,
        payload: vec![Field::Sealed(answer)],
    };
    encode(&reply).ok()
}

/// Replays an old initiator run to a fresh responder and a live server.
fn replay(kind: ProtocolKind, seed: u64, with_key: bool) -> (bool, Evidence) {
    let ids = ids(kind, alice(), bob());
    let roster = roster(kind, &[alice(), bob(), carol()]);
    let mut old = honest_session(kind, ids, &roster, seed, "replay/old");
    old.run_honest(alice());
    let old_key = old.session_of(alice()).expect("honest run completes").key.clone();

    let mut new = Harness::new();
    for (role, node) in [(Role::Responder, bob()), (Role::KeyServer, server())] {
        let ks = Keystore::provision(kind, node, &roster);
        new.add(engine(kind, role, ids, &ks, seed, &format!("replay/new/{}", node.label())));
    }
    let recorded: Vec<Frame> = old.captured.iter().filter(|f| f.from == alice() && f.to == bob()).cloned().collect();
    let mut forged = Vec::new();
    for f in &recorded {
        let idx = decode(&f.bytes).map(|m| m.msg_index).unwrap_or(0);
        if with_key && idx == kind.flow_len() {
            continue;
        }
        for out in new.inject(alice(), bob(), &f.bytes) {
            if !with_key {
                continue;
            }
            if let Some(answer) = forge_answer(kind, &old_key, &out, seed) {
                forged.push(Frame { from: alice(), to: bob(), bytes: answer.clone() });
                new.inject(alice(), bob(), &answer);
            }
        }
        let bob_engine = new.engine(bob()).expect("added");
        if bob_engine.is_established() || bob_engine.is_failed() {
            break;
        }
    }
    let mut all = recorded.clone();
    all.extend(new.captured.iter().cloned());
    all.extend(forged);
    let mut evidence = Evidence { frames: frames(&all), ..Default::default() };
    if with_key {
        evidence.compromised.push(CompromisedMaterial::symmetric(alice(), &[old_key.as_bytes()]));
    }
    let hit = new.session_of(bob()).filter(|m| m.peer == alice() && m.key == old_key);
    if hit.is_some() {
        evidence.notes.push("responder accepted the replayed ticket and re-established the old key".into());
        evidence.derived_keys.push(KeyClaim { key_hex: hex::encode(old_key.as_bytes()), derivation: Derivation::Learned });
    } else if let Some(f) = new.engine(bob()).and_then(|e| e.failure()) {
        evidence.notes.push(format!("responder rejected the replay: {f:?}"));
    }
    let success = hit.is_some() && verify_evidence(&evidence);
    (success, evidence)
}

fn first_to(frames: Vec<Frame>, to: NodeId) -> Option<Frame> {
    frames.into_iter().find(|f| f.to == to)
}

/// Re-encrypts a public-key box addressed to the intruder for `to`.
fn reseal(bx: &SealedBox, to: NodeId, seed: u64) -> Option<SealedBox> {
    let plain = pk_decrypt(&long_term_keypair(intruder()), bx).ok()?;
    let mut rng = derive_rng(seed, b"attacker/oaep");
    pk_encrypt(long_term_keypair(to).public(), &bx.header, &plain, &mut rng).ok()
}

fn forward_as(kind: ProtocolKind, f: &Frame, sender: NodeId, receiver: NodeId, seed: u64) -> Option<Vec<u8>> {
    let mut msg = decode(&f.bytes).ok()?;
    if msg.kind != kind {
        return None;
    }
    if let [Field::Sealed(bx)] = msg.payload.as_slice() {
        if msg.receiver == intruder() {
            msg.payload = vec![Field::Sealed(reseal(bx, receiver, seed)?)];
        }
    }
    msg.sender = sender;
    msg.receiver = receiver;
    encode(&msg).ok()
}

/// Alice opens a run with the intruder, who replays it to bob as alice.
fn lowe(kind: ProtocolKind, seed: u64) -> (bool, Evidence) {
    let roster = roster(kind, &[alice(), bob(), intruder()]);
    let mut h = Harness::new();
    let ks = |n| Keystore::provision(kind, n, &roster);
    h.add(engine(kind, Role::Initiator, ids(kind, alice(), intruder()), &ks(alice()), seed, "lowe/alice"));
    h.add(engine(kind, Role::Responder, ids(kind, alice(), bob()), &ks(bob()), seed, "lowe/bob"));
    h.add(engine(kind, Role::KeyServer, ids(kind, alice(), bob()), &ks(server()), seed, "lowe/server"));
    let mut forged = Vec::new();
    let mut notes = Vec::new();
    let run = (|| {
        let m1 = first_to(h.start(alice()), server())?;
        let m2 = first_to(h.inject(alice(), server(), &m1.bytes), alice())?;
        let m3 = first_to(h.inject(server(), alice(), &m2.bytes), intruder())?;
        let m3b = forward_as(kind, &m3, alice(), bob(), seed)?;
        forged.push(Frame { from: alice(), to: bob(), bytes: m3b.clone() });
        let m4 = first_to(h.inject(alice(), bob(), &m3b), server())?;
        let m5 = first_to(h.inject(bob(), server(), &m4.bytes), bob())?;
        let m6 = first_to(h.inject(server(), bob(), &m5.bytes), alice())?;
        let m6b = forward_as(kind, &m6, intruder(), alice(), seed)?;
        forged.push(Frame { from: intruder(), to: alice(), bytes: m6b.clone() });
        let m7 = first_to(h.inject(intruder(), alice(), &m6b), intruder())?;
        let m7b = forward_as(kind, &m7, alice(), bob(), seed)?;
        forged.push(Frame { from: alice(), to: bob(), bytes: m7b.clone() });
        h.inject(alice(), bob(), &m7b);
        Some(())
    })();
    if run.is_none() {
        notes.push("interleaving broke off before the final message".into());
    }
    if let Some(f) = h.engine(alice()).and_then(|e| e.failure()) {
        notes.push(format!("initiator rejected the relayed reply: {f:?}"));
    }
    let mut all = h.captured.clone();
    all.extend(forged);
    let mut evidence = Evidence {
        frames: frames(&all),
        compromised: vec![CompromisedMaterial { owner: intruder().label(), symmetric_hex: vec![], private_key: true }],
        derived_keys: vec![],
        notes,
    };
    let Some(m) = h.session_of(bob()).filter(|m| m.peer == alice()).cloned() else {
        return (false, evidence);
    };
    let target = hex::encode(m.key.as_bytes());
    let k = attacker_knowledge(&all, &[(intruder(), Keystore::provision(kind, intruder(), &roster))]);
    if let Some(hit) = candidate_keys(kind, &k, alice(), bob()).into_iter().find(|c| c.key_hex == target) {
        evidence.notes.push("responder believes it talks to alice; the intruder holds the session key".into());
        evidence.derived_keys.push(hit);
    }
    let success = !evidence.derived_keys.is_empty() && verify_evidence(&evidence);
    (success, evidence)
}

/// With one member's long-term material, pose as a second member toward a
/// third.
fn kci(kind: ProtocolKind, seed: u64, compromised: NodeId) -> (bool, Evidence) {
    let cast = [alice(), bob(), carol()];
    let others: Vec<NodeId> = cast.iter().copied().filter(|n| *n != compromised).collect();
    let (posed, victim) = (others[0], others[1]);
    let roster = roster(kind, &cast);
    let stolen = Keystore::provision(kind, compromised, &roster);
    let session = ids(kind, posed, victim);
    let mut evidence = Evidence {
        compromised: vec![CompromisedMaterial::from_keystore(compromised, &stolen)],
        ..Default::default()
    };
    let rogue = match ProtocolEngine::new(kind, Role::Initiator, session, &stolen, derive_rng(seed, b"kci/rogue")) {
        Ok(e) => e,
        Err(e) => {
            evidence.notes.push(format!("stolen material cannot drive a run as {posed}: {e}"));
            return (false, evidence);
        }
    };
    let mut h = Harness::new();
    h.add(rogue);
    h.add(engine(kind, Role::Responder, session, &Keystore::provision(kind, victim, &roster), seed, "kci/victim"));
    if kind.needs_server() {
        h.add(engine(kind, Role::KeyServer, session, &Keystore::provision(kind, server(), &roster), seed, "kci/server"));
    }
    h.run_honest(posed);
    evidence.frames = frames(&h.captured);
    let success = h.session_of(victim).is_some_and(|m| m.peer == posed);
    if success {
        evidence.notes.push(format!("{victim} accepted the attacker as {posed} using {compromised}'s keys"));
    }
    (success, evidence)
}

/// A non-member with its own fresh credentials poses as one honest party.
fn outsider(kind: ProtocolKind, seed: u64, target: Role) -> (bool, Evidence) {
    let session = ids(kind, alice(), bob());
    let roster = roster(kind, &[alice(), bob()]);
    let posed = session.node_for(target).expect("peer role");
    let honest_peer = if posed == alice() { bob() } else { alice() };
    let mut rng = derive_rng(seed, b"outsider/keys");
    let real = Keystore::provision(kind, posed, &roster);
    let mut fake = Keystore { keypair: real.keypair.as_ref().map(|_| long_term_keypair(mallory())), ..Default::default() };
    for (peer, k) in &real.symmetric {
        let bits = crate::crypto::KeyBits::from_bits((k.len() * 8) as u16).expect("valid key size");
        fake.symmetric.insert(*peer, SymKey::generate(&mut rng, bits).as_bytes().to_vec());
    }
    fake.public_keys = real.public_keys.clone();
    let mut h = Harness::new();
    h.add(engine(kind, target, session, &fake, seed, "outsider/rogue"));
    let other_role = if target == Role::Initiator { Role::Responder } else { Role::Initiator };
    h.add(engine(kind, other_role, session, &Keystore::provision(kind, honest_peer, &roster), seed, "outsider/peer"));
    if kind.needs_server() {
        h.add(engine(kind, Role::KeyServer, session, &Keystore::provision(kind, server(), &roster), seed, "outsider/server"));
    }
    h.run_honest(alice());
    let mut evidence = Evidence { frames: frames(&h.captured), ..Default::default() };
    let success = h.session_of(honest_peer).is_some_and(|m| m.peer == posed);
    if success {
        evidence.notes.push(format!("{honest_peer} accepted an outsider as {posed}"));
    }
    (success, evidence)
}

fn relabel(f: &Frame, sender: Option<NodeId>, receiver: Option<NodeId>) -> Option<Vec<u8>> {
    let mut msg = decode(&f.bytes).ok()?;
    if let Some(s) = sender {
        msg.sender = s;
    }
    if let Some(r) = receiver {
        msg.receiver = r;
    }
    encode(&msg).ok()
}

/// Zed registers alice's public key as its own and relabels alice's run
/// with bob so that bob believes it is talking to zed.
fn unknown_key_share(kind: ProtocolKind, seed: u64) -> (bool, Evidence) {
    let roster = roster(kind, &[alice(), bob()]);
    let alice_pub = long_term_keypair(alice()).public().clone();
    let mut bob_ks = Keystore::provision(kind, bob(), &roster);
    let mut server_ks = Keystore::provision(kind, server(), &roster);
    bob_ks.public_keys.insert(zed(), alice_pub.clone());
    server_ks.public_keys.insert(zed(), alice_pub);
    let mut h = Harness::new();
    h.add(engine(kind, Role::Initiator, ids(kind, alice(), bob()), &Keystore::provision(kind, alice(), &roster), seed, "uks/alice"));
    h.add(engine(kind, Role::Responder, ids(kind, zed(), bob()), &bob_ks, seed, "uks/bob"));
    if kind.needs_server() {
        h.add(engine(kind, Role::KeyServer, ids(kind, zed(), bob()), &server_ks, seed, "uks/server"));
    }
    let first = h.start(alice());
    let mut forged = Vec::new();
    h.pump(first, |f| {
        let (from, to, bytes) = if f.from == alice() && f.to == bob() {
            (zed(), bob(), relabel(f, Some(zed()), None)?)
        } else if f.from == bob() && f.to == zed() {
            (bob(), alice(), relabel(f, None, Some(alice()))?)
        } else {
            return Some(f.clone());
        };
        let g = Frame { from, to, bytes };
        forged.push(g.clone());
        Some(g)
    });
    let mut all = h.captured.clone();
    all.extend(forged);
    let mut evidence = Evidence { frames: frames(&all), ..Default::default() };
    for (n, r) in &h.failures {
        evidence.notes.push(format!("{n} aborted: {r:?}"));
    }
    let success = match (h.session_of(alice()), h.session_of(bob())) {
        (Some(a), Some(b)) => a.peer == bob() && b.peer == zed() && a.key == b.key,
        _ => false,
    };
    if success {
        evidence.notes.push("alice shares a key with bob, who attributes it to zed".into());
    }
    (success, evidence)
}

/// Lists every cast identity visible in cleartext.
fn privacy(kind: ProtocolKind, seed: u64) -> (bool, Evidence) {
    let session = ids(kind, alice(), bob());
    let roster = roster(kind, &[alice(), bob(), carol()]);
    let mut h = honest_session(kind, session, &roster, seed, "privacy");
    h.run_honest(alice());
    let mut seen = BTreeSet::new();
    let mut notes = Vec::new();
    for f in &h.captured {
        let Ok(msg) = decode(&f.bytes) else { continue };
        let mut found = vec![("header sender", msg.sender), ("header receiver", msg.receiver)];
        for field in &msg.payload {
            if let Field::Identity(id) = field {
                found.push(("identity field", *id));
            }
        }
        for (place, id) in found {
            if seen.insert((id, place)) {
                notes.push(format!("{id} in {place} of message {}", msg.msg_index));
            }
        }
    }
    let success = !seen.is_empty();
    let evidence = Evidence { frames: frames(&h.captured), notes, ..Default::default() };
    (success, evidence)
}

/// An undisturbed alice-bob run.
pub fn honest_run(kind: ProtocolKind, seed: u64) -> Harness {
    let mut h = honest_session(kind, ids(kind, alice(), bob()), &roster(kind, &[alice(), bob()]), seed, "honest");
    h.run_honest(alice());
    h
}

/// The long-term keystore alice holds in [`honest_run`].
pub fn honest_keystore(kind: ProtocolKind) -> Keystore {
    Keystore::provision(kind, alice(), &roster(kind, &[alice(), bob()]))
}
