//! Station-to-station: ephemeral Diffie-Hellman authenticated by signatures
//! over both shares, then a key-confirmation MAC from the responder.

use super::{
    expect, tri, Contributors, Ctx, EngineError, Established, FailReason, Handshake, Out, Outcome, Role, SessionIds,
    Step,
};
use crate::crypto::{dh_keygen, dh_shared, DhPublic, DhSecret, NonceValue};
use crate::wire::{Field, WireMessage};
use crate::NodeId;

enum State {
    Idle,
    AwaitShare { secret: DhSecret, mine: DhPublic, na: NonceValue },
    AwaitConfirm { z: [u8; 32], theirs: DhPublic, mine: DhPublic, na: NonceValue, nb: NonceValue },
    AwaitSignature { z: [u8; 32], theirs: DhPublic, mine: DhPublic, na: NonceValue, nb: NonceValue },
    Done,
}

pub(crate) struct Sts {
    a: NodeId,
    b: NodeId,
    state: State,
}

impl Sts {
    pub(crate) fn new(role: Role, ids: &SessionIds) -> Result<Self, EngineError> {
        if role == Role::KeyServer {
            return Err(EngineError::Role(role));
        }
        Ok(Self { a: ids.initiator, b: ids.responder, state: State::Idle })
    }

    /// What the responder signs: both shares, both nonces, the initiator.
    fn responder_input(&self, cx: &Ctx, dh_a: &DhPublic, dh_b: &DhPublic, na: &NonceValue, nb: &NonceValue) -> Vec<u8> {
        cx.transcript(b"sts/responder", &[&dh_a.0, &dh_b.0, na, nb, self.a.as_bytes()])
    }

    fn initiator_input(&self, cx: &Ctx, dh_a: &DhPublic, dh_b: &DhPublic, na: &NonceValue, nb: &NonceValue) -> Vec<u8> {
        cx.transcript(b"sts/initiator", &[&dh_b.0, &dh_a.0, nb, na, self.b.as_bytes()])
    }

    fn confirm_input(&self, cx: &Ctx, na: &NonceValue, nb: &NonceValue) -> Vec<u8> {
        cx.transcript(b"sts/confirm", &[self.a.as_bytes(), self.b.as_bytes(), na, nb])
    }

    fn established(&self, cx: &mut Ctx, z: &[u8; 32], na: &NonceValue, nb: &NonceValue, peer: NodeId) -> Established {
        let key = cx.kdf(&[z, na, nb, self.a.as_bytes(), self.b.as_bytes()], 256);
        Established {
            key,
            contributors: Contributors::fresh(&[self.a, self.b]),
            labels: vec![
                cx.kind.name().as_bytes().to_vec(),
                na.to_vec(),
                nb.to_vec(),
                self.a.as_bytes().to_vec(),
                self.b.as_bytes().to_vec(),
            ],
            peer,
        }
    }
}

fn shared(cx: &mut Ctx, secret: &DhSecret, peer: &DhPublic) -> Result<[u8; 32], FailReason> {
    cx.ops.dh += 1;
    dh_shared(secret, peer).map_err(|_| FailReason::WeakKey)
}

impl Handshake for Sts {
    fn start(&mut self, cx: &mut Ctx) -> Step {
        cx.ops.dh += 1;
        let (mine, secret) = dh_keygen(&mut cx.rng);
        let na = cx.nonce();
        self.state = State::AwaitShare { secret, mine, na };
        Step::send(Out::awaiting(self.b, 1, vec![Field::DhPublic(mine), Field::Nonce(na)], 2))
    }

    fn on_message(&mut self, cx: &mut Ctx, msg: &WireMessage) -> Outcome {
        match std::mem::replace(&mut self.state, State::Done) {
            State::Idle if cx.me == self.b => {
                if !tri!(expect(msg, 1, self.a)) {
                    self.state = State::Idle;
                    return Outcome::Ignore;
                }
                let [Field::DhPublic(theirs), Field::Nonce(na)] = msg.payload.as_slice() else {
                    self.state = State::Idle;
                    return Outcome::Ignore;
                };
                cx.ops.dh += 1;
                let (mine, secret) = dh_keygen(&mut cx.rng);
                let z = tri!(shared(cx, &secret, theirs));
                let nb = cx.nonce();
                let sig = cx.sign(&self.responder_input(cx, theirs, &mine, na, &nb));
                self.state = State::AwaitSignature { z, theirs: *theirs, mine, na: *na, nb };
                Outcome::Advance(Step::send(Out::awaiting(
                    self.a,
                    2,
                    vec![Field::DhPublic(mine), Field::Nonce(nb), Field::Signature(sig)],
                    2,
                )))
            }
            State::AwaitShare { secret, mine, na } => {
                if !tri!(expect(msg, 2, self.b)) {
                    self.state = State::AwaitShare { secret, mine, na };
                    return Outcome::Ignore;
                }
                let [Field::DhPublic(theirs), Field::Nonce(nb), Field::Signature(sig)] = msg.payload.as_slice() else {
                    return FailReason::Authentication.into();
                };
                let z = tri!(shared(cx, &secret, theirs));
                let peer_key = tri!(cx.public_key(self.b)).clone();
                if !cx.verify(&peer_key, &self.responder_input(cx, &mine, theirs, &na, nb), sig) {
                    return FailReason::Authentication.into();
                }
                let mine_sig = cx.sign(&self.initiator_input(cx, &mine, theirs, &na, nb));
                self.state = State::AwaitConfirm { z, theirs: *theirs, mine, na, nb: *nb };
                Outcome::Advance(Step::send(Out::awaiting(self.b, 3, vec![Field::Signature(mine_sig)], 2)))
            }
            State::AwaitSignature { z, theirs, mine, na, nb } => {
                if !tri!(expect(msg, 3, self.a)) {
                    self.state = State::AwaitSignature { z, theirs, mine, na, nb };
                    return Outcome::Ignore;
                }
                let [Field::Signature(sig)] = msg.payload.as_slice() else {
                    return FailReason::Authentication.into();
                };
                let peer_key = tri!(cx.public_key(self.a)).clone();
                if !cx.verify(&peer_key, &self.initiator_input(cx, &theirs, &mine, &na, &nb), sig) {
                    return FailReason::Authentication.into();
                }
                let ck = cx.kdf(&[&z, &na, &nb], 256);
                let tag = cx.mac(&ck, &self.confirm_input(cx, &na, &nb));
                let est = self.established(cx, &z, &na, &nb, self.a);
                Outcome::Advance(Step::send(Out::fire(self.a, 4, vec![Field::Mac(tag)])).done(est))
            }
            State::AwaitConfirm { z, theirs, mine, na, nb } => {
                if !tri!(expect(msg, 4, self.b)) {
                    self.state = State::AwaitConfirm { z, theirs, mine, na, nb };
                    return Outcome::Ignore;
                }
                let [Field::Mac(tag)] = msg.payload.as_slice() else {
                    return FailReason::Authentication.into();
                };
                let ck = cx.kdf(&[&z, &na, &nb], 256);
                if !cx.mac_ok(&ck, &self.confirm_input(cx, &na, &nb), tag) {
                    return FailReason::Authentication.into();
                }
                let est = self.established(cx, &z, &na, &nb, self.b);
                Outcome::Advance(Step::default().done(est))
            }
            other => {
                self.state = other;
                Outcome::Ignore
            }
        }
    }
}
