//! Pre-shared-key flows: a challenge-response proof of the shared key, and a
//! four-way exchange deriving a fresh key from a network master.

use super::{expect, tri, Contributors, Ctx, EngineError, Established, Handshake, Out, Outcome, Role, SessionIds, Step};
use crate::crypto::{NonceValue, SymKey};
use crate::wire::{Field, WireMessage};
use crate::NodeId;

const RESPONSE: &[u8] = b"psk/response";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DirectState {
    Idle,
    AwaitChallenge,
    AwaitSuccess,
    AwaitResponse(NonceValue),
    Done,
}

pub(crate) struct Direct {
    a: NodeId,
    b: NodeId,
    state: DirectState,
}

impl Direct {
    pub(crate) fn new(role: Role, ids: &SessionIds) -> Result<Self, EngineError> {
        if role == Role::KeyServer {
            return Err(EngineError::Role(role));
        }
        Ok(Self { a: ids.initiator, b: ids.responder, state: DirectState::Idle })
    }

    fn established(&self, cx: &Ctx, key: SymKey, peer: NodeId) -> Established {
        Established {
            key,
            contributors: Contributors::PreProvisioned,
            labels: vec![cx.kind.name().as_bytes().to_vec(), b"pre-provisioned".to_vec(), self.a.as_bytes().to_vec(), self.b.as_bytes().to_vec()],
            peer,
        }
    }
}

impl Handshake for Direct {
    fn start(&mut self, _cx: &mut Ctx) -> Step {
        self.state = DirectState::AwaitChallenge;
        Step::send(Out::awaiting(self.b, 1, vec![Field::Identity(self.a)], 2))
    }

    fn on_message(&mut self, cx: &mut Ctx, msg: &WireMessage) -> Outcome {
        match self.state {
            DirectState::AwaitChallenge => {
                if !tri!(expect(msg, 2, self.b)) {
                    return Outcome::Ignore;
                }
                let [Field::Nonce(c)] = msg.payload.as_slice() else { return Outcome::Ignore };
                let key = tri!(cx.sym_key(self.b));
                let sealed = cx.seal(&key, RESPONSE, &[Field::Nonce(*c)]);
                self.state = DirectState::AwaitSuccess;
                Outcome::Advance(Step::send(Out::awaiting(self.b, 3, vec![Field::Sealed(sealed)], 2)))
            }
            DirectState::AwaitSuccess => {
                if !tri!(expect(msg, 4, self.b)) {
                    return Outcome::Ignore;
                }
                let key = tri!(cx.sym_key(self.b));
                self.state = DirectState::Done;
                Outcome::Advance(Step::default().done(self.established(cx, key, self.b)))
            }
            DirectState::Idle => {
                if !tri!(expect(msg, 1, self.a)) {
                    return Outcome::Ignore;
                }
                let [Field::Identity(claimed)] = msg.payload.as_slice() else { return Outcome::Ignore };
                if *claimed != self.a {
                    return super::FailReason::IdentityMismatch.into();
                }
                let c = cx.nonce();
                self.state = DirectState::AwaitResponse(c);
                Outcome::Advance(Step::send(Out::awaiting(self.a, 2, vec![Field::Nonce(c)], 2)))
            }
            DirectState::AwaitResponse(c) => {
                if !tri!(expect(msg, 3, self.a)) {
                    return Outcome::Ignore;
                }
                let [Field::Sealed(sealed)] = msg.payload.as_slice() else { return Outcome::Ignore };
                let key = tri!(cx.sym_key(self.a));
                let fields = tri!(cx.open(&key, sealed, RESPONSE));
                if fields != [Field::Nonce(c)] {
                    return super::FailReason::Freshness.into();
                }
                self.state = DirectState::Done;
                let est = self.established(cx, key, self.a);
                Outcome::Advance(Step::send(Out::fire(self.a, 4, vec![])).done(est))
            }
            DirectState::Done => Outcome::Ignore,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MasterState {
    Idle,
    AwaitNonce { na: NonceValue },
    AwaitConfirm { na: NonceValue, nb: NonceValue },
    AwaitFinal { na: NonceValue, nb: NonceValue },
    Done,
}

pub(crate) struct Master {
    a: NodeId,
    b: NodeId,
    state: MasterState,
}

impl Master {
    pub(crate) fn new(role: Role, ids: &SessionIds) -> Result<Self, EngineError> {
        if role == Role::KeyServer {
            return Err(EngineError::Role(role));
        }
        Ok(Self { a: ids.initiator, b: ids.responder, state: MasterState::Idle })
    }

    fn master(&self, cx: &Ctx) -> Result<SymKey, super::FailReason> {
        let peer = if cx.me == self.a { self.b } else { self.a };
        cx.sym_key(peer)
    }

    fn confirm_key(&self, cx: &mut Ctx, na: &NonceValue, nb: &NonceValue) -> Result<SymKey, super::FailReason> {
        let m = self.master(cx)?;
        Ok(cx.kdf(&[m.as_bytes(), na, nb], m.bits().bits()))
    }

    fn mac_input(&self, cx: &Ctx, step: u8, na: &NonceValue, nb: &NonceValue) -> Vec<u8> {
        cx.transcript(&[b'm', step], &[self.a.as_bytes(), self.b.as_bytes(), na, nb])
    }

    fn finish(&self, cx: &mut Ctx, na: &NonceValue, nb: &NonceValue, peer: NodeId) -> Result<Established, super::FailReason> {
        let m = self.master(cx)?;
        let key = cx.kdf(&[m.as_bytes(), na, nb, self.a.as_bytes(), self.b.as_bytes()], m.bits().bits());
        Ok(Established {
            key,
            contributors: Contributors::fresh(&[self.a, self.b]),
            labels: vec![cx.kind.name().as_bytes().to_vec(), na.to_vec(), nb.to_vec(), self.a.as_bytes().to_vec(), self.b.as_bytes().to_vec()],
            peer,
        })
    }
}

fn single_mac(msg: &WireMessage) -> Option<&[u8; 32]> {
    match msg.payload.as_slice() {
        [Field::Mac(m)] => Some(m),
        _ => None,
    }
}

impl Handshake for Master {
    fn start(&mut self, cx: &mut Ctx) -> Step {
        let na = cx.nonce();
        self.state = MasterState::AwaitNonce { na };
        Step::send(Out::awaiting(self.b, 1, vec![Field::Nonce(na)], 2))
    }

    fn on_message(&mut self, cx: &mut Ctx, msg: &WireMessage) -> Outcome {
        match self.state {
            MasterState::Idle => {
                if !tri!(expect(msg, 1, self.a)) {
                    return Outcome::Ignore;
                }
                let [Field::Nonce(na)] = msg.payload.as_slice() else { return Outcome::Ignore };
                let nb = cx.nonce();
                let ck = tri!(self.confirm_key(cx, na, &nb));
                let tag = cx.mac(&ck, &self.mac_input(cx, 2, na, &nb));
                self.state = MasterState::AwaitConfirm { na: *na, nb };
                Outcome::Advance(Step::send(Out::awaiting(self.a, 2, vec![Field::Nonce(nb), Field::Mac(tag)], 2)))
            }
            MasterState::AwaitNonce { na } => {
                if !tri!(expect(msg, 2, self.b)) {
                    return Outcome::Ignore;
                }
                let [Field::Nonce(nb), Field::Mac(tag)] = msg.payload.as_slice() else { return Outcome::Ignore };
                let ck = tri!(self.confirm_key(cx, &na, nb));
                if !cx.mac_ok(&ck, &self.mac_input(cx, 2, &na, nb), tag) {
                    return super::FailReason::Authentication.into();
                }
                let mine = cx.mac(&ck, &self.mac_input(cx, 3, &na, nb));
                self.state = MasterState::AwaitFinal { na, nb: *nb };
                Outcome::Advance(Step::send(Out::awaiting(self.b, 3, vec![Field::Mac(mine)], 2)))
            }
            MasterState::AwaitConfirm { na, nb } => {
                if !tri!(expect(msg, 3, self.a)) {
                    return Outcome::Ignore;
                }
                let Some(tag) = single_mac(msg) else { return Outcome::Ignore };
                let ck = tri!(self.confirm_key(cx, &na, &nb));
                if !cx.mac_ok(&ck, &self.mac_input(cx, 3, &na, &nb), tag) {
                    return super::FailReason::Authentication.into();
                }
                let fin = cx.mac(&ck, &self.mac_input(cx, 4, &na, &nb));
                let est = tri!(self.finish(cx, &na, &nb, self.a));
                self.state = MasterState::Done;
                Outcome::Advance(Step::send(Out::fire(self.a, 4, vec![Field::Mac(fin)])).done(est))
            }
            MasterState::AwaitFinal { na, nb } => {
                if !tri!(expect(msg, 4, self.b)) {
                    return Outcome::Ignore;
                }
                let Some(tag) = single_mac(msg) else { return Outcome::Ignore };
                let ck = tri!(self.confirm_key(cx, &na, &nb));
                if !cx.mac_ok(&ck, &self.mac_input(cx, 4, &na, &nb), tag) {
                    return super::FailReason::Authentication.into();
                }
                let est = tri!(self.finish(cx, &na, &nb, self.b));
                self.state = MasterState::Done;
                Outcome::Advance(Step::default().done(est))
            }
            MasterState::Done => Outcome::Ignore,
        }
    }
}
