//! Public-key distribution through a certifying server, followed by a
//! three-message nonce exchange. The fixed variant names the responder inside
//! its nonce reply; the unfixed variant does not.

use super::{expect, tri, Contributors, Ctx, Established, FailReason, Handshake, Out, Outcome, Role, SessionIds, Step};
use crate::crypto::{NonceValue, PublicKey, Signature};
use crate::wire::{Field, WireMessage};
use crate::NodeId;

const NONCE_A: &[u8] = b"tkdf-asym/1";
const NONCE_B: &[u8] = b"tkdf-asym/2";
const NONCE_FINAL: &[u8] = b"tkdf-asym/3";

#[derive(Clone)]
enum State {
    Idle,
    AwaitCertB,
    AwaitReply { na: NonceValue, kpb: PublicKey },
    AwaitCertA { na: NonceValue },
    AwaitFinal { na: NonceValue, nb: NonceValue },
    Done,
    Serving,
}

pub(crate) struct TkdfAsym {
    fixed: bool,
    a: NodeId,
    b: NodeId,
    s: NodeId,
    state: State,
}

impl TkdfAsym {
    pub(crate) fn new(fixed: bool, role: Role, ids: &SessionIds) -> Self {
        let state = if role == Role::KeyServer { State::Serving } else { State::Idle };
        Self { fixed, a: ids.initiator, b: ids.responder, s: ids.server.expect("checked by keystore"), state }
    }

    fn cert_input(cx: &Ctx, subject: NodeId, der: &[u8]) -> Vec<u8> {
        cx.transcript(b"cert", &[subject.as_bytes(), der])
    }

    fn check_cert(&self, cx: &mut Ctx, msg: &WireMessage, subject: NodeId) -> Result<PublicKey, FailReason> {
        let [Field::PublicKey(der), Field::Identity(who), Field::Signature(sig)] = msg.payload.as_slice() else {
            return Err(FailReason::Authentication);
        };
        if *who != subject {
            return Err(FailReason::IdentityMismatch);
        }
        let server_key = cx.public_key(self.s)?.clone();
        if !cx.verify(&server_key, &Self::cert_input(cx, *who, der), sig) {
            return Err(FailReason::Authentication);
        }
        PublicKey::from_der(der).map_err(|_| FailReason::Authentication)
    }

    fn serve(&mut self, cx: &mut Ctx, msg: &WireMessage) -> Outcome {
        if msg.msg_index != 1 && msg.msg_index != 4 {
            return Outcome::Ignore;
        }
        let [Field::Identity(x), Field::Identity(y)] = msg.payload.as_slice() else { return Outcome::Ignore };
        if *x != msg.sender {
            return Outcome::Ignore;
        }
        let Ok(key) = cx.public_key(*y) else { return Outcome::Ignore };
        let der = key.to_der().to_vec();
        let sig: Signature = cx.sign(&Self::cert_input(cx, *y, &der));
        let payload = vec![Field::PublicKey(der), Field::Identity(*y), Field::Signature(sig)];
        Outcome::Advance(Step::send(Out::fire(*x, msg.msg_index + 1, payload)))
    }

    fn established(&self, cx: &mut Ctx, na: &NonceValue, nb: &NonceValue, peer: NodeId) -> Established {
        let key = cx.kdf(&[na, nb, self.a.as_bytes(), self.b.as_bytes()], 256);
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

impl Handshake for TkdfAsym {
    fn start(&mut self, _cx: &mut Ctx) -> Step {
        self.state = State::AwaitCertB;
        Step::send(Out::awaiting(self.s, 1, vec![Field::Identity(self.a), Field::Identity(self.b)], 2))
    }

    fn on_message(&mut self, cx: &mut Ctx, msg: &WireMessage) -> Outcome {
        match self.state.clone() {
            State::Serving => self.serve(cx, msg),
            State::AwaitCertB => {
                if !tri!(expect(msg, 2, self.s)) {
                    return Outcome::Ignore;
                }
                let kpb = tri!(self.check_cert(cx, msg, self.b));
                let na = cx.nonce();
                let bx = cx.pk_seal(&kpb, NONCE_A, &[Field::Nonce(na), Field::Identity(self.a)]);
                self.state = State::AwaitReply { na, kpb };
                Outcome::Advance(Step::send(Out::awaiting(self.b, 3, vec![Field::Sealed(bx)], 4)))
            }
            State::Idle if cx.me == self.b => {
                if !tri!(expect(msg, 3, self.a)) {
                    return Outcome::Ignore;
                }
                let [Field::Sealed(bx)] = msg.payload.as_slice() else { return Outcome::Ignore };
                let fields = tri!(cx.pk_open(bx, NONCE_A));
                let [Field::Nonce(na), Field::Identity(who)] = fields.as_slice() else {
                    return FailReason::Authentication.into();
                };
                if *who != self.a {
                    return FailReason::IdentityMismatch.into();
                }
                self.state = State::AwaitCertA { na: *na };
                Outcome::Advance(Step::send(Out::awaiting(
                    self.s,
                    4,
                    vec![Field::Identity(self.b), Field::Identity(self.a)],
                    2,
                )))
            }
            State::AwaitCertA { na } => {
                if !tri!(expect(msg, 5, self.s)) {
                    return Outcome::Ignore;
                }
                let kpa = tri!(self.check_cert(cx, msg, self.a));
                let nb = cx.nonce();
                let mut fields = vec![Field::Nonce(na), Field::Nonce(nb)];
                if self.fixed {
                    fields.push(Field::Identity(self.b));
                }
                let bx = cx.pk_seal(&kpa, NONCE_B, &fields);
                self.state = State::AwaitFinal { na, nb };
                Outcome::Advance(Step::send(Out::awaiting(self.a, 6, vec![Field::Sealed(bx)], 2)))
            }
            State::AwaitReply { na, kpb } => {
                if !tri!(expect(msg, 6, self.b)) {
                    return Outcome::Ignore;
                }
                let [Field::Sealed(bx)] = msg.payload.as_slice() else { return Outcome::Ignore };
                let fields = tri!(cx.pk_open(bx, NONCE_B));
                let nb = match (fields.as_slice(), self.fixed) {
                    ([Field::Nonce(na2), Field::Nonce(nb), Field::Identity(who)], true) => {
                        if *who != self.b {
                            return FailReason::IdentityMismatch.into();
                        }
                        if *na2 != na {
                            return FailReason::Freshness.into();
                        }
                        *nb
                    }
                    ([Field::Nonce(na2), Field::Nonce(nb)], false) => {
                        if *na2 != na {
                            return FailReason::Freshness.into();
                        }
                        *nb
                    }
                    _ => return FailReason::Authentication.into(),
                };
                let bx = cx.pk_seal(&kpb, NONCE_FINAL, &[Field::Nonce(nb)]);
                let est = self.established(cx, &na, &nb, self.b);
                self.state = State::Done;
                Outcome::Advance(Step::send(Out::fire(self.b, 7, vec![Field::Sealed(bx)])).done(est))
            }
            State::AwaitFinal { na, nb } => {
                if !tri!(expect(msg, 7, self.a)) {
                    return Outcome::Ignore;
                }
                let [Field::Sealed(bx)] = msg.payload.as_slice() else { return Outcome::Ignore };
                let fields = tri!(cx.pk_open(bx, NONCE_FINAL));
                if fields != [Field::Nonce(nb)] {
                    return FailReason::Freshness.into();
                }
                let est = self.established(cx, &na, &nb, self.a);
                self.state = State::Done;
                Outcome::Advance(Step::default().done(est))
            }
            State::Idle | State::Done => Outcome::Ignore,
        }
    }
}
