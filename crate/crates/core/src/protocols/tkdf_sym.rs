//! Server-mediated symmetric key distribution. The fixed flow binds the
//! ticket to a responder nonce fetched before the server is contacted; the
//! unfixed flow sends the ticket without one.

use super::{
    expect, nb_minus_one, tri, Contributors, Ctx, Established, FailReason, Handshake, Out, Outcome, Role, SessionIds,
    Step,
};
use crate::crypto::{KeyBits, NonceValue, SealedBox, SymKey};
use crate::wire::{Field, WireMessage};
use crate::NodeId;

const RESPONDER_NONCE: &[u8] = b"tkdf-sym/responder-nonce";
const SERVER_REPLY: &[u8] = b"tkdf-sym/server-reply";
const TICKET: &[u8] = b"tkdf-sym/ticket";
const CHALLENGE: &[u8] = b"tkdf-sym/challenge";
pub(crate) const ANSWER: &[u8] = b"tkdf-sym/answer";

#[derive(Clone)]
enum State {
    Idle,
    // initiator
    AwaitResponderBox,
    AwaitServer { na: NonceValue },
    AwaitChallenge { kab: SymKey },
    // responder
    AwaitTicket { nb_prime: Option<NonceValue> },
    AwaitAnswer { kab: SymKey, nb: NonceValue },
    Done,
    Serving,
}

/// Both variants; `fixed` selects the message layout.
pub(crate) struct TkdfSym {
    fixed: bool,
    a: NodeId,
    b: NodeId,
    s: NodeId,
    state: State,
}

impl TkdfSym {
    pub(crate) fn new(fixed: bool, role: Role, ids: &SessionIds) -> Self {
        let state = match role {
            Role::Initiator => State::Idle,
            Role::Responder if fixed => State::Idle,
            Role::Responder => State::AwaitTicket { nb_prime: None },
            Role::KeyServer => State::Serving,
        };
        Self { fixed, a: ids.initiator, b: ids.responder, s: ids.server.expect("checked by keystore"), state }
    }

    // Message indices differ between the two layouts.
    fn idx_server_request(&self) -> u8 {
        if self.fixed { 3 } else { 1 }
    }
    fn idx_server_reply(&self) -> u8 {
        self.idx_server_request() + 1
    }
    fn idx_ticket(&self) -> u8 {
        self.idx_server_reply() + 1
    }

    fn established(&self, cx: &Ctx, kab: SymKey, nb: &NonceValue, peer: NodeId) -> Established {
        Established {
            key: kab,
            contributors: Contributors::fresh(&[self.s]),
            labels: vec![
                cx.kind.name().as_bytes().to_vec(),
                self.a.as_bytes().to_vec(),
                self.b.as_bytes().to_vec(),
                self.s.as_bytes().to_vec(),
                nb.to_vec(),
            ],
            peer,
        }
    }

    fn request_server(&mut self, cx: &mut Ctx, responder_box: Option<SealedBox>) -> Step {
        let na = cx.nonce();
        let mut payload = vec![Field::Identity(self.a), Field::Identity(self.b), Field::Nonce(na)];
        if let Some(bx) = responder_box {
            payload.push(Field::Sealed(bx));
        }
        self.state = State::AwaitServer { na };
        Step::send(Out::awaiting(self.s, self.idx_server_request(), payload, 2))
    }

    fn serve(&mut self, cx: &mut Ctx, msg: &WireMessage) -> Outcome {
        if msg.msg_index != self.idx_server_request() {
            return Outcome::Ignore;
        }
        let (x, y, na, nb_prime) = match msg.payload.as_slice() {
            [Field::Identity(x), Field::Identity(y), Field::Nonce(na), Field::Sealed(bx)] if self.fixed => {
                let Ok(kys) = cx.sym_key(*y) else { return Outcome::Ignore };
                match cx.open(&kys, bx, RESPONDER_NONCE).as_deref() {
                    Ok([Field::Identity(xp), Field::Nonce(nbp)]) if xp == x => (*x, *y, *na, Some(*nbp)),
                    _ => return Outcome::Ignore,
                }
            }
            [Field::Identity(x), Field::Identity(y), Field::Nonce(na)] if !self.fixed => (*x, *y, *na, None),
            _ => return Outcome::Ignore,
        };
        // A server answers any registered principal and never fails itself.
        if x != msg.sender {
            return Outcome::Ignore;
        }
        let (Ok(kxs), Ok(kys)) = (cx.sym_key(x), cx.sym_key(y)) else { return Outcome::Ignore };
        let kab = SymKey::generate(&mut cx.rng, KeyBits::B256);
        let mut ticket_fields = vec![Field::Key(kab.as_bytes().to_vec())];
        if let Some(nbp) = nb_prime {
            ticket_fields.push(Field::Nonce(nbp));
        }
        ticket_fields.push(Field::Identity(x));
        let ticket = cx.seal(&kys, TICKET, &ticket_fields);
        let reply = cx.seal(
            &kxs,
            SERVER_REPLY,
            &[Field::Nonce(na), Field::Identity(y), Field::Key(kab.as_bytes().to_vec()), Field::Sealed(ticket)],
        );
        Outcome::Advance(Step::send(Out::fire(x, self.idx_server_reply(), vec![Field::Sealed(reply)])))
    }

    fn handle(&mut self, cx: &mut Ctx, msg: &WireMessage) -> Outcome {
        match self.state.clone() {
            State::Serving => self.serve(cx, msg),
            State::Idle if cx.me == self.b => {
                // fixed responder: hand out a nonce sealed for the server
                if !tri!(expect(msg, 1, self.a)) {
                    return Outcome::Ignore;
                }
                let [Field::Identity(claimed)] = msg.payload.as_slice() else { return Outcome::Ignore };
                if *claimed != self.a {
                    return FailReason::IdentityMismatch.into();
                }
                let kbs = tri!(cx.sym_key(self.s));
                let nbp = cx.nonce();
                let bx = cx.seal(&kbs, RESPONDER_NONCE, &[Field::Identity(self.a), Field::Nonce(nbp)]);
                self.state = State::AwaitTicket { nb_prime: Some(nbp) };
                Outcome::Advance(Step::send(Out::fire(self.a, 2, vec![Field::Sealed(bx)])))
            }
            State::AwaitResponderBox => {
                if !tri!(expect(msg, 2, self.b)) {
                    return Outcome::Ignore;
                }
                let [Field::Sealed(bx)] = msg.payload.as_slice() else { return Outcome::Ignore };
                Outcome::Advance(self.request_server(cx, Some(bx.clone())))
            }
            State::AwaitServer { na } => {
                if !tri!(expect(msg, self.idx_server_reply(), self.s)) {
                    return Outcome::Ignore;
                }
                let [Field::Sealed(bx)] = msg.payload.as_slice() else { return Outcome::Ignore };
                let kas = tri!(cx.sym_key(self.s));
                let fields = tri!(cx.open(&kas, bx, SERVER_REPLY));
                let [Field::Nonce(na2), Field::Identity(y), Field::Key(k), Field::Sealed(ticket)] = fields.as_slice()
                else {
                    return FailReason::Authentication.into();
                };
                if *na2 != na {
                    return FailReason::Freshness.into();
                }
                if *y != self.b {
                    return FailReason::IdentityMismatch.into();
                }
                let kab = tri!(SymKey::from_bytes(k).map_err(|_| FailReason::Authentication));
                self.state = State::AwaitChallenge { kab };
                Outcome::Advance(Step::send(Out::awaiting(
                    self.b,
                    self.idx_ticket(),
                    vec![Field::Sealed(ticket.clone())],
                    2,
                )))
            }
            State::AwaitTicket { nb_prime } => {
                if !tri!(expect(msg, self.idx_ticket(), self.a)) {
                    return Outcome::Ignore;
                }
                let [Field::Sealed(ticket)] = msg.payload.as_slice() else { return Outcome::Ignore };
                let kbs = tri!(cx.sym_key(self.s));
                let fields = tri!(cx.open(&kbs, ticket, TICKET));
                let (k, who) = match (fields.as_slice(), nb_prime) {
                    ([Field::Key(k), Field::Nonce(n), Field::Identity(who)], Some(expected)) => {
                        if *n != expected {
                            return FailReason::Freshness.into();
                        }
                        (k, who)
                    }
                    ([Field::Key(k), Field::Identity(who)], None) => (k, who),
                    _ => return FailReason::Authentication.into(),
                };
                if *who != self.a {
                    return FailReason::IdentityMismatch.into();
                }
                let kab = tri!(SymKey::from_bytes(k).map_err(|_| FailReason::Authentication));
                let nb = cx.nonce();
                let challenge = cx.seal(&kab, CHALLENGE, &[Field::Nonce(nb)]);
                self.state = State::AwaitAnswer { kab, nb };
                Outcome::Advance(Step::send(Out::awaiting(
                    self.a,
                    self.idx_ticket() + 1,
                    vec![Field::Sealed(challenge)],
                    2,
                )))
            }
            State::AwaitChallenge { kab } => {
                if !tri!(expect(msg, self.idx_ticket() + 1, self.b)) {
                    return Outcome::Ignore;
                }
                let [Field::Sealed(bx)] = msg.payload.as_slice() else { return Outcome::Ignore };
                let fields = tri!(cx.open(&kab, bx, CHALLENGE));
                let [Field::Nonce(nb)] = fields.as_slice() else { return FailReason::Authentication.into() };
                let answer = cx.seal(&kab, ANSWER, &[Field::Nonce(nb_minus_one(nb))]);
                let est = self.established(cx, kab, nb, self.b);
                self.state = State::Done;
                Outcome::Advance(
                    Step::send(Out::fire(self.b, self.idx_ticket() + 2, vec![Field::Sealed(answer)])).done(est),
                )
            }
            State::AwaitAnswer { kab, nb } => {
                if !tri!(expect(msg, self.idx_ticket() + 2, self.a)) {
                    return Outcome::Ignore;
                }
                let [Field::Sealed(bx)] = msg.payload.as_slice() else { return Outcome::Ignore };
                let fields = tri!(cx.open(&kab, bx, ANSWER));
                if fields != [Field::Nonce(nb_minus_one(&nb))] {
                    return FailReason::Freshness.into();
                }
                let est = self.established(cx, kab, &nb, self.a);
                self.state = State::Done;
                Outcome::Advance(Step::default().done(est))
            }
            State::Idle | State::Done => Outcome::Ignore,
        }
    }

    fn begin(&mut self, cx: &mut Ctx) -> Step {
        if self.fixed {
            self.state = State::AwaitResponderBox;
            Step::send(Out::awaiting(self.b, 1, vec![Field::Identity(self.a)], 2))
        } else {
            self.request_server(cx, None)
        }
    }
}

impl Handshake for TkdfSym {
    fn start(&mut self, cx: &mut Ctx) -> Step {
        self.begin(cx)
    }

    fn on_message(&mut self, cx: &mut Ctx, msg: &WireMessage) -> Outcome {
        self.handle(cx, msg)
    }
}
