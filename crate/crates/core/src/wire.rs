//! Byte-exact message encoding and the on-air transcript.
//!
//! Frame layout (all integers big-endian):
//!
//! ```text
//! offset  size  field
//! 0       1     protocol id (1..=8)
//! 1       1     message index, 1-based
//! 2       8     sender label
//! 10      8     receiver label
//! 18      1     field count
//! 19      ...   fields: tag (1) | length (2) | value (length)
//! ```
//!
//! Field tags: 1 identity (8), 2 nonce (16), 3 sealed box, 4 dh public (32),
//! 5 signature, 6 timestamp (8, virtual microseconds), 7 public key (PKCS#1
//! DER), 8 mac (32), 9 raw key (16 or 32). A sealed box value is
//! `scheme (1) | u16 header | u16 iv | u16 body | u16 tag`, each length
//! followed by its bytes.
//!
//! For example the symmetric-TKDF opening message from `A` to `B` carries a
//! single identity field and is 30 bytes long:
//!
//! ```text
//! 04 01 | 41 00 00 00 00 00 00 00 | 42 00 00 00 00 00 00 00 | 01 | 01 00 08 41 00 00 00 00 00 00 00
//! ```
//!
//! Every `(protocol, index)` pair has a fixed field schema; both encoder and
//! decoder enforce it, so a frame re-labelled with another protocol id is
//! rejected whenever the two schemas differ.

use serde::Serialize;
use serde_json::{json, Value};

use crate::crypto::{DhPublic, NonceValue, Scheme, SealedBox, Signature, MAC_LEN, NONCE_LEN};
use crate::{NodeId, ProtocolKind, NODE_ID_LEN};

const HEADER_LEN: usize = 2 + 2 * NODE_ID_LEN + 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Field {
    Identity(NodeId),
    Nonce(NonceValue),
    Sealed(SealedBox),
    DhPublic(DhPublic),
    Signature(Signature),
    Timestamp(u64),
    PublicKey(Vec<u8>),
    Mac([u8; MAC_LEN]),
    Key(Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Identity,
    Nonce,
    SealedAead,
    SealedPk,
    DhPublic,
    Signature,
    Timestamp,
    PublicKey,
    Mac,
    Key,
}

impl Field {
    pub fn kind(&self) -> FieldKind {
        match self {
            Field::Identity(_) => FieldKind::Identity,
            Field::Nonce(_) => FieldKind::Nonce,
            Field::Sealed(b) if b.scheme == Scheme::Aead => FieldKind::SealedAead,
            Field::Sealed(_) => FieldKind::SealedPk,
            Field::DhPublic(_) => FieldKind::DhPublic,
            Field::Signature(_) => FieldKind::Signature,
            Field::Timestamp(_) => FieldKind::Timestamp,
            Field::PublicKey(_) => FieldKind::PublicKey,
            Field::Mac(_) => FieldKind::Mac,
            Field::Key(_) => FieldKind::Key,
        }
    }

    fn tag(&self) -> u8 {
        match self {
            Field::Identity(_) => 1,
            Field::Nonce(_) => 2,
            Field::Sealed(_) => 3,
            Field::DhPublic(_) => 4,
            Field::Signature(_) => 5,
            Field::Timestamp(_) => 6,
            Field::PublicKey(_) => 7,
            Field::Mac(_) => 8,
            Field::Key(_) => 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WireMessage {
    pub kind: ProtocolKind,
    pub msg_index: u8,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub payload: Vec<Field>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("{kind} has no message {index}")]
    UnknownIndex { kind: ProtocolKind, index: u8 },
    #[error("{kind} message {index} expects fields {expected:?}, got {found:?}")]
    FieldMismatch { kind: ProtocolKind, index: u8, expected: Vec<FieldKind>, found: Vec<FieldKind> },
    #[error("field value of {0} bytes does not fit a 16-bit length")]
    Oversized(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("truncated input")]
    Truncated,
    #[error("unknown protocol id {0}")]
    UnknownProtocol(u8),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("unknown field tag {0}")]
    UnknownTag(u8),
    #[error("field tag {tag} has invalid length {len}")]
    BadFieldLength { tag: u8, len: usize },
    #[error("invalid node label")]
    BadIdentity,
    #[error("unknown sealed-box scheme {0}")]
    BadScheme(u8),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

use FieldKind as F;

/// Field schema for `(kind, index)`.
pub fn schema(kind: ProtocolKind, index: u8) -> Option<&'static [FieldKind]> {
    use ProtocolKind::*;
    let s: &'static [FieldKind] = match (kind, index) {
        (PskDirect | PskNetLayer, 1) => &[F::Identity],
        (PskDirect | PskNetLayer, 2) => &[F::Nonce],
        (PskDirect | PskNetLayer, 3) => &[F::SealedAead],
        (PskDirect | PskNetLayer, 4) => &[],
        (PskMaster, 1) => &[F::Nonce],
        (PskMaster, 2) => &[F::Nonce, F::Mac],
        (PskMaster, 3 | 4) => &[F::Mac],
        (TkdfSym, 1) => &[F::Identity],
        (TkdfSym, 3) => &[F::Identity, F::Identity, F::Nonce, F::SealedAead],
        (TkdfSym, 2 | 4..=7) => &[F::SealedAead],
        (TkdfSymUnfixed, 1) => &[F::Identity, F::Identity, F::Nonce],
        (TkdfSymUnfixed, 2..=5) => &[F::SealedAead],
        (TkdfAsym | TkdfAsymUnfixed, 1 | 4) => &[F::Identity, F::Identity],
        (TkdfAsym | TkdfAsymUnfixed, 2 | 5) => &[F::PublicKey, F::Identity, F::Signature],
        (TkdfAsym | TkdfAsymUnfixed, 3 | 6 | 7) => &[F::SealedPk],
        (OnDemandSts, 1) => &[F::DhPublic, F::Nonce],
        (OnDemandSts, 2) => &[F::DhPublic, F::Nonce, F::Signature],
        (OnDemandSts, 3) => &[F::Signature],
        (OnDemandSts, 4) => &[F::Mac],
        _ => return None,
    };
    Some(s)
}

fn check_schema(kind: ProtocolKind, index: u8, payload: &[Field]) -> Result<(), SchemaError> {
    let expected = schema(kind, index).ok_or(SchemaError::UnknownIndex { kind, index })?;
    let found: Vec<FieldKind> = payload.iter().map(Field::kind).collect();
    if found != expected {
        return Err(SchemaError::FieldMismatch { kind, index, expected: expected.to_vec(), found });
    }
    Ok(())
}

fn put_len_prefixed(out: &mut Vec<u8>, bytes: &[u8]) -> Result<(), SchemaError> {
    let len = u16::try_from(bytes.len()).map_err(|_| SchemaError::Oversized(bytes.len()))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(bytes);
    Ok(())
}

fn sealed_value(b: &SealedBox) -> Result<Vec<u8>, SchemaError> {
    let mut v = vec![b.scheme.tag()];
    for part in [&b.header, &b.iv, &b.body, &b.tag] {
        put_len_prefixed(&mut v, part)?;
    }
    Ok(v)
}

fn field_value(f: &Field) -> Result<Vec<u8>, SchemaError> {
    Ok(match f {
        Field::Identity(id) => id.as_bytes().to_vec(),
        Field::Nonce(n) => n.to_vec(),
        Field::Sealed(b) => sealed_value(b)?,
        Field::DhPublic(p) => p.0.to_vec(),
        Field::Signature(s) => s.0.clone(),
        Field::Timestamp(t) => t.to_be_bytes().to_vec(),
        Field::PublicKey(der) => der.clone(),
        Field::Mac(m) => m.to_vec(),
        Field::Key(k) => k.clone(),
    })
}

fn put_fields(out: &mut Vec<u8>, fields: &[Field]) -> Result<(), SchemaError> {
    let count = u8::try_from(fields.len()).map_err(|_| SchemaError::Oversized(fields.len()))?;
    out.push(count);
    for f in fields {
        out.push(f.tag());
        put_len_prefixed(out, &field_value(f)?)?;
    }
    Ok(())
}

pub fn encode(msg: &WireMessage) -> Result<Vec<u8>, SchemaError> {
    check_schema(msg.kind, msg.msg_index, &msg.payload)?;
    let mut out = Vec::with_capacity(64);
    out.push(msg.kind.wire_id());
    out.push(msg.msg_index);
    out.extend_from_slice(msg.sender.as_bytes());
    out.extend_from_slice(msg.receiver.as_bytes());
    put_fields(&mut out, &msg.payload)?;
    Ok(out)
}

/// Schema-free field list, used for the plaintext inside sealed boxes.
pub fn encode_fields(fields: &[Field]) -> Vec<u8> {
    let mut out = Vec::new();
    put_fields(&mut out, fields).expect("inner plaintext fields are small");
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() < n {
            return Err(CodecError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn len_prefixed(&mut self) -> Result<&'a [u8], CodecError> {
        let n = self.u16()? as usize;
        self.take(n)
    }

    fn node(&mut self) -> Result<NodeId, CodecError> {
        let raw: [u8; NODE_ID_LEN] = self.take(NODE_ID_LEN)?.try_into().expect("fixed width");
        decode_node(raw)
    }

    fn finish(&self) -> Result<(), CodecError> {
        match self.buf.len() {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

// Only canonical, zero-padded labels decode.
fn decode_node(raw: [u8; NODE_ID_LEN]) -> Result<NodeId, CodecError> {
    let end = raw.iter().position(|b| *b == 0).unwrap_or(NODE_ID_LEN);
    if end == 0 || raw[end..].iter().any(|b| *b != 0) {
        return Err(CodecError::BadIdentity);
    }
    let label = std::str::from_utf8(&raw[..end]).map_err(|_| CodecError::BadIdentity)?;
    NodeId::new(label).map_err(|_| CodecError::BadIdentity)
}

fn fixed<const N: usize>(tag: u8, v: &[u8]) -> Result<[u8; N], CodecError> {
    v.try_into().map_err(|_| CodecError::BadFieldLength { tag, len: v.len() })
}

fn decode_field(tag: u8, v: &[u8]) -> Result<Field, CodecError> {
    Ok(match tag {
        1 => Field::Identity(decode_node(fixed::<NODE_ID_LEN>(tag, v)?)?),
        2 => Field::Nonce(fixed::<NONCE_LEN>(tag, v)?),
        3 => {
            let mut r = Reader { buf: v };
            let scheme_tag = r.u8()?;
            let scheme = Scheme::from_tag(scheme_tag).ok_or(CodecError::BadScheme(scheme_tag))?;
            let header = r.len_prefixed()?.to_vec();
            let iv = r.len_prefixed()?.to_vec();
            let body = r.len_prefixed()?.to_vec();
            let tag_bytes = r.len_prefixed()?.to_vec();
            r.finish()?;
            Field::Sealed(SealedBox { scheme, header, iv, body, tag: tag_bytes })
        }
        4 => Field::DhPublic(DhPublic(fixed::<32>(tag, v)?)),
        5 => Field::Signature(Signature(v.to_vec())),
        6 => Field::Timestamp(u64::from_be_bytes(fixed::<8>(tag, v)?)),
        7 => Field::PublicKey(v.to_vec()),
        8 => Field::Mac(fixed::<MAC_LEN>(tag, v)?),
        9 if v.len() == 16 || v.len() == 32 => Field::Key(v.to_vec()),
        9 => return Err(CodecError::BadFieldLength { tag, len: v.len() }),
        t => return Err(CodecError::UnknownTag(t)),
    })
}

fn read_fields(r: &mut Reader<'_>) -> Result<Vec<Field>, CodecError> {
    let count = r.u8()? as usize;
    let mut fields = Vec::with_capacity(count);
    for _ in 0..count {
        let tag = r.u8()?;
        let v = r.len_prefixed()?;
        fields.push(decode_field(tag, v)?);
    }
    Ok(fields)
}

pub fn decode(bytes: &[u8]) -> Result<WireMessage, CodecError> {
    let mut r = Reader { buf: bytes };
    let pid = r.u8()?;
    let kind = ProtocolKind::from_wire_id(pid).ok_or(CodecError::UnknownProtocol(pid))?;
    let msg_index = r.u8()?;
    let sender = r.node()?;
    let receiver = r.node()?;
    let payload = read_fields(&mut r)?;
    r.finish()?;
    check_schema(kind, msg_index, &payload)?;
    Ok(WireMessage { kind, msg_index, sender, receiver, payload })
}

pub fn decode_fields(bytes: &[u8]) -> Result<Vec<Field>, CodecError> {
    let mut r = Reader { buf: bytes };
    let fields = read_fields(&mut r)?;
    r.finish()?;
    Ok(fields)
}

/// Cheap peek at the header without validating the payload.
pub fn peek_header(bytes: &[u8]) -> Option<(u8, u8)> {
    (bytes.len() >= HEADER_LEN).then(|| (bytes[0], bytes[1]))
}

fn field_view(f: &Field) -> Value {
    match f {
        Field::Identity(id) => json!({"identity": id.label()}),
        Field::Nonce(n) => json!({"nonce": hex::encode(n)}),
        Field::Sealed(b) => json!({"sealed": {
            "scheme": match b.scheme { Scheme::Aead => "aead", Scheme::PublicKey => "public-key" },
            "header": hex::encode(&b.header),
            "iv": hex::encode(&b.iv),
            "body_len": b.body.len(),
            "tag": hex::encode(&b.tag),
        }}),
        Field::DhPublic(p) => json!({"dh_public": hex::encode(p.0)}),
        Field::Signature(s) => json!({"signature_len": s.0.len()}),
        Field::Timestamp(t) => json!({"timestamp_us": t}),
        Field::PublicKey(der) => json!({"public_key_der_len": der.len()}),
        Field::Mac(m) => json!({"mac": hex::encode(m)}),
        Field::Key(k) => json!({"key_len": k.len()}),
    }
}

/// JSON view of a message, as written to transcript dumps.
pub fn decoded_view(msg: &WireMessage) -> Value {
    json!({
        "protocol": msg.kind.name(),
        "msg_index": msg.msg_index,
        "sender": msg.sender.label(),
        "receiver": msg.receiver.label(),
        "fields": msg.payload.iter().map(field_view).collect::<Vec<_>>(),
    })
}

/// What kind of frame went on air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum FrameKind {
    Datagram,
    StreamSyn,
    StreamSynAck,
    StreamAck,
    StreamSegment { seq: u32 },
    StreamSegmentAck { seq: u32 },
}

/// One hop transmission as seen by a monitor-mode capture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub time_us: u64,
    pub hop_from: NodeId,
    pub hop_to: NodeId,
    pub src: NodeId,
    pub dst: NodeId,
    pub frame: FrameKind,
    /// Protocol message bytes for datagrams and stream segments; empty for
    /// stream control frames.
    pub bytes: Vec<u8>,
    pub delivered: bool,
}

impl TranscriptEntry {
    /// Bytes occupied on air, including a nominal transport header.
    pub fn air_len(&self) -> usize {
        const DATAGRAM_OVERHEAD: usize = 8;
        const STREAM_OVERHEAD: usize = 20;
        match self.frame {
            FrameKind::Datagram => DATAGRAM_OVERHEAD + self.bytes.len(),
            _ => STREAM_OVERHEAD + self.bytes.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("transcript time went backwards: {last} -> {attempted}")]
pub struct TimeWentBackwards {
    pub last: u64,
    pub attempted: u64,
}

/// Append-only, time-ordered record of every on-air frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: TranscriptEntry) -> Result<(), TimeWentBackwards> {
        if let Some(last) = self.entries.last() {
            if entry.time_us < last.time_us {
                return Err(TimeWentBackwards { last: last.time_us, attempted: entry.time_us });
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One JSON object per line: time, hop endpoints, frame type, delivered
    /// flag, hex bytes and a decoded view of the carried message.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let decoded = if e.bytes.is_empty() {
                Value::Null
            } else {
                decode(&e.bytes).map(|m| decoded_view(&m)).unwrap_or(Value::Null)
            };
            let line = json!({
                "time_us": e.time_us,
                "hop_from": e.hop_from.label(),
                "hop_to": e.hop_to.label(),
                "src": e.src.label(),
                "dst": e.dst.label(),
                "frame": e.frame,
                "delivered": e.delivered,
                "hex": hex::encode(&e.bytes),
                "decoded": decoded,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> NodeId {
        NodeId::named("A")
    }
    fn b() -> NodeId {
        NodeId::named("B")
    }

    fn hello() -> WireMessage {
        WireMessage {
            kind: ProtocolKind::TkdfSym,
            msg_index: 1,
            sender: a(),
            receiver: b(),
            payload: vec![Field::Identity(a())],
        }
    }

    #[test]
    fn tkdf_sym_hello_layout() {
        // Hand-assembled from the layout table in the module docs.
        let mut expected = vec![0x04, 0x01];
        expected.extend_from_slice(b"A\0\0\0\0\0\0\0");
        expected.extend_from_slice(b"B\0\0\0\0\0\0\0");
        expected.push(0x01);
        expected.extend_from_slice(&[0x01, 0x00, 0x08]);
        expected.extend_from_slice(b"A\0\0\0\0\0\0\0");
        let bytes = encode(&hello()).unwrap();
        assert_eq!(bytes.len(), 30);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn deterministic_and_roundtrip() {
        let m = hello();
        assert_eq!(encode(&m).unwrap(), encode(&m).unwrap());
        assert_eq!(decode(&encode(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn missing_field_is_schema_error() {
        let m = WireMessage {
            kind: ProtocolKind::TkdfSym,
            msg_index: 3,
            sender: a(),
            receiver: NodeId::named("S"),
            payload: vec![Field::Identity(a()), Field::Identity(b())],
        };
        assert!(matches!(encode(&m), Err(SchemaError::FieldMismatch { .. })));
        let bad_index = WireMessage { msg_index: 9, ..hello() };
        assert!(matches!(encode(&bad_index), Err(SchemaError::UnknownIndex { .. })));
    }

    #[test]
    fn truncation_and_trailing_bytes() {
        let bytes = encode(&hello()).unwrap();
        for cut in 0..bytes.len() {
            assert!(decode(&bytes[..cut]).is_err(), "prefix {cut} decoded");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(decode(&long), Err(CodecError::TrailingBytes(1)));
    }

    #[test]
    fn spliced_protocol_id_is_rejected() {
        let mut bytes = encode(&hello()).unwrap();
        bytes[0] = ProtocolKind::TkdfAsym.wire_id();
        assert!(matches!(decode(&bytes), Err(CodecError::Schema(_))));
        bytes[0] = 0xee;
        assert_eq!(decode(&bytes), Err(CodecError::UnknownProtocol(0xee)));
    }

    #[test]
    fn non_canonical_identity_rejected() {
        let mut bytes = encode(&hello()).unwrap();
        bytes[4] = b'X'; // "A\0X..." has a hole
        assert_eq!(decode(&bytes), Err(CodecError::BadIdentity));
    }

    #[test]
    fn transcript_is_time_ordered() {
        let mut t = Transcript::new();
        let e = |time_us| TranscriptEntry {
            time_us,
            hop_from: a(),
            hop_to: b(),
            src: a(),
            dst: b(),
            frame: FrameKind::Datagram,
            bytes: encode(&hello()).unwrap(),
            delivered: true,
        };
        t.push(e(5)).unwrap();
        t.push(e(5)).unwrap();
        assert!(t.push(e(4)).is_err());
        let jl = t.to_json_lines();
        assert_eq!(jl.lines().count(), 2);
        let v: Value = serde_json::from_str(jl.lines().next().unwrap()).unwrap();
        assert_eq!(v["decoded"]["protocol"], "tkdf-sym");
        assert_eq!(v["frame"]["type"], "datagram");
    }
}
