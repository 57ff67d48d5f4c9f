//! Node identities.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Width of a node label on the wire.
pub const NODE_ID_LEN: usize = 8;

/// Fixed 8-byte node label. Shorter labels are zero-padded on the right.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId([u8; NODE_ID_LEN]);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid node label {0:?}: expected 1..=8 ASCII graphic characters")]
pub struct InvalidNodeId(pub String);

impl NodeId {
    pub const fn from_bytes(bytes: [u8; NODE_ID_LEN]) -> Self {
        Self(bytes)
    }

    pub fn new(label: &str) -> Result<Self, InvalidNodeId> {
        let raw = label.as_bytes();
        if raw.is_empty() || raw.len() > NODE_ID_LEN || !raw.iter().all(u8::is_ascii_graphic) {
            return Err(InvalidNodeId(label.to_owned()));
        }
        let mut out = [0u8; NODE_ID_LEN];
        out[..raw.len()].copy_from_slice(raw);
        Ok(Self(out))
    }

    /// Panics on an invalid label; meant for compile-time constant names.
    pub fn named(label: &str) -> Self {
        Self::new(label).expect("static node label")
    }

    pub fn as_bytes(&self) -> &[u8; NODE_ID_LEN] {
        &self.0
    }

    pub fn label(&self) -> String {
        let end = self.0.iter().position(|b| *b == 0).unwrap_or(NODE_ID_LEN);
        String::from_utf8_lossy(&self.0[..end]).into_owned()
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeId({})", self.label())
    }
}

impl std::str::FromStr for NodeId {
    type Err = InvalidNodeId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        NodeId::new(&s).map_err(serde::de::Error::custom)
    }
}
