use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Protocol family variant.
///
/// `TkdfSymUnfixed` and `TkdfAsymUnfixed` are the textbook Needham-Schroeder
/// flows without their replay / identity fixes. They exist as negative
/// controls for the attack suite and are refused by the benchmark harness
/// unless insecure variants are explicitly allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    PskDirect,
    PskMaster,
    PskNetLayer,
    TkdfSym,
    TkdfSymUnfixed,
    TkdfAsym,
    TkdfAsymUnfixed,
    OnDemandSts,
}

/// Coarse grouping used for the performance ordering check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    PreShared,
    OnDemand,
    SymmetricTkdf,
    AsymmetricTkdf,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 8] = [
        Self::PskDirect,
        Self::PskMaster,
        Self::PskNetLayer,
        Self::TkdfSym,
        Self::TkdfSymUnfixed,
        Self::TkdfAsym,
        Self::TkdfAsymUnfixed,
        Self::OnDemandSts,
    ];

    /// The six secure variants, in table order.
    pub const SECURE: [ProtocolKind; 6] = [
        Self::PskDirect,
        Self::PskMaster,
        Self::PskNetLayer,
        Self::TkdfSym,
        Self::TkdfAsym,
        Self::OnDemandSts,
    ];

    pub fn wire_id(self) -> u8 {
        match self {
            Self::PskDirect => 1,
            Self::PskMaster => 2,
            Self::PskNetLayer => 3,
            Self::TkdfSym => 4,
            Self::TkdfSymUnfixed => 5,
            Self::TkdfAsym => 6,
            Self::TkdfAsymUnfixed => 7,
            Self::OnDemandSts => 8,
        }
    }

    pub fn from_wire_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.wire_id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PskDirect => "psk-direct",
            Self::PskMaster => "psk-master",
            Self::PskNetLayer => "psk-net-layer",
            Self::TkdfSym => "tkdf-sym",
            Self::TkdfSymUnfixed => "tkdf-sym-unfixed",
            Self::TkdfAsym => "tkdf-asym",
            Self::TkdfAsymUnfixed => "tkdf-asym-unfixed",
            Self::OnDemandSts => "on-demand-sts",
        }
    }

    pub fn is_insecure(self) -> bool {
        matches!(self, Self::TkdfSymUnfixed | Self::TkdfAsymUnfixed)
    }

    pub fn family(self) -> Family {
        match self {
            Self::PskDirect | Self::PskMaster | Self::PskNetLayer => Family::PreShared,
            Self::TkdfSym | Self::TkdfSymUnfixed => Family::SymmetricTkdf,
            Self::TkdfAsym | Self::TkdfAsymUnfixed => Family::AsymmetricTkdf,
            Self::OnDemandSts => Family::OnDemand,
        }
    }

    pub fn needs_server(self) -> bool {
        matches!(self.family(), Family::SymmetricTkdf | Family::AsymmetricTkdf)
    }

    /// Number of on-air messages in one loss-free run.
    pub fn flow_len(self) -> u8 {
        match self {
            Self::PskDirect | Self::PskMaster | Self::PskNetLayer | Self::OnDemandSts => 4,
            Self::TkdfSymUnfixed => 5,
            Self::TkdfSym | Self::TkdfAsym | Self::TkdfAsymUnfixed => 7,
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown protocol {0:?}")]
pub struct UnknownProtocol(pub String);

impl FromStr for ProtocolKind {
    type Err = UnknownProtocol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownProtocol(s.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_names_roundtrip() {
        for k in ProtocolKind::ALL {
            assert_eq!(ProtocolKind::from_wire_id(k.wire_id()), Some(k));
            assert_eq!(k.name().parse::<ProtocolKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert_eq!(ProtocolKind::from_wire_id(0), None);
    }
}
