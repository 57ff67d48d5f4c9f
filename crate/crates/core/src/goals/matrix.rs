use std::fmt::Write;

use serde::Serialize;

use super::{Goal, Symbol};
use crate::ProtocolKind;

/// One column of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Column {
    Wep,
    WpaPsk,
    IpSec,
    SymmetricTkdf,
    AsymmetricTkdf,
    Ssh,
    Ssl,
}

impl Column {
    pub const ALL: [Column; 7] = [
        Column::Wep,
        Column::WpaPsk,
        Column::IpSec,
        Column::SymmetricTkdf,
        Column::AsymmetricTkdf,
        Column::Ssh,
        Column::Ssl,
    ];

    pub fn header(self) -> &'static str {
        match self {
            Column::Wep => "WEP",
            Column::WpaPsk => "WPA-PSK",
            Column::IpSec => "IPSec",
            Column::SymmetricTkdf => "Symmetric TKDF",
            Column::AsymmetricTkdf => "Asymmetric TKDF",
            Column::Ssh => "SSH",
            Column::Ssl => "SSL",
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Column::Wep => "wep",
            Column::WpaPsk => "wpa-psk",
            Column::IpSec => "ipsec",
            Column::SymmetricTkdf => "symmetric-tkdf",
            Column::AsymmetricTkdf => "asymmetric-tkdf",
            Column::Ssh => "ssh",
            Column::Ssl => "ssl",
        }
    }

    /// Accepts a column id or the name of its representative protocol.
    pub fn parse(s: &str) -> Option<Column> {
        let s = s.trim().to_ascii_lowercase();
        Column::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .or_else(|| Column::ALL.into_iter().find(|c| c.representative().name() == s))
    }

    /// The implemented protocol standing in for this column.
    pub fn representative(self) -> ProtocolKind {
        match self {
            Column::Wep => ProtocolKind::PskDirect,
            Column::WpaPsk => ProtocolKind::PskMaster,
            Column::IpSec => ProtocolKind::PskNetLayer,
            Column::SymmetricTkdf => ProtocolKind::TkdfSym,
            Column::AsymmetricTkdf => ProtocolKind::TkdfAsym,
            Column::Ssh | Column::Ssl => ProtocolKind::OnDemandSts,
        }
    }

    pub fn for_kind(kind: ProtocolKind) -> Vec<Column> {
        Column::ALL.into_iter().filter(|c| c.representative() == kind).collect()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Claimed verdicts indexed by goal, then column.
pub type StaticMatrix = [[Symbol; 7]; 13];

pub fn static_matrix() -> StaticMatrix {
    use Symbol::{Conditional as C, Fails as F, Implicit as I, Meets as M};
    [
        [I, I, I, M, M, C, M],
        [F, F, F, F, M, M, M],
        [F, I, F, I, I, M, M],
        [F, I, I, I, I, C, C],
        [F, M, F, M, M, M, M],
        [M, M, M, M, M, M, M],
        [F, M, F, M, M, M, M],
        [I, I, I, I, I, M, M],
        [F, F, M, M, M, M, M],
        [F, F, F, M, M, M, M],
        [F, F, F, F, M, M, M],
        [M, M, M, M, M, M, M],
        [I, I, I, C, C, C, C],
    ]
}

pub const TABLE1_FIXTURE: &str = include_str!("../../fixtures/table1.md");
pub const TABLE1_FIXTURE_SHA256: &str = "a3702d8b378c0dabf2c860a8f6c21cf918c96a7e85412341fe79b6a72e6e6277";

/// The matrix as a markdown table, byte-identical to the committed fixture.
pub fn render_static_markdown(m: &StaticMatrix) -> String {
    let mut out = String::from("| Goal |");
    for c in Column::ALL {
        write!(out, " {} |", c.header()).expect("string write");
    }
    out.push_str("\n|---|---|---|---|---|---|---|---|\n");
    for g in Goal::ALL {
        write!(out, "| {g} |").expect("string write");
        for c in Column::ALL {
            write!(out, " {} |", m[g.index()][c.index()]).expect("string write");
        }
        out.push('\n');
    }
    out
}
