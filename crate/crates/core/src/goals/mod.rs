//! Security goals G1-G13: the published comparison matrix, the subset that
//! can be checked by attack runs, structural checks for the rest, and a
//! reconciliation of claimed against observed verdicts.
//!
//! Structural rules, one per goal:
//!
//! | Goal | Meets when |
//! |---|---|
//! | G2 | long-term credentials are public-key pairs |
//! | G3 | both peers contribute fresh input to the session key |
//! | G4 | as G3; neither peer alone fixes the key |
//! | G7 | the session key differs from every long-term key |
//! | G11 | credentials are asymmetric and the run carries signatures |
//! | G12 | every contribution passes through the KDF, or nobody contributes |

mod evaluate;
mod matrix;

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

pub use evaluate::{evaluate_dynamic, evaluate_structural, goal_report, reconcile, Discrepancy, GoalCell, GoalReport, Observation};
pub use matrix::{render_static_markdown, static_matrix, Column, StaticMatrix, TABLE1_FIXTURE, TABLE1_FIXTURE_SHA256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Goal {
    G1,
    G2,
    G3,
    G4,
    G5,
    G6,
    G7,
    G8,
    G9,
    G10,
    G11,
    G12,
    G13,
}

impl Goal {
    pub const ALL: [Goal; 13] = [
        Goal::G1,
        Goal::G2,
        Goal::G3,
        Goal::G4,
        Goal::G5,
        Goal::G6,
        Goal::G7,
        Goal::G8,
        Goal::G9,
        Goal::G10,
        Goal::G11,
        Goal::G12,
        Goal::G13,
    ];

    /// Goals checked by attack runs.
    pub const DYNAMIC: [Goal; 7] = [Goal::G1, Goal::G5, Goal::G6, Goal::G8, Goal::G9, Goal::G10, Goal::G13];

    /// Goals checked by inspecting protocol structure.
    pub const STRUCTURAL: [Goal; 6] = [Goal::G2, Goal::G3, Goal::G4, Goal::G7, Goal::G11, Goal::G12];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn title(self) -> &'static str {
        match self {
            Goal::G1 => "Mutual entity authentication",
            Goal::G2 => "Asymmetric architecture",
            Goal::G3 => "Mutual key agreement",
            Goal::G4 => "Joint key control",
            Goal::G5 => "Key freshness",
            Goal::G6 => "Mutual key confirmation",
            Goal::G7 => "Known-key security",
            Goal::G8 => "Unknown key share resilience",
            Goal::G9 => "Key compromise impersonation resilience",
            Goal::G10 => "Perfect forward secrecy",
            Goal::G11 => "Mutual non-repudiation",
            Goal::G12 => "Partial chosen key resilience",
            Goal::G13 => "Privacy",
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}", self.number())
    }
}

impl Serialize for Goal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown goal {0:?}")]
pub struct UnknownGoal(pub String);

impl FromStr for Goal {
    type Err = UnknownGoal;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix(['G', 'g'])
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(|n| n.checked_sub(1))
            .and_then(|i| Goal::ALL.get(i).copied())
            .ok_or_else(|| UnknownGoal(s.to_string()))
    }
}

/// The four verdict classes of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Meets,
    Conditional,
    Fails,
    Implicit,
}

impl Symbol {
    pub fn as_str(self) -> &'static str {
        match self {
            Symbol::Meets => "*",
            Symbol::Conditional => "(*)",
            Symbol::Fails => "×",
            Symbol::Implicit => "−*",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "*" => Some(Symbol::Meets),
            "(*)" => Some(Symbol::Conditional),
            "×" => Some(Symbol::Fails),
            "−*" => Some(Symbol::Implicit),
            _ => None,
        }
    }

    /// Only a definite claim contradicts a definite observation.
    pub fn conflicts_with(self, other: Symbol) -> bool {
        matches!((self, other), (Symbol::Meets, Symbol::Fails) | (Symbol::Fails, Symbol::Meets))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    StaticPaper,
    DynamicAttack,
    StaticStructural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Verdict {
    pub symbol: Symbol,
    pub origin: Origin,
}

#[cfg(test)]
mod tests;
