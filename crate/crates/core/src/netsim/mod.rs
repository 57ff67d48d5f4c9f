//! Deterministic discrete-event simulation of a small wireless test-bed.
//!
//! Each hop of a route samples its own loss and latency; relays forward
//! frames without processing them. Engines are charged virtual compute time
//! from a [`CryptoCostModel`] and process one event at a time, so a busy key
//! server queues requests. Every on-air frame, delivered or not, is recorded
//! in a [`Transcript`](crate::wire::Transcript).
//!
//! Stream transport opens with a three-frame setup and then delivers
//! segments reliably and in order, each acknowledged and retransmitted on the
//! same back-off schedule the engines use.

mod cost;
mod sim;
mod topology;

pub use cost::CryptoCostModel;
pub use sim::{EstablishedAt, FailureKind, RunReport, SimFailure, SimStats, Simulator, DEFAULT_HORIZON_US};
pub use topology::{LinkMode, LinkModel, NodeRole, Topology};

use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("no route from {src} to {dst}")]
    Unreachable { src: NodeId, dst: NodeId },
    #[error("cannot bind engine: {0}")]
    BindingError(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("{pending} events still queued at the {horizon_us} us horizon")]
    HorizonExceeded { horizon_us: u64, pending: usize },
}

#[cfg(test)]
mod tests;
