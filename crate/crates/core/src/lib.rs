//! Secure-channel establishment for avionics wireless networks.
//!
//! Three deployment families are modelled as sans-IO handshake engines:
//! pre-shared keys, trusted key distribution through a key server, and
//! on-demand signed Diffie-Hellman. The engines run over a deterministic
//! discrete-event network simulator, can be attacked by a scripted network
//! adversary, and are benchmarked and compared against published goal and
//! timing tables.

pub mod adversary;
pub mod bench;
pub mod crypto;
pub mod goals;
mod ids;
pub mod netsim;
pub mod protocols;
pub mod provisioning;

pub use ids::{InvalidNodeId, NodeId, NODE_ID_LEN};
mod kind;
pub mod wire;

pub use kind::{Family, ProtocolKind, UnknownProtocol};
