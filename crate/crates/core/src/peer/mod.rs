//! Beacon discovery, keyed mutual authentication and gateway election.

pub mod beacon;
pub mod table;

pub use beacon::{authenticate_peer, AuthFailure, AuthResult, Beacon, PeerChange, PeerNotification};
pub use table::{elect_gateway, PeerDelta, PeerEntry, PeerTable};
