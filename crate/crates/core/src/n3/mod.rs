//! N3 user plane for nomadic operation.

pub mod anchor;
pub mod buffer;
pub mod forward;
pub mod packet;
pub mod route;

pub use anchor::{Anchor, AnchorMigration, AnchorTable, SessionAnchor, UnknownSession};
pub use buffer::{Admission, DtnBuffer};
pub use forward::{forward_packet, ForwardContext, ForwardDecision};
pub use packet::{DropReason, PktId, UserPacket};
pub use route::{
    discover_route, DiscoveryParams, FloodAction, FloodState, NoRoute, Route, RouteCache, RouteDst, RouteReply,
    RouteRequest,
};
