use serde::Serialize;

use super::packet::{DropReason, UserPacket};
use super::route::Route;
use crate::ids::NodeId;
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardDecision {
    DeliverToCore,
    Relay(NodeId),
    Buffered,
    Dropped(DropReason),
}

/// What a node knows when it decides where a packet goes.
#[derive(Clone, Copy, Debug)]
pub struct ForwardContext<'a> {
    pub me: &'a NodeId,
    pub has_core_access: bool,
    pub cached_route: Option<&'a Route>,
    /// False when earlier packets are still queued or the flow window is full.
    pub may_send: bool,
}

/// Decide the next step for `pkt` at `ctx.me`.
pub fn forward_packet(pkt: &UserPacket, ctx: ForwardContext<'_>, now: SimTime) -> ForwardDecision {
    if pkt.is_expired(now) {
        return ForwardDecision::Dropped(DropReason::TtlExpired);
    }
    let next = if ctx.has_core_access {
        Some(ForwardDecision::DeliverToCore)
    } else {
        pkt.next_on_source_route(ctx.me)
            .or_else(|| ctx.cached_route.and_then(|r| r.next_hop(ctx.me)))
            .map(|n| ForwardDecision::Relay(n.clone()))
    };
    match next {
        Some(d) if ctx.may_send => d,
        _ => ForwardDecision::Buffered,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::n3::packet::PktId;
    use crate::n3::route::RouteDst;

    fn pkt() -> UserPacket {
        UserPacket::new(PktId(1), "s".into(), 100, SimTime::ZERO, SimTime::from_secs(30), "A".into())
    }

    #[test]
    fn decisions() {
        let me: NodeId = "A".into();
        let route = Route { dst: RouteDst::Core, path: vec!["A".into(), "B".into()], seq: 1, established: SimTime::ZERO };
        let ctx = ForwardContext { me: &me, has_core_access: true, cached_route: None, may_send: true };
        assert_eq!(forward_packet(&pkt(), ctx, SimTime(1)), ForwardDecision::DeliverToCore);

        let ctx = ForwardContext { has_core_access: false, cached_route: Some(&route), ..ctx };
        assert_eq!(forward_packet(&pkt(), ctx, SimTime(1)), ForwardDecision::Relay("B".into()));

        let ctx = ForwardContext { cached_route: None, ..ctx };
        assert_eq!(forward_packet(&pkt(), ctx, SimTime(1)), ForwardDecision::Buffered);

        assert_eq!(
            forward_packet(&pkt(), ctx, SimTime::from_secs(30)),
            ForwardDecision::Dropped(DropReason::TtlExpired)
        );
    }

    #[test]
    fn source_route_wins_at_intermediate() {
        let me: NodeId = "B".into();
        let mut p = pkt();
        p.source_route = Some(vec!["A".into(), "B".into(), "C".into()]);
        let ctx = ForwardContext { me: &me, has_core_access: false, cached_route: None, may_send: true };
        assert_eq!(forward_packet(&p, ctx, SimTime(1)), ForwardDecision::Relay("C".into()));
        let ctx = ForwardContext { may_send: false, ..ctx };
        assert_eq!(forward_packet(&p, ctx, SimTime(1)), ForwardDecision::Buffered);
    }
}
