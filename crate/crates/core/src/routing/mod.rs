//! Routing protocols and the hooks the engine drives them through.
//!
//! The engine calls [`contact_up`] when a link comes up (metadata
//! exchange), [`forward_order`] whenever a link is idle, [`eviction_order`]
//! when a buffer must make room, and [`on_delivered`] / [`contact_down`]
//! as transfers and contacts end.

pub mod buffer;
pub mod epidemic;
pub mod maxprop;
mod message;
pub mod prophet;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use buffer::{Admission, Buffer, StoredMessage};
pub use maxprop::{MaxPropState, MeetingProbabilityVector};
pub use message::{Message, MessageId};
pub use prophet::{DeliveryPredictabilityTable, ProphetParams};

use crate::link::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("message {0} has zero size")]
    EmptyMessage(MessageId),
    #[error("message {0} has the same source and destination")]
    SelfAddressed(MessageId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RouterKind {
    Epidemic,
    MaxProp,
    Prophet,
}

impl RouterKind {
    pub const ALL: [RouterKind; 3] = [RouterKind::Epidemic, RouterKind::MaxProp, RouterKind::Prophet];

    pub fn as_str(&self) -> &'static str {
        match self {
            RouterKind::Epidemic => "epidemic",
            RouterKind::MaxProp => "maxprop",
            RouterKind::Prophet => "prophet",
        }
    }
}

impl fmt::Display for RouterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RouterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epidemic" => Ok(RouterKind::Epidemic),
            "maxprop" => Ok(RouterKind::MaxProp),
            "prophet" => Ok(RouterKind::Prophet),
            _ => Err(format!("unknown router `{s}` (expected epidemic, maxprop or prophet)")),
        }
    }
}

/// Protocol state of one node.
#[derive(Debug, Clone, PartialEq)]
pub enum Router {
    Epidemic,
    MaxProp(MaxPropState),
    Prophet(DeliveryPredictabilityTable),
}

impl Router {
    pub fn new(kind: RouterKind, me: NodeId, prophet: &ProphetParams) -> Router {
        match kind {
            RouterKind::Epidemic => Router::Epidemic,
            RouterKind::MaxProp => Router::MaxProp(MaxPropState::new(me)),
            RouterKind::Prophet => Router::Prophet(DeliveryPredictabilityTable::new(prophet.clone())),
        }
    }

    pub fn kind(&self) -> RouterKind {
        match self {
            Router::Epidemic => RouterKind::Epidemic,
            Router::MaxProp(_) => RouterKind::MaxProp,
            Router::Prophet(_) => RouterKind::Prophet,
        }
    }
}

/// A node as the routing layer sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct Host {
    pub id: NodeId,
    pub buffer: Buffer,
    pub router: Router,
    /// Messages received here as their final destination.
    pub delivered: BTreeSet<MessageId>,
}

impl Host {
    pub fn new(id: NodeId, capacity: u64, router: Router) -> Host {
        Host { id, buffer: Buffer::new(capacity), router, delivered: BTreeSet::new() }
    }

    /// Whether this node already holds, consumed or acknowledged `id`.
    pub fn has_seen(&self, id: MessageId) -> bool {
        self.buffer.contains(id)
            || self.delivered.contains(&id)
            || matches!(&self.router, Router::MaxProp(s) if s.is_acked(id))
    }

    fn summary(&self) -> BTreeSet<MessageId> {
        let mut s = self.buffer.ids();
        s.extend(self.delivered.iter().copied());
        if let Router::MaxProp(m) = &self.router {
            s.extend(m.acks.keys().copied());
        }
        s
    }
}

/// Metadata exchange at contact start. Returns `(node, message)` copies
/// removed from buffers as a result (MaxProp acknowledgements).
pub fn contact_up(a: &mut Host, b: &mut Host, now: f64) -> Vec<(NodeId, MessageId)> {
    let (aid, bid) = (a.id, b.id);
    match (&mut a.router, &mut b.router) {
        (Router::Prophet(ta), Router::Prophet(tb)) => {
            prophet::exchange(aid, ta, bid, tb, now);
            Vec::new()
        }
        (Router::MaxProp(sa), Router::MaxProp(sb)) => {
            let acks = maxprop::exchange(sa, sb, now);
            let mut purged = Vec::new();
            for id in acks {
                if a.buffer.remove(id).is_some() {
                    purged.push((aid, id));
                }
                if b.buffer.remove(id).is_some() {
                    purged.push((bid, id));
                }
            }
            purged
        }
        _ => Vec::new(),
    }
}

/// Contact end; `bytes` is the payload volume completed over the contact.
pub fn contact_down(host: &mut Host, bytes: u64) {
    if let Router::MaxProp(s) = &mut host.router {
        s.bytes_per_contact.push(bytes as f64);
    }
}

/// Messages `host` should replicate to `peer`, best first. Messages the
/// peer already has are excluded and messages addressed to the peer lead.
pub fn forward_order(host: &mut Host, peer: &Host, now: f64) -> Vec<MessageId> {
    let summary = peer.summary();
    let capacity = host.buffer.capacity();
    let unseen = host.buffer.iter().map(|s| &s.message).filter(|m| !summary.contains(&m.id));
    let order = match (&mut host.router, &peer.router) {
        (Router::Prophet(own), Router::Prophet(theirs)) => prophet::forward_filter(own, theirs, peer.id, unseen, now),
        (Router::MaxProp(s), _) => s.rank_messages(unseen, capacity),
        (Router::Epidemic, _) => epidemic::exchange(unseen, &summary),
        // a PRoPHET node facing a foreign router knows nothing about the peer
        (Router::Prophet(_), _) => unseen.filter(|m| m.destination == peer.id).map(|m| m.id).collect(),
    };
    let (mut direct, rest): (Vec<MessageId>, Vec<MessageId>) =
        order.into_iter().partition(|id| host.buffer.get(*id).is_some_and(|s| s.message.destination == peer.id));
    direct.extend(rest);
    direct
}

/// Resident messages from first to last eviction victim.
pub fn eviction_order(host: &mut Host) -> Vec<MessageId> {
    let capacity = host.buffer.capacity();
    match &mut host.router {
        Router::MaxProp(s) => {
            let mut ranked = s.rank_messages(host.buffer.iter().map(|m| &m.message), capacity);
            ranked.reverse();
            ranked
        }
        Router::Epidemic | Router::Prophet(_) => host.buffer.oldest_received_first(),
    }
}

/// Whether `host` is willing to receive a relayed copy of `msg`.
pub fn accepts(host: &Host, msg: &Message) -> bool {
    !host.has_seen(msg.id) && msg.size <= host.buffer.capacity()
}

/// Bookkeeping after `msg` reached its destination `dest` from `sender`.
/// Returns copies removed from the sender as a result.
pub fn on_delivered(dest: &mut Host, sender: &mut Host, msg: &Message) -> Vec<(NodeId, MessageId)> {
    dest.delivered.insert(msg.id);
    let mut purged = Vec::new();
    if let Router::MaxProp(s) = &mut dest.router {
        s.ack(msg.id, msg.expires_at());
    }
    if let Router::MaxProp(s) = &mut sender.router {
        s.ack(msg.id, msg.expires_at());
        if sender.buffer.remove(msg.id).is_some() {
            purged.push((sender.id, msg.id));
        }
    }
    purged
}

/// Drops acknowledgements whose message lifetime has passed.
pub fn expire_state(host: &mut Host, now: f64) {
    if let Router::MaxProp(s) = &mut host.router {
        s.expire_acks(now);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(id: u64, src: NodeId, dst: NodeId, created: f64) -> Message {
        Message::new(MessageId(id), src, dst, 100, created, None).unwrap()
    }

    fn host(kind: RouterKind, id: NodeId) -> Host {
        Host::new(id, 1_000, Router::new(kind, id, &ProphetParams::default()))
    }

    fn store(h: &mut Host, m: Message, t: f64) {
        assert!(matches!(h.buffer.admit(m, t, &[], &BTreeSet::new()), Admission::Accept { .. }));
    }

    #[test]
    fn epidemic_enqueues_everything_missing() {
        let mut a = host(RouterKind::Epidemic, 0);
        let b = host(RouterKind::Epidemic, 1);
        store(&mut a, msg(1, 0, 5, 0.0), 0.0);
        store(&mut a, msg(2, 0, 6, 1.0), 1.0);
        assert_eq!(forward_order(&mut a, &b, 2.0), vec![MessageId(1), MessageId(2)]);
    }

    #[test]
    fn deliverable_messages_lead() {
        let mut a = host(RouterKind::Epidemic, 0);
        let b = host(RouterKind::Epidemic, 1);
        store(&mut a, msg(1, 0, 5, 0.0), 0.0);
        store(&mut a, msg(2, 0, 1, 1.0), 1.0);
        assert_eq!(forward_order(&mut a, &b, 2.0), vec![MessageId(2), MessageId(1)]);
    }

    #[test]
    fn prophet_forwards_to_better_peer() {
        let mut a = host(RouterKind::Prophet, 0);
        let mut b = host(RouterKind::Prophet, 1);
        let mut c = host(RouterKind::Prophet, 2);
        store(&mut a, msg(1, 0, 2, 0.0), 0.0);
        contact_up(&mut a, &mut b, 1.0);
        assert!(forward_order(&mut a, &b, 1.0).is_empty());
        contact_up(&mut b, &mut c, 2.0);
        assert_eq!(forward_order(&mut a, &b, 2.0), vec![MessageId(1)]);
    }

    #[test]
    fn maxprop_ack_purges_both_ends() {
        let mut a = host(RouterKind::MaxProp, 0);
        let mut b = host(RouterKind::MaxProp, 1);
        let m = msg(3, 0, 9, 0.0);
        store(&mut a, m.clone(), 0.0);
        store(&mut b, m.clone(), 0.0);
        if let Router::MaxProp(s) = &mut a.router {
            s.ack(MessageId(3), None);
        }
        let purged = contact_up(&mut a, &mut b, 1.0);
        assert_eq!(purged, vec![(0, MessageId(3)), (1, MessageId(3))]);
        assert!(a.buffer.is_empty() && b.buffer.is_empty());
    }

    #[test]
    fn ack_for_unknown_id_is_noop() {
        let mut a = host(RouterKind::MaxProp, 0);
        let mut b = host(RouterKind::MaxProp, 1);
        store(&mut a, msg(1, 0, 9, 0.0), 0.0);
        if let Router::MaxProp(s) = &mut b.router {
            s.ack(MessageId(77), None);
        }
        assert!(contact_up(&mut a, &mut b, 1.0).is_empty());
        assert_eq!(a.buffer.len(), 1);
    }

    #[test]
    fn delivery_records_ack_at_destination() {
        let mut dest = host(RouterKind::MaxProp, 1);
        let mut sender = host(RouterKind::MaxProp, 0);
        let m = msg(4, 0, 1, 0.0);
        store(&mut sender, m.clone(), 0.0);
        let purged = on_delivered(&mut dest, &mut sender, &m);
        assert_eq!(purged, vec![(0, MessageId(4))]);
        assert!(matches!(&dest.router, Router::MaxProp(s) if s.is_acked(MessageId(4))));
        assert!(!accepts(&dest, &m));
    }

    #[test]
    fn maxprop_evicts_worst_ranked_first() {
        let mut a = host(RouterKind::MaxProp, 0);
        let mut b = host(RouterKind::MaxProp, 1);
        contact_up(&mut a, &mut b, 0.0);
        store(&mut a, msg(1, 0, 7, 0.0), 0.0); // unknown destination: infinite cost
        store(&mut a, msg(2, 0, 1, 5.0), 5.0);
        assert_eq!(eviction_order(&mut a), vec![MessageId(1), MessageId(2)]);
    }

    #[test]
    fn router_names_parse() {
        for k in RouterKind::ALL {
            assert_eq!(k.as_str().parse::<RouterKind>().unwrap(), k);
        }
        assert!("spray".parse::<RouterKind>().is_err());
    }
}
