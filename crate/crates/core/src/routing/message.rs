use std::fmt;
use std::str::FromStr;

use crate::link::NodeId;

use super::RoutingError;

/// Message identity, rendered as `M<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageId(pub u64);

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

impl FromStr for MessageId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('M')
            .and_then(|n| n.parse().ok())
            .map(MessageId)
            .ok_or_else(|| format!("invalid message id `{s}`"))
    }
}

/// One copy of a file travelling through the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub id: MessageId,
    pub source: NodeId,
    pub destination: NodeId,
    /// Bytes, at least 1.
    pub size: u64,
    pub created_at: f64,
    /// Relay transfers this copy has been through.
    pub hop_count: u32,
    /// Lifetime in seconds; `None` never expires.
    pub ttl: Option<f64>,
}

impl Message {
    pub fn new(
        id: MessageId,
        source: NodeId,
        destination: NodeId,
        size: u64,
        created_at: f64,
        ttl: Option<f64>,
    ) -> Result<Message, RoutingError> {
        if size == 0 {
            return Err(RoutingError::EmptyMessage(id));
        }
        if source == destination {
            return Err(RoutingError::SelfAddressed(id));
        }
        Ok(Message { id, source, destination, size, created_at, hop_count: 0, ttl })
    }

    pub fn expires_at(&self) -> Option<f64> {
        self.ttl.map(|ttl| self.created_at + ttl)
    }

    pub fn is_expired(&self, now: f64) -> bool {
        self.expires_at().is_some_and(|e| e <= now)
    }

    /// The copy a receiver stores after one more relay.
    pub fn relayed(&self) -> Message {
        Message { hop_count: self.hop_count + 1, ..self.clone() }
    }
}
