//! Range-based contact detection and the transfer timing model.

use std::collections::BTreeSet;
use std::fmt;

use crate::map::Point;
use crate::routing::MessageId;

pub type NodeId = usize;

/// An unordered node pair, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePair(NodeId, NodeId);

impl NodePair {
    pub fn new(a: NodeId, b: NodeId) -> NodePair {
        assert_ne!(a, b, "a node cannot pair with itself");
        if a < b {
            NodePair(a, b)
        } else {
            NodePair(b, a)
        }
    }

    pub fn low(&self) -> NodeId {
        self.0
    }

    pub fn high(&self) -> NodeId {
        self.1
    }

    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.0 {
            self.1
        } else {
            self.0
        }
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.0 == n || self.1 == n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ContactKind {
    Up,
    Down,
}

impl fmt::Display for ContactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContactKind::Up => "up",
            ContactKind::Down => "down",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEvent {
    pub pair: NodePair,
    pub kind: ContactKind,
    pub time: f64,
}

/// Radio parameters shared by every node.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    /// Meters; nodes at exactly this distance are in contact.
    pub range: f64,
    /// Bytes per second until `speed_switch_time`.
    pub speed_bps: f64,
    /// Bytes per second after `speed_switch_time`.
    pub speed_after_bps: f64,
    pub speed_switch_time: f64,
    /// Fixed per-transfer latency in seconds.
    pub latency: f64,
    pub single_transfer_per_node: bool,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            range: 3.0,
            speed_bps: 500_000.0,
            speed_after_bps: 1_000_000.0,
            speed_switch_time: 10_000.0,
            latency: 0.2,
            single_transfer_per_node: false,
        }
    }
}

impl LinkParams {
    /// Link rate at simulation time `t`. The switch is strict: the rate at
    /// exactly `speed_switch_time` is still the initial one.
    pub fn speed_at(&self, t: f64) -> f64 {
        if t > self.speed_switch_time {
            self.speed_after_bps
        } else {
            self.speed_bps
        }
    }

    /// Time a transfer of `size` bytes started at `t` occupies the link.
    pub fn transfer_duration(&self, size: u64, t: f64) -> f64 {
        self.latency + size as f64 / self.speed_at(t)
    }
}

/// Link rate under the default parameters.
pub fn link_speed(t: f64) -> f64 {
    LinkParams::default().speed_at(t)
}

/// Tracks which pairs are in range and reports changes.
#[derive(Debug, Clone)]
pub struct ContactDetector {
    range: f64,
    up: BTreeSet<NodePair>,
    order: Vec<usize>,
}

impl ContactDetector {
    pub fn new(range: f64) -> Self {
        ContactDetector { range, up: BTreeSet::new(), order: Vec::new() }
    }

    pub fn is_up(&self, pair: NodePair) -> bool {
        self.up.contains(&pair)
    }

    pub fn up_pairs(&self) -> impl Iterator<Item = NodePair> + '_ {
        self.up.iter().copied()
    }

    /// All pairs currently within range. Sweeps along x so only nearby
    /// candidates are distance-checked.
    pub fn pairs_in_range(&mut self, positions: &[Point]) -> BTreeSet<NodePair> {
        if self.order.len() != positions.len() {
            self.order.clear();
            self.order.extend(0..positions.len());
        }
        // nodes move little per tick, so last tick's order is nearly sorted
        // and the adaptive stable sort runs in close to linear time
        self.order.sort_by(|&i, &j| positions[i].x.total_cmp(&positions[j].x).then(i.cmp(&j)));
        let mut found = BTreeSet::new();
        for (k, &i) in self.order.iter().enumerate() {
            let pi = positions[i];
            for &j in &self.order[k + 1..] {
                let pj = positions[j];
                if pj.x - pi.x > self.range {
                    break;
                }
                if pi.distance(&pj) <= self.range {
                    found.insert(NodePair::new(i, j));
                }
            }
        }
        found
    }

    /// Down events for pairs that left range, then up events for pairs
    /// that entered it, each in pair order.
    pub fn detect(&mut self, positions: &[Point], time: f64) -> Vec<ContactEvent> {
        let now = self.pairs_in_range(positions);
        let mut events: Vec<ContactEvent> =
            self.up.difference(&now).map(|&pair| ContactEvent { pair, kind: ContactKind::Down, time }).collect();
        events.extend(now.difference(&self.up).map(|&pair| ContactEvent { pair, kind: ContactKind::Up, time }));
        self.up = now;
        events
    }

    /// Applies externally supplied events (trace replay).
    pub fn apply(&mut self, event: &ContactEvent) {
        match event.kind {
            ContactKind::Up => self.up.insert(event.pair),
            ContactKind::Down => self.up.remove(&event.pair),
        };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Metadata exchange at contact start: zero bytes, one latency.
    Control,
    Data {
        message: MessageId,
        size: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferJob {
    pub payload: Payload,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub start: f64,
    pub finish: f64,
    pub aborted: bool,
}

impl TransferJob {
    pub fn data(
        message: MessageId,
        size: u64,
        sender: NodeId,
        receiver: NodeId,
        start: f64,
        link: &LinkParams,
    ) -> Self {
        TransferJob {
            payload: Payload::Data { message, size },
            sender,
            receiver,
            start,
            finish: start + link.transfer_duration(size, start),
            aborted: false,
        }
    }

    pub fn control(pair: NodePair, start: f64, link: &LinkParams) -> Self {
        TransferJob {
            payload: Payload::Control,
            sender: pair.low(),
            receiver: pair.high(),
            start,
            finish: start + link.latency,
            aborted: false,
        }
    }

    pub fn size(&self) -> u64 {
        match self.payload {
            Payload::Control => 0,
            Payload::Data { size, .. } => size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_steps_after_switch_time() {
        assert_eq!(link_speed(0.0), 500_000.0);
        assert_eq!(link_speed(10_000.0), 500_000.0);
        assert_eq!(link_speed(10_001.0), 1_000_000.0);
    }

    #[test]
    fn durations_follow_latency_plus_serialisation() {
        let l = LinkParams::default();
        assert!((l.transfer_duration(1_000_000, 0.0) - 2.2).abs() < 1e-12);
        assert!((l.transfer_duration(0, 0.0) - 0.2).abs() < 1e-12);
        assert!((l.transfer_duration(3_000_000, 20_000.0) - 3.2).abs() < 1e-12);
        let job = TransferJob::data(MessageId(1), 1_000_000, 0, 1, 5.0, &l);
        assert!((job.finish - job.start - 2.2).abs() < 1e-12);
    }

    #[test]
    fn threshold_is_closed() {
        let mut d = ContactDetector::new(3.0);
        let ev = d.detect(&[Point::new(0.0, 0.0), Point::new(2.9, 0.0)], 1.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, ContactKind::Up);

        let mut d = ContactDetector::new(3.0);
        let ev = d.detect(&[Point::new(0.0, 0.0), Point::new(3.0, 0.0)], 1.0);
        assert_eq!(ev.len(), 1);

        let mut d = ContactDetector::new(3.0);
        let ev = d.detect(&[Point::new(0.0, 0.0), Point::new(3.0 + 1e-9, 0.0)], 1.0);
        assert!(ev.is_empty());
    }

    #[test]
    fn lone_node_has_no_contact() {
        let mut d = ContactDetector::new(3.0);
        assert!(d.detect(&[Point::new(1.0, 1.0)], 0.0).is_empty());
    }

    #[test]
    fn up_then_down_alternate() {
        let mut d = ContactDetector::new(3.0);
        let near = [Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
        let far = [Point::new(0.0, 0.0), Point::new(10.0, 0.0)];
        assert_eq!(d.detect(&near, 0.1)[0].kind, ContactKind::Up);
        assert!(d.detect(&near, 0.2).is_empty());
        let ev = d.detect(&far, 0.3);
        assert_eq!(ev[0].kind, ContactKind::Down);
        assert_eq!(ev[0].pair, NodePair::new(1, 0));
    }

    #[test]
    fn sweep_matches_all_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point> =
            (0..200).map(|_| Point::new(rng.gen_range(0.0..60.0), rng.gen_range(0.0..60.0))).collect();
        let mut brute = BTreeSet::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if pts[i].distance(&pts[j]) <= 3.0 {
                    brute.insert(NodePair::new(i, j));
                }
            }
        }
        let mut d = ContactDetector::new(3.0);
        assert_eq!(d.pairs_in_range(&pts), brute);
        assert!(!brute.is_empty());
    }
}
