//! Ranked flooding with meeting likelihoods and delivery acknowledgements.
//!
//! Nodes keep a normalised vector of how often they meet each peer and
//! cache the vectors of other nodes learned during contacts. The cost of
//! reaching a destination is the cheapest path over that graph, with a hop
//! from `u` to `v` costing `1 - f_u(v)`. Buffers are ranked with young
//! (low hop count) messages first and the rest by cost.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::Arc;

use crate::link::NodeId;

use super::{Message, MessageId};

/// Normalised meeting frequencies of one node; entries sum to 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeetingProbabilityVector {
    f: BTreeMap<NodeId, f64>,
}

impl MeetingProbabilityVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (NodeId, f64)>) -> Self {
        MeetingProbabilityVector { f: entries.into_iter().collect() }
    }

    pub fn get(&self, peer: NodeId) -> f64 {
        self.f.get(&peer).copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.f.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.f.iter().map(|(&k, &v)| (k, v))
    }

    /// Adds one to the met peer's entry and renormalises.
    pub fn meet(&mut self, peer: NodeId) {
        *self.f.entry(peer).or_insert(0.0) += 1.0;
        let total: f64 = self.f.values().sum();
        for v in self.f.values_mut() {
            *v /= total;
        }
    }
}

/// A vector learned from another node, stamped with when its owner last updated it.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownVector {
    pub vector: Arc<MeetingProbabilityVector>,
    pub updated_at: f64,
}

/// Cheapest cost from `me` to every reachable node. `own` is `me`'s vector,
/// `known` holds cached vectors of other nodes. Unreachable nodes are absent.
pub fn path_costs(
    me: NodeId,
    own: &MeetingProbabilityVector,
    known: &BTreeMap<NodeId, KnownVector>,
) -> BTreeMap<NodeId, f64> {
    dense_path_costs(me, own, known).into_iter().enumerate().filter(|&(v, d)| v != me && d.is_finite()).collect()
}

/// [`path_costs`] indexed by node id, `f64::INFINITY` when unreachable.
fn dense_path_costs(me: NodeId, own: &MeetingProbabilityVector, known: &BTreeMap<NodeId, KnownVector>) -> Vec<f64> {
    #[derive(PartialEq)]
    struct Entry(f64, NodeId);
    impl Eq for Entry {}
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut n = me + 1;
    for (id, kv) in known {
        n = n.max(id + 1);
        n = n.max(kv.vector.f.keys().next_back().map_or(0, |k| k + 1));
    }
    n = n.max(own.f.keys().next_back().map_or(0, |k| k + 1));
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[me] = 0.0;
    heap.push(Entry(0.0, me));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        let vector = if u == me { Some(own) } else { known.get(&u).map(|k| k.vector.as_ref()) };
        let Some(vector) = vector else { continue };
        for (v, f) in vector.entries() {
            let nd = d + (1.0 - f);
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    dist
}

/// Hop-count threshold: how many messages of the mean buffered size fit
/// in an average contact (capped at the buffer capacity).
pub fn threshold(avg_bytes_per_contact: f64, capacity: u64, mean_message_size: f64) -> u32 {
    if mean_message_size <= 0.0 {
        return 0;
    }
    (avg_bytes_per_contact.min(capacity as f64) / mean_message_size).floor() as u32
}

/// What ranking needs to know about a buffered message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEntry {
    pub id: MessageId,
    pub hop_count: u32,
    pub cost: f64,
    pub created_at: f64,
}

/// Best first: hop count below `threshold` by (hops, cost), then the rest by cost.
pub fn rank(entries: &[RankEntry], threshold: u32) -> Vec<MessageId> {
    let tie = |a: &RankEntry, b: &RankEntry| a.created_at.total_cmp(&b.created_at).then(a.id.cmp(&b.id));
    let (mut head, mut tail): (Vec<RankEntry>, Vec<RankEntry>) = entries.iter().partition(|e| e.hop_count < threshold);
    head.sort_by(|a, b| a.hop_count.cmp(&b.hop_count).then(a.cost.total_cmp(&b.cost)).then_with(|| tie(a, b)));
    tail.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| tie(a, b)));
    head.into_iter().chain(tail).map(|e| e.id).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunningMean {
    pub count: u64,
    pub mean: f64,
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.mean += (x - self.mean) / self.count as f64;
    }
}

/// Per-node MaxProp state.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPropState {
    pub me: NodeId,
    pub vector: MeetingProbabilityVector,
    pub vector_updated_at: f64,
    pub known: BTreeMap<NodeId, KnownVector>,
    /// Delivered message ids with the time the acknowledgement lapses.
    pub acks: BTreeMap<MessageId, Option<f64>>,
    pub bytes_per_contact: RunningMean,
    costs: Option<Vec<f64>>,
}

impl MaxPropState {
    pub fn new(me: NodeId) -> Self {
        MaxPropState {
            me,
            vector: MeetingProbabilityVector::new(),
            vector_updated_at: 0.0,
            known: BTreeMap::new(),
            acks: BTreeMap::new(),
            bytes_per_contact: RunningMean::default(),
            costs: None,
        }
    }

    pub fn is_acked(&self, id: MessageId) -> bool {
        self.acks.contains_key(&id)
    }

    pub fn ack(&mut self, id: MessageId, expires_at: Option<f64>) {
        self.acks.insert(id, expires_at);
    }

    pub fn expire_acks(&mut self, now: f64) {
        self.acks.retain(|_, exp| exp.is_none_or(|e| e > now));
    }

    /// Cost of reaching `dest`; `f64::INFINITY` when nobody known has met it.
    pub fn cost_to(&mut self, dest: NodeId) -> f64 {
        if self.costs.is_none() {
            self.costs = Some(dense_path_costs(self.me, &self.vector, &self.known));
        }
        if dest == self.me {
            return 0.0;
        }
        self.costs.as_ref().and_then(|c| c.get(dest).copied()).unwrap_or(f64::INFINITY)
    }

    fn invalidate(&mut self) {
        self.costs = None;
    }

    /// Ranked ids of `messages` (best first).
    pub fn rank_messages<'a>(
        &mut self,
        messages: impl IntoIterator<Item = &'a Message>,
        capacity: u64,
    ) -> Vec<MessageId> {
        let msgs: Vec<&Message> = messages.into_iter().collect();
        let entries: Vec<RankEntry> = msgs
            .iter()
            .map(|m| RankEntry {
                id: m.id,
                hop_count: m.hop_count,
                cost: self.cost_to(m.destination),
                created_at: m.created_at,
            })
            .collect();
        let mean_size =
            if msgs.is_empty() { 0.0 } else { msgs.iter().map(|m| m.size as f64).sum::<f64>() / msgs.len() as f64 };
        rank(&entries, threshold(self.bytes_per_contact.mean, capacity, mean_size))
    }
}

/// Contact-start exchange between two MaxProp nodes: both count the
/// meeting, swap their own vectors and newer cached ones, and merge acks.
/// Returns the merged ack set.
pub fn exchange(a: &mut MaxPropState, b: &mut MaxPropState, now: f64) -> BTreeSet<MessageId> {
    a.vector.meet(b.me);
    a.vector_updated_at = now;
    b.vector.meet(a.me);
    b.vector_updated_at = now;

    let to_a = newer_entries(a, b, now);
    let to_b = newer_entries(b, a, now);
    a.known.extend(to_a);
    b.known.extend(to_b);

    let merged: BTreeMap<MessageId, Option<f64>> = a.acks.iter().chain(b.acks.iter()).map(|(&k, &v)| (k, v)).collect();
    a.acks = merged.clone();
    b.acks = merged;
    a.invalidate();
    b.invalidate();
    a.acks.keys().copied().collect()
}

/// Vectors `peer` can teach `state`: the peer's own, plus cached ones
/// fresher than what `state` holds.
fn newer_entries(state: &MaxPropState, peer: &MaxPropState, now: f64) -> Vec<(NodeId, KnownVector)> {
    let mut out = vec![(peer.me, KnownVector { vector: Arc::new(peer.vector.clone()), updated_at: now })];
    for (&node, kv) in &peer.known {
        if node == state.me || node == peer.me {
            continue;
        }
        if state.known.get(&node).is_none_or(|mine| kv.updated_at > mine.updated_at) {
            out.push((node, kv.clone()));
        }
    }
    out
}
