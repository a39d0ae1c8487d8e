//! Probabilistic routing on delivery predictabilities.
//!
//! Every node keeps a predictability `P(d)` per destination. It is raised
//! when nodes meet, decays with time, and is propagated transitively
//! through the nodes met. A copy is handed to a peer only when the peer's
//! predictability for the destination is strictly higher.

use std::collections::BTreeMap;

use crate::link::NodeId;

use super::{Message, MessageId};

#[derive(Debug, Clone, PartialEq)]
pub struct ProphetParams {
    pub p_init: f64,
    /// Multiplier for transitive updates (`prophet.beta`).
    pub transitivity_scale: f64,
    /// Per-time-unit decay base (`prophet.gamma`).
    pub aging_base: f64,
    pub seconds_in_time_unit: f64,
    /// Scale the encounter increment by the inter-meeting interval.
    pub v2_encounter_scaling: bool,
    /// Inter-meeting interval at or above which the full `p_init` applies.
    pub typical_interval: f64,
}

impl Default for ProphetParams {
    fn default() -> Self {
        ProphetParams {
            p_init: 0.75,
            transitivity_scale: 0.25,
            aging_base: 0.98,
            seconds_in_time_unit: 30.0,
            v2_encounter_scaling: false,
            typical_interval: 1800.0,
        }
    }
}

pub fn encounter_update(p_ab: f64, p_init: f64) -> f64 {
    p_ab + (1.0 - p_ab) * p_init
}

pub fn age(p: f64, elapsed: f64, aging_base: f64, seconds_in_time_unit: f64) -> f64 {
    p * aging_base.powf(elapsed / seconds_in_time_unit)
}

pub fn transitive_update(p_ac: f64, p_ab: f64, p_bc: f64, scale: f64) -> f64 {
    p_ac + (1.0 - p_ac) * p_ab * p_bc * scale
}

/// Per-node predictability table. Values are stored as of `last_aged` and
/// aged on read, so comparisons between tables at the same instant are
/// consistent regardless of when each was last written.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryPredictabilityTable {
    preds: BTreeMap<NodeId, f64>,
    last_aged: f64,
    last_met: BTreeMap<NodeId, f64>,
    params: ProphetParams,
}

impl DeliveryPredictabilityTable {
    pub fn new(params: ProphetParams) -> Self {
        DeliveryPredictabilityTable { preds: BTreeMap::new(), last_aged: 0.0, last_met: BTreeMap::new(), params }
    }

    pub fn params(&self) -> &ProphetParams {
        &self.params
    }

    pub fn last_aged(&self) -> f64 {
        self.last_aged
    }

    /// Predictability for `dest` aged to `now`; missing entries are 0.
    pub fn get(&self, dest: NodeId, now: f64) -> f64 {
        let p = self.preds.get(&dest).copied().unwrap_or(0.0);
        age(p, (now - self.last_aged).max(0.0), self.params.aging_base, self.params.seconds_in_time_unit)
    }

    pub fn age_to(&mut self, now: f64) {
        let elapsed = now - self.last_aged;
        if elapsed <= 0.0 {
            return;
        }
        let factor = self.params.aging_base.powf(elapsed / self.params.seconds_in_time_unit);
        for p in self.preds.values_mut() {
            *p *= factor;
        }
        self.last_aged = now;
    }

    /// Direct encounter with `peer` at `now`.
    pub fn encounter(&mut self, peer: NodeId, now: f64) {
        self.age_to(now);
        let mut p_init = self.params.p_init;
        if self.params.v2_encounter_scaling {
            if let Some(&prev) = self.last_met.get(&peer) {
                let interval = now - prev;
                p_init *= (interval / self.params.typical_interval).min(1.0);
            }
        }
        self.last_met.insert(peer, now);
        let p = self.preds.entry(peer).or_insert(0.0);
        *p = encounter_update(*p, p_init);
    }

    /// Transitive update through `peer`, whose (already aged) table is `peer_table`.
    pub fn transitive(&mut self, me: NodeId, peer: NodeId, peer_table: &DeliveryPredictabilityTable, now: f64) {
        self.age_to(now);
        let p_ab = self.get(peer, now);
        if p_ab == 0.0 {
            return;
        }
        for &c in peer_table.preds.keys() {
            if c == me || c == peer {
                continue;
            }
            let p_bc = peer_table.get(c, now);
            let p = self.preds.entry(c).or_insert(0.0);
            *p = transitive_update(*p, p_ab, p_bc, self.params.transitivity_scale);
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.preds.iter().map(|(&k, &v)| (k, v))
    }
}

/// Contact-start update for two PRoPHET nodes: both record the encounter,
/// then both apply transitivity from the other's post-encounter table.
pub fn exchange(
    a: NodeId,
    ta: &mut DeliveryPredictabilityTable,
    b: NodeId,
    tb: &mut DeliveryPredictabilityTable,
    now: f64,
) {
    ta.encounter(b, now);
    tb.encounter(a, now);
    let snap_a = ta.clone();
    let snap_b = tb.clone();
    ta.transitive(a, b, &snap_b, now);
    tb.transitive(b, a, &snap_a, now);
}

/// Messages to replicate to `peer`, best first: those addressed to the
/// peer, then those where the peer's predictability is strictly higher,
/// by descending peer predictability and then creation time.
pub fn forward_filter<'a>(
    own: &DeliveryPredictabilityTable,
    peer_table: &DeliveryPredictabilityTable,
    peer: NodeId,
    messages: impl IntoIterator<Item = &'a Message>,
    now: f64,
) -> Vec<MessageId> {
    let mut picked: Vec<(f64, &Message)> = messages
        .into_iter()
        .filter_map(|m| {
            if m.destination == peer {
                return Some((f64::INFINITY, m));
            }
            let theirs = peer_table.get(m.destination, now);
            (theirs > own.get(m.destination, now)).then_some((theirs, m))
        })
        .collect();
    picked.sort_by(|(pa, ma), (pb, mb)| {
        pb.total_cmp(pa).then(ma.created_at.total_cmp(&mb.created_at)).then(ma.id.cmp(&mb.id))
    });
    picked.into_iter().map(|(_, m)| m.id).collect()
}
