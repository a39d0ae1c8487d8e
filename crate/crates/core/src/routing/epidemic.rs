//! Anti-entropy flooding: every message the peer has not seen is copied.

use std::collections::BTreeSet;

use super::{Message, MessageId};

/// Ids of `own` messages absent from `peer_summary`, oldest creation first.
pub fn exchange<'a>(own: impl IntoIterator<Item = &'a Message>, peer_summary: &BTreeSet<MessageId>) -> Vec<MessageId> {
    let mut unseen: Vec<&Message> = own.into_iter().filter(|m| !peer_summary.contains(&m.id)).collect();
    unseen.sort_by(|a, b| a.created_at.total_cmp(&b.created_at).then(a.id.cmp(&b.id)));
    unseen.into_iter().map(|m| m.id).collect()
}
