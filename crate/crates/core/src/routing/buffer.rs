use std::collections::{BTreeMap, BTreeSet};

use super::{Message, MessageId};

#[derive(Debug, Clone, PartialEq)]
pub struct StoredMessage {
    pub message: Message,
    pub received_at: f64,
}

/// Outcome of offering a message to a buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Admission {
    /// Accepted after evicting these messages, in eviction order.
    Accept {
        evicted: Vec<MessageId>,
    },
    Reject,
}

/// Bounded message store of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Buffer {
    capacity: u64,
    occupancy: u64,
    messages: BTreeMap<MessageId, StoredMessage>,
}

impl Buffer {
    pub fn new(capacity: u64) -> Buffer {
        Buffer { capacity, occupancy: 0, messages: BTreeMap::new() }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn free(&self) -> u64 {
        self.capacity - self.occupancy
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn contains(&self, id: MessageId) -> bool {
        self.messages.contains_key(&id)
    }

    pub fn get(&self, id: MessageId) -> Option<&StoredMessage> {
        self.messages.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoredMessage> {
        self.messages.values()
    }

    pub fn ids(&self) -> BTreeSet<MessageId> {
        self.messages.keys().copied().collect()
    }

    /// Decides admission without changing the buffer. `eviction_order`
    /// lists resident messages from first to last victim; ids in
    /// `protected` are never evicted.
    pub fn plan_admission(
        &self,
        msg: &Message,
        eviction_order: &[MessageId],
        protected: &BTreeSet<MessageId>,
    ) -> Admission {
        if msg.size > self.capacity || self.contains(msg.id) {
            return Admission::Reject;
        }
        let mut free = self.free();
        let mut evicted = Vec::new();
        for &id in eviction_order {
            if free >= msg.size {
                break;
            }
            if protected.contains(&id) {
                continue;
            }
            if let Some(s) = self.messages.get(&id) {
                free += s.message.size;
                evicted.push(id);
            }
        }
        if free >= msg.size {
            Admission::Accept { evicted }
        } else {
            Admission::Reject
        }
    }

    /// Evicts according to `plan_admission` and stores `msg` if accepted.
    pub fn admit(
        &mut self,
        msg: Message,
        received_at: f64,
        eviction_order: &[MessageId],
        protected: &BTreeSet<MessageId>,
    ) -> Admission {
        let plan = self.plan_admission(&msg, eviction_order, protected);
        if let Admission::Accept { evicted } = &plan {
            for &id in evicted {
                self.remove(id);
            }
            self.insert(msg, received_at);
        }
        plan
    }

    /// Frees room for `size` bytes without storing anything. Returns the
    /// evicted ids, or `None` (buffer untouched) if room cannot be made.
    pub fn make_room(
        &mut self,
        size: u64,
        eviction_order: &[MessageId],
        protected: &BTreeSet<MessageId>,
    ) -> Option<Vec<MessageId>> {
        if size > self.capacity {
            return None;
        }
        let mut free = self.free();
        let mut victims = Vec::new();
        for &id in eviction_order {
            if free >= size {
                break;
            }
            if protected.contains(&id) {
                continue;
            }
            if let Some(s) = self.messages.get(&id) {
                free += s.message.size;
                victims.push(id);
            }
        }
        if free < size {
            return None;
        }
        for &id in &victims {
            self.remove(id);
        }
        Some(victims)
    }

    fn insert(&mut self, msg: Message, received_at: f64) {
        self.occupancy += msg.size;
        assert!(self.occupancy <= self.capacity, "buffer overflow");
        self.messages.insert(msg.id, StoredMessage { message: msg, received_at });
    }

    pub fn remove(&mut self, id: MessageId) -> Option<Message> {
        let s = self.messages.remove(&id)?;
        self.occupancy -= s.message.size;
        Some(s.message)
    }

    /// Resident ids ordered oldest-received first (ties by id).
    pub fn oldest_received_first(&self) -> Vec<MessageId> {
        let mut v: Vec<&StoredMessage> = self.messages.values().collect();
        v.sort_by(|a, b| a.received_at.total_cmp(&b.received_at).then(a.message.id.cmp(&b.message.id)));
        v.into_iter().map(|s| s.message.id).collect()
    }

    /// Consistency check used by the engine's runtime assertions.
    pub fn check(&self) -> Result<(), String> {
        let sum: u64 = self.messages.values().map(|s| s.message.size).sum();
        if sum != self.occupancy {
            return Err(format!("occupancy {} does not match resident sizes {}", self.occupancy, sum));
        }
        if self.occupancy > self.capacity {
            return Err(format!("occupancy {} exceeds capacity {}", self.occupancy, self.capacity));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MB: u64 = 1 << 20;

    fn msg(id: u64, size: u64) -> Message {
        Message::new(MessageId(id), 0, 1, size, 0.0, None).unwrap()
    }

    #[test]
    fn evicts_oldest_received_until_it_fits() {
        let mut b = Buffer::new(8 * MB);
        // 7 MB resident as seven 1 MB messages received at t = 1..7
        for i in 1..=7 {
            assert_eq!(b.admit(msg(i, MB), i as f64, &[], &BTreeSet::new()), Admission::Accept { evicted: vec![] });
        }
        let order = b.oldest_received_first();
        let r = b.admit(msg(100, 2 * MB), 10.0, &order, &BTreeSet::new());
        assert_eq!(r, Admission::Accept { evicted: vec![MessageId(1)] });
        assert_eq!(b.occupancy(), 8 * MB);
        assert!(b.free() == 0 && b.check().is_ok());
    }

    #[test]
    fn empty_buffer_accepts_three_mb() {
        let mut b = Buffer::new(8 * MB);
        assert_eq!(b.admit(msg(1, 3 * MB), 0.0, &[], &BTreeSet::new()), Admission::Accept { evicted: vec![] });
    }

    #[test]
    fn oversize_rejected_without_eviction() {
        let mut b = Buffer::new(8 * MB);
        b.admit(msg(1, MB), 0.0, &[], &BTreeSet::new());
        let order = b.oldest_received_first();
        assert_eq!(b.admit(msg(2, 9 * MB), 1.0, &order, &BTreeSet::new()), Admission::Reject);
        assert!(b.contains(MessageId(1)));
    }

    #[test]
    fn protected_messages_survive() {
        let mut b = Buffer::new(2 * MB);
        b.admit(msg(1, MB), 0.0, &[], &BTreeSet::new());
        b.admit(msg(2, MB), 1.0, &[], &BTreeSet::new());
        let protected: BTreeSet<_> = [MessageId(1), MessageId(2)].into();
        let order = b.oldest_received_first();
        assert_eq!(b.admit(msg(3, MB), 2.0, &order, &protected), Admission::Reject);
        assert_eq!(b.len(), 2);
        let protected: BTreeSet<_> = [MessageId(1)].into();
        assert_eq!(b.admit(msg(3, MB), 2.0, &order, &protected), Admission::Accept { evicted: vec![MessageId(2)] });
    }

    #[test]
    fn duplicates_rejected() {
        let mut b = Buffer::new(8 * MB);
        b.admit(msg(1, MB), 0.0, &[], &BTreeSet::new());
        assert_eq!(b.admit(msg(1, MB), 1.0, &[], &BTreeSet::new()), Admission::Reject);
        assert_eq!(b.occupancy(), MB);
    }

    #[test]
    fn make_room_is_all_or_nothing() {
        let mut b = Buffer::new(3 * MB);
        b.admit(msg(1, MB), 0.0, &[], &BTreeSet::new());
        b.admit(msg(2, MB), 1.0, &[], &BTreeSet::new());
        let order = b.oldest_received_first();
        assert_eq!(b.make_room(4 * MB, &order, &BTreeSet::new()), None);
        assert_eq!(b.len(), 2);
        assert_eq!(b.make_room(2 * MB, &order, &BTreeSet::new()), Some(vec![MessageId(1)]));
        assert_eq!(b.free(), 2 * MB);
    }
}
