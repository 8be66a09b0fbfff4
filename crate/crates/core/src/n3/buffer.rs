use std::collections::VecDeque;

use super::packet::UserPacket;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    /// Admitted after evicting these packets, oldest first.
    Evicted(Vec<UserPacket>),
    RejectedOversize,
}

/// Bounded FIFO store for user traffic with drop-oldest eviction.
#[derive(Clone, Debug)]
pub struct DtnBuffer {
    capacity: u64,
    queue: VecDeque<UserPacket>,
    occupancy: u64,
}

impl DtnBuffer {
    pub fn new(capacity: u64) -> Self {
        DtnBuffer { capacity, queue: VecDeque::new(), occupancy: 0 }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &UserPacket> {
        self.queue.iter()
    }

    pub fn admit(&mut self, pkt: UserPacket) -> Admission {
        let size = pkt.size as u64;
        if size > self.capacity {
            return Admission::RejectedOversize;
        }
        let mut evicted = Vec::new();
        while self.occupancy + size > self.capacity {
            let old = self.queue.pop_front().expect("occupancy > 0 implies queued packets");
            self.occupancy -= old.size as u64;
            evicted.push(old);
        }
        self.occupancy += size;
        self.queue.push_back(pkt);
        if evicted.is_empty() {
            Admission::Admitted
        } else {
            Admission::Evicted(evicted)
        }
    }

    /// Put a packet back at the head, e.g. after a failed relay. Drop-oldest
    /// applies to the rest of the queue.
    pub fn readmit_front(&mut self, pkt: UserPacket) -> Admission {
        let size = pkt.size as u64;
        if size > self.capacity {
            return Admission::RejectedOversize;
        }
        self.occupancy += size;
        self.queue.push_front(pkt);
        let mut evicted = Vec::new();
        while self.occupancy > self.capacity {
            // evict the oldest queued behind the readmitted head
            let old = self.queue.remove(1).expect("occupancy above capacity implies a second packet");
            self.occupancy -= old.size as u64;
            evicted.push(old);
        }
        if evicted.is_empty() {
            Admission::Admitted
        } else {
            Admission::Evicted(evicted)
        }
    }

    pub fn pop_front(&mut self) -> Option<UserPacket> {
        let p = self.queue.pop_front()?;
        self.occupancy -= p.size as u64;
        Some(p)
    }

    pub fn front(&self) -> Option<&UserPacket> {
        self.queue.front()
    }

    pub fn check_invariants(&self) -> bool {
        self.occupancy <= self.capacity && self.occupancy == self.queue.iter().map(|p| p.size as u64).sum::<u64>()
    }
}
