//! Time-ordered queue of tentative events with lazy invalidation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// What a tentative event will do when it fires.
///
/// Participants are referenced by slot together with the stamp (or serial)
/// they carried when the event was sampled. A mismatch at pop time marks the
/// event stale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Diffusion { slot: u32, stamp: u64 },
    Unimolecular { slot: u32, serial: u64, channel: u32 },
    Bimolecular { a: u32, stamp_a: u64, b: u32, stamp_b: u64, channel: u32 },
    Creation { channel: u32 },
}

#[derive(Debug, Clone, Copy)]
pub struct TentativeEvent {
    pub fire_time: f64,
    /// Insertion order; breaks ties between equal fire times.
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for TentativeEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for TentativeEvent {}

impl PartialOrd for TentativeEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TentativeEvent {
    // Reversed so that the max-heap yields the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_time
            .total_cmp(&self.fire_time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Min-queue on fire time. Stale entries stay in the heap until popped or
/// until a compaction pass sweeps them out.
#[derive(Debug, Clone)]
pub struct EventQueue {
    heap: BinaryHeap<TentativeEvent>,
    next_seq: u64,
    compact_at: usize,
}

const MIN_COMPACT: usize = 1 << 14;

impl Default for EventQueue {
    fn default() -> Self {
        Self::new()
    }
}

impl EventQueue {
    pub fn new() -> Self {
        EventQueue { heap: BinaryHeap::new(), next_seq: 0, compact_at: MIN_COMPACT }
    }

    pub fn push(&mut self, fire_time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(TentativeEvent { fire_time, seq, kind });
    }

    pub fn peek(&self) -> Option<&TentativeEvent> {
        self.heap.peek()
    }

    pub fn pop(&mut self) -> Option<TentativeEvent> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TentativeEvent> {
        self.heap.iter()
    }

    /// True once enough entries have piled up that a sweep is worthwhile.
    pub fn wants_compaction(&self) -> bool {
        self.heap.len() >= self.compact_at
    }

    /// Drops every entry for which `live` is false.
    pub fn compact(&mut self, mut live: impl FnMut(&TentativeEvent) -> bool) {
        let mut v = std::mem::take(&mut self.heap).into_vec();
        v.retain(|e| live(e));
        self.heap = BinaryHeap::from(v);
        self.compact_at = (2 * self.heap.len()).max(MIN_COMPACT);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_time_order_with_fifo_ties() {
        let mut q = EventQueue::new();
        q.push(3.0, EventKind::Creation { channel: 0 });
        q.push(1.0, EventKind::Creation { channel: 1 });
        q.push(1.0, EventKind::Creation { channel: 2 });
        q.push(2.0, EventKind::Creation { channel: 3 });
        let order: Vec<_> = std::iter::from_fn(|| q.pop())
            .map(|e| match e.kind {
                EventKind::Creation { channel } => channel,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(order, vec![1, 2, 3, 0]);
    }

    #[test]
    fn compaction_keeps_live_entries() {
        let mut q = EventQueue::new();
        for i in 0..100u32 {
            q.push(i as f64, EventKind::Creation { channel: i });
        }
        q.compact(|e| matches!(e.kind, EventKind::Creation { channel } if channel % 2 == 0));
        assert_eq!(q.len(), 50);
        assert_eq!(q.pop().unwrap().fire_time, 0.0);
        assert_eq!(q.pop().unwrap().fire_time, 2.0);
    }
}
